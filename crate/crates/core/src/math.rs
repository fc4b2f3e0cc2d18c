//! Thin wrappers over `libm` so the rest of the crate reads like std code.

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

/// `x^y`, by repeated multiplication when `y` is a small integer.
#[inline]
pub(crate) fn pow_real(x: f64, y: f64) -> f64 {
    if y == (y as i32) as f64 && (0.0..=16.0).contains(&y) {
        powi(x, y as i32)
    } else {
        powf(x, y)
    }
}

#[inline]
pub(crate) fn powi(x: f64, n: i32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n.unsigned_abs() {
        acc *= x;
    }
    if n < 0 {
        1.0 / acc
    } else {
        acc
    }
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

/// Sum of `term(i)` for `i in 0..n`, reduced pairwise in a fixed order.
///
/// The reduction tree depends only on `n`, so results are reproducible
/// bit-for-bit and the rounding error grows like `log n`.
pub(crate) fn pairwise_sum<F: Fn(usize) -> f64>(n: usize, term: F) -> f64 {
    fn go<F: Fn(usize) -> f64>(lo: usize, hi: usize, term: &F) -> f64 {
        if hi - lo <= 64 {
            let mut s = 0.0;
            for i in lo..hi {
                s += term(i);
            }
            s
        } else {
            let mid = lo + (hi - lo) / 2;
            go(lo, mid, term) + go(mid, hi, term)
        }
    }
    if n == 0 {
        0.0
    } else {
        go(0, n, &term)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let s = pairwise_sum(1000, |i| i as f64);
        assert_eq!(s, 499_500.0);
        assert_eq!(pairwise_sum(0, |_| 1.0), 0.0);
    }
}
