//! Concrete potential, obstacle and nonlinearity, plus the linear-growth
//! truncation used outside `Ω̃`.
//!
//! For `N = 3` the nonlinearity is `f(t) = μ t^{q−1} + t^{2*−1}` (`2* = 6`); for
//! `N = 2` it is `f(t) = ν t^p e^{α₀ t²}`. Both vanish for `t ≤ 0`. With
//! `k = 2q/(q−2)` (resp. `2θ/(θ−2)`) and `a` the positive root of
//! `f(a) = a/k`, the truncated nonlinearity is
//!
//! ```text
//! h(t) = f(t)  for t ≤ a,      h(t) = t/k  for t ≥ a,
//! g(x, t) = f(t) on Ω̃,         g(x, t) = h(t) off Ω̃.
//! ```

use alloc::sync::Arc;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::RegionMask;
use crate::math::{exp, ln, pow_real, powf, sqrt};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid potential: {0}")]
    InvalidPotential(&'static str),
    #[error("invalid obstacle: {0}")]
    InvalidObstacle(&'static str),
    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(&'static str),
    #[error("nonlinearity variant does not match dimension {dimension}")]
    DimensionMismatch { dimension: usize },
    #[error("Ambrosetti–Rabinowitz check θF(t) ≤ t f(t) fails at t = {t}")]
    ArCondition { t: f64 },
    #[error("f(t)/t − 1/k has no sign change on [1e-12, 1e6]")]
    NoBracket,
}

/// `V(x) = V₀ · min(1, dist(x, B(0, r_Ω))²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub well_radius: f64,
    pub scale: f64,
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.well_radius.is_finite() && self.well_radius > 0.0) {
            return Err(ModelError::InvalidPotential("well radius must be positive"));
        }
        if !(self.scale.is_finite() && self.scale >= 0.0) {
            return Err(ModelError::InvalidPotential("scale must be non-negative"));
        }
        Ok(())
    }

    pub fn value(&self, x: [f64; 3]) -> f64 {
        let r = sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        let d = (r - self.well_radius).max(0.0);
        self.scale * (d * d).min(1.0)
    }
}

/// Parabolic bump of height `c_φ` on `B(x₀, r_φ)`, descending to
/// `−c_neg` outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub height: f64,
    pub outside_depth: f64,
}

impl ObstacleSpec {
    /// Checks the profile against the well: the positive part must sit inside
    /// `B(0, r_Ω)`.
    pub fn validate(&self, dimension: usize, potential: &PotentialSpec) -> Result<(), ModelError> {
        if self.center.len() != dimension {
            return Err(ModelError::InvalidObstacle("center must have one entry per dimension"));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(ModelError::InvalidObstacle("center must be finite"));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(ModelError::InvalidObstacle("radius must be positive"));
        }
        if !(self.height.is_finite() && self.height > 0.0) {
            return Err(ModelError::InvalidObstacle("height must be positive"));
        }
        if !(self.outside_depth.is_finite() && self.outside_depth >= 0.0) {
            return Err(ModelError::InvalidObstacle("outside depth must be non-negative"));
        }
        let c = sqrt(self.center.iter().map(|c| c * c).sum());
        if c + self.radius >= potential.well_radius {
            return Err(ModelError::InvalidObstacle("support of the positive part must lie inside the well"));
        }
        Ok(())
    }

    pub fn value(&self, x: [f64; 3]) -> f64 {
        let mut d2 = 0.0;
        for (a, c) in self.center.iter().enumerate() {
            d2 += (x[a] - c) * (x[a] - c);
        }
        let s = d2 / (self.radius * self.radius);
        if s <= 1.0 {
            self.height * (1.0 - s)
        } else {
            -self.outside_depth * (s - 1.0).min(1.0)
        }
    }
}

/// The untruncated nonlinearity `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    /// `μ t^{q−1} + t^{2*−1}` for `N ≥ 3`, `2 < q < 2*`.
    PowerCritical { mu: f64, q: f64 },
    /// `ν t^p e^{α₀ t²}` for `N = 2`, with `2 < θ ≤ p + 1`.
    ExpCritical { nu: f64, p: f64, alpha0: f64, theta: f64 },
}

/// `e^{s}` is treated as overflow beyond this exponent.
pub const MAX_EXPONENT: f64 = 700.0;

const PRIMITIVE_TABLE_INTERVALS: usize = 4096;

// Six-point Gauss–Legendre rule on [-1, 1].
const GL_NODES: [f64; 3] = [0.238_619_186_083_196_9, 0.661_209_386_466_264_5, 0.932_469_514_203_152];
const GL_WEIGHTS: [f64; 3] = [0.467_913_934_572_691, 0.360_761_573_048_138_6, 0.171_324_492_379_170_3];

/// Evaluable form of a [`NonlinearitySpec`] on a given dimension.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    spec: NonlinearitySpec,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Power { mu: f64, q: f64, crit: f64 },
    Exp { nu: f64, p: f64, alpha0: f64, table: Arc<PrimitiveTable> },
}

/// `F(t) = ν ∫₀ᵗ s^p e^{α₀ s²} ds`, cached on a uniform knot grid up to the
/// overflow cap. Off-knot values add a Gauss–Legendre integral from the
/// nearest knot, so `F' = f` to quadrature accuracy.
#[derive(Debug, Clone)]
struct PrimitiveTable {
    step: f64,
    cap: f64,
    values: Vec<f64>,
}

impl Nonlinearity {
    pub fn new(spec: NonlinearitySpec, dimension: usize) -> Result<Self, ModelError> {
        let kind = match spec {
            NonlinearitySpec::PowerCritical { mu, q } => {
                if dimension < 3 {
                    return Err(ModelError::DimensionMismatch { dimension });
                }
                let crit = 2.0 * dimension as f64 / (dimension as f64 - 2.0);
                if !(mu.is_finite() && mu > 0.0) {
                    return Err(ModelError::InvalidNonlinearity("mu must be positive"));
                }
                if !(q > 2.0 && q < crit) {
                    return Err(ModelError::InvalidNonlinearity("q must lie strictly between 2 and 2*"));
                }
                Kind::Power { mu, q, crit }
            }
            NonlinearitySpec::ExpCritical { nu, p, alpha0, theta } => {
                if dimension != 2 {
                    return Err(ModelError::DimensionMismatch { dimension });
                }
                if !(nu.is_finite() && nu > 0.0) {
                    return Err(ModelError::InvalidNonlinearity("nu must be positive"));
                }
                if !(p.is_finite() && p > 1.0) {
                    return Err(ModelError::InvalidNonlinearity("p must exceed 1"));
                }
                if !(alpha0.is_finite() && alpha0 > 0.0) {
                    return Err(ModelError::InvalidNonlinearity("alpha0 must be positive"));
                }
                if !(theta.is_finite() && theta > 2.0) {
                    return Err(ModelError::InvalidNonlinearity("theta must exceed 2"));
                }
                if theta > p + 1.0 {
                    return Err(ModelError::InvalidNonlinearity("theta must not exceed p + 1"));
                }
                let table = Arc::new(PrimitiveTable::build(nu, p, alpha0));
                Kind::Exp { nu, p, alpha0, table }
            }
        };
        let nl = Self { spec, kind };
        nl.check_ar_condition()?;
        Ok(nl)
    }

    pub fn spec(&self) -> &NonlinearitySpec {
        &self.spec
    }

    /// The superquadraticity exponent: `q` for the power case, `θ` otherwise.
    pub fn ar_exponent(&self) -> f64 {
        match self.spec {
            NonlinearitySpec::PowerCritical { q, .. } => q,
            NonlinearitySpec::ExpCritical { theta, .. } => theta,
        }
    }

    /// Largest `t` at which `f` is finite without hitting the overflow guard.
    pub fn overflow_threshold(&self) -> f64 {
        match &self.kind {
            Kind::Power { .. } => f64::INFINITY,
            Kind::Exp { table, .. } => table.cap,
        }
    }

    pub fn f(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Power { mu, q, crit } => mu * pow_real(t, q - 1.0) + pow_real(t, crit - 1.0),
            Kind::Exp { nu, p, alpha0, .. } => {
                let s = alpha0 * t * t;
                if s > MAX_EXPONENT {
                    f64::INFINITY
                } else {
                    nu * pow_real(t, *p) * exp(s)
                }
            }
        }
    }

    pub fn f_prime(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Power { mu, q, crit } => {
                mu * (q - 1.0) * pow_real(t, q - 2.0) + (crit - 1.0) * pow_real(t, crit - 2.0)
            }
            Kind::Exp { nu, p, alpha0, .. } => {
                let s = alpha0 * t * t;
                if s > MAX_EXPONENT {
                    f64::INFINITY
                } else {
                    nu * exp(s) * (p * pow_real(t, p - 1.0) + 2.0 * alpha0 * pow_real(t, p + 1.0))
                }
            }
        }
    }

    /// `F(t) = ∫₀ᵗ f`.
    pub fn primitive(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Power { mu, q, crit } => mu * pow_real(t, *q) / q + pow_real(t, *crit) / crit,
            Kind::Exp { nu, p, alpha0, table } => table.eval(*nu, *p, *alpha0, t),
        }
    }

    /// Largest sampled `|f′(t)|e^{−α₀t²}` over `(0, t_max]` (exponential case
    /// only; `None` for the power case). The ratio grows polynomially, so the
    /// value depends on `t_max` and is a diagnostic, not a constant.
    pub fn derivative_growth_ratio(&self, t_max: f64, samples: usize) -> Option<f64> {
        let Kind::Exp { alpha0, .. } = &self.kind else {
            return None;
        };
        let t_max = t_max.min(self.overflow_threshold());
        let mut best: f64 = 0.0;
        for j in 1..=samples.max(1) {
            let t = t_max * j as f64 / samples.max(1) as f64;
            best = best.max(self.f_prime(t) * exp(-alpha0 * t * t));
        }
        Some(best)
    }

    /// `ln(f(t)/t)`, increasing in `t > 0`.
    fn log_ratio(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Power { mu, q, crit } => {
                let a = ln(*mu) + (q - 2.0) * ln(t);
                let b = (crit - 2.0) * ln(t);
                let m = a.max(b);
                m + ln(exp(a - m) + exp(b - m))
            }
            Kind::Exp { nu, p, alpha0, .. } => ln(*nu) + (p - 1.0) * ln(t) + alpha0 * t * t,
        }
    }

    fn check_ar_condition(&self) -> Result<(), ModelError> {
        let theta = self.ar_exponent();
        let top = match self.overflow_threshold() {
            c if c.is_finite() => 0.99 * c,
            _ => 10.0,
        };
        for j in 1..=400 {
            let t = top * powf(1e-6, 1.0 - j as f64 / 400.0);
            let big_f = self.primitive(t);
            if !(big_f > 0.0 && theta * big_f <= t * self.f(t) * (1.0 + 1e-12)) {
                return Err(ModelError::ArCondition { t });
            }
        }
        Ok(())
    }
}

fn gl_integral<F: Fn(f64) -> f64>(lo: f64, hi: f64, f: F) -> f64 {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut s = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        s += w * (f(mid - half * x) + f(mid + half * x));
    }
    half * s
}

impl PrimitiveTable {
    fn build(nu: f64, p: f64, alpha0: f64) -> Self {
        let cap = sqrt(MAX_EXPONENT / alpha0);
        let step = cap / PRIMITIVE_TABLE_INTERVALS as f64;
        let mut values = Vec::with_capacity(PRIMITIVE_TABLE_INTERVALS + 1);
        values.push(0.0);
        for i in 1..=PRIMITIVE_TABLE_INTERVALS {
            let t = i as f64 * step;
            let v = if alpha0 * t * t <= 1.0 {
                Self::series(nu, p, alpha0, t)
            } else {
                values[i - 1] + gl_integral(t - step, t, |s| nu * powf(s, p) * exp(alpha0 * s * s))
            };
            values.push(v);
        }
        Self { step, cap, values }
    }

    /// `ν Σ_j α₀^j t^{p+1+2j} / (j! (p+1+2j))`, used where `α₀ t² ≤ 1`.
    fn series(nu: f64, p: f64, alpha0: f64, t: f64) -> f64 {
        let s = alpha0 * t * t;
        let lead = powf(t, p + 1.0);
        let mut coef = 1.0;
        let mut sum = 0.0;
        for j in 0..60 {
            let term = coef / (p + 1.0 + 2.0 * j as f64);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
            coef *= s / (j + 1) as f64;
        }
        nu * lead * sum
    }

    fn eval(&self, nu: f64, p: f64, alpha0: f64, t: f64) -> f64 {
        if alpha0 * t * t <= 1.0 {
            return Self::series(nu, p, alpha0, t);
        }
        if t > self.cap {
            return f64::INFINITY;
        }
        let i = libm::round(t / self.step) as usize;
        let i = i.min(PRIMITIVE_TABLE_INTERVALS);
        let knot = i as f64 * self.step;
        self.values[i] + gl_integral(knot, t, |s| nu * powf(s, p) * exp(alpha0 * s * s))
    }
}

/// The pair `(k, a)` splicing `h(t) = t/k` onto `f` at `f(a) = a/k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationParams {
    pub k: f64,
    pub a: f64,
}

/// Builds `(k, a)`: `k` from the superquadraticity exponent, `a` by bisection
/// on `ln(f(t)/t) = −ln k` over `[1e-12, 1e6]` followed by a Newton polish on
/// `f(a) − a/k`.
pub fn truncation_build(nl: &Nonlinearity) -> Result<TruncationParams, ModelError> {
    let theta = nl.ar_exponent();
    let k = 2.0 * theta / (theta - 2.0);
    let target = -ln(k);
    let (mut lo, mut hi) = (1e-12_f64, 1e6_f64);
    let (flo, fhi) = (nl.log_ratio(lo) - target, nl.log_ratio(hi) - target);
    if !(flo < 0.0 && fhi > 0.0) {
        return Err(ModelError::NoBracket);
    }
    for _ in 0..200 {
        let mid = sqrt(lo * hi);
        if nl.log_ratio(mid) - target < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    let mut a = 0.5 * (lo + hi);
    let resid = |a: f64| nl.f(a) - a / k;
    let mut r = resid(a);
    for _ in 0..5 {
        let slope = nl.f_prime(a) - 1.0 / k;
        if slope == 0.0 || r == 0.0 {
            break;
        }
        let cand = a - r / slope;
        let rc = resid(cand);
        if rc.abs() < r.abs() {
            a = cand;
            r = rc;
        } else {
            break;
        }
    }
    Ok(TruncationParams { k, a })
}

/// A nonlinearity together with its truncation.
#[derive(Debug, Clone)]
pub struct Truncation {
    nl: Nonlinearity,
    params: TruncationParams,
    primitive_at_a: f64,
}

impl Truncation {
    pub fn new(nl: Nonlinearity) -> Result<Self, ModelError> {
        let params = truncation_build(&nl)?;
        let primitive_at_a = nl.primitive(params.a);
        Ok(Self { nl, params, primitive_at_a })
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn params(&self) -> TruncationParams {
        self.params
    }

    pub fn h(&self, t: f64) -> f64 {
        if t <= self.params.a {
            self.nl.f(t)
        } else {
            t / self.params.k
        }
    }

    pub fn h_prime(&self, t: f64) -> f64 {
        if t < self.params.a {
            self.nl.f_prime(t)
        } else {
            1.0 / self.params.k
        }
    }

    pub fn big_h(&self, t: f64) -> f64 {
        let TruncationParams { k, a } = self.params;
        if t <= a {
            self.nl.primitive(t)
        } else {
            self.primitive_at_a + (t * t - a * a) / (2.0 * k)
        }
    }

    /// `g(x, t)` for a node inside (`true`) or outside `Ω̃`.
    #[inline]
    pub fn g(&self, in_tilde: bool, t: f64) -> f64 {
        if in_tilde {
            self.nl.f(t)
        } else {
            self.h(t)
        }
    }

    /// `G(x, t)`, the primitive of `g` in `t`.
    #[inline]
    pub fn big_g(&self, in_tilde: bool, t: f64) -> f64 {
        if in_tilde {
            self.nl.primitive(t)
        } else {
            self.big_h(t)
        }
    }

    /// `∂_t g(x, t)`.
    #[inline]
    pub fn g_t(&self, in_tilde: bool, t: f64) -> f64 {
        if in_tilde {
            self.nl.f_prime(t)
        } else {
            self.h_prime(t)
        }
    }
}

/// `g(x_node, t)` with `Ω̃` membership read from `tilde`.
pub fn g_eval(node: usize, t: f64, tr: &Truncation, tilde: &RegionMask) -> f64 {
    tr.g(tilde.contains(node), t)
}

/// `G(x_node, t)` with `Ω̃` membership read from `tilde`.
pub fn big_g_eval(node: usize, t: f64, tr: &Truncation, tilde: &RegionMask) -> f64 {
    tr.big_g(tilde.contains(node), t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power(mu: f64, q: f64) -> Nonlinearity {
        Nonlinearity::new(NonlinearitySpec::PowerCritical { mu, q }, 3).unwrap()
    }

    fn expo() -> Nonlinearity {
        Nonlinearity::new(NonlinearitySpec::ExpCritical { nu: 4.0, p: 3.0, alpha0: 1.0, theta: 4.0 }, 2).unwrap()
    }

    #[test]
    fn variant_dimension_checks() {
        assert!(Nonlinearity::new(NonlinearitySpec::PowerCritical { mu: 1.0, q: 4.0 }, 2).is_err());
        assert!(
            Nonlinearity::new(NonlinearitySpec::ExpCritical { nu: 1.0, p: 3.0, alpha0: 1.0, theta: 4.0 }, 3).is_err()
        );
        assert!(Nonlinearity::new(NonlinearitySpec::PowerCritical { mu: 1.0, q: 6.0 }, 3).is_err());
        assert!(
            Nonlinearity::new(NonlinearitySpec::ExpCritical { nu: 1.0, p: 2.0, alpha0: 1.0, theta: 3.5 }, 2).is_err()
        );
    }

    #[test]
    fn power_k_values() {
        assert_eq!(truncation_build(&power(1.0, 4.0)).unwrap().k, 4.0);
        assert_eq!(truncation_build(&power(1.0, 3.0)).unwrap().k, 6.0);
        assert_eq!(truncation_build(&expo()).unwrap().k, 4.0);
    }

    /// Plain bisection on a³ + a⁵ − a/4 over [0.1, 1].
    fn bisection_oracle() -> f64 {
        let (mut lo, mut hi) = (0.1_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.powi(3) + mid.powi(5) - mid / 4.0 < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn power_root_matches_oracle() {
        let tp = truncation_build(&power(1.0, 4.0)).unwrap();
        let oracle = bisection_oracle();
        assert!((oracle - 0.455_090).abs() < 1e-6);
        assert!((tp.a - oracle).abs() < 1e-12);
        assert!((tp.a - libm::sqrt((libm::sqrt(2.0) - 1.0) / 2.0)).abs() < 1e-14);
        let nl = power(1.0, 4.0);
        assert!((nl.f(tp.a) - tp.a / tp.k).abs() <= 1e-12 * tp.a / tp.k);
    }

    #[test]
    fn derivative_growth_ratio_is_diagnostic_only() {
        let power = Nonlinearity::new(NonlinearitySpec::PowerCritical { mu: 1.0, q: 4.0 }, 3).unwrap();
        assert_eq!(power.derivative_growth_ratio(2.0, 100), None);
        let e =
            Nonlinearity::new(NonlinearitySpec::ExpCritical { nu: 2.0, p: 3.0, alpha0: 1.0, theta: 4.0 }, 2).unwrap();
        // f′e^{−t²} = 2(3t² + 2t⁴), increasing, so the sample at t_max wins.
        let r = e.derivative_growth_ratio(2.0, 100).unwrap();
        assert!((r - 2.0 * (12.0 + 32.0)).abs() <= 1e-9 * r);
        assert!(e.derivative_growth_ratio(4.0, 100).unwrap() > r);
    }

    #[test]
    fn exp_root_residual() {
        let nl = expo();
        let tp = truncation_build(&nl).unwrap();
        assert!((nl.f(tp.a) - tp.a / tp.k).abs() <= 1e-12 * tp.a / tp.k);
    }

    #[test]
    fn g_values() {
        let tr = Truncation::new(power(1.0, 4.0)).unwrap();
        let a = tr.params().a;
        for inside in [true, false] {
            assert_eq!(tr.g(inside, -0.3), 0.0);
            assert_eq!(tr.big_g(inside, 0.0), 0.0);
        }
        assert!((tr.g(false, 2.0 * a) - 2.0 * a / 4.0).abs() < 1e-15);
        assert!((tr.g(true, 0.2) - 0.00832).abs() < 1e-15);
        let t = 1.7 * a;
        let expected = tr.nonlinearity().primitive(a) + (t * t - a * a) / 8.0;
        assert!((tr.big_g(false, t) - expected).abs() < 1e-15);
    }

    #[test]
    fn exp_primitive_matches_direct_quadrature() {
        // Composite Simpson on a fine grid as an independent check.
        let nl = expo();
        for &t in &[0.05, 0.7, 1.3, 2.2, 3.1] {
            let n = 20_000;
            let hstep = t / n as f64;
            let f = |s: f64| 4.0 * s * s * s * libm::exp(s * s);
            let mut s = f(0.0) + f(t);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * hstep);
            }
            let simpson = s * hstep / 3.0;
            let got = nl.primitive(t);
            assert!((got - simpson).abs() <= 1e-11 * simpson, "t={t}: {got} vs {simpson}");
        }
    }

    #[test]
    fn potential_and_obstacle_profiles() {
        let v = PotentialSpec { well_radius: 1.0, scale: 3.0 };
        assert_eq!(v.value([0.5, 0.0, 0.0]), 0.0);
        assert!((v.value([1.5, 0.0, 0.0]) - 0.75).abs() < 1e-15);
        assert_eq!(v.value([5.0, 0.0, 0.0]), 3.0);
        let ob = ObstacleSpec { center: alloc::vec![0.2, 0.0], radius: 0.5, height: 0.1, outside_depth: 0.05 };
        assert!(ob.validate(2, &v).is_ok());
        assert_eq!(ob.value([0.2, 0.0, 0.0]), 0.1);
        assert!(ob.value([0.2, 0.6, 0.0]) < 0.0);
        assert_eq!(ob.value([3.0, 0.0, 0.0]), -0.05);
        let bad = ObstacleSpec { center: alloc::vec![0.7, 0.0], ..ob.clone() };
        assert!(bad.validate(2, &v).is_err());
        assert!(ob.validate(3, &v).is_err());
    }
}
