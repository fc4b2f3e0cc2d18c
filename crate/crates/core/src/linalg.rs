//! Matrix-free Krylov solvers for the symmetric nodal systems that appear in
//! the descent and Newton steps.
//!
//! All operators here are `−Δ_h + diag(c)` on interior nodes with zero rows on
//! the boundary, so vectors stay zero on boundary nodes throughout.

use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{neg_laplacian_into, GridSpec};
use crate::math::{pairwise_sum, sqrt};

/// `y = A x` for a symmetric operator.
#[allow(clippy::len_without_is_empty)]
pub trait LinearOperator {
    fn len(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Diagonal used for Jacobi preconditioning; must be positive.
    fn diagonal(&self) -> Vec<f64>;
}

/// `−Δ_h + diag(shift)` on interior nodes.
#[derive(Debug, Clone)]
pub struct ShiftedLaplacian<'a> {
    grid: GridSpec,
    shift: &'a [f64],
}

impl<'a> ShiftedLaplacian<'a> {
    pub fn new(grid: GridSpec, shift: &'a [f64]) -> Self {
        debug_assert_eq!(shift.len(), grid.node_count());
        Self { grid, shift }
    }
}

impl LinearOperator for ShiftedLaplacian<'_> {
    fn len(&self) -> usize {
        self.grid.node_count()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        neg_laplacian_into(&self.grid, x, y);
        let shift = self.shift;
        self.grid.for_each_interior(|i| y[i] += shift[i] * x[i]);
    }

    fn diagonal(&self) -> Vec<f64> {
        let h = self.grid.spacing();
        let center = 2.0 * self.grid.dimension() as f64 / (h * h);
        let mut d = vec![1.0; self.len()];
        self.grid.for_each_interior(|i| d[i] = center + self.shift[i]);
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final relative residual (preconditioned norm for MINRES).
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    pairwise_sum(a.len(), |i| a[i] * b[i])
}

/// Jacobi-preconditioned conjugate gradients for an SPD operator. `x` holds
/// the initial guess on entry.
pub fn conjugate_gradient<A: LinearOperator>(
    op: &A,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> SolveStats {
    let n = op.len();
    let diag = op.diagonal();
    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let bnorm = sqrt(dot(b, b));
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return SolveStats { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = sqrt(dot(&r, &r)) / bnorm;
    let mut it = 0;
    while rel > tol && it < max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rel = sqrt(dot(&r, &r)) / bnorm;
        it += 1;
    }
    SolveStats { iterations: it, relative_residual: rel, converged: rel <= tol }
}

/// Jacobi-preconditioned MINRES for a symmetric, possibly indefinite,
/// operator. `x` holds the initial guess on entry.
///
/// Follows the Paige–Saunders recurrences; the reported residual is in the
/// preconditioner norm.
pub fn minres<A: LinearOperator>(op: &A, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> SolveStats {
    let n = op.len();
    let diag = op.diagonal();
    let mut r1 = vec![0.0; n];
    op.apply(x, &mut r1);
    for i in 0..n {
        r1[i] = b[i] - r1[i];
    }
    let mut y: Vec<f64> = r1.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let beta1 = sqrt(dot(&r1, &y).max(0.0));
    if beta1 == 0.0 {
        return SolveStats { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut r2 = r1.clone();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0, 0.0);
    let mut rel = 1.0;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        op.apply(&v, &mut y);
        if it >= 2 {
            let c = beta / oldb;
            for i in 0..n {
                y[i] -= c * r1[i];
            }
        }
        let alfa = dot(&v, &y);
        let c = alfa / beta;
        for i in 0..n {
            y[i] -= c * r2[i];
        }
        core::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        for i in 0..n {
            y[i] = r2[i] / diag[i];
        }
        oldb = beta;
        beta = sqrt(dot(&r2, &y).max(0.0));

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = libm::hypot(gbar, beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        core::mem::swap(&mut w1, &mut w2);
        core::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }
        rel = phibar / beta1;
        if rel <= tol || beta == 0.0 {
            break;
        }
    }
    SolveStats { iterations: it, relative_residual: rel, converged: rel <= tol }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Field;

    fn residual<A: LinearOperator>(op: &A, b: &[f64], x: &[f64]) -> f64 {
        let mut ax = vec![0.0; op.len()];
        op.apply(x, &mut ax);
        sqrt(ax.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()) / sqrt(dot(b, b))
    }

    #[test]
    fn cg_solves_screened_poisson() {
        let g = GridSpec::new(2, 33, 2.0).unwrap();
        let shift: Vec<f64> = (0..g.node_count()).map(|i| 1.0 + 50.0 * g.radius(i)).collect();
        let op = ShiftedLaplacian::new(g, &shift);
        let b = Field::from_fn(g, |x| libm::exp(-x[0] * x[0]) * x[1]).unwrap();
        let mut x = vec![0.0; g.node_count()];
        let st = conjugate_gradient(&op, b.values(), &mut x, 1e-12, 2000);
        assert!(st.converged);
        assert!(residual(&op, b.values(), &x) < 1e-11);
        assert!(x.iter().enumerate().all(|(i, &v)| !g.is_boundary(i) || v == 0.0));
    }

    #[test]
    fn minres_handles_indefinite_shift() {
        // Shift below the smallest Dirichlet eigenvalue makes the operator
        // indefinite; MINRES must still drive the residual down.
        let g = GridSpec::new(2, 33, 1.0).unwrap();
        let h = g.spacing();
        let lambda_min = 2.0 * 2.0 / (h * h) * (1.0 - libm::cos(core::f64::consts::PI * h / 2.0));
        let shift = vec![-1.5 * lambda_min; g.node_count()];
        let op = ShiftedLaplacian::new(g, &shift);
        let b = Field::from_fn(g, |x| 1.0 + x[0] - x[1] * x[1]).unwrap();
        let mut x = vec![0.0; g.node_count()];
        let st = minres(&op, b.values(), &mut x, 1e-12, 5000);
        assert!(st.converged, "{st:?}");
        assert!(residual(&op, b.values(), &x) < 1e-8);
    }
}
