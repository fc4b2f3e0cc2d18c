//! Uniform tensor grids on a truncated box, nodal fields and the discrete
//! operators built on them.
//!
//! `R^N` is replaced by `[-L, L]^N` with homogeneous Dirichlet data. Values
//! live on the `n^N` nodes; boundary nodes always carry `0`. The quadrature is
//! the trapezoidal rule and gradients are forward differences on grid edges.
//! With that pairing the `2N+1`-point stencil satisfies a discrete Green
//! identity exactly:
//!
//! ```text
//! Σ_i w_i (−Δ_h u)_i v_i = h^{N-2} Σ_edges (u_b − u_a)(v_b − v_a)
//! ```
//!
//! which is what makes energies and residuals consistent to round-off.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{pairwise_sum, powi, sqrt};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },
    #[error("boundary node {node} carries non-zero value {value}")]
    BoundaryNonZero { node: usize, value: f64 },
    #[error("expected {expected} nodal values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("potential is negative ({value}) at node {node}")]
    NegativePotential { node: usize, value: f64 },
    #[error("negative lambda {0}")]
    NegativeLambda(f64),
    #[error("radius {radius} must lie in (0, {half_extent})")]
    RadiusOutOfRange { radius: f64, half_extent: f64 },
    #[error("mask {inner:?} is not contained in mask {outer:?} (node {node})")]
    MaskNotNested { inner: Region, outer: Region, node: usize },
    #[error("mask {0:?} touches the box boundary")]
    MaskTouchesBoundary(Region),
}

/// Uniform grid on `[-L, L]^N` with `n` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dimension: usize,
    nodes_per_axis: usize,
    half_extent: f64,
}

impl GridSpec {
    pub fn new(dimension: usize, nodes_per_axis: usize, half_extent: f64) -> Result<Self, DomainError> {
        if !(2..=3).contains(&dimension) {
            return Err(DomainError::InvalidGrid("dimension must be 2 or 3"));
        }
        if nodes_per_axis < 9 {
            return Err(DomainError::InvalidGrid("need at least 9 nodes per axis"));
        }
        if nodes_per_axis.is_multiple_of(2) {
            return Err(DomainError::InvalidGrid("nodes per axis must be odd so the origin is a node"));
        }
        if !(half_extent.is_finite() && half_extent > 0.0) {
            return Err(DomainError::InvalidGrid("half extent must be positive and finite"));
        }
        Ok(Self { dimension, nodes_per_axis, half_extent })
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    #[inline]
    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    #[inline]
    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / (self.nodes_per_axis - 1) as f64
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.nodes_per_axis.pow(self.dimension as u32)
    }

    /// `h^N`, the trapezoidal weight of an interior node.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        powi(self.spacing(), self.dimension as i32)
    }

    /// Index step when moving one node along `axis`; axis 0 varies slowest.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.nodes_per_axis.pow((self.dimension - 1 - axis) as u32)
    }

    #[inline]
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_extent + i as f64 * self.spacing()
    }

    /// Per-axis indices of `node`; unused trailing axes are 0.
    pub fn multi_index(&self, node: usize) -> [usize; 3] {
        let n = self.nodes_per_axis;
        let mut idx = [0usize; 3];
        let mut rest = node;
        for axis in (0..self.dimension).rev() {
            idx[axis] = rest % n;
            rest /= n;
        }
        idx
    }

    pub fn node_at(&self, idx: [usize; 3]) -> usize {
        (0..self.dimension).fold(0, |acc, a| acc * self.nodes_per_axis + idx[a])
    }

    /// Coordinates of `node`; unused trailing axes are 0.
    pub fn point(&self, node: usize) -> [f64; 3] {
        let idx = self.multi_index(node);
        let mut x = [0.0; 3];
        for a in 0..self.dimension {
            x[a] = self.axis_coord(idx[a]);
        }
        x
    }

    pub fn radius(&self, node: usize) -> f64 {
        let x = self.point(node);
        sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
    }

    /// The node at the origin.
    pub fn center(&self) -> usize {
        let m = self.nodes_per_axis / 2;
        self.node_at([m, m, m])
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let idx = self.multi_index(node);
        let last = self.nodes_per_axis - 1;
        idx[..self.dimension].iter().any(|&i| i == 0 || i == last)
    }

    /// Trapezoidal weight: `h^N` halved once per axis on which the node sits
    /// on the box face.
    pub fn quadrature_weight(&self, node: usize) -> f64 {
        let idx = self.multi_index(node);
        let last = self.nodes_per_axis - 1;
        let halvings = idx[..self.dimension].iter().filter(|&&i| i == 0 || i == last).count();
        self.cell_volume() / (1u32 << halvings) as f64
    }

    /// Calls `f` on every interior node in increasing index order.
    pub fn for_each_interior<F: FnMut(usize)>(&self, mut f: F) {
        let n = self.nodes_per_axis;
        match self.dimension {
            2 => {
                for i in 1..n - 1 {
                    for j in 1..n - 1 {
                        f(i * n + j);
                    }
                }
            }
            _ => {
                for i in 1..n - 1 {
                    for j in 1..n - 1 {
                        for k in 1..n - 1 {
                            f((i * n + j) * n + k);
                        }
                    }
                }
            }
        }
    }

    /// Calls `f(a, b)` for every grid edge `a → b = a + stride(axis)`.
    pub fn for_each_edge<F: FnMut(usize, usize)>(&self, mut f: F) {
        let n = self.nodes_per_axis;
        for node in 0..self.node_count() {
            let idx = self.multi_index(node);
            for (axis, &k) in idx.iter().enumerate().take(self.dimension) {
                if k + 1 < n {
                    f(node, node + self.stride(axis));
                }
            }
        }
    }

    /// Boundary flag per node.
    pub fn boundary_flags(&self) -> Vec<bool> {
        (0..self.node_count()).map(|i| self.is_boundary(i)).collect()
    }
}

/// Real values on every node of a grid. Boundary values are exactly zero and
/// all entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![0.0; grid.node_count()] }
    }

    /// Samples `f` at interior nodes; boundary nodes get 0.
    pub fn from_fn<F: FnMut([f64; 3]) -> f64>(grid: GridSpec, mut f: F) -> Result<Self, DomainError> {
        let mut values = vec![0.0; grid.node_count()];
        grid.for_each_interior(|node| values[node] = f(grid.point(node)));
        Self::from_values(grid, values)
    }

    /// Wraps nodal values, rejecting non-finite entries and non-zero boundary
    /// values.
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self, DomainError> {
        if values.len() != grid.node_count() {
            return Err(DomainError::LengthMismatch { expected: grid.node_count(), got: values.len() });
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(DomainError::NonFinite { node, value });
        }
        for (node, &value) in values.iter().enumerate() {
            if value != 0.0 && grid.is_boundary(node) {
                return Err(DomainError::BoundaryNonZero { node, value });
            }
        }
        Ok(Self { grid, values })
    }

    /// Wraps values produced by an operation that preserves the invariants.
    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|v| s * v).collect())
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Field) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Field::from_raw(self.grid, self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect())
    }

    /// `(1 - t) self + t other`.
    pub fn lerp(&self, other: &Field, t: f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().zip(&other.values).map(|(a, b)| (1.0 - t) * a + t * b).collect())
    }

    /// Nodewise map; the result is forced to zero on the boundary.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Field {
        let mut out = vec![0.0; self.values.len()];
        self.grid.for_each_interior(|i| out[i] = f(self.values[i]));
        Field::from_raw(self.grid, out)
    }

    pub fn positive_part(&self) -> Field {
        self.map(|v| v.max(0.0))
    }

    /// Quadrature-weighted inner product `Σ w_i u_i v_i`.
    pub fn dot_weighted(&self, other: &Field) -> f64 {
        weighted_dot(&self.grid, &self.values, &other.values)
    }

    pub(crate) fn check_same_grid(&self, other: &Field) -> Result<(), DomainError> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(DomainError::GridMismatch)
        }
    }
}

/// `Σ w_i a_i b_i` over interior nodes (boundary values are zero).
pub(crate) fn weighted_dot(grid: &GridSpec, a: &[f64], b: &[f64]) -> f64 {
    grid.cell_volume() * pairwise_sum(a.len(), |i| a[i] * b[i])
}

/// Trapezoidal integral of `u`.
///
/// Exact for piecewise multilinear interpolants of the nodal values.
pub fn integrate(u: &Field) -> Result<f64, DomainError> {
    if let Some((node, &value)) = u.values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(DomainError::NonFinite { node, value });
    }
    let g = u.grid;
    Ok(pairwise_sum(u.values.len(), |i| {
        let v = u.values[i];
        if v == 0.0 {
            0.0
        } else {
            g.quadrature_weight(i) * v
        }
    }))
}

/// Applies the positive operator `−Δ_h` with the `2N+1`-point stencil.
/// Boundary nodes of the result are zero.
pub fn laplacian_apply(u: &Field) -> Field {
    let mut out = vec![0.0; u.values.len()];
    neg_laplacian_into(&u.grid, &u.values, &mut out);
    Field::from_raw(u.grid, out)
}

pub(crate) fn neg_laplacian_into(grid: &GridSpec, u: &[f64], out: &mut [f64]) {
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let dim = grid.dimension();
    let n = grid.nodes_per_axis();
    let center = 2.0 * dim as f64;
    out.iter_mut().for_each(|o| *o = 0.0);
    match dim {
        2 => grid.for_each_interior(|i| {
            out[i] = (center * u[i] - u[i - 1] - u[i + 1] - u[i - n] - u[i + n]) * inv_h2;
        }),
        _ => {
            let nn = n * n;
            grid.for_each_interior(|i| {
                out[i] = (center * u[i] - u[i - 1] - u[i + 1] - u[i - n] - u[i + n] - u[i - nn] - u[i + nn]) * inv_h2;
            })
        }
    }
}

/// Edge-based gradient pairing `h^{N-2} Σ_edges Δu Δv`.
pub fn grad_pairing(u: &Field, v: &Field) -> f64 {
    grad_pairing_raw(&u.grid, &u.values, &v.values)
}

pub(crate) fn grad_pairing_raw(grid: &GridSpec, u: &[f64], v: &[f64]) -> f64 {
    let n = grid.nodes_per_axis();
    let scale = powi(grid.spacing(), grid.dimension() as i32 - 2);
    let mut total = 0.0;
    for axis in 0..grid.dimension() {
        let stride = grid.stride(axis);
        // Within each block of `stride · n` nodes, the first `stride · (n − 1)`
        // carry an edge `a → a + stride` along `axis`.
        let block = stride * n;
        let span = stride * (n - 1);
        total += pairwise_sum(u.len() / block, |b| {
            let start = b * block;
            pairwise_sum(span, |k| {
                let a = start + k;
                (u[a + stride] - u[a]) * (v[a + stride] - v[a])
            })
        });
    }
    scale * total
}

/// `‖∇u‖²` in the forward-difference quadrature.
pub fn dirichlet_energy(u: &Field) -> f64 {
    grad_pairing(u, u)
}

/// Discrete `‖u‖_λ = (∫ |∇u|² + (1 + λV) u²)^{1/2}`.
pub fn norm_lambda(u: &Field, lam: f64, potential: &Field) -> Result<f64, DomainError> {
    u.check_same_grid(potential)?;
    if !(lam >= 0.0) {
        return Err(DomainError::NegativeLambda(lam));
    }
    if let Some((node, &value)) = potential.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(DomainError::NegativePotential { node, value });
    }
    Ok(sqrt(norm_lambda_sq_raw(&u.grid, &u.values, lam, &potential.values)))
}

pub(crate) fn norm_lambda_sq_raw(grid: &GridSpec, u: &[f64], lam: f64, potential: &[f64]) -> f64 {
    let mass = grid.cell_volume() * pairwise_sum(u.len(), |i| (1.0 + lam * potential[i]) * u[i] * u[i]);
    grad_pairing_raw(grid, u, u) + mass
}

/// H¹ content of a field restricted to a node set: gradient edges with both
/// endpoints in the set, plus the nodal `∫ u²` over the set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionMass {
    pub gradient: f64,
    pub mass: f64,
}

impl RegionMass {
    pub fn total(&self) -> f64 {
        self.gradient + self.mass
    }
}

/// H¹ content of `u` over the nodes where `inside(node)` holds.
pub fn region_mass<P: Fn(usize) -> bool>(u: &Field, inside: P) -> RegionMass {
    let g = u.grid;
    let scale = powi(g.spacing(), g.dimension() as i32 - 2);
    let mut gradient = 0.0;
    g.for_each_edge(|a, b| {
        if inside(a) && inside(b) {
            let d = u.values[b] - u.values[a];
            gradient += d * d;
        }
    });
    let mass =
        pairwise_sum(
            u.values.len(),
            |i| {
                if inside(i) {
                    g.quadrature_weight(i) * u.values[i] * u.values[i]
                } else {
                    0.0
                }
            },
        );
    RegionMass { gradient: scale * gradient, mass }
}

/// H¹ content of `u` outside the ball `B(0, R)`.
pub fn tail_mass(u: &Field, radius: f64) -> Result<RegionMass, DomainError> {
    let g = u.grid;
    if !(radius > 0.0 && radius < g.half_extent()) {
        return Err(DomainError::RadiusOutOfRange { radius, half_extent: g.half_extent() });
    }
    Ok(region_mass(u, |i| g.radius(i) > radius))
}

/// Which of the nested regions a mask describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// The well `Ω`, where the potential vanishes.
    Omega,
    /// The neighbourhood `Ω̃ ⊃ Ω̄` inside which the nonlinearity is untruncated.
    OmegaTilde,
    /// Nodes where the obstacle is positive.
    SuppObstacle,
}

/// Node membership in one of the regions.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    label: Region,
    inside: Vec<bool>,
}

impl RegionMask {
    pub fn from_predicate<P: FnMut(usize) -> bool>(grid: &GridSpec, label: Region, pred: P) -> Self {
        Self { label, inside: (0..grid.node_count()).map(pred).collect() }
    }

    #[inline]
    pub fn label(&self) -> Region {
        self.label
    }

    #[inline]
    pub fn contains(&self, node: usize) -> bool {
        self.inside[node]
    }

    pub fn flags(&self) -> &[bool] {
        &self.inside
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Errors unless every node of `self` is also in `outer`.
    pub fn check_subset_of(&self, outer: &RegionMask) -> Result<(), DomainError> {
        match self.inside.iter().zip(&outer.inside).position(|(&a, &b)| a && !b) {
            None => Ok(()),
            Some(node) => Err(DomainError::MaskNotNested { inner: self.label, outer: outer.label, node }),
        }
    }

    pub fn check_interior(&self, grid: &GridSpec) -> Result<(), DomainError> {
        if self.inside.iter().enumerate().any(|(i, &b)| b && grid.is_boundary(i)) {
            Err(DomainError::MaskTouchesBoundary(self.label))
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn grid2(n: usize, l: f64) -> GridSpec {
        GridSpec::new(2, n, l).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(2, 8, 1.0).is_err());
        assert!(GridSpec::new(2, 10, 1.0).is_err());
        assert!(GridSpec::new(4, 9, 1.0).is_err());
        assert!(GridSpec::new(3, 9, 0.0).is_err());
        let g = grid2(9, 2.0);
        assert_eq!(g.node_count(), 81);
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.point(g.center()), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn multi_index_round_trip() {
        let g = GridSpec::new(3, 9, 1.0).unwrap();
        for node in [0, 5, 100, 400, 728] {
            assert_eq!(g.node_at(g.multi_index(node)), node);
        }
    }

    #[test]
    fn field_rejects_bad_values() {
        let g = grid2(9, 1.0);
        let mut v = vec![0.0; 81];
        v[0] = 1.0;
        assert!(matches!(Field::from_values(g, v), Err(DomainError::BoundaryNonZero { node: 0, .. })));
        let mut v = vec![0.0; 81];
        v[40] = f64::NAN;
        assert!(matches!(Field::from_values(g, v), Err(DomainError::NonFinite { node: 40, .. })));
        assert!(Field::from_fn(g, |_| f64::INFINITY).is_err());
    }

    #[test]
    fn integrate_zero_and_odd() {
        let g = grid2(33, 1.0);
        assert_eq!(integrate(&Field::zeros(g)).unwrap(), 0.0);
        let odd = Field::from_fn(g, |x| x[0]).unwrap();
        assert!(integrate(&odd).unwrap().abs() < 1e-14);
    }

    #[test]
    fn integrate_interior_ones() {
        // Closed form: (n-2)^2 h^2 with h = 2/(n-1).
        let n = 65;
        let g = grid2(n, 1.0);
        let ones = Field::from_fn(g, |_| 1.0).unwrap();
        let h = 2.0 / (n - 1) as f64;
        let exact = ((n - 2) as f64 * h).powi(2);
        let got = integrate(&ones).unwrap();
        assert!((got - exact).abs() < 1e-12);
        assert!((got - 4.0).abs() < 0.25);
    }

    #[test]
    fn laplacian_of_quadratic() {
        let g = grid2(17, 1.0);
        let u = Field::from_fn(g, |x| x[0] * x[0]).unwrap();
        let lu = laplacian_apply(&u);
        let n = 17;
        for i in 2..n - 2 {
            for j in 2..n - 2 {
                assert!((lu.values()[i * n + j] + 2.0).abs() < 1e-10);
            }
        }
        assert!(lu.values().iter().enumerate().all(|(i, &v)| !g.is_boundary(i) || v == 0.0));
    }

    #[test]
    fn laplacian_dirichlet_eigenmode() {
        // cos(πx/(2L)) vanishes at ±L; its stencil eigenvalue per axis is
        // (2/h²)(1 − cos(πh/(2L))).
        for dim in [2, 3] {
            let l = 1.5;
            let g = GridSpec::new(dim, 17, l).unwrap();
            let h = g.spacing();
            let u = Field::from_fn(g, |x| (0..dim).map(|a| libm::cos(PI * x[a] / (2.0 * l))).product()).unwrap();
            let per_axis = 2.0 / (h * h) * (1.0 - libm::cos(PI * h / (2.0 * l)));
            let eig = dim as f64 * per_axis;
            let lu = laplacian_apply(&u);
            g.for_each_interior(|i| {
                assert!((lu.values()[i] - eig * u.values()[i]).abs() < 1e-12, "node {i}");
            });
        }
    }

    #[test]
    fn norm_lambda_basics() {
        let g = grid2(17, 1.0);
        let v = Field::from_fn(g, |x| x[0] * x[0]).unwrap();
        let zero = Field::zeros(g);
        assert_eq!(norm_lambda(&zero, 3.0, &v).unwrap(), 0.0);
        let u = Field::from_fn(g, |x| libm::cos(x[0]) * (1.0 - x[1] * x[1])).unwrap();
        let h1 = sqrt(dirichlet_energy(&u) + integrate(&u.map(|t| t * t)).unwrap());
        assert!((norm_lambda(&u, 0.0, &v).unwrap() - h1).abs() < 1e-14);
        let neg = v.scaled(-1.0);
        assert!(matches!(norm_lambda(&u, 1.0, &neg), Err(DomainError::NegativePotential { .. })));
    }

    #[test]
    fn tail_mass_constant_field() {
        // Gradient part: 4(n-2) boundary-to-interior edges, each c²·h⁰.
        // Mass part: (4L² − πR²)c² up to 2h·perimeter.
        let (n, l, c) = (65, 2.0, 0.7);
        let g = grid2(n, l);
        let u = Field::from_fn(g, |_| c).unwrap();
        let r = l / 2.0;
        let tm = tail_mass(&u, r).unwrap();
        assert!((tm.gradient - 4.0 * (n - 2) as f64 * c * c).abs() < 1e-10);
        let h = g.spacing();
        let geometric = (4.0 * l * l - PI * r * r) * c * c;
        let tol = 2.0 * h * (8.0 * l + 2.0 * PI * r) * c * c;
        assert!((tm.mass - geometric).abs() < tol, "{} vs {}", tm.mass, geometric);
        assert!(tail_mass(&u, l).is_err());
    }

    #[test]
    fn tail_mass_of_compact_support_vanishes() {
        let g = grid2(65, 2.0);
        let r = 1.6;
        let u = Field::from_fn(g, |x| (0.25 * r * r - x[0] * x[0] - x[1] * x[1]).max(0.0)).unwrap();
        assert_eq!(tail_mass(&u, r).unwrap().total(), 0.0);
    }

    #[test]
    fn mask_nesting() {
        let g = grid2(33, 2.0);
        let small = RegionMask::from_predicate(&g, Region::Omega, |i| g.radius(i) < 0.5);
        let big = RegionMask::from_predicate(&g, Region::OmegaTilde, |i| g.radius(i) < 1.0);
        assert!(small.check_subset_of(&big).is_ok());
        assert!(big.check_subset_of(&small).is_err());
        assert!(big.check_interior(&g).is_ok());
        let all = RegionMask::from_predicate(&g, Region::OmegaTilde, |_| true);
        assert!(all.check_interior(&g).is_err());
    }
}
