//! Critical-point search for `I_{λ,ε}`.
//!
//! A discretized path from `φ⁺` to a negative-energy endpoint `e` is deformed
//! by Sobolev-gradient descent on its highest point until that point is close
//! to a saddle; damped Newton with MINRES inner solves then refines it to a
//! critical point. Also hosts the geometry check around `φ⁺`, the measured
//! embedding constants, the structural and norm bounds satisfied by critical
//! points, and the discrete Sobolev-constant estimator.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{dirichlet_energy, DomainError, Field, GridSpec};
use crate::energy::{energy_total, linearization_shift, residual, EnergyError, ProblemSpec};
use crate::linalg::{conjugate_gradient, minres, LinearOperator, ShiftedLaplacian};
use crate::math::{exp, pairwise_sum, pow_real, powf, sin, sqrt};
use crate::model::NonlinearitySpec;
use crate::sample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Number of path nodes `m` (endpoints included).
    pub path_points: usize,
    /// Target for the scaled residual `‖r‖_∞ / (1 + ‖u‖_∞)`.
    pub grad_tol: f64,
    pub max_outer: usize,
    pub armijo_c: f64,
    pub armijo_backtrack: f64,
    /// Relative tolerance of the inner MINRES solves.
    pub newton_tol: f64,
    pub newton_max: usize,
    pub rng_seed: u64,
    /// The path phase hands over to Newton once the Sobolev gradient at the
    /// path maximum is below `newton_gate · ‖u‖_λ`.
    pub newton_gate: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            path_points: 24,
            grad_tol: 1e-9,
            max_outer: 4000,
            armijo_c: 1e-4,
            armijo_backtrack: 0.5,
            newton_tol: 1e-12,
            newton_max: 40,
            rng_seed: 7,
            newton_gate: 1e-2,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.path_points < 8 {
            return Err(SolverError::InvalidConfig("path_points must be at least 8"));
        }
        if !(self.grad_tol >= 1e-12 && self.grad_tol.is_finite()) {
            return Err(SolverError::InvalidConfig("grad_tol must be at least 1e-12"));
        }
        if self.max_outer == 0 || self.newton_max == 0 {
            return Err(SolverError::InvalidConfig("iteration limits must be positive"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 0.5) {
            return Err(SolverError::InvalidConfig("armijo_c must lie in (0, 1/2)"));
        }
        if !(self.armijo_backtrack > 0.0 && self.armijo_backtrack < 1.0) {
            return Err(SolverError::InvalidConfig("armijo_backtrack must lie in (0, 1)"));
        }
        if !(self.newton_tol > 0.0 && self.newton_tol < 1.0) {
            return Err(SolverError::InvalidConfig("newton_tol must lie in (0, 1)"));
        }
        if !(self.newton_gate > 0.0 && self.newton_gate.is_finite()) {
            return Err(SolverError::InvalidConfig("newton_gate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("no scaling t* ≤ {max_scale} of the obstacle reaches negative energy")]
    NoEndpoint { max_scale: f64 },
    #[error("mountain-pass geometry violated: min I on the sphere {min_on_sphere} < rho {rho}")]
    Geometry { rho: f64, min_on_sphere: f64, report: GeometryReport },
    #[error("critical point collapsed to the trivial branch (level {level})")]
    Collapsed { level: f64 },
    #[error("Sobolev quotient descent did not converge in {iterations} iterations")]
    SobolevNotConverged { iterations: usize, last: f64 },
    #[error("the Sobolev constant enters the level bound for N = 3 only")]
    NotThreeDimensional,
    #[error("{0}")]
    Unsupported(&'static str),
}

/// Outcome of the path method, optionally refined by Newton.
#[derive(Debug, Clone, PartialEq)]
pub struct MountainPassResult {
    pub u: Field,
    /// Candidate mountain-pass level `c_{λ,ε}`.
    pub level: f64,
    /// Scaled residual `‖r‖_∞ / (1 + ‖u‖_∞)`.
    pub residual_norm: f64,
    /// Path maximum after each outer iteration.
    pub path_max_history: Vec<f64>,
    /// Relative descent-gradient norm at the path maximum per outer iteration.
    pub gradient_history: Vec<f64>,
    pub refined: bool,
    /// Outer (path) iterations.
    pub iterations: usize,
    pub newton: NewtonOutcome,
}

/// Log of a Newton refinement.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NewtonOutcome {
    pub iterations: usize,
    /// Scaled residual at every iterate, the starting point included.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Set when a Newton step failed to reduce the residual and a
    /// residual-descent step was taken instead.
    pub fallback: bool,
}

/// `‖r‖_∞ / (1 + ‖u‖_∞)`.
pub fn residual_norm(u: &Field, ps: &ProblemSpec) -> Result<f64, SolverError> {
    let r = residual(u, ps)?;
    Ok(r.max_abs() / (1.0 + u.max_abs()))
}

/// `A⁻¹ b` for `A = −Δ_h + (1 + λV)`, the Riesz map of `⟨·,·⟩_λ` up to the
/// quadrature weight.
fn riesz(ps: &ProblemSpec, shift: &[f64], b: &[f64]) -> Vec<f64> {
    let op = ShiftedLaplacian::new(*ps.grid(), shift);
    let mut x = vec![0.0; b.len()];
    conjugate_gradient(&op, b, &mut x, 1e-11, 20 * ps.grid().nodes_per_axis() + 2000);
    x
}

fn energy_or_neg_inf(u: &Field, ps: &ProblemSpec) -> Result<f64, SolverError> {
    match energy_total(u, ps) {
        Ok(e) => Ok(e),
        Err(EnergyError::Overflow { .. }) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e.into()),
    }
}

/// Measured discrete embedding constant `sup |u|_s / ‖u‖_λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingEstimate {
    pub exponent: f64,
    pub constant: f64,
    pub iterations: usize,
}

/// Estimates `sup |u|_s / ‖u‖_λ` by the nonlinear power iteration
/// `u ← A⁻¹(|u|^{s−2}u)` normalized in `‖·‖_λ`, started from a bump in the
/// well. For `s = 2` this is inverse iteration for the bottom of the
/// spectrum of `A`.
pub fn embedding_constant(ps: &ProblemSpec, s: f64, max_iter: usize) -> EmbeddingEstimate {
    let grid = *ps.grid();
    let shift = ps.norm_shift();
    let w = grid.cell_volume();
    let width = 0.5 * ps.potential_spec().well_radius;
    let mut u =
        Field::from_fn(grid, |x| exp(-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (width * width))).expect("finite");
    let ratio = |u: &Field| {
        let v = u.values();
        powf(w * pairwise_sum(v.len(), |i| pow_real(v[i].abs(), s)), 1.0 / s) / ps.norm_lambda(u)
    };
    u = u.scaled(1.0 / ps.norm_lambda(&u));
    let mut best = ratio(&u);
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let b: Vec<f64> = u.values().iter().map(|&x| pow_real(x.abs(), s - 2.0) * x).collect();
        let next = Field::from_raw(grid, riesz(ps, &shift, &b));
        let norm = ps.norm_lambda(&next);
        u = next.scaled(1.0 / norm);
        let r = ratio(&u);
        let change = (r - best).abs() / r;
        best = best.max(r);
        if change < 1e-10 {
            break;
        }
    }
    EmbeddingEstimate { exponent: s, constant: best, iterations }
}

/// Result of [`find_endpoint_e`].
#[derive(Debug, Clone, PartialEq)]
pub struct Endpoint {
    pub e: Field,
    pub t_star: f64,
    pub energy: f64,
}

const MAX_ENDPOINT_SCALE: f64 = 1_048_576.0;

/// `e = (1 + t*)φ⁺` for the smallest power of two `t*` with `I(e) < 0` and
/// `I(e) < I(φ⁺)`.
pub fn find_endpoint_e(ps: &ProblemSpec) -> Result<Endpoint, SolverError> {
    let phi_plus = ps.obstacle_plus();
    let base = energy_total(phi_plus, ps)?;
    let mut t = 1.0;
    while t <= MAX_ENDPOINT_SCALE {
        let e = phi_plus.scaled(1.0 + t);
        let energy = energy_or_neg_inf(&e, ps)?;
        if energy < 0.0 && energy < base {
            return Ok(Endpoint { e, t_star: t, energy });
        }
        t *= 2.0;
    }
    Err(SolverError::NoEndpoint { max_scale: MAX_ENDPOINT_SCALE })
}

/// Mountain-pass geometry around `φ⁺`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    /// Radius of the sphere `‖u‖_λ = r`.
    pub r: f64,
    /// `ρ = r²/8`.
    pub rho: f64,
    pub min_i_on_sphere: f64,
    /// `C₁` (N ≥ 3: `|u|_q^q ≤ C₁‖u‖^q`; N = 2: `|u|_{p+1}^{p+1} ≤ C₁‖u‖^{p+1}`).
    pub c1: f64,
    /// `C₂` (N ≥ 3: `|u|_{2*}^{2*} ≤ C₂‖u‖^{2*}`; N = 2: `‖u‖_∞ ≤ C₂‖u‖`).
    pub c2: f64,
    pub obstacle_energy: f64,
    pub obstacle_norm: f64,
    pub endpoint_energy: f64,
    pub endpoint_norm: f64,
    pub samples: usize,
}

impl GeometryReport {
    /// `I ≥ ρ` on the sphere, `I(φ⁺) < ρ`, `I(e) < 0` and `‖φ⁺‖ < r < ‖e‖`.
    pub fn holds(&self) -> bool {
        self.min_i_on_sphere >= self.rho
            && self.obstacle_energy < self.rho
            && self.endpoint_energy < 0.0
            && self.obstacle_norm < self.r
            && self.r < self.endpoint_norm
    }
}

const EMBEDDING_ITERATIONS: usize = 400;

/// Largest discrete sup-norm ratio `max_i |u_i| / ‖u‖_λ`, attained by the
/// Green's function of `A`: `C_∞² = max_i (A⁻¹)_{ii} / h^N`. Evaluated on the
/// nodes of the well, where `V = 0` and the Green's function peaks.
fn sup_embedding(ps: &ProblemSpec) -> f64 {
    let grid = *ps.grid();
    let shift = ps.norm_shift();
    let mut worst: f64 = 0.0;
    // The diagonal of A⁻¹ is largest at the centre of the well; sample the
    // centre and a few nodes around it.
    let c = grid.multi_index(grid.center());
    let n = grid.nodes_per_axis();
    let offsets: [isize; 3] = [-1, 0, 1];
    for &dx in &offsets {
        for &dy in &offsets {
            let mut idx = c;
            idx[0] = (c[0] as isize + dx).clamp(1, n as isize - 2) as usize;
            if grid.dimension() >= 2 {
                idx[1] = (c[1] as isize + dy).clamp(1, n as isize - 2) as usize;
            }
            let node = grid.node_at(idx);
            let mut b = vec![0.0; grid.node_count()];
            b[node] = 1.0;
            let x = riesz(ps, &shift, &b);
            worst = worst.max(x[node] / grid.cell_volume());
        }
    }
    sqrt(worst)
}

/// Picks the sphere radius `r` from measured embedding constants so that
/// `I ≥ r²/8` on `‖u‖_λ = r` follows from the growth bounds on `G`, then
/// evaluates `I` on `samples` random fields of that norm.
///
/// For N ≥ 3, `G(t) ≤ μ t^q/q + t^{2*}/2*` gives
/// `r < min{(2*/(8C₂))^{1/(2*−2)}, (q/(8C₁μ))^{1/(q−2)}}`.
/// For N = 2, `G(t) ≤ ν t^{p+1} e^{α₀t²}/(p+1)` and `‖u‖_∞ ≤ C₂‖u‖_λ` give
/// `I ≥ ¼‖u‖² − C_ν(r)‖u‖^{p+1}` with `C_ν(r) = ν C₁ e^{α₀C₂²r²}/(p+1)`;
/// `r` is the largest radius with `C_ν(r) r^{p−1} ≤ 1/8`.
pub fn geometry_check(ps: &ProblemSpec, samples: usize, seed: u64) -> Result<GeometryReport, SolverError> {
    if samples < 10 {
        return Err(SolverError::InvalidConfig("geometry_check needs at least 10 samples"));
    }
    let (r, c1, c2) = match *ps.nonlinearity().spec() {
        NonlinearitySpec::PowerCritical { mu, q } => {
            let n = ps.grid().dimension() as f64;
            let crit = 2.0 * n / (n - 2.0);
            let c1 = powf(embedding_constant(ps, q, EMBEDDING_ITERATIONS).constant, q);
            let c2 = powf(embedding_constant(ps, crit, EMBEDDING_ITERATIONS).constant, crit);
            let r_crit = powf(crit / (8.0 * c2), 1.0 / (crit - 2.0));
            let r_sub = powf(q / (8.0 * c1 * mu), 1.0 / (q - 2.0));
            (0.99 * r_crit.min(r_sub), c1, c2)
        }
        NonlinearitySpec::ExpCritical { nu, p, alpha0, .. } => {
            let c1 = powf(embedding_constant(ps, p + 1.0, EMBEDDING_ITERATIONS).constant, p + 1.0);
            let c2 = sup_embedding(ps);
            let ok = |r: f64| nu * c1 * exp(alpha0 * c2 * c2 * r * r) / (p + 1.0) * powf(r, p - 1.0) <= 0.125;
            let (mut lo, mut hi) = (0.0, 1.0);
            while ok(hi) {
                lo = hi;
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if ok(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (lo, c1, c2)
        }
    };
    let rho = r * r / 8.0;
    let grid = *ps.grid();
    let mut rng = sample::rng(seed);
    let mut min_i = f64::INFINITY;
    let reach = ps.tilde_radius();
    for _ in 0..samples {
        let mut u = sample::random_smooth(grid, &mut rng, 3, reach, false);
        let norm = ps.norm_lambda(&u);
        if norm == 0.0 {
            u = ps.obstacle_plus().clone();
        }
        let u = u.scaled(r / ps.norm_lambda(&u));
        min_i = min_i.min(energy_or_neg_inf(&u, ps)?);
    }
    let endpoint = find_endpoint_e(ps)?;
    let report = GeometryReport {
        r,
        rho,
        min_i_on_sphere: min_i,
        c1,
        c2,
        obstacle_energy: energy_total(ps.obstacle_plus(), ps)?,
        obstacle_norm: ps.norm_lambda(ps.obstacle_plus()),
        endpoint_energy: endpoint.energy,
        endpoint_norm: ps.norm_lambda(&endpoint.e),
        samples,
    };
    if min_i < rho {
        return Err(SolverError::Geometry { rho, min_on_sphere: min_i, report });
    }
    Ok(report)
}

const REEQUIDISTRIBUTE_EVERY: usize = 10;
const MAX_BACKTRACKS: usize = 60;
const SEGMENT_SCAN: usize = 8;
const GOLDEN_STEPS: usize = 30;
const NEWTON_GATE_TIGHTEN: f64 = 0.1;

/// Maximum of `I` on the segment `[a, b]`: a coarse scan followed by a
/// golden-section search around the best sample. Returns `(t, I)`.
fn segment_max(a: &Field, b: &Field, ps: &ProblemSpec) -> Result<(f64, f64), SolverError> {
    segment_max_below(a, b, ps, f64::INFINITY)
}

/// As [`segment_max`], but returns as soon as a sample exceeds `ceiling`.
fn segment_max_below(a: &Field, b: &Field, ps: &ProblemSpec, ceiling: f64) -> Result<(f64, f64), SolverError> {
    let eval = |t: f64| energy_or_neg_inf(&a.lerp(b, t), ps);
    let mut best_k = 0;
    let mut best = f64::NEG_INFINITY;
    for k in 0..=SEGMENT_SCAN {
        let e = eval(k as f64 / SEGMENT_SCAN as f64)?;
        if e > ceiling {
            return Ok((k as f64 / SEGMENT_SCAN as f64, e));
        }
        if e > best {
            best = e;
            best_k = k;
        }
    }
    let mut lo = best_k.saturating_sub(1) as f64 / SEGMENT_SCAN as f64;
    let mut hi = (best_k + 1).min(SEGMENT_SCAN) as f64 / SEGMENT_SCAN as f64;
    let ratio = 0.5 * (sqrt(5.0) - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
    for _ in 0..GOLDEN_STEPS {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    let (t, e) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    Ok(if e > best { (t, e) } else { (best_k as f64 / SEGMENT_SCAN as f64, best) })
}

/// Piecewise-linear path with cached node energies and segment maxima; its
/// maximum is taken over the whole polyline, not only the nodes.
struct Path {
    nodes: Vec<Field>,
    energies: Vec<f64>,
    segments: Vec<(f64, f64)>,
}

impl Path {
    fn new(nodes: Vec<Field>, ps: &ProblemSpec) -> Result<Self, SolverError> {
        let energies = nodes.iter().map(|u| energy_or_neg_inf(u, ps)).collect::<Result<Vec<_>, _>>()?;
        let segments = nodes.windows(2).map(|w| segment_max(&w[0], &w[1], ps)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { nodes, energies, segments })
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }

    fn max(&self) -> f64 {
        self.segments.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max)
    }

    fn argmax_segment(&self) -> usize {
        let mut best = 0;
        for k in 1..self.segments.len() {
            if self.segments[k].1 > self.segments[best].1 {
                best = k;
            }
        }
        best
    }

    /// Makes the polyline maximizer a node (inserting it if it lies inside a
    /// segment, which leaves the polyline unchanged) and returns its index.
    fn node_at_max(&mut self, ps: &ProblemSpec) -> Result<usize, SolverError> {
        let k = self.argmax_segment();
        let (t, e) = self.segments[k];
        let last = self.len() - 1;
        let node_e = |j: usize| self.energies[j];
        if e <= node_e(k) && k > 0 {
            return Ok(k);
        }
        if e <= node_e(k + 1) && k + 1 < last {
            return Ok(k + 1);
        }
        let node = self.nodes[k].lerp(&self.nodes[k + 1], t);
        let left = segment_max(&self.nodes[k], &node, ps)?;
        let right = segment_max(&node, &self.nodes[k + 1], ps)?;
        self.nodes.insert(k + 1, node);
        self.energies.insert(k + 1, e);
        self.segments[k] = left;
        self.segments.insert(k + 1, right);
        Ok(k + 1)
    }

    /// Redistributes `count` nodes at equal `‖·‖_λ` arclength along the
    /// current polyline.
    fn equidistributed(&self, ps: &ProblemSpec, count: usize) -> Result<Path, SolverError> {
        let m = self.len();
        let mut cum = vec![0.0; m];
        for j in 1..m {
            cum[j] = cum[j - 1] + ps.norm_lambda(&self.nodes[j].add_scaled(-1.0, &self.nodes[j - 1]));
        }
        let total = cum[m - 1];
        let mut nodes = Vec::with_capacity(count);
        nodes.push(self.nodes[0].clone());
        let mut seg = 0;
        for j in 1..count - 1 {
            let target = total * j as f64 / (count - 1) as f64;
            while seg < m - 2 && cum[seg + 1] < target {
                seg += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let t = if len > 0.0 { ((target - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
            nodes.push(self.nodes[seg].lerp(&self.nodes[seg + 1], t));
        }
        nodes.push(self.nodes[m - 1].clone());
        Path::new(nodes, ps)
    }

    /// Drops low-energy interior nodes whose removal keeps the polyline
    /// maximum, until at most `target` nodes remain or none can go.
    fn thin(&mut self, ps: &ProblemSpec, target: usize, keep: usize) -> Result<(), SolverError> {
        let ceiling = self.max();
        let mut order: Vec<usize> = (1..self.len() - 1).filter(|&j| j != keep).collect();
        order.sort_by(|&a, &b| self.energies[a].total_cmp(&self.energies[b]));
        let mut removed = Vec::new();
        for j in order {
            if self.len() - removed.len() <= target {
                break;
            }
            if removed.iter().any(|&r: &usize| r + 1 == j || j + 1 == r) {
                continue;
            }
            let chord = segment_max(&self.nodes[j - 1], &self.nodes[j + 1], ps)?;
            if chord.1 <= ceiling {
                removed.push(j);
            }
        }
        removed.sort_unstable();
        for &j in removed.iter().rev() {
            let chord = segment_max(&self.nodes[j - 1], &self.nodes[j + 1], ps)?;
            self.nodes.remove(j);
            self.energies.remove(j);
            self.segments.remove(j);
            self.segments[j - 1] = chord;
        }
        Ok(())
    }
}

/// Variable metric for the descent steps: `⟨a, b⟩_M = ⟨a, b⟩_λ +
/// (1/ε)∫_{Ω∩{u<φ}} ab`, which absorbs the stiff penalty into the gradient.
struct DescentMetric<'a> {
    ps: &'a ProblemSpec,
    shift: Vec<f64>,
}

impl<'a> DescentMetric<'a> {
    fn at(u: &Field, ps: &'a ProblemSpec) -> Self {
        let mut shift = ps.norm_shift();
        let (uv, phi) = (u.values(), ps.obstacle().values());
        for i in 0..shift.len() {
            if ps.omega().contains(i) && uv[i] < phi[i] {
                shift[i] += 1.0 / ps.eps();
            }
        }
        Self { ps, shift }
    }

    fn gradient(&self, r: &Field) -> Field {
        Field::from_raw(*self.ps.grid(), riesz(self.ps, &self.shift, r.values()))
    }

    fn inner(&self, a: &Field, b: &Field) -> f64 {
        let (av, bv) = (a.values(), b.values());
        let grid = self.ps.grid();
        crate::domain::grad_pairing(a, b)
            + grid.cell_volume() * pairwise_sum(av.len(), |i| self.shift[i] * av[i] * bv[i])
    }

    fn norm(&self, a: &Field) -> f64 {
        sqrt(self.inner(a, a))
    }
}

/// `P J P + σ ττᵀ` with `P` the orthogonal projector off the unit vector
/// `τ`: the Jacobian restricted to directions transverse to the path.
struct TransverseJacobian<'a> {
    jac: ShiftedLaplacian<'a>,
    tau: &'a [f64],
    sigma: f64,
}

impl TransverseJacobian<'_> {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        let c = pairwise_sum(x.len(), |i| self.tau[i] * x[i]);
        x.iter().zip(self.tau).map(|(v, t)| v - c * t).collect()
    }
}

impl LinearOperator for TransverseJacobian<'_> {
    fn len(&self) -> usize {
        self.jac.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let px = self.project(x);
        let c = pairwise_sum(x.len(), |i| self.tau[i] * x[i]);
        let mut jpx = vec![0.0; x.len()];
        self.jac.apply(&px, &mut jpx);
        let pjpx = self.project(&jpx);
        for i in 0..y.len() {
            y[i] = pjpx[i] + self.sigma * c * self.tau[i];
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.jac.diagonal().into_iter().map(|d| d.max(self.sigma)).collect()
    }
}

const TRANSVERSE_TOL: f64 = 1e-6;

/// Newton direction on the complement of the path tangent. Near an index-one
/// saddle the Jacobian is positive there, so the step lowers `I` while
/// resolving the soft modes that plain gradient steps crawl along. Returns
/// `None` when the direction is not a descent direction.
fn transverse_newton(u: &Field, r: &Field, tangent: &Field, ps: &ProblemSpec) -> Option<Field> {
    let grid = *ps.grid();
    let tn = sqrt(tangent.values().iter().map(|t| t * t).sum::<f64>());
    if !(tn > 0.0) {
        return None;
    }
    let tau: Vec<f64> = tangent.values().iter().map(|t| t / tn).collect();
    let shift = linearization_shift(u, ps);
    let h = grid.spacing();
    let op = TransverseJacobian {
        jac: ShiftedLaplacian::new(grid, &shift),
        tau: &tau,
        sigma: 2.0 * grid.dimension() as f64 / (h * h),
    };
    let rhs = op.project(r.values());
    let mut d = vec![0.0; rhs.len()];
    let stats = minres(&op, &rhs, &mut d, TRANSVERSE_TOL, 40 * grid.nodes_per_axis() + 4000);
    let d = Field::from_raw(grid, d);
    let slope = r.dot_weighted(&d);
    let grad_slope = r.dot_weighted(&Field::from_raw(grid, rhs));
    (stats.converged && slope > 0.0 && grad_slope > 0.0).then_some(d)
}

/// Mountain-pass path method followed by Newton refinement.
///
/// The path maximum is the maximum of `I` over the whole polyline. Each
/// outer iteration makes the polyline maximizer a node and takes one Armijo
/// step along the component of the descent gradient normal to the path; a
/// step is accepted only if the maximum over the two segments it moves stays
/// at or below the current path maximum, so `path_max_history` never
/// increases. Once the full gradient at the maximizer is below
/// `newton_gate` (relative), Newton takes over; if Newton does not converge
/// the path iterations resume with a gate ten times tighter.
pub fn mountain_pass(ps: &ProblemSpec, cfg: &SolverConfig) -> Result<MountainPassResult, SolverError> {
    let phase = path_phase(ps, cfg, f64::NEG_INFINITY)?;
    finish_mountain_pass(phase, ps, cfg)
}

/// Upper bound on the mountain-pass level from the deformed path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelBound {
    /// Maximum of `I` over the final polyline.
    pub bound: f64,
    /// Whether the bound dropped below the requested ceiling.
    pub below_ceiling: bool,
    /// Level of the refined critical point when the path phase ran to the end.
    pub critical_level: Option<f64>,
    pub iterations: usize,
}

/// Runs the path phase of [`mountain_pass`] and stops as soon as the path
/// maximum falls below `ceiling`. Every path from `φ⁺` to `e` bounds the
/// mountain-pass level from above, so `bound` is an upper bound on `c` up to
/// the accuracy of the segment maximization.
pub fn level_upper_bound(ps: &ProblemSpec, cfg: &SolverConfig, ceiling: f64) -> Result<LevelBound, SolverError> {
    let phase = path_phase(ps, cfg, ceiling)?;
    let bound = phase.path.max();
    let iterations = phase.iterations;
    if bound < ceiling {
        return Ok(LevelBound { bound, below_ceiling: true, critical_level: None, iterations });
    }
    let result = finish_mountain_pass(phase, ps, cfg)?;
    let critical_level = result.refined.then_some(result.level);
    let bound = bound.min(critical_level.unwrap_or(f64::INFINITY));
    Ok(LevelBound { bound, below_ceiling: bound < ceiling, critical_level, iterations })
}

struct PathPhase {
    path: Path,
    history: Vec<f64>,
    gradient_history: Vec<f64>,
    iterations: usize,
    newton_attempt: Option<(Field, NewtonOutcome)>,
}

fn path_phase(ps: &ProblemSpec, cfg: &SolverConfig, stop_below: f64) -> Result<PathPhase, SolverError> {
    cfg.validate()?;
    let grid = *ps.grid();
    let start = ps.obstacle_plus().clone();
    let end = find_endpoint_e(ps)?.e;
    let m = cfg.path_points;
    let mut rng = sample::rng(cfg.rng_seed);
    let amp = 1e-3 * start.max_abs();
    let mut nodes = Vec::with_capacity(m);
    for j in 0..m {
        let t = j as f64 / (m - 1) as f64;
        let mut node = start.lerp(&end, t);
        if j > 0 && j < m - 1 {
            let bump = sample::random_smooth(grid, &mut rng, 2, ps.potential_spec().well_radius, true);
            node = node.add_scaled(amp * sin(core::f64::consts::PI * t), &bump);
        }
        nodes.push(node);
    }
    let mut path = Path::new(nodes, ps)?;
    let mut history = Vec::new();
    let mut gradient_history = Vec::new();
    let mut iterations = 0;
    let mut step: f64 = 1.0;
    let mut gate = cfg.newton_gate;
    let mut newton_attempt = None;

    while iterations < cfg.max_outer && path.max() >= stop_below {
        iterations += 1;
        if iterations % REEQUIDISTRIBUTE_EVERY == 0 {
            let candidate = path.equidistributed(ps, m)?;
            if candidate.max() <= path.max() {
                path = candidate;
            }
        }
        let mut j = path.node_at_max(ps)?;
        if path.len() > 2 * m {
            path.thin(ps, m, j)?;
            j = path.node_at_max(ps)?;
        }
        let ceiling = path.max();
        let u = path.nodes[j].clone();
        let metric = DescentMetric::at(&u, ps);
        let r = residual(&u, ps)?;
        let g = metric.gradient(&r);
        let relative = metric.norm(&g) / metric.norm(&u);
        gradient_history.push(relative);
        if relative <= gate {
            let (v, log) = newton_refine(&u, ps, cfg)?;
            let level = energy_or_neg_inf(&v, ps)?;
            let done = log.converged && level > 0.0;
            newton_attempt = Some((v, log));
            if done || gate <= cfg.grad_tol {
                history.push(ceiling);
                break;
            }
            gate *= NEWTON_GATE_TIGHTEN;
        }
        // Remove the component along the path so the step does not slide the
        // maximizer towards either endpoint.
        let tangent = path.nodes[j + 1].add_scaled(-1.0, &path.nodes[j - 1]);
        let tnorm = metric.norm(&tangent);
        let d_grad = if tnorm > 0.0 {
            let tau = tangent.scaled(1.0 / tnorm);
            g.add_scaled(-metric.inner(&g, &tau), &tau)
        } else {
            g.clone()
        };
        let (d, newton_like) = match transverse_newton(&u, &r, &tangent, ps) {
            Some(d) => (d, true),
            None => (d_grad, false),
        };
        let slope = r.dot_weighted(&d);
        let current = path.energies[j];
        let mut s = if newton_like { 1.0 } else { (2.0 * step).min(1.0) };
        let mut accepted = false;
        if slope > 0.0 {
            for _ in 0..MAX_BACKTRACKS {
                let trial = u.add_scaled(-s, &d);
                let e = energy_or_neg_inf(&trial, ps)?;
                if e <= current - cfg.armijo_c * s * slope {
                    let left = segment_max_below(&path.nodes[j - 1], &trial, ps, ceiling)?;
                    if left.1 > ceiling {
                        s *= cfg.armijo_backtrack;
                        continue;
                    }
                    let right = segment_max_below(&trial, &path.nodes[j + 1], ps, ceiling)?;
                    if right.1 <= ceiling {
                        path.nodes[j] = trial;
                        path.energies[j] = e;
                        path.segments[j - 1] = left;
                        path.segments[j] = right;
                        accepted = true;
                        break;
                    }
                }
                s *= cfg.armijo_backtrack;
            }
        }
        history.push(path.max());
        if !accepted {
            break;
        }
        if !newton_like {
            step = s;
        }
    }
    Ok(PathPhase { path, history, gradient_history, iterations, newton_attempt })
}

fn finish_mountain_pass(
    phase: PathPhase,
    ps: &ProblemSpec,
    cfg: &SolverConfig,
) -> Result<MountainPassResult, SolverError> {
    let PathPhase { mut path, history, gradient_history, iterations, newton_attempt } = phase;
    let (u, newton_log) = match newton_attempt {
        Some((v, log)) if log.converged => (v, log),
        _ => {
            let j = path.node_at_max(ps)?;
            let u0 = path.nodes.swap_remove(j);
            newton_refine(&u0, ps, cfg)?
        }
    };
    let level = energy_total(&u, ps)?;
    let residual_norm = residual_norm(&u, ps)?;
    let refined = newton_log.converged && residual_norm <= cfg.grad_tol;
    if refined && level <= 0.0 {
        return Err(SolverError::Collapsed { level });
    }
    Ok(MountainPassResult {
        u,
        level,
        residual_norm,
        path_max_history: history,
        gradient_history,
        refined,
        iterations,
        newton: newton_log,
    })
}

/// Newton from a warm start; falls back to a cold mountain-pass run when the
/// warm start does not converge to a nontrivial critical point.
pub fn solve_from(u0: &Field, ps: &ProblemSpec, cfg: &SolverConfig) -> Result<MountainPassResult, SolverError> {
    cfg.validate()?;
    let (u, log) = newton_refine(u0, ps, cfg)?;
    let level = energy_or_neg_inf(&u, ps)?;
    let residual_norm = residual_norm(&u, ps)?;
    if log.converged && residual_norm <= cfg.grad_tol && level > 0.0 && u.min() >= -1e-8 * u.max() {
        return Ok(MountainPassResult {
            u,
            level,
            residual_norm,
            path_max_history: Vec::new(),
            gradient_history: Vec::new(),
            refined: true,
            iterations: 0,
            newton: log,
        });
    }
    mountain_pass(ps, cfg)
}

/// Damped Newton on the residual with the generalized linearization
/// `−Δ + (1 + λV) + (1/ε)χ_{Ω∩{u<φ}} − ∂_t g(x, u)` and MINRES inner solves.
///
/// Steps are damped by halving until the scaled residual decreases; when
/// that fails, one Sobolev-gradient step on `½‖r‖²` is taken instead and the
/// outcome is flagged.
pub fn newton_refine(u0: &Field, ps: &ProblemSpec, cfg: &SolverConfig) -> Result<(Field, NewtonOutcome), SolverError> {
    let grid = *ps.grid();
    let norm_shift = ps.norm_shift();
    let mut u = u0.clone();
    let mut log = NewtonOutcome::default();
    let mut r = residual(&u, ps)?;
    let mut rn = r.max_abs() / (1.0 + u.max_abs());
    log.residual_history.push(rn);
    let max_lin = 40 * grid.nodes_per_axis() + 4000;
    while rn > cfg.grad_tol && log.iterations < cfg.newton_max {
        log.iterations += 1;
        let shift = linearization_shift(&u, ps);
        let op = ShiftedLaplacian::new(grid, &shift);
        let rhs: Vec<f64> = r.values().iter().map(|x| -x).collect();
        let mut delta = vec![0.0; rhs.len()];
        minres(&op, &rhs, &mut delta, cfg.newton_tol, max_lin);
        let delta = Field::from_raw(grid, delta);

        // The Newton direction is a descent direction for ½‖r‖², which is
        // therefore the merit function of the damping.
        let merit = r.dot_weighted(&r);
        let mut step = None;
        let mut s = 1.0;
        for _ in 0..20 {
            let trial = u.add_scaled(s, &delta);
            if let Ok(rt) = residual(&trial, ps) {
                let rnt = rt.max_abs() / (1.0 + trial.max_abs());
                if rt.dot_weighted(&rt) <= (1.0 - 2e-4 * s) * merit {
                    step = Some((trial, rt, rnt));
                    break;
                }
            }
            s *= 0.5;
        }
        if step.is_none() {
            log.fallback = true;
            let mut jr = vec![0.0; rhs.len()];
            op.apply(r.values(), &mut jr);
            let d = Field::from_raw(grid, riesz(ps, &norm_shift, &jr));
            let slope = r.dot_weighted(&Field::from_raw(grid, jr));
            let mut s = 1.0;
            for _ in 0..MAX_BACKTRACKS {
                let trial = u.add_scaled(-s, &d);
                if let Ok(rt) = residual(&trial, ps) {
                    if rt.dot_weighted(&rt) <= merit - 2.0 * cfg.armijo_c * s * slope {
                        let rnt = rt.max_abs() / (1.0 + trial.max_abs());
                        step = Some((trial, rt, rnt));
                        break;
                    }
                }
                s *= cfg.armijo_backtrack;
            }
        }
        match step {
            Some((nu, nr, nrn)) => {
                u = nu;
                r = nr;
                rn = nrn;
                log.residual_history.push(rn);
            }
            None => break,
        }
    }
    log.converged = rn <= cfg.grad_tol;
    Ok((u, log))
}

/// Eq.-(3.6)-type lower bound on the energy of a critical point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralBound {
    pub level: f64,
    /// `½(½ − 1/q)‖u‖²_λ − (1/εq)|φ|₂² − (C_e/εq)|φ|₂‖u‖_λ`.
    pub lower_bound: f64,
    pub holds: bool,
}

/// `‖u‖²_λ ≤ (4q/(q−2))·level + ε-slack`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBound {
    pub norm_sq: f64,
    pub bound: f64,
    pub slack: f64,
    pub holds: bool,
}

fn slack_terms(u: &Field, ps: &ProblemSpec, c_e: f64) -> (f64, f64, f64) {
    let q = ps.nonlinearity().ar_exponent();
    let phi2 = ps.obstacle_l2_on_omega();
    let norm = ps.norm_lambda(u);
    let slack = phi2 * phi2 / (ps.eps() * q) + c_e * phi2 * norm / (ps.eps() * q);
    (q, norm, slack)
}

/// Structural lower bound at a critical point `u` with energy `level`; `q`
/// is the superquadraticity exponent (`θ` for N = 2).
pub fn structural_bound(u: &Field, level: f64, ps: &ProblemSpec, c_e: f64) -> StructuralBound {
    let (q, norm, slack) = slack_terms(u, ps, c_e);
    let lower_bound = 0.5 * (0.5 - 1.0 / q) * norm * norm - slack;
    StructuralBound { level, lower_bound, holds: level >= lower_bound }
}

pub fn norm_bound(u: &Field, level: f64, ps: &ProblemSpec, c_e: f64) -> NormBound {
    let (q, norm, slack) = slack_terms(u, ps, c_e);
    let factor = 4.0 * q / (q - 2.0);
    let bound = factor * level + factor * slack;
    NormBound { norm_sq: norm * norm, bound, slack: factor * slack, holds: norm * norm <= bound }
}

/// Discrete Sobolev quotient `‖∇u‖₂² / |u|²_{2*}`.
pub fn sobolev_quotient(u: &Field) -> f64 {
    let grid = u.grid();
    let n = grid.dimension() as f64;
    let crit = 2.0 * n / (n - 2.0);
    let v = u.values();
    let lp = powf(grid.cell_volume() * pairwise_sum(v.len(), |i| pow_real(v[i].abs(), crit)), 1.0 / crit);
    dirichlet_energy(u) / (lp * lp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevEstimate {
    pub value: f64,
    pub iterations: usize,
}

pub const SOBOLEV_MAX_ITERATIONS: usize = 10_000;
const SOBOLEV_STALL: usize = 10;

/// Minimizes the discrete Sobolev quotient from a radial bump of width `L/4`.
pub fn sobolev_estimate(grid: GridSpec) -> Result<SobolevEstimate, SolverError> {
    if grid.dimension() != 3 {
        return Err(SolverError::NotThreeDimensional);
    }
    let w = 0.25 * grid.half_extent();
    let u0 = Field::from_fn(grid, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        powf(1.0 + r2 / (w * w), -0.5)
    })?;
    sobolev_estimate_from(&u0, 1e-9, SOBOLEV_MAX_ITERATIONS)
}

/// Normalized Sobolev-gradient descent on the quotient: the `H¹₀` gradient
/// step of unit length is `u ← (−Δ_h)⁻¹(|u|^{2*−2}u)`, followed by
/// renormalization. Returns the best quotient once it has not improved by
/// more than the relative `tol` for a run of consecutive iterations; the
/// iterates may settle into a short cycle around the lattice minimizer.
pub fn sobolev_estimate_from(u0: &Field, tol: f64, max_iter: usize) -> Result<SobolevEstimate, SolverError> {
    let grid = *u0.grid();
    if grid.dimension() != 3 {
        return Err(SolverError::NotThreeDimensional);
    }
    let crit = 6.0;
    let zero = vec![0.0; grid.node_count()];
    let op = ShiftedLaplacian::new(grid, &zero);
    let mut u = u0.scaled(1.0 / u0.max_abs());
    let mut q = sobolev_quotient(&u);
    let mut x = vec![0.0; grid.node_count()];
    let mut stall = 0;
    for it in 1..=max_iter {
        let b: Vec<f64> = u.values().iter().map(|&v| pow_real(v.abs(), crit - 2.0) * v).collect();
        conjugate_gradient(&op, &b, &mut x, 1e-12, 4000);
        let next = Field::from_raw(grid, x.clone());
        u = next.scaled(1.0 / next.max_abs());
        let qn = sobolev_quotient(&u);
        if qn < q * (1.0 - tol) {
            stall = 0;
        } else {
            stall += 1;
        }
        q = qn.min(q);
        if stall >= SOBOLEV_STALL {
            return Ok(SobolevEstimate { value: q, iterations: it });
        }
    }
    Err(SolverError::SobolevNotConverged { iterations: max_iter, last: q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::fixtures::*;

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { path_points: 4, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { armijo_c: 0.7, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn endpoint_is_negative_and_doubling_decreases() {
        let ps = small_2d(33);
        let ep = find_endpoint_e(&ps).unwrap();
        assert!(ep.energy < 0.0);
        let further = energy_or_neg_inf(&ps.obstacle_plus().scaled(1.0 + 2.0 * ep.t_star), &ps).unwrap();
        assert!(further < ep.energy);
    }

    #[test]
    fn l2_embedding_matches_inverse_spectrum() {
        let ps = small_2d(17);
        let est = embedding_constant(&ps, 2.0, 2000);
        assert!(est.constant <= 1.0 + 1e-12);
        // Rayleigh quotient oracle: 1/C² is the smallest eigenvalue of A in
        // the weighted inner product; a random field gives an upper bound.
        let mut rng = sample::rng(1);
        let u = sample::random_smooth(*ps.grid(), &mut rng, 3, 2.0, true);
        let rq = ps.norm_lambda_sq(&u) / u.dot_weighted(&u);
        assert!(1.0 / (est.constant * est.constant) <= rq);
    }

    #[test]
    fn newton_fixed_point_takes_no_steps() {
        let ps = small_2d(17);
        let z = Field::zeros(*ps.grid());
        let cfg = SolverConfig::default();
        let ps_far = ps.with_eps(1.0).unwrap();
        let (u, log) = newton_refine(&z, &ps_far, &cfg).unwrap();
        assert!(log.converged);
        let (u2, log2) = newton_refine(&u, &ps_far, &cfg).unwrap();
        assert_eq!(log2.iterations, 0);
        assert_eq!(u2, u);
    }

    #[test]
    fn sobolev_quotient_is_scale_invariant() {
        let g = GridSpec::new(3, 17, 2.0).unwrap();
        let u = Field::from_fn(g, |x| exp(-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]))).unwrap();
        let (a, b) = (sobolev_quotient(&u), sobolev_quotient(&u.scaled(2.0)));
        assert!((a - b).abs() <= 1e-8 * a);
    }
}
