//! The penalized functional
//!
//! ```text
//! I_{λ,ε}(u) = ½‖u‖²_λ + (1/2ε) ∫_Ω [(φ − u)⁺]² − ∫ G(x, u)
//! ```
//!
//! its gradient, the penalty operator `⟨P(u), v⟩ = −∫_Ω (φ − u)⁺ v` and the
//! Trudinger–Moser moments used to probe exponential growth in 2D.
//!
//! The nodal residual is the exact gradient of the discrete energy in the
//! quadrature inner product: `⟨residual(u), v⟩_w = I'(u) v` to round-off.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    grad_pairing_raw, neg_laplacian_into, norm_lambda_sq_raw, weighted_dot, DomainError, Field, GridSpec, Region,
    RegionMask,
};
use crate::math::{exp, expm1, ln, pairwise_sum, powf, sqrt};
use crate::model::{
    ModelError, Nonlinearity, NonlinearitySpec, ObstacleSpec, PotentialSpec, Truncation, TruncationParams, MAX_EXPONENT,
};
use crate::sample;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("nonlinear term overflowed (max |u| = {max_abs_u})")]
    Overflow { max_abs_u: f64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("Trudinger–Moser moments are defined for N = 2 only")]
    NotTwoDimensional,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

/// Everything that defines `I_{λ,ε}` on a grid, with the nodal data (`V`,
/// `φ`, region masks) resolved once at construction.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    grid: GridSpec,
    potential: PotentialSpec,
    obstacle: ObstacleSpec,
    tilde_radius: f64,
    truncation: Truncation,
    lam: f64,
    eps: f64,
    v: Field,
    phi: Field,
    phi_plus: Field,
    omega: RegionMask,
    tilde: RegionMask,
    supp: RegionMask,
}

impl ProblemSpec {
    pub fn new(
        grid: GridSpec,
        potential: PotentialSpec,
        obstacle: ObstacleSpec,
        nonlinearity: NonlinearitySpec,
        tilde_radius: f64,
        lam: f64,
        eps: f64,
    ) -> Result<Self, ProblemError> {
        potential.validate()?;
        obstacle.validate(grid.dimension(), &potential)?;
        if !(tilde_radius > potential.well_radius && tilde_radius < grid.half_extent()) {
            return Err(ProblemError::InvalidParameter("need well_radius < tilde_radius < half_extent"));
        }
        if !(lam.is_finite() && lam >= 0.0) {
            return Err(ProblemError::InvalidParameter("lambda must be non-negative"));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(ProblemError::InvalidParameter("epsilon must be positive"));
        }
        let nl = Nonlinearity::new(nonlinearity, grid.dimension())?;
        let truncation = Truncation::new(nl)?;
        let v = Field::from_fn(grid, |x| potential.value(x))?;
        let phi = Field::from_fn(grid, |x| obstacle.value(x))?;
        let phi_plus = phi.positive_part();
        let omega = RegionMask::from_predicate(&grid, Region::Omega, |i| grid.radius(i) < potential.well_radius);
        let tilde = RegionMask::from_predicate(&grid, Region::OmegaTilde, |i| grid.radius(i) < tilde_radius);
        let supp = RegionMask::from_predicate(&grid, Region::SuppObstacle, |i| phi.values()[i] > 0.0);
        if supp.count() == 0 {
            return Err(ProblemError::InvalidParameter("obstacle has no positive node on this grid"));
        }
        supp.check_subset_of(&omega)?;
        omega.check_subset_of(&tilde)?;
        tilde.check_interior(&grid)?;
        Ok(Self { grid, potential, obstacle, tilde_radius, truncation, lam, eps, v, phi, phi_plus, omega, tilde, supp })
    }

    pub fn with_lambda(&self, lam: f64) -> Result<Self, ProblemError> {
        if !(lam.is_finite() && lam >= 0.0) {
            return Err(ProblemError::InvalidParameter("lambda must be non-negative"));
        }
        Ok(Self { lam, ..self.clone() })
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self, ProblemError> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(ProblemError::InvalidParameter("epsilon must be positive"));
        }
        Ok(Self { eps, ..self.clone() })
    }

    /// Same problem on another grid (e.g. a larger box at equal spacing).
    pub fn with_grid(&self, grid: GridSpec) -> Result<Self, ProblemError> {
        Self::new(
            grid,
            self.potential,
            self.obstacle.clone(),
            *self.truncation.nonlinearity().spec(),
            self.tilde_radius,
            self.lam,
            self.eps,
        )
    }

    pub fn with_nonlinearity(&self, spec: NonlinearitySpec) -> Result<Self, ProblemError> {
        Self::new(self.grid, self.potential, self.obstacle.clone(), spec, self.tilde_radius, self.lam, self.eps)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn potential_spec(&self) -> &PotentialSpec {
        &self.potential
    }
    pub fn obstacle_spec(&self) -> &ObstacleSpec {
        &self.obstacle
    }
    pub fn tilde_radius(&self) -> f64 {
        self.tilde_radius
    }
    pub fn truncation(&self) -> &Truncation {
        &self.truncation
    }
    pub fn truncation_params(&self) -> TruncationParams {
        self.truncation.params()
    }
    pub fn nonlinearity(&self) -> &Nonlinearity {
        self.truncation.nonlinearity()
    }
    pub fn lam(&self) -> f64 {
        self.lam
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    /// Nodal potential `V`.
    pub fn potential(&self) -> &Field {
        &self.v
    }
    /// Nodal obstacle `φ`.
    pub fn obstacle(&self) -> &Field {
        &self.phi
    }
    pub fn obstacle_plus(&self) -> &Field {
        &self.phi_plus
    }
    pub fn omega(&self) -> &RegionMask {
        &self.omega
    }
    pub fn omega_tilde(&self) -> &RegionMask {
        &self.tilde
    }
    pub fn obstacle_support(&self) -> &RegionMask {
        &self.supp
    }

    /// `g(x_node, t)`.
    pub fn g_eval(&self, node: usize, t: f64) -> f64 {
        self.truncation.g(self.tilde.contains(node), t)
    }

    /// `G(x_node, t)`.
    pub fn big_g_eval(&self, node: usize, t: f64) -> f64 {
        self.truncation.big_g(self.tilde.contains(node), t)
    }

    /// Diagonal `1 + λV` of the operator behind `‖·‖_λ`.
    pub fn norm_shift(&self) -> Vec<f64> {
        self.v.values().iter().map(|v| 1.0 + self.lam * v).collect()
    }

    pub fn norm_lambda_sq(&self, u: &Field) -> f64 {
        norm_lambda_sq_raw(&self.grid, u.values(), self.lam, self.v.values())
    }

    pub fn norm_lambda(&self, u: &Field) -> f64 {
        sqrt(self.norm_lambda_sq(u))
    }

    /// `⟨u, w⟩_λ`.
    pub fn inner_lambda(&self, u: &Field, w: &Field) -> f64 {
        let (uv, wv, vv) = (u.values(), w.values(), self.v.values());
        grad_pairing_raw(&self.grid, uv, wv)
            + self.grid.cell_volume() * pairwise_sum(uv.len(), |i| (1.0 + self.lam * vv[i]) * uv[i] * wv[i])
    }

    /// `|φ|_{L²(Ω)}`.
    pub fn obstacle_l2_on_omega(&self) -> f64 {
        let phi = self.phi.values();
        sqrt(
            self.grid.cell_volume()
                * pairwise_sum(phi.len(), |i| if self.omega.contains(i) { phi[i] * phi[i] } else { 0.0 }),
        )
    }
}

/// The three terms of `I_{λ,ε}` and their combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub quadratic: f64,
    pub penalty: f64,
    pub nonlinear: f64,
    pub total: f64,
}

/// Evaluates `I_{λ,ε}(u)` term by term with nodal quadrature.
pub fn energy(u: &Field, ps: &ProblemSpec) -> Result<EnergyBreakdown, EnergyError> {
    u.check_same_grid(&ps.v)?;
    let w = ps.grid.cell_volume();
    let uv = u.values();
    let phi = ps.phi.values();
    let quadratic = 0.5 * ps.norm_lambda_sq(u);
    let hinge_sq = pairwise_sum(uv.len(), |i| {
        if ps.omega.contains(i) {
            let d = (phi[i] - uv[i]).max(0.0);
            d * d
        } else {
            0.0
        }
    });
    let penalty = 0.5 / ps.eps * w * hinge_sq;
    let nonlinear = w * pairwise_sum(uv.len(), |i| ps.big_g_eval(i, uv[i]));
    if !nonlinear.is_finite() {
        return Err(EnergyError::Overflow { max_abs_u: u.max_abs() });
    }
    Ok(EnergyBreakdown { quadratic, penalty, nonlinear, total: quadratic + penalty - nonlinear })
}

/// Total energy only.
pub fn energy_total(u: &Field, ps: &ProblemSpec) -> Result<f64, EnergyError> {
    energy(u, ps).map(|e| e.total)
}

/// Nodal residual `−Δ_h u + (1 + λV)u − (1/ε)(φ − u)⁺ χ_Ω − g(x, u)`.
pub fn residual(u: &Field, ps: &ProblemSpec) -> Result<Field, EnergyError> {
    u.check_same_grid(&ps.v)?;
    let uv = u.values();
    let (phi, vv) = (ps.phi.values(), ps.v.values());
    let mut r = vec![0.0; uv.len()];
    neg_laplacian_into(&ps.grid, uv, &mut r);
    let inv_eps = 1.0 / ps.eps;
    let mut overflow = false;
    ps.grid.for_each_interior(|i| {
        let mut ri = r[i] + (1.0 + ps.lam * vv[i]) * uv[i] - ps.g_eval(i, uv[i]);
        if ps.omega.contains(i) {
            ri -= inv_eps * (phi[i] - uv[i]).max(0.0);
        }
        overflow |= !ri.is_finite();
        r[i] = ri;
    });
    if overflow {
        return Err(EnergyError::Overflow { max_abs_u: u.max_abs() });
    }
    Ok(Field::from_raw(ps.grid, r))
}

/// Diagonal of the (generalized) linearization of the residual at `u`, to be
/// added to `−Δ_h`: `1 + λV + (1/ε) χ_{Ω ∩ {u < φ}} − ∂_t g(x, u)`.
///
/// Nodes with `u = φ` count as inactive.
pub fn linearization_shift(u: &Field, ps: &ProblemSpec) -> Vec<f64> {
    let uv = u.values();
    let (phi, vv) = (ps.phi.values(), ps.v.values());
    let inv_eps = 1.0 / ps.eps;
    let mut c = vec![0.0; uv.len()];
    ps.grid.for_each_interior(|i| {
        let mut ci = 1.0 + ps.lam * vv[i] - ps.truncation.g_t(ps.tilde.contains(i), uv[i]);
        if ps.omega.contains(i) && uv[i] < phi[i] {
            ci += inv_eps;
        }
        c[i] = ci;
    });
    c
}

/// Nodal representative of `P(u)`: `−(φ − u)⁺ χ_Ω`.
pub fn penalty_density(u: &Field, ps: &ProblemSpec) -> Field {
    let (uv, phi) = (u.values(), ps.phi.values());
    let mut out = vec![0.0; uv.len()];
    ps.grid.for_each_interior(|i| {
        if ps.omega.contains(i) {
            out[i] = -(phi[i] - uv[i]).max(0.0);
        }
    });
    Field::from_raw(ps.grid, out)
}

/// `⟨P(u), v⟩ = −∫_Ω (φ − u)⁺ v`.
pub fn penalty_pairing(u: &Field, v: &Field, ps: &ProblemSpec) -> f64 {
    let (uv, vv, phi) = (u.values(), v.values(), ps.phi.values());
    -ps.grid.cell_volume()
        * pairwise_sum(uv.len(), |i| if ps.omega.contains(i) { (phi[i] - uv[i]).max(0.0) * vv[i] } else { 0.0 })
}

/// `∫_Ω [(φ − u)⁺]²`, the constraint violation.
pub fn penalty_violation(u: &Field, ps: &ProblemSpec) -> f64 {
    let p = penalty_density(u, ps);
    weighted_dot(&ps.grid, p.values(), p.values())
}

/// The four penalty-operator axioms, checked on random data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axiom {
    /// Continuity of `t ↦ ⟨P(u + t v), w⟩`.
    Continuity,
    /// Monotonicity `⟨P(u) − P(v), u − v⟩ ≥ 0`.
    Monotonicity,
    /// `P(u) = 0` iff `u ∈ 𝕂`.
    KernelIsConstraintSet,
    /// Bounded sets have bounded images.
    Boundedness,
}

/// First violation found by [`penalty_axioms_check`], with its witness.
#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("penalty axiom {axiom:?} violated in trial {trial}: observed {observed}, allowed {allowed}")]
pub struct AxiomViolation {
    pub axiom: Axiom,
    pub trial: usize,
    pub observed: f64,
    pub allowed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyAxiomReport {
    pub trials: usize,
    /// Largest `|Δp| / (Lip · Δt)` over sampled segments; at most 1.
    pub continuity_max_ratio: f64,
    /// Smallest `⟨P(u) − P(v), u − v⟩ / scale`.
    pub monotonicity_min_relative: f64,
    pub kernel_forward_ok: bool,
    pub kernel_converse_ok: bool,
    /// Largest `|P(u)|_{L²(Ω)}` over the sampled ball, and its a-priori bound.
    pub boundedness_sup: f64,
    pub boundedness_bound: f64,
    pub passed: bool,
}

const CONTINUITY_SUBDIVISIONS: usize = 64;

/// Randomized verification of the penalty-operator axioms for the problem's
/// obstacle and well.
pub fn penalty_axioms_check(ps: &ProblemSpec, trials: usize, seed: u64) -> Result<PenaltyAxiomReport, AxiomViolation> {
    let trials = trials.max(1);
    let grid = ps.grid;
    let mut rng = sample::rng(seed);
    let amp = ps.phi_plus.max_abs().max(1e-3);
    let reach = ps.potential.well_radius;
    let w = grid.cell_volume();
    let omega = ps.omega.flags();
    let mut report = PenaltyAxiomReport {
        trials,
        continuity_max_ratio: 0.0,
        monotonicity_min_relative: f64::INFINITY,
        kernel_forward_ok: true,
        kernel_converse_ok: true,
        boundedness_sup: 0.0,
        boundedness_bound: 0.0,
        passed: true,
    };
    let random = |rng: &mut sample::SampleRng| sample::random_smooth(grid, rng, 3, reach, false).scaled(2.0 * amp);

    for trial in 0..trials {
        // Continuity along a segment.
        let (u, v, z) = (random(&mut rng), random(&mut rng), random(&mut rng));
        let lip = w * pairwise_sum(omega.len(), |i| if omega[i] { (v.values()[i] * z.values()[i]).abs() } else { 0.0 });
        let dt = 1.0 / CONTINUITY_SUBDIVISIONS as f64;
        let mut prev = penalty_pairing(&u, &z, ps);
        for j in 1..=CONTINUITY_SUBDIVISIONS {
            let cur = penalty_pairing(&u.add_scaled(j as f64 * dt, &v), &z, ps);
            let allowed = lip * dt * (1.0 + 1e-9) + 1e-300;
            let ratio = (cur - prev).abs() / allowed;
            report.continuity_max_ratio = report.continuity_max_ratio.max(ratio);
            if ratio > 1.0 {
                return Err(AxiomViolation { axiom: Axiom::Continuity, trial, observed: (cur - prev).abs(), allowed });
            }
            prev = cur;
        }

        // Monotonicity.
        let diff = u.add_scaled(-1.0, &v);
        let pairing = penalty_pairing(&u, &diff, ps) - penalty_pairing(&v, &diff, ps);
        let (uv, vv, phi) = (u.values(), v.values(), ps.phi.values());
        let scale = w * pairwise_sum(uv.len(), |i| {
            if omega[i] {
                ((phi[i] - uv[i]).max(0.0) + (phi[i] - vv[i]).max(0.0)) * (uv[i] - vv[i]).abs()
            } else {
                0.0
            }
        });
        let floor = -1e-12 * scale.max(f64::MIN_POSITIVE);
        if scale > 0.0 {
            report.monotonicity_min_relative = report.monotonicity_min_relative.min(pairing / scale);
        }
        if pairing < floor {
            return Err(AxiomViolation { axiom: Axiom::Monotonicity, trial, observed: pairing, allowed: floor });
        }

        // Kernel: members of 𝕂 map to zero, a single violating node does not.
        let member =
            Field::from_raw(grid, (0..uv.len()).map(|i| if omega[i] { uv[i].max(phi[i]) } else { uv[i] }).collect());
        let p_member = penalty_density(&member, ps);
        let forward = p_member.values().iter().all(|&x| x == 0.0);
        if !forward {
            return Err(AxiomViolation {
                axiom: Axiom::KernelIsConstraintSet,
                trial,
                observed: p_member.max_abs(),
                allowed: 0.0,
            });
        }
        let omega_nodes: Vec<usize> = (0..omega.len()).filter(|&i| omega[i]).collect();
        let pick =
            omega_nodes[(sample::uniform(&mut rng, 0.0, 1.0) * omega_nodes.len() as f64) as usize % omega_nodes.len()];
        let mut outsider = member.clone();
        outsider.values_mut()[pick] = phi[pick] - 1.0;
        let p_out = penalty_density(&outsider, ps);
        if p_out.values().iter().all(|&x| x == 0.0) {
            return Err(AxiomViolation { axiom: Axiom::KernelIsConstraintSet, trial, observed: 0.0, allowed: 1.0 });
        }

        // Boundedness on the λ-ball of radius R: |P(u)|₂ ≤ |φ|_{2,Ω} + |u|₂ ≤ |φ|_{2,Ω} + R.
        let radius = 10.0 * ps.norm_lambda(&ps.phi_plus) + 1.0;
        let direction = random(&mut rng);
        let norm = ps.norm_lambda(&direction);
        let s = sample::uniform(&mut rng, 0.0, 1.0) * radius / norm;
        let inside_ball = direction.scaled(s);
        let p = penalty_density(&inside_ball, ps);
        let sup = sqrt(weighted_dot(&grid, p.values(), p.values()));
        let bound = ps.obstacle_l2_on_omega() + radius;
        report.boundedness_sup = report.boundedness_sup.max(sup);
        report.boundedness_bound = bound;
        if !(sup.is_finite() && sup <= bound * (1.0 + 1e-12)) {
            return Err(AxiomViolation { axiom: Axiom::Boundedness, trial, observed: sup, allowed: bound });
        }
    }
    if report.monotonicity_min_relative == f64::INFINITY {
        report.monotonicity_min_relative = 0.0;
    }
    Ok(report)
}

/// Outcome of [`truncation_inequalities_check`]. Violation counts are per
/// property `(g₁)`..`(g₅)` (the `g̃` versions for `N = 2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationInequalityReport {
    pub samples: usize,
    pub violations: [usize; 5],
    /// `t₀` with `f(t)/t = 10⁻³`; `(g₂)` is checked as `g/t ≤ 10⁻³` below it.
    pub t0: f64,
    /// Constant of the growth bound `(g₃)`: `C_β` for `β = 1` (`N ≥ 3`), or
    /// `C_ν` for `l = p`, `α = α₀` (`N = 2`), as the largest sampled ratio.
    pub growth_constant: f64,
}

impl TruncationInequalityReport {
    pub fn total_violations(&self) -> usize {
        self.violations.iter().sum()
    }
}

/// Values of `λ` used for the upper bound in `(g₅)`.
pub const G5_LAMBDAS: [f64; 3] = [0.0, 1.0, 100.0];

/// Checks the structural inequalities of the truncated nonlinearity `g` on
/// `samples` random `(node, t)` pairs, at relative tolerance `tol`.
///
/// * `(g₁)` `g(x, t) = 0` for `t ≤ 0`.
/// * `(g₂)` `g(x, t)/t ≤ 10⁻³` for `0 < t ≤ t₀`.
/// * `(g₃)` `|g| ≤ μ|t|^{q−1} + C_β|t|^{2*−1}` with `C_β = 1`; for `N = 2`
///   the constant `C_ν` in `|g| ≤ ½|t| + C_ν|t|^p(e^{α₀t²} − 1)` must be finite.
/// * `(g₄)` `0 < qG ≤ tg` in `Ω̃` (`θ` for `N = 2`).
/// * `(g₅)` `0 < 2G ≤ tg ≤ (1 + λV)t²/k` outside `Ω̃`, for each λ in [`G5_LAMBDAS`].
pub fn truncation_inequalities_check(
    ps: &ProblemSpec,
    samples: usize,
    seed: u64,
    tol: f64,
) -> TruncationInequalityReport {
    let mut rng = sample::rng(seed);
    let nl = ps.nonlinearity();
    let TruncationParams { k, a } = ps.truncation_params();
    let q = nl.ar_exponent();
    let interior: Vec<usize> = {
        let mut v = Vec::new();
        ps.grid.for_each_interior(|i| v.push(i));
        v
    };
    let t_max = (20.0 * a).min(0.95 * nl.overflow_threshold());
    let t_min = 1e-3 * a;
    let t0 = {
        let (mut lo, mut hi) = (0.0_f64, a);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if nl.f(mid) / mid < 1e-3 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let le = |x: f64, y: f64| x <= y + tol * x.abs().max(y.abs());
    let mut violations = [0usize; 5];
    let mut growth_constant: f64 = 0.0;
    for trial in 0..samples {
        let node = interior[(sample::uniform(&mut rng, 0.0, 1.0) * interior.len() as f64) as usize % interior.len()];
        let in_tilde = ps.tilde.contains(node);
        let lt = sample::uniform(&mut rng, ln(t_min), ln(t_max));
        if trial % 10 == 0 {
            let t = -exp(lt);
            if ps.g_eval(node, t) != 0.0 || ps.big_g_eval(node, t) != 0.0 {
                violations[0] += 1;
            }
            continue;
        }
        let t = if trial % 10 == 1 { t0 * sample::uniform(&mut rng, 1e-3, 1.0) } else { exp(lt) };
        let g = ps.g_eval(node, t);
        let big_g = ps.big_g_eval(node, t);
        if t <= t0 && !le(g / t, 1e-3) {
            violations[1] += 1;
        }
        match *nl.spec() {
            NonlinearitySpec::PowerCritical { mu, q } => {
                let n = ps.grid.dimension() as f64;
                let crit = 2.0 * n / (n - 2.0);
                let lead = mu * powf(t, q - 1.0);
                growth_constant = growth_constant.max((g.abs() - lead).max(0.0) / powf(t, crit - 1.0));
                if !le(g.abs(), lead + powf(t, crit - 1.0)) {
                    violations[2] += 1;
                }
            }
            NonlinearitySpec::ExpCritical { p, alpha0, .. } => {
                let tail = powf(t, p) * expm1(alpha0 * t * t);
                let c = (g.abs() - 0.5 * t).max(0.0) / tail;
                if !c.is_finite() {
                    violations[2] += 1;
                } else {
                    growth_constant = growth_constant.max(c);
                }
            }
        }
        if in_tilde {
            if !(big_g > 0.0 && le(q * big_g, t * g)) {
                violations[3] += 1;
            }
        } else {
            let v = ps.v.values()[node];
            let upper_ok = G5_LAMBDAS.iter().all(|lam| le(t * g, (1.0 + lam * v) * t * t / k));
            if !(big_g > 0.0 && le(2.0 * big_g, t * g) && upper_ok) {
                violations[4] += 1;
            }
        }
    }
    TruncationInequalityReport { samples, violations, t0, growth_constant }
}

/// Result of [`tm_moment`]. On overflow `value` is `+∞` and `overflow` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmMoment {
    pub value: f64,
    pub overflow: bool,
    /// Largest exponent `α u(x)²` over the grid.
    pub max_exponent: f64,
}

/// `∫ (e^{α u²} − 1)^{q}` on a 2D grid.
pub fn tm_moment(u: &Field, alpha: f64, qexp: f64) -> Result<TmMoment, EnergyError> {
    if u.grid().dimension() != 2 {
        return Err(EnergyError::NotTwoDimensional);
    }
    if !(alpha > 0.0) {
        return Err(EnergyError::InvalidArgument("alpha must be positive"));
    }
    if !(qexp >= 1.0) {
        return Err(EnergyError::InvalidArgument("moment exponent must be at least 1"));
    }
    let uv = u.values();
    let max_exponent = alpha * u.max_abs() * u.max_abs();
    if qexp * max_exponent > MAX_EXPONENT {
        return Ok(TmMoment { value: f64::INFINITY, overflow: true, max_exponent });
    }
    let value = u.grid().cell_volume() * pairwise_sum(uv.len(), |i| powf(expm1(alpha * uv[i] * uv[i]), qexp));
    Ok(TmMoment { value, overflow: false, max_exponent })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use alloc::vec;

    /// Small 2D exponential-critical problem used across unit tests.
    pub fn small_2d(n: usize) -> ProblemSpec {
        let grid = GridSpec::new(2, n, 4.0).unwrap();
        ProblemSpec::new(
            grid,
            PotentialSpec { well_radius: 2.0, scale: 1.0 },
            ObstacleSpec { center: vec![0.0, 0.0], radius: 0.8, height: 0.05, outside_depth: 0.0 },
            NonlinearitySpec::ExpCritical { nu: 4.0, p: 3.0, alpha0: 1.0, theta: 4.0 },
            3.0,
            16.0,
            1e-2,
        )
        .unwrap()
    }

    pub fn small_3d(n: usize) -> ProblemSpec {
        let grid = GridSpec::new(3, n, 3.0).unwrap();
        ProblemSpec::new(
            grid,
            PotentialSpec { well_radius: 1.5, scale: 1.0 },
            ObstacleSpec { center: vec![0.0, 0.0, 0.0], radius: 0.7, height: 0.05, outside_depth: 0.0 },
            NonlinearitySpec::PowerCritical { mu: 1.0, q: 4.0 },
            2.2,
            16.0,
            1e-2,
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn zero_field_energy_is_obstacle_penalty() {
        let ps = small_2d(33);
        let e = energy(&Field::zeros(*ps.grid()), &ps).unwrap();
        let pp = ps.obstacle_plus();
        let expected = 0.5 / ps.eps() * pp.dot_weighted(pp);
        assert!((e.total - expected).abs() <= 1e-14 * expected);
        assert_eq!(e.quadratic, 0.0);
        assert_eq!(e.nonlinear, 0.0);
    }

    #[test]
    fn obstacle_plus_has_no_penalty_and_ray_goes_negative() {
        let ps = small_2d(33);
        let pp = ps.obstacle_plus().clone();
        assert_eq!(energy(&pp, &ps).unwrap().penalty, 0.0);
        let e1 = energy_total(&pp, &ps).unwrap();
        let e64 = energy_total(&pp.scaled(64.0), &ps).unwrap();
        assert!(e64 < e1);
    }

    #[test]
    fn breakdown_is_consistent() {
        let ps = small_2d(33);
        let mut rng = sample::rng(3);
        let u = sample::random_smooth(*ps.grid(), &mut rng, 4, 2.0, false).scaled(0.3);
        let e = energy(&u, &ps).unwrap();
        assert!((e.total - (e.quadratic + e.penalty - e.nonlinear)).abs() <= 1e-14 * e.total.abs().max(1.0));
        assert!(e.quadratic >= 0.0 && e.penalty >= 0.0);
    }

    #[test]
    fn residual_at_zero_is_minus_obstacle_force() {
        let ps = small_2d(33);
        let r = residual(&Field::zeros(*ps.grid()), &ps).unwrap();
        for i in 0..r.values().len() {
            let expected = if ps.omega().contains(i) { -ps.obstacle_plus().values()[i] / ps.eps() } else { 0.0 };
            assert!((r.values()[i] - expected).abs() <= 1e-14 * expected.abs());
        }
    }

    #[test]
    fn residual_matches_central_differences() {
        for ps in [small_2d(33), small_3d(17)] {
            let mut rng = sample::rng(11);
            let grid = *ps.grid();
            for trial in 0..5 {
                let u = sample::random_smooth(grid, &mut rng, 3, 1.5, false).scaled(0.4);
                let r = residual(&u, &ps).unwrap();
                for _ in 0..4 {
                    let v = sample::random_smooth(grid, &mut rng, 3, 1.5, false);
                    let delta = 1e-5;
                    // Central differences are only second-order accurate when no
                    // node crosses the hinge inside [u − δv, u + δv].
                    let crosses = (0..v.values().len()).any(|i| {
                        ps.omega().contains(i)
                            && (u.values()[i] - ps.obstacle().values()[i]).abs() <= delta * v.values()[i].abs()
                    });
                    if crosses {
                        continue;
                    }
                    let ip = energy_total(&u.add_scaled(delta, &v), &ps).unwrap();
                    let im = energy_total(&u.add_scaled(-delta, &v), &ps).unwrap();
                    let fd = (ip - im) / (2.0 * delta);
                    let an = r.dot_weighted(&v);
                    let scale = 1.0 + energy_total(&u, &ps).unwrap().abs();
                    assert!((fd - an).abs() <= 1e-6 * scale, "trial {trial}: fd {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn residual_continuous_across_obstacle() {
        let ps = small_2d(33);
        let node = ps.grid().center();
        let phi = ps.obstacle().values()[node];
        let mut lo = ps.obstacle_plus().clone();
        let mut hi = lo.clone();
        let d = 1e-7;
        lo.values_mut()[node] = phi - d;
        hi.values_mut()[node] = phi + d;
        let (rl, rh) = (residual(&lo, &ps).unwrap(), residual(&hi, &ps).unwrap());
        let jump = (rl.values()[node] - rh.values()[node]).abs();
        // Lipschitz constant of the nodal residual in u_node: stencil + mass + penalty + g'.
        let h = ps.grid().spacing();
        let lip = 4.0 / (h * h) + 1.0 + 1.0 / ps.eps() + ps.nonlinearity().f_prime(phi + d);
        assert!(jump <= lip * 2.0 * d);
    }

    #[test]
    fn penalty_pairing_cases() {
        let ps = small_2d(33);
        let grid = *ps.grid();
        let phi = ps.obstacle();
        let above = phi.map(|p| p + 0.1);
        let mut rng = sample::rng(5);
        let v = sample::random_smooth(grid, &mut rng, 3, 2.0, false);
        assert_eq!(penalty_pairing(&above, &v, &ps), 0.0);
        let c = 0.3;
        let below = phi.map(|p| p - c);
        let vpos = v.map(|x| x.abs());
        let omega_int: f64 = (0..vpos.values().len())
            .filter(|&i| ps.omega().contains(i))
            .map(|i| vpos.values()[i] * grid.cell_volume())
            .sum();
        let got = penalty_pairing(&below, &vpos, &ps);
        assert!((got + c * omega_int).abs() < 1e-12 * omega_int);
    }

    #[test]
    fn truncation_inequalities_hold() {
        for ps in [small_2d(17), small_3d(11)] {
            let rep = truncation_inequalities_check(&ps, 2000, 4, 1e-12);
            assert_eq!(rep.violations, [0; 5], "{rep:?}");
            assert!(rep.growth_constant.is_finite());
            assert!(ps.nonlinearity().f(rep.t0) / rep.t0 <= 1e-3 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn penalty_axioms_hold() {
        let ps = small_2d(33);
        let rep = penalty_axioms_check(&ps, 20, 9).unwrap();
        assert!(rep.passed && rep.kernel_forward_ok && rep.kernel_converse_ok);
        assert!(rep.continuity_max_ratio <= 1.0);
        assert!(rep.boundedness_sup <= rep.boundedness_bound);
    }

    #[test]
    fn tm_moment_basics() {
        let ps = small_2d(33);
        let z = Field::zeros(*ps.grid());
        assert_eq!(tm_moment(&z, 1.0, 1.0).unwrap().value, 0.0);
        let u = ps.obstacle_plus().scaled(2.0);
        let alpha = 0.1 / (u.max_abs() * u.max_abs());
        let m = tm_moment(&u, alpha, 1.0).unwrap().value;
        let taylor = alpha * u.dot_weighted(&u);
        assert!((m - taylor).abs() <= 0.1 * taylor);
        assert!(tm_moment(&u, 1e6, 1.0).unwrap().overflow);
        assert!(matches!(tm_moment(&Field::zeros(*small_3d(9).grid()), 1.0, 1.0), Err(EnergyError::NotTwoDimensional)));
    }
}
