//! The two limit procedures: `ε → 0`, which recovers the variational
//! inequality from the penalized equation, and `λ → ∞`, which concentrates
//! solutions in the well. Also the checks that turn a penalized, truncated
//! solution into a solution of the original problem.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{grad_pairing, region_mass, Field};
use crate::energy::{penalty_violation, ProblemError, ProblemSpec};
use crate::math::{pairwise_sum, powf, sqrt};
use crate::sample;
use crate::solver::{mountain_pass, solve_from, MountainPassResult, SolverConfig, SolverError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContinuationError {
    #[error("parameter schedule invalid: {0}")]
    Schedule(&'static str),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("input is too far from the constraint set (clip distance {distance}, allowed {allowed})")]
    ClipTooFar { distance: f64, allowed: f64 },
    #[error("at least 10 trials are required")]
    TooFewTrials,
}

/// Metrics of one sweep step, evaluated on the final field of that step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepStep {
    pub param_value: f64,
    pub level: f64,
    /// `∫_Ω [(φ − u)⁺]²`.
    pub penalty_violation: f64,
    /// `min_Ω (u − φ)`.
    pub constraint_gap: f64,
    /// `H¹` mass of `u` outside `Ω`.
    pub outside_mass: f64,
    /// `λ ∫ V u²`.
    #[serde(rename = "lamVu2")]
    pub lam_vu2: f64,
    /// `max u` over nodes outside `Ω̃`.
    pub sup_outside_tilde: f64,
    pub a_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepReport {
    pub steps: Vec<SweepStep>,
}

impl SweepReport {
    /// Checks `x_{k+1} ≤ (1 + slack) x_k` on the last `window` steps of the
    /// chosen metric.
    pub fn decreasing<F: Fn(&SweepStep) -> f64>(&self, metric: F, window: usize, slack: f64) -> bool {
        let n = self.steps.len();
        let start = n.saturating_sub(window);
        self.steps[start..].windows(2).all(|w| metric(&w[1]) <= (1.0 + slack) * metric(&w[0]))
    }
}

/// Sweep that stopped early, with everything computed before the failure.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("sweep aborted at parameter {param_value}: {error}")]
pub struct SweepFailure {
    pub partial: SweepReport,
    pub param_value: f64,
    pub error: ContinuationError,
}

/// A completed ε-sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSweep {
    pub report: SweepReport,
    /// Critical point of every step, in schedule order.
    pub solutions: Vec<MountainPassResult>,
    /// Steps whose warm start did not converge and needed a cold path run.
    pub cold_restarts: Vec<usize>,
}

impl EpsilonSweep {
    /// The VI candidate: the solution at the smallest `ε`.
    pub fn candidate(&self) -> &Field {
        &self.solutions.last().expect("sweeps have at least 3 steps").u
    }
}

/// A completed λ-sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSweep {
    pub report: SweepReport,
    pub eps_sweeps: Vec<EpsilonSweep>,
    /// First `λ` from which `sup_{Ω̃ᶜ} u ≤ a` holds for every later step.
    pub lambda_star: Option<f64>,
}

impl LambdaSweep {
    pub fn candidate(&self) -> &Field {
        self.eps_sweeps.last().expect("nonempty sweep").candidate()
    }
}

/// `εₖ = ε₀ 2^{−k}`, `k = 0..steps`.
pub fn default_eps_schedule(eps0: f64, steps: usize) -> Vec<f64> {
    (0..steps).map(|k| eps0 * powf(2.0, -(k as f64))).collect()
}

/// `λₖ = base^k`, `k = 0..steps`.
pub fn default_lambda_schedule(base: f64, steps: usize) -> Vec<f64> {
    (0..steps).map(|k| powf(base, k as f64)).collect()
}

/// Sweep metrics of `u` for `ps`.
pub fn step_metrics(u: &Field, level: f64, param_value: f64, ps: &ProblemSpec) -> SweepStep {
    let uv = u.values();
    let phi = ps.obstacle().values();
    let omega = ps.omega();
    let mut gap = f64::INFINITY;
    let mut sup_out: f64 = 0.0;
    for i in 0..uv.len() {
        if omega.contains(i) {
            gap = gap.min(uv[i] - phi[i]);
        }
        if !ps.omega_tilde().contains(i) {
            sup_out = sup_out.max(uv[i]);
        }
    }
    let v = ps.potential().values();
    let w = ps.grid().cell_volume();
    SweepStep {
        param_value,
        level,
        penalty_violation: penalty_violation(u, ps),
        constraint_gap: gap,
        outside_mass: region_mass(u, |i| !omega.contains(i)).total(),
        lam_vu2: ps.lam() * w * pairwise_sum(uv.len(), |i| v[i] * uv[i] * uv[i]),
        sup_outside_tilde: sup_out,
        a_threshold: ps.truncation_params().a,
    }
}

fn check_descending(list: &[f64]) -> Result<(), ContinuationError> {
    if list.len() < 3 {
        return Err(ContinuationError::Schedule("an epsilon sweep needs at least 3 values"));
    }
    if !list.iter().all(|e| e.is_finite() && *e > 0.0) || list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(ContinuationError::Schedule("epsilon values must be positive and strictly descending"));
    }
    Ok(())
}

/// Solves the penalized problem for each `ε` in turn, warm-starting every
/// step from the previous solution (and the first from `init`, if given).
pub fn epsilon_sweep_from(
    ps: &ProblemSpec,
    eps_list: &[f64],
    cfg: &SolverConfig,
    init: Option<&Field>,
) -> Result<EpsilonSweep, SweepFailure> {
    let fail = |partial: &SweepReport, param_value: f64, error: ContinuationError| SweepFailure {
        partial: partial.clone(),
        param_value,
        error,
    };
    let mut report = SweepReport::default();
    check_descending(eps_list).map_err(|e| fail(&report, f64::NAN, e))?;
    let mut solutions: Vec<MountainPassResult> = Vec::with_capacity(eps_list.len());
    let mut cold_restarts = Vec::new();
    for (k, &eps) in eps_list.iter().enumerate() {
        let step_ps = ps.with_eps(eps).map_err(|e| fail(&report, eps, e.into()))?;
        let previous = solutions.last().map(|s| &s.u).or(init);
        let result = match previous {
            Some(u0) => solve_from(u0, &step_ps, cfg),
            None => mountain_pass(&step_ps, cfg),
        }
        .map_err(|e| fail(&report, eps, e.into()))?;
        if previous.is_some() && result.iterations > 0 {
            cold_restarts.push(k);
        }
        if !result.refined {
            return Err(fail(&report, eps, SolverError::InvalidConfig("solve did not reach grad_tol").into()));
        }
        report.steps.push(step_metrics(&result.u, result.level, eps, &step_ps));
        solutions.push(result);
    }
    Ok(EpsilonSweep { report, solutions, cold_restarts })
}

/// ε-sweep from a cold start.
pub fn epsilon_sweep(ps: &ProblemSpec, eps_list: &[f64], cfg: &SolverConfig) -> Result<EpsilonSweep, SweepFailure> {
    epsilon_sweep_from(ps, eps_list, cfg, None)
}

/// Runs a full ε-sweep for every `λ`, warm-starting each from the first
/// solution of the previous `λ`, and records the metrics of each final field.
pub fn lambda_sweep(
    base: &ProblemSpec,
    lambda_list: &[f64],
    eps_list: &[f64],
    cfg: &SolverConfig,
) -> Result<LambdaSweep, SweepFailure> {
    let mut report = SweepReport::default();
    if lambda_list.is_empty() {
        return Err(SweepFailure {
            partial: report,
            param_value: f64::NAN,
            error: ContinuationError::Schedule("a lambda sweep needs at least one value"),
        });
    }
    if !lambda_list.iter().all(|l| l.is_finite() && *l >= 0.0) || lambda_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SweepFailure {
            partial: report,
            param_value: f64::NAN,
            error: ContinuationError::Schedule("lambda values must be non-negative and strictly ascending"),
        });
    }
    let mut eps_sweeps: Vec<EpsilonSweep> = Vec::with_capacity(lambda_list.len());
    for &lam in lambda_list {
        let ps = base.with_lambda(lam).map_err(|e| SweepFailure {
            partial: report.clone(),
            param_value: lam,
            error: e.into(),
        })?;
        let init = eps_sweeps.last().map(|s| &s.solutions[0].u);
        let sweep = epsilon_sweep_from(&ps, eps_list, cfg, init).map_err(|f| SweepFailure {
            partial: report.clone(),
            param_value: lam,
            error: f.error,
        })?;
        let last = sweep.solutions.last().expect("nonempty");
        let final_ps = ps.with_eps(*eps_list.last().expect("nonempty")).expect("validated");
        report.steps.push(step_metrics(&last.u, last.level, lam, &final_ps));
        eps_sweeps.push(sweep);
    }
    let lambda_star = lambda_star(&report);
    Ok(LambdaSweep { report, eps_sweeps, lambda_star })
}

/// First parameter value from which `sup_outside_tilde ≤ a_threshold` holds
/// for all later steps.
pub fn lambda_star(report: &SweepReport) -> Option<f64> {
    let mut star = None;
    for step in report.steps.iter().rev() {
        if step.sup_outside_tilde <= step.a_threshold {
            star = Some(step.param_value);
        } else {
            break;
        }
    }
    star
}

/// Most negative value of the variational-inequality pairing over sampled
/// admissible test functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViReport {
    /// `min(0, min_v [B(u, v−u) − ∫g(x,u)(v−u)])`.
    pub max_violation: f64,
    /// Largest sum of magnitudes of the pairing's terms over the samples.
    pub scale: f64,
    /// `‖u − clip(u)‖_λ`.
    pub clip_distance: f64,
    /// Largest `|pairing| / scale` over family-(i) samples supported off the
    /// contact set.
    pub complementarity: f64,
    pub contact_nodes: usize,
    pub samples: usize,
}

impl ViReport {
    pub fn relative_violation(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_violation / self.scale
        } else {
            0.0
        }
    }
}

/// Projection onto `𝕂`: `u ← max(u, φ)` on `Ω` nodes.
pub fn clip_to_constraint(u: &Field, ps: &ProblemSpec) -> Field {
    let phi = ps.obstacle().values();
    let vals =
        u.values().iter().enumerate().map(|(i, &x)| if ps.omega().contains(i) { x.max(phi[i]) } else { x }).collect();
    Field::from_raw(*ps.grid(), vals)
}

/// `Ω` nodes with `u − φ ≤ 1e−10 · max φ⁺`.
pub fn contact_set(u: &Field, ps: &ProblemSpec) -> Vec<bool> {
    let tol = 1e-10 * ps.obstacle_plus().max();
    let phi = ps.obstacle().values();
    u.values().iter().enumerate().map(|(i, &x)| ps.omega().contains(i) && x - phi[i] <= tol).collect()
}

/// How the pairing of [`vi_pairing`] is set up.
struct ViForm<'a> {
    ps: &'a ProblemSpec,
    /// Limit problem: `V` dropped, `f` in place of `g`, everything on `Ω`.
    limit: bool,
}

impl ViForm<'_> {
    /// Returns `(pairing, scale)` for the direction `z = v − u`.
    fn pairing(&self, u: &Field, z: &Field) -> (f64, f64) {
        let ps = self.ps;
        let w = ps.grid().cell_volume();
        let (uv, zv, vv) = (u.values(), z.values(), ps.potential().values());
        let grad = grad_pairing(u, z);
        let (mass, nonlin) = if self.limit {
            let nl = ps.nonlinearity();
            (w * pairwise_sum(uv.len(), |i| uv[i] * zv[i]), w * pairwise_sum(uv.len(), |i| nl.f(uv[i]) * zv[i]))
        } else {
            (
                w * pairwise_sum(uv.len(), |i| (1.0 + ps.lam() * vv[i]) * uv[i] * zv[i]),
                w * pairwise_sum(uv.len(), |i| ps.g_eval(i, uv[i]) * zv[i]),
            )
        };
        (grad + mass - nonlin, grad.abs() + mass.abs() + nonlin.abs())
    }
}

fn sample_vi(
    u: &Field,
    ps: &ProblemSpec,
    form: &ViForm<'_>,
    trials: usize,
    seed: u64,
    support: &dyn Fn(usize) -> bool,
    clip_distance: f64,
) -> ViReport {
    let grid = *ps.grid();
    let mut rng = sample::rng(seed);
    let phi = ps.obstacle().values();
    let contact = contact_set(u, ps);
    let amp = u.max_abs().max(ps.obstacle_plus().max());
    let reach = ps.potential_spec().well_radius;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    let mut samples = 0;
    let restrict = |f: Field, keep: &dyn Fn(usize) -> bool| {
        let vals = f.values().iter().enumerate().map(|(i, &x)| if keep(i) { x } else { 0.0 }).collect();
        Field::from_raw(grid, vals)
    };
    for _ in 0..trials {
        let count = 1 + (sample::uniform(&mut rng, 0.0, 3.0) as usize).min(2);
        let psi = sample::random_smooth(grid, &mut rng, count, reach, true);
        let psi = restrict(psi.scaled(amp / psi.max_abs().max(f64::MIN_POSITIVE)), support);
        for t in [0.1, 1.0] {
            // Family (i): v = u + tψ.
            let z = psi.scaled(t);
            let (p, s) = form.pairing(u, &z);
            worst = worst.min(p);
            scale = scale.max(s);
            samples += 1;
            // Family (i) off the contact set: equality up to the residual.
            let z_off = restrict(z.clone(), &|i| !contact[i]);
            let (p_off, s_off) = form.pairing(u, &z_off);
            if s_off > 0.0 {
                complementarity = complementarity.max(p_off.abs() / s_off);
            }
            // Family (ii): v = max(u − tψ, φ) on Ω.
            let vals = u
                .values()
                .iter()
                .zip(psi.values())
                .enumerate()
                .map(|(i, (&x, &y))| {
                    let v = x - t * y;
                    let v = if ps.omega().contains(i) { v.max(phi[i]) } else { v };
                    v - x
                })
                .collect();
            let z = Field::from_raw(grid, vals);
            let (p, s) = form.pairing(u, &z);
            worst = worst.min(p);
            scale = scale.max(s);
            samples += 1;
        }
    }
    ViReport {
        max_violation: worst,
        scale,
        clip_distance,
        complementarity,
        contact_nodes: contact.iter().filter(|&&c| c).count(),
        samples,
    }
}

fn clip_checked(u: &Field, ps: &ProblemSpec) -> Result<(Field, f64), ContinuationError> {
    let clipped = clip_to_constraint(u, ps);
    let distance = ps.norm_lambda(&clipped.add_scaled(-1.0, u));
    let allowed = 1e-3 * ps.norm_lambda(u);
    if distance > allowed {
        return Err(ContinuationError::ClipTooFar { distance, allowed });
    }
    Ok((clipped, distance))
}

/// Samples the variational inequality of the truncated problem at `u`
/// (clipped into `𝕂` first) with `trials` random bumps `ψ ≥ 0`, each used at
/// `t ∈ {0.1, 1}` in both test families.
pub fn vi_verify(u: &Field, ps: &ProblemSpec, trials: usize, seed: u64) -> Result<ViReport, ContinuationError> {
    if trials < 10 {
        return Err(ContinuationError::TooFewTrials);
    }
    let (clipped, distance) = clip_checked(u, ps)?;
    let grid = *ps.grid();
    let form = ViForm { ps, limit: false };
    Ok(sample_vi(&clipped, ps, &form, trials, seed, &|i| !grid.is_boundary(i), distance))
}

/// Restriction of `u` to `Ω` with zero extension.
pub fn restrict_to_omega(u: &Field, ps: &ProblemSpec) -> Field {
    let vals = u.values().iter().enumerate().map(|(i, &x)| if ps.omega().contains(i) { x } else { 0.0 }).collect();
    Field::from_raw(*ps.grid(), vals)
}

/// Limit-problem check: `∫_Ω∇u∇(v−u) + ∫_Ω u(v−u) ≥ ∫_Ω f(u)(v−u)` for
/// sampled `v ∈ H¹₀(Ω)` with `v ≥ φ`, at the `Ω`-restriction of `u`.
pub fn limit_vi_verify(
    u: &Field,
    ps: &ProblemSpec,
    trials: usize,
    seed: u64,
) -> Result<LimitViReport, ContinuationError> {
    if trials < 10 {
        return Err(ContinuationError::TooFewTrials);
    }
    let (clipped, distance) = clip_checked(u, ps)?;
    let restricted = restrict_to_omega(&clipped, ps);
    let form = ViForm { ps, limit: true };
    let omega = ps.omega();
    let vi = sample_vi(&restricted, ps, &form, trials, seed, &|i| omega.contains(i), distance);
    let w = ps.grid().cell_volume();
    let rv = restricted.values();
    let restricted_energy = grad_pairing(&restricted, &restricted) + w * pairwise_sum(rv.len(), |i| rv[i] * rv[i]);
    Ok(LimitViReport { vi, restricted_energy, norm_lambda_sq: ps.norm_lambda_sq(u) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitViReport {
    pub vi: ViReport,
    /// `∫_Ω (|∇u|² + u²)` of the zero-extended restriction.
    pub restricted_energy: f64,
    pub norm_lambda_sq: f64,
}

impl LimitViReport {
    /// `|‖u‖²_λ − ∫_Ω(|∇u|² + u²)| / ‖u‖²_λ`.
    pub fn energy_mismatch(&self) -> f64 {
        (self.norm_lambda_sq - self.restricted_energy).abs() / self.norm_lambda_sq
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationConsistency {
    pub sup_outside: f64,
    /// `sup_outside ≤ a`.
    pub ok: bool,
    /// `sup_outside / |u|_{L^s(Ω̃ᶜ)}` with `s = 2*` (`s = 4` for N = 2);
    /// zero when `u` vanishes outside `Ω̃`.
    pub moser_ratio: f64,
    /// `g(x, u(x)) = f(u(x))` at every node.
    pub truncation_inactive: bool,
}

/// Whether the truncation is inactive on `u`, so that the modified problem's
/// solution solves the original one.
pub fn truncation_consistency(u: &Field, ps: &ProblemSpec) -> TruncationConsistency {
    let uv = u.values();
    let tilde = ps.omega_tilde();
    let a = ps.truncation_params().a;
    let n = ps.grid().dimension() as f64;
    let s = if n > 2.0 { 2.0 * n / (n - 2.0) } else { 4.0 };
    let mut sup_outside: f64 = 0.0;
    for (i, &v) in uv.iter().enumerate() {
        if !tilde.contains(i) {
            sup_outside = sup_outside.max(v);
        }
    }
    let ls = powf(
        ps.grid().cell_volume()
            * pairwise_sum(uv.len(), |i| if tilde.contains(i) { 0.0 } else { powf(uv[i].abs(), s) }),
        1.0 / s,
    );
    let nl = ps.nonlinearity();
    let truncation_inactive = (0..uv.len()).all(|i| ps.g_eval(i, uv[i]) == nl.f(uv[i]));
    TruncationConsistency {
        sup_outside,
        ok: sup_outside <= a,
        moser_ratio: if ls > 0.0 { sup_outside / ls } else { 0.0 },
        truncation_inactive,
    }
}

/// `max/min` of the positive Moser ratios of a sweep.
pub fn moser_spread(ratios: &[f64]) -> f64 {
    let pos: Vec<f64> = ratios.iter().copied().filter(|r| *r > 0.0 && r.is_finite()).collect();
    if pos.is_empty() {
        return 1.0;
    }
    let max = pos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = pos.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// `‖u‖_λ`-distance between consecutive sweep fields, used to judge how far
/// each warm start had to travel.
pub fn warm_start_distances(sweep: &EpsilonSweep, ps: &ProblemSpec) -> Vec<f64> {
    sweep.solutions.windows(2).map(|w| sqrt(ps.norm_lambda_sq(&w[1].u.add_scaled(-1.0, &w[0].u)))).collect()
}
