//! Subcommand pipelines.
//!
//! Every pipeline returns a [`Report`]: named pass/fail checks, an optional
//! structured failure, and a command-specific result. [`run`] writes the
//! report and the requested artifacts and maps the outcome to an exit code:
//! 0 when every check passes, 2 when a check or the solver fails, 1 for
//! usage and IO errors.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use obstacle_well_core::continuation::{
    self, default_eps_schedule, default_lambda_schedule, LimitViReport, SweepFailure, TruncationConsistency, ViReport,
};
use obstacle_well_core::energy::{self, EnergyBreakdown, PenaltyAxiomReport};
use obstacle_well_core::solver::{
    self, GeometryReport, LevelBound, NewtonOutcome, NormBound, SobolevEstimate, SolverError, StructuralBound,
};
use obstacle_well_core::{Field, GridSpec, NonlinearitySpec, ProblemSpec, SolverConfig, SweepReport};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, Format, RunConfig};
use crate::formats::{self, FormatError};
use crate::heatmap::{Heatmap, HeatmapError};
use crate::manifest::{ArtifactLog, Manifest};

pub const THREADS_ENV: &str = "OBSTACLE_WELL_THREADS";

/// Samples on the sphere in the geometry check.
pub const GEOMETRY_SAMPLES: usize = 50;
/// Random pairs in the penalty-axiom check.
pub const AXIOM_TRIALS: usize = 100;
/// Admissible test functions in the variational-inequality checks.
pub const VI_TRIALS: usize = 200;
/// Largest `μ` in the level-threshold scan.
pub const MU_SCAN_MAX: f64 = 64.0;
/// Power iterations for the `L²` embedding constant.
const EMBEDDING_ITERATIONS: usize = 400;
const TREND_SLACK: f64 = 0.05;
/// Extra seeds re-solved to compare levels.
pub const EXTRA_SEEDS: u64 = 2;
/// Relative level spread across seeds above which `solve` adds a note.
pub const SEED_SPREAD_NOTE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    SweepEps,
    SweepLambda,
    Verify,
    Geometry,
    EstimateSobolev,
    Axioms,
    Heatmap,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::SweepEps => "sweep-eps",
            Command::SweepLambda => "sweep-lambda",
            Command::Verify => "verify",
            Command::Geometry => "geometry",
            Command::EstimateSobolev => "estimate-sobolev",
            Command::Axioms => "axioms",
            Command::Heatmap => "heatmap",
        }
    }

    fn file_stem(self) -> String {
        self.name().replace('-', "_")
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub slice: Option<usize>,
    /// Field dump rendered by `heatmap`.
    pub input: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Heatmap(#[from] HeatmapError),
    #[error("cannot create {path}: {source}")]
    OutputDir { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
}

fn check(name: &str, passed: bool, value: f64, limit: f64) -> Check {
    // JSON has no infinities; clamp so reports round-trip.
    let clamp = |x: f64| if x.is_nan() { 0.0 } else { x.clamp(-f64::MAX, f64::MAX) };
    Check { name: name.to_string(), passed, value: clamp(value), limit: clamp(limit) }
}

/// A failed solve or sweep, embedded in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: String,
    pub message: String,
    pub at_parameter: Option<f64>,
    pub partial: Option<SweepReport>,
}

impl Failure {
    fn solver(e: &SolverError) -> Self {
        Self { kind: "solver".into(), message: e.to_string(), at_parameter: None, partial: None }
    }

    fn sweep(f: &SweepFailure) -> Self {
        Self {
            kind: "sweep".into(),
            message: f.error.to_string(),
            at_parameter: f.param_value.is_finite().then_some(f.param_value),
            partial: Some(f.partial.clone()),
        }
    }

    fn other(kind: &str, message: String) -> Self {
        Self { kind: kind.into(), message, at_parameter: None, partial: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub command: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Observations that do not fail the run.
    pub notes: Vec<String>,
    pub failure: Option<Failure>,
    pub result: Option<T>,
}

impl<T> Report<T> {
    fn new(command: Command) -> Self {
        Self {
            command: command.name().into(),
            passed: true,
            checks: Vec::new(),
            notes: Vec::new(),
            failure: None,
            result: None,
        }
    }

    fn push(&mut self, c: Check) {
        self.passed &= c.passed;
        self.checks.push(c);
    }

    fn fail(&mut self, failure: Failure) {
        self.passed = false;
        self.failure = Some(failure);
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            2
        }
    }
}

/// Worker threads for independent jobs: the machine's parallelism, capped
/// by `OBSTACLE_WELL_THREADS`.
pub fn worker_count() -> usize {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var(THREADS_ENV).ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        Some(cap) if cap > 0 => available.min(cap),
        _ => available,
    }
}

/// Maps `f` over `items` on up to [`worker_count`] threads, keeping order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = worker_count().min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("no worker panics while holding a slot") = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("unpoisoned").expect("every slot is filled")).collect()
}

/// A validated configuration with everything derived from it.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub problem: ProblemSpec,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl Context {
    pub fn new(config: RunConfig, seed: Option<u64>) -> Result<Self, ConfigError> {
        config.validate()?;
        let problem = config.problem()?;
        let mut solver = config.solver_config();
        if let Some(seed) = seed {
            solver.rng_seed = seed;
        }
        Ok(Self { seed: solver.rng_seed, config, problem, solver })
    }

    pub fn eps_schedule(&self) -> Vec<f64> {
        default_eps_schedule(self.config.sweep.eps0, self.config.sweep.eps_steps)
    }

    pub fn lambda_schedule(&self) -> Vec<f64> {
        default_lambda_schedule(self.config.sweep.lambda_base, self.config.sweep.lambda_steps)
    }
}

/// Largest `x_{k+1}/x_k` over the last `window` entries; `0/0` counts as 0.
fn worst_ratio(values: &[f64], window: usize) -> f64 {
    let start = values.len().saturating_sub(window);
    values[start..]
        .windows(2)
        .map(|w| {
            if w[1] == 0.0 {
                0.0
            } else if w[0] == 0.0 {
                f64::INFINITY
            } else {
                w[1] / w[0]
            }
        })
        .fold(0.0, f64::max)
}

fn trend_check(name: &str, values: &[f64], window: usize) -> Check {
    let worst = worst_ratio(values, window);
    check(name, worst <= 1.0 + TREND_SLACK, worst, 1.0 + TREND_SLACK)
}

/// `L²` embedding constant `sup |u|₂/‖u‖_λ` of the problem.
pub fn l2_embedding(ps: &ProblemSpec) -> f64 {
    solver::embedding_constant(ps, 2.0, EMBEDDING_ITERATIONS).constant
}

// --- solve ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub level: f64,
    pub residual_norm: f64,
    pub refined: bool,
    pub iterations: usize,
    pub path_max_history: Vec<f64>,
    pub gradient_history: Vec<f64>,
    pub newton: NewtonOutcome,
    pub energy: EnergyBreakdown,
    pub min: f64,
    pub max: f64,
    pub norm_bound: NormBound,
    pub structural_bound: StructuralBound,
    /// `(seed, level)` of every seeded solve that converged, the main one first.
    pub seed_levels: Vec<(u64, f64)>,
    /// `(max − min)/max` over `seed_levels`.
    pub seed_spread: f64,
}

pub fn solve(ctx: &Context) -> (Report<SolveResult>, Option<Field>) {
    let mut report = Report::new(Command::Solve);
    let ps = &ctx.problem;
    let seeds: Vec<u64> = (0..=EXTRA_SEEDS).map(|k| ctx.seed.wrapping_add(k)).collect();
    let mut runs = par_map(&seeds, |&seed| solver::mountain_pass(ps, &SolverConfig { rng_seed: seed, ..ctx.solver }));
    let others: Vec<(u64, f64)> =
        seeds[1..].iter().zip(&runs[1..]).filter_map(|(s, r)| Some((*s, r.as_ref().ok()?.level))).collect();
    let result = match runs.swap_remove(0) {
        Ok(r) => r,
        Err(e) => {
            report.fail(Failure::solver(&e));
            return (report, None);
        }
    };
    let mut seed_levels = vec![(ctx.seed, result.level)];
    seed_levels.extend(others);
    let hi = seed_levels.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let lo = seed_levels.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let seed_spread = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
    if seed_spread > SEED_SPREAD_NOTE {
        report.notes.push(format!("levels differ by {:.2}% across seeds {seed_levels:?}", 100.0 * seed_spread));
    }
    if seed_levels.len() < seeds.len() {
        report.notes.push(format!(
            "{} of {} extra seeds did not converge",
            seeds.len() - seed_levels.len(),
            EXTRA_SEEDS
        ));
    }
    let energy = match energy::energy(&result.u, ps) {
        Ok(e) => e,
        Err(e) => {
            report.fail(Failure::other("energy", e.to_string()));
            return (report, None);
        }
    };
    let c_e = l2_embedding(ps);
    let u = result.u;
    let (min, max) = (u.min(), u.max());
    let norm_bound = solver::norm_bound(&u, result.level, ps, c_e);
    let structural_bound = solver::structural_bound(&u, result.level, ps, c_e);
    report.push(check("residual", result.refined, result.residual_norm, ctx.solver.grad_tol));
    report.push(check("level_positive", result.level > 0.0, result.level, 0.0));
    let sign = if max > 0.0 { min / max } else { -1.0 };
    report.push(check("nonnegative", sign >= -1e-8, sign, -1e-8));
    report.push(check("norm_bound", norm_bound.holds, norm_bound.norm_sq, norm_bound.bound));
    report.result = Some(SolveResult {
        level: result.level,
        residual_norm: result.residual_norm,
        refined: result.refined,
        iterations: result.iterations,
        path_max_history: result.path_max_history,
        gradient_history: result.gradient_history,
        newton: result.newton,
        energy,
        min,
        max,
        norm_bound,
        structural_bound,
        seed_levels,
        seed_spread,
    });
    (report, Some(u))
}

// --- sweep-eps -------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsSweepResult {
    pub schedule: Vec<f64>,
    pub report: SweepReport,
    pub cold_restarts: Vec<usize>,
    pub iterations: Vec<usize>,
    pub warm_start_distances: Vec<f64>,
    pub norm_bounds: Vec<NormBound>,
    pub vi: ViReport,
    pub truncation: TruncationConsistency,
}

pub fn sweep_eps(ctx: &Context) -> (Report<EpsSweepResult>, Vec<Field>) {
    let mut report = Report::new(Command::SweepEps);
    let ps = &ctx.problem;
    let schedule = ctx.eps_schedule();
    let sweep = match continuation::epsilon_sweep(ps, &schedule, &ctx.solver) {
        Ok(s) => s,
        Err(f) => {
            report.fail(Failure::sweep(&f));
            return (report, Vec::new());
        }
    };
    let c_e = l2_embedding(ps);
    let norm_bounds: Vec<NormBound> = sweep
        .solutions
        .iter()
        .zip(&schedule)
        .map(|(s, &eps)| solver::norm_bound(&s.u, s.level, &ps.with_eps(eps).expect("validated schedule"), c_e))
        .collect();
    let fine = ps.with_eps(*schedule.last().expect("validated schedule")).expect("validated schedule");
    let vi = match continuation::vi_verify(sweep.candidate(), &fine, VI_TRIALS, ctx.seed) {
        Ok(v) => v,
        Err(e) => {
            report.fail(Failure::other("vi", e.to_string()));
            return (report, Vec::new());
        }
    };
    let steps = &sweep.report.steps;
    let violations: Vec<f64> = steps.iter().map(|s| s.penalty_violation).collect();
    report.push(trend_check("penalty_violation_decreasing", &violations, violations.len()));
    let gap = steps.last().expect("nonempty").constraint_gap;
    let gap_limit = -1e-4 * ps.obstacle_plus().max();
    report.push(check("final_constraint_gap", gap >= gap_limit, gap, gap_limit));
    report.push(check("vi_violation", vi.relative_violation() >= -1e-6, vi.relative_violation(), -1e-6));
    let broken = norm_bounds.iter().filter(|b| !b.holds).count();
    report.push(check("norm_bounds", broken == 0, broken as f64, 0.0));
    for &k in &sweep.cold_restarts {
        report.notes.push(format!("warm start at eps = {} did not converge; cold path run used", schedule[k]));
    }
    let fields: Vec<Field> = sweep.solutions.iter().map(|s| s.u.clone()).collect();
    report.result = Some(EpsSweepResult {
        warm_start_distances: continuation::warm_start_distances(&sweep, ps),
        iterations: sweep.solutions.iter().map(|s| s.iterations).collect(),
        truncation: continuation::truncation_consistency(sweep.candidate(), &fine),
        schedule,
        report: sweep.report,
        cold_restarts: sweep.cold_restarts,
        norm_bounds,
        vi,
    });
    (report, fields)
}

// --- sweep-lambda ----------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweepResult {
    pub lambdas: Vec<f64>,
    pub eps_schedule: Vec<f64>,
    pub report: SweepReport,
    pub lambda_star: Option<f64>,
    pub truncation: Vec<TruncationConsistency>,
    pub moser_spread: f64,
    pub outside_mass_ratio: f64,
    pub limit_vi: LimitViReport,
    pub norm_bound_violations: usize,
    pub cold_restarts: usize,
}

pub fn sweep_lambda(ctx: &Context) -> (Report<LambdaSweepResult>, Vec<Field>) {
    let mut report = Report::new(Command::SweepLambda);
    let lambdas = ctx.lambda_schedule();
    let eps_schedule = ctx.eps_schedule();
    let sweep = match continuation::lambda_sweep(&ctx.problem, &lambdas, &eps_schedule, &ctx.solver) {
        Ok(s) => s,
        Err(f) => {
            report.fail(Failure::sweep(&f));
            return (report, Vec::new());
        }
    };
    let eps_last = *eps_schedule.last().expect("validated schedule");
    let finals: Vec<ProblemSpec> = lambdas
        .iter()
        .map(|&l| ctx.problem.with_lambda(l).and_then(|p| p.with_eps(eps_last)).expect("validated schedule"))
        .collect();
    let fields: Vec<Field> = sweep.eps_sweeps.iter().map(|s| s.candidate().clone()).collect();
    let truncation: Vec<TruncationConsistency> =
        fields.iter().zip(&finals).map(|(u, ps)| continuation::truncation_consistency(u, ps)).collect();
    let mut norm_bound_violations = 0;
    for (es, &lam) in sweep.eps_sweeps.iter().zip(&lambdas) {
        let ps_l = ctx.problem.with_lambda(lam).expect("validated schedule");
        let c_e = l2_embedding(&ps_l);
        for (s, &eps) in es.solutions.iter().zip(&eps_schedule) {
            let ps = ps_l.with_eps(eps).expect("validated schedule");
            norm_bound_violations += usize::from(!solver::norm_bound(&s.u, s.level, &ps, c_e).holds);
        }
    }
    let top = finals.last().expect("nonempty");
    let limit_vi = match continuation::limit_vi_verify(sweep.candidate(), top, VI_TRIALS, ctx.seed) {
        Ok(v) => v,
        Err(e) => {
            report.fail(Failure::other("limit_vi", e.to_string()));
            return (report, fields);
        }
    };
    let steps = &sweep.report.steps;
    let window = (steps.len() / 2).max(2);
    let lam_vu2: Vec<f64> = steps.iter().map(|s| s.lam_vu2).collect();
    let outside: Vec<f64> = steps.iter().map(|s| s.outside_mass).collect();
    report.push(trend_check("lam_vu2_decreasing", &lam_vu2, window));
    report.push(trend_check("outside_mass_decreasing", &outside, window));
    let outside_mass_ratio = outside.last().expect("nonempty") / outside[0];
    report.push(check("outside_mass_decay", outside_mass_ratio <= 0.1, outside_mass_ratio, 0.1));
    let star = sweep.lambda_star;
    report.push(check(
        "lambda_star_exists",
        star.is_some(),
        star.unwrap_or(f64::NAN),
        *lambdas.last().expect("nonempty"),
    ));
    let active_after_star = match star {
        Some(s) => {
            lambdas.iter().zip(&truncation).filter(|(l, t)| **l >= s && !(t.ok && t.truncation_inactive)).count()
        }
        None => lambdas.len(),
    };
    report.push(check("truncation_inactive_after_lambda_star", active_after_star == 0, active_after_star as f64, 0.0));
    let ratios: Vec<f64> = truncation.iter().map(|t| t.moser_ratio).collect();
    let moser_spread = continuation::moser_spread(&ratios);
    report.push(check("moser_ratio_bounded", moser_spread <= 50.0, moser_spread, 50.0));
    let rel = limit_vi.vi.relative_violation();
    report.push(check("limit_vi_violation", rel >= -1e-5, rel, -1e-5));
    report.push(check("limit_energy_mismatch", limit_vi.energy_mismatch() <= 0.1, limit_vi.energy_mismatch(), 0.1));
    report.push(check("norm_bounds", norm_bound_violations == 0, norm_bound_violations as f64, 0.0));
    let cold_restarts = sweep.eps_sweeps.iter().map(|s| s.cold_restarts.len()).sum();
    if cold_restarts > 0 {
        report.notes.push(format!("{cold_restarts} warm starts fell back to a cold path run"));
    }
    report.result = Some(LambdaSweepResult {
        lambdas,
        eps_schedule,
        report: sweep.report,
        lambda_star: star,
        truncation,
        moser_spread,
        outside_mass_ratio,
        limit_vi,
        norm_bound_violations,
        cold_restarts,
    });
    (report, fields)
}

// --- geometry / axioms -------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryResult {
    pub report: GeometryReport,
    pub endpoint_scale: f64,
}

pub fn geometry(ctx: &Context) -> Report<GeometryResult> {
    let mut report = Report::new(Command::Geometry);
    let ps = &ctx.problem;
    let result = solver::geometry_check(ps, GEOMETRY_SAMPLES, ctx.seed)
        .and_then(|g| solver::find_endpoint_e(ps).map(|e| (g, e.t_star)));
    match result {
        Ok((g, t_star)) => {
            report.push(check("sphere_minimum", g.min_i_on_sphere >= g.rho, g.min_i_on_sphere, g.rho));
            report.push(check("obstacle_below_rho", g.obstacle_energy < g.rho, g.obstacle_energy, g.rho));
            report.push(check("endpoint_negative", g.endpoint_energy < 0.0, g.endpoint_energy, 0.0));
            report.push(check("radius_separates", g.holds(), g.r, g.endpoint_norm));
            report.result = Some(GeometryResult { report: g, endpoint_scale: t_star });
        }
        Err(e) => report.fail(Failure::solver(&e)),
    }
    report
}

pub fn axioms(ctx: &Context) -> Report<PenaltyAxiomReport> {
    let mut report = Report::new(Command::Axioms);
    match energy::penalty_axioms_check(&ctx.problem, AXIOM_TRIALS, ctx.seed) {
        Ok(a) => {
            report.push(check("continuity", a.continuity_max_ratio <= 1.0 + 1e-9, a.continuity_max_ratio, 1.0 + 1e-9));
            report.push(check(
                "monotonicity",
                a.monotonicity_min_relative >= -1e-12,
                a.monotonicity_min_relative,
                -1e-12,
            ));
            report.push(check("kernel", a.kernel_forward_ok && a.kernel_converse_ok, 0.0, 0.0));
            report.push(check(
                "boundedness",
                a.boundedness_sup.is_finite() && a.boundedness_sup <= a.boundedness_bound,
                a.boundedness_sup,
                a.boundedness_bound,
            ));
            report.passed &= a.passed;
            report.result = Some(a);
        }
        Err(v) => report.fail(Failure::other("axiom", v.to_string())),
    }
    report
}

// --- verify ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyResult {
    pub geometry: Report<GeometryResult>,
    pub axioms: Report<PenaltyAxiomReport>,
    pub sweep: Report<EpsSweepResult>,
}

/// Geometry, penalty axioms and the ε-sweep with its inequality checks, run
/// as independent jobs.
pub fn verify(ctx: &Context) -> (Report<VerifyResult>, Option<Field>) {
    enum Job {
        Geometry,
        Axioms,
        Sweep,
    }
    enum Done {
        Geometry(Report<GeometryResult>),
        Axioms(Report<PenaltyAxiomReport>),
        Sweep(Box<(Report<EpsSweepResult>, Vec<Field>)>),
    }
    let done = par_map(&[Job::Sweep, Job::Geometry, Job::Axioms], |job| match job {
        Job::Geometry => Done::Geometry(geometry(ctx)),
        Job::Axioms => Done::Axioms(axioms(ctx)),
        Job::Sweep => Done::Sweep(Box::new(sweep_eps(ctx))),
    });
    let mut report = Report::new(Command::Verify);
    let (mut g, mut a, mut s, mut field) = (None, None, None, None);
    for d in done {
        match d {
            Done::Geometry(r) => g = Some(r),
            Done::Axioms(r) => a = Some(r),
            Done::Sweep(b) => {
                let (r, mut fields) = *b;
                field = fields.pop();
                s = Some(r);
            }
        }
    }
    let (g, a, s) = (g.expect("geometry job"), a.expect("axiom job"), s.expect("sweep job"));
    for (prefix, checks, passed) in
        [("geometry", &g.checks, g.passed), ("axioms", &a.checks, a.passed), ("sweep", &s.checks, s.passed)]
    {
        for c in checks {
            report.push(Check { name: format!("{prefix}.{}", c.name), ..c.clone() });
        }
        report.passed &= passed;
    }
    if let Some(r) = &s.result {
        let t = r.truncation;
        report.push(check(
            "truncation_consistent",
            !t.ok || t.truncation_inactive,
            t.sup_outside,
            t.sup_outside.max(0.0),
        ));
    }
    if let Some(f) = g.failure.clone().or(a.failure.clone()).or(s.failure.clone()) {
        report.fail(f);
    }
    report.result = Some(VerifyResult { geometry: g, axioms: a, sweep: s });
    (report, field)
}

// --- estimate-sobolev ----------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub mu: f64,
    pub bound: LevelBound,
    /// `threshold − bound`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevResult {
    pub estimate: SobolevEstimate,
    pub coarse_nodes: usize,
    pub coarse: SobolevEstimate,
    pub relative_difference: f64,
    /// `((q − 2)/2q) S^{N/2}`, when the nonlinearity is a power.
    pub threshold: Option<f64>,
    pub scan: Vec<ScanEntry>,
    pub mu_star: Option<f64>,
}

/// Grid with the same box and about half the nodes per axis.
pub fn coarse_grid(grid: &GridSpec) -> Result<GridSpec, ConfigError> {
    let n = grid.nodes_per_axis();
    Ok(GridSpec::new(grid.dimension(), n / 2 + 1, grid.half_extent())?)
}

/// Smallest scanned `μ` from which every larger scanned `μ` has its level
/// bound below the threshold.
pub fn mu_star(scan: &[ScanEntry]) -> Option<f64> {
    let mut star = None;
    for e in scan.iter().rev() {
        if e.bound.below_ceiling {
            star = Some(e.mu);
        } else {
            break;
        }
    }
    star
}

pub fn estimate_sobolev(ctx: &Context) -> Result<Report<SobolevResult>, RunError> {
    let grid = *ctx.problem.grid();
    if grid.dimension() != 3 {
        return Err(RunError::Usage("estimate-sobolev needs a 3-dimensional grid".into()));
    }
    let mut report = Report::new(Command::EstimateSobolev);
    let coarse_grid = coarse_grid(&grid)?;
    let pair = par_map(&[grid, coarse_grid], |g| solver::sobolev_estimate(*g));
    let (estimate, coarse) = match (&pair[0], &pair[1]) {
        (Ok(f), Ok(c)) => (*f, *c),
        (Err(e), _) | (_, Err(e)) => {
            report.fail(Failure::solver(e));
            return Ok(report);
        }
    };
    let relative_difference = (estimate.value - coarse.value).abs() / estimate.value;
    report.push(check("grid_consistency", relative_difference <= 0.05, relative_difference, 0.05));
    let mut result = SobolevResult {
        estimate,
        coarse_nodes: coarse_grid.nodes_per_axis(),
        coarse,
        relative_difference,
        threshold: None,
        scan: Vec::new(),
        mu_star: None,
    };
    if let NonlinearitySpec::PowerCritical { q, .. } = ctx.config.nonlinearity {
        let n = grid.dimension() as f64;
        let threshold = (q - 2.0) / (2.0 * q) * estimate.value.powf(n / 2.0);
        let mut mus = vec![1.0];
        while *mus.last().expect("nonempty") < MU_SCAN_MAX {
            mus.push(2.0 * mus.last().expect("nonempty"));
        }
        let cfg = SolverConfig { max_outer: ctx.config.sweep.level_scan_iterations, ..ctx.solver };
        let bounds = par_map(&mus, |&mu| {
            let spec = NonlinearitySpec::PowerCritical { mu, q };
            let ps = ctx.problem.with_nonlinearity(spec).map_err(|e| Failure::other("problem", e.to_string()))?;
            solver::level_upper_bound(&ps, &cfg, threshold).map_err(|e| Failure::solver(&e))
        });
        for (mu, b) in mus.iter().zip(bounds) {
            match b {
                Ok(bound) => result.scan.push(ScanEntry { mu: *mu, margin: threshold - bound.bound, bound }),
                Err(f) => {
                    report.fail(Failure { at_parameter: Some(*mu), ..f });
                    break;
                }
            }
        }
        result.threshold = Some(threshold);
        result.mu_star = mu_star(&result.scan);
        report.push(check("mu_star_found", result.mu_star.is_some(), result.mu_star.unwrap_or(f64::NAN), MU_SCAN_MAX));
        let margin = result
            .scan
            .iter()
            .filter(|e| result.mu_star.is_some_and(|s| e.mu >= s))
            .map(|e| e.margin)
            .fold(f64::INFINITY, f64::min);
        report.push(check("margin_positive", result.mu_star.is_some() && margin > 0.0, margin, 0.0));
    }
    report.result = Some(result);
    Ok(report)
}

// --- artifacts ---------------------------------------------------------------

fn dump_field(log: &mut ArtifactLog, stem: &str, u: &Field, formats_: &[Format]) -> Result<(), FormatError> {
    if formats_.contains(&Format::Csv) {
        let p = log.path(&format!("{stem}.csv"));
        formats::write_field_csv(&p, u)?;
        log.record(&p)?;
    }
    if formats_.contains(&Format::Raw) {
        let p = log.path(&format!("{stem}.raw"));
        let side = formats::write_field_raw(&p, u)?;
        log.record(&p)?;
        log.record(&side)?;
    }
    Ok(())
}

fn write_report<T: Serialize>(log: &mut ArtifactLog, cmd: Command, report: &Report<T>) -> Result<PathBuf, FormatError> {
    let p = log.path(&format!("{}.json", cmd.file_stem()));
    formats::write_json(&p, report)?;
    log.record(&p)?;
    Ok(p)
}

fn write_sweep(log: &mut ArtifactLog, stem: &str, sweep: &SweepReport, formats_: &[Format]) -> Result<(), FormatError> {
    if formats_.contains(&Format::Csv) {
        let p = log.path(&format!("{stem}.csv"));
        formats::write_sweep_csv(&p, sweep)?;
        log.record(&p)?;
    }
    if formats_.contains(&Format::Json) {
        let p = log.path(&format!("{stem}.json"));
        formats::write_json(&p, sweep)?;
        log.record(&p)?;
    }
    Ok(())
}

/// What [`run`] produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub report_path: PathBuf,
    pub manifest: Manifest,
    pub summary: String,
}

fn summarize<T>(report: &Report<T>) -> String {
    let mut s = format!("{}: {}", report.command, if report.passed { "ok" } else { "FAILED" });
    for c in report.checks.iter().filter(|c| !c.passed) {
        s.push_str(&format!("\n  check {} failed: {} vs limit {}", c.name, c.value, c.limit));
    }
    if let Some(f) = &report.failure {
        s.push_str(&format!("\n  {} failure: {}", f.kind, f.message));
    }
    s
}

/// Loads the configuration, runs `cmd` and writes its artifacts.
pub fn run(cmd: Command, opts: &Options) -> Result<Outcome, RunError> {
    let (config, text) = RunConfig::load(&opts.config)?;
    let ctx = Context::new(config, opts.seed)?;
    if opts.slice.is_some() && cmd != Command::Heatmap {
        return Err(RunError::Usage("--slice only applies to heatmap".into()));
    }
    if opts.input.is_some() && cmd != Command::Heatmap {
        return Err(RunError::Usage("--input only applies to heatmap".into()));
    }
    let out = opts.out.clone().unwrap_or_else(|| ctx.config.output.dir.clone());
    std::fs::create_dir_all(&out).map_err(|source| RunError::OutputDir { path: out.clone(), source })?;
    let mut log = ArtifactLog::new(&out);
    let fmts = ctx.config.output.formats.clone();
    let dump = ctx.config.output.dump_fields;
    let (report_path, exit_code, summary) = match cmd {
        Command::Solve => {
            let (report, u) = solve(&ctx);
            if let (true, Some(u)) = (dump, &u) {
                dump_field(&mut log, "solution", u, &fmts)?;
            }
            (write_report(&mut log, cmd, &report)?, report.exit_code(), summarize(&report))
        }
        Command::SweepEps => {
            let (report, fields) = sweep_eps(&ctx);
            if let Some(r) =
                report.result.as_ref().map(|r| &r.report).or(report.failure.as_ref().and_then(|f| f.partial.as_ref()))
            {
                write_sweep(&mut log, "sweep_eps_steps", r, &fmts)?;
            }
            if dump {
                for (k, u) in fields.iter().enumerate() {
                    dump_field(&mut log, &format!("eps_step_{k}"), u, &fmts)?;
                }
            }
            (write_report(&mut log, cmd, &report)?, report.exit_code(), summarize(&report))
        }
        Command::SweepLambda => {
            let (report, fields) = sweep_lambda(&ctx);
            if let Some(r) =
                report.result.as_ref().map(|r| &r.report).or(report.failure.as_ref().and_then(|f| f.partial.as_ref()))
            {
                write_sweep(&mut log, "sweep_lambda_steps", r, &fmts)?;
            }
            if dump {
                for (k, u) in fields.iter().enumerate() {
                    dump_field(&mut log, &format!("lambda_step_{k}"), u, &fmts)?;
                }
            }
            (write_report(&mut log, cmd, &report)?, report.exit_code(), summarize(&report))
        }
        Command::Verify => {
            let (report, u) = verify(&ctx);
            if let (true, Some(u)) = (dump, &u) {
                dump_field(&mut log, "candidate", u, &fmts)?;
            }
            (write_report(&mut log, cmd, &report)?, report.exit_code(), summarize(&report))
        }
        Command::Geometry => {
            let report = geometry(&ctx);
            (write_report(&mut log, cmd, &report)?, report.exit_code(), summarize(&report))
        }
        Command::EstimateSobolev => {
            let report = estimate_sobolev(&ctx)?;
            (write_report(&mut log, cmd, &report)?, report.exit_code(), summarize(&report))
        }
        Command::Axioms => {
            let report = axioms(&ctx);
            (write_report(&mut log, cmd, &report)?, report.exit_code(), summarize(&report))
        }
        Command::Heatmap => {
            let input =
                opts.input.as_deref().ok_or_else(|| RunError::Usage("heatmap needs --input <field dump>".into()))?;
            let path = heatmap(&ctx, input, opts.slice, &mut log)?;
            (path, 0, "heatmap: ok".to_string())
        }
    };
    let manifest = log.finish(cmd.name(), &text, ctx.seed, exit_code)?;
    Ok(Outcome { exit_code, report_path, manifest, summary })
}

fn heatmap(ctx: &Context, input: &Path, slice: Option<usize>, log: &mut ArtifactLog) -> Result<PathBuf, RunError> {
    let u = formats::read_field(input)?;
    let rings = [ctx.config.potential.well_radius, ctx.config.potential.tilde_radius];
    let map = Heatmap::render(&u, slice, rings)?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("field");
    let name = match slice {
        Some(k) => format!("{stem}_slice{k}.pgm"),
        None => format!("{stem}.pgm"),
    };
    let p = log.path(&name);
    let side = map.write(&p)?;
    log.record(&p)?;
    log.record(&side)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_trends() {
        assert_eq!(worst_ratio(&[4.0, 2.0, 1.0], 3), 0.5);
        assert_eq!(worst_ratio(&[0.0, 0.0, 0.0], 3), 0.0);
        assert_eq!(worst_ratio(&[9.0, 1.0, 1.02], 2), 1.02);
        assert!(worst_ratio(&[0.0, 1.0], 2).is_infinite());
        assert!(trend_check("t", &[1.0, 1.04], 2).passed);
        assert!(!trend_check("t", &[1.0, 1.06], 2).passed);
    }

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<u64> = (0..37).collect();
        assert_eq!(par_map(&items, |x| x * x), items.iter().map(|x| x * x).collect::<Vec<_>>());
    }

    #[test]
    fn checks_serialize_without_infinities() {
        let c = check("c", false, f64::INFINITY, f64::NAN);
        let text = serde_json::to_string(&c).unwrap();
        let back: Check = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn mu_star_needs_a_tail_of_passes() {
        let entry = |mu: f64, below: bool| ScanEntry {
            mu,
            margin: if below { 0.1 } else { -0.1 },
            bound: LevelBound { bound: 1.0, below_ceiling: below, critical_level: None, iterations: 1 },
        };
        assert_eq!(mu_star(&[entry(1.0, false), entry(2.0, true), entry(4.0, true)]), Some(2.0));
        assert_eq!(mu_star(&[entry(1.0, true), entry(2.0, false), entry(4.0, true)]), Some(4.0));
        assert_eq!(mu_star(&[entry(1.0, true), entry(2.0, false)]), None);
    }

    #[test]
    fn coarse_grid_halves_nodes() {
        let g = GridSpec::new(3, 33, 3.0).unwrap();
        assert_eq!(coarse_grid(&g).unwrap().nodes_per_axis(), 17);
    }
}
