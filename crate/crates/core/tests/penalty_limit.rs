//! Penalty limit `ε → 0` with an obstacle that the solution actually touches.

use obstacle_well_core::continuation::{default_eps_schedule, epsilon_sweep, vi_verify};
use obstacle_well_core::solver::{sobolev_estimate, SolverConfig};
use obstacle_well_core::{GridSpec, NonlinearitySpec, ObstacleSpec, PotentialSpec, ProblemSpec};

fn contact_problem() -> ProblemSpec {
    let grid = GridSpec::new(2, 65, 4.0).unwrap();
    ProblemSpec::new(
        grid,
        PotentialSpec { well_radius: 1.5, scale: 1.0 },
        ObstacleSpec { center: vec![1.25, 0.0], radius: 0.22, height: 0.22, outside_depth: 0.0 },
        NonlinearitySpec::ExpCritical { nu: 4.0, p: 3.0, alpha0: 1.0, theta: 4.0 },
        2.5,
        16.0,
        0.1,
    )
    .unwrap()
}

#[test]
fn penetration_shrinks_linearly_with_eps() {
    let ps = contact_problem();
    let schedule = default_eps_schedule(0.1, 9);
    let sweep = epsilon_sweep(&ps, &schedule, &SolverConfig::default()).unwrap();
    let steps = &sweep.report.steps;
    assert!(steps.iter().all(|s| s.level > 0.0));
    // The obstacle is active: u dips below φ at every ε.
    assert!(steps.iter().all(|s| s.constraint_gap < 0.0 && s.penalty_violation > 0.0));
    for w in steps.windows(2) {
        assert!(w[1].penalty_violation < w[0].penalty_violation, "{w:?}");
    }
    // Penetration depth is O(ε).
    for s in steps {
        let ratio = -s.constraint_gap / s.param_value;
        assert!(ratio < 5.0, "gap/ε = {ratio} at ε = {}", s.param_value);
    }
    let last = steps.last().unwrap();
    let first = &steps[0];
    assert!(last.constraint_gap > 0.05 * first.constraint_gap);

    let fine = ps.with_eps(*schedule.last().unwrap()).unwrap();
    let vi = vi_verify(sweep.candidate(), &fine, 100, 5).unwrap();
    assert!(vi.contact_nodes > 0);
    assert!(vi.relative_violation() >= -1e-3, "{vi:?}");
}

#[test]
fn sobolev_constant_is_stable_under_refinement() {
    let coarse = sobolev_estimate(GridSpec::new(3, 17, 3.0).unwrap()).unwrap();
    let fine = sobolev_estimate(GridSpec::new(3, 33, 3.0).unwrap()).unwrap();
    let rel = (coarse.value - fine.value).abs() / fine.value;
    assert!(rel < 0.05, "S = {} on 17³ vs {} on 33³", coarse.value, fine.value);
    assert!(fine.value > 0.0);
}
