use obstacle_well_core::domain::{dirichlet_energy, grad_pairing, laplacian_apply, region_mass};
use obstacle_well_core::energy::{energy, penalty_pairing, residual};
use obstacle_well_core::sample;
use obstacle_well_core::solver::sobolev_quotient;
use obstacle_well_core::{Field, GridSpec, NonlinearitySpec, ObstacleSpec, PotentialSpec, ProblemSpec};
use proptest::prelude::*;

fn problem(dim: usize) -> ProblemSpec {
    let (n, l, nl) = if dim == 2 {
        (17, 4.0, NonlinearitySpec::ExpCritical { nu: 4.0, p: 3.0, alpha0: 1.0, theta: 4.0 })
    } else {
        (11, 3.0, NonlinearitySpec::PowerCritical { mu: 2.0, q: 4.0 })
    };
    let grid = GridSpec::new(dim, n, l).unwrap();
    ProblemSpec::new(
        grid,
        PotentialSpec { well_radius: 1.55, scale: 4.0 },
        ObstacleSpec { center: vec![0.0; dim], radius: 0.9, height: 0.3, outside_depth: 0.0 },
        nl,
        2.2,
        8.0,
        0.05,
    )
    .unwrap()
}

fn field(grid: GridSpec, seed: u64, amp: f64) -> Field {
    let mut rng = sample::rng(seed);
    sample::random_smooth(grid, &mut rng, 3, 0.6 * grid.half_extent(), false).scaled(amp)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn laplacian_is_linear(dim in 2usize..=3, s1 in any::<u64>(), s2 in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let grid = *problem(dim).grid();
        let (u, v) = (field(grid, s1, 1.0), field(grid, s2, 1.0));
        let lhs = laplacian_apply(&u.scaled(a).add_scaled(b, &v));
        let rhs = laplacian_apply(&u).scaled(a).add_scaled(b, &laplacian_apply(&v));
        let scale = 1.0 + lhs.max_abs();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn green_identity_is_exact(dim in 2usize..=3, s1 in any::<u64>(), s2 in any::<u64>()) {
        let grid = *problem(dim).grid();
        let (u, v) = (field(grid, s1, 1.0), field(grid, s2, 1.0));
        let lhs = laplacian_apply(&u).dot_weighted(&v);
        prop_assert!(close(lhs, grad_pairing(&u, &v), 1e-12));
        prop_assert!(close(grad_pairing(&u, &v), grad_pairing(&v, &u), 1e-14));
    }

    #[test]
    fn norm_splits_into_quadratic_pieces(dim in 2usize..=3, s in any::<u64>()) {
        let ps = problem(dim);
        let u = field(*ps.grid(), s, 1.0);
        let v = ps.potential().values();
        let w = ps.grid().cell_volume();
        let mass: f64 = u.values().iter().zip(v).map(|(x, p)| w * (1.0 + ps.lam() * p) * x * x).sum();
        prop_assert!(close(ps.norm_lambda_sq(&u), dirichlet_energy(&u) + mass, 1e-12));
        let e = energy(&u, &ps).unwrap();
        prop_assert!(close(e.quadratic, 0.5 * ps.norm_lambda_sq(&u), 1e-12));
    }

    #[test]
    fn region_masses_add_up_on_interior_edges(dim in 2usize..=3, s in any::<u64>(), r in 0.5..2.5f64) {
        let ps = problem(dim);
        let u = field(*ps.grid(), s, 1.0);
        let g = *ps.grid();
        let inner = region_mass(&u, |i| g.radius(i) <= r);
        let outer = region_mass(&u, |i| g.radius(i) > r);
        let all = region_mass(&u, |_| true);
        prop_assert!(close(inner.mass + outer.mass, all.mass, 1e-12));
        prop_assert!(inner.gradient + outer.gradient <= all.gradient * (1.0 + 1e-12));
        prop_assert!(close(all.gradient, dirichlet_energy(&u), 1e-12));
    }

    #[test]
    fn penalty_is_monotone(dim in 2usize..=3, s1 in any::<u64>(), s2 in any::<u64>()) {
        let ps = problem(dim);
        let g = *ps.grid();
        let (u, v) = (field(g, s1, 0.5), field(g, s2, 0.5));
        let d = u.add_scaled(-1.0, &v);
        let m = penalty_pairing(&u, &d, &ps) - penalty_pairing(&v, &d, &ps);
        let scale = ps.obstacle_l2_on_omega() * (d.dot_weighted(&d)).sqrt();
        prop_assert!(m >= -1e-12 * (1.0 + scale));
    }

    #[test]
    fn penalty_vanishes_on_the_constraint_set(dim in 2usize..=3, s in any::<u64>()) {
        let ps = problem(dim);
        let g = *ps.grid();
        let bump = field(g, s, 1.0).positive_part();
        let u = ps.obstacle().positive_part().add_scaled(1.0, &bump);
        let v = field(g, s ^ 0x5a5a, 1.0);
        prop_assert_eq!(penalty_pairing(&u, &v, &ps), 0.0);
    }

    #[test]
    fn residual_is_the_energy_gradient(dim in 2usize..=3, s1 in any::<u64>(), s2 in any::<u64>()) {
        let ps = problem(dim);
        let g = *ps.grid();
        let u = field(g, s1, 0.4);
        let v = field(g, s2, 1.0);
        let delta = 1e-5;
        let crosses = (0..v.values().len()).any(|i| {
            ps.omega().contains(i) && (u.values()[i] - ps.obstacle().values()[i]).abs() <= delta * v.values()[i].abs()
        });
        prop_assume!(!crosses);
        let ip = energy(&u.add_scaled(delta, &v), &ps).unwrap().total;
        let im = energy(&u.add_scaled(-delta, &v), &ps).unwrap().total;
        let fd = (ip - im) / (2.0 * delta);
        let an = residual(&u, &ps).unwrap().dot_weighted(&v);
        prop_assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "fd {} an {}", fd, an);
    }

    #[test]
    fn sobolev_quotient_ignores_scale_and_sign(s in any::<u64>(), c in 0.01..100.0f64) {
        let grid = *problem(3).grid();
        let u = field(grid, s, 1.0);
        prop_assume!(u.max_abs() > 1e-3);
        let q = sobolev_quotient(&u);
        prop_assert!(close(sobolev_quotient(&u.scaled(c)), q, 1e-10));
        prop_assert!(close(sobolev_quotient(&u.scaled(-1.0)), q, 1e-12));
    }
}
