//! Seeded random fields for the randomized checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{Field, GridSpec};
use crate::math::exp;

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A Gaussian bump `exp(−|x − c|²/w²)` with random centre inside the ball
/// `B(0, reach)` and width in `[w_min, w_max]`.
pub fn random_bump(grid: GridSpec, rng: &mut SampleRng, reach: f64, w_min: f64, w_max: f64) -> Field {
    let dim = grid.dimension();
    let mut c = [0.0; 3];
    loop {
        for ca in c.iter_mut().take(dim) {
            *ca = rng.random_range(-reach..reach);
        }
        if c.iter().map(|v| v * v).sum::<f64>() <= reach * reach {
            break;
        }
    }
    let w = rng.random_range(w_min..=w_max);
    Field::from_fn(grid, |x| {
        let d2: f64 = (0..dim).map(|a| (x[a] - c[a]) * (x[a] - c[a])).sum();
        exp(-d2 / (w * w))
    })
    .expect("gaussian bumps are finite")
}

/// Sum of `count` bumps with amplitudes in `[-1, 1]` (or `[0, 1]` when
/// `positive`), centred within `reach` of the origin.
pub fn random_smooth(grid: GridSpec, rng: &mut SampleRng, count: usize, reach: f64, positive: bool) -> Field {
    let l = grid.half_extent();
    let mut acc = Field::zeros(grid);
    for _ in 0..count {
        let amp = if positive { rng.random_range(0.0..1.0) } else { rng.random_range(-1.0..1.0) };
        let bump = random_bump(grid, rng, reach, 0.08 * l, 0.35 * l);
        acc = acc.add_scaled(amp, &bump);
    }
    acc
}

/// Independent uniform values in `[-1, 1]` on interior nodes.
pub fn random_noise(grid: GridSpec, rng: &mut SampleRng) -> Field {
    Field::from_fn(grid, |_| rng.random_range(-1.0..1.0)).expect("finite")
}

pub fn uniform(rng: &mut SampleRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
