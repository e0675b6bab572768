//! Helpers shared by the integration tests: an independent
//! central-difference oracle and small seeded inputs.

#![allow(dead_code)]

use avstyle::signal_io::ImageBuffer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-6;
pub const REL_TOL: f64 = 1e-4;

/// Largest `|analytic − numeric| / max(|analytic|, |numeric|, 1e-6)` over
/// `probes` distinct random coordinates.
pub fn max_fd_error(x: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64, probes: usize, seed: u64) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..x.len()).collect();
    for i in (1..idx.len()).rev() {
        idx.swap(i, rng.random_range(0..=i));
    }
    let mut xp = x.to_vec();
    let mut worst: f64 = 0.0;
    for &i in idx.iter().take(probes) {
        xp[i] = x[i] + STEP;
        let fp = f(&xp);
        xp[i] = x[i] - STEP;
        let fm = f(&xp);
        xp[i] = x[i];
        let num = (fp - fm) / (2.0 * STEP);
        let err = (analytic[i] - num).abs() / analytic[i].abs().max(num.abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut impl Rng, h: usize, w: usize) -> ImageBuffer {
    ImageBuffer::new(h, w, (0..h * w * 3).map(|_| rng.random_range(0.05..0.95)).collect()).unwrap()
}

pub fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}
