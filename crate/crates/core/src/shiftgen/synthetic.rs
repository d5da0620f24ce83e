//! Synthetic Gaussian tasks.
//!
//! Features are a concatenation `[x_c, x_a]` of two `d`-dimensional
//! blocks: the core block depends on the label, `x_c | y ~ N(y·1, σ_c² I)`,
//! and the spurious block on the attribute, `x_a | a ~ N(a·1, σ_a² I)`.
//! The availability `r = σ_c²/σ_a²` controls how clean the spurious
//! feature is; the core scale is pinned at `σ_c² = 1`, so `σ_a² = 1/r`.

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{
    solve_group_counts, Provenance, Sample, ShiftDegrees, TaskDataset, GROUP_YA,
};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// Generate a synthetic task.
///
/// The train split realises `s` over `n` samples (exact group counts via
/// [`solve_group_counts`]); the test split is group-balanced with
/// `n_te/4` samples per group. Fully determined by `seed`.
pub fn generate_synthetic_task(
    n: usize,
    d: usize,
    r: f64,
    s: &ShiftDegrees,
    n_te: usize,
    seed: u64,
) -> Result<TaskDataset> {
    if n < 4 || n_te < 4 {
        return Err(Error::DegenerateInput(format!(
            "need n >= 4 and n_te >= 4, got n={n}, n_te={n_te}"
        )));
    }
    if n_te % 4 != 0 {
        return Err(Error::DegenerateInput(format!(
            "balanced test split needs n_te divisible by 4, got {n_te}"
        )));
    }
    if d == 0 {
        return Err(Error::DegenerateInput("block dimension d must be >= 1".into()));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::DegenerateInput(format!(
            "availability must be a positive finite ratio, got {r}"
        )));
    }
    let counts = solve_group_counts(n, s)?;
    let sigma_a = (1.0 / r).sqrt();
    let mut rng = rng_from_seed(seed);

    let mut train = Vec::with_capacity(n);
    for (gi, &(y, a)) in GROUP_YA.iter().enumerate() {
        for _ in 0..counts.g[gi] {
            train.push(draw_sample(&mut rng, d, sigma_a, y, a));
        }
    }
    let per_group = n_te / 4;
    let mut test = Vec::with_capacity(n_te);
    for &(y, a) in &GROUP_YA {
        for _ in 0..per_group {
            test.push(draw_sample(&mut rng, d, sigma_a, y, a));
        }
    }
    Ok(TaskDataset {
        train,
        test,
        provenance: Provenance::Synthetic {
            n,
            d,
            r,
            degrees: *s,
            n_te,
            seed,
        },
    })
}

fn draw_sample(rng: &mut Rng, d: usize, sigma_a: f64, y: i8, a: i8) -> Sample {
    let mut x = Vec::with_capacity(2 * d);
    for _ in 0..d {
        let z: f64 = rng.sample(StandardNormal);
        x.push(y as f64 + z);
    }
    for _ in 0..d {
        let z: f64 = rng.sample(StandardNormal);
        x.push(a as f64 + sigma_a * z);
    }
    Sample { x, y, a }
}
