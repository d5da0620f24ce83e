//! Shift quantification and task construction.
//!
//! A binary-classification dataset with a binary attribute splits into
//! four groups. Their relative sizes carry three interpretable degrees
//! of distribution shift, each a fraction in `[0, 1]` where `0.5` means
//! "no shift":
//!
//! - `d_sc` — spurious correlation: fraction of samples whose label and
//!   attribute agree,
//! - `d_ls` — label shift: fraction of samples with positive label,
//! - `d_cs` — covariate shift: fraction of samples with positive
//!   attribute.
//!
//! The mapping between group counts and degrees is linear and invertible
//! ([`quantify_shifts`] / [`solve_group_counts`]), so tasks realising any
//! feasible shift profile can be constructed exactly — synthetically
//! from Gaussians ([`generate_synthetic_task`]) or by resampling an
//! annotated pool ([`build_task_from_pool`]).

mod degrees;
mod pool;
mod synthetic;

pub use degrees::{
    is_feasible, quantify_shifts, sample_degrees, single_shift_settings, solve_group_counts,
    DegreeMode,
};
pub use pool::{build_task_from_pool, GroupedPool};
pub use synthetic::generate_synthetic_task;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(y, a)` signs of the four groups, in group order G1..G4.
pub const GROUP_YA: [(i8, i8); 4] = [(1, 1), (-1, 1), (1, -1), (-1, -1)];

/// Group index (0..4) of a `(y, a)` pair, following the G1..G4 convention:
/// G1=(+1,+1), G2=(−1,+1), G3=(+1,−1), G4=(−1,−1).
#[inline]
pub fn group_index(y: i8, a: i8) -> usize {
    match (y > 0, a > 0) {
        (true, true) => 0,
        (false, true) => 1,
        (true, false) => 2,
        (false, false) => 3,
    }
}

/// Degrees of the three distribution shifts. `0.5` in a component means
/// that shift is absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftDegrees {
    /// Spurious correlation: fraction of samples with `y == a`.
    pub d_sc: f64,
    /// Label shift: fraction of samples with `y == +1`.
    pub d_ls: f64,
    /// Covariate shift: fraction of samples with `a == +1`.
    pub d_cs: f64,
}

impl ShiftDegrees {
    pub const fn new(d_sc: f64, d_ls: f64, d_cs: f64) -> Self {
        ShiftDegrees { d_sc, d_ls, d_cs }
    }

    /// The no-shift profile.
    pub const BALANCED: ShiftDegrees = ShiftDegrees::new(0.5, 0.5, 0.5);

    /// All components lie in `[0, 1]`.
    pub fn in_unit_cube(&self) -> bool {
        [self.d_sc, self.d_ls, self.d_cs]
            .iter()
            .all(|v| (0.0..=1.0).contains(v))
    }

    /// Swapping attribute signs maps `d_sc → 1−d_sc`, `d_cs → 1−d_cs`
    /// and leaves `d_ls` unchanged.
    pub fn attribute_flipped(&self) -> ShiftDegrees {
        ShiftDegrees::new(1.0 - self.d_sc, self.d_ls, 1.0 - self.d_cs)
    }
}

/// Integer sample counts of the four groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCounts {
    /// Counts for G1..G4.
    pub g: [usize; 4],
}

impl GroupCounts {
    pub fn new(g1: usize, g2: usize, g3: usize, g4: usize) -> Self {
        GroupCounts { g: [g1, g2, g3, g4] }
    }

    pub fn total(&self) -> usize {
        self.g.iter().sum()
    }

    /// Counts with attribute signs swapped (G1↔G3, G2↔G4).
    pub fn attribute_flipped(&self) -> GroupCounts {
        GroupCounts {
            g: [self.g[2], self.g[3], self.g[0], self.g[1]],
        }
    }
}

/// One labelled, attributed sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    /// Class label, ±1.
    pub y: i8,
    /// Attribute, ±1.
    pub a: i8,
}

impl Sample {
    pub fn group(&self) -> usize {
        group_index(self.y, self.a)
    }
}

/// Where a task came from, with everything needed to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Synthetic {
        n: usize,
        /// Per-block dimension; features have length `2d`.
        d: usize,
        /// Availability of the spurious feature, `r = σ_c²/σ_a²`.
        r: f64,
        degrees: ShiftDegrees,
        n_te: usize,
        seed: u64,
    },
    Pool {
        pool_id: String,
        degrees: ShiftDegrees,
        n_te: usize,
        seed: u64,
        replace: bool,
    },
}

/// A task: train split realising some shift profile plus a
/// group-balanced test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDataset {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub provenance: Provenance,
}

impl TaskDataset {
    /// Feature-vector length.
    pub fn feature_len(&self) -> usize {
        self.train.first().map_or(0, |s| s.x.len())
    }

    /// Group histogram of the train split.
    pub fn train_histogram(&self) -> GroupCounts {
        let mut g = [0usize; 4];
        for s in &self.train {
            g[s.group()] += 1;
        }
        GroupCounts { g }
    }

    /// Shift degrees realised by the train split.
    pub fn realized_degrees(&self) -> Result<ShiftDegrees> {
        quantify_shifts(&self.train_histogram())
    }

    /// True whenever every test group has the same positive count.
    pub fn test_is_balanced(&self) -> bool {
        let mut g = [0usize; 4];
        for s in &self.test {
            g[s.group()] += 1;
        }
        g[0] > 0 && g.iter().all(|&c| c == g[0])
    }
}

/// Validate that a histogram is usable (non-empty).
pub(crate) fn validate_counts(counts: &GroupCounts) -> Result<usize> {
    let n = counts.total();
    if n == 0 {
        return Err(Error::DegenerateInput(
            "group histogram sums to zero".into(),
        ));
    }
    Ok(n)
}
