//! The candidate-algorithm panel.
//!
//! Every algorithm trains the same hypothesis class — a linear scorer
//! `w·x + b` — with full-batch adaptive-moment descent, differing only
//! in how the training distribution or loss is shaped:
//!
//! | id          | mechanism                                            |
//! |-------------|------------------------------------------------------|
//! | ERM         | plain logistic loss                                  |
//! | GroupDRO    | exponentiated-gradient reweighting of group losses   |
//! | Oversample  | minority groups resampled up to the max group count  |
//! | Undersample | majority groups subsampled down to the min count     |
//! | LogitAdjust | margins shifted by τ·log(group prior)                |
//!
//! Models are scored by worst-group (and averaged-group) 0–1 error on a
//! group-balanced test split.

mod losses;
mod optim;
mod train;

pub use losses::{adjusted_margin, logistic_loss, sigmoid, softplus};
pub use optim::Adam;
pub use train::{dro_weight_update, resample_groups, train_model, ResampleMode, TrainedModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shiftgen::Sample;

/// The five candidate algorithms. The declaration order is a frozen
/// contract: it defines one-hot encodings, label-vector positions, and
/// every per-algorithm column in persisted artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlgorithmId {
    Erm,
    GroupDro,
    Oversample,
    Undersample,
    LogitAdjust,
}

/// Number of candidate algorithms.
pub const NUM_ALGORITHMS: usize = 5;

impl AlgorithmId {
    pub const ALL: [AlgorithmId; NUM_ALGORITHMS] = [
        AlgorithmId::Erm,
        AlgorithmId::GroupDro,
        AlgorithmId::Oversample,
        AlgorithmId::Undersample,
        AlgorithmId::LogitAdjust,
    ];

    /// Position in the frozen ordering.
    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|a| a == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<AlgorithmId> {
        Self::ALL.get(i).copied()
    }

    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmId::Erm => "ERM",
            AlgorithmId::GroupDro => "GroupDRO",
            AlgorithmId::Oversample => "Oversample",
            AlgorithmId::Undersample => "Undersample",
            AlgorithmId::LogitAdjust => "LogitAdjust",
        }
    }

    pub fn from_name(name: &str) -> Option<AlgorithmId> {
        Self::ALL.iter().copied().find(|a| a.name() == name)
    }

    /// The frozen name list, in order.
    pub fn names() -> Vec<String> {
        Self::ALL.iter().map(|a| a.name().to_string()).collect()
    }
}

impl std::fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Hyperparameters shared by all algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// GroupDRO group-weight step size.
    pub dro_eta: f64,
    /// Logit-adjustment temperature.
    pub tau: f64,
    /// Seed for resampling draws; per-algorithm streams are derived
    /// from it, so one seed covers the whole panel.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            lr: 1e-3,
            weight_decay: 1e-4,
            dro_eta: 0.01,
            tau: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::DegenerateInput("epochs must be >= 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::DegenerateInput(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.weight_decay < 0.0 || self.tau < 0.0 {
            return Err(Error::DegenerateInput(
                "weight decay and tau must be non-negative".into(),
            ));
        }
        if !(self.dro_eta > 0.0) {
            return Err(Error::DegenerateInput(format!(
                "dro_eta must be positive, got {}",
                self.dro_eta
            )));
        }
        Ok(())
    }
}

/// Anything that scores feature vectors. Predicted label is
/// `sign(score)` with ties to `+1`.
pub trait Scorer {
    fn score(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &[f64]) -> i8 {
        if self.score(x) >= 0.0 {
            1
        } else {
            -1
        }
    }
}

/// A linear scorer `w·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearModel {
    pub fn zeros(p: usize) -> Self {
        LinearModel {
            w: vec![0.0; p],
            b: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }
}

impl Scorer for LinearModel {
    fn score(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.w.len());
        let mut s = self.b;
        for (wi, xi) in self.w.iter().zip(x) {
            s += wi * xi;
        }
        s
    }
}

/// Average the scores of several models.
#[derive(Debug, Clone)]
pub struct UniformEnsemble {
    members: Vec<LinearModel>,
}

/// Combine ≥ 2 equally-weighted linear models into one scorer.
pub fn uniform_ensemble(models: &[LinearModel]) -> Result<UniformEnsemble> {
    if models.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "ensemble needs >= 2 members, got {}",
            models.len()
        )));
    }
    let p = models[0].dim();
    for (i, m) in models.iter().enumerate() {
        if m.dim() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: m.dim(),
                context: format!("ensemble member {i}"),
            });
        }
    }
    Ok(UniformEnsemble {
        members: models.to_vec(),
    })
}

impl Scorer for UniformEnsemble {
    fn score(&self, x: &[f64]) -> f64 {
        self.members.iter().map(|m| m.score(x)).sum::<f64>() / self.members.len() as f64
    }
}

/// Per-group 0–1 errors of a scorer on a test split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupErrors {
    pub per_group: [f64; 4],
    pub worst: f64,
    pub average: f64,
}

/// Evaluate per-group, worst-group, and averaged-group error. The test
/// split must contain all four groups.
pub fn group_errors<S: Scorer + ?Sized>(model: &S, test: &[Sample]) -> Result<GroupErrors> {
    let mut wrong = [0usize; 4];
    let mut count = [0usize; 4];
    for s in test {
        let g = s.group();
        count[g] += 1;
        if model.predict(&s.x) != s.y {
            wrong[g] += 1;
        }
    }
    for (g, &c) in count.iter().enumerate() {
        if c == 0 {
            return Err(Error::InvalidTest { group: g + 1 });
        }
    }
    let per_group = [0, 1, 2, 3].map(|g| wrong[g] as f64 / count[g] as f64);
    Ok(GroupErrors {
        per_group,
        worst: per_group.iter().copied().fold(0.0, f64::max),
        average: per_group.iter().sum::<f64>() / 4.0,
    })
}

/// Worst-group 0–1 error (max over the four groups).
pub fn worst_group_error<S: Scorer + ?Sized>(model: &S, test: &[Sample]) -> Result<f64> {
    Ok(group_errors(model, test)?.worst)
}

/// Averaged-group 0–1 error (mean over the four groups).
pub fn average_group_error<S: Scorer + ?Sized>(model: &S, test: &[Sample]) -> Result<f64> {
    Ok(group_errors(model, test)?.average)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shiftgen::GROUP_YA;

    fn toy_test() -> Vec<Sample> {
        // One sample per group at x = (y, a).
        GROUP_YA
            .iter()
            .map(|&(y, a)| Sample {
                x: vec![y as f64, a as f64],
                y,
                a,
            })
            .collect()
    }

    #[test]
    fn ordering_contract_is_frozen() {
        let names: Vec<&str> = AlgorithmId::ALL.iter().map(|a| a.name()).collect();
        assert_eq!(
            names,
            ["ERM", "GroupDRO", "Oversample", "Undersample", "LogitAdjust"]
        );
        for (i, a) in AlgorithmId::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
            assert_eq!(AlgorithmId::from_index(i), Some(*a));
            assert_eq!(AlgorithmId::from_name(a.name()), Some(*a));
        }
        assert_eq!(AlgorithmId::from_index(5), None);
        assert_eq!(AlgorithmId::from_name("erm"), None);
    }

    #[test]
    fn perfect_and_constant_classifiers() {
        let test = toy_test();
        let perfect = LinearModel {
            w: vec![1.0, 0.0],
            b: 0.0,
        };
        let errs = group_errors(&perfect, &test).unwrap();
        assert_eq!(errs.worst, 0.0);
        assert_eq!(errs.average, 0.0);

        // Constant +1: both y=−1 groups (G2, G4) fully wrong.
        let constant = LinearModel {
            w: vec![0.0, 0.0],
            b: 0.0, // score 0 → +1 by the tie rule
        };
        let errs = group_errors(&constant, &test).unwrap();
        assert_eq!(errs.per_group, [0.0, 1.0, 0.0, 1.0]);
        assert_eq!(errs.worst, 1.0);
        assert_eq!(errs.average, 0.5);
    }

    #[test]
    fn worst_is_max_average_is_mean() {
        // Four groups with 20 samples each and controlled error rates.
        let mut test = Vec::new();
        let rates: [f64; 4] = [0.1, 0.2, 0.05, 0.4];
        for (g, &(y, a)) in GROUP_YA.iter().enumerate() {
            let wrong = (rates[g] * 20.0).round() as usize;
            for k in 0..20 {
                // x[0] = +y classifies right; x[0] = −3y classifies wrong.
                let sign = if k < wrong { -3.0 } else { 1.0 };
                test.push(Sample {
                    x: vec![sign * y as f64, a as f64],
                    y,
                    a,
                });
            }
        }
        let model = LinearModel {
            w: vec![1.0, 0.0],
            b: 0.0,
        };
        let errs = group_errors(&model, &test).unwrap();
        assert_eq!(errs.per_group, rates);
        assert_eq!(errs.worst, 0.4);
        assert!((errs.average - 0.1875).abs() < 1e-15);
        assert!(errs.average <= errs.worst);
    }

    #[test]
    fn missing_group_is_invalid_test() {
        let mut test = toy_test();
        test.retain(|s| s.group() != 2);
        match group_errors(&LinearModel::zeros(2), &test) {
            Err(Error::InvalidTest { group }) => assert_eq!(group, 3),
            other => panic!("expected invalid-test, got {other:?}"),
        }
    }

    #[test]
    fn ensemble_basics() {
        let m = LinearModel {
            w: vec![2.0, -1.0],
            b: 0.5,
        };
        let e = uniform_ensemble(&[m.clone(), m.clone()]).unwrap();
        let x = [0.3, 0.7];
        assert_eq!(e.score(&x), m.score(&x));

        let neg = LinearModel {
            w: vec![-2.0, 1.0],
            b: -0.5,
        };
        let e = uniform_ensemble(&[m.clone(), neg]).unwrap();
        assert_eq!(e.score(&x), 0.0);
        assert_eq!(e.predict(&x), 1); // ties to +1

        assert!(uniform_ensemble(&[m.clone()]).is_err());
        let short = LinearModel::zeros(3);
        assert!(matches!(
            uniform_ensemble(&[m, short]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
