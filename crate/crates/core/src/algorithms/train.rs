//! Training loop: one convex objective, five ways to shape it.

use rand::Rng as _;

use super::losses::{adjusted_margin, sigmoid, softplus};
use super::optim::Adam;
use super::{AlgorithmId, LinearModel, TrainConfig};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream, Rng};
use crate::shiftgen::{Sample, TaskDataset};

/// Largest magnitude fed to `exp` in the DRO weight update.
const DRO_EXP_CLAMP: f64 = 50.0;

/// A fitted model plus training diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: LinearModel,
    /// Objective value (data loss + L2 term) at the final epoch.
    pub final_loss: f64,
    /// Largest single-epoch objective increase observed over the last
    /// 10% of epochs; a converged run keeps this within ~1e-3.
    pub tail_max_increase: f64,
}

/// Row-major dense view of a train split.
struct DenseTask {
    n: usize,
    p: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    group: Vec<u8>,
    group_counts: [usize; 4],
}

impl DenseTask {
    fn from_samples(samples: &[Sample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::DegenerateInput("empty train split".into()));
        }
        let p = samples[0].x.len();
        let n = samples.len();
        let mut x = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n);
        let mut group = Vec::with_capacity(n);
        let mut group_counts = [0usize; 4];
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: s.x.len(),
                    context: format!("train sample {i}"),
                });
            }
            x.extend_from_slice(&s.x);
            y.push(s.y as f64);
            group.push(s.group() as u8);
            group_counts[s.group()] += 1;
        }
        Ok(DenseTask {
            n,
            p,
            x,
            y,
            group,
            group_counts,
        })
    }
}

/// Over/under resampling target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMode {
    /// Every non-empty group is brought up to the max group count by
    /// drawing extra samples with replacement.
    Over,
    /// Every group is subsampled without replacement down to the min
    /// group count. All four groups must be non-empty.
    Under,
}

/// Resample a train split to a uniform group histogram.
pub fn resample_groups(
    train: &[Sample],
    mode: ResampleMode,
    rng: &mut Rng,
) -> Result<Vec<Sample>> {
    let mut by_group: [Vec<usize>; 4] = Default::default();
    for (i, s) in train.iter().enumerate() {
        by_group[s.group()].push(i);
    }
    let sizes = [0, 1, 2, 3].map(|g| by_group[g].len());
    let mut out = Vec::new();
    match mode {
        ResampleMode::Over => {
            let max = *sizes.iter().max().unwrap();
            for idx in by_group.iter() {
                if idx.is_empty() {
                    continue;
                }
                // Originals once, then draws with replacement up to max.
                for &i in idx {
                    out.push(train[i].clone());
                }
                for _ in idx.len()..max {
                    out.push(train[idx[rng.gen_range(0..idx.len())]].clone());
                }
            }
        }
        ResampleMode::Under => {
            let min = match sizes.iter().copied().min() {
                Some(0) | None => {
                    let g = sizes.iter().position(|&c| c == 0).unwrap_or(0);
                    return Err(Error::MissingGroup {
                        group: g + 1,
                        operation: "undersampling".into(),
                    });
                }
                Some(m) => m,
            };
            for idx in by_group.iter() {
                let mut pool: Vec<usize> = idx.clone();
                // Partial Fisher–Yates: the first `min` entries are a
                // uniform without-replacement draw.
                for i in 0..min {
                    let j = rng.gen_range(i..pool.len());
                    pool.swap(i, j);
                }
                for &i in &pool[..min] {
                    out.push(train[i].clone());
                }
            }
        }
    }
    Ok(out)
}

/// Exponentiated-gradient step on the group-weight simplex:
/// `q'_g ∝ q_g · exp(η·L_g)`.
pub fn dro_weight_update(q: [f64; 4], group_losses: [f64; 4], eta: f64) -> [f64; 4] {
    let mut next = [0.0; 4];
    for g in 0..4 {
        let e = (eta * group_losses[g]).clamp(-DRO_EXP_CLAMP, DRO_EXP_CLAMP);
        next[g] = q[g] * e.exp();
    }
    let z: f64 = next.iter().sum();
    if z <= 0.0 || !z.is_finite() {
        // Unreachable for simplex q and clamped exponents; stay put.
        return q;
    }
    for v in &mut next {
        *v /= z;
    }
    next
}

/// Objective + gradient of the weighted, margin-offset logistic loss
/// with L2 regularization:
///
/// `L(w,b) = Σ_i weight_i · softplus(−(y_i·(w·x_i + b) + offset_i)) + (λ/2)·‖w‖²`
///
/// `params` is the flat vector `[w…, b]`; `grad` has the same layout.
fn loss_and_grad(
    dense: &DenseTask,
    weights: &[f64],
    offsets: Option<&[f64]>,
    weight_decay: f64,
    params: &[f64],
    grad: &mut [f64],
) -> f64 {
    let (n, p) = (dense.n, dense.p);
    let (w, b) = (&params[..p], params[p]);
    grad.fill(0.0);
    let mut loss = 0.0;
    for i in 0..n {
        let row = &dense.x[i * p..(i + 1) * p];
        let mut s = b;
        for j in 0..p {
            s += w[j] * row[j];
        }
        let mut margin = dense.y[i] * s;
        if let Some(off) = offsets {
            margin += off[i];
        }
        let wt = weights[i];
        loss += wt * softplus(-margin);
        // d softplus(−m)/d score = −y·σ(−m)
        let coef = -dense.y[i] * sigmoid(-margin) * wt;
        if coef != 0.0 {
            for j in 0..p {
                grad[j] += coef * row[j];
            }
            grad[p] += coef;
        }
    }
    for j in 0..p {
        loss += 0.5 * weight_decay * w[j] * w[j];
        grad[j] += weight_decay * w[j];
    }
    loss
}

/// What shapes the objective, per algorithm.
enum Objective {
    Plain,
    /// Fixed per-sample margin offsets (logit adjustment).
    Offsets(Vec<f64>),
    /// Per-epoch group reweighting (GroupDRO).
    Dro { eta: f64 },
}

fn fit(dense: &DenseTask, objective: Objective, cfg: &TrainConfig) -> Result<TrainedModel> {
    let p = dense.p;
    let mut params = vec![0.0; p + 1]; // zero-init w and b
    let mut grad = vec![0.0; p + 1];
    let mut adam = Adam::new(p + 1, cfg.lr);
    let uniform: Vec<f64> = vec![1.0 / dense.n as f64; dense.n];
    let mut dro_q = [0.25; 4];
    let mut dro_weights = vec![0.0; dense.n];

    let tail_start = cfg.epochs - cfg.epochs / 10;
    let mut prev_loss = f64::INFINITY;
    let mut tail_max_increase: f64 = 0.0;
    let mut final_loss = 0.0;

    for epoch in 1..=cfg.epochs {
        let (weights, offsets): (&[f64], Option<&[f64]>) = match &objective {
            Objective::Plain => (&uniform, None),
            Objective::Offsets(off) => (&uniform, Some(off.as_slice())),
            Objective::Dro { eta } => {
                // Group mean losses at the current parameters...
                let (w, b) = (&params[..p], params[p]);
                let mut group_loss_buf = [0.0f64; 4];
                for i in 0..dense.n {
                    let row = &dense.x[i * p..(i + 1) * p];
                    let mut s = b;
                    for j in 0..p {
                        s += w[j] * row[j];
                    }
                    group_loss_buf[dense.group[i] as usize] += softplus(-dense.y[i] * s);
                }
                for g in 0..4 {
                    if dense.group_counts[g] > 0 {
                        group_loss_buf[g] /= dense.group_counts[g] as f64;
                    }
                }
                // ...move q toward high-loss groups, then weight samples
                // by q_g / |g| so the objective is Σ_g q_g·L_g.
                dro_q = dro_weight_update(dro_q, group_loss_buf, *eta);
                for i in 0..dense.n {
                    let g = dense.group[i] as usize;
                    dro_weights[i] = dro_q[g] / dense.group_counts[g] as f64;
                }
                (&dro_weights, None)
            }
        };
        let loss = loss_and_grad(dense, weights, offsets, cfg.weight_decay, &params, &mut grad);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        adam.step(&mut params, &grad);
        if epoch > tail_start {
            tail_max_increase = tail_max_increase.max(loss - prev_loss);
        }
        prev_loss = loss;
        final_loss = loss;
    }

    let w = params[..p].to_vec();
    let b = params[p];
    Ok(TrainedModel {
        model: LinearModel { w, b },
        final_loss,
        tail_max_increase,
    })
}

/// Group priors `n_g/n`, floored at `1/(2n)` so empty groups never feed
/// a zero into `log`.
fn group_priors(dense: &DenseTask) -> [f64; 4] {
    let n = dense.n as f64;
    dense
        .group_counts
        .map(|c| (c as f64 / n).max(1.0 / (2.0 * n)))
}

/// Train one algorithm on a task's train split.
///
/// Deterministic: the only stochastic step is resampling, driven by a
/// stream derived from `(cfg.seed, algorithm index)`.
pub fn train_model(
    algorithm: AlgorithmId,
    task: &TaskDataset,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    cfg.validate()?;
    match algorithm {
        AlgorithmId::Erm => fit(&DenseTask::from_samples(&task.train)?, Objective::Plain, cfg),
        AlgorithmId::GroupDro => fit(
            &DenseTask::from_samples(&task.train)?,
            Objective::Dro { eta: cfg.dro_eta },
            cfg,
        ),
        AlgorithmId::Oversample | AlgorithmId::Undersample => {
            let mode = if algorithm == AlgorithmId::Oversample {
                ResampleMode::Over
            } else {
                ResampleMode::Under
            };
            let mut rng = rng_from_seed(derive_seed(
                cfg.seed,
                &[stream::ALGORITHM, algorithm.index() as u64],
            ));
            let resampled = resample_groups(&task.train, mode, &mut rng)?;
            fit(&DenseTask::from_samples(&resampled)?, Objective::Plain, cfg)
        }
        AlgorithmId::LogitAdjust => {
            let dense = DenseTask::from_samples(&task.train)?;
            let priors = group_priors(&dense);
            let offsets: Vec<f64> = dense
                .group
                .iter()
                .map(|&g| adjusted_margin(0.0, priors[g as usize], cfg.tau))
                .collect();
            fit(&dense, Objective::Offsets(offsets), cfg)
        }
    }
}
