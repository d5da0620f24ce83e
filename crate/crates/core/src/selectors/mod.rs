//! Algorithm selectors: models that map a task descriptor to
//! per-algorithm suitability scores and pick a candidate to run.
//!
//! The main method is a multi-label MLP trained with BCE on suitability
//! bits; alternatives are an error regressor (descriptor ⊕ one-hot
//! algorithm identifier → predicted worst-group error), a one-vs-rest
//! logistic model, k-NN, a depth-capped CART tree, and a "mimic" tree
//! distilled from the MLP's selections. Non-learned baselines (global
//! best, random, oracle) share the same interface so evaluation code
//! treats every policy identically.

pub mod knn;
pub mod net;
pub mod tree;

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::algorithms::{sigmoid, NUM_ALGORITHMS};
use crate::error::{Error, Result};
use crate::metadataset::{split_meta, Descriptor, MetaDataset, MetaRecord, Standardization};
use crate::rng::{derive_seed, fnv1a64, rng_from_seed, stream, Rng};

pub use knn::{KnnParams, KnnSpec};
pub use net::{
    net_loss_and_grad, train_net, LossHead, Net, NetDiagnostics, NetTrainConfig,
};
pub use tree::{fit_tree, TreeNode, TreeSpec};

/// Selector families. Serialized names are the artifact contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorKind {
    MlpMultilabel,
    Regression,
    Linear,
    Knn,
    Tree,
    MimicTree,
    GlobalBest,
    Random,
    Oracle,
}

impl SelectorKind {
    pub const ALL: [SelectorKind; 9] = [
        SelectorKind::MlpMultilabel,
        SelectorKind::Regression,
        SelectorKind::Linear,
        SelectorKind::Knn,
        SelectorKind::Tree,
        SelectorKind::MimicTree,
        SelectorKind::GlobalBest,
        SelectorKind::Random,
        SelectorKind::Oracle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SelectorKind::MlpMultilabel => "mlp_multilabel",
            SelectorKind::Regression => "regression",
            SelectorKind::Linear => "linear",
            SelectorKind::Knn => "knn",
            SelectorKind::Tree => "tree",
            SelectorKind::MimicTree => "mimic_tree",
            SelectorKind::GlobalBest => "global_best",
            SelectorKind::Random => "random",
            SelectorKind::Oracle => "oracle",
        }
    }

    pub fn from_name(name: &str) -> Option<SelectorKind> {
        SelectorKind::ALL.iter().copied().find(|k| k.name() == name)
    }

    /// Stable tag mixed into derived seeds; part of the
    /// reproducibility contract.
    fn seed_tag(&self) -> u64 {
        match self {
            SelectorKind::MlpMultilabel => 0,
            SelectorKind::Regression => 1,
            SelectorKind::Linear => 2,
            SelectorKind::Knn => 3,
            SelectorKind::Tree => 4,
            SelectorKind::MimicTree => 5,
            SelectorKind::GlobalBest => 6,
            SelectorKind::Random => 7,
            SelectorKind::Oracle => 8,
        }
    }
}

/// MLP shape: rectifier hidden layers of uniform width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub hidden_layers: usize,
    pub width: usize,
}

impl Default for MlpSpec {
    fn default() -> Self {
        MlpSpec {
            hidden_layers: 4,
            width: 128,
        }
    }
}

impl MlpSpec {
    pub fn sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.hidden_layers + 2);
        s.push(input);
        s.extend(std::iter::repeat(self.width).take(self.hidden_layers));
        s.push(output);
        s
    }
}

/// Masks the four shift/availability features, leaving the "trivial
/// dataset properties" (n, d) visible — the naive-descriptor baseline.
pub const NAIVE_MASK: [bool; 6] = [true, true, true, true, false, false];

/// Projection behind the naive baseline: `(n, d)` of the task.
pub fn naive_descriptor_view(descriptor: &Descriptor) -> (f64, f64) {
    (descriptor.n as f64, descriptor.d as f64)
}

/// Everything needed to train any selector kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub seed: u64,
    pub mlp: MlpSpec,
    pub tree: TreeSpec,
    pub knn: KnnSpec,
    pub net_train: NetTrainConfig,
    /// `true` hides the feature from the selector (naive baseline,
    /// leave-one-descriptor-out analyses). `None` shows all six.
    pub feature_mask: Option<[bool; 6]>,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig {
            seed: 0,
            mlp: MlpSpec::default(),
            tree: TreeSpec::default(),
            knn: KnnSpec::default(),
            net_train: NetTrainConfig::default(),
            feature_mask: None,
        }
    }
}

/// Fitted parameters, one variant per family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SelectorParams {
    /// MLP, regression and linear kinds all store a dense network.
    Net { net: Net },
    Knn { params: KnnParams },
    Tree { root: TreeNode },
    GlobalBest { index: usize },
    Random { seed: u64 },
    Oracle,
}

/// A trained, serializable selector artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorModel {
    pub kind: SelectorKind,
    /// Hyper-parameters the artifact was trained with.
    pub config: SelectorConfig,
    /// Candidate-algorithm ordering the score vector follows.
    pub algorithms: Vec<String>,
    /// Present for kinds that consume standardized descriptors.
    pub standardization: Option<Standardization>,
    /// Fingerprint of the meta-dataset this selector was trained on.
    pub meta_fingerprint: String,
    pub params: SelectorParams,
}

/// Facts about a training run that are not part of the artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub diagnostics: Option<NetDiagnostics>,
    pub warnings: Vec<String>,
}

/// Artifact plus its training report.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedSelector {
    pub model: SelectorModel,
    pub report: TrainReport,
}

/// Inference input: the descriptor, plus the true error row for the
/// oracle policy (other kinds never look at it).
#[derive(Debug, Clone, Copy)]
pub struct PredictInput<'a> {
    pub descriptor: &'a Descriptor,
    pub perf: Option<&'a [f64]>,
}

impl<'a> From<&'a Descriptor> for PredictInput<'a> {
    fn from(descriptor: &'a Descriptor) -> Self {
        PredictInput {
            descriptor,
            perf: None,
        }
    }
}

/// How a score vector becomes a single algorithm choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Argmax with first-maximum (lowest index) tie-break.
    TopLogit,
    /// Threshold scores at 0.5; choose uniformly among positives;
    /// fall back to argmax when none pass.
    BinaryRandom,
}

/// Argmax with the first maximum winning.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Reduce a score vector to a selected algorithm index.
///
/// `rng` is consulted only by `BinaryRandom` with ≥ 2 positives; it may
/// be `None` otherwise.
pub fn select_algorithm(
    scores: &[f64],
    rule: SelectionRule,
    rng: Option<&mut Rng>,
) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::DegenerateInput("empty score vector".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::DegenerateInput("NaN selector score".into()));
    }
    match rule {
        SelectionRule::TopLogit => Ok(argmax(scores)),
        SelectionRule::BinaryRandom => {
            let positives: Vec<usize> = scores
                .iter()
                .enumerate()
                .filter(|(_, &s)| s > 0.5)
                .map(|(i, _)| i)
                .collect();
            match positives.len() {
                0 => Ok(argmax(scores)),
                1 => Ok(positives[0]),
                _ => {
                    let rng = rng.ok_or_else(|| {
                        Error::DegenerateInput(
                            "binary_random with several positives needs an rng".into(),
                        )
                    })?;
                    Ok(positives[rng.gen_range(0..positives.len())])
                }
            }
        }
    }
}

/// Standardize and mask a descriptor for the dense/knn kinds.
fn standardized_input(
    std: &Standardization,
    mask: Option<&[bool; 6]>,
    descriptor: &Descriptor,
) -> Vec<f64> {
    let mut z = std.apply(descriptor).to_vec();
    if let Some(mask) = mask {
        for (v, &hidden) in z.iter_mut().zip(mask) {
            if hidden {
                *v = 0.0; // the train mean in standardized coordinates
            }
        }
    }
    z
}

/// Raw features for the tree kind (trees are scale-invariant, and raw
/// thresholds keep exported rules readable).
fn raw_input(descriptor: &Descriptor) -> Vec<f64> {
    descriptor.to_features().to_vec()
}

/// Mimic-tree features: degrees fold to their distance from the
/// balanced point, `|d − 0.5|`; the remaining features stay raw.
fn mimic_input(descriptor: &Descriptor) -> Vec<f64> {
    let mut f = descriptor.to_features().to_vec();
    for v in f.iter_mut().take(3) {
        *v = (*v - 0.5).abs();
    }
    f
}

/// Split-feature indices the tree kinds may use under a mask.
fn allowed_features(mask: Option<&[bool; 6]>) -> Vec<usize> {
    (0..6)
        .filter(|&j| mask.map_or(true, |m| !m[j]))
        .collect()
}

/// The feature vector a tree-kind selector consumes: raw descriptor
/// features for `Tree`, the |degree − 0.5| fold for `MimicTree`.
/// Exposed so exported rules can be re-evaluated against the model.
pub fn tree_input_features(kind: SelectorKind, descriptor: &Descriptor) -> Result<Vec<f64>> {
    match kind {
        SelectorKind::Tree => Ok(raw_input(descriptor)),
        SelectorKind::MimicTree => Ok(mimic_input(descriptor)),
        other => Err(Error::DegenerateInput(format!(
            "{} is not a tree selector",
            other.name()
        ))),
    }
}

fn require_standardization(meta: &MetaDataset) -> Result<&Standardization> {
    meta.standardization.as_ref().ok_or_else(|| {
        Error::DegenerateInput(
            "meta dataset carries no fitted standardization; assemble it first".into(),
        )
    })
}

/// One-hot algorithm identifier appended to regression inputs.
fn one_hot(m: usize, width: usize) -> Vec<f64> {
    let mut v = vec![0.0; width];
    v[m] = 1.0;
    v
}

/// Expand records into the regression design: `M` rows per record,
/// each `standardized descriptor ⊕ one-hot(algorithm) → error`.
fn regression_rows(
    records: &[MetaRecord],
    idx: &[usize],
    std: &Standardization,
    mask: Option<&[bool; 6]>,
) -> (Vec<f64>, Vec<f64>, usize) {
    let m = NUM_ALGORITHMS;
    let width = 6 + m;
    let mut x = Vec::with_capacity(idx.len() * m * width);
    let mut y = Vec::with_capacity(idx.len() * m);
    for &i in idx {
        let feats = standardized_input(std, mask, &records[i].descriptor);
        for a in 0..m {
            x.extend_from_slice(&feats);
            x.extend_from_slice(&one_hot(a, m));
            y.push(records[i].perf[a]);
        }
    }
    (x, y, idx.len() * m)
}

/// Train any selector kind on the meta-train split of `meta`.
pub fn train_selector(
    kind: SelectorKind,
    meta: &MetaDataset,
    cfg: &SelectorConfig,
) -> Result<TrainedSelector> {
    let (train_idx, _) = split_meta(&meta.records);
    train_selector_on(kind, meta, &train_idx, cfg)
}

/// Train on an explicit record-index subset (used by subsampling and
/// leave-one-descriptor-out analyses; `train_selector` passes the
/// deterministic meta-train split).
pub fn train_selector_on(
    kind: SelectorKind,
    meta: &MetaDataset,
    idx: &[usize],
    cfg: &SelectorConfig,
) -> Result<TrainedSelector> {
    if idx.is_empty() {
        return Err(Error::DegenerateInput(
            "selector training needs at least one meta record".into(),
        ));
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= meta.records.len()) {
        return Err(Error::DimensionMismatch {
            expected: meta.records.len(),
            got: bad,
            context: "selector training index".into(),
        });
    }
    let records = &meta.records;
    let m = NUM_ALGORITHMS;
    let mask = cfg.feature_mask.as_ref();
    let seed = derive_seed(cfg.seed, &[stream::SELECTOR, kind.seed_tag()]);
    let mut warnings = Vec::new();
    let mut diagnostics = None;

    let (params, standardization) = match kind {
        SelectorKind::MlpMultilabel | SelectorKind::Linear => {
            if idx.len() < 2 {
                return Err(Error::DegenerateInput(format!(
                    "{} training needs ≥ 2 records, got {}",
                    kind.name(),
                    idx.len()
                )));
            }
            let std = require_standardization(meta)?;
            let mut x = Vec::with_capacity(idx.len() * 6);
            let mut y = Vec::with_capacity(idx.len() * m);
            for &i in idx {
                x.extend(standardized_input(std, mask, &records[i].descriptor));
                y.extend(records[i].labels.iter().map(|&b| f64::from(b)));
            }
            let sizes = match kind {
                SelectorKind::MlpMultilabel => cfg.mlp.sizes(6, m),
                _ => vec![6, m], // one-vs-rest logistic: no hidden layers
            };
            let (net, diag) = train_net(
                &sizes,
                &x,
                &y,
                idx.len(),
                LossHead::Bce,
                &cfg.net_train,
                seed,
            )?;
            diagnostics = Some(diag);
            (SelectorParams::Net { net }, Some(std.clone()))
        }
        SelectorKind::Regression => {
            if idx.len() < 2 {
                return Err(Error::DegenerateInput(format!(
                    "regression training needs ≥ 2 records, got {}",
                    idx.len()
                )));
            }
            let std = require_standardization(meta)?;
            let (x, y, rows) = regression_rows(records, idx, std, mask);
            let sizes = cfg.mlp.sizes(6 + m, 1);
            let (net, diag) = train_net(
                &sizes,
                &x,
                &y,
                rows,
                LossHead::Mse,
                &cfg.net_train,
                seed,
            )?;
            diagnostics = Some(diag);
            (SelectorParams::Net { net }, Some(std.clone()))
        }
        SelectorKind::Knn => {
            let std = require_standardization(meta)?;
            let mut k = cfg.knn.k;
            if k > idx.len() {
                warnings.push(format!(
                    "knn k {} exceeds the {} training records; clamped",
                    k,
                    idx.len()
                ));
                k = idx.len();
            }
            let x: Vec<Vec<f64>> = idx
                .iter()
                .map(|&i| standardized_input(std, mask, &records[i].descriptor))
                .collect();
            let y: Vec<Vec<f64>> = idx
                .iter()
                .map(|&i| records[i].labels.iter().map(|&b| f64::from(b)).collect())
                .collect();
            (
                SelectorParams::Knn {
                    params: KnnParams::new(k, x, y)?,
                },
                Some(std.clone()),
            )
        }
        SelectorKind::Tree => {
            let x: Vec<Vec<f64>> = idx.iter().map(|&i| raw_input(&records[i].descriptor)).collect();
            let y: Vec<Vec<f64>> = idx
                .iter()
                .map(|&i| records[i].labels.iter().map(|&b| f64::from(b)).collect())
                .collect();
            let root = fit_tree(&x, &y, &allowed_features(mask), &cfg.tree)?;
            (SelectorParams::Tree { root }, None)
        }
        SelectorKind::MimicTree => {
            // Self-contained path: distill a freshly trained MLP. Use
            // `train_mimic_tree` to distill an existing one instead.
            let mlp = train_selector_on(SelectorKind::MlpMultilabel, meta, idx, cfg)?;
            warnings.extend(mlp.report.warnings.iter().cloned());
            return train_mimic_tree(meta, &mlp.model, idx, cfg);
        }
        SelectorKind::GlobalBest => {
            let mut means = vec![0.0; m];
            for &i in idx {
                for (s, &p) in means.iter_mut().zip(&records[i].perf) {
                    *s += p;
                }
            }
            let mut best = 0;
            for a in 1..m {
                if means[a] < means[best] {
                    best = a;
                }
            }
            (SelectorParams::GlobalBest { index: best }, None)
        }
        SelectorKind::Random => (SelectorParams::Random { seed }, None),
        SelectorKind::Oracle => (SelectorParams::Oracle, None),
    };

    Ok(TrainedSelector {
        model: SelectorModel {
            kind,
            config: *cfg,
            algorithms: meta.algorithms.clone(),
            standardization,
            meta_fingerprint: format!("{:016x}", meta.fingerprint()),
            params,
        },
        report: TrainReport {
            diagnostics,
            warnings,
        },
    })
}

/// Distill `mlp`'s top-logit selections on `idx` into a depth-capped
/// tree over mimic-transformed features (`|degree − 0.5|`, raw rest).
pub fn train_mimic_tree(
    meta: &MetaDataset,
    mlp: &SelectorModel,
    idx: &[usize],
    cfg: &SelectorConfig,
) -> Result<TrainedSelector> {
    if mlp.kind != SelectorKind::MlpMultilabel {
        return Err(Error::DegenerateInput(format!(
            "mimic tree distills an mlp_multilabel selector, got {}",
            mlp.kind.name()
        )));
    }
    let m = NUM_ALGORITHMS;
    let mut x = Vec::with_capacity(idx.len());
    let mut y = Vec::with_capacity(idx.len());
    for &i in idx {
        let rec = &meta.records[i];
        let scores = predict_scores(mlp, PredictInput::from(&rec.descriptor))?;
        let choice = select_algorithm(&scores, SelectionRule::TopLogit, None)?;
        x.push(mimic_input(&rec.descriptor));
        y.push(one_hot(choice, m));
    }
    let root = fit_tree(
        &x,
        &y,
        &allowed_features(cfg.feature_mask.as_ref()),
        &cfg.tree,
    )?;
    Ok(TrainedSelector {
        model: SelectorModel {
            kind: SelectorKind::MimicTree,
            config: *cfg,
            algorithms: meta.algorithms.clone(),
            standardization: None,
            meta_fingerprint: format!("{:016x}", meta.fingerprint()),
            params: SelectorParams::Tree { root },
        },
        report: TrainReport {
            diagnostics: None,
            warnings: Vec::new(),
        },
    })
}

/// Kind-appropriate suitability scores for one task: logits for the
/// dense classifiers, negated predicted errors for regression and the
/// oracle, label means for knn and the trees, a constant one-hot for
/// global-best, seeded uniforms for random. Pure: identical inputs
/// always yield identical scores.
pub fn predict_scores(model: &SelectorModel, input: PredictInput<'_>) -> Result<Vec<f64>> {
    let m = NUM_ALGORITHMS;
    let mask = model.config.feature_mask.as_ref();
    let scores = match (&model.kind, &model.params) {
        (SelectorKind::MlpMultilabel | SelectorKind::Linear, SelectorParams::Net { net }) => {
            let std = model.standardization.as_ref().ok_or_else(|| {
                Error::DegenerateInput("dense selector lacks standardization".into())
            })?;
            net.forward(&standardized_input(std, mask, input.descriptor))?
        }
        (SelectorKind::Regression, SelectorParams::Net { net }) => {
            let std = model.standardization.as_ref().ok_or_else(|| {
                Error::DegenerateInput("regression selector lacks standardization".into())
            })?;
            let feats = standardized_input(std, mask, input.descriptor);
            let mut scores = Vec::with_capacity(m);
            for a in 0..m {
                let mut row = feats.clone();
                row.extend(one_hot(a, m));
                scores.push(-net.forward(&row)?[0]);
            }
            scores
        }
        (SelectorKind::Knn, SelectorParams::Knn { params }) => {
            let std = model.standardization.as_ref().ok_or_else(|| {
                Error::DegenerateInput("knn selector lacks standardization".into())
            })?;
            params.predict(&standardized_input(std, mask, input.descriptor))?
        }
        (SelectorKind::Tree, SelectorParams::Tree { root }) => {
            root.predict(&raw_input(input.descriptor)).to_vec()
        }
        (SelectorKind::MimicTree, SelectorParams::Tree { root }) => {
            root.predict(&mimic_input(input.descriptor)).to_vec()
        }
        (SelectorKind::GlobalBest, SelectorParams::GlobalBest { index }) => one_hot(*index, m),
        (SelectorKind::Random, SelectorParams::Random { seed }) => {
            // Hash the descriptor so the draw is a pure function of
            // (selector seed, task) — stable under evaluation order.
            let mut bytes = Vec::with_capacity(48);
            for v in input.descriptor.to_features() {
                bytes.extend_from_slice(&v.to_bits().to_le_bytes());
            }
            let mut rng =
                rng_from_seed(derive_seed(*seed, &[stream::EVAL, fnv1a64(&bytes)]));
            (0..m).map(|_| rng.gen::<f64>()).collect()
        }
        (SelectorKind::Oracle, SelectorParams::Oracle) => {
            let perf = input.perf.ok_or_else(|| {
                Error::DegenerateInput(
                    "oracle selector needs the true per-algorithm error row".into(),
                )
            })?;
            if perf.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: perf.len(),
                    context: "oracle error row".into(),
                });
            }
            perf.iter().map(|&p| -p).collect()
        }
        (kind, _) => {
            return Err(Error::DegenerateInput(format!(
                "selector artifact corrupt: {} kind with mismatched parameters",
                kind.name()
            )))
        }
    };
    debug_assert_eq!(scores.len(), m);
    Ok(scores)
}

impl SelectorModel {
    /// Score and select in one step. Under `BinaryRandom`, logit-scale
    /// scores (dense classifiers) pass through the sigmoid first so the
    /// 0.5 threshold reads as a probability.
    pub fn select(
        &self,
        input: PredictInput<'_>,
        rule: SelectionRule,
        rng: Option<&mut Rng>,
    ) -> Result<usize> {
        let mut scores = predict_scores(self, input)?;
        if rule == SelectionRule::BinaryRandom
            && matches!(
                self.kind,
                SelectorKind::MlpMultilabel | SelectorKind::Linear
            )
        {
            for s in &mut scores {
                *s = sigmoid(*s);
            }
        }
        select_algorithm(&scores, rule, rng)
    }

    /// Err when this artifact was trained on a different meta file.
    pub fn check_meta(&self, meta: &MetaDataset) -> Result<()> {
        let got = format!("{:016x}", meta.fingerprint());
        if got != self.meta_fingerprint {
            return Err(Error::FingerprintMismatch {
                context: "selector artifact vs meta dataset".into(),
                expected: self.meta_fingerprint.clone(),
                got,
            });
        }
        Ok(())
    }

    /// Write the artifact as pretty JSON (atomic: tmp file + rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::io(path.display().to_string(), std::io::Error::other(e)))?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, &bytes).map_err(|e| Error::io(tmp.display().to_string(), e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SelectorModel> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })
    }
}
