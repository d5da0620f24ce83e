//! Evaluation and analysis of trained selector policies.
//!
//! The entry point is [`evaluate`]: it trains each requested selector
//! variant once per seed on the meta-train split, selects an algorithm
//! for every meta-eval task, and aggregates zero-one accuracy and the
//! realized worst-group error into an [`EvalReport`]. Realized error is
//! looked up in the precomputed per-task error rows — candidates are
//! never retrained here.
//!
//! The analyses around it answer "why":
//! * [`perf_gap_distribution`] — per-task error differences between two
//!   candidate algorithms;
//! * [`scaling_curve`] — selector accuracy as a function of meta-train
//!   subsample size;
//! * [`leave_one_descriptor_out`] — accuracy drop when one descriptor
//!   feature is hidden (retrained or masked at inference);
//! * [`pairwise_selector_analysis`] — the same ablation for a selector
//!   restricted to a two-algorithm choice;
//! * [`export::export_tree`] — DOT and plain-text rules for tree
//!   selectors, with a re-evaluation check.
//!
//! Every analysis is a deterministic function of the meta-dataset, the
//! configuration, and the seed list; sweep points are independent jobs
//! so they parallelize over [`Parallelism`], and report assembly stays
//! sequential.

pub mod export;

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmId, NUM_ALGORITHMS};
use crate::error::{Error, Result};
use crate::metadataset::{
    split_meta, suitability_labels, MetaDataset, MetaRecord, Standardization, FEATURE_NAMES,
};
use crate::par::{map_ordered, Parallelism};
use crate::rng::{derive_seed, fnv1a64, rng_from_seed, stream};
use crate::selectors::{
    train_net, train_selector_on, LossHead, Net, PredictInput, SelectionRule, SelectorConfig,
    SelectorKind, SelectorModel, NAIVE_MASK,
};

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

/// Mean ± population standard deviation over selector seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Population statistics (divide by `n`, not `n − 1`): the seed list
    /// is the whole population being reported, not a sample from one.
    pub fn from_values(values: &[f64]) -> Stat {
        assert!(!values.is_empty(), "statistics need at least one value");
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Stat {
            mean,
            std: var.sqrt(),
        }
    }
}

// ---------------------------------------------------------------------------
// Core metrics
// ---------------------------------------------------------------------------

/// Fraction of tasks whose selected algorithm carries suitability
/// label 1. `selections` aligns with `idx` into `meta.records`.
pub fn zero_one_accuracy(selections: &[usize], meta: &MetaDataset, idx: &[usize]) -> Result<f64> {
    check_selection_shape(selections, idx)?;
    let mut hits = 0usize;
    for (&sel, &i) in selections.iter().zip(idx) {
        let rec = &meta.records[i];
        check_algorithm_index(sel, rec)?;
        hits += usize::from(rec.labels[sel] == 1);
    }
    Ok(hits as f64 / selections.len() as f64)
}

/// Mean precomputed worst-group error of the selected algorithms.
/// Candidates are never retrained: the error is read from `perf`.
pub fn realized_wg_error(selections: &[usize], meta: &MetaDataset, idx: &[usize]) -> Result<f64> {
    check_selection_shape(selections, idx)?;
    let mut total = 0.0;
    for (&sel, &i) in selections.iter().zip(idx) {
        let rec = &meta.records[i];
        check_algorithm_index(sel, rec)?;
        total += rec.perf[sel];
    }
    Ok(total / selections.len() as f64)
}

fn check_selection_shape(selections: &[usize], idx: &[usize]) -> Result<()> {
    if selections.is_empty() {
        return Err(Error::DegenerateInput(
            "metric needs at least one selection".into(),
        ));
    }
    if selections.len() != idx.len() {
        return Err(Error::DimensionMismatch {
            expected: idx.len(),
            got: selections.len(),
            context: "selections vs evaluated tasks".into(),
        });
    }
    Ok(())
}

fn check_algorithm_index(sel: usize, rec: &MetaRecord) -> Result<()> {
    if sel >= rec.perf.len() {
        return Err(Error::DimensionMismatch {
            expected: rec.perf.len(),
            got: sel,
            context: format!("selected algorithm index on task {}", rec.task_id),
        });
    }
    Ok(())
}

/// Fraction of `idx` tasks on which two selectors pick the same
/// algorithm under the deterministic top-logit rule.
pub fn selection_agreement(
    a: &SelectorModel,
    b: &SelectorModel,
    meta: &MetaDataset,
    idx: &[usize],
) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::DegenerateInput(
            "agreement needs at least one task".into(),
        ));
    }
    let mut same = 0usize;
    for &i in idx {
        let rec = &meta.records[i];
        let input = PredictInput {
            descriptor: &rec.descriptor,
            perf: Some(&rec.perf),
        };
        let pa = a.select(input, SelectionRule::TopLogit, None)?;
        let pb = b.select(input, SelectionRule::TopLogit, None)?;
        same += usize::from(pa == pb);
    }
    Ok(same as f64 / idx.len() as f64)
}

// ---------------------------------------------------------------------------
// Evaluation harness
// ---------------------------------------------------------------------------

/// One selector to evaluate: a kind plus an optional feature mask.
/// The mask is how the naive baseline (only `n` and `d` visible) and
/// the leave-one-descriptor-out ablation enter the same harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorVariant {
    /// Row label in reports; defaults to the kind name.
    pub label: String,
    pub kind: SelectorKind,
    /// `true` hides the feature. `None` inherits the harness default.
    pub feature_mask: Option<[bool; 6]>,
}

impl SelectorVariant {
    pub fn of(kind: SelectorKind) -> SelectorVariant {
        SelectorVariant {
            label: kind.name().to_string(),
            kind,
            feature_mask: None,
        }
    }

    /// The naive baseline: a multi-label network that only sees the
    /// trivial dataset properties (n, d).
    pub fn naive() -> SelectorVariant {
        SelectorVariant {
            label: "naive".to_string(),
            kind: SelectorKind::MlpMultilabel,
            feature_mask: Some(NAIVE_MASK),
        }
    }

    /// The headline comparison set: reference policies (oracle, random,
    /// global best), the naive baseline, and the learned selectors.
    pub fn headline() -> Vec<SelectorVariant> {
        vec![
            SelectorVariant::of(SelectorKind::Oracle),
            SelectorVariant::of(SelectorKind::Random),
            SelectorVariant::of(SelectorKind::GlobalBest),
            SelectorVariant::naive(),
            SelectorVariant::of(SelectorKind::Regression),
            SelectorVariant::of(SelectorKind::MlpMultilabel),
        ]
    }

    /// Alternative selector families compared against the multi-label
    /// network: linear, k-NN, decision tree, and the mimic tree.
    pub fn alternatives() -> Vec<SelectorVariant> {
        vec![
            SelectorVariant::of(SelectorKind::MlpMultilabel),
            SelectorVariant::of(SelectorKind::Linear),
            SelectorVariant::of(SelectorKind::Knn),
            SelectorVariant::of(SelectorKind::Tree),
            SelectorVariant::of(SelectorKind::MimicTree),
        ]
    }
}

/// Optional restriction of the split for size-generalization studies:
/// train the selector only on small tasks, evaluate only on large ones.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFilter {
    /// Keep meta-train records with `n ≤ meta_train_max_n`.
    pub meta_train_max_n: Option<usize>,
    /// Keep meta-eval records with `n ≥ eval_min_n`.
    pub eval_min_n: Option<usize>,
}

impl SplitFilter {
    fn apply(&self, meta: &MetaDataset, train: &mut Vec<usize>, eval: &mut Vec<usize>) {
        if let Some(max_n) = self.meta_train_max_n {
            train.retain(|&i| meta.records[i].descriptor.n <= max_n);
        }
        if let Some(min_n) = self.eval_min_n {
            eval.retain(|&i| meta.records[i].descriptor.n >= min_n);
        }
    }
}

/// Shared evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Selector training seeds; reported numbers average over these.
    pub seeds: Vec<u64>,
    /// How a score vector becomes a choice at test time.
    pub rule: SelectionRule,
    /// Selector hyper-parameters (`base.seed` is replaced per seed).
    pub base: SelectorConfig,
    pub filter: SplitFilter,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            seeds: selector_seeds(0, 3),
            rule: SelectionRule::TopLogit,
            base: SelectorConfig::default(),
            filter: SplitFilter::default(),
        }
    }
}

/// `count` selector seeds derived from a master seed, so evaluation
/// runs are reproducible from one number.
pub fn selector_seeds(master: u64, count: usize) -> Vec<u64> {
    (0..count as u64)
        .map(|i| derive_seed(master, &[stream::SELECTOR, i]))
        .collect()
}

/// Aggregated results for one selector variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorSummary {
    pub label: String,
    pub kind: SelectorKind,
    pub accuracy: Stat,
    pub realized_wg: Stat,
    pub per_seed_accuracy: Vec<f64>,
    pub per_seed_wg: Vec<f64>,
    /// Fraction of (seed × task) selections that fell on each
    /// algorithm, in candidate order.
    pub selection_fractions: Vec<f64>,
}

/// Which algorithm one selector picked on each eval task for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub selector: String,
    pub seed: u64,
    /// Aligned with [`EvalReport::task_ids`].
    pub selections: Vec<u8>,
}

/// Full evaluation output: per-selector aggregates plus the raw
/// selection trace. Deterministic for fixed inputs, so serialized
/// reports are byte-comparable across reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub epsilon: f64,
    pub rule: SelectionRule,
    pub seeds: Vec<u64>,
    pub train_size: usize,
    pub eval_size: usize,
    /// Meta-eval task ids, aligned with every trace row.
    pub task_ids: Vec<String>,
    pub algorithms: Vec<String>,
    pub selectors: Vec<SelectorSummary>,
    pub trace: Vec<TraceEntry>,
    pub warnings: Vec<String>,
}

struct JobOut {
    selections: Vec<u8>,
    accuracy: f64,
    wg: f64,
    warnings: Vec<String>,
}

/// Train every `variants × seeds` selector on the meta-train split and
/// score its selections on the meta-eval split.
pub fn evaluate(
    meta: &MetaDataset,
    variants: &[SelectorVariant],
    cfg: &EvalConfig,
    par: Parallelism,
) -> Result<EvalReport> {
    meta.validate()?;
    if variants.is_empty() {
        return Err(Error::DegenerateInput(
            "evaluation needs at least one selector variant".into(),
        ));
    }
    if cfg.seeds.is_empty() {
        return Err(Error::DegenerateInput(
            "evaluation needs at least one selector seed".into(),
        ));
    }
    let (train_idx, eval_idx) = filtered_split(meta, &cfg.filter)?;

    let jobs: Vec<(usize, usize)> = (0..variants.len())
        .flat_map(|vi| (0..cfg.seeds.len()).map(move |si| (vi, si)))
        .collect();
    let outputs = map_ordered(par, &jobs, |_, &(vi, si)| -> Result<JobOut> {
        let variant = &variants[vi];
        let seed = cfg.seeds[si];
        let mut scfg = cfg.base.clone();
        scfg.seed = seed;
        if variant.feature_mask.is_some() {
            scfg.feature_mask = variant.feature_mask;
        }
        let trained = train_selector_on(variant.kind, meta, &train_idx, &scfg)?;
        let salt = fnv1a64(variant.label.as_bytes());
        let selections = selections_for(&trained.model, meta, &eval_idx, cfg.rule, seed, salt)?;
        let sel_usize: Vec<usize> = selections.iter().map(|&s| s as usize).collect();
        Ok(JobOut {
            accuracy: zero_one_accuracy(&sel_usize, meta, &eval_idx)?,
            wg: realized_wg_error(&sel_usize, meta, &eval_idx)?,
            selections,
            warnings: trained
                .report
                .warnings
                .iter()
                .map(|w| format!("{} (seed {seed}): {w}", variant.label))
                .collect(),
        })
    });

    let mut selectors = Vec::with_capacity(variants.len());
    let mut trace = Vec::with_capacity(jobs.len());
    let mut warnings = Vec::new();
    let mut outputs = outputs.into_iter();
    for variant in variants {
        let mut accs = Vec::with_capacity(cfg.seeds.len());
        let mut wgs = Vec::with_capacity(cfg.seeds.len());
        let mut counts = vec![0usize; NUM_ALGORITHMS];
        for &seed in &cfg.seeds {
            let out = outputs.next().expect("one output per job")?;
            for &s in &out.selections {
                counts[s as usize] += 1;
            }
            accs.push(out.accuracy);
            wgs.push(out.wg);
            warnings.extend(out.warnings);
            trace.push(TraceEntry {
                selector: variant.label.clone(),
                seed,
                selections: out.selections,
            });
        }
        let total = (cfg.seeds.len() * eval_idx.len()) as f64;
        selectors.push(SelectorSummary {
            label: variant.label.clone(),
            kind: variant.kind,
            accuracy: Stat::from_values(&accs),
            realized_wg: Stat::from_values(&wgs),
            per_seed_accuracy: accs,
            per_seed_wg: wgs,
            selection_fractions: counts.iter().map(|&c| c as f64 / total).collect(),
        });
    }

    Ok(EvalReport {
        epsilon: meta.epsilon,
        rule: cfg.rule,
        seeds: cfg.seeds.clone(),
        train_size: train_idx.len(),
        eval_size: eval_idx.len(),
        task_ids: eval_idx
            .iter()
            .map(|&i| meta.records[i].task_id.clone())
            .collect(),
        algorithms: AlgorithmId::names(),
        selectors,
        trace,
        warnings,
    })
}

fn filtered_split(meta: &MetaDataset, filter: &SplitFilter) -> Result<(Vec<usize>, Vec<usize>)> {
    let (mut train_idx, mut eval_idx) = split_meta(&meta.records);
    filter.apply(meta, &mut train_idx, &mut eval_idx);
    if train_idx.is_empty() || eval_idx.is_empty() {
        return Err(Error::DegenerateInput(format!(
            "split left {} train / {} eval records (size filter {:?})",
            train_idx.len(),
            eval_idx.len(),
            filter
        )));
    }
    Ok((train_idx, eval_idx))
}

/// Deterministic selections for `idx`: the per-task RNG is derived from
/// `(master seed, salt, task id)`, so results do not depend on task
/// order or parallel scheduling.
fn selections_for(
    model: &SelectorModel,
    meta: &MetaDataset,
    idx: &[usize],
    rule: SelectionRule,
    master_seed: u64,
    salt: u64,
) -> Result<Vec<u8>> {
    let mut selections = Vec::with_capacity(idx.len());
    for &i in idx {
        let rec = &meta.records[i];
        let mut rng = rng_from_seed(derive_seed(
            master_seed,
            &[stream::EVAL, salt, fnv1a64(rec.task_id.as_bytes())],
        ));
        let input = PredictInput {
            descriptor: &rec.descriptor,
            perf: Some(&rec.perf),
        };
        let sel = model.select(input, rule, Some(&mut rng))?;
        selections.push(sel as u8);
    }
    Ok(selections)
}

impl EvalReport {
    /// Fixed-width text table: one row per selector, accuracy and
    /// realized worst-group error in percent, and the most frequently
    /// selected algorithm.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "meta-eval tasks: {}   meta-train records: {}   seeds: {:?}   epsilon: {}\n",
            self.eval_size, self.train_size, self.seeds, self.epsilon
        ));
        out.push_str(&format!(
            "{:<16} {:>18} {:>22} {:>14}\n",
            "selector", "accuracy (%)", "realized wg err (%)", "top pick"
        ));
        for s in &self.selectors {
            let top = s
                .selection_fractions
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| self.algorithms[i].as_str())
                .unwrap_or("-");
            out.push_str(&format!(
                "{:<16} {:>10.1} ± {:>4.1} {:>14.2} ± {:>4.2} {:>14}\n",
                s.label,
                100.0 * s.accuracy.mean,
                100.0 * s.accuracy.std,
                100.0 * s.realized_wg.mean,
                100.0 * s.realized_wg.std,
                top
            ));
        }
        out
    }

    /// One CSV row per (selector, seed) with both metrics.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("selector,kind,seed,zero_one_accuracy,realized_wg_error\n");
        for s in &self.selectors {
            for (k, &seed) in self.seeds.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    s.label,
                    s.kind.name(),
                    seed,
                    s.per_seed_accuracy[k],
                    s.per_seed_wg[k]
                ));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Label ablations
// ---------------------------------------------------------------------------

/// Rebuild suitability labels under a different tolerance ε.
pub fn with_epsilon(meta: &MetaDataset, epsilon: f64) -> Result<MetaDataset> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::DegenerateInput(format!(
            "epsilon must be finite and non-negative, got {epsilon}"
        )));
    }
    let mut out = meta.clone();
    out.epsilon = epsilon;
    for rec in &mut out.records {
        rec.labels = suitability_labels(&rec.perf, epsilon);
    }
    out.validate()?;
    Ok(out)
}

/// Score candidates by averaged-group error instead of worst-group
/// error: the `perf` column is replaced by `avg_perf` and labels are
/// rebuilt. `avg_perf` and the ensemble diagnostic stay untouched.
pub fn with_averaged_metric(meta: &MetaDataset) -> Result<MetaDataset> {
    let mut out = meta.clone();
    for rec in &mut out.records {
        rec.perf = rec.avg_perf.clone();
        rec.labels = suitability_labels(&rec.perf, out.epsilon);
    }
    out.validate()?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Performance-gap distribution
// ---------------------------------------------------------------------------

/// Descriptor predicate for gap studies: keeps tasks whose most extreme
/// shift degree is at least `min_degree_extremity` away from the
/// balanced point 0.5 and whose availability ratio is at least `min_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftFilter {
    pub min_degree_extremity: f64,
    pub min_r: f64,
}

impl ShiftFilter {
    /// Strong-shift regime: some degree at 0.1/0.9 or beyond, scarce
    /// auxiliary-negative data (r ≥ 10).
    pub fn strong() -> ShiftFilter {
        ShiftFilter {
            min_degree_extremity: 0.4,
            min_r: 10.0,
        }
    }

    pub fn matches(&self, d: &crate::metadataset::Descriptor) -> bool {
        let ext = (d.d_sc - 0.5)
            .abs()
            .max((d.d_ls - 0.5).abs())
            .max((d.d_cs - 0.5).abs());
        ext >= self.min_degree_extremity && d.r >= self.min_r
    }
}

/// Per-task differences `perf[a] − perf[b]` across (optionally
/// filtered) meta records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapDistribution {
    pub algorithm_a: String,
    pub algorithm_b: String,
    pub task_ids: Vec<String>,
    pub gaps: Vec<f64>,
}

impl GapDistribution {
    pub fn median(&self) -> Option<f64> {
        if self.gaps.is_empty() {
            return None;
        }
        let mut sorted = self.gaps.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        Some(if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "task_id,wg_{}_minus_wg_{}\n",
            self.algorithm_a, self.algorithm_b
        );
        for (id, gap) in self.task_ids.iter().zip(&self.gaps) {
            out.push_str(&format!("{id},{gap}\n"));
        }
        out
    }
}

/// Distribution of `perf[a] − perf[b]` over all meta records passing
/// `filter`. The degenerate pair `(m, m)` is allowed and yields zeros.
pub fn perf_gap_distribution(
    meta: &MetaDataset,
    a: AlgorithmId,
    b: AlgorithmId,
    filter: Option<&ShiftFilter>,
) -> Result<GapDistribution> {
    meta.validate()?;
    let (ai, bi) = (a.index(), b.index());
    let mut task_ids = Vec::new();
    let mut gaps = Vec::new();
    for rec in &meta.records {
        if filter.is_some_and(|f| !f.matches(&rec.descriptor)) {
            continue;
        }
        task_ids.push(rec.task_id.clone());
        gaps.push(rec.perf[ai] - rec.perf[bi]);
    }
    Ok(GapDistribution {
        algorithm_a: a.name().to_string(),
        algorithm_b: b.name().to_string(),
        task_ids,
        gaps,
    })
}

// ---------------------------------------------------------------------------
// Scaling curve
// ---------------------------------------------------------------------------

/// Accuracy of the multi-label selector at one meta-train subsample
/// size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub requested: usize,
    /// `min(requested, available)`; a clamp is reported as a warning.
    pub used: usize,
    pub accuracy: Stat,
    pub per_seed_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCurve {
    pub points: Vec<ScalingPoint>,
    pub eval_size: usize,
    pub warnings: Vec<String>,
}

impl ScalingCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("requested,used,accuracy_mean,accuracy_std\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.requested, p.used, p.accuracy.mean, p.accuracy.std
            ));
        }
        out
    }
}

/// Train the multi-label selector on random meta-train subsamples of
/// each requested size and score it on the fixed meta-eval split.
/// Subsampled indices are re-sorted into dataset order, so a full-size
/// "subsample" reproduces the headline run exactly.
pub fn scaling_curve(
    meta: &MetaDataset,
    sizes: &[usize],
    cfg: &EvalConfig,
    par: Parallelism,
) -> Result<ScalingCurve> {
    meta.validate()?;
    if sizes.is_empty() {
        return Err(Error::DegenerateInput(
            "scaling curve needs at least one subsample size".into(),
        ));
    }
    if cfg.seeds.is_empty() {
        return Err(Error::DegenerateInput(
            "scaling curve needs at least one selector seed".into(),
        ));
    }
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::DegenerateInput(
            "subsample sizes must be positive".into(),
        ));
    }
    let (train_idx, eval_idx) = filtered_split(meta, &cfg.filter)?;

    let mut warnings = Vec::new();
    for &size in sizes {
        if size > train_idx.len() {
            warnings.push(format!(
                "requested subsample {size} exceeds the {} available meta-train records; clamped",
                train_idx.len()
            ));
        }
    }

    let jobs: Vec<(usize, usize)> = (0..sizes.len())
        .flat_map(|pi| (0..cfg.seeds.len()).map(move |si| (pi, si)))
        .collect();
    let outputs = map_ordered(par, &jobs, |_, &(pi, si)| -> Result<f64> {
        let seed = cfg.seeds[si];
        let subset = subsample_sorted(&train_idx, sizes[pi], seed);
        let mut scfg = cfg.base.clone();
        scfg.seed = seed;
        let trained = train_selector_on(SelectorKind::MlpMultilabel, meta, &subset, &scfg)?;
        let salt = fnv1a64(format!("scaling:{}", sizes[pi]).as_bytes());
        let selections =
            selections_for(&trained.model, meta, &eval_idx, cfg.rule, seed, salt)?;
        let sel: Vec<usize> = selections.iter().map(|&s| s as usize).collect();
        zero_one_accuracy(&sel, meta, &eval_idx)
    });

    let mut outputs = outputs.into_iter();
    let mut points = Vec::with_capacity(sizes.len());
    for &requested in sizes {
        let mut accs = Vec::with_capacity(cfg.seeds.len());
        for _ in &cfg.seeds {
            accs.push(outputs.next().expect("one output per job")?);
        }
        points.push(ScalingPoint {
            requested,
            used: requested.min(train_idx.len()),
            accuracy: Stat::from_values(&accs),
            per_seed_accuracy: accs,
        });
    }
    Ok(ScalingCurve {
        points,
        eval_size: eval_idx.len(),
        warnings,
    })
}

/// Choose `size` indices without replacement, then restore dataset
/// order so downstream training is order-stable. `size ≥ len` returns
/// the index list unchanged.
fn subsample_sorted(idx: &[usize], size: usize, seed: u64) -> Vec<usize> {
    if size >= idx.len() {
        return idx.to_vec();
    }
    use rand::seq::SliceRandom;
    let mut rng = rng_from_seed(derive_seed(seed, &[stream::ANALYSIS, size as u64]));
    let mut subset: Vec<usize> = idx.choose_multiple(&mut rng, size).copied().collect();
    subset.sort_unstable();
    subset
}

// ---------------------------------------------------------------------------
// Leave-one-descriptor-out
// ---------------------------------------------------------------------------

/// How a descriptor feature is hidden from the selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Retrain the selector with the feature hidden during training and
    /// inference (the default; measures the information's full value).
    Retrain,
    /// Keep the full-descriptor selector and replace the feature by its
    /// meta-train mean at inference only.
    MaskToMean,
}

/// Accuracy cost of hiding one descriptor feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDrop {
    pub feature: String,
    pub masked_accuracy: Stat,
    /// Per-seed `full accuracy − masked accuracy`, aggregated.
    pub drop: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LodoReport {
    pub mode: MaskMode,
    /// Full-descriptor accuracy the drops are measured against.
    pub baseline_accuracy: Stat,
    pub drops: Vec<FeatureDrop>,
    pub warnings: Vec<String>,
}

impl LodoReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,masked_accuracy_mean,masked_accuracy_std,drop_mean,drop_std\n");
        for d in &self.drops {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                d.feature, d.masked_accuracy.mean, d.masked_accuracy.std, d.drop.mean, d.drop.std
            ));
        }
        out
    }
}

/// Importance of each descriptor feature to the multi-label selector:
/// the accuracy drop when that feature is hidden.
pub fn leave_one_descriptor_out(
    meta: &MetaDataset,
    cfg: &EvalConfig,
    mode: MaskMode,
    par: Parallelism,
) -> Result<LodoReport> {
    meta.validate()?;
    if cfg.seeds.is_empty() {
        return Err(Error::DegenerateInput(
            "ablation needs at least one selector seed".into(),
        ));
    }
    let (train_idx, eval_idx) = filtered_split(meta, &cfg.filter)?;

    // Baseline models, one per seed, full descriptor.
    let baselines = map_ordered(par, &cfg.seeds, |_, &seed| -> Result<SelectorModel> {
        let mut scfg = cfg.base.clone();
        scfg.seed = seed;
        scfg.feature_mask = None;
        Ok(train_selector_on(SelectorKind::MlpMultilabel, meta, &train_idx, &scfg)?.model)
    });
    let baselines: Vec<SelectorModel> = baselines.into_iter().collect::<Result<_>>()?;
    let mut baseline_accs = Vec::with_capacity(cfg.seeds.len());
    for (model, &seed) in baselines.iter().zip(&cfg.seeds) {
        let salt = fnv1a64(b"lodo:baseline");
        let sels = selections_for(model, meta, &eval_idx, cfg.rule, seed, salt)?;
        let sels: Vec<usize> = sels.iter().map(|&s| s as usize).collect();
        baseline_accs.push(zero_one_accuracy(&sels, meta, &eval_idx)?);
    }

    let jobs: Vec<(usize, usize)> = (0..6)
        .flat_map(|f| (0..cfg.seeds.len()).map(move |si| (f, si)))
        .collect();
    let outputs = map_ordered(par, &jobs, |_, &(f, si)| -> Result<f64> {
        let seed = cfg.seeds[si];
        let mut mask = [false; 6];
        mask[f] = true;
        let model = match mode {
            MaskMode::Retrain => {
                let mut scfg = cfg.base.clone();
                scfg.seed = seed;
                scfg.feature_mask = Some(mask);
                train_selector_on(SelectorKind::MlpMultilabel, meta, &train_idx, &scfg)?.model
            }
            MaskMode::MaskToMean => {
                let mut model = baselines[si].clone();
                model.config.feature_mask = Some(mask);
                model
            }
        };
        let salt = fnv1a64(format!("lodo:{f}").as_bytes());
        let sels = selections_for(&model, meta, &eval_idx, cfg.rule, seed, salt)?;
        let sels: Vec<usize> = sels.iter().map(|&s| s as usize).collect();
        zero_one_accuracy(&sels, meta, &eval_idx)
    });

    let mut outputs = outputs.into_iter();
    let mut drops = Vec::with_capacity(6);
    for feature in FEATURE_NAMES {
        let mut masked = Vec::with_capacity(cfg.seeds.len());
        let mut deltas = Vec::with_capacity(cfg.seeds.len());
        for (si, _) in cfg.seeds.iter().enumerate() {
            let acc = outputs.next().expect("one output per job")?;
            masked.push(acc);
            deltas.push(baseline_accs[si] - acc);
        }
        drops.push(FeatureDrop {
            feature: feature.to_string(),
            masked_accuracy: Stat::from_values(&masked),
            drop: Stat::from_values(&deltas),
        });
    }
    Ok(LodoReport {
        mode,
        baseline_accuracy: Stat::from_values(&baseline_accs),
        drops,
        warnings: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Pairwise selector analysis
// ---------------------------------------------------------------------------

/// Feature-importance profile of a selector restricted to choosing
/// between two candidate algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseReport {
    pub algorithm_a: String,
    pub algorithm_b: String,
    pub mode: MaskMode,
    pub baseline_accuracy: Stat,
    pub drops: Vec<FeatureDrop>,
}

impl PairwiseReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,masked_accuracy_mean,masked_accuracy_std,drop_mean,drop_std\n");
        for d in &self.drops {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                d.feature, d.masked_accuracy.mean, d.masked_accuracy.std, d.drop.mean, d.drop.std
            ));
        }
        out
    }
}

/// Restrict the meta-dataset to two algorithms' error columns, rebuild
/// suitability labels on the pair with the dataset ε, train a two-output
/// network, and measure leave-one-descriptor-out drops.
pub fn pairwise_selector_analysis(
    meta: &MetaDataset,
    a: AlgorithmId,
    b: AlgorithmId,
    cfg: &EvalConfig,
    mode: MaskMode,
    par: Parallelism,
) -> Result<PairwiseReport> {
    meta.validate()?;
    if a == b {
        return Err(Error::DegenerateInput(format!(
            "pairwise analysis needs two distinct algorithms, got {} twice",
            a.name()
        )));
    }
    if cfg.seeds.is_empty() {
        return Err(Error::DegenerateInput(
            "ablation needs at least one selector seed".into(),
        ));
    }
    let (train_idx, eval_idx) = filtered_split(meta, &cfg.filter)?;
    if train_idx.len() < 2 {
        return Err(Error::DegenerateInput(
            "pairwise analysis needs at least two meta-train records".into(),
        ));
    }

    // Pair-restricted labels for every record, in record order.
    let (ai, bi) = (a.index(), b.index());
    let labels: Vec<[f64; 2]> = meta
        .records
        .iter()
        .map(|rec| {
            let l = suitability_labels(&[rec.perf[ai], rec.perf[bi]], meta.epsilon);
            [f64::from(l[0]), f64::from(l[1])]
        })
        .collect();
    debug_assert!(
        labels.iter().all(|l| l[0] + l[1] >= 1.0),
        "pair restriction keeps at least one positive per record"
    );
    let std = Standardization::fit(&meta.records, &train_idx)?;
    let sizes = cfg.base.mlp.sizes(6, 2);

    // mask index 6 = no feature hidden. The net seed depends only on
    // the pair, not the mask, so retrained ablations isolate the
    // information removal instead of re-rolling the initialization.
    let pair_tag = fnv1a64(format!("pair:{}:{}", a.name(), b.name()).as_bytes());
    let train_one = |mask_feature: usize, seed: u64| -> Result<Net> {
        let mask = pair_mask(mask_feature);
        let (x, y) = pair_xy(meta, &train_idx, &std, mask.as_ref(), &labels);
        let net_seed = derive_seed(seed, &[stream::SELECTOR, pair_tag]);
        let (net, _) = train_net(
            &sizes,
            &x,
            &y,
            train_idx.len(),
            LossHead::Bce,
            &cfg.base.net_train,
            net_seed,
        )?;
        Ok(net)
    };
    let pair_accuracy = |net: &Net, mask_feature: usize| -> Result<f64> {
        let mask = pair_mask(mask_feature);
        let mut hits = 0usize;
        for &i in &eval_idx {
            let z = pair_input(&std, mask.as_ref(), &meta.records[i]);
            let scores = net.forward(&z)?;
            let pick = usize::from(scores[1] > scores[0]); // first max wins ties
            hits += usize::from(labels[i][pick] == 1.0);
        }
        Ok(hits as f64 / eval_idx.len() as f64)
    };

    // Baselines (unmasked), one per seed.
    let baselines = map_ordered(par, &cfg.seeds, |_, &seed| train_one(6, seed));
    let baselines: Vec<Net> = baselines.into_iter().collect::<Result<_>>()?;
    let mut baseline_accs = Vec::with_capacity(cfg.seeds.len());
    for net in &baselines {
        baseline_accs.push(pair_accuracy(net, 6)?);
    }

    let jobs: Vec<(usize, usize)> = (0..6)
        .flat_map(|f| (0..cfg.seeds.len()).map(move |si| (f, si)))
        .collect();
    let outputs = map_ordered(par, &jobs, |_, &(f, si)| -> Result<f64> {
        match mode {
            MaskMode::Retrain => pair_accuracy(&train_one(f, cfg.seeds[si])?, f),
            MaskMode::MaskToMean => pair_accuracy(&baselines[si], f),
        }
    });

    let mut outputs = outputs.into_iter();
    let mut drops = Vec::with_capacity(6);
    for feature in FEATURE_NAMES {
        let mut masked = Vec::with_capacity(cfg.seeds.len());
        let mut deltas = Vec::with_capacity(cfg.seeds.len());
        for (si, _) in cfg.seeds.iter().enumerate() {
            let acc = outputs.next().expect("one output per job")?;
            masked.push(acc);
            deltas.push(baseline_accs[si] - acc);
        }
        drops.push(FeatureDrop {
            feature: feature.to_string(),
            masked_accuracy: Stat::from_values(&masked),
            drop: Stat::from_values(&deltas),
        });
    }
    Ok(PairwiseReport {
        algorithm_a: a.name().to_string(),
        algorithm_b: b.name().to_string(),
        mode,
        baseline_accuracy: Stat::from_values(&baseline_accs),
        drops,
    })
}

fn pair_mask(feature: usize) -> Option<[bool; 6]> {
    (feature < 6).then(|| {
        let mut m = [false; 6];
        m[feature] = true;
        m
    })
}

fn pair_input(std: &Standardization, mask: Option<&[bool; 6]>, rec: &MetaRecord) -> Vec<f64> {
    let mut z = std.apply(&rec.descriptor).to_vec();
    if let Some(mask) = mask {
        for (v, &hidden) in z.iter_mut().zip(mask) {
            if hidden {
                *v = 0.0; // train mean in standardized coordinates
            }
        }
    }
    z
}

fn pair_xy(
    meta: &MetaDataset,
    idx: &[usize],
    std: &Standardization,
    mask: Option<&[bool; 6]>,
    labels: &[[f64; 2]],
) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(idx.len() * 6);
    let mut y = Vec::with_capacity(idx.len() * 2);
    for &i in idx {
        x.extend(pair_input(std, mask, &meta.records[i]));
        y.extend(labels[i]);
    }
    (x, y)
}

#[cfg(test)]
mod tests;
