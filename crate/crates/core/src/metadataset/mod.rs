//! The meta-dataset: one record per task, pairing a six-number dataset
//! descriptor with the measured worst-group error of every candidate
//! algorithm and the ε-suitability labels derived from those errors.

mod estimate;
mod io;

pub use estimate::{
    compute_descriptor_estimated, compute_descriptor_oracle, estimate_attributes,
    estimate_availability, two_means, AttributeEstimate, DescriptorFlags, KMeans,
};
pub use io::{load_meta, load_specs, save_failures, save_meta, save_specs, ResumeCache};

use serde::{Deserialize, Serialize};

use crate::algorithms::{
    group_errors, train_model, uniform_ensemble, worst_group_error, AlgorithmId, LinearModel,
    TrainConfig, NUM_ALGORITHMS,
};
use crate::error::{Error, Result};
use crate::par::{map_ordered, Parallelism};
use crate::rng::{derive_seed, fnv1a64, rng_from_seed, splitmix64, stream};
use crate::shiftgen::{
    generate_synthetic_task, sample_degrees, DegreeMode, ShiftDegrees, TaskDataset,
};

/// On-disk schema version for meta-dataset files.
pub const SCHEMA_VERSION: u32 = 1;

/// Default suitability threshold: an algorithm is suitable when its
/// worst-group error is within ε of the task's best algorithm.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Fraction of records routed to the meta-train split.
pub const TRAIN_FRACTION: f64 = 0.8;

/// Descriptor feature order used everywhere a descriptor becomes a
/// numeric vector.
pub const FEATURE_NAMES: [&str; 6] = ["d_sc", "d_ls", "d_cs", "r", "n", "d"];

/// The six per-task statistics a selector sees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub d_sc: f64,
    pub d_ls: f64,
    pub d_cs: f64,
    /// Availability of the spurious feature (generative or estimated).
    pub r: f64,
    /// Train-set size.
    pub n: usize,
    /// Per-block feature dimension (synthetic) or feature length (pool).
    pub d: usize,
}

impl Descriptor {
    /// Raw feature vector in [`FEATURE_NAMES`] order.
    pub fn to_features(&self) -> [f64; 6] {
        [
            self.d_sc,
            self.d_ls,
            self.d_cs,
            self.r,
            self.n as f64,
            self.d as f64,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let degs = [self.d_sc, self.d_ls, self.d_cs];
        if degs.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::DegenerateInput(format!(
                "descriptor degrees out of [0,1]: {degs:?}"
            )));
        }
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::DegenerateInput(format!(
                "descriptor r must be positive and finite, got {}",
                self.r
            )));
        }
        if self.n == 0 || self.d == 0 {
            return Err(Error::DegenerateInput(
                "descriptor n and d must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Canonical attribute convention: the attribute value held by the
    /// larger population is +1, i.e. `d_cs ≥ 0.5`. Estimated descriptors
    /// satisfy this by construction; applying the same convention to
    /// ground-truth descriptors keeps the two paths comparable. Flipping
    /// the attribute maps `d_sc → 1−d_sc` and `d_cs → 1−d_cs`.
    pub fn canonicalized(&self) -> Descriptor {
        if self.d_cs < 0.5 {
            Descriptor {
                d_sc: 1.0 - self.d_sc,
                d_cs: 1.0 - self.d_cs,
                ..*self
            }
        } else {
            *self
        }
    }
}

/// One task's outcome: descriptor, per-algorithm errors, labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaRecord {
    pub task_id: String,
    pub descriptor: Descriptor,
    /// Worst-group error per algorithm, in `AlgorithmId::ALL` order.
    pub perf: Vec<f64>,
    /// Averaged-group error per algorithm (metric ablation).
    pub avg_perf: Vec<f64>,
    /// Worst-group error of the uniform ensemble of all candidates.
    pub ensemble_wg: f64,
    /// Suitability bits under the dataset's ε, aligned with `perf`.
    pub labels: Vec<u8>,
}

impl MetaRecord {
    pub fn validate(&self, epsilon: f64) -> Result<()> {
        let m = NUM_ALGORITHMS;
        if self.perf.len() != m || self.labels.len() != m || self.avg_perf.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.perf.len().min(self.labels.len()).min(self.avg_perf.len()),
                context: format!("meta record {}", self.task_id),
            });
        }
        self.descriptor.validate()?;
        if suitability_labels(&self.perf, epsilon) != self.labels {
            return Err(Error::DegenerateInput(format!(
                "labels of record {} inconsistent with perf under epsilon {epsilon}",
                self.task_id
            )));
        }
        if !self.labels.contains(&1) {
            return Err(Error::DegenerateInput(format!(
                "record {} has no suitable algorithm",
                self.task_id
            )));
        }
        Ok(())
    }
}

/// Per-feature affine normalization fitted on the meta-train split.
/// `r` and `n` pass through log10 before z-scoring because they span
/// orders of magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: [f64; 6],
    pub std: [f64; 6],
    /// Features with zero spread on the train split; they standardize
    /// to 0 and carry no signal.
    pub dropped: [bool; 6],
}

/// Indices of features that are log10-transformed before z-scoring.
const LOG_FEATURES: [usize; 2] = [3, 4]; // r, n

fn pre_transform(mut raw: [f64; 6]) -> [f64; 6] {
    for i in LOG_FEATURES {
        raw[i] = raw[i].log10();
    }
    raw
}

impl Standardization {
    /// Fit mean/std on the pre-transformed features of `records[idx]`.
    pub fn fit(records: &[MetaRecord], idx: &[usize]) -> Result<Standardization> {
        if idx.is_empty() {
            return Err(Error::DegenerateInput(
                "cannot fit standardization on an empty split".into(),
            ));
        }
        let count = idx.len() as f64;
        let mut mean = [0.0; 6];
        for &i in idx {
            let f = pre_transform(records[i].descriptor.to_features());
            for j in 0..6 {
                mean[j] += f[j];
            }
        }
        for m in &mut mean {
            *m /= count;
        }
        // Two-pass variance: exact zeros for constant features.
        let mut var = [0.0; 6];
        for &i in idx {
            let f = pre_transform(records[i].descriptor.to_features());
            for j in 0..6 {
                var[j] += (f[j] - mean[j]) * (f[j] - mean[j]);
            }
        }
        let mut std = [0.0; 6];
        let mut dropped = [false; 6];
        for j in 0..6 {
            std[j] = (var[j] / count).sqrt();
            if std[j] <= 1e-12 * (1.0 + mean[j].abs()) {
                dropped[j] = true;
                std[j] = 1.0; // keeps apply() finite; output is 0 via mean
            }
        }
        Ok(Standardization { mean, std, dropped })
    }

    /// Standardize a descriptor into selector input space.
    pub fn apply(&self, descriptor: &Descriptor) -> [f64; 6] {
        let f = pre_transform(descriptor.to_features());
        let mut z = [0.0; 6];
        for j in 0..6 {
            z[j] = if self.dropped[j] {
                0.0
            } else {
                (f[j] - self.mean[j]) / self.std[j]
            };
        }
        z
    }

    /// Inverse of [`apply`] on the pre-transformed scale (dropped
    /// features come back as their train mean).
    pub fn invert(&self, z: &[f64; 6]) -> [f64; 6] {
        let mut f = [0.0; 6];
        for j in 0..6 {
            f[j] = if self.dropped[j] {
                self.mean[j]
            } else {
                z[j] * self.std[j] + self.mean[j]
            };
        }
        f
    }
}

/// The dataset of datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaDataset {
    pub schema_version: u32,
    pub epsilon: f64,
    /// Algorithm column ordering, for audit; always `AlgorithmId` order.
    pub algorithms: Vec<String>,
    /// Fitted on the meta-train split during assembly.
    pub standardization: Option<Standardization>,
    pub records: Vec<MetaRecord>,
}

impl MetaDataset {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::DegenerateInput(format!(
                "schema version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        for rec in &self.records {
            rec.validate(self.epsilon)?;
        }
        Ok(())
    }

    /// Content fingerprint used to bind selector artifacts to the meta
    /// file they were trained on.
    pub fn fingerprint(&self) -> u64 {
        let bytes = serde_json::to_vec(self).expect("meta serializes");
        fnv1a64(&bytes)
    }
}

/// `label_m = 1` iff `perf_m − min(perf) ≤ ε`.
pub fn suitability_labels(perf: &[f64], epsilon: f64) -> Vec<u8> {
    let min = perf.iter().copied().fold(f64::INFINITY, f64::min);
    perf.iter()
        .map(|&p| u8::from(p - min <= epsilon))
        .collect()
}

/// Deterministic 80/20 split keyed by task id (stable under record
/// reordering and resume). Returns (train indices, eval indices).
pub fn split_meta(records: &[MetaRecord]) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut eval = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        let mut h = fnv1a64(rec.task_id.as_bytes());
        let u = splitmix64(&mut h) as f64 / u64::MAX as f64;
        if u < TRAIN_FRACTION {
            train.push(i);
        } else {
            eval.push(i);
        }
    }
    (train, eval)
}

/// A task to materialize: synthetic generation parameters plus identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub n: usize,
    pub d: usize,
    pub r: f64,
    pub degrees: ShiftDegrees,
    pub n_te: usize,
}

impl TaskSpec {
    /// Materialize the task deterministically from the master seed.
    pub fn materialize(&self, master_seed: u64) -> Result<TaskDataset> {
        let seed = derive_seed(master_seed, &[stream::TASK, fnv1a64(self.id.as_bytes())]);
        generate_synthetic_task(self.n, self.d, self.r, &self.degrees, self.n_te, seed)
    }
}

/// Cartesian grid over data statistics × shift degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub sizes: Vec<usize>,
    pub dims: Vec<usize>,
    pub availabilities: Vec<f64>,
    /// Number of uniformly sampled feasible triple-shift settings,
    /// shared across all (n, d, r) combinations.
    pub triples_per_combo: usize,
    /// Explicit single-shift settings appended to every combination.
    pub singles: Vec<ShiftDegrees>,
}

impl GridSpec {
    /// The single-shift value grid: one degree takes a value from this
    /// list, the other two stay at 0.5.
    pub const SINGLE_SHIFT_VALUES: [f64; 9] = [0.01, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99];

    /// Desk-scale grid: 27 combos × (20 triples + 25 single-shift
    /// settings) = 1215 tasks, a 4:1 split of roughly 970/245. The
    /// single-shift extremes (0.01/0.99) are what differentiate the
    /// candidate algorithms: they shrink a group to a handful of
    /// samples, where resampling and reweighting diverge.
    pub fn desk() -> GridSpec {
        GridSpec {
            sizes: vec![200, 500, 1000],
            dims: vec![2, 10, 50],
            availabilities: vec![1.0, 10.0, 100.0],
            triples_per_combo: 20,
            singles: crate::shiftgen::single_shift_settings(&Self::SINGLE_SHIFT_VALUES),
        }
    }

    /// Full-scale grid: 168 combos × (30 triples + 25 singles) = 9240.
    pub fn full() -> GridSpec {
        GridSpec {
            sizes: vec![200, 500, 1000, 2000, 3000, 5000, 10000],
            dims: vec![2, 10, 50, 100],
            availabilities: vec![1.0, 5.0, 10.0, 20.0, 50.0, 100.0],
            triples_per_combo: 30,
            singles: crate::shiftgen::single_shift_settings(&Self::SINGLE_SHIFT_VALUES),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.dims.is_empty() || self.availabilities.is_empty() {
            return Err(Error::DegenerateInput("empty grid axis".into()));
        }
        if self.sizes.iter().any(|&n| n < 4) {
            return Err(Error::DegenerateInput("grid sizes must be ≥ 4".into()));
        }
        if self.availabilities.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::DegenerateInput(
                "grid availabilities must be positive".into(),
            ));
        }
        for s in &self.singles {
            if !s.in_unit_cube() {
                return Err(Error::DegenerateInput(format!(
                    "single-shift setting out of range: {s:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Expand a grid into concrete task specs. The sampled triples are
/// drawn once (from the `DEGREES` stream of the master seed) and reused
/// across every (n, d, r) combination, mirroring how a fixed degree
/// list is combined with the data-statistics grid.
pub fn build_task_specs(grid: &GridSpec, master_seed: u64) -> Result<Vec<TaskSpec>> {
    grid.validate()?;
    let mut rng = rng_from_seed(derive_seed(master_seed, &[stream::DEGREES]));
    let triples: Vec<ShiftDegrees> = (0..grid.triples_per_combo)
        .map(|_| sample_degrees(&mut rng, &DegreeMode::Triple))
        .collect::<Result<_>>()?;
    let mut specs = Vec::new();
    for &n in &grid.sizes {
        for &d in &grid.dims {
            for &r in &grid.availabilities {
                let n_te = n - n % 4;
                for (k, s) in triples.iter().enumerate() {
                    specs.push(TaskSpec {
                        id: format!("n{n}-d{d}-r{r}-tri{k:02}"),
                        n,
                        d,
                        r,
                        degrees: *s,
                        n_te,
                    });
                }
                for (k, s) in grid.singles.iter().enumerate() {
                    specs.push(TaskSpec {
                        id: format!("n{n}-d{d}-r{r}-sgl{k:02}"),
                        n,
                        d,
                        r,
                        degrees: *s,
                        n_te,
                    });
                }
            }
        }
    }
    Ok(specs)
}

/// Which descriptor the records carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptorMode {
    /// Ground-truth degrees (from the realized train histogram) and
    /// generative availability.
    Oracle,
    /// Degrees recomputed from pseudo-attributes (d_ls stays ground
    /// truth) and the availability proxy.
    Estimated,
}

/// Assembly settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyConfig {
    pub seed: u64,
    pub epsilon: f64,
    pub train: TrainConfig,
    pub mode: DescriptorMode,
    #[serde(skip, default)]
    pub parallelism: Parallelism,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        AssemblyConfig {
            seed: 0,
            epsilon: DEFAULT_EPSILON,
            train: TrainConfig::default(),
            mode: DescriptorMode::Oracle,
            parallelism: Parallelism::default(),
        }
    }
}

/// A task that failed during assembly; the sweep continues without it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub task_id: String,
    pub message: String,
}

/// Assembly result: the meta-dataset plus the failure log.
#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyOutcome {
    pub meta: MetaDataset,
    pub failures: Vec<TaskFailure>,
}

/// Materialize one spec, train every algorithm, measure, label.
pub fn build_record(spec: &TaskSpec, cfg: &AssemblyConfig) -> Result<MetaRecord> {
    let task = spec.materialize(cfg.seed)?;
    let id_hash = fnv1a64(spec.id.as_bytes());
    let train_cfg = TrainConfig {
        seed: derive_seed(cfg.seed, &[stream::TASK, id_hash, 1]),
        ..cfg.train.clone()
    };
    let mut perf = Vec::with_capacity(NUM_ALGORITHMS);
    let mut avg_perf = Vec::with_capacity(NUM_ALGORITHMS);
    let mut models: Vec<LinearModel> = Vec::with_capacity(NUM_ALGORITHMS);
    for alg in AlgorithmId::ALL {
        let fitted = train_model(alg, &task, &train_cfg)?;
        let errs = group_errors(&fitted.model, &task.test)?;
        perf.push(errs.worst);
        avg_perf.push(errs.average);
        models.push(fitted.model);
    }
    let ensemble = uniform_ensemble(&models)?;
    let ensemble_wg = worst_group_error(&ensemble, &task.test)?;
    let descriptor = match cfg.mode {
        DescriptorMode::Oracle => compute_descriptor_oracle(&task)?.0,
        DescriptorMode::Estimated => {
            let est_seed = derive_seed(cfg.seed, &[stream::ESTIMATE, id_hash]);
            compute_descriptor_estimated(&task, est_seed)?.0
        }
    };
    let labels = suitability_labels(&perf, cfg.epsilon);
    Ok(MetaRecord {
        task_id: spec.id.clone(),
        descriptor,
        perf,
        avg_perf,
        ensemble_wg,
        labels,
    })
}

fn finalize(
    specs: &[TaskSpec],
    cfg: &AssemblyConfig,
    results: Vec<(String, std::result::Result<MetaRecord, String>)>,
) -> AssemblyOutcome {
    // Records in spec order regardless of completion order.
    let mut by_id: std::collections::HashMap<String, std::result::Result<MetaRecord, String>> =
        results.into_iter().collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for spec in specs {
        match by_id.remove(&spec.id) {
            Some(Ok(rec)) => records.push(rec),
            Some(Err(message)) => failures.push(TaskFailure {
                task_id: spec.id.clone(),
                message,
            }),
            None => failures.push(TaskFailure {
                task_id: spec.id.clone(),
                message: "missing result".into(),
            }),
        }
    }
    let mut meta = MetaDataset {
        schema_version: SCHEMA_VERSION,
        epsilon: cfg.epsilon,
        algorithms: AlgorithmId::names().iter().map(|s| s.to_string()).collect(),
        standardization: None,
        records,
    };
    let (train_idx, _) = split_meta(&meta.records);
    if !train_idx.is_empty() {
        meta.standardization = Standardization::fit(&meta.records, &train_idx).ok();
    }
    AssemblyOutcome { meta, failures }
}

/// Run the full sweep in memory. Per-task failures are collected, not
/// fatal. Record contents depend only on (spec, config), never on
/// position, so reordering specs permutes records without changing them.
pub fn assemble_meta_dataset(specs: &[TaskSpec], cfg: &AssemblyConfig) -> AssemblyOutcome {
    let results = map_ordered(cfg.parallelism, specs, |_, spec| {
        (
            spec.id.clone(),
            build_record(spec, cfg).map_err(|e| e.to_string()),
        )
    });
    finalize(specs, cfg, results)
}

/// Same sweep, but completed records stream into an append-only cache
/// so an interrupted run resumes where it stopped. The final dataset
/// is identical to the uninterrupted one.
pub fn assemble_with_resume(
    specs: &[TaskSpec],
    cfg: &AssemblyConfig,
    cache_path: &std::path::Path,
) -> Result<AssemblyOutcome> {
    let mut cache = ResumeCache::open(cache_path, specs, cfg)?;
    let done = cache.completed();
    let pending: Vec<TaskSpec> = specs
        .iter()
        .filter(|s| !done.contains_key(&s.id))
        .cloned()
        .collect();
    let mut results: Vec<(String, std::result::Result<MetaRecord, String>)> =
        done.into_iter().collect();
    // Chunked so progress is persisted as work completes even in
    // threaded mode.
    for chunk in pending.chunks(cfg.parallelism.resume_chunk()) {
        let fresh = map_ordered(cfg.parallelism, chunk, |_, spec| {
            (
                spec.id.clone(),
                build_record(spec, cfg).map_err(|e| e.to_string()),
            )
        });
        for (id, res) in fresh {
            cache.append(&id, &res)?;
            results.push((id, res));
        }
    }
    Ok(finalize(specs, cfg, results))
}
