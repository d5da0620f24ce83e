//! Experiment configuration: a single TOML file drives every command.
//!
//! Precedence for the worker count is flag > `SHIFTSEL_WORKERS` env var >
//! config file. The master seed and output root can likewise be overridden
//! from the command line. Every run writes its outputs under a directory
//! named by a hash of the *semantic* configuration (worker count and output
//! location excluded), so re-running the same experiment lands in the same
//! place and a changed experiment never overwrites an old one.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shiftsel::algorithms::{AlgorithmId, TrainConfig};
use shiftsel::eval::{selector_seeds, EvalConfig, MaskMode, SelectorVariant, SplitFilter};
use shiftsel::metadataset::{DescriptorMode, GridSpec, DEFAULT_EPSILON};
use shiftsel::par::Parallelism;
use shiftsel::rng::fingerprint_hex;
use shiftsel::selectors::{
    KnnSpec, MlpSpec, NetTrainConfig, SelectionRule, SelectorConfig, SelectorKind, TreeSpec,
};
use shiftsel::shiftgen::single_shift_settings;
use shiftsel::{Error, Result};

/// Name of the environment variable that can set the worker count.
pub const WORKERS_ENV: &str = "SHIFTSEL_WORKERS";

/// Top-level experiment configuration, deserialized from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed; every random stream in the pipeline derives from it.
    pub seed: u64,
    /// Suitability tolerance: algorithms within `epsilon` worst-group error
    /// of the per-task best are labeled suitable.
    pub epsilon: f64,
    /// Worker threads: 0 = all available cores, 1 = sequential, n = n threads.
    pub workers: usize,
    /// Directory under which run directories are created.
    pub out_root: PathBuf,
    /// How task descriptors are obtained when assembling the meta-dataset.
    pub descriptor_mode: DescriptorMode,
    pub grid: GridConfig,
    pub task_train: TaskTrainConfig,
    pub selector: SelectorSection,
    pub eval: EvalSection,
    pub analysis: AnalysisSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epsilon: DEFAULT_EPSILON,
            workers: 0,
            out_root: PathBuf::from("runs"),
            descriptor_mode: DescriptorMode::Oracle,
            grid: GridConfig::default(),
            task_train: TaskTrainConfig::default(),
            selector: SelectorSection::default(),
            eval: EvalSection::default(),
            analysis: AnalysisSection::default(),
        }
    }
}

/// Task-grid selection: a named preset or fully custom axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// `desk` and `full` use the built-in grids; `custom` reads the axes below.
    pub preset: GridPreset,
    pub sizes: Vec<usize>,
    pub dims: Vec<usize>,
    pub availabilities: Vec<f64>,
    pub triples_per_combo: usize,
    /// Values swept one axis at a time (the other two degrees stay at 0.5).
    pub single_shift_values: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            preset: GridPreset::Desk,
            sizes: Vec::new(),
            dims: Vec::new(),
            availabilities: Vec::new(),
            triples_per_combo: 20,
            single_shift_values: GridSpec::SINGLE_SHIFT_VALUES.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPreset {
    Desk,
    Full,
    Custom,
}

impl GridConfig {
    pub fn to_grid(&self) -> Result<GridSpec> {
        let grid = match self.preset {
            GridPreset::Desk => GridSpec::desk(),
            GridPreset::Full => GridSpec::full(),
            GridPreset::Custom => GridSpec {
                sizes: self.sizes.clone(),
                dims: self.dims.clone(),
                availabilities: self.availabilities.clone(),
                triples_per_combo: self.triples_per_combo,
                singles: single_shift_settings(&self.single_shift_values),
            },
        };
        grid.validate()?;
        Ok(grid)
    }
}

/// Per-task training hyperparameters for the candidate algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Group-weight learning rate for the robust-reweighting algorithm.
    pub dro_eta: f64,
    /// Logit-adjustment temperature.
    pub tau: f64,
}

impl Default for TaskTrainConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            lr: t.lr,
            weight_decay: t.weight_decay,
            dro_eta: t.dro_eta,
            tau: t.tau,
        }
    }
}

impl TaskTrainConfig {
    /// The per-task seed is derived from the master seed during assembly,
    /// so the seed field here is a placeholder.
    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            weight_decay: self.weight_decay,
            dro_eta: self.dro_eta,
            tau: self.tau,
            seed: 0,
        }
    }
}

/// Selector-model hyperparameters and which artifacts `train-selector` writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectorSection {
    /// Number of selector training seeds averaged during evaluation.
    pub seeds: usize,
    pub hidden_layers: usize,
    pub width: usize,
    pub lr: f64,
    pub epochs: usize,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub knn_k: usize,
    /// Selector kinds written as artifacts by `train-selector`.
    pub kinds: Vec<String>,
}

impl Default for SelectorSection {
    fn default() -> Self {
        let mlp = MlpSpec::default();
        let tree = TreeSpec::default();
        let knn = KnnSpec::default();
        let net = NetTrainConfig::default();
        Self {
            seeds: 3,
            hidden_layers: mlp.hidden_layers,
            width: mlp.width,
            lr: net.lr,
            epochs: net.epochs,
            tree_max_depth: tree.max_depth,
            tree_min_leaf: tree.min_leaf,
            knn_k: knn.k,
            kinds: vec![
                "mlp_multilabel".into(),
                "regression".into(),
                "linear".into(),
                "knn".into(),
                "tree".into(),
                "mimic_tree".into(),
                "global_best".into(),
            ],
        }
    }
}

impl SelectorSection {
    pub fn base_config(&self, seed: u64) -> SelectorConfig {
        SelectorConfig {
            seed,
            mlp: MlpSpec {
                hidden_layers: self.hidden_layers,
                width: self.width,
            },
            tree: TreeSpec {
                max_depth: self.tree_max_depth,
                min_leaf: self.tree_min_leaf,
            },
            knn: KnnSpec { k: self.knn_k },
            net_train: NetTrainConfig {
                lr: self.lr,
                epochs: self.epochs,
            },
            feature_mask: None,
        }
    }

    pub fn kinds(&self) -> Result<Vec<SelectorKind>> {
        self.kinds.iter().map(|name| parse_kind(name)).collect()
    }
}

/// Evaluation settings: which policies are scored and under which metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// `top_logit` or `binary_random`.
    pub rule: String,
    /// Policies to score: selector kind names plus `naive` (descriptor-only MLP).
    pub variants: Vec<String>,
    /// Score selections by across-group average error instead of worst-group error.
    pub averaged_metric: bool,
    /// Relabel suitability with a different tolerance before evaluating.
    pub epsilon_override: Option<f64>,
    /// Size-generalization split: keep only meta-train records with n <= this.
    pub meta_train_max_n: Option<usize>,
    /// Size-generalization split: keep only eval records with n >= this.
    pub eval_min_n: Option<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            rule: "top_logit".into(),
            variants: vec![
                "oracle".into(),
                "random".into(),
                "global_best".into(),
                "naive".into(),
                "regression".into(),
                "mlp_multilabel".into(),
            ],
            averaged_metric: false,
            epsilon_override: None,
            meta_train_max_n: None,
            eval_min_n: None,
        }
    }
}

impl EvalSection {
    pub fn rule(&self) -> Result<SelectionRule> {
        match self.rule.as_str() {
            "top_logit" => Ok(SelectionRule::TopLogit),
            "binary_random" => Ok(SelectionRule::BinaryRandom),
            other => Err(Error::DegenerateInput(format!(
                "unknown selection rule {other:?}; use top_logit or binary_random"
            ))),
        }
    }

    pub fn variants(&self) -> Result<Vec<SelectorVariant>> {
        if self.variants.is_empty() {
            return Err(Error::DegenerateInput(
                "eval.variants lists no policies".into(),
            ));
        }
        self.variants
            .iter()
            .map(|name| {
                if name == "naive" {
                    Ok(SelectorVariant::naive())
                } else {
                    parse_kind(name).map(SelectorVariant::of)
                }
            })
            .collect()
    }

    pub fn filter(&self) -> SplitFilter {
        SplitFilter {
            meta_train_max_n: self.meta_train_max_n,
            eval_min_n: self.eval_min_n,
        }
    }
}

/// Which analyses `analyze` runs and their parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Per-task worst-group-error gap distributions, written for every pair.
    pub gap_pairs: Vec<(String, String)>,
    /// Strong-shift filter for the second copy of each gap CSV.
    pub strong_shift_min_extremity: f64,
    pub strong_shift_min_r: f64,
    /// Meta-train subsample sizes for the selector scaling curve (empty = skip).
    pub scaling_sizes: Vec<usize>,
    /// Leave-one-descriptor-out ablation (`retrain`, `mask_to_mean`, or `off`).
    pub lodo_mode: String,
    /// Two-algorithm head-to-head descriptor ablation (empty names = skip).
    pub pairwise_a: String,
    pub pairwise_b: String,
    /// Suitability tolerances swept for the epsilon sensitivity CSV (empty = skip).
    pub epsilon_grid: Vec<f64>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            gap_pairs: vec![("Undersample".into(), "ERM".into())],
            strong_shift_min_extremity: 0.4,
            strong_shift_min_r: 10.0,
            scaling_sizes: vec![50, 100, 200, 400, 800],
            lodo_mode: "retrain".into(),
            pairwise_a: "ERM".into(),
            pairwise_b: "Undersample".into(),
            epsilon_grid: vec![0.0, 0.025, 0.05, 0.10],
        }
    }
}

impl AnalysisSection {
    pub fn lodo_mode(&self) -> Result<Option<MaskMode>> {
        match self.lodo_mode.as_str() {
            "retrain" => Ok(Some(MaskMode::Retrain)),
            "mask_to_mean" => Ok(Some(MaskMode::MaskToMean)),
            "off" => Ok(None),
            other => Err(Error::DegenerateInput(format!(
                "unknown lodo mode {other:?}; use retrain, mask_to_mean, or off"
            ))),
        }
    }

    pub fn pairwise(&self) -> Result<Option<(AlgorithmId, AlgorithmId)>> {
        if self.pairwise_a.is_empty() && self.pairwise_b.is_empty() {
            return Ok(None);
        }
        Ok(Some((
            parse_algorithm(&self.pairwise_a)?,
            parse_algorithm(&self.pairwise_b)?,
        )))
    }
}

fn parse_kind(name: &str) -> Result<SelectorKind> {
    SelectorKind::from_name(name).ok_or_else(|| {
        Error::DegenerateInput(format!(
            "unknown selector kind {name:?}; valid kinds: {}",
            SelectorKind::ALL
                .iter()
                .map(|k| k.name())
                .collect::<Vec<_>>()
                .join(", ")
        ))
    })
}

pub fn parse_algorithm(name: &str) -> Result<AlgorithmId> {
    AlgorithmId::from_name(name).ok_or_else(|| {
        Error::DegenerateInput(format!(
            "unknown algorithm {name:?}; valid names: {}",
            AlgorithmId::names().join(", ")
        ))
    })
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Load the config (defaults when no file is given), apply overrides with
/// flag > env > file precedence for workers, and validate before returning.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::io(p.display().to_string(), e))?;
            toml::from_str::<ExperimentConfig>(&text).map_err(|e| Error::Parse {
                path: p.display().to_string(),
                line: 0,
                message: e.to_string(),
            })?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = overrides.workers {
        cfg.workers = workers;
    } else if let Ok(raw) = std::env::var(WORKERS_ENV) {
        cfg.workers = raw.parse().map_err(|_| {
            Error::DegenerateInput(format!("{WORKERS_ENV}={raw:?} is not a worker count"))
        })?;
    }
    if let Some(out) = &overrides.out {
        cfg.out_root = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Reject bad settings before any compute starts.
    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::DegenerateInput(format!(
                "epsilon must be finite and non-negative, got {}",
                self.epsilon
            )));
        }
        if self.selector.seeds == 0 {
            return Err(Error::DegenerateInput(
                "selector.seeds must be at least 1".into(),
            ));
        }
        self.grid.to_grid()?;
        self.selector.kinds()?;
        self.eval.rule()?;
        self.eval.variants()?;
        if let Some(eps) = self.eval.epsilon_override {
            if !eps.is_finite() || eps < 0.0 {
                return Err(Error::DegenerateInput(format!(
                    "eval.epsilon_override must be finite and non-negative, got {eps}"
                )));
            }
        }
        for (a, b) in &self.analysis.gap_pairs {
            parse_algorithm(a)?;
            parse_algorithm(b)?;
        }
        if self.analysis.scaling_sizes.iter().any(|&s| s == 0) {
            return Err(Error::DegenerateInput(
                "analysis.scaling_sizes must not contain 0".into(),
            ));
        }
        self.analysis.lodo_mode()?;
        self.analysis.pairwise()?;
        for &eps in &self.analysis.epsilon_grid {
            if !eps.is_finite() || eps < 0.0 {
                return Err(Error::DegenerateInput(format!(
                    "analysis.epsilon_grid values must be finite and non-negative, got {eps}"
                )));
            }
        }
        Ok(())
    }

    /// Hash of the semantic configuration. Worker count and output root are
    /// zeroed out first: where results go and how many threads computed them
    /// must not change what run they belong to.
    pub fn run_hash(&self) -> String {
        let mut semantic = self.clone();
        semantic.workers = 0;
        semantic.out_root = PathBuf::new();
        let bytes = serde_json::to_vec(&semantic).expect("config serializes");
        fingerprint_hex(&bytes)
    }

    /// Run directory for this configuration: `<out_root>/run-<hash>`.
    pub fn run_dir(&self) -> PathBuf {
        self.out_root.join(format!("run-{}", self.run_hash()))
    }

    pub fn parallelism(&self) -> Parallelism {
        Parallelism::from_workers(self.workers)
    }

    /// Evaluation harness settings shared by `evaluate` and `analyze`.
    pub fn eval_config(&self) -> Result<EvalConfig> {
        Ok(EvalConfig {
            seeds: selector_seeds(self.seed, self.selector.seeds),
            rule: self.eval.rule()?,
            base: self.selector.base_config(self.seed),
            filter: self.eval.filter(),
        })
    }
}
