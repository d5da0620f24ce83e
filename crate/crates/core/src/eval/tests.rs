use super::export::{
    export_tree, parse_dot_rules, parse_text_rules, tree_feature_names, verify_export,
};
use super::*;
use crate::algorithms::AlgorithmId;
use crate::metadataset::{Descriptor, MetaDataset, MetaRecord, SCHEMA_VERSION};
use crate::par::Parallelism;
use crate::selectors::{
    MlpSpec, NetTrainConfig, SelectorConfig, SelectorParams, TreeNode, TreeSpec,
};

const EPS: f64 = 0.05;

/// Error rows: above the d_sc threshold undersampling wins outright;
/// below it ERM wins with GroupDRO inside the ε band.
const HIGH: [f64; 5] = [0.40, 0.35, 0.30, 0.00, 0.30]; // labels [0,0,0,1,0]
const LOW: [f64; 5] = [0.00, 0.02, 0.30, 0.40, 0.30]; // labels [1,1,0,0,0]
/// Averaged-group rows deliberately invert the ranking so the metric
/// ablation is observable.
const HIGH_AVG: [f64; 5] = [0.10, 0.20, 0.30, 0.40, 0.50]; // labels [1,0,0,0,0]
const LOW_AVG: [f64; 5] = [0.50, 0.40, 0.30, 0.20, 0.10]; // labels [0,0,0,0,1]

fn record(id: &str, d_sc: f64, r: f64, n: usize, perf: &[f64; 5], avg: &[f64; 5]) -> MetaRecord {
    MetaRecord {
        task_id: id.to_string(),
        descriptor: Descriptor {
            d_sc,
            d_ls: 0.5,
            d_cs: 0.5,
            r,
            n,
            d: 2,
        },
        perf: perf.to_vec(),
        avg_perf: avg.to_vec(),
        ensemble_wg: 0.25,
        labels: suitability_labels(perf, EPS),
    }
}

/// 60 records whose suitability is a pure threshold in d_sc; r and n
/// vary but carry no label signal; d_ls, d_cs and d are constant (so
/// standardization drops them — several tests rely on that).
fn fixture() -> MetaDataset {
    let mut records = Vec::with_capacity(60);
    for i in 0..60usize {
        let d_sc = 0.05 + 0.90 * i as f64 / 59.0;
        let r = if i % 2 == 0 { 1.0 } else { 100.0 };
        let n = if i % 4 < 2 { 200 } else { 1000 };
        let (p, a) = if d_sc > 0.5 {
            (&HIGH, &HIGH_AVG)
        } else {
            (&LOW, &LOW_AVG)
        };
        records.push(record(&format!("t{i:02}"), d_sc, r, n, p, a));
    }
    let (train, eval) = split_meta(&records);
    assert!(
        train.len() >= 30 && eval.len() >= 6,
        "fixture split unusable: {} train / {} eval",
        train.len(),
        eval.len()
    );
    let std = Standardization::fit(&records, &train).unwrap();
    MetaDataset {
        schema_version: SCHEMA_VERSION,
        epsilon: EPS,
        algorithms: AlgorithmId::names(),
        standardization: Some(std),
        records,
    }
}

fn fast_cfg(seed_count: usize) -> EvalConfig {
    EvalConfig {
        seeds: selector_seeds(7, seed_count),
        rule: SelectionRule::TopLogit,
        base: SelectorConfig {
            mlp: MlpSpec {
                hidden_layers: 2,
                width: 16,
            },
            net_train: NetTrainConfig {
                lr: 1e-2,
                epochs: 300,
            },
            ..SelectorConfig::default()
        },
        filter: SplitFilter::default(),
    }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

#[test]
fn metrics_score_known_selections_exactly() {
    let meta = fixture();
    let idx = [0usize, 59];
    // Record 0 is LOW (labels [1,1,0,0,0]), record 59 HIGH ([0,0,0,1,0]).
    assert_eq!(zero_one_accuracy(&[0, 3], &meta, &idx).unwrap(), 1.0);
    assert_eq!(zero_one_accuracy(&[2, 2], &meta, &idx).unwrap(), 0.0);
    assert_eq!(zero_one_accuracy(&[1, 2], &meta, &idx).unwrap(), 0.5);
    assert_eq!(realized_wg_error(&[0, 3], &meta, &idx).unwrap(), 0.0);
    assert_eq!(realized_wg_error(&[2, 2], &meta, &idx).unwrap(), 0.30);

    assert!(zero_one_accuracy(&[], &meta, &[]).is_err());
    assert!(zero_one_accuracy(&[0], &meta, &idx).is_err());
    assert!(realized_wg_error(&[9, 0], &meta, &idx).is_err());
}

#[test]
fn stat_is_population_not_sample() {
    let s = Stat::from_values(&[1.0, 2.0, 3.0]);
    assert_eq!(s.mean, 2.0);
    assert!((s.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    let lone = Stat::from_values(&[4.5]);
    assert_eq!(lone.mean, 4.5);
    assert_eq!(lone.std, 0.0);
}

#[test]
fn selector_seeds_are_deterministic_and_distinct() {
    let a = selector_seeds(7, 3);
    let b = selector_seeds(7, 3);
    assert_eq!(a, b);
    assert_eq!(a.len(), 3);
    assert!(a[0] != a[1] && a[1] != a[2] && a[0] != a[2]);
    assert_ne!(selector_seeds(8, 3), a);
}

// ---------------------------------------------------------------------------
// Evaluation harness
// ---------------------------------------------------------------------------

#[test]
fn oracle_is_perfect_and_dominates() {
    let meta = fixture();
    let cfg = fast_cfg(3);
    let variants = vec![
        SelectorVariant::of(SelectorKind::Oracle),
        SelectorVariant::of(SelectorKind::Random),
        SelectorVariant::of(SelectorKind::GlobalBest),
        SelectorVariant::naive(),
    ];
    let report = evaluate(&meta, &variants, &cfg, Parallelism::Sequential).unwrap();

    assert_eq!(report.selectors.len(), 4);
    assert_eq!(report.trace.len(), 4 * 3);
    assert_eq!(report.task_ids.len(), report.eval_size);
    assert_eq!(report.algorithms, AlgorithmId::names());

    let oracle = &report.selectors[0];
    assert!(oracle.per_seed_accuracy.iter().all(|&a| a == 1.0));
    assert_eq!(oracle.accuracy.mean, 1.0);
    assert_eq!(oracle.accuracy.std, 0.0);
    for s in &report.selectors {
        for (o, w) in oracle.per_seed_wg.iter().zip(&s.per_seed_wg) {
            assert!(
                o <= w,
                "oracle realized wg {o} must not exceed {} of {}",
                w,
                s.label
            );
        }
        let total: f64 = s.selection_fractions.iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "histogram of {}", s.label);
    }

    let text = report.summary_text();
    assert!(text.contains("oracle") && text.contains("naive"));
    let csv = report.to_csv();
    assert_eq!(csv.lines().count(), 1 + 4 * 3);
    assert!(csv.starts_with("selector,kind,seed,"));
}

#[test]
fn evaluation_is_deterministic_and_parallel_invariant() {
    let meta = fixture();
    let cfg = fast_cfg(2);
    let variants = vec![
        SelectorVariant::of(SelectorKind::Oracle),
        SelectorVariant::of(SelectorKind::GlobalBest),
        SelectorVariant::of(SelectorKind::MlpMultilabel),
    ];
    let a = evaluate(&meta, &variants, &cfg, Parallelism::Sequential).unwrap();
    let b = evaluate(&meta, &variants, &cfg, Parallelism::Sequential).unwrap();
    let c = evaluate(&meta, &variants, &cfg, Parallelism::Threads).unwrap();
    assert_eq!(
        serde_json::to_vec(&a).unwrap(),
        serde_json::to_vec(&b).unwrap()
    );
    assert_eq!(
        serde_json::to_vec(&a).unwrap(),
        serde_json::to_vec(&c).unwrap()
    );
}

#[test]
fn naive_variant_equals_explicitly_masked_mlp() {
    let meta = fixture();
    let cfg = fast_cfg(2);
    let variants = vec![
        SelectorVariant::naive(),
        SelectorVariant {
            label: "masked_mlp".to_string(),
            kind: SelectorKind::MlpMultilabel,
            feature_mask: Some(crate::selectors::NAIVE_MASK),
        },
    ];
    let report = evaluate(&meta, &variants, &cfg, Parallelism::Sequential).unwrap();
    let (naive, masked) = (&report.selectors[0], &report.selectors[1]);
    assert_eq!(naive.per_seed_accuracy, masked.per_seed_accuracy);
    assert_eq!(naive.per_seed_wg, masked.per_seed_wg);
    // Selections themselves are identical, not just the aggregates.
    for k in 0..cfg.seeds.len() {
        assert_eq!(
            report.trace[k].selections,
            report.trace[cfg.seeds.len() + k].selections
        );
    }
}

#[test]
fn evaluate_rejects_empty_inputs_and_degenerate_filters() {
    let meta = fixture();
    let cfg = fast_cfg(1);
    assert!(evaluate(&meta, &[], &cfg, Parallelism::Sequential).is_err());

    let mut no_seeds = cfg.clone();
    no_seeds.seeds.clear();
    let oracle = [SelectorVariant::of(SelectorKind::Oracle)];
    assert!(evaluate(&meta, &oracle, &no_seeds, Parallelism::Sequential).is_err());

    let mut starved = cfg.clone();
    starved.filter.meta_train_max_n = Some(10); // below every task size
    let err = evaluate(&meta, &oracle, &starved, Parallelism::Sequential)
        .unwrap_err()
        .to_string();
    assert!(err.contains("filter"), "unhelpful error: {err}");
}

#[test]
fn size_filter_restricts_both_splits() {
    let meta = fixture();
    let mut cfg = fast_cfg(1);
    cfg.filter = SplitFilter {
        meta_train_max_n: Some(200),
        eval_min_n: Some(1000),
    };
    let report = evaluate(
        &meta,
        &[SelectorVariant::of(SelectorKind::Oracle)],
        &cfg,
        Parallelism::Sequential,
    )
    .unwrap();
    let full = evaluate(
        &meta,
        &[SelectorVariant::of(SelectorKind::Oracle)],
        &fast_cfg(1),
        Parallelism::Sequential,
    )
    .unwrap();
    assert!(report.train_size < full.train_size);
    assert!(report.eval_size < full.eval_size);
    for id in &report.task_ids {
        let rec = meta.records.iter().find(|r| &r.task_id == id).unwrap();
        assert_eq!(rec.descriptor.n, 1000);
    }
}

// ---------------------------------------------------------------------------
// Label ablations
// ---------------------------------------------------------------------------

#[test]
fn epsilon_relabeling_is_monotone() {
    let meta = fixture();
    let same = with_epsilon(&meta, EPS).unwrap();
    assert_eq!(same, meta);

    let grid = [0.0, 0.025, 0.05, 0.10];
    let mut previous: Option<MetaDataset> = None;
    for &eps in &grid {
        let relabeled = with_epsilon(&meta, eps).unwrap();
        assert_eq!(relabeled.epsilon, eps);
        for rec in &relabeled.records {
            assert!(rec.labels.contains(&1));
        }
        if let Some(prev) = previous {
            for (lo, hi) in prev.records.iter().zip(&relabeled.records) {
                for (a, b) in lo.labels.iter().zip(&hi.labels) {
                    assert!(a <= b, "positives must not disappear as ε grows");
                }
            }
        }
        previous = Some(relabeled);
    }

    // ε = 0 keeps only exact minima: LOW records lose GroupDRO.
    let tight = with_epsilon(&meta, 0.0).unwrap();
    assert_eq!(tight.records[0].labels, vec![1, 0, 0, 0, 0]);

    assert!(with_epsilon(&meta, -0.01).is_err());
    assert!(with_epsilon(&meta, f64::NAN).is_err());
}

#[test]
fn averaged_metric_swaps_scoring_column() {
    let meta = fixture();
    let avg = with_averaged_metric(&meta).unwrap();
    for (orig, swapped) in meta.records.iter().zip(&avg.records) {
        assert_eq!(swapped.perf, orig.avg_perf);
        assert_eq!(swapped.avg_perf, orig.avg_perf);
        assert_eq!(swapped.labels, suitability_labels(&orig.avg_perf, EPS));
        assert_eq!(swapped.ensemble_wg, orig.ensemble_wg);
    }
    avg.validate().unwrap();

    // Under the averaged metric every record's best error is 0.10, so
    // the oracle's realized error is exactly that.
    let report = evaluate(
        &avg,
        &[SelectorVariant::of(SelectorKind::Oracle)],
        &fast_cfg(1),
        Parallelism::Sequential,
    )
    .unwrap();
    assert!((report.selectors[0].realized_wg.mean - 0.10).abs() < 1e-12);
}

// ---------------------------------------------------------------------------
// Performance gaps
// ---------------------------------------------------------------------------

#[test]
fn gap_distribution_is_antisymmetric_with_zero_diagonal() {
    let meta = fixture();
    let ab =
        perf_gap_distribution(&meta, AlgorithmId::Erm, AlgorithmId::Undersample, None).unwrap();
    let ba =
        perf_gap_distribution(&meta, AlgorithmId::Undersample, AlgorithmId::Erm, None).unwrap();
    assert_eq!(ab.gaps.len(), 60);
    for (x, y) in ab.gaps.iter().zip(&ba.gaps) {
        assert_eq!(*x, -*y);
    }
    let diag = perf_gap_distribution(&meta, AlgorithmId::Erm, AlgorithmId::Erm, None).unwrap();
    assert!(diag.gaps.iter().all(|&g| g == 0.0));

    let csv = ab.to_csv();
    assert_eq!(csv.lines().count(), 61);
    assert!(csv.starts_with("task_id,wg_ERM_minus_wg_Undersample"));
}

#[test]
fn strong_shift_filter_selects_extreme_tasks() {
    let meta = fixture();
    let filtered = perf_gap_distribution(
        &meta,
        AlgorithmId::Undersample,
        AlgorithmId::Erm,
        Some(&ShiftFilter::strong()),
    )
    .unwrap();
    // Manual count: |d_sc − 0.5| ≥ 0.4 keeps i ∈ {0..3, 56..59}; r ≥ 10
    // keeps odd i; intersection {1, 3, 57, 59}.
    assert_eq!(filtered.task_ids, vec!["t01", "t03", "t57", "t59"]);
}

#[test]
fn undersample_gap_median_under_strong_shift() {
    // Constructed regime where undersampling dominates ERM on every
    // strongly shifted task; the median gap must be negative and exact.
    let rows: [[f64; 5]; 3] = [
        [0.40, 0.35, 0.30, 0.00, 0.30], // US − ERM = −0.40
        [0.35, 0.35, 0.30, 0.05, 0.30], // −0.30
        [0.30, 0.35, 0.30, 0.10, 0.30], // −0.20
    ];
    let records: Vec<MetaRecord> = rows
        .iter()
        .enumerate()
        .map(|(i, p)| record(&format!("g{i}"), 0.95, 100.0, 200, p, &HIGH_AVG))
        .collect();
    let meta = MetaDataset {
        schema_version: SCHEMA_VERSION,
        epsilon: EPS,
        algorithms: AlgorithmId::names(),
        standardization: None,
        records,
    };
    let gaps = perf_gap_distribution(
        &meta,
        AlgorithmId::Undersample,
        AlgorithmId::Erm,
        Some(&ShiftFilter::strong()),
    )
    .unwrap();
    assert_eq!(gaps.gaps.len(), 3);
    assert_eq!(gaps.median(), Some(-0.30));

    let empty = perf_gap_distribution(
        &meta,
        AlgorithmId::Undersample,
        AlgorithmId::Erm,
        Some(&ShiftFilter {
            min_degree_extremity: 0.49,
            min_r: 1000.0,
        }),
    )
    .unwrap();
    assert_eq!(empty.median(), None);
}

// ---------------------------------------------------------------------------
// Scaling curve
// ---------------------------------------------------------------------------

#[test]
fn scaling_full_size_matches_headline_run() {
    let meta = fixture();
    let cfg = fast_cfg(2);
    let headline = evaluate(
        &meta,
        &[SelectorVariant::of(SelectorKind::MlpMultilabel)],
        &cfg,
        Parallelism::Sequential,
    )
    .unwrap();
    let full = headline.train_size;

    let curve = scaling_curve(&meta, &[4, full, full + 50], &cfg, Parallelism::Sequential).unwrap();
    assert_eq!(curve.points.len(), 3);
    assert_eq!(curve.eval_size, headline.eval_size);

    assert_eq!(curve.points[0].used, 4);
    assert_eq!(curve.points[1].used, full);
    assert_eq!(curve.points[2].used, full);
    assert_eq!(curve.warnings.len(), 1);
    assert!(curve.warnings[0].contains("clamped"));

    // A full-size "subsample" is the identity: bit-identical accuracy
    // to the headline evaluation, and the clamped point matches too.
    let mlp = &headline.selectors[0];
    assert_eq!(curve.points[1].per_seed_accuracy, mlp.per_seed_accuracy);
    assert_eq!(
        curve.points[2].per_seed_accuracy,
        curve.points[1].per_seed_accuracy
    );

    let csv = curve.to_csv();
    assert!(csv.starts_with("requested,used,"));
    assert_eq!(csv.lines().count(), 4);

    assert!(scaling_curve(&meta, &[], &cfg, Parallelism::Sequential).is_err());
    assert!(scaling_curve(&meta, &[0], &cfg, Parallelism::Sequential).is_err());
}

#[test]
fn scaling_subsamples_are_deterministic_and_seed_sensitive() {
    let idx: Vec<usize> = (0..40).collect();
    let a = subsample_sorted(&idx, 10, 3);
    let b = subsample_sorted(&idx, 10, 3);
    let c = subsample_sorted(&idx, 10, 4);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.len(), 10);
    assert!(a.windows(2).all(|w| w[0] < w[1]), "sorted, no duplicates");
    assert!(a.iter().all(|i| idx.contains(i)));
    assert_eq!(subsample_sorted(&idx, 40, 3), idx);
    assert_eq!(subsample_sorted(&idx, 99, 3), idx);
}

// ---------------------------------------------------------------------------
// Leave-one-descriptor-out
// ---------------------------------------------------------------------------

#[test]
fn lodo_finds_the_informative_feature() {
    let meta = fixture();
    let cfg = fast_cfg(2);
    for mode in [MaskMode::Retrain, MaskMode::MaskToMean] {
        let report = leave_one_descriptor_out(&meta, &cfg, mode, Parallelism::Sequential).unwrap();
        assert_eq!(report.mode, mode);
        assert_eq!(report.drops.len(), 6);
        let names: Vec<&str> = report.drops.iter().map(|d| d.feature.as_str()).collect();
        assert_eq!(names, FEATURE_NAMES);

        // Labels are a pure function of d_sc, so the selector is nearly
        // perfect with it and pays heavily without it.
        assert!(
            report.baseline_accuracy.mean >= 0.8,
            "baseline {:?}",
            report.baseline_accuracy
        );
        assert!(
            report.drops[0].drop.mean >= 0.15,
            "d_sc drop {:?} under {:?}",
            report.drops[0].drop,
            mode
        );

        // d_ls, d_cs and d are constant on the fixture: standardization
        // drops them, so masking them changes nothing at all.
        for &j in &[1usize, 2, 5] {
            assert_eq!(
                report.drops[j].drop,
                Stat { mean: 0.0, std: 0.0 },
                "constant feature {} must cost nothing under {:?}",
                FEATURE_NAMES[j],
                mode
            );
        }

        // Per-feature bookkeeping: baseline = masked + drop, per seed.
        for d in &report.drops {
            assert!(
                (d.masked_accuracy.mean + d.drop.mean - report.baseline_accuracy.mean).abs()
                    < 1e-12
            );
        }
    }
}

#[test]
fn lodo_modes_share_the_baseline() {
    let meta = fixture();
    let cfg = fast_cfg(2);
    let retrain =
        leave_one_descriptor_out(&meta, &cfg, MaskMode::Retrain, Parallelism::Sequential).unwrap();
    let masked =
        leave_one_descriptor_out(&meta, &cfg, MaskMode::MaskToMean, Parallelism::Sequential)
            .unwrap();
    assert_eq!(retrain.baseline_accuracy, masked.baseline_accuracy);

    let csv = retrain.to_csv();
    assert!(csv.starts_with("feature,"));
    assert_eq!(csv.lines().count(), 7);
}

// ---------------------------------------------------------------------------
// Pairwise selector analysis
// ---------------------------------------------------------------------------

#[test]
fn pairwise_analysis_identifies_the_deciding_feature() {
    let meta = fixture();
    let cfg = fast_cfg(2);
    let report = pairwise_selector_analysis(
        &meta,
        AlgorithmId::Erm,
        AlgorithmId::Undersample,
        &cfg,
        MaskMode::Retrain,
        Parallelism::Sequential,
    )
    .unwrap();
    assert_eq!(report.algorithm_a, "ERM");
    assert_eq!(report.algorithm_b, "Undersample");
    assert_eq!(report.drops.len(), 6);
    assert!(
        report.baseline_accuracy.mean >= 0.9,
        "pair labels are crisp in d_sc: {:?}",
        report.baseline_accuracy
    );
    assert!(
        report.drops[0].drop.mean >= 0.2,
        "d_sc decides the pair: {:?}",
        report.drops[0].drop
    );
    // Constant features are free, exactly, in both modes.
    for &j in &[1usize, 2, 5] {
        assert_eq!(report.drops[j].drop, Stat { mean: 0.0, std: 0.0 });
    }

    let lazy = pairwise_selector_analysis(
        &meta,
        AlgorithmId::Erm,
        AlgorithmId::Undersample,
        &cfg,
        MaskMode::MaskToMean,
        Parallelism::Sequential,
    )
    .unwrap();
    assert_eq!(lazy.baseline_accuracy, report.baseline_accuracy);
    for &j in &[1usize, 2, 5] {
        assert_eq!(lazy.drops[j].drop, Stat { mean: 0.0, std: 0.0 });
    }
    assert!(lazy.to_csv().lines().count() == 7);
}

#[test]
fn pairwise_rejects_identical_algorithms() {
    let meta = fixture();
    let err = pairwise_selector_analysis(
        &meta,
        AlgorithmId::Erm,
        AlgorithmId::Erm,
        &fast_cfg(1),
        MaskMode::Retrain,
        Parallelism::Sequential,
    )
    .unwrap_err()
    .to_string();
    assert!(err.contains("distinct"), "unhelpful error: {err}");
}

// ---------------------------------------------------------------------------
// Agreement
// ---------------------------------------------------------------------------

#[test]
fn agreement_is_reflexive_and_bounded() {
    let meta = fixture();
    let (train_idx, eval_idx) = split_meta(&meta.records);
    let cfg = SelectorConfig {
        seed: selector_seeds(7, 1)[0],
        ..fast_cfg(1).base
    };
    let oracle = crate::selectors::train_selector_on(SelectorKind::Oracle, &meta, &train_idx, &cfg)
        .unwrap()
        .model;
    let gb = crate::selectors::train_selector_on(SelectorKind::GlobalBest, &meta, &train_idx, &cfg)
        .unwrap()
        .model;
    assert_eq!(selection_agreement(&oracle, &oracle, &meta, &eval_idx).unwrap(), 1.0);
    let cross = selection_agreement(&oracle, &gb, &meta, &eval_idx).unwrap();
    assert!((0.0..=1.0).contains(&cross));
    assert!(selection_agreement(&oracle, &gb, &meta, &[]).is_err());
}

// ---------------------------------------------------------------------------
// Tree export
// ---------------------------------------------------------------------------

fn tree_model(root: TreeNode) -> crate::selectors::SelectorModel {
    crate::selectors::SelectorModel {
        kind: SelectorKind::Tree,
        config: SelectorConfig::default(),
        algorithms: AlgorithmId::names(),
        standardization: None,
        meta_fingerprint: "0000000000000000".to_string(),
        params: SelectorParams::Tree { root },
    }
}

#[test]
fn single_leaf_exports_one_node_and_round_trips() {
    let model = tree_model(TreeNode::Leaf {
        value: vec![1.0, 0.0, 0.25, 0.0, 0.0],
        count: 7,
    });
    let export = export_tree(&model).unwrap();
    assert!(!export.dot.contains("->"), "a leaf has no edges");
    assert_eq!(
        export.dot.matches("shape=box").count(),
        1,
        "exactly one node: {}",
        export.dot
    );
    assert!(export.text.trim_start().starts_with("scores = [1.0, 0.0, 0.25, 0.0, 0.0]"));
    verify_export(&model, &export, 100, 11).unwrap();
}

#[test]
fn nested_export_round_trips_with_full_precision() {
    // Awkward thresholds that only survive shortest round-trip printing.
    let root = TreeNode::Split {
        feature: 0,
        threshold: 1.0 / 3.0,
        left: Box::new(TreeNode::Leaf {
            value: vec![0.1 + 0.2, 0.0, 0.0, 0.0, 1.0], // 0.30000000000000004
            count: 3,
        }),
        right: Box::new(TreeNode::Split {
            feature: 3,
            threshold: 31.622776601683793,
            left: Box::new(TreeNode::Leaf {
                value: vec![0.0, 1.0, 0.0, 0.0, 0.0],
                count: 4,
            }),
            right: Box::new(TreeNode::Leaf {
                value: vec![0.0, 0.0, 1.0, 0.0, 0.0],
                count: 5,
            }),
        }),
    };
    let model = tree_model(root);
    let export = export_tree(&model).unwrap();
    verify_export(&model, &export, 100, 13).unwrap();

    let features = tree_feature_names(SelectorKind::Tree).unwrap();
    let from_text = parse_text_rules(&export.text, &features).unwrap();
    let from_dot = parse_dot_rules(&export.dot, &features).unwrap();
    assert_eq!(from_text.node_count(), 5);
    assert_eq!(from_dot.node_count(), 5);
    assert_eq!(export.dot.matches("shape=").count(), 5);
    assert_eq!(export.dot.matches("->").count(), 4);
    assert!(export.text.contains("if d_sc <= 0.3333333333333333 {"));
    assert!(export.text.contains("# best: "));
}

#[test]
fn trained_tree_exports_re_evaluate_identically() {
    let meta = fixture();
    let (train_idx, _) = split_meta(&meta.records);
    let cfg = SelectorConfig {
        seed: 7,
        tree: TreeSpec {
            max_depth: 3,
            min_leaf: 2,
        },
        ..fast_cfg(1).base
    };
    let trained =
        crate::selectors::train_selector_on(SelectorKind::Tree, &meta, &train_idx, &cfg).unwrap();
    let export = export_tree(&trained.model).unwrap();
    assert!(export.text.contains("d_sc"), "tree splits on the signal");
    verify_export(&trained.model, &export, 100, 17).unwrap();
}

#[test]
fn mimic_tree_export_uses_folded_feature_names() {
    let meta = fixture();
    let (train_idx, _) = split_meta(&meta.records);
    let cfg = fast_cfg(1).base;
    let trained =
        crate::selectors::train_selector_on(SelectorKind::MimicTree, &meta, &train_idx, &cfg)
            .unwrap();
    let export = export_tree(&trained.model).unwrap();
    verify_export(&trained.model, &export, 100, 19).unwrap();

    let names = tree_feature_names(SelectorKind::MimicTree).unwrap();
    assert_eq!(names[0], "|d_sc-0.5|");
    assert!(tree_feature_names(SelectorKind::MlpMultilabel).is_err());
}

#[test]
fn export_rejects_non_tree_selectors() {
    let meta = fixture();
    let (train_idx, _) = split_meta(&meta.records);
    let gb = crate::selectors::train_selector_on(
        SelectorKind::GlobalBest,
        &meta,
        &train_idx,
        &fast_cfg(1).base,
    )
    .unwrap();
    assert!(export_tree(&gb.model).is_err());
}

#[test]
fn tampered_exports_fail_verification() {
    let root = TreeNode::Split {
        feature: 0,
        threshold: 0.5,
        left: Box::new(TreeNode::Leaf {
            value: vec![1.0, 0.0, 0.0, 0.0, 0.0],
            count: 3,
        }),
        right: Box::new(TreeNode::Leaf {
            value: vec![0.0, 1.0, 0.0, 0.0, 0.0],
            count: 3,
        }),
    };
    let model = tree_model(root);
    let good = export_tree(&model).unwrap();
    verify_export(&model, &good, 100, 23).unwrap();

    let mut tampered = good.clone();
    tampered.text = tampered.text.replace("<= 0.5", "<= 1.5");
    assert!(verify_export(&model, &tampered, 100, 23).is_err());

    let mut swapped = good.clone();
    swapped.dot = swapped.dot.replace("label=\"true\"", "label=\"maybe\"");
    assert!(verify_export(&model, &swapped, 100, 23).is_err());
}

#[test]
fn parsers_reject_malformed_exports() {
    let features = tree_feature_names(SelectorKind::Tree).unwrap();
    assert!(parse_text_rules("if d_sc <= {\n", &features).is_err());
    assert!(parse_text_rules("scores = [oops]\n", &features).is_err());
    assert!(parse_text_rules(
        "if mystery_feature <= 0.5 {\nscores = [1.0]\n} else {\nscores = [0.0]\n}\n",
        &features
    )
    .is_err());
    // Trailing garbage after a complete block must not be ignored.
    assert!(parse_text_rules("scores = [1.0]\nscores = [2.0]\n", &features).is_err());

    assert!(parse_dot_rules("not dot at all", &features).is_err());
    assert!(parse_dot_rules("digraph g {\n    n0 [label=\"oops\"];\n}\n", &features).is_err());
    // A split without its false edge is structurally incomplete.
    assert!(parse_dot_rules(
        "digraph g {\n    n0 [label=\"d_sc <= 0.5\"];\n    n1 [label=\"scores = [1.0]\"];\n    n0 -> n1 [label=\"true\"];\n}\n",
        &features
    )
    .is_err());
}
