//! The six pipeline commands. Each one reads its inputs, never mutates
//! them, and writes results into the run directory derived from the
//! configuration hash. With `--dry-run` a command prints the work it
//! would do and writes nothing.

use std::path::{Path, PathBuf};

use shiftsel::algorithms::NUM_ALGORITHMS;
use shiftsel::eval::export::{export_tree, verify_export};
use shiftsel::eval::{
    evaluate, leave_one_descriptor_out, pairwise_selector_analysis, perf_gap_distribution,
    scaling_curve, with_averaged_metric, with_epsilon, MaskMode, SelectorVariant, ShiftFilter,
};
use shiftsel::metadataset::{
    build_task_specs, load_meta, load_specs, save_failures, save_meta, save_specs, split_meta,
    AssemblyConfig, MetaDataset, TaskSpec,
};
use shiftsel::selectors::{SelectorKind, SelectorModel};
use shiftsel::shiftgen::is_feasible;
use shiftsel::{Error, Result};

use crate::config::{parse_algorithm, ExperimentConfig};

/// Shared command context: the effective config, its run directory, and
/// whether this is a dry run.
pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub run_dir: PathBuf,
    pub dry_run: bool,
}

impl Ctx {
    /// Resolve the run directory, create it, and persist the effective
    /// configuration into it (skipped on dry runs).
    pub fn prepare(cfg: ExperimentConfig, dry_run: bool) -> Result<Ctx> {
        let run_dir = cfg.run_dir();
        if dry_run {
            println!("dry run: run directory {}", run_dir.display());
        } else {
            std::fs::create_dir_all(&run_dir)
                .map_err(|e| Error::io(run_dir.display().to_string(), e))?;
            let rendered = toml::to_string_pretty(&cfg)
                .map_err(|e| Error::DegenerateInput(format!("config does not serialize: {e}")))?;
            write_text(&run_dir.join("config.toml"), &rendered)?;
            println!("run directory {}", run_dir.display());
        }
        Ok(Ctx {
            cfg,
            run_dir,
            dry_run,
        })
    }

    fn tasks_path(&self, flag: &Option<PathBuf>) -> PathBuf {
        flag.clone().unwrap_or_else(|| self.run_dir.join("tasks.jsonl"))
    }

    fn meta_path(&self, flag: &Option<PathBuf>) -> PathBuf {
        flag.clone().unwrap_or_else(|| self.run_dir.join("meta.jsonl"))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Expand the configured grid into task specs, dropping (and logging)
/// any entry whose shift degrees are infeasible.
pub fn gen_tasks(ctx: &Ctx) -> Result<()> {
    let grid = ctx.cfg.grid.to_grid()?;
    let specs = build_task_specs(&grid, ctx.cfg.seed)?;
    let (feasible, skipped): (Vec<TaskSpec>, Vec<TaskSpec>) =
        specs.into_iter().partition(|s| is_feasible(&s.degrees));
    let path = ctx.run_dir.join("tasks.jsonl");
    for s in &skipped {
        eprintln!(
            "skipping infeasible grid entry {}: d_sc={} d_ls={} d_cs={}",
            s.id, s.degrees.d_sc, s.degrees.d_ls, s.degrees.d_cs
        );
    }
    if ctx.dry_run {
        println!(
            "dry run: would write {} task specs to {} ({} infeasible entries skipped)",
            feasible.len(),
            path.display(),
            skipped.len()
        );
        return Ok(());
    }
    save_specs(&path, &feasible)?;
    println!(
        "wrote {} task specs to {} ({} infeasible entries skipped)",
        feasible.len(),
        path.display(),
        skipped.len()
    );
    Ok(())
}

/// Train every candidate algorithm on every task and persist the
/// meta-dataset. Progress is checkpointed per task, so an interrupted
/// run resumes where it stopped and produces the identical file.
pub fn build_meta(ctx: &Ctx, tasks: &Option<PathBuf>) -> Result<()> {
    let tasks_path = ctx.tasks_path(tasks);
    let specs = load_specs(&tasks_path)?;
    let acfg = AssemblyConfig {
        seed: ctx.cfg.seed,
        epsilon: ctx.cfg.epsilon,
        train: ctx.cfg.task_train.to_train_config(),
        mode: ctx.cfg.descriptor_mode,
        parallelism: ctx.cfg.parallelism(),
    };
    let meta_path = ctx.run_dir.join("meta.jsonl");
    if ctx.dry_run {
        println!(
            "dry run: would train {} algorithms on {} tasks from {} and write {}",
            NUM_ALGORITHMS,
            specs.len(),
            tasks_path.display(),
            meta_path.display()
        );
        return Ok(());
    }
    let cache_path = ctx.run_dir.join("meta.cache.jsonl");
    let outcome = shiftsel::metadataset::assemble_with_resume(&specs, &acfg, &cache_path)?;
    save_meta(&meta_path, &outcome.meta)?;
    save_failures(&ctx.run_dir.join("failures.jsonl"), &outcome.failures)?;
    let (train_idx, eval_idx) = split_meta(&outcome.meta.records);
    println!(
        "assembled {} meta-records ({} task failures) -> {}",
        outcome.meta.records.len(),
        outcome.failures.len(),
        meta_path.display()
    );
    println!(
        "split: {} meta-train / {} meta-eval records",
        train_idx.len(),
        eval_idx.len()
    );
    for f in outcome.failures.iter().take(5) {
        eprintln!("task {} failed: {}", f.task_id, f.message);
    }
    if outcome.failures.len() > 5 {
        eprintln!("... and {} more (see failures.jsonl)", outcome.failures.len() - 5);
    }
    Ok(())
}

/// Train the configured selector kinds on the meta-train split and save
/// each as a JSON artifact carrying the meta-dataset fingerprint.
pub fn train_selector(ctx: &Ctx, meta: &Option<PathBuf>) -> Result<()> {
    let meta_path = ctx.meta_path(meta);
    let meta = load_meta(&meta_path)?;
    let kinds = ctx.cfg.selector.kinds()?;
    let dir = ctx.run_dir.join("selectors");
    if ctx.dry_run {
        let names: Vec<&str> = kinds.iter().map(|k| k.name()).collect();
        println!(
            "dry run: would train selectors [{}] on {} and write artifacts under {}",
            names.join(", "),
            meta_path.display(),
            dir.display()
        );
        return Ok(());
    }
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    // The artifact seed is the first evaluation seed, so a saved model
    // reproduces seed 0 of an `evaluate` run exactly.
    let seed0 = shiftsel::eval::selector_seeds(ctx.cfg.seed, 1)[0];
    let scfg = ctx.cfg.selector.base_config(seed0);
    for kind in kinds {
        let trained = shiftsel::selectors::train_selector(kind, &meta, &scfg)?;
        let path = dir.join(format!("{}.json", kind.name()));
        trained.model.save(&path)?;
        println!("trained {:<15} -> {}", kind.name(), path.display());
        for w in &trained.report.warnings {
            eprintln!("  warning ({}): {}", kind.name(), w);
        }
    }
    Ok(())
}

/// Audit any stored selector artifacts against the meta-dataset, then
/// score the configured policies (retrained per evaluation seed) and
/// write the report, CSV, and summary table.
pub fn evaluate_cmd(
    ctx: &Ctx,
    meta: &Option<PathBuf>,
    selectors: &Option<PathBuf>,
) -> Result<()> {
    let meta_path = ctx.meta_path(meta);
    let loaded = load_meta(&meta_path)?;

    // Artifacts are checked against the dataset as stored, before any
    // relabeling ablation below.
    let dir = selectors
        .clone()
        .unwrap_or_else(|| ctx.run_dir.join("selectors"));
    if dir.is_dir() {
        let mut checked = 0usize;
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(dir.display().to_string(), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        entries.sort();
        for path in entries {
            let model = SelectorModel::load(&path)?;
            model.check_meta(&loaded)?;
            checked += 1;
        }
        if checked > 0 {
            println!("verified {checked} selector artifacts against the meta-dataset fingerprint");
        }
    } else if selectors.is_some() {
        return Err(Error::io(
            dir.display().to_string(),
            std::io::Error::new(std::io::ErrorKind::NotFound, "selector directory not found"),
        ));
    }

    let mut meta_eval = loaded;
    if let Some(eps) = ctx.cfg.eval.epsilon_override {
        meta_eval = with_epsilon(&meta_eval, eps)?;
        println!("relabeled suitability with epsilon = {eps}");
    }
    if ctx.cfg.eval.averaged_metric {
        meta_eval = with_averaged_metric(&meta_eval)?;
        println!("scoring by across-group average error");
    }
    let variants = ctx.cfg.eval.variants()?;
    let ecfg = ctx.cfg.eval_config()?;
    if ctx.dry_run {
        let names: Vec<&str> = variants.iter().map(|v| v.label.as_str()).collect();
        println!(
            "dry run: would evaluate [{}] over {} seeds on {} and write eval_report.json / eval.csv / eval_summary.txt",
            names.join(", "),
            ecfg.seeds.len(),
            meta_path.display()
        );
        return Ok(());
    }
    let report = evaluate(&meta_eval, &variants, &ecfg, ctx.cfg.parallelism())?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::DegenerateInput(format!("report does not serialize: {e}")))?;
    write_text(&ctx.run_dir.join("eval_report.json"), &format!("{json}\n"))?;
    write_text(&ctx.run_dir.join("eval.csv"), &report.to_csv())?;
    let summary = report.summary_text();
    write_text(&ctx.run_dir.join("eval_summary.txt"), &summary)?;
    print!("{summary}");
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

/// Run the configured analyses and write one CSV each under `analysis/`.
/// Each analysis is internally parallel; the report files are written
/// one after another.
pub fn analyze(ctx: &Ctx, meta: &Option<PathBuf>) -> Result<()> {
    let meta_path = ctx.meta_path(meta);
    let meta = load_meta(&meta_path)?;
    let ecfg = ctx.cfg.eval_config()?;
    let par = ctx.cfg.parallelism();
    let a = &ctx.cfg.analysis;
    let dir = ctx.run_dir.join("analysis");
    if ctx.dry_run {
        let mut planned: Vec<String> = Vec::new();
        for (x, y) in &a.gap_pairs {
            planned.push(format!("gaps_{x}_{y}.csv"));
            planned.push(format!("gaps_{x}_{y}_strong.csv"));
        }
        if !a.scaling_sizes.is_empty() {
            planned.push("scaling.csv".into());
        }
        if a.lodo_mode()?.is_some() {
            planned.push(format!("lodo_{}.csv", a.lodo_mode));
        }
        if a.pairwise()?.is_some() {
            planned.push(format!("pairwise_{}_{}.csv", a.pairwise_a, a.pairwise_b));
        }
        if !a.epsilon_grid.is_empty() {
            planned.push("epsilon_sweep.csv".into());
        }
        println!(
            "dry run: would analyze {} and write [{}] under {}",
            meta_path.display(),
            planned.join(", "),
            dir.display()
        );
        return Ok(());
    }
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

    for (x, y) in &a.gap_pairs {
        let alg_a = parse_algorithm(x)?;
        let alg_b = parse_algorithm(y)?;
        let all = perf_gap_distribution(&meta, alg_a, alg_b, None)?;
        write_text(&dir.join(format!("gaps_{x}_{y}.csv")), &all.to_csv())?;
        let filter = ShiftFilter {
            min_degree_extremity: a.strong_shift_min_extremity,
            min_r: a.strong_shift_min_r,
        };
        let strong = perf_gap_distribution(&meta, alg_a, alg_b, Some(&filter))?;
        write_text(&dir.join(format!("gaps_{x}_{y}_strong.csv")), &strong.to_csv())?;
        let fmt = |m: Option<f64>| m.map_or("n/a".to_string(), |v| format!("{v:+.4}"));
        println!(
            "gap {x} - {y}: median {} over {} tasks; strong-shift median {} over {} tasks",
            fmt(all.median()),
            all.gaps.len(),
            fmt(strong.median()),
            strong.gaps.len()
        );
    }

    if !a.scaling_sizes.is_empty() {
        let curve = scaling_curve(&meta, &a.scaling_sizes, &ecfg, par)?;
        write_text(&dir.join("scaling.csv"), &curve.to_csv())?;
        for w in &curve.warnings {
            eprintln!("warning: {w}");
        }
        println!("scaling curve over sizes {:?} -> scaling.csv", a.scaling_sizes);
    }

    if let Some(mode) = a.lodo_mode()? {
        let rep = leave_one_descriptor_out(&meta, &ecfg, mode, par)?;
        write_text(&dir.join(format!("lodo_{}.csv", a.lodo_mode)), &rep.to_csv())?;
        for w in &rep.warnings {
            eprintln!("warning: {w}");
        }
        println!(
            "leave-one-descriptor-out ({}) baseline accuracy {:.4} -> lodo_{}.csv",
            a.lodo_mode, rep.baseline_accuracy.mean, a.lodo_mode
        );
    }

    if let Some((alg_a, alg_b)) = a.pairwise()? {
        // Reuse the lodo masking mode; retraining is the default when
        // lodo itself is switched off.
        let mode = a.lodo_mode()?.unwrap_or(MaskMode::Retrain);
        let rep = pairwise_selector_analysis(&meta, alg_a, alg_b, &ecfg, mode, par)?;
        write_text(
            &dir.join(format!("pairwise_{}_{}.csv", a.pairwise_a, a.pairwise_b)),
            &rep.to_csv(),
        )?;
        println!(
            "pairwise {} vs {} baseline accuracy {:.4} -> pairwise_{}_{}.csv",
            a.pairwise_a, a.pairwise_b, rep.baseline_accuracy.mean, a.pairwise_a, a.pairwise_b
        );
    }

    if !a.epsilon_grid.is_empty() {
        let sweep = epsilon_sweep(&meta, &a.epsilon_grid, &ecfg, par)?;
        write_text(&dir.join("epsilon_sweep.csv"), &sweep)?;
        println!("epsilon sweep over {:?} -> epsilon_sweep.csv", a.epsilon_grid);
    }

    println!("analysis outputs in {}", dir.display());
    Ok(())
}

/// For each tolerance: relabel, count positives, and score the
/// multi-label selector. One CSV row per epsilon.
fn epsilon_sweep(
    meta: &MetaDataset,
    grid: &[f64],
    ecfg: &shiftsel::eval::EvalConfig,
    par: shiftsel::par::Parallelism,
) -> Result<String> {
    let mut out =
        String::from("epsilon,mean_positive_labels,mlp_accuracy_mean,mlp_accuracy_std\n");
    let variants = [SelectorVariant::of(SelectorKind::MlpMultilabel)];
    for &eps in grid {
        let relabeled = with_epsilon(meta, eps)?;
        let positives: f64 = relabeled
            .records
            .iter()
            .map(|r| r.labels.iter().map(|&b| b as usize).sum::<usize>() as f64)
            .sum::<f64>()
            / relabeled.records.len() as f64;
        let report = evaluate(&relabeled, &variants, ecfg, par)?;
        let acc = &report.selectors[0].accuracy;
        out.push_str(&format!("{eps},{positives},{},{}\n", acc.mean, acc.std));
        println!(
            "  epsilon {:>5}: {:.2} positive labels/record, selector accuracy {:.4} ± {:.4}",
            eps, positives, acc.mean, acc.std
        );
    }
    Ok(out)
}

/// Render a tree-based selector artifact to DOT and indented text rules,
/// verifying that both parsed copies re-evaluate identically to the live
/// model on 100 random descriptors.
pub fn export_tree_cmd(ctx: &Ctx, artifact: &Option<PathBuf>) -> Result<()> {
    let path = artifact
        .clone()
        .unwrap_or_else(|| ctx.run_dir.join("selectors").join("tree.json"));
    if ctx.dry_run {
        println!(
            "dry run: would export {} to tree_<kind>.dot / tree_<kind>.txt in {}",
            path.display(),
            ctx.run_dir.display()
        );
        return Ok(());
    }
    let model = SelectorModel::load(&path)?;
    let export = export_tree(&model)?;
    verify_export(&model, &export, 100, ctx.cfg.seed)?;
    let dot_path = ctx.run_dir.join(format!("tree_{}.dot", model.kind.name()));
    let txt_path = ctx.run_dir.join(format!("tree_{}.txt", model.kind.name()));
    write_text(&dot_path, &export.dot)?;
    write_text(&txt_path, &export.text)?;
    println!(
        "exported {} -> {} and {}",
        model.kind.name(),
        dot_path.display(),
        txt_path.display()
    );
    println!("both rendered forms re-evaluated identically on 100 random descriptors");
    Ok(())
}
