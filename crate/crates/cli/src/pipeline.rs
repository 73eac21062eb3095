//! The subcommands as library functions.

use std::path::{Path, PathBuf};
use std::time::Instant;

use opf_activeset_core::dcopf::{solve_dcopf, SolveStatus};
use opf_activeset_core::network::{validate, Network};
use opf_activeset_core::nn::{fit, TrainConfig, TrainWarning};
use opf_activeset_core::policy::{
    depth_study, evaluate, fixed_status_report, frequency_distribution, learning_curve,
    relative_gap, AccuracyCell, ClassifierPolicy, EvalReport, PolicyOutcome,
};
use opf_activeset_core::polytope::{assemble_polytope, Polytope};
use opf_activeset_core::ptdf::compute_ptdf;
use opf_activeset_core::scenario::{
    assemble_dataset, build_distribution, dataset_meta, solve_sample, split_dataset, Dataset,
    DiscoveryTracker, SampleOutcome,
};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;

use crate::case::{load_case, RawCase};
use crate::config::RunConfig;
use crate::dataset_io::{load_dataset, save_dataset};
use crate::error::Failure;
use crate::model_io::{read_model_file, write_model_file};
use crate::reports::{self, write_json, CsvReport};

/// Crate version plus the `git describe` of the source tree when known.
pub fn version() -> String {
    match option_env!("OPF_ACTIVESET_GIT_DESCRIBE") {
        Some(g) if !g.is_empty() => format!("{}+{g}", env!("CARGO_PKG_VERSION")),
        _ => env!("CARGO_PKG_VERSION").to_string(),
    }
}

/// Builds a worker pool; `None` leaves the size to rayon.
pub fn thread_pool(threads: Option<usize>) -> Result<ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| Failure::input(format!("cannot start worker pool: {e}")))
}

pub struct Case {
    pub raw: RawCase,
    pub net: Network,
    pub poly: Polytope,
}

pub fn prepare_case(path: &Path) -> Result<Case, Failure> {
    let (raw, net) = load_case(path)?;
    for d in validate(&net) {
        log::warn!("{}: {d}", path.display());
    }
    let ptdf = compute_ptdf(&net).map_err(|e| Failure::numerical(e.to_string()))?;
    let poly = assemble_polytope(&net, &ptdf, &vec![0.0; net.n_bus()])
        .map_err(|e| Failure::input(e.to_string()))?;
    Ok(Case { raw, net, poly })
}

pub struct Generated {
    pub dataset: Dataset,
    pub curve: Vec<(usize, usize)>,
    /// Draw at which the windowed stopping rule would have fired.
    pub window_stop: Option<usize>,
    pub unseen_mass: f64,
}

/// Solves `n` draws on the pool and folds them in index order, so the
/// result does not depend on the number of workers.
pub fn generate(
    case: &Case,
    sigma_frac: f64,
    n: usize,
    seed: u64,
    window: usize,
    pool: &ThreadPool,
) -> Result<Generated, Failure> {
    if n == 0 {
        return Err(Failure::input("n_samples must be at least 1"));
    }
    let model = build_distribution(&case.net, sigma_frac)?;
    let outcomes: Vec<SampleOutcome> = pool.install(|| {
        (0..n as u64)
            .into_par_iter()
            .map(|i| solve_sample(&case.poly, &model, seed, i))
            .collect::<Result<_, _>>()
    })?;
    let mut tracker = DiscoveryTracker::new(window);
    let mut window_stop = None;
    for o in &outcomes {
        let set = match o {
            SampleOutcome::Solved { active_set, .. } => Some(active_set),
            SampleOutcome::Infeasible => None,
        };
        if tracker.observe(set) && window_stop.is_none() {
            window_stop = Some(tracker.drawn());
        }
    }
    let discovery = tracker.finish();
    let dataset = assemble_dataset(outcomes, dataset_meta(&case.net, &model, seed))?;
    Ok(Generated {
        dataset,
        curve: discovery.curve,
        window_stop,
        unseen_mass: discovery.unseen_mass,
    })
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn ensure_output_dir(cfg: &RunConfig) -> Result<(), Failure> {
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| Failure::input(format!("cannot create {}: {e}", cfg.output_dir.display())))
}

/// The network configuration with its seed tied to the run seed.
pub fn train_config(cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        seed: cfg.seed,
        ..cfg.nn.clone()
    }
}

#[derive(Serialize)]
struct GenerateSummary<'a> {
    version: String,
    config: &'a RunConfig,
    case_name: &'a str,
    n_bus: usize,
    n_gen: usize,
    n_branch: usize,
    generator_rows: usize,
    flow_rows: usize,
    n_drawn: usize,
    n_infeasible: usize,
    dictionary_size: usize,
    window_stop: Option<usize>,
    unseen_mass: f64,
}

pub fn cmd_generate(cfg: &RunConfig, dataset_path: Option<&Path>, pool: &ThreadPool) -> Result<Generated, Failure> {
    cfg.validate()?;
    let case = prepare_case(&cfg.case_path)?;
    ensure_output_dir(cfg)?;
    let n = cfg.n_samples.min(cfg.stopping.max_samples);
    let g = generate(&case, cfg.sigma_frac, n, cfg.seed, cfg.stopping.window, pool)?;
    let path = dataset_path.map_or_else(|| out_path(cfg, "dataset.csv"), Path::to_path_buf);
    save_dataset(&g.dataset, &path)?;
    reports::discovery_csv(cfg, &g.curve).save(&out_path(cfg, "discovery_curve.csv"))?;
    let meta = &g.dataset.meta;
    write_json(
        &out_path(cfg, "generate_summary.json"),
        &GenerateSummary {
            version: version(),
            config: cfg,
            case_name: &meta.case_name,
            n_bus: case.net.n_bus(),
            n_gen: case.net.n_gen(),
            n_branch: case.net.n_branch(),
            generator_rows: case.poly.generator_rows(),
            flow_rows: case.poly.flow_row_count(),
            n_drawn: meta.n_drawn,
            n_infeasible: meta.n_infeasible,
            dictionary_size: g.dataset.dictionary.len(),
            window_stop: g.window_stop,
            unseen_mass: g.unseen_mass,
        },
    )?;
    println!(
        "{}: {} samples, {} distinct active sets, {} infeasible draws dropped -> {}",
        meta.case_name,
        g.dataset.len(),
        g.dataset.dictionary.len(),
        meta.n_infeasible,
        path.display()
    );
    Ok(g)
}

pub fn split(cfg: &RunConfig, ds: &Dataset) -> Result<(Dataset, Dataset), Failure> {
    Ok(split_dataset(ds, cfg.train_fraction, cfg.seed)?)
}

pub fn cmd_train(
    cfg: &RunConfig,
    dataset_path: &Path,
    model_path: Option<&Path>,
    strict: bool,
) -> Result<(), Failure> {
    cfg.validate()?;
    let ds = load_dataset(dataset_path)?;
    let (train, _) = split(cfg, &ds)?;
    ensure_output_dir(cfg)?;
    let tcfg = train_config(cfg);
    let out = fit(&train, &tcfg)?;
    if out.warnings.contains(&TrainWarning::SingleClassDataset) {
        if strict {
            return Err(Failure::input("training set holds a single class"));
        }
        eprintln!("warning: training set holds a single class");
    }
    let path = model_path.map_or_else(|| out_path(cfg, "model.json"), Path::to_path_buf);
    write_model_file(&path, &out.model, &tcfg)?;
    reports::history_csv(cfg, &out.history).save(&out_path(cfg, "history.csv"))?;
    if let Some(last) = out.history.last() {
        println!(
            "trained on {} samples, {} classes: final loss {:.5}, train top-1 {:.4} -> {}",
            train.len(),
            out.model.classes,
            last.mean_loss,
            last.train_top1,
            path.display()
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    version: String,
    config: &'a RunConfig,
    seed: u64,
    case_name: &'a str,
    n_test: usize,
    dictionary_size: usize,
    generator_fixed_pct: f64,
    flow_fixed_pct: f64,
    report: &'a EvalReport,
    fallback_lp_solves: usize,
}

#[derive(Serialize)]
struct PolicyTiming {
    k: usize,
    mean_seconds_per_sample: f64,
}

#[derive(Serialize)]
struct Timing {
    lp_mean_seconds_per_sample: f64,
    policies: Vec<PolicyTiming>,
}

pub fn cmd_evaluate(
    cfg: &RunConfig,
    model_path: &Path,
    dataset_path: &Path,
    fallback_lp: bool,
) -> Result<EvalReport, Failure> {
    cfg.validate()?;
    let case = prepare_case(&cfg.case_path)?;
    let file = read_model_file(model_path)?;
    let ds = load_dataset(dataset_path)?;
    if ds.meta.n_bus != case.net.n_bus() {
        return Err(Failure::mismatch("dataset was generated on a different case"));
    }
    let (_, test) = split(cfg, &ds)?;
    let policy = ClassifierPolicy::new(&file.model, &ds.dictionary)?
        .with_tolerance(cfg.eval.feasibility_tol);
    ensure_output_dir(cfg)?;

    let report = evaluate(&policy, &case.poly, &test, &cfg.eval.k_list)?;

    // per-sample outcomes and timing
    let mut gaps = CsvReport::new(cfg, &["sample", "k", "outcome", "cost", "true_cost", "gap", "candidates"]);
    let mut timings = Vec::new();
    let mut fallback_solves = 0;
    for &k in &cfg.eval.k_list {
        let k_eff = k.min(file.model.classes);
        let start = Instant::now();
        let results = test
            .samples
            .iter()
            .map(|s| policy.evaluate(&case.poly, &s.omega, k_eff).map(|r| r.grade(s.cost)))
            .collect::<Result<Vec<_>, _>>()?;
        let elapsed = start.elapsed().as_secs_f64();
        timings.push(PolicyTiming {
            k,
            mean_seconds_per_sample: elapsed / test.len().max(1) as f64,
        });
        for (i, (r, s)) in results.iter().zip(&test.samples).enumerate() {
            let (outcome, cost, gap) = match r.outcome {
                PolicyOutcome::NoFeasibleCandidate if fallback_lp => {
                    fallback_solves += 1;
                    let lp = solve_dcopf(&case.poly, &s.omega)?;
                    let c = if lp.status == SolveStatus::Optimal { lp.cost } else { f64::NAN };
                    ("fallback_lp", c, String::new())
                }
                PolicyOutcome::NoFeasibleCandidate => ("no_feasible_candidate", f64::NAN, String::new()),
                PolicyOutcome::Optimal => ("optimal", r.cost, reports::f(relative_gap(r.cost, s.cost))),
                _ => ("feasible_suboptimal", r.cost, reports::f(relative_gap(r.cost, s.cost))),
            };
            let cost = if cost.is_nan() { String::new() } else { reports::f(cost) };
            gaps.row([
                i.to_string(),
                k.to_string(),
                outcome.to_string(),
                cost,
                reports::f(s.cost),
                gap,
                r.candidates_evaluated.to_string(),
            ]);
        }
    }
    let start = Instant::now();
    for s in &test.samples {
        solve_dcopf(&case.poly, &s.omega)?;
    }
    let lp_mean = start.elapsed().as_secs_f64() / test.len().max(1) as f64;

    let fixed = fixed_status_report(&ds, &case.poly);
    reports::accuracy_csv(cfg, &report).save(&out_path(cfg, "accuracy.csv"))?;
    gaps.save(&out_path(cfg, "gaps.csv"))?;
    reports::confusion_csv(cfg, &report).save(&out_path(cfg, "confusion.csv"))?;
    reports::fixed_status_csv(cfg, &fixed).save(&out_path(cfg, "fixed_status.csv"))?;
    reports::frequency_csv(cfg, &frequency_distribution(&ds)).save(&out_path(cfg, "frequency.csv"))?;
    write_json(
        &out_path(cfg, "summary.json"),
        &EvalSummary {
            version: version(),
            config: cfg,
            seed: cfg.seed,
            case_name: &ds.meta.case_name,
            n_test: test.len(),
            dictionary_size: ds.dictionary.len(),
            generator_fixed_pct: fixed.generator_fixed_pct(),
            flow_fixed_pct: fixed.flow_fixed_pct(),
            report: &report,
            fallback_lp_solves: fallback_solves,
        },
    )?;
    write_json(
        &out_path(cfg, "timing.json"),
        &Timing {
            lp_mean_seconds_per_sample: lp_mean,
            policies: timings,
        },
    )?;
    for s in &report.per_k {
        println!(
            "K={}: accuracy {:.4}, feasible {:.4}, mean gap {:.3e}",
            s.k, s.accuracy, s.feasibility_rate, s.gap.mean_gap
        );
    }
    Ok(report)
}

pub struct SweepResult {
    pub learning_curve: Vec<AccuracyCell>,
    pub depth: Vec<AccuracyCell>,
}

/// Learning curve over `cfg.sweep.sizes` and depth table over
/// `cfg.sweep.depths`; every cell trains its own model and cells run in
/// parallel on `pool`.
pub fn sweep(cfg: &RunConfig, ds: &Dataset, pool: &ThreadPool) -> Result<SweepResult, Failure> {
    let (train, test) = split(cfg, ds)?;
    let tcfg = train_config(cfg);
    let k = &cfg.eval.k_list;
    let (curve, depth) = pool.install(|| {
        let curve: Result<Vec<Vec<AccuracyCell>>, _> = cfg
            .sweep
            .sizes
            .par_iter()
            .map(|&size| learning_curve(&train, &test, &[size], &tcfg, k))
            .collect();
        let depth: Result<Vec<Vec<AccuracyCell>>, _> = cfg
            .sweep
            .depths
            .par_iter()
            .map(|&d| depth_study(&train, &test, &[d], &tcfg, k))
            .collect();
        (curve, depth)
    });
    Ok(SweepResult {
        learning_curve: curve?.into_iter().flatten().collect(),
        depth: depth?.into_iter().flatten().collect(),
    })
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    version: String,
    config: &'a RunConfig,
    seed: u64,
    learning_curve: &'a [AccuracyCell],
    accuracy_by_depth: &'a [AccuracyCell],
}

pub fn cmd_sweep(cfg: &RunConfig, dataset_path: &Path, pool: &ThreadPool) -> Result<SweepResult, Failure> {
    cfg.validate()?;
    let ds = load_dataset(dataset_path)?;
    ensure_output_dir(cfg)?;
    let res = sweep(cfg, &ds, pool)?;
    reports::cells_csv(cfg, "train_size", &res.learning_curve).save(&out_path(cfg, "learning_curve.csv"))?;
    reports::cells_csv(cfg, "depth", &res.depth).save(&out_path(cfg, "accuracy_by_depth.csv"))?;
    write_json(
        &out_path(cfg, "sweep_summary.json"),
        &SweepSummary {
            version: version(),
            config: cfg,
            seed: cfg.seed,
            learning_curve: &res.learning_curve,
            accuracy_by_depth: &res.depth,
        },
    )?;
    for c in res.learning_curve.iter().chain(&res.depth) {
        println!("setting {} K={}: {:.4}", c.setting, c.k, c.eta);
    }
    Ok(res)
}

#[derive(Serialize)]
struct CaseInventory<'a> {
    version: String,
    config: &'a RunConfig,
    case_name: &'a str,
    n_bus: usize,
    n_gen: usize,
    n_branch: usize,
    n_rated_branch: usize,
    generator_rows: usize,
    flow_rows: usize,
    n_samples: usize,
    n_infeasible: usize,
    active_sets: usize,
    generator_fixed_pct: f64,
    flow_fixed_pct: f64,
}

/// Dataset-only tables: case inventory, fixed status and set frequencies.
pub fn cmd_report(cfg: &RunConfig, dataset_path: &Path) -> Result<(), Failure> {
    cfg.validate()?;
    let case = prepare_case(&cfg.case_path)?;
    let ds = load_dataset(dataset_path)?;
    if ds.meta.n_bus != case.net.n_bus() {
        return Err(Failure::mismatch("dataset was generated on a different case"));
    }
    ensure_output_dir(cfg)?;
    let fixed = fixed_status_report(&ds, &case.poly);
    reports::fixed_status_csv(cfg, &fixed).save(&out_path(cfg, "fixed_status.csv"))?;
    reports::frequency_csv(cfg, &frequency_distribution(&ds)).save(&out_path(cfg, "frequency.csv"))?;
    let inv = CaseInventory {
        version: version(),
        config: cfg,
        case_name: &ds.meta.case_name,
        n_bus: case.net.n_bus(),
        n_gen: case.net.n_gen(),
        n_branch: case.net.n_branch(),
        n_rated_branch: case.net.branches.iter().filter(|b| b.is_rated()).count(),
        generator_rows: case.poly.generator_rows(),
        flow_rows: case.poly.flow_row_count(),
        n_samples: ds.len(),
        n_infeasible: ds.meta.n_infeasible,
        active_sets: ds.dictionary.len(),
        generator_fixed_pct: fixed.generator_fixed_pct(),
        flow_fixed_pct: fixed.flow_fixed_pct(),
    };
    write_json(&out_path(cfg, "case_inventory.json"), &inv)?;
    println!(
        "{}: {} buses, {} generators, {} branches; {} active sets; fixed generator rows {:.2}%, flow rows {:.2}%",
        inv.case_name,
        inv.n_bus,
        inv.n_gen,
        inv.n_branch,
        inv.active_sets,
        inv.generator_fixed_pct,
        inv.flow_fixed_pct
    );
    Ok(())
}
