use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, Context};
use serde::Serialize;

use mnas_core::arch::{analyze as arch_stats, assemble, MacroConfig};
use mnas_core::config::{EvaluatorKind, RunConfig};
use mnas_core::eval::bridge::{BridgeClient, BridgeEvaluator};
use mnas_core::eval::{CachedEvaluator, Evaluator, NearestNeighbor, SyntheticOracle};
use mnas_core::mcts::{run_search, write_csv, write_curve, write_jsonl, SearchError};
use mnas_core::metrics::{confusion_counts, read_mask, segmentation_metrics, ConfusionCounts, SegmentationMetrics};
use mnas_core::space::{decode, encode, enumerate_space, space_size};
use mnas_core::stopping::{budget_savings, StopReport};

/// Bad input (exit 2) or a failed run (exit 1).
pub enum Failure {
    Input(anyhow::Error),
    Run(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Run(_) => 1,
            Failure::Input(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Input(e) | Failure::Run(e) => e,
        }
    }
}

type Outcome = Result<(), Failure>;

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Input(e.into())
}

fn run<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Run(e.into())
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    RunConfig::load(path)
        .with_context(|| format!("config {}", path.display()))
        .map_err(input)
}

fn make_evaluator(config: &RunConfig) -> Result<Box<dyn Evaluator>, Failure> {
    match config.evaluator.kind {
        EvaluatorKind::Synthetic => {
            let oracle = SyntheticOracle::new(config.oracle_config()).map_err(input)?;
            Ok(Box::new(oracle))
        }
        EvaluatorKind::Bridge => {
            let bridge = config
                .bridge
                .as_ref()
                .ok_or_else(|| input(anyhow!("missing [bridge] section")))?;
            let timeout = Duration::from_secs_f64(bridge.timeout_seconds);
            let client = BridgeClient::connect(&bridge.endpoint, timeout)
                .context("starting the bridge worker")
                .map_err(run)?;
            Ok(Box::new(BridgeEvaluator::new(client, bridge.epochs, config.rng_seed)))
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush()?;
    Ok(())
}

pub fn search(config_path: &Path, output: Option<PathBuf>) -> Outcome {
    let config = load_config(config_path)?;
    let out_dir = output.unwrap_or_else(|| config.output_dir.clone());
    let evaluator = make_evaluator(&config)?;
    let predictor = NearestNeighbor::default();
    let result = run_search(config.search_config(), evaluator, &predictor).map_err(|e| match e {
        SearchError::Space(_) | SearchError::Config(_) => input(e),
        _ => run(e),
    })?;

    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(run)?;
    let stats = assemble(&result.best_genotype, &config.macro_arch)
        .map(|g| arch_stats(&g))
        .context("assembling the best genotype")
        .map_err(run)?;
    let max = config.budget.max_iterations;
    let report = StopReport {
        stop_reason: result.stop_reason,
        stop_iteration: result.iterations,
        best_iteration: result.best_iteration,
        max_iterations: max,
        patience: config.budget.patience,
        savings_fraction: budget_savings(result.iterations, max).map_err(run)?,
    };
    (|| -> anyhow::Result<()> {
        write_with(&out_dir.join("trace.jsonl"), |w| write_jsonl(w, &result.trace))?;
        write_with(&out_dir.join("trace.csv"), |w| write_csv(w, &result.trace))?;
        write_with(&out_dir.join("curves.csv"), |w| write_curve(w, &result.trace))?;
        fs::write(out_dir.join("best.genotype"), encode(&result.best_genotype))?;
        write_json(&out_dir.join("archstats.json"), &stats)?;
        write_json(&out_dir.join("stop_report.json"), &report)
    })()
    .map_err(run)?;

    println!(
        "best fitness {:.6} at iteration {} ({} iterations, {} evaluations, stopped: {})",
        result.best_fitness, result.best_iteration, result.iterations, result.evaluations_used, report.stop_reason,
    );
    println!(
        "budget saved {:.1}%, {} parameters, artifacts in {}",
        report.savings_fraction * 100.0,
        stats.total_params,
        out_dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EnumerateReport {
    space_size: u128,
    evaluated: usize,
    best_fitness: f64,
    best_genotype: String,
}

pub fn enumerate(config_path: &Path) -> Outcome {
    let config = load_config(config_path)?;
    let size = space_size(&config.space).map_err(input)?;
    let genotypes = enumerate_space(&config.space, config.enumerate_cap as u128).map_err(input)?;
    let mut cache = CachedEvaluator::new(make_evaluator(&config)?);
    let mut best = None;
    for g in genotypes {
        let (r, _) = cache.evaluate(&g).map_err(run)?;
        if best.as_ref().is_none_or(|(_, f)| r.fitness > *f) {
            best = Some((g, r.fitness));
        }
    }
    let (g, fitness) = best.ok_or_else(|| run(anyhow!("space is empty")))?;
    let report = EnumerateReport {
        space_size: size,
        evaluated: cache.evaluations(),
        best_fitness: fitness,
        best_genotype: encode(&g),
    };
    println!("{}", serde_json::to_string_pretty(&report).map_err(run)?);
    Ok(())
}

pub fn analyze(genotype_path: &Path, config_path: Option<&Path>) -> Outcome {
    let macro_cfg = match config_path {
        Some(p) => load_config(p)?.macro_arch,
        None => MacroConfig::default(),
    };
    let text = fs::read_to_string(genotype_path)
        .with_context(|| format!("reading {}", genotype_path.display()))
        .map_err(input)?;
    let genotype = decode(&text)
        .with_context(|| format!("decoding {}", genotype_path.display()))
        .map_err(input)?;
    let graph = assemble(&genotype, &macro_cfg).map_err(input)?;
    println!("{}", serde_json::to_string_pretty(&arch_stats(&graph)).map_err(run)?);
    Ok(())
}

#[derive(Serialize)]
struct MetricsReport {
    width: usize,
    height: usize,
    counts: ConfusionCounts,
    metrics: SegmentationMetrics,
}

pub fn metrics(pred: &Path, truth: &Path) -> Outcome {
    let p = read_mask(pred).map_err(input)?;
    let t = read_mask(truth).map_err(input)?;
    let counts = confusion_counts(&p, &t).map_err(input)?;
    let report = MetricsReport {
        width: p.width(),
        height: p.height(),
        counts,
        metrics: segmentation_metrics(counts),
    };
    println!("{}", serde_json::to_string_pretty(&report).map_err(run)?);
    Ok(())
}

pub fn savings(stop: usize, max: usize) -> Outcome {
    if stop == 0 {
        return Err(input(anyhow!("stop iteration must be >= 1")));
    }
    let fraction = budget_savings(stop, max).map_err(input)?;
    println!("{fraction:.5} ({:.1}%)", fraction * 100.0);
    Ok(())
}
