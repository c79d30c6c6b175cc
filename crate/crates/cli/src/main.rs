//! `mrso`: synthetic data, single fits, prediction, cross-validation, the
//! labeled-only baseline and parameter sweeps.
//!
//! Exit codes: 0 success, 1 validation or input error, 2 solver divergence.

#[macro_use]
mod space;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mrso::data::{
    load_dataset, load_points, save_dataset, save_taxonomy, synth_blobs, synth_chains, synth_taxonomy_blobs,
    BlobsConfig, ChainSynthConfig, TaxonomyBlobsConfig,
};
use mrso::eval::{
    asl, run_baseline_supervised, run_cv, sweep, write_report, write_sweep_csv, EvalReport, GraphConfig, SweepParam,
};
use mrso::graph::build_knn_graph;
use mrso::solver::{self, write_trace_csv, SlackSchedule, SolverConfig, ZInit};
use mrso::spaces::{ChainLoss, ChainSpace, MulticlassSpace, Taxonomy, TaxonomySpace};
use mrso::{OutputSpace, Weights};
use serde::{Deserialize, Serialize};

use space::{SpaceArgs, SpaceKind, SpaceSpec};

#[derive(Parser)]
#[command(
    name = "mrso",
    version,
    about = "Semi-supervised structured output prediction with manifold-regularized slack outputs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic dataset.
    Synth(SynthArgs),
    /// Fit one model on a dataset with unlabeled points.
    Fit(FitArgs),
    /// Predict outputs with a fitted model.
    Predict(PredictArgs),
    /// Ten-fold cross-validation.
    Cv(RunArgs),
    /// Same folds, trained on labeled points only.
    Baseline(RunArgs),
    /// Cross-validated mean ASL over a range of c1 or c2.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    space: SpaceKind,
    #[arg(long, default_value_t = 8)]
    classes: usize,
    #[arg(long, default_value_t = 50)]
    per_class: usize,
    /// Points per leaf for taxonomy data.
    #[arg(long, default_value_t = 20)]
    per_leaf: usize,
    /// Taxonomy JSON file; the built-in scene tree when absent.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Also write the tree used, for later `--taxonomy`.
    #[arg(long)]
    taxonomy_out: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    alphabet: usize,
    #[arg(long, default_value_t = 3)]
    min_len: usize,
    #[arg(long, default_value_t = 6)]
    max_len: usize,
    /// Number of sequences.
    #[arg(long, default_value_t = 200)]
    count: usize,
    /// Probability of repeating the previous label; random transitions when absent.
    #[arg(long)]
    self_loop: Option<f64>,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 0.2)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON Lines file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ZInitArg {
    NearestLabeled,
    UniformRandom,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    /// Weight step size; 1/c2 when absent.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Gaussian width; median squared neighbor distance when absent.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "nearest-labeled")]
    z_init: ZInitArg,
    /// Sequential slack updates reading already-updated neighbors.
    #[arg(long)]
    gauss_seidel: bool,
}

impl SolverArgs {
    fn solver(&self) -> SolverConfig {
        SolverConfig {
            c1: self.c1,
            c2: self.c2,
            eta: self.eta,
            max_iters: self.iters,
            seed: self.seed,
            z_init: match self.z_init {
                ZInitArg::NearestLabeled => ZInit::NearestLabeled,
                ZInitArg::UniformRandom => ZInit::UniformRandom,
            },
            schedule: if self.gauss_seidel { SlackSchedule::GaussSeidel } else { SlackSchedule::Jacobi },
        }
    }

    fn graph(&self) -> GraphConfig {
        GraphConfig { k: self.k, sigma: self.sigma }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// JSON Lines dataset; `"y": null` marks unlabeled points.
    #[arg(long)]
    data: PathBuf,
    /// Directory for model.json, trace.csv, slack.jsonl and graph.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// JSON Lines output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Fully labeled JSON Lines dataset.
    #[arg(long)]
    data: PathBuf,
    /// Directory for report.json, folds.csv, traces/ and timing.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    C1,
    C2,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "c1")]
    param: ParamArg,
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10,100,1000")]
    values: Vec<f64>,
    /// Directory for sweep.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    space: SpaceSpec,
    weights: Weights,
    solver: SolverConfig,
    graph: GraphConfig,
    iterations: usize,
}

#[derive(Serialize)]
struct SlackRecord<'a, Y> {
    id: usize,
    z: &'a Y,
    labeled: bool,
}

#[derive(Serialize)]
struct PredictionRecord<Y> {
    id: usize,
    y: Y,
}

/// Non-error exit that still signals divergence.
struct Diverged;

fn create_out(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn synth(args: &SynthArgs) -> Result<()> {
    match args.space {
        SpaceKind::Multiclass => {
            let ds = synth_blobs(&BlobsConfig {
                classes: args.classes,
                per_class: args.per_class,
                dim: args.dim,
                spread: args.spread,
                seed: args.seed,
            })?;
            save_dataset(&ds, &MulticlassSpace::new(args.classes, args.dim)?, &args.out)?;
        }
        SpaceKind::Taxonomy => {
            let tree = match &args.taxonomy {
                Some(p) => mrso::data::load_taxonomy(p)?,
                None => Taxonomy::scene_tree(),
            };
            let cfg =
                TaxonomyBlobsConfig { per_leaf: args.per_leaf, dim: args.dim, spread: args.spread, seed: args.seed };
            let ds = synth_taxonomy_blobs(&tree, &cfg)?;
            if let Some(p) = &args.taxonomy_out {
                save_taxonomy(&tree, p)?;
            }
            save_dataset(&ds, &TaxonomySpace::new(tree, args.dim)?, &args.out)?;
        }
        SpaceKind::Chain => {
            let ds = synth_chains(&ChainSynthConfig {
                alphabet: args.alphabet,
                min_len: args.min_len,
                max_len: args.max_len,
                count: args.count,
                dim: args.dim,
                spread: args.spread,
                self_loop: args.self_loop,
                seed: args.seed,
            })?;
            save_dataset(&ds, &ChainSpace::new(args.alphabet, args.dim, ChainLoss::Hamming)?, &args.out)?;
        }
    }
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn fit<S: OutputSpace>(space: &S, spec: SpaceSpec, args: &FitArgs) -> Result<Option<Diverged>> {
    let ds = load_dataset(&args.data, space)?;
    let cfg = args.solver.solver();
    let graph_cfg = args.solver.graph();
    cfg.validate()?;
    let graph = build_knn_graph(&ds, space, graph_cfg.k, graph_cfg.sigma)?;
    fs::create_dir_all(&args.out)?;
    graph.write_csv(create_out(&args.out.join("graph.csv"))?)?;
    let state = match solver::fit(&ds, &graph, space, &cfg) {
        Ok(s) => s,
        Err(mrso::Error::Diverged { iteration, trace }) => {
            write_trace_csv(&trace, create_out(&args.out.join("trace.csv"))?)?;
            eprintln!("diverged at iteration {iteration}; partial trace in {}", args.out.display());
            return Ok(Some(Diverged));
        }
        Err(e) => return Err(e.into()),
    };
    write_trace_csv(&state.trace, create_out(&args.out.join("trace.csv"))?)?;
    let mut slack = create_out(&args.out.join("slack.jsonl"))?;
    for (p, z) in ds.points.iter().zip(&state.z) {
        serde_json::to_writer(&mut slack, &SlackRecord { id: p.id, z, labeled: p.is_labeled() })?;
        slack.write_all(b"\n")?;
    }
    slack.flush()?;
    let model = ModelFile { space: spec, weights: state.w, solver: cfg, graph: graph_cfg, iterations: state.iteration };
    let mut out = create_out(&args.out.join("model.json"))?;
    serde_json::to_writer_pretty(&mut out, &model)?;
    out.write_all(b"\n")?;
    out.flush()?;
    if let Some(last) = state.trace.last() {
        eprintln!(
            "{} iterations, objective {:.6} (M {:.6}, L {:.6}, R {:.6})",
            state.iteration, last.objective, last.manifold, last.loss, last.regularizer
        );
    }
    Ok(None)
}

fn predict<S: OutputSpace>(space: &S, w: &Weights, args: &PredictArgs) -> Result<()> {
    let ds = load_points(&args.data, space)?;
    let preds = ds.points.iter().map(|p| solver::predict(w, &p.x, space)).collect::<mrso::Result<Vec<_>>>()?;
    let mut out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(create_out(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    for (p, y) in ds.points.iter().zip(&preds) {
        serde_json::to_writer(&mut out, &PredictionRecord { id: p.id, y })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    let (guess, truth): (Vec<_>, Vec<_>) =
        ds.points.iter().zip(&preds).filter_map(|(p, y)| p.y.clone().map(|t| (y.clone(), t))).unzip();
    if !truth.is_empty() {
        eprintln!("ASL over {} labeled points: {:.6}", truth.len(), asl(&guess, &truth, space)?);
    }
    Ok(())
}

fn summarize(report: &EvalReport) {
    for f in &report.folds {
        match (&f.error, f.test_asl) {
            (Some(e), _) => eprintln!("fold {}: {e}", f.fold),
            (None, Some(a)) => eprintln!(
                "fold {}: test ASL {a:.4}{}",
                f.fold,
                f.transductive_asl.map(|t| format!(", transductive ASL {t:.4}")).unwrap_or_default()
            ),
            (None, None) => eprintln!("fold {}: no score", f.fold),
        }
    }
    if let Some(m) = report.mean_test_asl {
        println!("mean test ASL {m:.6}");
    }
    if let Some(m) = report.mean_transductive_asl {
        println!("mean transductive ASL {m:.6}");
    }
}

fn evaluate<S: OutputSpace>(space: &S, args: &RunArgs, baseline: bool) -> Result<Option<Diverged>> {
    let ds = load_dataset(&args.data, space)?;
    let cfg = args.solver.solver();
    let graph = args.solver.graph();
    let report = if baseline {
        run_baseline_supervised(&ds, space, &cfg, &graph, args.solver.seed)?
    } else {
        run_cv(&ds, space, &cfg, &graph, args.solver.seed)?
    };
    write_report(&report, &args.out)?;
    summarize(&report);
    Ok((report.diverged_folds() > 0).then_some(Diverged))
}

fn run_sweep<S: OutputSpace>(space: &S, args: &SweepArgs) -> Result<()> {
    let ds = load_dataset(&args.data, space)?;
    let param = match args.param {
        ParamArg::C1 => SweepParam::C1,
        ParamArg::C2 => SweepParam::C2,
    };
    let rows = sweep(param, &args.values, &args.solver.solver(), &args.solver.graph(), args.solver.seed, &ds, space)?;
    fs::create_dir_all(&args.out)?;
    write_sweep_csv(&rows, create_out(&args.out.join("sweep.csv"))?)?;
    for r in &rows {
        match (r.mean_test_asl, &r.error) {
            (_, Some(e)) => println!("{}: {e}", r.value),
            (Some(a), None) => println!("{}: mean test ASL {a:.6}", r.value),
            (None, None) => println!("{}: no score", r.value),
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Option<Diverged>> {
    match cli.command {
        Command::Synth(args) => synth(&args).map(|_| None),
        Command::Fit(args) => {
            let spec = args.space.resolve(&args.data)?;
            with_space!(spec.build()?, s => fit(&s, spec.clone(), &args))
        }
        Command::Predict(args) => {
            let text = fs::read_to_string(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
            let model: ModelFile = serde_json::from_str(&text).context("parsing model file")?;
            if !model.weights.is_finite() {
                bail!("model weights are not finite");
            }
            with_space!(model.space.build()?, s => predict(&s, &model.weights, &args)).map(|_| None)
        }
        Command::Cv(args) => {
            let spec = args.space.resolve(&args.data)?;
            with_space!(spec.build()?, s => evaluate(&s, &args, false))
        }
        Command::Baseline(args) => {
            let spec = args.space.resolve(&args.data)?;
            with_space!(spec.build()?, s => evaluate(&s, &args, true))
        }
        Command::Sweep(args) => {
            let spec = args.space.resolve(&args.data)?;
            with_space!(spec.build()?, s => run_sweep(&s, &args)).map(|_| None)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(Diverged)) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<mrso::Error>() {
                Some(mrso::Error::Diverged { .. }) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
