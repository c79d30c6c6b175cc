//! Cross-validated evaluation: average structured loss on held-out folds
//! (inductive) and on masked training points (transductive), a labeled-only
//! baseline, and tradeoff-parameter sweeps.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_folds, mask_labels, FoldPlan, FoldSplit, NUM_FOLDS};
use crate::error::{Error, Result};
use crate::graph::{build_knn_graph, NeighborGraph};
use crate::model::{DataPoint, Dataset, OutputSpace};
use crate::solver::{self, write_trace_csv, IterationRecord, SolverConfig, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub k: usize,
    pub sigma: Option<f64>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { k: 10, sigma: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mrso,
    /// Labeled training points only, no graph.
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_labeled: usize,
    pub n_test: usize,
    pub test_asl: Option<f64>,
    pub transductive_asl: Option<f64>,
    pub final_objective: Option<f64>,
    pub error: Option<String>,
    pub diverged: bool,
    pub trace_file: String,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

/// Serializes deterministically; wall-clock time lives in `elapsed_ms`, which
/// is not serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub space: String,
    pub seed: u64,
    pub solver: SolverConfig,
    pub graph: GraphConfig,
    pub folds: Vec<FoldResult>,
    pub mean_test_asl: Option<f64>,
    pub mean_transductive_asl: Option<f64>,
    #[serde(skip)]
    pub elapsed_ms: Vec<u128>,
}

/// Called on every solver iteration of every fold with the fold index and the
/// exact training set the solver sees.
pub type FoldObserver<'a, Y> = &'a (dyn Fn(usize, &Dataset<Y>, &IterationRecord<'_, Y>) + Sync);

impl EvalReport {
    pub fn diverged_folds(&self) -> usize {
        self.folds.iter().filter(|f| f.diverged).count()
    }
}

/// `ASL = (1/|T|) Σ Δ(prediction, truth)`.
pub fn asl<S: OutputSpace + ?Sized>(predictions: &[S::Output], truths: &[S::Output], space: &S) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::contract(format!("{} predictions for {} truths", predictions.len(), truths.len())));
    }
    if truths.is_empty() {
        return Err(Error::contract("ASL over an empty set"));
    }
    let total: f64 = predictions.iter().zip(truths).map(|(p, t)| space.delta(p, t)).sum();
    Ok(total / truths.len() as f64)
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Keeps only labeled training points, renumbered.
fn labeled_only<Y: Clone>(train: &Dataset<Y>) -> Dataset<Y> {
    let points = train
        .points
        .iter()
        .filter(|p| p.is_labeled())
        .enumerate()
        .map(|(id, p)| DataPoint { id, x: p.x.clone(), y: p.y.clone() })
        .collect();
    Dataset::new(train.space_id.clone(), points)
}

/// Test-set truths; the test side of a split always carries labels.
fn truths<Y: Clone>(ds: &Dataset<Y>) -> Vec<Y> {
    ds.points.iter().map(|p| p.y.clone().expect("source dataset is fully labeled")).collect()
}

fn run_fold<S: OutputSpace + ?Sized>(
    split: &FoldSplit<S::Output>,
    space: &S,
    method: Method,
    solver_cfg: &SolverConfig,
    graph_cfg: &GraphConfig,
    observer: FoldObserver<'_, S::Output>,
) -> FoldResult {
    let mut result = FoldResult {
        fold: split.run,
        n_train: split.train.len(),
        n_labeled: split.train.labeled_count(),
        n_test: split.test.len(),
        test_asl: None,
        transductive_asl: None,
        final_objective: None,
        error: None,
        diverged: false,
        trace_file: format!("traces/fold_{:02}.csv", split.run),
        trace: Vec::new(),
    };
    let outcome = (|| -> Result<()> {
        let (train, graph) = match method {
            Method::Mrso => {
                let g = build_knn_graph(&split.train, space, graph_cfg.k, graph_cfg.sigma)?;
                (split.train.clone(), g)
            }
            Method::Baseline => {
                let train = labeled_only(&split.train);
                let g = NeighborGraph::empty(train.len());
                (train, g)
            }
        };
        result.n_train = train.len();
        result.n_labeled = train.labeled_count();
        let state = match solver::fit_with_observer(&train, &graph, space, solver_cfg, |rec| {
            observer(split.run, &train, rec)
        }) {
            Ok(s) => s,
            Err(Error::Diverged { iteration, trace }) => {
                result.diverged = true;
                result.trace = trace;
                return Err(Error::Diverged { iteration, trace: Vec::new() });
            }
            Err(e) => return Err(e),
        };
        result.final_objective = state.trace.last().map(|r| r.objective);
        result.trace = state.trace.clone();

        let preds =
            split.test.points.iter().map(|p| solver::predict(&state.w, &p.x, space)).collect::<Result<Vec<_>>>()?;
        result.test_asl = Some(asl(&preds, &truths(&split.test), space)?);

        let masked: Vec<(usize, &S::Output)> =
            split.hidden.iter().enumerate().filter_map(|(i, h)| h.as_ref().map(|y| (i, y))).collect();
        if !masked.is_empty() {
            let guesses = match method {
                Method::Mrso => masked.iter().map(|&(i, _)| Ok(state.z[i].clone())).collect::<Result<Vec<_>>>()?,
                Method::Baseline => masked
                    .iter()
                    .map(|&(i, _)| solver::predict(&state.w, &split.train.points[i].x, space))
                    .collect::<Result<Vec<_>>>()?,
            };
            let truth: Vec<S::Output> = masked.iter().map(|(_, y)| (*y).clone()).collect();
            result.transductive_asl = Some(asl(&guesses, &truth, space)?);
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        result.error = Some(e.to_string());
    }
    result
}

/// Builds every training/test split of the ten-fold protocol. Masked labels
/// are removed from `train` and kept only in `hidden`.
pub fn prepare_folds<Y: Clone>(ds: &Dataset<Y>, seed: u64) -> Result<(FoldPlan, Vec<FoldSplit<Y>>)> {
    if ds.points.iter().any(|p| p.y.is_none()) {
        return Err(Error::contract("cross-validation needs a fully labeled dataset"));
    }
    let plan = make_folds(ds, seed)?;
    let splits = (0..NUM_FOLDS).map(|r| mask_labels(ds, &plan, r)).collect::<Result<Vec<_>>>()?;
    Ok((plan, splits))
}

/// Either arm of the ten-fold protocol with a per-iteration hook.
pub fn evaluate_observed<S: OutputSpace + ?Sized>(
    ds: &Dataset<S::Output>,
    space: &S,
    method: Method,
    solver_cfg: &SolverConfig,
    graph_cfg: &GraphConfig,
    seed: u64,
    observer: FoldObserver<'_, S::Output>,
) -> Result<EvalReport> {
    solver_cfg.validate()?;
    let (_, splits) = prepare_folds(ds, seed)?;
    let timed: Vec<(FoldResult, u128)> = splits
        .par_iter()
        .map(|split| {
            let start = Instant::now();
            let r = run_fold(split, space, method, solver_cfg, graph_cfg, observer);
            (r, start.elapsed().as_millis())
        })
        .collect();
    let (folds, elapsed_ms): (Vec<FoldResult>, Vec<u128>) = timed.into_iter().unzip();
    Ok(EvalReport {
        method,
        space: space.space_id().to_string(),
        seed,
        solver: solver_cfg.clone(),
        graph: *graph_cfg,
        mean_test_asl: mean(folds.iter().map(|f| f.test_asl)),
        mean_transductive_asl: mean(folds.iter().map(|f| f.transductive_asl)),
        folds,
        elapsed_ms,
    })
}

/// Ten-fold cross-validation of the semi-supervised solver.
pub fn run_cv<S: OutputSpace + ?Sized>(
    ds: &Dataset<S::Output>,
    space: &S,
    solver_cfg: &SolverConfig,
    graph_cfg: &GraphConfig,
    seed: u64,
) -> Result<EvalReport> {
    evaluate_observed(ds, space, Method::Mrso, solver_cfg, graph_cfg, seed, &|_, _, _| {})
}

/// Same folds as [`run_cv`], trained on the labeled training points alone.
pub fn run_baseline_supervised<S: OutputSpace + ?Sized>(
    ds: &Dataset<S::Output>,
    space: &S,
    solver_cfg: &SolverConfig,
    graph_cfg: &GraphConfig,
    seed: u64,
) -> Result<EvalReport> {
    evaluate_observed(ds, space, Method::Baseline, solver_cfg, graph_cfg, seed, &|_, _, _| {})
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    C1,
    C2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub mean_test_asl: Option<f64>,
    pub mean_transductive_asl: Option<f64>,
    pub error: Option<String>,
}

/// One cross-validated run per value of `param`; failures are recorded per row.
pub fn sweep<S: OutputSpace + ?Sized>(
    param: SweepParam,
    values: &[f64],
    solver_cfg: &SolverConfig,
    graph_cfg: &GraphConfig,
    seed: u64,
    ds: &Dataset<S::Output>,
    space: &S,
) -> Result<Vec<SweepRow>> {
    sweep_observed(param, values, solver_cfg, graph_cfg, seed, ds, space, &|_, _, _| {})
}

#[allow(clippy::too_many_arguments)]
pub fn sweep_observed<S: OutputSpace + ?Sized>(
    param: SweepParam,
    values: &[f64],
    solver_cfg: &SolverConfig,
    graph_cfg: &GraphConfig,
    seed: u64,
    ds: &Dataset<S::Output>,
    space: &S,
    observer: FoldObserver<'_, S::Output>,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::contract("sweep needs at least one value"));
    }
    Ok(values
        .iter()
        .map(|&value| {
            let mut cfg = solver_cfg.clone();
            match param {
                SweepParam::C1 => cfg.c1 = value,
                SweepParam::C2 => cfg.c2 = value,
            }
            match evaluate_observed(ds, space, Method::Mrso, &cfg, graph_cfg, seed, observer) {
                Ok(r) => {
                    let failed: Vec<String> = r
                        .folds
                        .iter()
                        .filter_map(|f| f.error.as_ref().map(|e| format!("fold {}: {e}", f.fold)))
                        .collect();
                    SweepRow {
                        param,
                        value,
                        mean_test_asl: r.mean_test_asl,
                        mean_transductive_asl: r.mean_transductive_asl,
                        error: if failed.is_empty() { None } else { Some(failed.join("; ")) },
                    }
                }
                Err(e) => SweepRow {
                    param,
                    value,
                    mean_test_asl: None,
                    mean_transductive_asl: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["param", "value", "mean_test_asl", "mean_transductive_asl", "error"])?;
    for r in rows {
        let param = match r.param {
            SweepParam::C1 => "c1",
            SweepParam::C2 => "c2",
        };
        w.write_record([
            param.to_string(),
            r.value.to_string(),
            opt(r.mean_test_asl),
            opt(r.mean_transductive_asl),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-fold ASL table (box-plot input).
pub fn write_folds_csv<W: Write>(report: &EvalReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["fold", "test_asl", "transductive_asl", "final_objective", "error"])?;
    for f in &report.folds {
        w.write_record([
            f.fold.to_string(),
            opt(f.test_asl),
            opt(f.transductive_asl),
            opt(f.final_objective),
            f.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Trace as CSV text, one row per recorded iteration.
pub fn export_trace(trace: &[TraceRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_trace_csv(trace, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Writes `report.json`, `folds.csv`, `traces/fold_XX.csv` and `timing.json`
/// into `dir`. Everything except `timing.json` is reproducible byte for byte.
pub fn write_report(report: &EvalReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("traces"))?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;
    write_folds_csv(report, fs::File::create(dir.join("folds.csv"))?)?;
    for f in &report.folds {
        fs::write(dir.join(&f.trace_file), export_trace(&f.trace)?)?;
    }
    let timing = serde_json::json!({ "fold_elapsed_ms": report.elapsed_ms });
    fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;
    Ok(())
}
