//! Alternating optimizer for the manifold-regularized structured objective
//!
//! `O(w, z) = M(z) + C1 · L(w, z) + C2 · ½‖w‖²`
//!
//! where `M` sums `ω_ij Δ(z_i, z_j)` over graph edges and `L` sums the
//! loss-augmented upper bound `w·(Φ(x_i,υ_i) − Φ(x_i,z_i)) + Δ(υ_i, z_i)`.
//!
//! Each iteration `t`:
//! 1. `υ_i^t` maximizes the augmented score against `z_i^{t-1}` under `w^{t-1}`;
//! 2. unlabeled `z_i^t` minimize the per-point slack objective with neighbors
//!    held at `z^{t-1}` (labeled points stay at `y_i`);
//! 3. `w^t = (1 − ηC2) w^{t-1} − ηC1 Σ_i (Φ(x_i,υ_i^t) − Φ(x_i,z_i^t))`.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NeighborGraph;
use crate::model::{augmented_value, Dataset, OutputSpace, Weights};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZInit {
    /// Copy the output of the nearest labeled point.
    #[default]
    NearestLabeled,
    /// Seeded uniform draw from the output set.
    UniformRandom,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlackSchedule {
    /// Every `z_i^t` reads neighbors at `z^{t-1}`; order-independent.
    #[default]
    Jacobi,
    /// Points are swept in id order and read already-updated neighbors.
    GaussSeidel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub c1: f64,
    pub c2: f64,
    /// Fixed step size. `None` means `1 / c2`.
    pub eta: Option<f64>,
    pub max_iters: usize,
    pub seed: u64,
    #[serde(default)]
    pub z_init: ZInit,
    #[serde(default)]
    pub schedule: SlackSchedule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            c1: 1.0,
            c2: 1.0,
            eta: None,
            max_iters: 100,
            seed: 0,
            z_init: ZInit::NearestLabeled,
            schedule: SlackSchedule::Jacobi,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.c1) {
            return Err(Error::contract(format!("c1 must be positive, got {}", self.c1)));
        }
        if !positive(self.c2) {
            return Err(Error::contract(format!("c2 must be positive, got {}", self.c2)));
        }
        if let Some(eta) = self.eta {
            if !positive(eta) {
                return Err(Error::contract(format!("eta must be positive, got {eta}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::contract("max_iters must be at least 1"));
        }
        Ok(())
    }

    pub fn step_size(&self) -> f64 {
        self.eta.unwrap_or(1.0 / self.c2)
    }

    /// Multiplier on `w^{t-1}`. Exactly zero for the default step, where the
    /// update lands on the minimizer of the weight subproblem.
    fn decay(&self) -> f64 {
        match self.eta {
            None => 0.0,
            Some(eta) => 1.0 - eta * self.c2,
        }
    }
}

/// One objective snapshot. `objective = manifold + c1·loss + c2·regularizer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub manifold: f64,
    pub loss: f64,
    pub regularizer: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState<Y> {
    pub w: Weights,
    /// Slack outputs; labeled entries always equal their labels.
    pub z: Vec<Y>,
    /// Loss-augmented outputs for the current `(w, z)`; these are the `υ` the
    /// next iteration uses.
    pub upsilon: Vec<Y>,
    /// Completed iterations.
    pub iteration: usize,
    /// Row 0 is the initial state; one row per completed iteration after that.
    pub trace: Vec<TraceRow>,
}

/// Everything an iteration touched, handed to [`fit_with_observer`] callbacks.
#[derive(Debug)]
pub struct IterationRecord<'a, Y> {
    pub t: usize,
    pub w_prev: &'a Weights,
    pub w: &'a Weights,
    pub z_prev: &'a [Y],
    pub z: &'a [Y],
    /// `υ^t`, computed from `w^{t-1}` and `z^{t-1}`.
    pub upsilon: &'a [Y],
}

fn check_inputs<S: OutputSpace + ?Sized>(ds: &Dataset<S::Output>, g: &NeighborGraph, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if ds.labeled_count() == 0 {
        return Err(Error::contract("dataset has no labeled points"));
    }
    if g.num_nodes() != ds.len() {
        return Err(Error::contract(format!(
            "graph over {} nodes for a dataset of {} points",
            g.num_nodes(),
            ds.len()
        )));
    }
    Ok(())
}

fn nearest_labeled<S: OutputSpace + ?Sized>(ds: &Dataset<S::Output>, space: &S, i: usize) -> usize {
    let xi = space.embed(&ds.points[i].x);
    let mut best: Option<(usize, f64)> = None;
    for (j, p) in ds.points.iter().enumerate().filter(|(_, p)| p.is_labeled()) {
        let xj = space.embed(&p.x);
        let d2: f64 = xi.iter().zip(xj.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.is_none_or(|(_, bd)| d2 < bd) {
            best = Some((j, d2));
        }
    }
    best.expect("at least one labeled point").0
}

/// `w⁰ = 0`, labeled `z_i = y_i`, unlabeled `z_i` per the configured strategy.
pub fn initialize<S: OutputSpace + ?Sized>(
    ds: &Dataset<S::Output>,
    g: &NeighborGraph,
    space: &S,
    cfg: &SolverConfig,
) -> Result<SolverState<S::Output>> {
    check_inputs::<S>(ds, g, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let z = ds
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| match (&p.y, cfg.z_init) {
            (Some(y), _) => y.clone(),
            (None, ZInit::NearestLabeled) => {
                let j = nearest_labeled(ds, space, i);
                let yj = ds.points[j].y.as_ref().expect("labeled");
                space.project(&p.x, yj)
            }
            (None, ZInit::UniformRandom) => space.random_output(&p.x, &mut rng),
        })
        .collect();
    let mut state =
        SolverState { w: Weights::zeros(space.dim()), z, upsilon: Vec::new(), iteration: 0, trace: Vec::new() };
    state.upsilon = update_upsilon(&state, ds, space)?;
    let row = objective(&state, ds, g, space, cfg)?;
    state.trace.push(row);
    Ok(state)
}

/// `υ_i = argmax_y [w·(Φ(x_i,y) − Φ(x_i,z_i)) + Δ(y, z_i)]` for every point.
pub fn update_upsilon<S: OutputSpace + ?Sized>(
    state: &SolverState<S::Output>,
    ds: &Dataset<S::Output>,
    space: &S,
) -> Result<Vec<S::Output>> {
    (0..ds.len())
        .into_par_iter()
        .map(|i| Ok(space.argmax_loss_augmented(&state.w, &ds.points[i].x, &state.z[i])?.output))
        .collect()
}

/// Slack step using `state.w` (`w^{t-1}`), `state.z` (`z^{t-1}`) and
/// `state.upsilon` (`υ^t`).
pub fn update_slack<S: OutputSpace + ?Sized>(
    state: &SolverState<S::Output>,
    ds: &Dataset<S::Output>,
    g: &NeighborGraph,
    space: &S,
    cfg: &SolverConfig,
) -> Result<Vec<S::Output>> {
    let solve_one = |i: usize, z: &[S::Output]| -> Result<S::Output> {
        let p = &ds.points[i];
        if let Some(y) = &p.y {
            return Ok(y.clone());
        }
        let terms = g.neighbor_terms_for(i);
        let neighbors: Vec<(f64, &S::Output)> = terms.iter().map(|&(omega, j)| (omega, &z[j])).collect();
        space.argmin_slack(&state.w, &p.x, &state.upsilon[i], &neighbors, cfg.c1)
    };
    match cfg.schedule {
        SlackSchedule::Jacobi => (0..ds.len()).into_par_iter().map(|i| solve_one(i, &state.z)).collect(),
        SlackSchedule::GaussSeidel => {
            let mut z = state.z.clone();
            for i in 0..ds.len() {
                z[i] = solve_one(i, &z)?;
            }
            Ok(z)
        }
    }
}

/// `Σ_i (Φ(x_i, υ_i) − Φ(x_i, z_i))`, accumulated in id order.
pub fn feature_difference<S: OutputSpace + ?Sized>(
    ds: &Dataset<S::Output>,
    space: &S,
    upsilon: &[S::Output],
    z: &[S::Output],
) -> Vec<f64> {
    let mut diff = vec![0.0; space.dim()];
    for (p, (u, zi)) in ds.points.iter().zip(upsilon.iter().zip(z)) {
        space.add_phi(&p.x, u, 1.0, &mut diff);
        space.add_phi(&p.x, zi, -1.0, &mut diff);
    }
    diff
}

/// Weight step from `state.w` using `state.upsilon` (`υ^t`) and `state.z` (`z^t`).
pub fn update_weights<S: OutputSpace + ?Sized>(
    state: &SolverState<S::Output>,
    ds: &Dataset<S::Output>,
    space: &S,
    cfg: &SolverConfig,
) -> Result<Weights> {
    let diff = feature_difference(ds, space, &state.upsilon, &state.z);
    let (decay, step) = (cfg.decay(), cfg.step_size() * cfg.c1);
    let w = Weights(state.w.iter().zip(&diff).map(|(w, d)| decay * w - step * d).collect());
    if !w.is_finite() {
        return Err(Error::Diverged { iteration: state.iteration + 1, trace: state.trace.clone() });
    }
    Ok(w)
}

/// Weight subproblem with `υ` and `z` frozen:
/// `O1(w) = C1 Σ_i [w·(Φ(x_i,υ_i) − Φ(x_i,z_i)) + Δ(υ_i,z_i)] + C2/2 ‖w‖²`.
pub fn weight_objective<S: OutputSpace + ?Sized>(
    w: &Weights,
    ds: &Dataset<S::Output>,
    space: &S,
    upsilon: &[S::Output],
    z: &[S::Output],
    cfg: &SolverConfig,
) -> f64 {
    let loss: f64 = ds
        .points
        .iter()
        .zip(upsilon.iter().zip(z))
        .map(|(p, (u, zi))| space.score(w, &p.x, u) - space.score(w, &p.x, zi) + space.delta(u, zi))
        .sum();
    cfg.c1 * loss + 0.5 * cfg.c2 * w.norm_sq()
}

/// `∇O1(w) = C1 Σ_i (Φ(x_i,υ_i) − Φ(x_i,z_i)) + C2 w`.
pub fn weight_gradient<S: OutputSpace + ?Sized>(
    w: &Weights,
    ds: &Dataset<S::Output>,
    space: &S,
    upsilon: &[S::Output],
    z: &[S::Output],
    cfg: &SolverConfig,
) -> Vec<f64> {
    let diff = feature_difference(ds, space, upsilon, z);
    diff.iter().zip(w.iter()).map(|(d, wk)| cfg.c1 * d + cfg.c2 * wk).collect()
}

/// Objective components at the current state, using the stored `υ`.
pub fn objective<S: OutputSpace + ?Sized>(
    state: &SolverState<S::Output>,
    ds: &Dataset<S::Output>,
    g: &NeighborGraph,
    space: &S,
    cfg: &SolverConfig,
) -> Result<TraceRow> {
    if state.upsilon.len() != ds.len() || state.z.len() != ds.len() {
        return Err(Error::contract("state does not match dataset size"));
    }
    let manifold = g.manifold_term(&state.z, space)?;
    let loss: f64 = ds
        .points
        .iter()
        .zip(state.upsilon.iter().zip(&state.z))
        .map(|(p, (u, z))| augmented_value(space, &state.w, &p.x, z, u))
        .sum();
    let regularizer = 0.5 * state.w.norm_sq();
    Ok(TraceRow {
        t: state.iteration,
        manifold,
        loss,
        regularizer,
        objective: manifold + cfg.c1 * loss + cfg.c2 * regularizer,
    })
}

/// Runs `cfg.max_iters` iterations from [`initialize`].
pub fn fit<S: OutputSpace + ?Sized>(
    ds: &Dataset<S::Output>,
    g: &NeighborGraph,
    space: &S,
    cfg: &SolverConfig,
) -> Result<SolverState<S::Output>> {
    fit_with_observer(ds, g, space, cfg, |_| {})
}

pub fn fit_with_observer<S, F>(
    ds: &Dataset<S::Output>,
    g: &NeighborGraph,
    space: &S,
    cfg: &SolverConfig,
    mut observer: F,
) -> Result<SolverState<S::Output>>
where
    S: OutputSpace + ?Sized,
    F: FnMut(&IterationRecord<'_, S::Output>),
{
    let mut state = initialize(ds, g, space, cfg)?;
    for t in 1..=cfg.max_iters {
        let z_new = update_slack(&state, ds, g, space, cfg)?;
        let z_prev = std::mem::replace(&mut state.z, z_new);
        let w_new = update_weights(&state, ds, space, cfg)?;
        let w_prev = std::mem::replace(&mut state.w, w_new);
        let next_upsilon = update_upsilon(&state, ds, space)?;
        let upsilon_t = std::mem::replace(&mut state.upsilon, next_upsilon);
        state.iteration = t;
        observer(&IterationRecord {
            t,
            w_prev: &w_prev,
            w: &state.w,
            z_prev: &z_prev,
            z: &state.z,
            upsilon: &upsilon_t,
        });
        let row = objective(&state, ds, g, space, cfg)?;
        state.trace.push(row);
    }
    Ok(state)
}

/// `argmax_y w·Φ(x, y)`.
pub fn predict<S: OutputSpace + ?Sized>(w: &Weights, x: &[f64], space: &S) -> Result<S::Output> {
    space.argmax_score(w, x)
}

/// Trace as CSV with header `t,M,L,R,O`.
pub fn write_trace_csv<W: Write>(trace: &[TraceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "M", "L", "R", "O"])?;
    for r in trace {
        w.write_record([
            r.t.to_string(),
            r.manifold.to_string(),
            r.loss.to_string(),
            r.regularizer.to_string(),
            r.objective.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;
    use crate::model::DataPoint;
    use crate::spaces::MulticlassSpace;

    fn ds(points: Vec<(Vec<f64>, Option<usize>)>) -> Dataset<usize> {
        Dataset::new("multiclass", points.into_iter().enumerate().map(|(id, (x, y))| DataPoint { id, x, y }).collect())
    }

    fn cfg(iters: usize) -> SolverConfig {
        SolverConfig { max_iters: iters, ..SolverConfig::default() }
    }

    #[test]
    fn fully_labeled_initializes_to_labels() {
        let space = MulticlassSpace::new(3, 1).unwrap();
        let data = ds(vec![(vec![0.0], Some(2)), (vec![1.0], Some(0)), (vec![2.0], Some(1))]);
        let g = NeighborGraph::build(&data.inputs().collect::<Vec<_>>(), 1, None).unwrap();
        let s = initialize(&data, &g, &space, &cfg(1)).unwrap();
        assert_eq!(s.z, vec![2, 0, 1]);
        assert_eq!(s.trace.len(), 1);
        assert!(s.w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_label_spreads_by_nearest() {
        let space = MulticlassSpace::new(3, 1).unwrap();
        let data = ds(vec![(vec![0.0], None), (vec![1.0], Some(2)), (vec![5.0], None)]);
        let g = NeighborGraph::empty(3);
        let s = initialize(&data, &g, &space, &cfg(1)).unwrap();
        assert_eq!(s.z, vec![2, 2, 2]);
    }

    #[test]
    fn random_init_is_seeded() {
        let space = MulticlassSpace::new(5, 1).unwrap();
        let data = ds((0..20).map(|i| (vec![i as f64], if i == 0 { Some(0) } else { None })).collect());
        let g = NeighborGraph::empty(20);
        let c = SolverConfig { z_init: ZInit::UniformRandom, seed: 9, ..cfg(1) };
        let a = initialize(&data, &g, &space, &c).unwrap();
        let b = initialize(&data, &g, &space, &c).unwrap();
        assert_eq!(a, b);
        assert!(a.z[1..].iter().any(|&v| v != a.z[1]));
    }

    #[test]
    fn no_labels_is_rejected() {
        let space = MulticlassSpace::new(2, 1).unwrap();
        let data = ds(vec![(vec![0.0], None), (vec![1.0], None)]);
        assert!(initialize(&data, &NeighborGraph::empty(2), &space, &cfg(1)).is_err());
    }

    #[test]
    fn upsilon_with_zero_weights_flips_binary_labels() {
        let space = MulticlassSpace::new(2, 1).unwrap();
        let data = ds(vec![(vec![0.0], Some(0)), (vec![1.0], Some(1)), (vec![2.0], None)]);
        let g = NeighborGraph::empty(3);
        let mut s = initialize(&data, &g, &space, &cfg(1)).unwrap();
        s.z = vec![0, 1, 0];
        assert_eq!(update_upsilon(&s, &data, &space).unwrap(), vec![1, 0, 1]);
    }

    #[test]
    fn upsilon_keeps_z_under_wide_margin() {
        // d = 1, x = 1: scores are w. Margin 3 over both rivals exceeds the unit loss.
        let space = MulticlassSpace::new(3, 1).unwrap();
        let data = ds(vec![(vec![1.0], Some(1))]);
        let g = NeighborGraph::empty(1);
        let mut s = initialize(&data, &g, &space, &cfg(1)).unwrap();
        s.w = Weights(vec![0.0, 3.0, 1.0]);
        assert_eq!(update_upsilon(&s, &data, &space).unwrap(), vec![1]);
        s.w = Weights(vec![0.0, 3.0, 2.5]);
        assert_eq!(update_upsilon(&s, &data, &space).unwrap(), vec![2]);
    }

    #[test]
    fn slack_cases() {
        let space = MulticlassSpace::new(3, 1).unwrap();
        // 0 labeled class 2, 1 and 2 labeled class 1, 3 unlabeled, 4 unlabeled and isolated
        let data = ds(vec![
            (vec![0.0], Some(2)),
            (vec![0.1], Some(1)),
            (vec![0.2], Some(1)),
            (vec![0.3], None),
            (vec![9.0], None),
        ]);
        let edges = vec![
            Edge { from: 3, to: 1, omega: 2.0 },
            Edge { from: 2, to: 3, omega: 2.0 },
            Edge { from: 0, to: 3, omega: 0.5 },
            Edge { from: 3, to: 0, omega: 5.0 },
        ];
        let g = NeighborGraph::from_edges(5, 1, 1.0, edges).unwrap();
        let mut s = initialize(&data, &g, &space, &cfg(1)).unwrap();
        s.z = vec![2, 1, 1, 0, 0];
        s.upsilon = vec![0, 0, 0, 0, 1];
        // point 3: class 0 → 9.5 + 0, class 1 → 5.5 + 1, class 2 → 4 + 1
        let z = update_slack(&s, &data, &g, &space, &cfg(1)).unwrap();
        assert_eq!(z, vec![2, 1, 1, 2, 1]);
    }

    #[test]
    fn weight_step_cases() {
        let space = MulticlassSpace::new(2, 2).unwrap();
        let data = ds(vec![(vec![1.0, 2.0], Some(0))]);
        let g = NeighborGraph::empty(1);
        let c = SolverConfig { eta: Some(1.0), c1: 1.0, c2: 0.25, ..cfg(1) };
        let mut s = initialize(&data, &g, &space, &c).unwrap();
        s.upsilon = vec![1];
        // w = −(Φ(x,1) − Φ(x,0))
        assert_eq!(update_weights(&s, &data, &space, &c).unwrap().0, vec![1.0, 2.0, -1.0, -2.0]);
        s.w = Weights(vec![4.0, 0.0, -8.0, 1.0]);
        s.upsilon = vec![0];
        assert_eq!(update_weights(&s, &data, &space, &c).unwrap().0, vec![3.0, 0.0, -6.0, 0.75]);
    }

    #[test]
    fn divergence_is_reported() {
        let space = MulticlassSpace::new(2, 1).unwrap();
        let data = ds(vec![(vec![1e300], Some(0)), (vec![1e300], None)]);
        let g = NeighborGraph::empty(2);
        let c = SolverConfig { eta: Some(1e10), ..cfg(5) };
        match fit(&data, &g, &space, &c) {
            Err(Error::Diverged { iteration, trace }) => {
                assert_eq!(iteration, 1);
                assert_eq!(trace.len(), 1);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn objective_components() {
        let space = MulticlassSpace::new(2, 1).unwrap();
        let data = ds(vec![(vec![1.0], Some(0)), (vec![2.0], Some(0))]);
        let g = NeighborGraph::build(&data.inputs().collect::<Vec<_>>(), 1, None).unwrap();
        let mut s = initialize(&data, &g, &space, &cfg(1)).unwrap();
        s.upsilon = s.z.clone();
        assert_eq!(objective(&s, &data, &g, &space, &cfg(1)).unwrap().objective, 0.0);
        s.w = Weights(vec![3.0, 4.0]);
        assert_eq!(objective(&s, &data, &g, &space, &cfg(1)).unwrap().regularizer, 12.5);
    }

    #[test]
    fn trace_csv_header() {
        let rows = [TraceRow { t: 0, manifold: 1.0, loss: 2.0, regularizer: 0.5, objective: 3.5 }];
        let mut buf = Vec::new();
        write_trace_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,M,L,R,O\n0,1,2,0.5,3.5\n");
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig { c1: 0.0, ..SolverConfig::default() }.validate().is_err());
        assert!(SolverConfig { c2: -1.0, ..SolverConfig::default() }.validate().is_err());
        assert!(SolverConfig { eta: Some(0.0), ..SolverConfig::default() }.validate().is_err());
        assert!(SolverConfig { max_iters: 0, ..SolverConfig::default() }.validate().is_err());
        assert_eq!(SolverConfig { c2: 4.0, ..SolverConfig::default() }.step_size(), 0.25);
    }
}
