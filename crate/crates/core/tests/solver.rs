mod common;

use common::*;
use mrso::data::{synth_blobs, synth_chains, synth_taxonomy_blobs, BlobsConfig, ChainSynthConfig, TaxonomyBlobsConfig};
use mrso::graph::build_knn_graph;
use mrso::model::slack_objective;
use mrso::solver::{fit, fit_with_observer, weight_gradient, weight_objective, SlackSchedule, SolverConfig};
use mrso::spaces::{ChainLoss, ChainSpace, MulticlassSpace, Taxonomy, TaxonomySpace};
use mrso::{DataPoint, Dataset, OutputSpace, Weights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mask_every<Y>(mut ds: Dataset<Y>, keep: usize) -> Dataset<Y> {
    for p in &mut ds.points {
        if p.id % keep != 0 {
            p.y = None;
        }
    }
    ds
}

fn finite_difference_error<S: OutputSpace>(space: &S, ds: &Dataset<S::Output>, rng: &mut ChaCha8Rng) -> f64 {
    let n = ds.len();
    let cands: Vec<S::Output> = (0..n).map(|i| space.random_output(&ds.points[i].x, rng)).collect();
    let upsilon: Vec<S::Output> = (0..n).map(|i| space.random_output(&ds.points[i].x, rng)).collect();
    let cfg = SolverConfig { c1: rng.random_range(0.1..5.0), c2: rng.random_range(0.1..5.0), ..Default::default() };
    let w = Weights(uniform_vec(rng, space.dim()));
    let g = weight_gradient(&w, ds, space, &upsilon, &cands, &cfg);
    let h = 1e-5;
    let fd: Vec<f64> = (0..space.dim())
        .map(|k| {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp.0[k] += h;
            wm.0[k] -= h;
            (weight_objective(&wp, ds, space, &upsilon, &cands, &cfg)
                - weight_objective(&wm, ds, space, &upsilon, &cands, &cfg))
                / (2.0 * h)
        })
        .collect();
    let num: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
    num / den
}

#[test]
fn weight_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..10 {
        let ds = synth_blobs(&BlobsConfig { classes: 3, per_class: 4, dim: 3, spread: 0.5, seed: trial }).unwrap();
        let space = MulticlassSpace::new(3, 3).unwrap();
        let err = finite_difference_error(&space, &ds, &mut rng);
        assert!(err < 1e-6, "multiclass trial {trial}: {err}");

        let tree = Taxonomy::scene_tree();
        let cfg = TaxonomyBlobsConfig { per_leaf: 1, dim: 2, spread: 0.3, seed: trial };
        let ds = synth_taxonomy_blobs(&tree, &cfg).unwrap();
        let space = TaxonomySpace::new(tree, 2).unwrap();
        let err = finite_difference_error(&space, &ds, &mut rng);
        assert!(err < 1e-6, "taxonomy trial {trial}: {err}");

        let cfg = ChainSynthConfig {
            alphabet: 3,
            min_len: 2,
            max_len: 4,
            count: 8,
            dim: 2,
            spread: 0.3,
            self_loop: None,
            seed: trial,
        };
        let ds = synth_chains(&cfg).unwrap();
        let space = ChainSpace::new(3, 2, ChainLoss::Hamming).unwrap();
        let err = finite_difference_error(&space, &ds, &mut rng);
        assert!(err < 1e-6, "chain trial {trial}: {err}");
    }
}

/// Checks both descent properties on every iteration and the labeled clamp.
fn assert_descent<S: OutputSpace>(space: &S, ds: &Dataset<S::Output>, k: usize, cfg: &SolverConfig) {
    let graph = build_knn_graph(ds, space, k, None).unwrap();
    let mut checked = 0usize;
    fit_with_observer(ds, &graph, space, cfg, |rec| {
        for (i, p) in ds.points.iter().enumerate() {
            if let Some(y) = &p.y {
                assert_eq!(&rec.z[i], y, "labeled point {i} moved at t={}", rec.t);
                continue;
            }
            let terms = graph.neighbor_terms_for(i);
            let nb: Vec<(f64, &S::Output)> = terms.iter().map(|&(o, j)| (o, &rec.z_prev[j])).collect();
            let o3 = |y: &S::Output| slack_objective(space, rec.w_prev, &p.x, &rec.upsilon[i], &nb, cfg.c1, y);
            assert!(o3(&rec.z[i]) <= o3(&rec.z_prev[i]), "slack ascent at point {i}, t={}", rec.t);
            checked += 1;
        }
        let before = weight_objective(rec.w_prev, ds, space, rec.upsilon, rec.z, cfg);
        let after = weight_objective(rec.w, ds, space, rec.upsilon, rec.z, cfg);
        assert!(after <= before, "weight ascent at t={}: {before} -> {after}", rec.t);
    })
    .unwrap();
    assert!(checked > 0);
}

#[test]
fn descent_in_every_space() {
    let cfg = SolverConfig { c1: 1.0, c2: 2.0, max_iters: 15, ..Default::default() };

    let ds =
        mask_every(synth_blobs(&BlobsConfig { classes: 4, per_class: 10, dim: 4, spread: 0.3, seed: 3 }).unwrap(), 4);
    assert_descent(&MulticlassSpace::new(4, 4).unwrap(), &ds, 5, &cfg);

    let tree = Taxonomy::scene_tree();
    let ds = mask_every(
        synth_taxonomy_blobs(&tree, &TaxonomyBlobsConfig { per_leaf: 3, dim: 4, spread: 0.3, seed: 3 }).unwrap(),
        3,
    );
    assert_descent(&TaxonomySpace::new(tree, 4).unwrap(), &ds, 5, &cfg);

    let chains = synth_chains(&ChainSynthConfig {
        alphabet: 3,
        min_len: 2,
        max_len: 5,
        count: 40,
        dim: 3,
        spread: 0.3,
        self_loop: None,
        seed: 3,
    })
    .unwrap();
    let ds = mask_every(chains, 3);
    assert_descent(&ChainSpace::new(3, 3, ChainLoss::Hamming).unwrap(), &ds, 5, &cfg);
    assert_descent(&ChainSpace::new(3, 3, ChainLoss::ZeroOne).unwrap(), &ds, 5, &cfg);
}

#[test]
fn trace_rows_add_up_and_cover_every_iteration() {
    let ds =
        mask_every(synth_blobs(&BlobsConfig { classes: 3, per_class: 15, dim: 3, spread: 0.4, seed: 8 }).unwrap(), 5);
    let space = MulticlassSpace::new(3, 3).unwrap();
    let graph = build_knn_graph(&ds, &space, 4, None).unwrap();
    let cfg = SolverConfig { c1: 2.5, c2: 0.5, eta: Some(0.01), max_iters: 12, ..Default::default() };
    let state = fit(&ds, &graph, &space, &cfg).unwrap();
    assert_eq!(state.trace.len(), 13);
    for (t, row) in state.trace.iter().enumerate() {
        assert_eq!(row.t, t);
        let sum = row.manifold + cfg.c1 * row.loss + cfg.c2 * row.regularizer;
        assert!((row.objective - sum).abs() <= 1e-9 * (1.0 + sum.abs()));
        assert!(row.manifold >= 0.0 && row.loss >= 0.0 && row.regularizer >= 0.0);
    }
    assert_eq!(state.iteration, 12);
}

#[test]
fn gauss_seidel_keeps_labeled_outputs_clamped() {
    let ds =
        mask_every(synth_blobs(&BlobsConfig { classes: 4, per_class: 10, dim: 4, spread: 0.4, seed: 1 }).unwrap(), 4);
    let space = MulticlassSpace::new(4, 4).unwrap();
    let graph = build_knn_graph(&ds, &space, 5, None).unwrap();
    let cfg = SolverConfig { schedule: SlackSchedule::GaussSeidel, max_iters: 10, ..Default::default() };
    let state = fit(&ds, &graph, &space, &cfg).unwrap();
    for p in ds.points.iter().filter(|p| p.is_labeled()) {
        assert_eq!(Some(&state.z[p.id]), p.y.as_ref());
    }
}

#[test]
fn single_labeled_point_propagates_through_the_graph() {
    // two well separated groups, one labeled point each; slack outputs follow the graph
    let mut points = Vec::new();
    for i in 0..10 {
        let (cx, y) = if i < 5 { (0.0, 0) } else { (10.0, 1) };
        let labeled = i == 0 || i == 5;
        points.push(DataPoint { id: i, x: vec![cx + 0.01 * i as f64, 1.0], y: labeled.then_some(y) });
    }
    let ds = Dataset::new("multiclass", points);
    let space = MulticlassSpace::new(2, 2).unwrap();
    let graph = build_knn_graph(&ds, &space, 3, None).unwrap();
    let cfg = SolverConfig { c1: 0.01, c2: 1.0, max_iters: 10, ..Default::default() };
    let state = fit(&ds, &graph, &space, &cfg).unwrap();
    assert_eq!(state.z, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
}
