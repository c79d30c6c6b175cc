//! Seeded synthetic datasets standing in for real corpora.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DataPoint, Dataset};
use crate::spaces::Taxonomy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobsConfig {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    /// Per-coordinate standard deviation around each class mean.
    pub spread: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyBlobsConfig {
    pub per_leaf: usize,
    pub dim: usize,
    pub spread: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSynthConfig {
    pub alphabet: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub count: usize,
    pub dim: usize,
    pub spread: f64,
    /// Probability of repeating the previous label. `None` draws a random
    /// transition matrix.
    pub self_loop: Option<f64>,
    pub seed: u64,
}

fn noise(spread: f64) -> Result<Normal<f64>> {
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::contract(format!("spread must be finite and >= 0, got {spread}")));
    }
    Ok(Normal::new(0.0, spread).expect("valid normal"))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `count` means whose closest pair is exactly distance 1 apart. Scaled axis
/// vectors when they fit in `dim`, otherwise rescaled Gaussian draws.
fn unit_separated_means(count: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut means: Vec<Vec<f64>> = if count <= dim {
        (0..count)
            .map(|k| (0..dim).map(|j| if j == k { std::f64::consts::FRAC_1_SQRT_2 } else { 0.0 }).collect())
            .collect()
    } else {
        (0..count).map(|_| (0..dim).map(|_| StandardNormal.sample(rng)).collect()).collect()
    };
    let mut min_d = f64::INFINITY;
    for a in 0..count {
        for b in a + 1..count {
            min_d = min_d.min(dist(&means[a], &means[b]));
        }
    }
    if min_d > 0.0 && min_d.is_finite() {
        for m in &mut means {
            m.iter_mut().for_each(|v| *v /= min_d);
        }
    }
    means
}

fn sample_around(mean: &[f64], normal: &Normal<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    mean.iter().map(|m| m + normal.sample(rng)).collect()
}

/// Gaussian clusters with unit-separated means, labeled by cluster. Points are
/// interleaved by class (`id % classes`).
pub fn synth_blobs(cfg: &BlobsConfig) -> Result<Dataset<usize>> {
    if cfg.classes < 2 || cfg.dim < 2 {
        return Err(Error::contract("synth_blobs needs classes >= 2 and dim >= 2"));
    }
    let normal = noise(cfg.spread)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let means = unit_separated_means(cfg.classes, cfg.dim, &mut rng);
    let points = (0..cfg.classes * cfg.per_class)
        .map(|id| {
            let k = id % cfg.classes;
            DataPoint { id, x: sample_around(&means[k], &normal, &mut rng), y: Some(k) }
        })
        .collect();
    Ok(Dataset::new("multiclass", points))
}

/// Leaf means that reflect the tree metric: every pair of leaves meeting at a
/// lower common ancestor is closer than every pair meeting higher up.
pub fn taxonomy_leaf_means(tree: &Taxonomy, dim: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, Vec<f64>)>> {
    let depth = |id: usize| tree.path_to_root(id).map(|p| p.len() - 1).unwrap_or(0);
    let max_depth = tree.leaves().iter().map(|&l| depth(l)).max().unwrap_or(0);
    for _attempt in 0..1000 {
        let offsets: Vec<(usize, Vec<f64>)> = tree
            .nodes()
            .iter()
            .map(|n| {
                let radius = 4f64.powi(max_depth as i32 - depth(n.id) as i32);
                (n.id, random_unit(dim, rng).into_iter().map(|v| v * radius).collect())
            })
            .collect();
        let offset_of = |id: usize| &offsets.iter().find(|(n, _)| *n == id).expect("node").1;
        let means: Vec<(usize, Vec<f64>)> = tree
            .leaves()
            .iter()
            .map(|&leaf| {
                let mut m = vec![0.0; dim];
                for anc in tree.path_to_root(leaf).expect("leaf") {
                    if anc != tree.root_id() {
                        m.iter_mut().zip(offset_of(anc)).for_each(|(a, b)| *a += b);
                    }
                }
                (leaf, m)
            })
            .collect();
        // (ancestor height, distance) for every leaf pair
        let mut by_height: Vec<(usize, f64)> = Vec::new();
        for a in 0..means.len() {
            for b in a + 1..means.len() {
                let anc = tree.common_ancestor(means[a].0, means[b].0).expect("same tree");
                by_height.push((tree.height(anc).expect("node"), dist(&means[a].1, &means[b].1)));
            }
        }
        let ok = by_height.iter().all(|&(ha, da)| by_height.iter().all(|&(hb, db)| ha >= hb || da < db));
        if ok {
            return Ok(means);
        }
    }
    Err(Error::Unsupported(format!("could not place taxonomy leaf means in {dim} dimensions; try a larger dimension")))
}

/// Gaussian clusters per taxonomy leaf, labeled by leaf id.
pub fn synth_taxonomy_blobs(tree: &Taxonomy, cfg: &TaxonomyBlobsConfig) -> Result<Dataset<usize>> {
    if cfg.dim < 2 {
        return Err(Error::contract("synth_taxonomy_blobs needs dim >= 2"));
    }
    let normal = noise(cfg.spread)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let means = taxonomy_leaf_means(tree, cfg.dim, &mut rng)?;
    let leaves = means.len();
    let points = (0..leaves * cfg.per_leaf)
        .map(|id| {
            let (leaf, mean) = &means[id % leaves];
            DataPoint { id, x: sample_around(mean, &normal, &mut rng), y: Some(*leaf) }
        })
        .collect();
    Ok(Dataset::new("taxonomy", points))
}

/// Label sequences from a seeded Markov chain with Gaussian emissions.
/// Inputs are flattened `len · dim` vectors.
pub fn synth_chains(cfg: &ChainSynthConfig) -> Result<Dataset<Vec<usize>>> {
    let a = cfg.alphabet;
    if a < 2 {
        return Err(Error::contract("synth_chains needs alphabet >= 2"));
    }
    if cfg.dim == 0 || cfg.min_len == 0 || cfg.min_len > cfg.max_len {
        return Err(Error::contract("synth_chains needs dim >= 1 and 1 <= min_len <= max_len"));
    }
    if let Some(p) = cfg.self_loop {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::contract(format!("self_loop must lie in [0, 1], got {p}")));
        }
    }
    let normal = noise(cfg.spread)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let transitions: Vec<Vec<f64>> = (0..a)
        .map(|l| match cfg.self_loop {
            Some(p) => (0..a).map(|n| if n == l { p } else { (1.0 - p) / (a - 1) as f64 }).collect(),
            None => {
                let raw: Vec<f64> = (0..a).map(|n| rng.random::<f64>() + if n == l { 1.0 } else { 0.0 }).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / total).collect()
            }
        })
        .collect();
    let means = unit_separated_means(a, cfg.dim, &mut rng);
    let draw = |row: &[f64], rng: &mut ChaCha8Rng| {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (n, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return n;
            }
        }
        row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
    };
    let points = (0..cfg.count)
        .map(|id| {
            let len = rng.random_range(cfg.min_len..=cfg.max_len);
            let mut labels = vec![rng.random_range(0..a)];
            while labels.len() < len {
                let prev = *labels.last().expect("nonempty");
                labels.push(draw(&transitions[prev], &mut rng));
            }
            let x = labels.iter().flat_map(|&l| sample_around(&means[l], &normal, &mut rng)).collect();
            DataPoint { id, x, y: Some(labels) }
        })
        .collect();
    Ok(Dataset::new("chain", points))
}
