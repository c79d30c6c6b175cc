#![allow(dead_code)]

use mrso::spaces::{ChainLoss, ChainSpace, MulticlassSpace, Taxonomy, TaxonomyNode, TaxonomySpace};
use mrso::Weights;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Multiples of 1/4 in `[lo, hi]`; sums of these are exact in f64, so ties
/// between enumeration and dynamic programming compare exactly.
pub fn dyadic(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let (a, b) = ((lo * 4.0).ceil() as i64, (hi * 4.0).floor() as i64);
    rng.random_range(a..=b) as f64 / 4.0
}

pub fn dyadic_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| dyadic(rng, -2.0, 2.0)).collect()
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// Every label sequence of length `len`, lexicographic.
pub fn all_sequences(a: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..a).map(move |l| {
                    let mut s = prefix.clone();
                    s.push(l);
                    s
                })
            })
            .collect();
    }
    out
}

/// First candidate (in the given order) reaching the maximum.
pub fn brute_argmax<Y: Clone>(cands: &[Y], f: impl Fn(&Y) -> f64) -> (Y, f64) {
    let mut best = (cands[0].clone(), f(&cands[0]));
    for c in &cands[1..] {
        let v = f(c);
        if v > best.1 {
            best = (c.clone(), v);
        }
    }
    best
}

pub fn brute_argmin<Y: Clone>(cands: &[Y], f: impl Fn(&Y) -> f64) -> (Y, f64) {
    let (y, v) = brute_argmax(cands, |c| -f(c));
    (y, -v)
}

pub fn random_sequence(rng: &mut ChaCha8Rng, a: usize, len: usize) -> Vec<usize> {
    (0..len).map(|_| rng.random_range(0..a)).collect()
}

/// Random rooted tree with ids `0..n` and at least two leaves.
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Taxonomy {
    loop {
        let nodes: Vec<TaxonomyNode> = (0..n)
            .map(|id| TaxonomyNode {
                id,
                parent: if id == 0 { None } else { Some(rng.random_range(0..id)) },
                name: String::new(),
            })
            .collect();
        let tree = Taxonomy::new(nodes).unwrap();
        if tree.leaves().len() >= 2 {
            return tree;
        }
    }
}

pub struct McInstance {
    pub space: MulticlassSpace,
    pub w: Weights,
    pub x: Vec<f64>,
    pub cands: Vec<usize>,
}

pub fn multiclass_instance(rng: &mut ChaCha8Rng, exact: bool) -> McInstance {
    let (c, d) = (rng.random_range(2..=6), rng.random_range(1..=4));
    let space = MulticlassSpace::new(c, d).unwrap();
    let gen = |rng: &mut ChaCha8Rng, n| if exact { dyadic_vec(rng, n) } else { uniform_vec(rng, n) };
    let w = Weights(gen(rng, c * d));
    let x = gen(rng, d);
    McInstance { space, w, x, cands: (0..c).collect() }
}

pub struct TaxInstance {
    pub space: TaxonomySpace,
    pub w: Weights,
    pub x: Vec<f64>,
    pub cands: Vec<usize>,
}

pub fn taxonomy_instance(rng: &mut ChaCha8Rng, exact: bool) -> TaxInstance {
    let n = rng.random_range(3..=9);
    let d = rng.random_range(1..=3);
    let tree = random_tree(rng, n);
    let cands = tree.leaves().to_vec();
    let space = TaxonomySpace::new(tree, d).unwrap();
    let gen = |rng: &mut ChaCha8Rng, n| if exact { dyadic_vec(rng, n) } else { uniform_vec(rng, n) };
    let w = Weights(gen(rng, n * d));
    let x = gen(rng, d);
    TaxInstance { space, w, x, cands }
}

pub struct ChainInstance {
    pub space: ChainSpace,
    pub w: Weights,
    pub x: Vec<f64>,
    pub len: usize,
    pub cands: Vec<Vec<usize>>,
}

pub fn chain_instance(rng: &mut ChaCha8Rng, loss: ChainLoss, exact: bool) -> ChainInstance {
    let (a, d, len) = (rng.random_range(2..=3), rng.random_range(1..=3), rng.random_range(1..=5));
    let space = ChainSpace::new(a, d, loss).unwrap();
    let gen = |rng: &mut ChaCha8Rng, n| if exact { dyadic_vec(rng, n) } else { uniform_vec(rng, n) };
    let w = Weights(gen(rng, a * a + a * d));
    let x = gen(rng, len * d);
    ChainInstance { space, w, x, len, cands: all_sequences(a, len) }
}
