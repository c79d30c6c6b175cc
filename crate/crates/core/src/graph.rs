//! Directed k-nearest-neighbor graph with Gaussian edge weights.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, OutputSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub omega: f64,
}

/// Edges `i → j` for each `j` among the `k` nearest neighbors of `i`, with
/// `ω_ij = exp(−‖x_i − x_j‖² / (2σ))`. Edges are kept directed.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    n: usize,
    k: usize,
    sigma: f64,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
}

pub fn gaussian_weight(dist_sq: f64, sigma: f64) -> f64 {
    (-dist_sq / (2.0 * sigma)).exp()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl NeighborGraph {
    /// Exact kNN by full pairwise scan. Distance ties go to the smaller id.
    /// Without `sigma`, the bandwidth is the median squared distance over the
    /// selected edges (1 if that median is 0).
    pub fn build<P: AsRef<[f64]> + Sync>(points: &[P], k: usize, sigma: Option<f64>) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::contract(format!("neighbor graph needs at least 2 points, got {n}")));
        }
        if k == 0 {
            return Err(Error::contract("k must be at least 1"));
        }
        if let Some(s) = sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::contract(format!("sigma must be positive and finite, got {s}")));
            }
        }
        let dim = points[0].as_ref().len();
        if let Some(p) = points.iter().position(|p| p.as_ref().len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: points[p].as_ref().len() });
        }
        let take = k.min(n - 1);
        let neighbors: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let xi = points[i].as_ref();
                let mut cand: Vec<(usize, f64)> =
                    (0..n).filter(|&j| j != i).map(|j| (j, squared_distance(xi, points[j].as_ref()))).collect();
                cand.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                cand.truncate(take);
                cand
            })
            .collect();

        let sigma = match sigma {
            Some(s) => s,
            None => {
                let mut d2: Vec<f64> = neighbors.iter().flatten().map(|&(_, d)| d).collect();
                let m = median(&mut d2);
                if m > 0.0 && m.is_finite() {
                    m
                } else {
                    1.0
                }
            }
        };
        let edges = neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| {
                nb.iter().map(move |&(j, d2)| Edge { from: i, to: j, omega: gaussian_weight(d2, sigma) })
            })
            .collect();
        Self::from_edges(n, take, sigma, edges)
    }

    /// Graph with no edges, used when the manifold term should vanish.
    pub fn empty(n: usize) -> Self {
        NeighborGraph {
            n,
            k: 0,
            sigma: 1.0,
            edges: Vec::new(),
            out_edges: vec![Vec::new(); n],
            in_edges: vec![Vec::new(); n],
        }
    }

    pub fn from_edges(n: usize, k: usize, sigma: f64, edges: Vec<Edge>) -> Result<Self> {
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (e_idx, e) in edges.iter().enumerate() {
            if e.from >= n || e.to >= n {
                return Err(Error::contract(format!("edge {} → {} outside 0..{n}", e.from, e.to)));
            }
            if e.from == e.to {
                return Err(Error::contract(format!("self-edge on node {}", e.from)));
            }
            if !(e.omega >= 0.0 && e.omega.is_finite()) {
                return Err(Error::contract(format!("edge weight {} is not finite and >= 0", e.omega)));
            }
            out_edges[e.from].push(e_idx);
            in_edges[e.to].push(e_idx);
        }
        Ok(NeighborGraph { n, k, sigma, edges, out_edges, in_edges })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.out_edges[i].len()
    }

    /// Out-edges of `i` followed by in-edges into `i`, as `(ω, other node)`.
    pub fn neighbor_terms_for(&self, i: usize) -> Vec<(f64, usize)> {
        let outs = self.out_edges[i].iter().map(|&e| (self.edges[e].omega, self.edges[e].to));
        let ins = self.in_edges[i].iter().map(|&e| (self.edges[e].omega, self.edges[e].from));
        outs.chain(ins).collect()
    }

    /// `M(z) = Σ_{(i,j) ∈ E} ω_ij Δ(z_i, z_j)`.
    pub fn manifold_term<S: OutputSpace + ?Sized>(&self, z: &[S::Output], space: &S) -> Result<f64> {
        if z.len() != self.n {
            return Err(Error::contract(format!("{} slack outputs for a graph over {} nodes", z.len(), self.n)));
        }
        Ok(self.edges.iter().map(|e| e.omega * space.delta(&z[e.from], &z[e.to])).sum())
    }

    /// Writes `i,j,omega` rows with a header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["i", "j", "omega"])?;
        for e in &self.edges {
            w.write_record([e.from.to_string(), e.to.to_string(), e.omega.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the kNN graph over a dataset's inputs, using the space's embedding.
pub fn build_knn_graph<S: OutputSpace + ?Sized>(
    ds: &Dataset<S::Output>,
    space: &S,
    k: usize,
    sigma: Option<f64>,
) -> Result<NeighborGraph> {
    let points: Vec<Vec<f64>> = ds.inputs().map(|x| space.embed(x).into_owned()).collect();
    NeighborGraph::build(&points, k, sigma)
}
