//! Output-space selection from flags, data files and model files.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use mrso::data::load_taxonomy;
use mrso::spaces::{
    ChainLoss, ChainSpace, MulticlassSpace, Taxonomy, TaxonomyNode, TaxonomySpace, DEFAULT_ENUMERATION_CAP,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceKind {
    Multiclass,
    Taxonomy,
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    ZeroOne,
    Hamming,
}

#[derive(Debug, Clone, Args)]
pub struct SpaceArgs {
    #[arg(long, value_enum)]
    pub space: SpaceKind,
    /// Taxonomy JSON file; the built-in scene tree when absent.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// Number of classes; inferred from the largest label when absent.
    #[arg(long)]
    pub classes: Option<usize>,
    /// Chain alphabet size; inferred from the largest label when absent.
    #[arg(long)]
    pub alphabet: Option<usize>,
    /// Input dimension (per position for chains); inferred from the first record when absent.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Chain loss (default hamming). Multiclass and taxonomy only accept zero-one.
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    /// Largest output set a chain oracle may enumerate.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub enum_cap: usize,
}

/// Everything needed to rebuild a space; stored inside model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpaceSpec {
    Multiclass { classes: usize, dim: usize },
    Taxonomy { dim: usize, nodes: Vec<TaxonomyNode> },
    Chain { alphabet: usize, dim: usize, loss: ChainLoss, enumeration_cap: usize },
}

pub enum BuiltSpace {
    Multiclass(MulticlassSpace),
    Taxonomy(TaxonomySpace),
    Chain(ChainSpace),
}

/// Runs `$body` with `$s` bound to the concrete space.
macro_rules! with_space {
    ($built:expr, $s:ident => $body:expr) => {
        match $built {
            $crate::space::BuiltSpace::Multiclass($s) => $body,
            $crate::space::BuiltSpace::Taxonomy($s) => $body,
            $crate::space::BuiltSpace::Chain($s) => $body,
        }
    };
}

impl SpaceSpec {
    pub fn build(&self) -> Result<BuiltSpace> {
        Ok(match self {
            SpaceSpec::Multiclass { classes, dim } => BuiltSpace::Multiclass(MulticlassSpace::new(*classes, *dim)?),
            SpaceSpec::Taxonomy { dim, nodes } => {
                BuiltSpace::Taxonomy(TaxonomySpace::new(Taxonomy::new(nodes.clone())?, *dim)?)
            }
            SpaceSpec::Chain { alphabet, dim, loss, enumeration_cap } => {
                BuiltSpace::Chain(ChainSpace::new(*alphabet, *dim, *loss)?.with_enumeration_cap(*enumeration_cap))
            }
        })
    }
}

/// Shape facts read from the first records of a dataset file.
#[derive(Debug, Default, PartialEq)]
struct Probe {
    flat_len: Option<usize>,
    row_width: Option<usize>,
    max_label: Option<usize>,
}

fn max_label(v: &Value) -> Option<usize> {
    match v {
        Value::Number(n) => n.as_u64().map(|n| n as usize),
        Value::Array(items) => items.iter().filter_map(max_label).max(),
        _ => None,
    }
}

fn probe(path: &Path) -> Result<Probe> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Probe::default();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Value =
            serde_json::from_str(&line).with_context(|| format!("{}:{}: not JSON", path.display(), idx + 1))?;
        if out.flat_len.is_none() && out.row_width.is_none() {
            match rec.get("x") {
                Some(Value::Array(xs)) => match xs.first() {
                    Some(Value::Array(row)) => out.row_width = Some(row.len()),
                    _ => out.flat_len = Some(xs.len()),
                },
                _ => bail!("{}:{}: record has no input array", path.display(), idx + 1),
            }
        }
        if let Some(m) = rec.get("y").and_then(max_label) {
            out.max_label = Some(out.max_label.map_or(m, |c| c.max(m)));
        }
    }
    Ok(out)
}

impl SpaceArgs {
    /// Resolves the space for `data`, filling unset sizes from the file.
    pub fn resolve(&self, data: &Path) -> Result<SpaceSpec> {
        let p = probe(data)?;
        let loss = self.loss;
        if self.space != SpaceKind::Chain && loss == Some(LossArg::Hamming) {
            bail!("--loss hamming applies to chain spaces only");
        }
        Ok(match self.space {
            SpaceKind::Multiclass => {
                let classes = match (self.classes, p.max_label) {
                    (Some(c), _) => c,
                    (None, Some(m)) => m + 1,
                    (None, None) => bail!("no labels in {}; pass --classes", data.display()),
                };
                let dim = self.dim.or(p.flat_len).context("cannot infer input dimension; pass --dim")?;
                SpaceSpec::Multiclass { classes, dim }
            }
            SpaceKind::Taxonomy => {
                let tree = match &self.taxonomy {
                    Some(path) => load_taxonomy(path).with_context(|| format!("loading {}", path.display()))?,
                    None => Taxonomy::scene_tree(),
                };
                let dim = self.dim.or(p.flat_len).context("cannot infer input dimension; pass --dim")?;
                SpaceSpec::Taxonomy { dim, nodes: tree.nodes().to_vec() }
            }
            SpaceKind::Chain => {
                let alphabet = match (self.alphabet, p.max_label) {
                    (Some(a), _) => a,
                    (None, Some(m)) => m + 1,
                    (None, None) => bail!("no labels in {}; pass --alphabet", data.display()),
                };
                let dim = self.dim.or(p.row_width).context("cannot infer per-position dimension; pass --dim")?;
                let loss = match loss.unwrap_or(LossArg::Hamming) {
                    LossArg::Hamming => ChainLoss::Hamming,
                    LossArg::ZeroOne => ChainLoss::ZeroOne,
                };
                SpaceSpec::Chain { alphabet, dim, loss, enumeration_cap: self.enum_cap }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn probe_text(text: &str) -> Probe {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        probe(f.path()).unwrap()
    }

    #[test]
    fn probes_flat_and_rows() {
        let p = probe_text("{\"id\":0,\"x\":[1,2,3],\"y\":4}\n{\"id\":1,\"x\":[0,0,0],\"y\":null}\n");
        assert_eq!(p, Probe { flat_len: Some(3), row_width: None, max_label: Some(4) });
        let p = probe_text("{\"id\":0,\"x\":[[1,2],[3,4]],\"y\":[0,2]}\n");
        assert_eq!(p, Probe { flat_len: None, row_width: Some(2), max_label: Some(2) });
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = SpaceSpec::Chain { alphabet: 3, dim: 2, loss: ChainLoss::ZeroOne, enumeration_cap: 64 };
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"chain\""));
        assert_eq!(serde_json::from_str::<SpaceSpec>(&text).unwrap(), spec);
    }
}
