use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::model::{dot, OutputSpace};

/// One-of-`c` class labels with the block joint map: `Φ(x, k)` places `x` in
/// block `k` of `c` blocks of length `d`. Loss is 0-1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MulticlassSpace {
    num_classes: usize,
    input_dim: usize,
}

impl MulticlassSpace {
    pub fn new(num_classes: usize, input_dim: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::contract(format!("need at least 2 classes, got {num_classes}")));
        }
        if input_dim == 0 {
            return Err(Error::contract("input dimension must be at least 1"));
        }
        Ok(MulticlassSpace { num_classes, input_dim })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Binary class-membership vector of length `c`.
    pub fn indicator(&self, y: usize) -> Vec<u8> {
        (0..self.num_classes).map(|k| u8::from(k == y)).collect()
    }
}

impl OutputSpace for MulticlassSpace {
    type Output = usize;

    fn space_id(&self) -> &'static str {
        "multiclass"
    }

    fn dim(&self) -> usize {
        self.num_classes * self.input_dim
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        Ok(())
    }

    fn check_output(&self, _x: &[f64], y: &usize) -> Result<()> {
        if *y >= self.num_classes {
            return Err(Error::OutputNotInSpace(format!("class {y} outside 0..{}", self.num_classes)));
        }
        Ok(())
    }

    fn add_phi(&self, x: &[f64], y: &usize, scale: f64, out: &mut [f64]) {
        let block = &mut out[y * self.input_dim..(y + 1) * self.input_dim];
        for (o, v) in block.iter_mut().zip(x) {
            *o += scale * v;
        }
    }

    fn score(&self, w: &[f64], x: &[f64], y: &usize) -> f64 {
        dot(&w[y * self.input_dim..(y + 1) * self.input_dim], x)
    }

    fn delta(&self, a: &usize, b: &usize) -> f64 {
        if a == b {
            0.0
        } else {
            1.0
        }
    }

    fn candidates(&self, _x: &[f64]) -> Option<Vec<usize>> {
        Some((0..self.num_classes).collect())
    }

    fn random_output(&self, _x: &[f64], rng: &mut dyn RngCore) -> usize {
        rng.random_range(0..self.num_classes)
    }
}
