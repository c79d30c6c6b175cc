use std::borrow::Cow;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::enumerate;
use crate::error::{Error, Result};
use crate::model::{augmented_value, check_weights, dot, Augmented, OutputSpace, Weights};

pub const DEFAULT_ENUMERATION_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainLoss {
    /// Number of differing positions; length differences count as mismatches.
    Hamming,
    /// 1 unless the whole sequence matches.
    ZeroOne,
}

/// Label sequences over an alphabet of size `a`.
///
/// An input of `L` positions is stored flat as `L · d` reals. The joint map is
/// the transition histogram (`a · a` counts, index `prev · a + next`) followed
/// by per-label emission sums (`a` blocks of length `d`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpace {
    alphabet: usize,
    input_dim: usize,
    loss: ChainLoss,
    enumeration_cap: usize,
    max_len: Option<usize>,
}

impl ChainSpace {
    pub fn new(alphabet: usize, input_dim: usize, loss: ChainLoss) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::contract(format!("alphabet needs at least 2 labels, got {alphabet}")));
        }
        if input_dim == 0 {
            return Err(Error::contract("emission dimension must be at least 1"));
        }
        Ok(ChainSpace { alphabet, input_dim, loss, enumeration_cap: DEFAULT_ENUMERATION_CAP, max_len: None })
    }

    pub fn with_enumeration_cap(mut self, cap: usize) -> Self {
        self.enumeration_cap = cap;
        self
    }

    pub fn with_max_len(mut self, max_len: usize) -> Self {
        self.max_len = Some(max_len);
        self
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn loss(&self) -> ChainLoss {
        self.loss
    }

    pub fn enumeration_cap(&self) -> usize {
        self.enumeration_cap
    }

    pub fn max_len(&self) -> Option<usize> {
        self.max_len
    }

    pub fn seq_len(&self, x: &[f64]) -> usize {
        x.len() / self.input_dim
    }

    fn n_trans(&self) -> usize {
        self.alphabet * self.alphabet
    }

    fn enumerable(&self, len: usize) -> bool {
        let mut count = 1usize;
        for _ in 0..len {
            count = match count.checked_mul(self.alphabet) {
                Some(c) if c <= self.enumeration_cap => c,
                _ => return false,
            };
        }
        true
    }

    /// `emissions[t][l] = w_emit[l] · x_t`.
    fn emission_scores(&self, w: &[f64], x: &[f64]) -> Vec<Vec<f64>> {
        let (a, d, off) = (self.alphabet, self.input_dim, self.n_trans());
        x.chunks(d).map(|xt| (0..a).map(|l| dot(&w[off + l * d..off + (l + 1) * d], xt)).collect()).collect()
    }

    fn check_sequence(&self, x: &[f64], y: &[usize]) -> Result<()> {
        self.check_input(x)?;
        self.check_output(x, &y.to_vec())
    }
}

/// Maximizes `Σ_t unary[t][y_t] + Σ_t pair(y_{t-1}, y_t)` and returns the
/// lexicographically smallest maximizer.
///
/// Suffix values are computed backward; the forward pass then picks the
/// smallest label consistent with an optimal completion.
pub(crate) fn lex_viterbi(unary: &[Vec<f64>], pair: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let len = unary.len();
    if len == 0 {
        return Vec::new();
    }
    let a = unary[0].len();
    let mut suffix = vec![vec![0.0; a]; len];
    suffix[len - 1] = unary[len - 1].clone();
    for t in (0..len - 1).rev() {
        for l in 0..a {
            let best = (0..a).map(|n| pair(l, n) + suffix[t + 1][n]).fold(f64::NEG_INFINITY, f64::max);
            suffix[t][l] = unary[t][l] + best;
        }
    }
    let pick = |vals: &mut dyn Iterator<Item = f64>| {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (l, v) in vals.enumerate() {
            if v > best.1 {
                best = (l, v);
            }
        }
        best.0
    };
    let mut path = Vec::with_capacity(len);
    path.push(pick(&mut suffix[0].iter().copied()));
    for t in 1..len {
        let prev = path[t - 1];
        path.push(pick(&mut (0..a).map(|l| pair(prev, l) + suffix[t][l])));
    }
    path
}

impl OutputSpace for ChainSpace {
    type Output = Vec<usize>;

    fn space_id(&self) -> &'static str {
        "chain"
    }

    fn dim(&self) -> usize {
        self.n_trans() + self.alphabet * self.input_dim
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.is_empty() || !x.len().is_multiple_of(self.input_dim) {
            return Err(Error::contract(format!(
                "sequence input of {} reals is not a positive multiple of emission dimension {}",
                x.len(),
                self.input_dim
            )));
        }
        if let Some(max) = self.max_len {
            if self.seq_len(x) > max {
                return Err(Error::contract(format!("sequence length {} exceeds bound {max}", self.seq_len(x))));
            }
        }
        Ok(())
    }

    fn check_output(&self, x: &[f64], y: &Vec<usize>) -> Result<()> {
        let len = self.seq_len(x);
        if y.len() != len {
            return Err(Error::OutputNotInSpace(format!(
                "label sequence length {} does not match input length {len}",
                y.len()
            )));
        }
        if let Some(bad) = y.iter().find(|&&l| l >= self.alphabet) {
            return Err(Error::OutputNotInSpace(format!("label {bad} outside alphabet 0..{}", self.alphabet)));
        }
        Ok(())
    }

    fn add_phi(&self, x: &[f64], y: &Vec<usize>, scale: f64, out: &mut [f64]) {
        let (a, d, off) = (self.alphabet, self.input_dim, self.n_trans());
        for pair in y.windows(2) {
            out[pair[0] * a + pair[1]] += scale;
        }
        for (xt, &l) in x.chunks(d).zip(y) {
            for (o, v) in out[off + l * d..off + (l + 1) * d].iter_mut().zip(xt) {
                *o += scale * v;
            }
        }
    }

    fn score(&self, w: &[f64], x: &[f64], y: &Vec<usize>) -> f64 {
        let (a, d, off) = (self.alphabet, self.input_dim, self.n_trans());
        let trans: f64 = y.windows(2).map(|p| w[p[0] * a + p[1]]).sum();
        let emit: f64 = x.chunks(d).zip(y).map(|(xt, &l)| dot(&w[off + l * d..off + (l + 1) * d], xt)).sum();
        trans + emit
    }

    fn delta(&self, a: &Vec<usize>, b: &Vec<usize>) -> f64 {
        match self.loss {
            ChainLoss::ZeroOne => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
            ChainLoss::Hamming => {
                let diff = a.iter().zip(b).filter(|(p, q)| p != q).count();
                (diff + a.len().abs_diff(b.len())) as f64
            }
        }
    }

    fn candidates(&self, x: &[f64]) -> Option<Vec<Vec<usize>>> {
        let len = self.seq_len(x);
        if len == 0 || !self.enumerable(len) {
            return None;
        }
        let mut out = Vec::new();
        let mut cur = vec![0usize; len];
        loop {
            out.push(cur.clone());
            // odometer increment, last position fastest → lexicographic order
            let mut pos = len;
            loop {
                if pos == 0 {
                    return Some(out);
                }
                pos -= 1;
                cur[pos] += 1;
                if cur[pos] < self.alphabet {
                    break;
                }
                cur[pos] = 0;
            }
        }
    }

    fn argmax_score(&self, w: &Weights, x: &[f64]) -> Result<Vec<usize>> {
        check_weights(self, w)?;
        self.check_input(x)?;
        let unary = self.emission_scores(w, x);
        let a = self.alphabet;
        Ok(lex_viterbi(&unary, |p, n| w[p * a + n]))
    }

    fn argmax_loss_augmented(&self, w: &Weights, x: &[f64], z: &Vec<usize>) -> Result<Augmented<Vec<usize>>> {
        if self.loss == ChainLoss::ZeroOne {
            return enumerate::argmax_loss_augmented(self, w, x, z);
        }
        check_weights(self, w)?;
        self.check_sequence(x, z)?;
        let mut unary = self.emission_scores(w, x);
        for (row, &zt) in unary.iter_mut().zip(z) {
            for (l, u) in row.iter_mut().enumerate() {
                if l != zt {
                    *u += 1.0;
                }
            }
        }
        let a = self.alphabet;
        let output = lex_viterbi(&unary, |p, n| w[p * a + n]);
        let value = augmented_value(self, w, x, z, &output);
        Ok(Augmented { output, value })
    }

    fn argmin_slack(
        &self,
        w: &Weights,
        x: &[f64],
        upsilon: &Vec<usize>,
        neighbors: &[(f64, &Vec<usize>)],
        c1: f64,
    ) -> Result<Vec<usize>> {
        if self.loss == ChainLoss::ZeroOne {
            return enumerate::argmin_slack(self, w, x, upsilon, neighbors, c1);
        }
        check_weights(self, w)?;
        self.check_sequence(x, upsilon)?;
        enumerate::check_slack_args(neighbors, c1)?;
        // Maximize the negated objective. Length-difference terms are constant in y.
        let mut unary = self.emission_scores(w, x);
        for (t, row) in unary.iter_mut().enumerate() {
            for (l, u) in row.iter_mut().enumerate() {
                *u *= c1;
                if l != upsilon[t] {
                    *u -= c1;
                }
                for (omega, zn) in neighbors {
                    if zn.get(t).is_some_and(|&v| v != l) {
                        *u -= omega;
                    }
                }
            }
        }
        let a = self.alphabet;
        Ok(lex_viterbi(&unary, |p, n| c1 * w[p * a + n]))
    }

    fn random_output(&self, x: &[f64], rng: &mut dyn RngCore) -> Vec<usize> {
        (0..self.seq_len(x)).map(|_| rng.random_range(0..self.alphabet)).collect()
    }

    /// Truncates, or pads by repeating the final label.
    fn project(&self, x: &[f64], y: &Vec<usize>) -> Vec<usize> {
        let len = self.seq_len(x);
        let fill = y.last().copied().unwrap_or(0);
        let mut out: Vec<usize> = y.iter().copied().take(len).collect();
        out.resize(len, fill);
        out
    }

    fn row_width(&self) -> Option<usize> {
        Some(self.input_dim)
    }

    /// Mean emission vector, so sequences of different lengths are comparable.
    fn embed<'a>(&self, x: &'a [f64]) -> Cow<'a, [f64]> {
        let d = self.input_dim;
        let len = self.seq_len(x).max(1) as f64;
        let mut mean = vec![0.0; d];
        for xt in x.chunks(d) {
            for (m, v) in mean.iter_mut().zip(xt) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= len);
        Cow::Owned(mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_transitions_and_emissions() {
        let space = ChainSpace::new(2, 1, ChainLoss::Hamming).unwrap();
        assert_eq!(space.dim(), 6);
        // one 0→1 transition; label 0 emits 1, label 1 emits 2
        assert_eq!(space.phi(&[1.0, 2.0], &vec![0, 1]).unwrap(), vec![0.0, 1.0, 0.0, 0.0, 1.0, 2.0]);
        assert!(space.phi(&[1.0, 2.0], &vec![0]).is_err());
        assert!(space.phi(&[1.0, 2.0], &vec![0, 2]).is_err());
    }

    #[test]
    fn losses() {
        let ham = ChainSpace::new(2, 1, ChainLoss::Hamming).unwrap();
        assert_eq!(ham.delta(&vec![0, 1, 1], &vec![0, 0, 1]), 1.0);
        assert_eq!(ham.delta(&vec![0, 1, 1], &vec![0, 1, 1]), 0.0);
        assert_eq!(ham.delta(&vec![0, 1, 1], &vec![1, 1]), 2.0);
        let zo = ChainSpace::new(2, 1, ChainLoss::ZeroOne).unwrap();
        assert_eq!(zo.delta(&vec![0, 1, 1], &vec![0, 0, 1]), 1.0);
        assert_eq!(zo.delta(&vec![1], &vec![1]), 0.0);
    }

    #[test]
    fn candidates_are_lexicographic_and_capped() {
        let space = ChainSpace::new(2, 1, ChainLoss::ZeroOne).unwrap().with_enumeration_cap(8);
        let c = space.candidates(&[0.0; 3]).unwrap();
        assert_eq!(c.len(), 8);
        assert_eq!(c[0], vec![0, 0, 0]);
        assert_eq!(c[1], vec![0, 0, 1]);
        assert_eq!(c[7], vec![1, 1, 1]);
        assert!(space.candidates(&[0.0; 4]).is_none());
    }

    #[test]
    fn zero_weights_hamming_flips_every_position() {
        let space = ChainSpace::new(3, 2, ChainLoss::Hamming).unwrap();
        let w = Weights::zeros(space.dim());
        let z = vec![0, 2, 1, 0];
        let aug = space.argmax_loss_augmented(&w, &[0.5; 8], &z).unwrap();
        assert_eq!(aug.value, 4.0);
        assert_eq!(aug.output, vec![1, 0, 0, 1]);
        assert_eq!(space.argmax_score(&w, &[0.5; 8]).unwrap(), vec![0, 0, 0, 0]);
    }

    #[test]
    fn zero_one_above_cap_is_rejected() {
        let space = ChainSpace::new(2, 1, ChainLoss::ZeroOne).unwrap().with_enumeration_cap(4);
        let w = Weights::zeros(space.dim());
        let x = [0.0; 3];
        assert!(space.argmax_score(&w, &x).is_ok());
        assert!(matches!(space.argmax_loss_augmented(&w, &x, &vec![0, 0, 0]), Err(Error::Unsupported(_))));
        assert!(matches!(space.argmin_slack(&w, &x, &vec![0, 0, 0], &[], 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn slack_without_neighbors_returns_upsilon() {
        for loss in [ChainLoss::Hamming, ChainLoss::ZeroOne] {
            let space = ChainSpace::new(2, 1, loss).unwrap();
            let w = Weights::zeros(space.dim());
            let ups = vec![1, 0, 1];
            assert_eq!(space.argmin_slack(&w, &[1.0; 3], &ups, &[], 1.0).unwrap(), ups);
        }
    }

    #[test]
    fn project_and_embed() {
        let space = ChainSpace::new(3, 2, ChainLoss::Hamming).unwrap();
        assert_eq!(space.project(&[0.0; 8], &vec![2, 1]), vec![2, 1, 1, 1]);
        assert_eq!(space.project(&[0.0; 2], &vec![2, 1]), vec![2]);
        assert_eq!(space.embed(&[1.0, 2.0, 3.0, 6.0]).into_owned(), vec![2.0, 4.0]);
    }

    #[test]
    fn input_shape_checks() {
        let space = ChainSpace::new(2, 2, ChainLoss::Hamming).unwrap().with_max_len(2);
        assert!(space.check_input(&[]).is_err());
        assert!(space.check_input(&[1.0; 3]).is_err());
        assert!(space.check_input(&[1.0; 4]).is_ok());
        assert!(space.check_input(&[1.0; 6]).is_err());
    }
}
