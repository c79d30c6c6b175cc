//! Domain types shared across the crate and the [`OutputSpace`] contract.

use std::borrow::Cow;
use std::collections::HashSet;
use std::fmt;
use std::fmt::Debug;
use std::hash::Hash;
use std::ops::Deref;

use rand::RngCore;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::enumerate;

/// Linear model parameters `w ∈ R^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Weights(pub Vec<f64>);

impl Weights {
    pub fn zeros(m: usize) -> Self {
        Weights(vec![0.0; m])
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        dot(&self.0, v)
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Weights {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Weights {
    fn from(v: Vec<f64>) -> Self {
        Weights(v)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A training or evaluation point. `y` is present iff the point is labeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint<Y> {
    pub id: usize,
    pub x: Vec<f64>,
    pub y: Option<Y>,
}

impl<Y> DataPoint<Y> {
    pub fn is_labeled(&self) -> bool {
        self.y.is_some()
    }
}

/// Ordered collection of points; `points[i].id == i` once validated.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<Y> {
    pub space_id: String,
    pub points: Vec<DataPoint<Y>>,
}

impl<Y> Dataset<Y> {
    pub fn new(space_id: impl Into<String>, points: Vec<DataPoint<Y>>) -> Self {
        Dataset { space_id: space_id.into(), points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn labeled_count(&self) -> usize {
        self.points.iter().filter(|p| p.is_labeled()).count()
    }

    pub fn inputs(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().map(|p| p.x.as_slice())
    }
}

/// Output of loss-augmented inference: the maximizer and its objective value
/// `w·(Φ(x,υ) − Φ(x,z)) + Δ(υ,z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented<Y> {
    pub output: Y,
    pub value: f64,
}

/// A structured output space: joint feature map, structured loss and the three
/// inference oracles the solver relies on.
///
/// Every argmax/argmin breaks ties toward the smallest output under `Ord`.
/// The default oracle implementations enumerate [`OutputSpace::candidates`];
/// spaces that cannot enumerate must override them.
pub trait OutputSpace: Send + Sync {
    type Output: Clone + Eq + Ord + Hash + Debug + Send + Sync + Serialize + DeserializeOwned;

    /// Identifier written into dataset and model files.
    fn space_id(&self) -> &'static str;

    /// Joint feature dimension `m`.
    fn dim(&self) -> usize;

    fn check_input(&self, x: &[f64]) -> Result<()>;

    /// Membership test `y ∈ Y` for the given input.
    fn check_output(&self, x: &[f64], y: &Self::Output) -> Result<()>;

    /// Adds `scale · Φ(x, y)` into `out`. Callers guarantee `y ∈ Y`.
    fn add_phi(&self, x: &[f64], y: &Self::Output, scale: f64, out: &mut [f64]);

    fn phi(&self, x: &[f64], y: &Self::Output) -> Result<Vec<f64>> {
        self.check_input(x)?;
        self.check_output(x, y)?;
        let mut out = vec![0.0; self.dim()];
        self.add_phi(x, y, 1.0, &mut out);
        Ok(out)
    }

    /// `w · Φ(x, y)` without the length check.
    fn score(&self, w: &[f64], x: &[f64], y: &Self::Output) -> f64 {
        let mut phi = vec![0.0; self.dim()];
        self.add_phi(x, y, 1.0, &mut phi);
        dot(w, &phi)
    }

    /// Structured loss. Zero on identical outputs, nonnegative, symmetric.
    fn delta(&self, a: &Self::Output, b: &Self::Output) -> f64;

    /// All of `Y` for this input in ascending order, when enumeration is allowed.
    fn candidates(&self, x: &[f64]) -> Option<Vec<Self::Output>>;

    fn argmax_score(&self, w: &Weights, x: &[f64]) -> Result<Self::Output> {
        enumerate::argmax_score(self, w, x)
    }

    fn argmax_loss_augmented(&self, w: &Weights, x: &[f64], z: &Self::Output) -> Result<Augmented<Self::Output>> {
        enumerate::argmax_loss_augmented(self, w, x, z)
    }

    /// Minimizes `Σ ω Δ(y, z_nb) + c1 (−w·Φ(x,y) + Δ(υ, y))` over `y`.
    fn argmin_slack(
        &self,
        w: &Weights,
        x: &[f64],
        upsilon: &Self::Output,
        neighbors: &[(f64, &Self::Output)],
        c1: f64,
    ) -> Result<Self::Output> {
        enumerate::argmin_slack(self, w, x, upsilon, neighbors, c1)
    }

    fn random_output(&self, x: &[f64], rng: &mut dyn RngCore) -> Self::Output;

    /// Coerces an output taken from another point into `Y` for input `x`.
    fn project(&self, _x: &[f64], y: &Self::Output) -> Self::Output {
        y.clone()
    }

    /// Width of one sequence position when inputs are stored as flattened
    /// rows; `None` for plain vectors. Drives the nested JSON layout of `x`.
    fn row_width(&self) -> Option<usize> {
        None
    }

    /// Fixed-length vector used for neighbor search and nearest-labeled init.
    fn embed<'a>(&self, x: &'a [f64]) -> Cow<'a, [f64]> {
        Cow::Borrowed(x)
    }
}

pub(crate) fn check_weights<S: OutputSpace + ?Sized>(space: &S, w: &[f64]) -> Result<()> {
    if w.len() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), got: w.len() });
    }
    Ok(())
}

/// Matching score `w · Φ(x, y)`.
pub fn matching_score<S: OutputSpace + ?Sized>(w: &Weights, x: &[f64], y: &S::Output, space: &S) -> Result<f64> {
    check_weights(space, w)?;
    space.check_input(x)?;
    space.check_output(x, y)?;
    Ok(space.score(w, x, y))
}

/// Loss-augmented objective of a single candidate `y` against reference `z`.
pub fn augmented_value<S: OutputSpace + ?Sized>(space: &S, w: &[f64], x: &[f64], z: &S::Output, y: &S::Output) -> f64 {
    (space.score(w, x, y) - space.score(w, x, z)) + space.delta(y, z)
}

/// Per-point slack objective for candidate `y`.
pub fn slack_objective<S: OutputSpace + ?Sized>(
    space: &S,
    w: &[f64],
    x: &[f64],
    upsilon: &S::Output,
    neighbors: &[(f64, &S::Output)],
    c1: f64,
    y: &S::Output,
) -> f64 {
    let manifold: f64 = neighbors.iter().map(|(omega, z)| omega * space.delta(y, z)).sum();
    manifold + c1 * (-space.score(w, x, y) + space.delta(upsilon, y))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    DuplicateId { id: usize },
    NonContiguousId { position: usize, id: usize },
    NonFiniteInput { id: usize },
    InputDimension { id: usize, reason: String },
    OutputNotInSpace { id: usize, reason: String },
    NoLabeledPoints,
    SpaceMismatch { dataset: String, space: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "dataset is empty"),
            Violation::DuplicateId { id } => write!(f, "duplicate id {id}"),
            Violation::NonContiguousId { position, id } => {
                write!(f, "id {id} at position {position}; ids must run 0..n in order")
            }
            Violation::NonFiniteInput { id } => write!(f, "point {id}: non-finite input"),
            Violation::InputDimension { id, reason } => write!(f, "point {id}: {reason}"),
            Violation::OutputNotInSpace { id, reason } => write!(f, "point {id}: {reason}"),
            Violation::NoLabeledPoints => write!(f, "no labeled points"),
            Violation::SpaceMismatch { dataset, space } => {
                write!(f, "dataset is for space '{dataset}' but space is '{space}'")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// Converts to an error unless every violation is allowed by `allow`.
    pub fn into_result(self, allow: impl Fn(&Violation) -> bool) -> Result<()> {
        let fatal: Vec<String> = self.violations.iter().filter(|v| !allow(v)).map(|v| v.to_string()).collect();
        if fatal.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(fatal.join("; ")))
        }
    }
}

/// Lists every structural problem with `ds` relative to `space`.
pub fn validate_dataset<S: OutputSpace + ?Sized>(ds: &Dataset<S::Output>, space: &S) -> ValidationReport {
    let mut violations = Vec::new();
    if ds.is_empty() {
        violations.push(Violation::Empty);
        return ValidationReport { violations };
    }
    if !ds.space_id.is_empty() && ds.space_id != space.space_id() {
        violations.push(Violation::SpaceMismatch { dataset: ds.space_id.clone(), space: space.space_id().to_string() });
    }
    let mut seen = HashSet::new();
    for (position, p) in ds.points.iter().enumerate() {
        if !seen.insert(p.id) {
            violations.push(Violation::DuplicateId { id: p.id });
        } else if p.id != position {
            violations.push(Violation::NonContiguousId { position, id: p.id });
        }
        if p.x.iter().any(|v| !v.is_finite()) {
            violations.push(Violation::NonFiniteInput { id: p.id });
        }
        let input_ok = match space.check_input(&p.x) {
            Ok(()) => true,
            Err(e) => {
                violations.push(Violation::InputDimension { id: p.id, reason: e.to_string() });
                false
            }
        };
        if let (true, Some(y)) = (input_ok, &p.y) {
            if let Err(e) = space.check_output(&p.x, y) {
                violations.push(Violation::OutputNotInSpace { id: p.id, reason: e.to_string() });
            }
        }
    }
    if ds.labeled_count() == 0 {
        violations.push(Violation::NoLabeledPoints);
    }
    ValidationReport { violations }
}
