//! Exhaustive inference over [`OutputSpace::candidates`].
//!
//! Candidates arrive in ascending order, so keeping the first strict
//! improvement implements the smallest-output tie rule.

use crate::error::{Error, Result};
use crate::model::{augmented_value, check_weights, slack_objective, Augmented, OutputSpace, Weights};

fn candidates_or_err<S: OutputSpace + ?Sized>(space: &S, x: &[f64]) -> Result<Vec<S::Output>> {
    match space.candidates(x) {
        Some(c) if !c.is_empty() => Ok(c),
        Some(_) => Err(Error::contract("output space has no candidates")),
        None => Err(Error::Unsupported(format!(
            "'{}' output set too large to enumerate for this input and the loss does not decompose",
            space.space_id()
        ))),
    }
}

fn first_best<Y>(cands: Vec<Y>, mut value: impl FnMut(&Y) -> f64, better: fn(f64, f64) -> bool) -> (Y, f64) {
    let mut iter = cands.into_iter();
    let first = iter.next().expect("nonempty candidate set");
    let mut best_val = value(&first);
    let mut best = first;
    for y in iter {
        let v = value(&y);
        if better(v, best_val) {
            best = y;
            best_val = v;
        }
    }
    (best, best_val)
}

pub fn argmax_score<S: OutputSpace + ?Sized>(space: &S, w: &Weights, x: &[f64]) -> Result<S::Output> {
    check_weights(space, w)?;
    space.check_input(x)?;
    let cands = candidates_or_err(space, x)?;
    Ok(first_best(cands, |y| space.score(w, x, y), |a, b| a > b).0)
}

pub fn argmax_loss_augmented<S: OutputSpace + ?Sized>(
    space: &S,
    w: &Weights,
    x: &[f64],
    z: &S::Output,
) -> Result<Augmented<S::Output>> {
    check_weights(space, w)?;
    space.check_input(x)?;
    space.check_output(x, z)?;
    let cands = candidates_or_err(space, x)?;
    let (output, value) = first_best(cands, |y| augmented_value(space, w, x, z, y), |a, b| a > b);
    Ok(Augmented { output, value })
}

pub(crate) fn check_slack_args<Y>(neighbors: &[(f64, &Y)], c1: f64) -> Result<()> {
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(Error::contract(format!("c1 must be positive and finite, got {c1}")));
    }
    if let Some((omega, _)) = neighbors.iter().find(|(o, _)| !(*o >= 0.0 && o.is_finite())) {
        return Err(Error::contract(format!("neighbor weight must be finite and >= 0, got {omega}")));
    }
    Ok(())
}

pub fn argmin_slack<S: OutputSpace + ?Sized>(
    space: &S,
    w: &Weights,
    x: &[f64],
    upsilon: &S::Output,
    neighbors: &[(f64, &S::Output)],
    c1: f64,
) -> Result<S::Output> {
    check_weights(space, w)?;
    space.check_input(x)?;
    space.check_output(x, upsilon)?;
    check_slack_args(neighbors, c1)?;
    let cands = candidates_or_err(space, x)?;
    Ok(first_best(cands, |y| slack_objective(space, w, x, upsilon, neighbors, c1, y), |a, b| a < b).0)
}
