//! Ten-fold rotation: one fold tests, two of the remaining nine keep their
//! labels, the other seven are masked.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DataPoint, Dataset};

pub const NUM_FOLDS: usize = 10;
const LABELED_FOLDS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    /// Fold index of every point, indexed by id.
    pub assignment: Vec<usize>,
    /// The two labeled training folds for each run; run `r` tests on fold `r`.
    pub labeled_folds: Vec<[usize; 2]>,
}

impl FoldPlan {
    pub fn fold_sizes(&self) -> [usize; NUM_FOLDS] {
        let mut sizes = [0; NUM_FOLDS];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Training and test sides of one run. Training points are renumbered
/// `0..n_train`; `hidden` carries the masked ground truth out of band.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldSplit<Y> {
    pub run: usize,
    pub train: Dataset<Y>,
    pub test: Dataset<Y>,
    /// Original id of each training point.
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    /// Ground truth of masked training points (`None` where the label was kept).
    pub hidden: Vec<Option<Y>>,
}

fn run_seed(seed: u64, run: usize) -> u64 {
    seed ^ (run as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn make_folds<Y>(ds: &Dataset<Y>, seed: u64) -> Result<FoldPlan> {
    let n = ds.len();
    if n < NUM_FOLDS {
        return Err(Error::contract(format!("{NUM_FOLDS}-fold split needs at least {NUM_FOLDS} points, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut assignment = vec![0; n];
    for (pos, &id) in order.iter().enumerate() {
        assignment[id] = pos % NUM_FOLDS;
    }
    let labeled_folds = (0..NUM_FOLDS)
        .map(|test| {
            let mut rest: Vec<usize> = (0..NUM_FOLDS).filter(|&f| f != test).collect();
            rest.shuffle(&mut ChaCha8Rng::seed_from_u64(run_seed(seed, test)));
            let mut pick = [rest[0], rest[1]];
            pick.sort_unstable();
            pick
        })
        .collect();
    Ok(FoldPlan { seed, assignment, labeled_folds })
}

pub fn mask_labels<Y: Clone>(ds: &Dataset<Y>, plan: &FoldPlan, run: usize) -> Result<FoldSplit<Y>> {
    if run >= NUM_FOLDS {
        return Err(Error::contract(format!("run index {run} outside 0..{NUM_FOLDS}")));
    }
    if plan.assignment.len() != ds.len() {
        return Err(Error::contract("fold plan does not match dataset size"));
    }
    let labeled = plan.labeled_folds[run];
    debug_assert_eq!(LABELED_FOLDS, labeled.len());
    let mut train = Vec::new();
    let mut test = Vec::new();
    let (mut train_ids, mut test_ids, mut hidden) = (Vec::new(), Vec::new(), Vec::new());
    for p in &ds.points {
        let fold = plan.assignment[p.id];
        if fold == run {
            test.push(DataPoint { id: test.len(), x: p.x.clone(), y: p.y.clone() });
            test_ids.push(p.id);
        } else {
            let keep = labeled.contains(&fold);
            train.push(DataPoint { id: train.len(), x: p.x.clone(), y: if keep { p.y.clone() } else { None } });
            train_ids.push(p.id);
            hidden.push(if keep { None } else { p.y.clone() });
        }
    }
    Ok(FoldSplit {
        run,
        train: Dataset::new(ds.space_id.clone(), train),
        test: Dataset::new(ds.space_id.clone(), test),
        train_ids,
        test_ids,
        hidden,
    })
}
