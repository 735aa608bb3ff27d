//! Closest-to-boundary query selection with the support-vector stopping rule.

use rand::Rng;

use crate::error::Result;
use crate::features::FeatureVector;
use crate::svm::{self, balanced_accuracy, Label, LabeledDataset, SvmModel, SvmParams};

/// Unlabeled candidates from one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    pub instances: Vec<FeatureVector>,
    consumed: Vec<bool>,
}

impl CandidatePool {
    pub fn new(instances: Vec<FeatureVector>) -> Self {
        let consumed = vec![false; instances.len()];
        Self { instances, consumed }
    }

    /// Number of candidates not yet labeled.
    pub fn remaining(&self) -> usize {
        self.consumed.iter().filter(|c| !**c).count()
    }

    pub fn is_consumed(&self, index: usize) -> bool {
        self.consumed[index]
    }

    pub fn consume(&mut self, index: usize) {
        debug_assert!(!self.consumed[index], "candidate {index} picked twice");
        self.consumed[index] = true;
    }

    pub fn unconsumed(&self) -> impl Iterator<Item = usize> + '_ {
        self.consumed.iter().enumerate().filter(|(_, c)| !**c).map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pick {
    Candidate { index: usize, distance: f64 },
    Converged,
}

/// Unconsumed candidate nearest the boundary, provided it is strictly closer
/// than every support vector. Ties go to the lowest index.
pub fn svm_pick(model: &SvmModel, pool: &CandidatePool) -> Result<Pick> {
    let guard = model.min_support_distance();
    let mut best: Option<(usize, f64)> = None;
    for i in pool.unconsumed() {
        let d = model.distance(&pool.instances[i].values)?;
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    Ok(match best {
        Some((index, distance)) if distance < guard => Pick::Candidate { index, distance },
        _ => Pick::Converged,
    })
}

/// Per-pose convergence flags and the label counter for the current visit.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceState {
    pub converged: Vec<bool>,
    pub labels_this_visit: usize,
    pub budget: usize,
}

impl ConvergenceState {
    pub fn new(poses: usize, budget: usize) -> Self {
        Self { converged: vec![false; poses], labels_this_visit: 0, budget }
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|c| *c)
    }

    pub fn begin_visit(&mut self) {
        self.labels_this_visit = 0;
    }

    pub fn budget_left(&self) -> bool {
        self.labels_this_visit < self.budget
    }

    pub fn record_label(&mut self) {
        assert!(self.budget_left(), "visit budget exceeded");
        self.labels_this_visit += 1;
    }
}

/// Whether a pose's fresh pool is already settled; marks the pose if so.
pub fn visit_converged(state: &mut ConvergenceState, pose: usize, pool: &CandidatePool, model: &SvmModel) -> Result<bool> {
    let done = svm_pick(model, pool)? == Pick::Converged;
    if done {
        state.converged[pose] = true;
    }
    Ok(done)
}

/// Append one labeled instance and retrain from scratch.
pub fn add_and_retrain(
    data: &mut LabeledDataset,
    instance: FeatureVector,
    label: Label,
    params: &SvmParams,
) -> Result<SvmModel> {
    data.push(instance, label);
    svm::train(data, params)
}

/// Query strategy for the labeling-efficiency comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryStrategy {
    Active,
    Random,
}

/// Labels needed (including the initial ones) before a model trained on the
/// queried examples reaches `target` balanced accuracy on the test set.
/// `None` if the pool runs out first.
#[allow(clippy::too_many_arguments)]
pub fn labels_to_reach<R: Rng + ?Sized>(
    strategy: QueryStrategy,
    pool: &[Vec<f64>],
    pool_labels: &[Label],
    test: &[Vec<f64>],
    test_labels: &[Label],
    initial: &[usize],
    target: f64,
    params: &SvmParams,
    rng: &mut R,
) -> Result<Option<usize>> {
    let mut labeled: Vec<usize> = initial.to_vec();
    let mut taken = vec![false; pool.len()];
    for &i in initial {
        taken[i] = true;
    }
    loop {
        let xs: Vec<&[f64]> = labeled.iter().map(|&i| pool[i].as_slice()).collect();
        let ys: Vec<Label> = labeled.iter().map(|&i| pool_labels[i]).collect();
        let model = svm::train_vectors(&xs, &ys, params)?;
        let predicted: Vec<Label> = test.iter().map(|x| model.classify(x)).collect::<Result<_>>()?;
        if balanced_accuracy(test_labels, &predicted) >= target {
            return Ok(Some(labeled.len()));
        }
        let free: Vec<usize> = (0..pool.len()).filter(|&i| !taken[i]).collect();
        if free.is_empty() {
            return Ok(None);
        }
        let next = match strategy {
            QueryStrategy::Random => free[rng.random_range(0..free.len())],
            QueryStrategy::Active => {
                let mut best = (free[0], f64::INFINITY);
                for &i in &free {
                    let d = model.distance(&pool[i])?;
                    if d < best.1 {
                        best = (i, d);
                    }
                }
                best.0
            }
        };
        taken[next] = true;
        labeled.push(next);
    }
}
