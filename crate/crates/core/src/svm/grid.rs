//! Exhaustive (gamma, C) search scored by held-out balanced accuracy.

use super::{train_vectors, Label, SvmParams};
use crate::error::{Error, Result};

/// Log2-spaced parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub gammas: Vec<f64>,
    /// Multipliers applied to both class costs.
    pub c_scales: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        let pow2 = |e: i32| 2f64.powi(e);
        Self {
            gammas: (-15..=3).step_by(2).map(pow2).collect(),
            c_scales: (-5..=15).step_by(2).map(pow2).collect(),
        }
    }
}

impl GridSpec {
    pub fn single(gamma: f64, c_scale: f64) -> Self {
        Self { gammas: vec![gamma], c_scales: vec![c_scale] }
    }

    pub fn len(&self) -> usize {
        self.gammas.len() * self.c_scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridScore {
    pub gamma: f64,
    pub c_scale: f64,
    pub balanced_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: SvmParams,
    pub best_score: GridScore,
    /// One entry per cell, gamma-major in grid order.
    pub scores: Vec<GridScore>,
}

/// Mean of true-positive and true-negative rates.
pub fn balanced_accuracy(truth: &[Label], predicted: &[Label]) -> f64 {
    let mut tp = 0usize;
    let mut pos = 0usize;
    let mut tn = 0usize;
    let mut neg = 0usize;
    for (t, p) in truth.iter().zip(predicted) {
        match t {
            Label::Positive => {
                pos += 1;
                tp += usize::from(*p == Label::Positive);
            }
            Label::Negative => {
                neg += 1;
                tn += usize::from(*p == Label::Negative);
            }
        }
    }
    let rate = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    0.5 * (rate(tp, pos) + rate(tn, neg))
}

/// Stratified split: within each class, examples alternate train/test.
/// Returns (train indices, test indices).
pub fn split_halves(labels: &[Label]) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut seen = [0usize; 2];
    for (i, l) in labels.iter().enumerate() {
        let k = usize::from(*l == Label::Positive);
        if seen[k] % 2 == 0 {
            train.push(i);
        } else {
            test.push(i);
        }
        seen[k] += 1;
    }
    (train, test)
}

/// Search every cell of `grid`; ties go to the smaller gamma, then smaller C.
pub fn grid_search(xs: &[&[f64]], ys: &[Label], grid: &GridSpec, base: &SvmParams) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let (train_idx, test_idx) = split_halves(ys);
    let both = |idx: &[usize]| {
        idx.iter().any(|&i| ys[i] == Label::Positive) && idx.iter().any(|&i| ys[i] == Label::Negative)
    };
    if !both(&train_idx) || !both(&test_idx) {
        return Err(Error::DegeneratePool("each half needs both labels".into()));
    }
    let tx: Vec<&[f64]> = train_idx.iter().map(|&i| xs[i]).collect();
    let ty: Vec<Label> = train_idx.iter().map(|&i| ys[i]).collect();
    let truth: Vec<Label> = test_idx.iter().map(|&i| ys[i]).collect();

    let mut gammas = grid.gammas.clone();
    let mut scales = grid.c_scales.clone();
    gammas.sort_by(f64::total_cmp);
    scales.sort_by(f64::total_cmp);

    let mut scores = Vec::with_capacity(grid.len());
    let mut best: Option<(GridScore, SvmParams)> = None;
    for &gamma in &gammas {
        for &scale in &scales {
            let params = SvmParams {
                gamma: Some(gamma),
                c_neg: base.c_neg * scale,
                c_pos: base.c_pos.map(|c| c * scale),
                ..*base
            };
            let model = train_vectors(&tx, &ty, &params)?;
            let predicted: Vec<Label> = test_idx
                .iter()
                .map(|&i| model.classify(xs[i]))
                .collect::<Result<_>>()?;
            let score = GridScore { gamma, c_scale: scale, balanced_accuracy: balanced_accuracy(&truth, &predicted) };
            if best.as_ref().is_none_or(|(b, _)| score.balanced_accuracy > b.balanced_accuracy) {
                best = Some((score, params));
            }
            scores.push(score);
        }
    }
    let (best_score, best) = best.expect("non-empty grid");
    Ok(GridResult { best, best_score, scores })
}
