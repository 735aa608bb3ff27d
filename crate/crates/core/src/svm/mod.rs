//! Class-weighted soft-margin RBF SVM trained with SMO.

mod grid;
mod smo;

pub use grid::{balanced_accuracy, grid_search, split_halves, GridResult, GridScore, GridSpec};
pub use smo::{solve, DualSolution};

use crate::error::{Error, Result};
use crate::features::FeatureVector;

/// Binary outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn from_success(success: bool) -> Self {
        if success {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn from_sign(s: i64) -> Option<Self> {
        match s {
            1 => Some(Label::Positive),
            -1 => Some(Label::Negative),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub label: Label,
}

/// Examples gathered for one behavior.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    pub tag: String,
    pub examples: Vec<LabeledExample>,
}

impl LabeledDataset {
    pub fn new(tag: impl Into<String>) -> Self {
        Self { tag: tag.into(), examples: Vec::new() }
    }

    pub fn push(&mut self, features: FeatureVector, label: Label) {
        self.examples.push(LabeledExample { features, label });
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// (positives, negatives)
    pub fn counts(&self) -> (usize, usize) {
        let pos = self.examples.iter().filter(|e| e.label == Label::Positive).count();
        (pos, self.examples.len() - pos)
    }

    pub fn has_both_labels(&self) -> bool {
        let (p, n) = self.counts();
        p > 0 && n > 0
    }

    pub fn vectors(&self) -> Vec<&[f64]> {
        self.examples.iter().map(|e| e.features.values.as_slice()).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.examples.iter().map(|e| e.label).collect()
    }
}

/// Solver and model hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    /// RBF width; `None` derives it from the training data.
    pub gamma: Option<f64>,
    pub c_neg: f64,
    /// Positive-class cost; `None` means `c_neg * #neg / #pos`.
    pub c_pos: Option<f64>,
    /// KKT violation tolerance used as the SMO stopping criterion.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { gamma: None, c_neg: 1.0, c_pos: None, tolerance: 1e-3, max_iterations: 1_000_000 }
    }
}

impl SvmParams {
    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    /// Costs actually applied for a dataset with the given class counts.
    pub fn costs(&self, positives: usize, negatives: usize) -> (f64, f64) {
        let c_pos = self.c_pos.unwrap_or(self.c_neg * negatives as f64 / positives.max(1) as f64);
        (c_pos, self.c_neg)
    }

    fn validate(&self) -> Result<()> {
        let pos_ok = self.c_pos.is_none_or(|c| c > 0.0);
        if self.gamma.is_some_and(|g| !(g > 0.0)) || !(self.c_neg > 0.0) || !pos_ok || !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("svm gamma, costs and tolerance must be > 0".into()));
        }
        Ok(())
    }
}

/// `1 / (dim * mean per-dimension variance)` of the training vectors.
pub fn default_gamma(xs: &[&[f64]]) -> f64 {
    let n = xs.len() as f64;
    let dim = xs.first().map_or(1, |x| x.len()).max(1);
    let mut var_sum = 0.0;
    for j in 0..dim {
        let mean = xs.iter().map(|x| x[j]).sum::<f64>() / n;
        var_sum += xs.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / n;
    }
    let mean_var = var_sum / dim as f64;
    if mean_var > 0.0 && mean_var.is_finite() {
        1.0 / (dim as f64 * mean_var)
    } else {
        1.0 / dim as f64
    }
}

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Trained decision function `f(x) = sum_i coef_i K(sv_i, x) + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub gamma: f64,
    pub c_pos: f64,
    pub c_neg: f64,
    pub dim: usize,
    pub support: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    /// Dual objective `1/2 a'Qa - sum a` at the solution.
    pub objective: f64,
}

impl SvmModel {
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self.decision_unchecked(x))
    }

    pub(crate) fn decision_unchecked(&self, x: &[f64]) -> f64 {
        self.support.iter().zip(&self.coef).map(|(sv, c)| c * rbf(self.gamma, sv, x)).sum::<f64>() + self.bias
    }

    /// Distance to the boundary, `|f(x)|`.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        self.decision_value(x).map(f64::abs)
    }

    /// Sign of the decision value; exactly zero counts as negative.
    pub fn classify(&self, x: &[f64]) -> Result<Label> {
        Ok(if self.decision_value(x)? > 0.0 { Label::Positive } else { Label::Negative })
    }

    /// Smallest boundary distance among the support vectors.
    pub fn min_support_distance(&self) -> f64 {
        self.support.iter().map(|sv| self.decision_unchecked(sv).abs()).fold(f64::INFINITY, f64::min)
    }

    pub fn n_support(&self) -> usize {
        self.support.len()
    }
}

/// Train on a labeled dataset.
pub fn train(data: &LabeledDataset, params: &SvmParams) -> Result<SvmModel> {
    train_vectors(&data.vectors(), &data.labels(), params)
}

/// Train on raw vectors and labels.
pub fn train_vectors(xs: &[&[f64]], ys: &[Label], params: &SvmParams) -> Result<SvmModel> {
    params.validate()?;
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    let positives = ys.iter().filter(|l| **l == Label::Positive).count();
    let negatives = ys.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass { positives, negatives });
    }
    let dim = xs[0].len();
    for x in xs {
        if x.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
    }
    let gamma = params.gamma.unwrap_or_else(|| default_gamma(xs));
    let (c_pos, c_neg) = params.costs(positives, negatives);
    let y: Vec<f64> = ys.iter().map(|l| l.sign()).collect();
    let c: Vec<f64> = ys.iter().map(|l| if *l == Label::Positive { c_pos } else { c_neg }).collect();
    let kernel = kernel_matrix(gamma, xs);
    let sol = solve(&kernel, &y, &c, params.tolerance, params.max_iterations);

    let mut support = Vec::new();
    let mut coef = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support.push(xs[i].to_vec());
            coef.push(a * y[i]);
        }
    }
    Ok(SvmModel { gamma, c_pos, c_neg, dim, support, coef, bias: -sol.rho, objective: sol.objective })
}

/// Dense RBF Gram matrix, row-major.
pub fn kernel_matrix(gamma: f64, xs: &[&[f64]]) -> Vec<f64> {
    let n = xs.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(gamma, xs[i], xs[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Largest KKT violation of a trained model over its training set.
pub fn kkt_violation(model: &SvmModel, xs: &[&[f64]], ys: &[Label], alpha: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for ((x, l), &a) in xs.iter().zip(ys).zip(alpha) {
        let c = if *l == Label::Positive { model.c_pos } else { model.c_neg };
        let m = l.sign() * model.decision_unchecked(x);
        let v = if a <= 0.0 {
            (1.0 - m).max(0.0)
        } else if a >= c {
            (m - 1.0).max(0.0)
        } else {
            (m - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}
