mod oracles;

use manip_learn::error::Error;
use manip_learn::svm::{
    grid_search, kernel_matrix, solve, train, train_vectors, GridSpec, Label, LabeledDataset, SvmParams,
};
use manip_learn::features::FeatureVector;
use manip_learn::geometry::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn probes(seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| vec![rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2)]).collect()
}

#[test]
fn smo_agrees_with_projected_gradient_oracle() {
    for seed in 0..50 {
        let fx = oracles::svm_fixture(seed);
        let (gap, mismatches) = oracles::compare_with_oracle(&fx, &probes(seed + 1000, 100));
        assert!(gap < 1e-6, "seed {seed}: objective gap {gap}");
        assert_eq!(mismatches, 0, "seed {seed}");
    }
}

#[test]
fn default_tolerance_solution_satisfies_kkt() {
    for seed in 0..50 {
        let fx = oracles::svm_fixture(seed);
        let refs: Vec<&[f64]> = fx.xs.iter().map(|x| x.as_slice()).collect();
        let params = SvmParams { gamma: Some(fx.gamma), c_neg: fx.c_neg, ..Default::default() };
        let pos = fx.labels.iter().filter(|l| **l == Label::Positive).count();
        let (c_pos, c_neg) = params.costs(pos, fx.labels.len() - pos);
        let y: Vec<f64> = fx.labels.iter().map(|l| l.sign()).collect();
        let c: Vec<f64> = y.iter().map(|s| if *s > 0.0 { c_pos } else { c_neg }).collect();
        let k = kernel_matrix(fx.gamma, &refs);
        let sol = solve(&k, &y, &c, params.tolerance, params.max_iterations);
        let n = y.len();
        let tol = params.tolerance;
        let sum: f64 = sol.alpha.iter().zip(&y).map(|(a, s)| a * s).sum();
        assert!(sum.abs() < 1e-9);
        for i in 0..n {
            assert!(sol.alpha[i] >= 0.0 && sol.alpha[i] <= c[i]);
            let f: f64 = (0..n).map(|j| sol.alpha[j] * y[j] * k[i * n + j]).sum::<f64>() - sol.rho;
            let m = y[i] * f;
            if sol.alpha[i] == 0.0 {
                assert!(m >= 1.0 - tol, "seed {seed} point {i}: margin {m} at alpha 0");
            } else if sol.alpha[i] == c[i] {
                assert!(m <= 1.0 + tol, "seed {seed} point {i}: margin {m} at bound");
            } else {
                assert!((m - 1.0).abs() <= tol, "seed {seed} point {i}: free margin {m}");
            }
        }
    }
}

fn fv(values: Vec<f64>) -> FeatureVector {
    FeatureVector { values, point: Point3::origin(), pixel: (0, 0) }
}

#[test]
fn class_weights_prevent_all_negative_collapse() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut data = LabeledDataset::new("imbalanced");
    let positive = |rng: &mut ChaCha8Rng| vec![1.5 + rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)];
    let negative = |rng: &mut ChaCha8Rng| loop {
        let x = vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        if (x[0] - 1.5f64).hypot(x[1]) > 1.0 {
            return x;
        }
    };
    for _ in 0..5 {
        data.push(fv(positive(&mut rng)), Label::Positive);
    }
    for _ in 0..95 {
        data.push(fv(negative(&mut rng)), Label::Negative);
    }
    let params = SvmParams { gamma: Some(0.5), c_neg: 0.1, ..Default::default() };
    let model = train(&data, &params).unwrap();
    let held_out: Vec<Vec<f64>> = (0..200).map(|_| positive(&mut rng)).collect();
    let recall = held_out.iter().filter(|x| model.classify(x).unwrap() == Label::Positive).count() as f64 / 200.0;
    assert!(recall >= 0.9, "positive recall {recall}");
}

#[test]
fn default_positive_cost_is_class_ratio() {
    let (c_pos, c_neg) = SvmParams::default().costs(17, 43);
    assert_eq!(c_neg, 1.0);
    assert!((c_pos - 43.0 / 17.0).abs() < 1e-15);
    assert!((c_pos - 2.53).abs() < 0.005);
}

#[test]
fn training_is_deterministic() {
    let fx = oracles::svm_fixture(11);
    let refs: Vec<&[f64]> = fx.xs.iter().map(|x| x.as_slice()).collect();
    let params = SvmParams { gamma: Some(fx.gamma), c_neg: fx.c_neg, ..Default::default() };
    assert_eq!(train_vectors(&refs, &fx.labels, &params).unwrap(), train_vectors(&refs, &fx.labels, &params).unwrap());
}

#[test]
fn large_gamma_decouples_training_points() {
    let xs = [vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![0.5, 0.5]];
    let labels = [Label::Positive, Label::Negative, Label::Negative, Label::Positive, Label::Negative];
    let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    let model = train_vectors(&refs, &labels, &SvmParams { gamma: Some(1e4), c_neg: 10.0, ..Default::default() }).unwrap();
    for (x, l) in xs.iter().zip(&labels) {
        let s = model.support.iter().position(|s| s == x).expect("every point is a support vector");
        let alone = model.coef[s] + model.bias;
        assert!((model.decision_value(x).unwrap() - alone).abs() < 1e-9);
        assert_eq!(model.classify(x).unwrap(), *l);
    }
}

#[test]
fn symmetric_square_boundary_passes_through_centroid() {
    let xs = [vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]];
    let labels = [Label::Positive, Label::Positive, Label::Negative, Label::Negative];
    let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    let model = train_vectors(&refs, &labels, &SvmParams { gamma: Some(0.3), ..Default::default() }).unwrap();
    assert!(model.distance(&[0.0, 0.0]).unwrap() < 1e-9);
    assert_eq!(model.classify(&[0.5, 0.0]).unwrap(), Label::Positive);
}

#[test]
fn hard_margin_training_points_clear_the_margin() {
    let fx = oracles::svm_fixture(4);
    // relabel to be separable by the circle and use a large cost
    let labels: Vec<Label> = fx.xs.iter().map(|x| Label::from_success(x[0] * x[0] + x[1] * x[1] < 0.4)).collect();
    if !(labels.contains(&Label::Positive) && labels.contains(&Label::Negative)) {
        return;
    }
    let refs: Vec<&[f64]> = fx.xs.iter().map(|x| x.as_slice()).collect();
    let params = SvmParams { gamma: Some(4.0), c_neg: 1e6, tolerance: 1e-6, ..Default::default() };
    let model = train_vectors(&refs, &labels, &params).unwrap();
    for (x, l) in fx.xs.iter().zip(&labels) {
        assert!(l.sign() * model.decision_value(x).unwrap() >= 1.0 - 1e-5);
    }
}

#[test]
fn adding_a_copy_of_a_non_support_point_changes_nothing() {
    let xs: Vec<Vec<f64>> = [-3.0, -2.0, -1.0, 0.0, 1.0, 3.0, 4.0, 5.0].iter().map(|v| vec![*v]).collect();
    let labels: Vec<Label> = xs.iter().map(|x| Label::from_success(x[0] > 2.0)).collect();
    let params = SvmParams { gamma: Some(0.5), c_neg: 1e3, c_pos: Some(1e3), ..Default::default() };
    let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    let before = train_vectors(&refs, &labels, &params).unwrap();
    let spare = (0..xs.len()).find(|&i| !before.support.contains(&xs[i])).expect("some point is not a support vector");
    let mut refs2 = refs.clone();
    refs2.push(&xs[spare]);
    let mut labels2 = labels.clone();
    labels2.push(labels[spare]);
    let after = train_vectors(&refs2, &labels2, &params).unwrap();
    for t in [-3.0, 0.5, 2.0, 2.2, 5.0] {
        assert!((before.decision_value(&[t]).unwrap() - after.decision_value(&[t]).unwrap()).abs() < 1e-6);
    }
}

#[test]
fn single_class_and_non_finite_inputs_are_rejected() {
    let xs = [vec![0.0], vec![1.0]];
    let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    let err = train_vectors(&refs, &[Label::Positive, Label::Positive], &SvmParams::default()).unwrap_err();
    assert!(matches!(err, Error::SingleClass { positives: 2, negatives: 0 }));
    let bad = [vec![0.0], vec![f64::NAN]];
    let refs: Vec<&[f64]> = bad.iter().map(|x| x.as_slice()).collect();
    assert!(matches!(
        train_vectors(&refs, &[Label::Positive, Label::Negative], &SvmParams::default()),
        Err(Error::NonFinite(_))
    ));
}

fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
    let ys = xs.iter().map(|x| Label::from_success(x[0] + 0.3 * x[1] > 0.2)).collect();
    (xs, ys)
}

#[test]
fn one_cell_grid_returns_that_cell() {
    let (xs, ys) = blobs(40, 1);
    let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    let r = grid_search(&refs, &ys, &GridSpec::single(0.25, 8.0), &SvmParams::default()).unwrap();
    assert_eq!(r.best.gamma, Some(0.25));
    assert_eq!(r.best.c_neg, 8.0);
    assert_eq!(r.scores.len(), 1);
    assert!(matches!(
        grid_search(&refs, &ys, &GridSpec { gammas: vec![], c_scales: vec![1.0] }, &SvmParams::default()),
        Err(Error::EmptyGrid)
    ));
}

#[test]
fn collapsed_cell_scores_half_and_loses() {
    let (xs, ys) = blobs(60, 2);
    let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    // with a huge gamma every held-out point is far from every training
    // point, so the model predicts the sign of its bias everywhere
    let grid = GridSpec { gammas: vec![1.0, 1e6], c_scales: vec![10.0] };
    let r = grid_search(&refs, &ys, &grid, &SvmParams::default()).unwrap();
    let collapsed = r.scores.iter().find(|s| s.gamma == 1e6).unwrap();
    assert_eq!(collapsed.balanced_accuracy, 0.5);
    assert_eq!(r.best_score.gamma, 1.0);
    assert!(r.best_score.balanced_accuracy > 0.5);
    assert!(r.scores.iter().all(|s| s.balanced_accuracy <= r.best_score.balanced_accuracy));
}

#[test]
fn default_grid_has_110_cells_and_best_dominates() {
    let (xs, ys) = blobs(40, 5);
    let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    let grid = GridSpec::default();
    assert_eq!(grid.len(), 110);
    let r = grid_search(&refs, &ys, &grid, &SvmParams::default()).unwrap();
    assert_eq!(r.scores.len(), 110);
    let top = r.scores.iter().map(|s| s.balanced_accuracy).fold(0.0, f64::max);
    assert_eq!(r.best_score.balanced_accuracy, top);
    // the first maximal cell in ascending (gamma, C) order wins
    let first = r.scores.iter().find(|s| s.balanced_accuracy == top).unwrap();
    assert_eq!((first.gamma, first.c_scale), (r.best_score.gamma, r.best_score.c_scale));
}
