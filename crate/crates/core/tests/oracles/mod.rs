//! Independent reference implementations used by the integration and
//! acceptance tests. Written for clarity rather than speed, and sharing no
//! code with the library beyond plain data types.
#![allow(dead_code)]

use manip_learn::active::{CandidatePool, Pick};
use manip_learn::geometry::Point3;
use manip_learn::image::RgbImage;
use manip_learn::svm::SvmModel;
use nalgebra::{DMatrix, SymmetricEigen};

/// Explicitly edge-padded copy of the image with `pad` pixels on each side.
pub fn pad_image(img: &RgbImage, pad: usize) -> (Vec<[u8; 3]>, usize, usize) {
    let (w, h) = (img.width(), img.height());
    let (pw, ph) = (w + 2 * pad, h + 2 * pad);
    let mut out = vec![[0u8; 3]; pw * ph];
    for y in 0..ph {
        for x in 0..pw {
            let sx = (x as i64 - pad as i64).clamp(0, w as i64 - 1) as usize;
            let sy = (y as i64 - pad as i64).clamp(0, h as i64 - 1) as usize;
            out[y * pw + x] = img.pixel(sx, sy);
        }
    }
    (out, pw, ph)
}

/// Overlap in sub-pixel units of source pixel `j` with output cell `i` when a
/// `width`-wide strip is shrunk to `target` cells. Both are put on a common
/// grid of `width * target` sub-pixels: cell i spans [i*width, (i+1)*width),
/// pixel j spans [j*target, (j+1)*target).
fn overlap(i: usize, j: usize, width: usize, target: usize) -> usize {
    let (a0, a1) = (i * width, (i + 1) * width);
    let (b0, b1) = (j * target, (j + 1) * target);
    a1.min(b1).saturating_sub(a0.max(b0))
}

/// Patch vector computed from an explicitly padded image using exact integer
/// area overlaps.
pub fn patch_oracle(padded: &(Vec<[u8; 3]>, usize, usize), pad: usize, pixel: (u32, u32), widths: &[usize], target: usize) -> Vec<f64> {
    let (data, pw, _) = padded;
    let mut out = Vec::new();
    for &width in widths {
        let half = (width - 1) / 2;
        let x0 = pixel.0 as usize + pad - half;
        let y0 = pixel.1 as usize + pad - half;
        let norm = (width * width) as f64;
        for ci in 0..target {
            for cj in 0..target {
                let mut acc = [0.0f64; 3];
                let span = |i: usize| (i * width / target)..((i + 1) * width).div_ceil(target).min(width);
                for r in span(ci) {
                    let wr = overlap(ci, r, width, target);
                    if wr == 0 {
                        continue;
                    }
                    for c in span(cj) {
                        let wc = overlap(cj, c, width, target);
                        if wc == 0 {
                            continue;
                        }
                        let px = data[(y0 + r) * pw + x0 + c];
                        let wt = (wr * wc) as f64;
                        for k in 0..3 {
                            acc[k] += wt * px[k] as f64;
                        }
                    }
                }
                for a in acc {
                    out.push(a / norm / 255.0);
                }
            }
        }
    }
    out
}

/// Principal components straight from the sample covariance (n - 1
/// convention). Returns eigenvalues descending and unit eigenvectors.
pub fn covariance_pca(xs: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let n = xs.len();
    let d = xs[0].len();
    let mean: Vec<f64> = (0..d).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for x in xs {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += (x[a] - mean[a]) * (x[b] - mean[b]);
            }
        }
    }
    cov /= (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order.iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
    (values, vectors, mean)
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d).exp()
}

/// Euclidean projection onto {0 <= a_i <= c_i, sum y_i a_i = 0} by bisection
/// on the multiplier of the equality constraint.
fn project_feasible(v: &[f64], y: &[f64], c: &[f64]) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> { v.iter().zip(y).zip(c).map(|((vi, yi), ci)| (vi - mu * yi).clamp(0.0, *ci)).collect() };
    let g = |mu: f64| -> f64 { at(mu).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    // g is non-increasing in mu
    let mut lo = -1.0;
    while g(lo) < 0.0 {
        lo *= 2.0;
    }
    let mut hi = 1.0;
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Minimum of the dual `1/2 a'Qa - e'a` found by accelerated projected
/// gradient (FISTA). Returns the optimal value and multipliers.
pub fn dual_qp_oracle(xs: &[Vec<f64>], y: &[f64], c: &[f64], gamma: f64, iterations: usize) -> (f64, Vec<f64>) {
    let n = xs.len();
    let q: Vec<f64> = (0..n * n).map(|k| y[k / n] * y[k % n] * rbf(gamma, &xs[k / n], &xs[k % n])).collect();
    // Lipschitz constant bounded by the Gershgorin radius
    let lip = (0..n).map(|i| (0..n).map(|j| q[i * n + j].abs()).sum::<f64>()).fold(0.0, f64::max).max(1e-12);
    let objective = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += 0.5 * a[i] * q[i * n + j] * a[j];
            }
            s -= a[i];
        }
        s
    };
    let grad = |a: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| q[i * n + j] * a[j]).sum::<f64>() - 1.0).collect() };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..iterations {
        let g = grad(&z);
        let step: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - gi / lip).collect();
        let next = project_feasible(&step, y, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next.iter().zip(&a).map(|(nx, ax)| nx + (t - 1.0) / t_next * (nx - ax)).collect();
        // restart when the momentum overshoots
        if objective(&next) > objective(&a) {
            z = next.clone();
            t = 1.0;
        } else {
            t = t_next;
        }
        a = next;
    }
    (objective(&a), a)
}

/// Brute-force active pick: smallest |f| among unconsumed candidates, lowest
/// index on ties, accepted only strictly inside the support-vector margin.
pub fn pick_oracle(model: &SvmModel, pool: &CandidatePool) -> Pick {
    let f = |x: &[f64]| -> f64 {
        model.support.iter().zip(&model.coef).map(|(s, c)| c * rbf(model.gamma, s, x)).sum::<f64>() + model.bias
    };
    let guard = model.support.iter().map(|s| f(s).abs()).fold(f64::INFINITY, f64::min);
    let mut dists: Vec<(usize, f64)> =
        (0..pool.instances.len()).filter(|&i| !pool.is_consumed(i)).map(|i| (i, f(&pool.instances[i].values).abs())).collect();
    dists.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    match dists.first() {
        Some(&(index, distance)) if distance < guard => Pick::Candidate { index, distance },
        _ => Pick::Converged,
    }
}

/// Argmax of an unnormalised Gaussian KDE over a dense axis-aligned lattice
/// covering the data (plus three bandwidths) with spacing `step`.
pub fn dense_grid_mode(points: &[Point3], h: [f64; 3], step: f64) -> Point3 {
    let lo: Vec<f64> = (0..3).map(|j| points.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min) - 3.0 * h[j]).collect();
    let hi: Vec<f64> = (0..3).map(|j| points.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max) + 3.0 * h[j]).collect();
    let counts: Vec<usize> = (0..3).map(|j| ((hi[j] - lo[j]) / step).ceil() as usize + 1).collect();
    let density = |x: [f64; 3]| -> f64 {
        points
            .iter()
            .map(|p| {
                let q: f64 = (0..3).map(|j| ((x[j] - p[j]) / h[j]).powi(2)).sum();
                (-0.5 * q).exp()
            })
            .sum()
    };
    let mut best = ([0.0; 3], f64::NEG_INFINITY);
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            for k in 0..counts[2] {
                let x = [lo[0] + i as f64 * step, lo[1] + j as f64 * step, lo[2] + k as f64 * step];
                let d = density(x);
                if d > best.1 {
                    best = (x, d);
                }
            }
        }
    }
    Point3::new(best.0[0], best.0[1], best.0[2])
}

/// Bias of the dual solution `a`: mean over free multipliers of
/// `y_i - sum_j a_j y_j K_ij`, or the midpoint of the feasible interval when
/// every multiplier sits at a bound.
pub fn dual_bias(xs: &[Vec<f64>], y: &[f64], c: &[f64], gamma: f64, a: &[f64]) -> f64 {
    let n = xs.len();
    let w = |i: usize| -> f64 { (0..n).map(|j| a[j] * y[j] * rbf(gamma, &xs[j], &xs[i])).sum() };
    let slack = 1e-7;
    let free: Vec<f64> = (0..n).filter(|&i| a[i] > slack * c[i] && a[i] < c[i] * (1.0 - slack)).map(|i| y[i] - w(i)).collect();
    if !free.is_empty() {
        return free.iter().sum::<f64>() / free.len() as f64;
    }
    // at a bound, y_i (w_i + b) >= 1 if a_i = 0 and <= 1 if a_i = C
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..n {
        let r = y[i] - w(i);
        let lower_side = (a[i] <= slack * c[i]) == (y[i] > 0.0);
        if lower_side {
            lo = lo.max(r);
        } else {
            hi = hi.min(r);
        }
    }
    0.5 * (lo + hi)
}

/// Decision value of a dual solution at `x`.
pub fn dual_decision(xs: &[Vec<f64>], y: &[f64], gamma: f64, a: &[f64], bias: f64, x: &[f64]) -> f64 {
    xs.iter().zip(y).zip(a).map(|((s, yi), ai)| ai * yi * rbf(gamma, s, x)).sum::<f64>() + bias
}

/// Random small two-class problem: points in the unit square, labels from a
/// circle with some flipped, and random per-class costs.
pub struct SvmFixture {
    pub xs: Vec<Vec<f64>>,
    pub labels: Vec<manip_learn::svm::Label>,
    pub gamma: f64,
    pub c_neg: f64,
}

pub fn svm_fixture(seed: u64) -> SvmFixture {
    use manip_learn::svm::Label;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(4..=30);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let labels: Vec<Label> = xs
            .iter()
            .map(|x| {
                let inside = x[0] * x[0] + x[1] * x[1] < 0.4;
                Label::from_success(inside != rng.random_bool(0.1))
            })
            .collect();
        if labels.contains(&Label::Positive) && labels.contains(&Label::Negative) {
            return SvmFixture { xs, labels, gamma: rng.random_range(0.5..8.0), c_neg: rng.random_range(0.1..20.0) };
        }
    }
}

/// Train the library model on a fixture and compare it with the QP oracle.
/// Returns (objective gap, prediction mismatches over training and probe points).
pub fn compare_with_oracle(fx: &SvmFixture, probes: &[Vec<f64>]) -> (f64, usize) {
    use manip_learn::svm::{train_vectors, Label, SvmParams};
    let params = SvmParams { gamma: Some(fx.gamma), c_neg: fx.c_neg, tolerance: 1e-10, ..Default::default() };
    let refs: Vec<&[f64]> = fx.xs.iter().map(|x| x.as_slice()).collect();
    let model = train_vectors(&refs, &fx.labels, &params).unwrap();
    let pos = fx.labels.iter().filter(|l| **l == Label::Positive).count();
    let (c_pos, c_neg) = params.costs(pos, fx.labels.len() - pos);
    let y: Vec<f64> = fx.labels.iter().map(|l| l.sign()).collect();
    let c: Vec<f64> = y.iter().map(|s| if *s > 0.0 { c_pos } else { c_neg }).collect();
    let (objective, a) = dual_qp_oracle(&fx.xs, &y, &c, fx.gamma, 20_000);
    let bias = dual_bias(&fx.xs, &y, &c, fx.gamma, &a);
    let mut mismatches = 0;
    for x in fx.xs.iter().chain(probes) {
        let want = Label::from_success(dual_decision(&fx.xs, &y, fx.gamma, &a, bias, x) > 0.0);
        if model.classify(x).unwrap() != want {
            mismatches += 1;
        }
    }
    ((model.objective - objective).abs(), mismatches)
}

/// Random RBF model and candidate pool (some consumed, some duplicated).
pub fn pick_fixture(seed: u64) -> (SvmModel, CandidatePool) {
    use manip_learn::features::FeatureVector;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(1..=4);
    let vector = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect() };
    let n_sv = rng.random_range(1..=6);
    let support: Vec<Vec<f64>> = (0..n_sv).map(|_| vector(&mut rng)).collect();
    let coef = (0..n_sv).map(|_| rng.random_range(-2.0..2.0)).collect();
    let model = SvmModel {
        gamma: rng.random_range(0.1..3.0),
        c_pos: 1.0,
        c_neg: 1.0,
        dim,
        support,
        coef,
        bias: rng.random_range(-1.0..1.0),
        objective: 0.0,
    };
    let size = rng.random_range(0..=25);
    let mut instances: Vec<FeatureVector> = Vec::with_capacity(size);
    for i in 0..size {
        let values = if i > 0 && rng.random_bool(0.15) { instances[rng.random_range(0..i)].values.clone() } else { vector(&mut rng) };
        instances.push(FeatureVector { values, point: Point3::origin(), pixel: (0, 0) });
    }
    let mut pool = CandidatePool::new(instances);
    for i in 0..size {
        if rng.random_bool(0.3) {
            pool.consume(i);
        }
    }
    (model, pool)
}

/// Gaussian clusters within a few centimetres, lying on a wall plane like the
/// cloud points they stand in for. The first cluster is the largest by at
/// least four points so the global peak is not a near tie.
pub fn kde_fixture(seed: u64) -> Vec<Point3> {
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let clusters = rng.random_range(1..=3);
    let mut points = Vec::new();
    let big = rng.random_range(10..=20);
    for k in 0..clusters {
        let c = [rng.random_range(-0.03..0.03), 1.0, 1.2 + rng.random_range(-0.03..0.03)];
        let s = rng.random_range(0.003..0.01);
        let n = if k == 0 { big } else { rng.random_range(3..=big - 4) };
        let noise = Normal::new(0.0, s).unwrap();
        for _ in 0..n {
            points.push(Point3::new(c[0] + noise.sample(&mut rng), c[1], c[2] + noise.sample(&mut rng)));
        }
    }
    points
}

/// Complementary-pair contract for one device: starting in S, executing B at
/// `p` (inside B's region) must reach G with G inside S*, and then executing
/// B* at `q` (inside B*'s region) must return to S. Points given in region
/// fractions. Also checks that executing from the wrong state or outside the
/// region leaves everything untouched.
pub fn complement_round_trip(kind: manip_learn::device::DeviceKind, b: manip_learn::device::Behavior, fp: [f64; 2], fq: [f64; 2], miss: [f64; 2]) -> Result<(), String> {
    use manip_learn::device::{DeviceConfig, SimDevice};
    let mut dev = SimDevice::new(kind, Point3::new(0.0, 1.0, 1.2), DeviceConfig::default(), 0);
    dev.set_active(b == manip_learn::device::Behavior::Reverse);
    let inside = |dev: &SimDevice, which, f: [f64; 2]| {
        let r = dev.region(which);
        Point3::new(r.min.x + f[0] * (r.max.x - r.min.x), dev.center().y, r.min.z + f[1] * (r.max.z - r.min.z))
    };
    let start = dev.is_active();
    // wrong state: the complement cannot run yet
    let q0 = inside(&dev, b.complement(), fq);
    let out = dev.execute_behavior(b.complement(), q0);
    if out.success || dev.is_active() != start || out.point != q0 {
        return Err(format!("{kind:?}: complement ran from the wrong state"));
    }
    // outside every region: far off the plate
    let off = Point3::new(0.3 + miss[0] * 0.5, dev.center().y, 1.2 + 0.3 + miss[1] * 0.5);
    let out = dev.execute_behavior(b, off);
    if out.success || dev.is_active() != start || out.point != off {
        return Err(format!("{kind:?}: failed execution mutated state"));
    }
    let p = inside(&dev, b, fp);
    let out = dev.execute_behavior(b, p);
    if !out.success || !dev.is_start_state(b.complement()) || !dev.is_goal_state(b) {
        return Err(format!("{kind:?}: {b:?} at {p:?} did not reach a state where the complement applies"));
    }
    if (out.point - (p + dev.complement_offset(b))).norm() > 1e-12 {
        return Err(format!("{kind:?}: returned point is not the offset contact point"));
    }
    let q = inside(&dev, b.complement(), fq);
    let back = dev.execute_behavior(b.complement(), q);
    if !back.success || !dev.is_start_state(b) || dev.is_active() != start {
        return Err(format!("{kind:?}: complement at {q:?} did not restore the start state"));
    }
    Ok(())
}
