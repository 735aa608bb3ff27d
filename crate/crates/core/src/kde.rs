//! Gaussian kernel density mode over 3D points.

use crate::geometry::Point3;

/// Smallest bandwidth per axis (m).
pub const MIN_BANDWIDTH: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeParams {
    /// Per-axis bandwidth; `None` uses Scott's rule.
    pub bandwidth: Option<[f64; 3]>,
    /// Hill-climbing lattice step (m).
    pub grid_step: f64,
    /// Number of highest-density sample points used as climb seeds.
    pub seeds: usize,
}

impl Default for KdeParams {
    fn default() -> Self {
        Self { bandwidth: None, grid_step: 0.005, seeds: 8 }
    }
}

/// Scott's rule `sigma_j * n^(-1/7)` per axis, floored at 1 mm.
pub fn scott_bandwidth(points: &[Point3]) -> [f64; 3] {
    let n = points.len() as f64;
    let factor = n.powf(-1.0 / 7.0);
    let mut h = [MIN_BANDWIDTH; 3];
    if points.len() < 2 {
        return h;
    }
    for (j, hj) in h.iter_mut().enumerate() {
        let mean = points.iter().map(|p| p[j]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        *hj = (var.sqrt() * factor).max(MIN_BANDWIDTH);
    }
    h
}

/// Unnormalised density `sum_i exp(-|(x - p_i) / h|^2 / 2)`.
pub fn kde_density(points: &[Point3], h: &[f64; 3], x: &Point3) -> f64 {
    points
        .iter()
        .map(|p| {
            let q: f64 = (0..3).map(|j| ((x[j] - p[j]) / h[j]).powi(2)).sum();
            (-0.5 * q).exp()
        })
        .sum()
}

/// Location of the highest density peak, or `None` for no points.
///
/// Seeds from the densest sample points, climbs the 26-neighbourhood of a
/// `grid_step` lattice, then polishes each result with mean-shift.
pub fn kde_mode(points: &[Point3], params: &KdeParams) -> Option<Point3> {
    match points.len() {
        0 => return None,
        1 => return Some(points[0]),
        _ => {}
    }
    let h = params.bandwidth.unwrap_or_else(|| scott_bandwidth(points));
    let mut order: Vec<(usize, f64)> = points.iter().enumerate().map(|(i, p)| (i, kde_density(points, &h, p))).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut best: Option<(Point3, f64)> = None;
    for &(i, _) in order.iter().take(params.seeds.max(1)) {
        let climbed = grid_climb(points, &h, points[i], params.grid_step);
        let refined = mean_shift(points, &h, climbed);
        let d = kde_density(points, &h, &refined);
        if best.is_none_or(|(_, bd)| d > bd) {
            best = Some((refined, d));
        }
    }
    best.map(|b| b.0)
}

fn grid_climb(points: &[Point3], h: &[f64; 3], start: Point3, step: f64) -> Point3 {
    let mut x = start;
    let mut fx = kde_density(points, h, &x);
    for _ in 0..10_000 {
        let mut next = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let cand = Point3::new(x.x + dx as f64 * step, x.y + dy as f64 * step, x.z + dz as f64 * step);
                    let f = kde_density(points, h, &cand);
                    if f > next.map_or(fx, |(_, nf)| nf) {
                        next = Some((cand, f));
                    }
                }
            }
        }
        match next {
            Some((p, f)) => {
                x = p;
                fx = f;
            }
            None => break,
        }
    }
    x
}

fn mean_shift(points: &[Point3], h: &[f64; 3], start: Point3) -> Point3 {
    let mut x = start;
    for _ in 0..10_000 {
        let mut acc = [0.0; 3];
        let mut total = 0.0;
        for p in points {
            let q: f64 = (0..3).map(|j| ((x[j] - p[j]) / h[j]).powi(2)).sum();
            let w = (-0.5 * q).exp();
            total += w;
            for j in 0..3 {
                acc[j] += w * p[j];
            }
        }
        if !(total > 0.0) {
            break;
        }
        let next = Point3::new(acc[0] / total, acc[1] / total, acc[2] / total);
        let moved = (next - x).norm();
        x = next;
        if moved < 1e-9 {
            break;
        }
    }
    x
}
