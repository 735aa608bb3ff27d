//! Gaussian-weighted candidate selection from a point cloud.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::scene::CloudPoint;

/// Search prior N(mean, diag(variances)) and how many points to draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerParams {
    pub mean: Point3,
    pub variances: [f64; 3],
    pub count: usize,
}

impl SamplerParams {
    pub fn new(mean: Point3, variances: [f64; 3], count: usize) -> Result<Self> {
        if variances.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidConfig("sampler variances must be > 0".into()));
        }
        if count == 0 {
            return Err(Error::InvalidConfig("candidate count must be >= 1".into()));
        }
        Ok(Self { mean, variances, count })
    }

    pub fn from_std(mean: Point3, std: [f64; 3], count: usize) -> Result<Self> {
        Self::new(mean, std.map(|s| s * s), count)
    }

    /// Unnormalized log density of the prior at `p`.
    pub fn log_weight(&self, p: &Point3) -> f64 {
        let d = p - self.mean;
        -0.5 * (0..3).map(|i| d[i] * d[i] / self.variances[i]).sum::<f64>()
    }
}

fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // open interval avoids ln(0)
    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    -(-u.ln()).ln()
}

/// Draw up to `params.count` distinct cloud indices, each pick proportional
/// to the prior density among the points not yet picked. Returned in draw
/// order. A cloud smaller than `count` yields a permutation of the cloud.
pub fn sample_candidates<R: Rng + ?Sized>(cloud: &[CloudPoint], params: &SamplerParams, rng: &mut R) -> Vec<usize> {
    // Gumbel top-k is equivalent to sequential weighted draws without replacement.
    let mut keyed: Vec<(f64, usize)> = cloud
        .iter()
        .enumerate()
        .map(|(i, cp)| (params.log_weight(&cp.point) + gumbel(rng), i))
        .collect();
    let k = params.count.min(keyed.len());
    let by_key = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if k < keyed.len() && k > 0 {
        keyed.select_nth_unstable_by(k - 1, by_key);
        keyed.truncate(k);
    }
    keyed.sort_by(by_key);
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// A single draw with replacement (the distribution each sequential pick
/// follows when nothing has been consumed yet).
pub fn draw_candidate<R: Rng + ?Sized>(cloud: &[CloudPoint], params: &SamplerParams, rng: &mut R) -> Option<usize> {
    cloud
        .iter()
        .enumerate()
        .map(|(i, cp)| (params.log_weight(&cp.point) + gumbel(rng), i))
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
        .map(|(_, i)| i)
}
