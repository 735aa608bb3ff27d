//! Candidate sampling, multi-scale patch vectors and PCA reduction.

mod patch;
mod pca;
mod sampler;

pub use patch::{extract_patch_vector, PatchSpec};
pub use pca::{fit_pca, PcaBasis};
pub use sampler::{draw_candidate, sample_candidates, SamplerParams};

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::scene::Observation;

/// Reduced appearance vector tied to the cloud point it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub point: Point3,
    pub pixel: (u32, u32),
}

/// Raw patch vector for one sampled cloud point.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCandidate {
    pub raw: Vec<f64>,
    pub point: Point3,
    pub pixel: (u32, u32),
}

/// Sample candidate points from an observation and extract their raw vectors.
pub fn extract_candidates<R: Rng + ?Sized>(
    obs: &Observation,
    params: &SamplerParams,
    spec: &PatchSpec,
    rng: &mut R,
) -> Result<Vec<RawCandidate>> {
    if obs.cloud.is_empty() {
        return Err(Error::DegeneratePool("empty point cloud".into()));
    }
    Ok(sample_candidates(&obs.cloud, params, rng)
        .into_iter()
        .map(|i| raw_candidate(obs, i, spec))
        .collect())
}

/// Raw vector for cloud point `index`.
pub fn raw_candidate(obs: &Observation, index: usize, spec: &PatchSpec) -> RawCandidate {
    let cp = obs.cloud[index];
    RawCandidate { raw: extract_patch_vector(&obs.image, cp.pixel, spec), point: cp.point, pixel: cp.pixel }
}

/// Reduce raw candidates through a fitted basis.
pub fn project_all(pca: &PcaBasis, raws: &[RawCandidate]) -> Result<Vec<FeatureVector>> {
    raws.iter()
        .map(|c| {
            let values = pca.project(&c.raw)?;
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(i));
            }
            Ok(FeatureVector { values, point: c.point, pixel: c.pixel })
        })
        .collect()
}
