//! Registered multi-view candidate sets with labels taken from the device
//! geometry, for hyperparameter search and labeling-efficiency studies.

use crate::config::Scenario;
use crate::device::Behavior;
use crate::error::Result;
use crate::features::{extract_candidates, fit_pca, project_all, PatchSpec, PcaBasis, SamplerParams};
use crate::geometry::Point3;
use crate::rng::substream;
use crate::rng::Stream;
use crate::svm::Label;
use crate::trainer::World;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledView {
    pub features: Vec<Vec<f64>>,
    pub points: Vec<Point3>,
    pub labels: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    pub pca: PcaBasis,
    pub views: Vec<LabeledView>,
}

impl ViewSet {
    /// Concatenate the selected views.
    pub fn pooled(&self, which: impl IntoIterator<Item = usize>) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for v in which {
            xs.extend(self.views[v].features.iter().cloned());
            ys.extend(self.views[v].labels.iter().copied());
        }
        (xs, ys)
    }
}

/// Capture `count` views of the device in `which`'s start state (the first at
/// the nominal pose, the rest from noisy approaches), sample candidates around
/// the behavior's success region and label each by whether its 3D point lies
/// in that region. The PCA basis is fitted on the first view.
pub fn registered_views(scenario: &Scenario, which: Behavior, count: usize, master: u64) -> Result<ViewSet> {
    let spec = PatchSpec::default();
    let mut world = World::new(scenario.clone(), master)?;
    world.device.set_active(which == Behavior::Reverse);
    let region = world.device.region(which);
    let learner = &scenario.learner;
    let sampler = SamplerParams::from_std(region.center(), learner.sampler_std, learner.candidates)?;

    let mut raws_per_view = Vec::with_capacity(count);
    for v in 0..count {
        let mut rng = substream(master, Stream::Dataset, v as u64);
        let pose = if v == 0 { scenario.scene.nominal_pose } else { world.approach_pose(&mut rng) };
        let obs = world.observe(pose)?;
        raws_per_view.push(extract_candidates(&obs, &sampler, &spec, &mut rng)?);
    }
    let first: Vec<Vec<f64>> = raws_per_view[0].iter().map(|c| c.raw.clone()).collect();
    let pca = fit_pca(&first, learner.pca_dims, which.name(scenario.scene.kind))?;
    let views = raws_per_view
        .iter()
        .map(|raws| {
            let fvs = project_all(&pca, raws)?;
            Ok(LabeledView {
                labels: fvs.iter().map(|f| Label::from_success(region.contains(&f.point))).collect(),
                points: fvs.iter().map(|f| f.point).collect(),
                features: fvs.into_iter().map(|f| f.values).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ViewSet { pca, views })
}
