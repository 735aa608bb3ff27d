//! Initialization, complementary-behavior practice, the practice-pose loop and
//! execution with retry.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;

use crate::active::{svm_pick, visit_converged, CandidatePool, ConvergenceState, Pick};
use crate::config::{LearnerConfig, Scenario};
use crate::device::{verify, Behavior, DeviceKind, SimDevice};
use crate::error::{Error, Result};
use crate::features::{
    draw_candidate, extract_candidates, fit_pca, project_all, raw_candidate, FeatureVector, PatchSpec, PcaBasis,
    RawCandidate, SamplerParams,
};
use crate::geometry::{Point3, Pose2};
use crate::kde::{kde_mode, KdeParams};
use crate::rng::{stream, substream, SimRng, Stream};
use crate::scene::{capture, generate_scene, sample_approach_pose, Observation};
use crate::svm::{self, Label, LabeledDataset, SvmModel, SvmParams};

/// Distance from the device of the stored practice poses (m).
const PRACTICE_RADIUS: f64 = 1.5;

/// Simulated environment: scenario plus the live device.
#[derive(Debug, Clone)]
pub struct World {
    pub scenario: Scenario,
    pub device: SimDevice,
}

impl World {
    pub fn new(scenario: Scenario, master: u64) -> Result<Self> {
        scenario.validate()?;
        let noise_seed: u64 = stream(master, Stream::LabelNoise).random();
        let device = SimDevice::new(scenario.scene.kind, scenario.scene.device_point(), scenario.device.clone(), noise_seed);
        // fail early on a device off the wall
        generate_scene(&scenario.scene, &device)?;
        Ok(Self { scenario, device })
    }

    pub fn observe(&self, pose: Pose2) -> Result<Observation> {
        capture(&generate_scene(&self.scenario.scene, &self.device)?, pose)
    }

    pub fn learner(&self) -> &LearnerConfig {
        &self.scenario.learner
    }

    pub fn approach_pose<R: Rng + ?Sized>(&self, rng: &mut R) -> Pose2 {
        sample_approach_pose(self.scenario.scene.nominal_pose, self.scenario.scene.noise(), rng)
    }

    /// Run one behavior on the device and label it with the configured
    /// verifier. Returns the label, the point handed to the complement and
    /// the observation afterwards.
    pub fn trial(&mut self, which: Behavior, point: Point3, pose: Pose2, before: &Observation) -> Result<(Label, Point3, Observation)> {
        let was_active = self.device.is_active();
        let outcome = self.device.execute_behavior(which, point);
        // rendering is deterministic, so an unchanged device looks the same
        let after = if self.device.is_active() != was_active { self.observe(pose)? } else { before.clone() };
        let success = verify(self.device.verifier(), before, &after, &outcome)?;
        Ok((Label::from_success(success), outcome.point, after))
    }
}

/// What produced a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init,
    Practice,
    /// Running a learned behavior to change the world state.
    Exec,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Practice => "practice",
            Phase::Exec => "exec",
        }
    }
}

/// One labeled trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub phase: Phase,
    pub pose: Option<usize>,
    pub behavior: &'static str,
    pub point: Point3,
    /// Boundary distance of the chosen candidate before labeling.
    pub distance: Option<f64>,
    pub label: Label,
    /// Unlabeled candidates left in the pool after this pick.
    pub pool: usize,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pose = self.pose.map_or("-".to_owned(), |k| k.to_string());
        let distance = self.distance.map_or("-".to_owned(), |d| format!("{d:.6}"));
        let label = if self.label == Label::Positive { "+1" } else { "-1" };
        write!(
            f,
            "{} pose={} behavior={} point={:.6},{:.6},{:.6} distance={} label={} pool={}",
            self.phase.name(),
            pose,
            self.behavior,
            self.point.x,
            self.point.y,
            self.point.z,
            distance,
            label,
            self.pool
        )
    }
}

/// Learner state for one side of the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorState {
    pub behavior: Behavior,
    pub pca: PcaBasis,
    pub data: LabeledDataset,
    pub model: SvmModel,
    /// Mean of the candidate sampler when practising from scratch.
    pub center: Point3,
    pub convergence: ConvergenceState,
}

/// Everything learned about one device.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub kind: DeviceKind,
    pub seed_point: Point3,
    pub nominal: Pose2,
    pub poses: Vec<Pose2>,
    pub behaviors: [BehaviorState; 2],
}

impl Session {
    pub fn state(&self, b: Behavior) -> &BehaviorState {
        &self.behaviors[b.index()]
    }

    pub fn state_mut(&mut self, b: Behavior) -> &mut BehaviorState {
        &mut self.behaviors[b.index()]
    }

    pub fn pose_retired(&self, k: usize) -> bool {
        self.behaviors.iter().all(|b| b.convergence.converged[k])
    }

    pub fn all_converged(&self) -> bool {
        self.behaviors.iter().all(|b| b.convergence.all_converged())
    }

    /// (positives, negatives) per behavior.
    pub fn label_counts(&self) -> [(usize, usize); 2] {
        [self.behaviors[0].data.counts(), self.behaviors[1].data.counts()]
    }
}

/// Stored room poses the robot returns from between visits.
pub fn practice_poses(nominal: Pose2, count: usize) -> Vec<Pose2> {
    let (fx, fy) = nominal.forward();
    let target = (nominal.x + fx * 0.6, nominal.y + fy * 0.6);
    (0..count)
        .map(|i| {
            let a = nominal.heading + PI + (i as f64 - (count as f64 - 1.0) / 2.0) * (PI / 2.0 / count as f64);
            let x = target.0 + PRACTICE_RADIUS * a.cos();
            let y = target.1 + PRACTICE_RADIUS * a.sin();
            Pose2::new(x, y, (target.1 - y).atan2(target.0 - x))
        })
        .collect()
}

/// One attempt made while executing a learned behavior.
#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    pub point: Point3,
    pub success: bool,
    pub retrained: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionReport {
    pub attempts: Vec<Attempt>,
}

impl ExecutionReport {
    pub fn succeeded(&self) -> bool {
        self.attempts.last().is_some_and(|a| a.success)
    }

    /// Tries used until success, or `None` if every attempt failed.
    pub fn tries_to_success(&self) -> Option<usize> {
        self.succeeded().then_some(self.attempts.len())
    }
}

/// Index of the candidate to execute: the positive-classified candidate
/// nearest the density mode of all positive candidates. `None` if nothing is
/// classified positive.
pub fn select_execution_point(model: &SvmModel, candidates: &[FeatureVector], excluded: &[bool]) -> Result<Option<usize>> {
    let mut positives = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        if !excluded.get(i).copied().unwrap_or(false) && model.classify(&c.values)? == Label::Positive {
            positives.push(i);
        }
    }
    let points: Vec<Point3> = positives.iter().map(|&i| candidates[i].point).collect();
    let Some(mode) = kde_mode(&points, &KdeParams::default()) else {
        return Ok(None);
    };
    let nearest = positives
        .iter()
        .min_by(|&&a, &&b| {
            let da = (candidates[a].point - mode).norm_squared();
            let db = (candidates[b].point - mode).norm_squared();
            da.total_cmp(&db).then(a.cmp(&b))
        })
        .copied();
    Ok(nearest)
}

/// Candidate with the largest decision value (used when nothing is positive).
fn most_confident(model: &SvmModel, candidates: &[FeatureVector], excluded: &[bool]) -> Result<Option<usize>> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        if excluded[i] {
            continue;
        }
        let f = model.decision_value(&c.values)?;
        if best.is_none_or(|(_, bf)| f > bf) {
            best = Some((i, f));
        }
    }
    Ok(best.map(|b| b.0))
}

fn choose_execution(model: &SvmModel, candidates: &[FeatureVector], excluded: &[bool]) -> Result<Option<usize>> {
    match select_execution_point(model, candidates, excluded)? {
        Some(i) => Ok(Some(i)),
        None => most_confident(model, candidates, excluded),
    }
}

/// Summary of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub converged: bool,
    pub visits: usize,
    pub labels: [(usize, usize); 2],
}

/// Drives the world through initialization and practice, recording a trace.
#[derive(Debug)]
pub struct Trainer {
    pub world: World,
    pub trace: Vec<TraceEntry>,
    master: u64,
    spec: PatchSpec,
    params: SvmParams,
    sampler: SimRng,
    visits: usize,
}

impl Trainer {
    pub fn new(scenario: Scenario, master: u64) -> Result<Self> {
        let params = scenario.learner.svm_params();
        let world = World::new(scenario, master)?;
        Ok(Self {
            world,
            trace: Vec::new(),
            master,
            spec: PatchSpec::default(),
            params,
            sampler: stream(master, Stream::Sampler),
            visits: 0,
        })
    }

    pub fn params(&self) -> &SvmParams {
        &self.params
    }

    fn sampler_params(&self, mean: Point3) -> Result<SamplerParams> {
        let l = self.world.learner();
        SamplerParams::from_std(mean, l.sampler_std, l.candidates)
    }

    fn candidates(&mut self, obs: &Observation, mean: Point3) -> Result<Vec<RawCandidate>> {
        let params = self.sampler_params(mean)?;
        extract_candidates(obs, &params, &self.spec, &mut self.sampler)
    }

    fn trial(&mut self, which: Behavior, point: Point3, pose: Pose2, before: &Observation) -> Result<(Label, Point3, Observation)> {
        self.world.trial(which, point, pose, before)
    }

    /// Collect at least one success and one failure for each behavior near
    /// the seed point, fit both PCA bases and train the first models.
    pub fn initialize(&mut self) -> Result<Session> {
        let learner = self.world.learner().clone();
        let kind = self.world.scenario.scene.kind;
        let nominal = self.world.scenario.scene.nominal_pose;
        let seed = learner.seed();
        let mut init_rng = stream(self.master, Stream::Initialization);

        let mut obs = self.world.observe(nominal)?;
        let raws = self.candidates(&obs, seed)?;
        let fwd_pca = fit_pca(&raws.iter().map(|c| c.raw.clone()).collect::<Vec<_>>(), learner.pca_dims, Behavior::Forward.name(kind))?;
        let mut pcas: [Option<PcaBasis>; 2] = [Some(fwd_pca), None];
        let mut data = [
            LabeledDataset::new(Behavior::Forward.name(kind)),
            LabeledDataset::new(Behavior::Reverse.name(kind)),
        ];
        let mut centers: [Option<Point3>; 2] = [Some(seed), None];
        let mut last_return = seed;

        let mut trials = 0;
        while !(data[0].has_both_labels() && data[1].has_both_labels()) {
            if trials >= learner.init_cap {
                return Err(Error::InitializationFailed(trials));
            }
            trials += 1;
            let which = self.world.device.applicable();
            let mean = match which {
                Behavior::Forward => seed,
                Behavior::Reverse => last_return,
            };
            let std = learner.init_std[which.index()];
            let params = SamplerParams::from_std(mean, [std; 3], 1)?;
            let idx = draw_candidate(&obs.cloud, &params, &mut init_rng)
                .ok_or_else(|| Error::DegeneratePool("empty point cloud".into()))?;
            let raw = raw_candidate(&obs, idx, &self.spec);
            let pca = pcas[which.index()].as_ref().expect("basis fitted before the behavior can run");
            let fv = project_all(pca, std::slice::from_ref(&raw))?.remove(0);
            let point = fv.point;
            let (label, returned, after) = self.trial(which, point, nominal, &obs)?;
            data[which.index()].push(fv, label);
            self.trace.push(TraceEntry {
                phase: Phase::Init,
                pose: None,
                behavior: which.name(kind),
                point,
                distance: None,
                label,
                pool: 0,
            });
            if label == Label::Positive {
                let next = which.complement();
                last_return = returned;
                if centers[next.index()].is_none() {
                    centers[next.index()] = Some(returned);
                }
                if pcas[next.index()].is_none() {
                    let raws = self.candidates(&after, returned)?;
                    let vectors: Vec<Vec<f64>> = raws.into_iter().map(|c| c.raw).collect();
                    pcas[next.index()] = Some(fit_pca(&vectors, learner.pca_dims, next.name(kind))?);
                }
            }
            obs = after;
        }

        let poses = practice_poses(nominal, learner.practice_poses);
        let [d0, d1] = data;
        let [p0, p1] = pcas;
        let make = |behavior: Behavior, data: LabeledDataset, pca: Option<PcaBasis>| -> Result<BehaviorState> {
            Ok(BehaviorState {
                behavior,
                model: svm::train(&data, &self.params)?,
                pca: pca.expect("fitted"),
                data,
                center: centers[behavior.index()].expect("set on first success"),
                convergence: ConvergenceState::new(learner.practice_poses, learner.visit_budget),
            })
        };
        let behaviors = [make(Behavior::Forward, d0, p0)?, make(Behavior::Reverse, d1, p1)?];
        Ok(Session { kind, seed_point: seed, nominal, poses, behaviors })
    }

    /// Visit practice poses round-robin until every pose has converged for
    /// both behaviors or a behavior hits the label cap.
    pub fn train(&mut self, session: &mut Session) -> Result<TrainReport> {
        let cap = self.world.learner().label_cap;
        let max_visits = session.poses.len() * cap.max(1);
        'outer: while !session.all_converged() {
            for k in 0..session.poses.len() {
                if session.pose_retired(k) {
                    continue;
                }
                if session.behaviors.iter().any(|b| b.data.len() >= cap) || self.visits >= max_visits {
                    break 'outer;
                }
                self.visit(session, k)?;
            }
        }
        Ok(TrainReport { converged: session.all_converged(), visits: self.visits, labels: session.label_counts() })
    }

    fn pool_for(&mut self, session: &Session, which: Behavior, obs: &Observation, mean: Point3) -> Result<CandidatePool> {
        let raws = self.candidates(obs, mean)?;
        Ok(CandidatePool::new(project_all(&session.state(which).pca, &raws)?))
    }

    /// One approach from practice pose `k`.
    pub fn visit(&mut self, session: &mut Session, k: usize) -> Result<()> {
        let mut pose_rng = substream(self.master, Stream::PoseNoise, self.visits as u64);
        self.visits += 1;
        let pose = self.world.approach_pose(&mut pose_rng);
        let mut obs = self.world.observe(pose)?;
        for b in &mut session.behaviors {
            b.convergence.begin_visit();
        }
        let mut reset_tried = false;
        loop {
            let which = self.world.device.applicable();
            if !session.state(which).convergence.converged[k] {
                let center = session.state(which).center;
                let mut pool = self.pool_for(session, which, &obs, center)?;
                let st = session.state_mut(which);
                if !visit_converged(&mut st.convergence, k, &pool, &st.model)? {
                    self.practice(session, which, k, pose, &mut obs, &mut pool)?;
                    return Ok(());
                }
            }
            let other = which.complement();
            if session.state(other).convergence.converged[k] || reset_tried {
                return Ok(());
            }
            // Put the device into the other behavior's start state.
            reset_tried = true;
            let center = session.state(which).center;
            let pool = self.pool_for(session, which, &obs, center)?;
            let budget = {
                let c = &session.state(which).convergence;
                c.budget - c.labels_this_visit
            };
            let attempts = budget.min(self.world.learner().max_attempts);
            let report = self.execute(session, which, Some(k), pose, &mut obs, &pool.instances, attempts, Phase::Exec)?;
            if !report.succeeded() {
                return Ok(());
            }
        }
    }

    /// Active-learning loop for the outer behavior of a visit.
    fn practice(
        &mut self,
        session: &mut Session,
        which: Behavior,
        k: usize,
        pose: Pose2,
        obs: &mut Observation,
        pool: &mut CandidatePool,
    ) -> Result<()> {
        while session.state(which).convergence.budget_left() {
            let st = session.state(which);
            let Pick::Candidate { index, distance } = svm_pick(&st.model, pool)? else {
                break;
            };
            pool.consume(index);
            let fv = pool.instances[index].clone();
            let (label, returned, after) = self.trial(which, fv.point, pose, obs)?;
            self.record(session, which, fv.clone(), label, Phase::Practice, Some(k), Some(distance), pool.remaining())?;
            *obs = after;
            if label == Label::Positive {
                self.practice_complement(session, which.complement(), k, pose, obs, returned)?;
                if self.world.device.applicable() != which {
                    // complement never succeeded: the outer behavior cannot run
                    break;
                }
            }
        }
        Ok(())
    }

    /// Practice the complement near `returned` until its first success.
    fn practice_complement(
        &mut self,
        session: &mut Session,
        which: Behavior,
        k: usize,
        pose: Pose2,
        obs: &mut Observation,
        returned: Point3,
    ) -> Result<()> {
        let mut pool = self.pool_for(session, which, obs, returned)?;
        while session.state(which).convergence.budget_left() && pool.remaining() > 0 {
            let st = session.state(which);
            let (index, distance) = match svm_pick(&st.model, &pool)? {
                Pick::Candidate { index, distance } => (index, distance),
                Pick::Converged => {
                    let excluded: Vec<bool> = (0..pool.instances.len()).map(|i| pool.is_consumed(i)).collect();
                    match choose_execution(&st.model, &pool.instances, &excluded)? {
                        Some(i) => (i, st.model.distance(&pool.instances[i].values)?),
                        None => break,
                    }
                }
            };
            pool.consume(index);
            let fv = pool.instances[index].clone();
            let (label, _, after) = self.trial(which, fv.point, pose, obs)?;
            self.record(session, which, fv, label, Phase::Practice, Some(k), Some(distance), pool.remaining())?;
            *obs = after;
            if label == Label::Positive {
                break;
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        session: &mut Session,
        which: Behavior,
        fv: FeatureVector,
        label: Label,
        phase: Phase,
        pose: Option<usize>,
        distance: Option<f64>,
        pool: usize,
    ) -> Result<()> {
        let point = fv.point;
        let st = session.state_mut(which);
        st.convergence.record_label();
        st.data.push(fv, label);
        st.model = svm::train(&st.data, &self.params)?;
        self.trace.push(TraceEntry { phase, pose, behavior: which.name(session.kind), point, distance, label, pool });
        Ok(())
    }

    /// Execute with retry during training; labels are kept and traced.
    #[allow(clippy::too_many_arguments)]
    fn execute(
        &mut self,
        session: &mut Session,
        which: Behavior,
        k: Option<usize>,
        pose: Pose2,
        obs: &mut Observation,
        candidates: &[FeatureVector],
        attempts: usize,
        phase: Phase,
    ) -> Result<ExecutionReport> {
        let kind = session.kind;
        let st = session.state_mut(which);
        let (report, labeled) =
            execute_with_retry(&mut self.world, which, &mut st.data, &mut st.model, pose, obs, candidates, attempts, &self.params)?;
        for t in labeled {
            st.convergence.record_label();
            self.trace.push(TraceEntry {
                phase,
                pose: k,
                behavior: which.name(kind),
                point: t.features.point,
                distance: Some(t.distance),
                label: t.label,
                pool: t.remaining,
            });
        }
        Ok(report)
    }
}

/// A label gathered while executing.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutedTrial {
    pub features: FeatureVector,
    pub label: Label,
    /// Boundary distance before the attempt.
    pub distance: f64,
    /// Candidates not yet attempted.
    pub remaining: usize,
}

/// Select a point, execute, and on failure append the attempt as a negative,
/// retrain and re-select from the same candidates; a success is appended as
/// a positive. Stops after `max_attempts`.
#[allow(clippy::too_many_arguments)]
pub fn execute_with_retry(
    world: &mut World,
    which: Behavior,
    data: &mut LabeledDataset,
    model: &mut SvmModel,
    pose: Pose2,
    obs: &mut Observation,
    candidates: &[FeatureVector],
    max_attempts: usize,
    params: &SvmParams,
) -> Result<(ExecutionReport, Vec<ExecutedTrial>)> {
    let mut excluded = vec![false; candidates.len()];
    let mut report = ExecutionReport { attempts: Vec::new() };
    let mut labeled = Vec::new();
    for _ in 0..max_attempts {
        let Some(index) = choose_execution(model, candidates, &excluded)? else {
            break;
        };
        excluded[index] = true;
        let fv = candidates[index].clone();
        let distance = model.distance(&fv.values)?;
        let (label, _, after) = world.trial(which, fv.point, pose, obs)?;
        *obs = after;
        data.push(fv.clone(), label);
        *model = svm::train(data, params)?;
        let success = label == Label::Positive;
        report.attempts.push(Attempt { point: fv.point, success, retrained: true });
        labeled.push(ExecutedTrial {
            features: fv,
            label,
            distance,
            remaining: excluded.iter().filter(|e| !**e).count(),
        });
        if success {
            break;
        }
    }
    Ok((report, labeled))
}

/// Per-trial evaluation options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub trials: usize,
    pub max_attempts: usize,
    /// Approach exactly at the nominal pose.
    pub noise_free: bool,
}

/// Run `trials` independent executions of `which` from noisy approaches.
/// Every trial starts from the trained models; data gathered while retrying
/// is dropped afterwards.
pub fn evaluate(scenario: &Scenario, session: &Session, which: Behavior, opts: &EvalOptions, master: u64) -> Result<Vec<ExecutionReport>> {
    let spec = PatchSpec::default();
    let params = scenario.learner.svm_params();
    let mut world = World::new(scenario.clone(), master ^ 0xe7a1)?;
    let mut reports = Vec::with_capacity(opts.trials);
    for t in 0..opts.trials {
        let mut rng = substream(master, Stream::Evaluation, (which.index() * 1_000_000 + t) as u64);
        world.device.set_active(which == Behavior::Reverse);
        let pose = if opts.noise_free { scenario.scene.nominal_pose } else { world.approach_pose(&mut rng) };
        let obs = world.observe(pose)?;
        let st = session.state(which);
        let sampler = SamplerParams::from_std(st.center, scenario.learner.sampler_std, scenario.learner.candidates)?;
        let raws = extract_candidates(&obs, &sampler, &spec, &mut rng)?;
        let candidates = project_all(&st.pca, &raws)?;
        let mut data = st.data.clone();
        let mut model = st.model.clone();
        let mut obs = obs;
        let (report, _) =
            execute_with_retry(&mut world, which, &mut data, &mut model, pose, &mut obs, &candidates, opts.max_attempts, &params)?;
        reports.push(report);
    }
    Ok(reports)
}

/// Per-behavior tally of tries until success.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SuccessTally {
    pub first_try: usize,
    pub second_try: usize,
    pub later: usize,
    pub failed: usize,
}

impl SuccessTally {
    pub fn from_reports(reports: &[ExecutionReport]) -> Self {
        let mut t = SuccessTally::default();
        for r in reports {
            match r.tries_to_success() {
                Some(1) => t.first_try += 1,
                Some(2) => t.second_try += 1,
                Some(_) => t.later += 1,
                None => t.failed += 1,
            }
        }
        t
    }

    pub fn total(&self) -> usize {
        self.first_try + self.second_try + self.later + self.failed
    }
}
