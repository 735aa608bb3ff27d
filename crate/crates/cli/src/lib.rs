//! Subcommands behind the `manip-learn` binary. Each command writes into
//! `<out>.partial` and renames it to `<out>` once every artifact is on disk.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use manip_learn::config::Scenario;
use manip_learn::device::{Behavior, DeviceKind, SimDevice};
use manip_learn::features::{project_all, raw_candidate, PatchSpec, SamplerParams};
use manip_learn::image::RgbImage;
use manip_learn::persist;
use manip_learn::scene::Observation;
use manip_learn::svm::{grid_search, GridResult, GridSpec, Label, SvmModel};
use manip_learn::trainer::{evaluate, EvalOptions, Session, SuccessTally, TrainReport, Trainer, World};
use manip_learn::views::registered_views;

/// Inputs shared by every command, echoed into the output directory.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
    pub options: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, scenario: &Path, seed: u64, out: &Path) -> Self {
        Self {
            command: command.to_owned(),
            scenario: scenario.to_owned(),
            seed,
            out: out.to_owned(),
            options: BTreeMap::new(),
        }
    }

    pub fn option(mut self, key: &str, value: impl ToString) -> Self {
        self.options.insert(key.to_owned(), value.to_string());
        self
    }
}

/// Staging directory that becomes the output directory on `commit`.
struct Staging {
    partial: PathBuf,
    target: PathBuf,
}

impl Staging {
    fn create(manifest: &RunManifest, scenario: &Scenario) -> Result<Self> {
        let target = manifest.out.clone();
        if target.exists() {
            bail!("output directory {} already exists", target.display());
        }
        let mut name = target.file_name().context("output path has no final component")?.to_owned();
        name.push(".partial");
        let partial = target.with_file_name(name);
        if partial.exists() {
            fs::remove_dir_all(&partial)?;
        }
        fs::create_dir_all(&partial).with_context(|| format!("creating {}", partial.display()))?;
        let staging = Self { partial, target };
        staging.write("manifest.toml", toml::to_string(manifest)?.as_bytes())?;
        staging.write("scenario.toml", scenario.to_toml().as_bytes())?;
        Ok(staging)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.partial.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.path(name), bytes).with_context(|| format!("writing {name}"))
    }

    fn file(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(name)).with_context(|| format!("creating {name}"))?))
    }

    fn commit(self) -> Result<PathBuf> {
        fs::rename(&self.partial, &self.target)
            .with_context(|| format!("renaming {} to {}", self.partial.display(), self.target.display()))?;
        Ok(self.target)
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::load(path).with_context(|| format!("loading scenario {}", path.display()))
}

pub fn load_session(path: &Path) -> Result<Session> {
    let f = File::open(path).with_context(|| format!("opening checkpoint {}", path.display()))?;
    persist::read_session(BufReader::new(f)).with_context(|| format!("reading checkpoint {}", path.display()))
}

/// Accepts a behavior name for the device (e.g. `drawer-open`) or
/// `forward` / `reverse`.
pub fn parse_behavior(kind: DeviceKind, name: &str) -> Result<Behavior> {
    match name {
        "forward" => return Ok(Behavior::Forward),
        "reverse" => return Ok(Behavior::Reverse),
        _ => {}
    }
    Behavior::BOTH
        .into_iter()
        .find(|b| b.name(kind) == name)
        .with_context(|| {
            format!("unknown behavior {name:?} for {}; expected {} or {}", kind.name(), Behavior::Forward.name(kind), Behavior::Reverse.name(kind))
        })
}

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub scenario: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
    /// Stop after initialization (for baseline comparisons).
    pub init_only: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub out: PathBuf,
    /// `None` if initialization failed.
    pub report: Option<TrainReport>,
    pub labels: Vec<LabelRow>,
}

impl TrainOutcome {
    pub fn converged(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.converged)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRow {
    pub action: String,
    pub positive: usize,
    pub negative: usize,
}

impl LabelRow {
    pub fn total(&self) -> usize {
        self.positive + self.negative
    }
}

/// Initialize and train, writing `session.ckpt`, `trace.txt`, `labels.csv`
/// and one dataset CSV per behavior. Initialization failure still leaves
/// the manifest and trace behind.
pub fn cmd_train(args: &TrainArgs) -> Result<TrainOutcome> {
    let scenario = load_scenario(&args.scenario)?;
    let manifest = RunManifest::new("train", &args.scenario, args.seed, &args.out).option("init_only", args.init_only);
    let staging = Staging::create(&manifest, &scenario)?;
    let kind = scenario.scene.kind;
    let mut trainer = Trainer::new(scenario, args.seed)?;
    let result = trainer.initialize().and_then(|mut session| {
        let report = if args.init_only {
            TrainReport { converged: false, visits: 0, labels: session.label_counts() }
        } else {
            trainer.train(&mut session)?
        };
        Ok((session, report))
    });

    let mut trace = staging.file("trace.txt")?;
    for e in &trainer.trace {
        writeln!(trace, "{e}")?;
    }
    trace.flush()?;
    drop(trace);

    let (session, report) = match result {
        Ok(r) => r,
        Err(e) => {
            staging.write("error.txt", format!("{e}\n").as_bytes())?;
            let out = staging.commit()?;
            return Ok(TrainOutcome { out, report: None, labels: Vec::new() });
        }
    };
    persist::write_session(staging.file("session.ckpt")?, &session)?;
    let mut labels = Vec::new();
    let mut table = csv_writer(staging.file("labels.csv")?);
    table.write_record(["action", "positive", "negative", "total"])?;
    for b in Behavior::BOTH {
        let st = session.state(b);
        let (positive, negative) = st.data.counts();
        let row = LabelRow { action: b.name(kind).to_owned(), positive, negative };
        table.write_record([row.action.clone(), positive.to_string(), negative.to_string(), row.total().to_string()])?;
        labels.push(row);
        persist::write_dataset(staging.file(&format!("{}.csv", b.name(kind)))?, &st.data)?;
    }
    table.flush()?;
    drop(table);
    let summary = format!(
        "converged = {}\nvisits = {}\nlabels = {}\n",
        report.converged,
        report.visits,
        trainer.trace.len()
    );
    staging.write("summary.toml", summary.as_bytes())?;
    let out = staging.commit()?;
    Ok(TrainOutcome { out, report: Some(report), labels })
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub scenario: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
    pub checkpoint: PathBuf,
    pub trials: usize,
    pub max_attempts: usize,
    pub noise_free: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOutcome {
    pub out: PathBuf,
    pub rows: Vec<(String, SuccessTally)>,
}

/// Execute each behavior `trials` times with retry; writes `results.csv`
/// (`action,first_try,second_try,later,failed`) and `trials.csv`.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<EvaluateOutcome> {
    let scenario = load_scenario(&args.scenario)?;
    let session = load_session(&args.checkpoint)?;
    if session.kind != scenario.scene.kind {
        bail!("checkpoint is for {} but scenario is {}", session.kind.name(), scenario.scene.kind.name());
    }
    let manifest = RunManifest::new("evaluate", &args.scenario, args.seed, &args.out)
        .option("checkpoint", args.checkpoint.display())
        .option("trials", args.trials)
        .option("max_attempts", args.max_attempts)
        .option("noise_free", args.noise_free);
    let staging = Staging::create(&manifest, &scenario)?;
    let opts = EvalOptions { trials: args.trials, max_attempts: args.max_attempts, noise_free: args.noise_free };
    let mut results = csv_writer(staging.file("results.csv")?);
    results.write_record(["action", "first_try", "second_try", "later", "failed"])?;
    let mut trials = csv_writer(staging.file("trials.csv")?);
    trials.write_record(["action", "trial", "attempts", "success"])?;
    let mut rows = Vec::new();
    for b in Behavior::BOTH {
        let name = b.name(session.kind).to_owned();
        let reports = evaluate(&scenario, &session, b, &opts, args.seed)?;
        for (t, r) in reports.iter().enumerate() {
            trials.write_record([name.clone(), t.to_string(), r.attempts.len().to_string(), r.succeeded().to_string()])?;
        }
        let tally = SuccessTally::from_reports(&reports);
        results.write_record([
            name.clone(),
            tally.first_try.to_string(),
            tally.second_try.to_string(),
            tally.later.to_string(),
            tally.failed.to_string(),
        ])?;
        rows.push((name, tally));
    }
    results.flush()?;
    trials.flush()?;
    drop((results, trials));
    Ok(EvaluateOutcome { out: staging.commit()?, rows })
}

#[derive(Debug, Clone)]
pub struct HeatmapArgs {
    pub scenario: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
    pub checkpoint: PathBuf,
    pub behavior: String,
    /// Pixel spacing of the classified grid.
    pub step: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub green_pixels: usize,
    pub inside: usize,
}

impl Overlap {
    /// Fraction of green pixels whose wall point lies in the true region.
    pub fn fraction(&self) -> f64 {
        if self.green_pixels == 0 {
            0.0
        } else {
            self.inside as f64 / self.green_pixels as f64
        }
    }
}

/// Grid cells classified positive, as a per-pixel mask.
pub fn classify_grid(model: &SvmModel, session: &Session, behavior: Behavior, obs: &Observation, scenario: &Scenario, step: u32) -> Result<Vec<bool>> {
    let st = session.state(behavior);
    let sampler = SamplerParams::from_std(st.center, scenario.learner.sampler_std, 1)?;
    let spec = PatchSpec::default();
    let (w, h) = (obs.image.width(), obs.image.height());
    let mut mask = vec![false; w * h];
    let half = step / 2;
    for (i, cp) in obs.cloud.iter().enumerate() {
        let (u, v) = cp.pixel;
        // classify within the sampler's 3-sigma support only
        if u % step != 0 || v % step != 0 || -2.0 * sampler.log_weight(&cp.point) > 9.0 {
            continue;
        }
        let fv = project_all(&st.pca, &[raw_candidate(obs, i, &spec)])?.remove(0);
        if model.classify(&fv.values)? == Label::Positive {
            for y in v.saturating_sub(half)..(v + step - half).min(h as u32) {
                for x in u.saturating_sub(half)..(u + step - half).min(w as u32) {
                    mask[y as usize * w + x as usize] = true;
                }
            }
        }
    }
    Ok(mask)
}

/// Tint masked pixels green.
pub fn render_heatmap(image: &RgbImage, mask: &[bool]) -> RgbImage {
    let mut out = image.clone();
    for v in 0..image.height() {
        for u in 0..image.width() {
            if mask[v * image.width() + u] {
                let [r, g, b] = image.pixel(u, v);
                out.put(u, v, [r / 2, g / 2 + 128, b / 2]);
            }
        }
    }
    out
}

/// Compare a mask with the simulator's ground-truth success region.
pub fn region_overlap(mask: &[bool], obs: &Observation, device: &SimDevice, behavior: Behavior) -> Overlap {
    let region = device.region(behavior);
    let w = obs.image.width();
    let mut o = Overlap { green_pixels: 0, inside: 0 };
    for (i, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        o.green_pixels += 1;
        let (u, v) = ((i % w) as f64, (i / w) as f64);
        if obs.camera.cast_to_plane(u, v, device.center().y).is_some_and(|p| region.contains(&p)) {
            o.inside += 1;
        }
    }
    o
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapOutcome {
    pub out: PathBuf,
    pub overlap: Overlap,
}

/// Classify a grid around the behavior's search center from the nominal pose
/// and write `heatmap.ppm` plus `overlap.toml`.
pub fn cmd_heatmap(args: &HeatmapArgs) -> Result<HeatmapOutcome> {
    let scenario = load_scenario(&args.scenario)?;
    let session = load_session(&args.checkpoint)?;
    let behavior = parse_behavior(session.kind, &args.behavior)?;
    if args.step == 0 {
        bail!("grid step must be >= 1");
    }
    let manifest = RunManifest::new("heatmap", &args.scenario, args.seed, &args.out)
        .option("checkpoint", args.checkpoint.display())
        .option("behavior", behavior.name(session.kind))
        .option("step", args.step);
    let staging = Staging::create(&manifest, &scenario)?;
    let mut world = World::new(scenario.clone(), args.seed)?;
    world.device.set_active(behavior == Behavior::Reverse);
    let obs = world.observe(scenario.scene.nominal_pose)?;
    let model = &session.state(behavior).model;
    let mask = classify_grid(model, &session, behavior, &obs, &scenario, args.step)?;
    render_heatmap(&obs.image, &mask).write_ppm(staging.file("heatmap.ppm")?)?;
    let overlap = region_overlap(&mask, &obs, &world.device, behavior);
    let text = format!(
        "behavior = \"{}\"\ngreen_pixels = {}\ninside_region = {}\nfraction = {}\n",
        behavior.name(session.kind),
        overlap.green_pixels,
        overlap.inside,
        overlap.fraction()
    );
    staging.write("overlap.toml", text.as_bytes())?;
    Ok(HeatmapOutcome { out: staging.commit()?, overlap })
}

#[derive(Debug, Clone)]
pub struct GridSearchArgs {
    pub scenario: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
    pub behavior: String,
    pub views: usize,
    /// Override the default grids.
    pub gammas: Option<Vec<f64>>,
    pub c_scales: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchOutcome {
    pub out: PathBuf,
    pub result: GridResult,
}

/// Search (gamma, C) on a registered multi-view set with geometric labels;
/// writes `params.toml` and `grid_scores.csv`.
pub fn cmd_gridsearch(args: &GridSearchArgs) -> Result<GridSearchOutcome> {
    let scenario = load_scenario(&args.scenario)?;
    let kind = scenario.scene.kind;
    let behavior = parse_behavior(kind, &args.behavior)?;
    if args.views < 2 {
        bail!("need at least 2 views");
    }
    let defaults = GridSpec::default();
    let grid = GridSpec {
        gammas: args.gammas.clone().unwrap_or(defaults.gammas),
        c_scales: args.c_scales.clone().unwrap_or(defaults.c_scales),
    };
    let fmt_list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let manifest = RunManifest::new("gridsearch", &args.scenario, args.seed, &args.out)
        .option("behavior", behavior.name(kind))
        .option("views", args.views)
        .option("gammas", fmt_list(&grid.gammas))
        .option("c_scales", fmt_list(&grid.c_scales));
    let staging = Staging::create(&manifest, &scenario)?;
    let set = registered_views(&scenario, behavior, args.views, args.seed)?;
    let (xs, ys) = set.pooled(0..args.views);
    let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    let result = grid_search(&refs, &ys, &grid, &scenario.learner.svm_params())?;

    let mut scores = csv_writer(staging.file("grid_scores.csv")?);
    scores.write_record(["gamma", "c_scale", "balanced_accuracy"])?;
    for s in &result.scores {
        scores.write_record([s.gamma.to_string(), s.c_scale.to_string(), s.balanced_accuracy.to_string()])?;
    }
    scores.flush()?;
    drop(scores);
    let b = &result.best_score;
    let text = format!(
        "behavior = \"{}\"\ngamma = {}\nc_scale = {}\ncost = {}\nbalanced_accuracy = {}\n",
        behavior.name(kind),
        b.gamma,
        b.c_scale,
        result.best.c_neg,
        b.balanced_accuracy
    );
    staging.write("params.toml", text.as_bytes())?;
    Ok(GridSearchOutcome { out: staging.commit()?, result })
}
