//! Experiment configuration, orchestration over seeds, and run logs.
//!
//! A run of `method` on `task` writes into `<output_dir>/<task>-<method>/`:
//!
//! | file | columns |
//! |---|---|
//! | `config.toml` | the resolved configuration |
//! | `trials-seed<s>.csv` | `trial,provenance,objective,performance,v1x,v1y,v1z,...` |
//! | `summary.csv` | `seed,best_trial,provenance,objective,performance` |
//! | `aggregate.csv` | `trial,mean,std` of best-so-far performance over seeds |
//! | `timings.csv` | `seed,seconds` |
//!
//! Every file except `timings.csv` is a pure function of the configuration.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{direct_imitation, mbil_with, MbilConfig};
use crate::bo::{
    best_record, best_so_far_performance, run_random_with, run_with, BoConfig, Problem, Provenance, TrialRecord,
};
use crate::error::{Error, Result};
use crate::imagine::{Candidate, ImagineConfig};
use crate::metrics::subsample_indices;
use crate::sim::{collect_play, make_env, scripted_demo, Task, Workspace};
use crate::trajectory::{fmt_num, parse_row, Trajectory};

/// Environment variable that overrides the configured output directory in
/// the command-line tool.
pub const OUTPUT_ENV: &str = "PERIMIT_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Viptl,
    RandomBo,
    DirectImitation,
    Mbil,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Viptl, Method::RandomBo, Method::DirectImitation, Method::Mbil];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Viptl => "viptl",
            Method::RandomBo => "random-bo",
            Method::DirectImitation => "direct-imitation",
            Method::Mbil => "mbil",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

/// Waypoints per candidate when the configuration leaves it open.
pub fn default_waypoints(task: Task) -> usize {
    match task {
        Task::Stirring => 5,
        Task::Wiping | Task::Winding => 7,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub task: Task,
    pub method: Method,
    pub seeds: Vec<u64>,
    #[serde(default = "defaults::budget")]
    pub budget: usize,
    /// Per-task default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_waypoints: Option<usize>,
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    /// Seconds of play per seed.
    #[serde(default = "defaults::play_duration")]
    pub play_duration: f64,
    /// Repetitions in the scripted demonstration.
    #[serde(default = "defaults::n_rep")]
    pub n_rep: usize,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoSection {
    pub n_warm_start: usize,
    pub pool_random: usize,
    pub pool_local: usize,
    /// Meters; the warm start's `d_seg` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturb_scale: Option<f64>,
    pub refit_every: usize,
    pub n_basis: usize,
}

impl Default for BoSection {
    fn default() -> Self {
        let b = BoConfig::new(default_waypoints(Task::Wiping), 0);
        Self {
            n_warm_start: b.n_warm_start,
            pool_random: b.pool_random,
            pool_local: b.pool_local,
            perturb_scale: b.perturb_scale,
            refit_every: b.refit_every,
            n_basis: b.n_basis,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImagineSection {
    pub n_segments: usize,
    pub segment_len: usize,
    pub n_attempts: usize,
    pub top_n: usize,
}

impl Default for ImagineSection {
    fn default() -> Self {
        let c = ImagineConfig::default();
        Self {
            n_segments: c.n_segments,
            segment_len: c.segment_len,
            n_attempts: c.n_attempts,
            top_n: c.top_n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MbilSection {
    pub n_action_samples: usize,
    pub ridge: f64,
}

impl Default for MbilSection {
    fn default() -> Self {
        let c = MbilConfig::new(0, 0);
        Self {
            n_action_samples: c.n_action_samples,
            ridge: c.ridge,
        }
    }
}

mod defaults {
    use std::path::PathBuf;

    pub fn budget() -> usize {
        crate::bo::DEFAULT_BUDGET
    }
    pub fn beta() -> f64 {
        crate::gp::DEFAULT_BETA
    }
    pub fn play_duration() -> f64 {
        600.0
    }
    pub fn n_rep() -> usize {
        3
    }
    pub fn output_dir() -> PathBuf {
        PathBuf::from("runs")
    }
}

/// Sectioned TOML configuration of one experiment:
///
/// ```toml
/// [experiment]
/// task = "wiping"
/// method = "viptl"
/// seeds = [0, 1, 2]
/// budget = 50
///
/// [bo]
/// n_warm_start = 10
///
/// [imagine]
/// n_segments = 500
///
/// [mbil]
/// n_action_samples = 5000
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub bo: BoSection,
    #[serde(default)]
    pub imagine: ImagineSection,
    #[serde(default)]
    pub mbil: MbilSection,
}

impl ExperimentConfig {
    pub fn new(task: Task, method: Method, seeds: Vec<u64>) -> Self {
        Self {
            experiment: ExperimentSection {
                task,
                method,
                seeds,
                budget: defaults::budget(),
                n_waypoints: None,
                beta: defaults::beta(),
                play_duration: defaults::play_duration(),
                n_rep: defaults::n_rep(),
                output_dir: defaults::output_dir(),
            },
            bo: BoSection::default(),
            imagine: ImagineSection::default(),
            mbil: MbilSection::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            what: "config",
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse {
            what: "config",
            reason: e.to_string(),
        })
    }

    pub fn n_waypoints(&self) -> usize {
        self.experiment
            .n_waypoints
            .unwrap_or_else(|| default_waypoints(self.experiment.task))
    }

    pub fn bo_config(&self, seed: u64) -> BoConfig {
        BoConfig {
            budget: self.experiment.budget,
            n_warm_start: self.bo.n_warm_start.min(self.experiment.budget),
            beta: self.experiment.beta,
            pool_random: self.bo.pool_random,
            pool_local: self.bo.pool_local,
            perturb_scale: self.bo.perturb_scale,
            bounds: Workspace::table(),
            refit_every: self.bo.refit_every,
            n_basis: self.bo.n_basis,
            ..BoConfig::new(self.n_waypoints(), seed)
        }
    }

    pub fn imagine_config(&self, seed: u64) -> ImagineConfig {
        ImagineConfig {
            n_segments: self.imagine.n_segments,
            segment_len: self.imagine.segment_len,
            n_attempts: self.imagine.n_attempts,
            top_n: self.imagine.top_n,
            seed,
        }
    }

    pub fn mbil_config(&self, seed: u64) -> MbilConfig {
        MbilConfig {
            n_action_samples: self.mbil.n_action_samples,
            ridge: self.mbil.ridge,
            ..MbilConfig::new(self.experiment.budget, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.seeds.is_empty() {
            return Err(Error::invalid("seeds", "need at least one seed"));
        }
        if e.budget == 0 {
            return Err(Error::invalid("budget", "must be >= 1"));
        }
        if e.n_rep < 2 {
            return Err(Error::TooFewRepetitions {
                got: e.n_rep,
                needed: 2,
            });
        }
        if !(e.play_duration > 0.0 && e.play_duration.is_finite()) {
            return Err(Error::invalid("play_duration", "must be positive"));
        }
        if !(self.mbil.ridge > 0.0) {
            return Err(Error::invalid("ridge", "must be positive"));
        }
        if self.mbil.n_action_samples == 0 {
            return Err(Error::invalid("n_action_samples", "must be >= 1"));
        }
        self.bo_config(e.seeds[0]).validate()
    }

    /// Directory this configuration writes into.
    pub fn run_dir(&self) -> PathBuf {
        self.experiment
            .output_dir
            .join(format!("{}-{}", self.experiment.task, self.experiment.method))
    }
}

/// Everything one seed produced.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub seed: u64,
    pub records: Vec<TrialRecord>,
    pub seconds: f64,
}

impl RunLog {
    pub fn best(&self) -> Option<&TrialRecord> {
        best_record(&self.records)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub dir: PathBuf,
    pub logs: Vec<RunLog>,
    pub aggregate: Vec<(f64, f64)>,
}

pub fn trials_header(n_waypoints: usize) -> Vec<String> {
    let mut h: Vec<String> = ["trial", "provenance", "objective", "performance"]
        .map(String::from)
        .to_vec();
    for i in 1..=n_waypoints {
        for axis in ["x", "y", "z"] {
            h.push(format!("v{i}{axis}"));
        }
    }
    h
}

fn trial_row(r: &TrialRecord) -> Vec<String> {
    let mut row = vec![
        r.trial.to_string(),
        r.provenance.to_string(),
        fmt_num(r.objective),
        fmt_num(r.performance),
    ];
    row.extend(r.candidate.flatten().into_iter().map(fmt_num));
    row
}

/// Streams trial records to a CSV file, flushing after each row so a run
/// that dies halfway leaves its trials behind.
pub struct TrialWriter {
    path: PathBuf,
    inner: csv::Writer<BufWriter<File>>,
}

impl TrialWriter {
    pub fn create(path: &Path, n_waypoints: usize) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut inner = csv::Writer::from_writer(BufWriter::new(file));
        inner.write_record(trials_header(n_waypoints))?;
        Ok(Self {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn write(&mut self, r: &TrialRecord) -> Result<()> {
        self.inner.write_record(trial_row(r))?;
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_trials_csv<W: Write>(records: &[TrialRecord], n_waypoints: usize, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(trials_header(n_waypoints))?;
    for r in records {
        w.write_record(trial_row(r))?;
    }
    w.flush().map_err(|e| Error::io("<trials csv>", e))
}

pub fn read_trials_csv<R: std::io::Read>(reader: R) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let cols = r.headers()?.len();
    if cols < 4 || (cols - 4) % 3 != 0 {
        return Err(Error::Parse {
            what: "trials csv",
            reason: "expected trial,provenance,objective,performance,v1x,...".into(),
        });
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        if row.len() != cols {
            return Err(Error::Parse {
                what: "trials csv",
                reason: format!("row has {} fields, header has {cols}", row.len()),
            });
        }
        let trial = row[0].parse::<usize>().map_err(|e| Error::Parse {
            what: "trials csv",
            reason: e.to_string(),
        })?;
        let provenance: Provenance = row[1].parse()?;
        let mut rest = csv::StringRecord::new();
        for field in row.iter().skip(2) {
            rest.push_field(field);
        }
        let nums = parse_row(&rest, cols - 2, "trials csv")?;
        out.push(TrialRecord {
            trial,
            candidate: Candidate::from_flat(&nums[2..])?,
            objective: nums[0],
            performance: nums[1],
            provenance,
        });
    }
    Ok(out)
}

/// Mean and population standard deviation across seeds of the best-so-far
/// performance at every trial index. Shorter logs are padded with their
/// last value.
pub fn aggregate(logs: &[Vec<TrialRecord>]) -> Vec<(f64, f64)> {
    let curves: Vec<Vec<f64>> = logs.iter().map(|r| best_so_far_performance(r)).collect();
    let len = curves.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|t| {
            let vals: Vec<f64> = curves
                .iter()
                .filter(|c| !c.is_empty())
                .map(|c| c[t.min(c.len() - 1)])
                .collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .collect()
}

/// `L` evenly spaced effector positions over the first period of an
/// execution: how baselines, which have no waypoints of their own, fill the
/// candidate columns.
fn waypoints_of_execution(trajectory: &Trajectory, period_frames: f64, n_waypoints: usize) -> Result<Candidate> {
    let n = ((period_frames.round() as usize) + 1).clamp(1, trajectory.len());
    let pts = trajectory.points();
    Candidate::new(subsample_indices(n, n_waypoints).into_iter().map(|i| pts[i]).collect())
}

/// Runs one seed, handing each record to `on_trial` as it is produced.
pub fn run_seed(
    cfg: &ExperimentConfig,
    seed: u64,
    on_trial: &mut dyn FnMut(&TrialRecord) -> Result<()>,
) -> Result<Vec<TrialRecord>> {
    let e = &cfg.experiment;
    let (demo, exemplar) = scripted_demo(e.task, e.n_rep, seed)?;
    let problem = Problem::new(make_env(e.task, seed), demo, exemplar)?;
    let bo_cfg = cfg.bo_config(seed);
    let play = || collect_play(e.task, seed, e.play_duration, seed);
    match e.method {
        Method::Viptl => Ok(
            run_with(&problem, &play()?, &cfg.imagine_config(seed), &bo_cfg, on_trial)?
                .0
                .records,
        ),
        Method::RandomBo => Ok(run_random_with(&problem, &bo_cfg, on_trial)?.records),
        Method::DirectImitation => {
            let (_, exec) = direct_imitation(&play()?, &problem, bo_cfg.n_basis)?;
            let candidate = waypoints_of_execution(
                &exec.recording.trajectory,
                problem.estimate.period_frames,
                cfg.n_waypoints(),
            )?;
            let mut records = Vec::with_capacity(e.budget);
            for trial in 1..=e.budget {
                let r = TrialRecord {
                    trial,
                    candidate: candidate.clone(),
                    objective: exec.objective,
                    performance: exec.performance,
                    provenance: Provenance::Fixed,
                };
                on_trial(&r)?;
                records.push(r);
            }
            Ok(records)
        }
        Method::Mbil => {
            let mut records = Vec::with_capacity(e.budget);
            mbil_with(&play()?, &problem, &cfg.mbil_config(seed), &mut |ep| {
                let r = TrialRecord {
                    trial: records.len() + 1,
                    candidate: waypoints_of_execution(
                        &ep.recording.trajectory,
                        problem.estimate.period_frames,
                        cfg.n_waypoints(),
                    )?,
                    objective: ep.objective,
                    performance: ep.performance,
                    provenance: Provenance::Episode,
                };
                on_trial(&r)?;
                records.push(r);
                Ok(())
            })?;
            Ok(records)
        }
    }
}

/// Runs every seed (in parallel) and writes the run directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let dir = cfg.run_dir();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let config_path = dir.join("config.toml");
    fs::write(&config_path, cfg.to_toml_string()?).map_err(|e| Error::io(&config_path, e))?;

    let n_waypoints = cfg.n_waypoints();
    let logs: Vec<RunLog> = cfg
        .experiment
        .seeds
        .par_iter()
        .map(|&seed| {
            let start = Instant::now();
            let mut writer = TrialWriter::create(&dir.join(format!("trials-seed{seed}.csv")), n_waypoints)?;
            let records = run_seed(cfg, seed, &mut |r| writer.write(r))?;
            Ok(RunLog {
                seed,
                records,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<_>>()?;

    let mut summary = String::from("seed,best_trial,provenance,objective,performance\n");
    let mut timings = String::from("seed,seconds\n");
    for log in &logs {
        if let Some(b) = log.best() {
            summary.push_str(&format!(
                "{},{},{},{},{}\n",
                log.seed,
                b.trial,
                b.provenance,
                fmt_num(b.objective),
                fmt_num(b.performance)
            ));
        }
        timings.push_str(&format!("{},{:.3}\n", log.seed, log.seconds));
    }
    let agg = aggregate(&logs.iter().map(|l| l.records.clone()).collect::<Vec<_>>());
    let mut agg_text = String::from("trial,mean,std\n");
    for (i, (m, s)) in agg.iter().enumerate() {
        agg_text.push_str(&format!("{},{},{}\n", i + 1, fmt_num(*m), fmt_num(*s)));
    }
    for (name, text) in [
        ("summary.csv", summary),
        ("aggregate.csv", agg_text),
        ("timings.csv", timings),
    ] {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(ExperimentOutput {
        dir,
        logs,
        aggregate: agg,
    })
}

/// One tidy row per trial of every seed in a run directory:
/// `task,method,seed,trial,provenance,objective,performance,best_so_far`.
pub fn tidy_csv(run_dir: &Path) -> Result<String> {
    let cfg = ExperimentConfig::from_file(&run_dir.join("config.toml"))?;
    let mut out = String::from("task,method,seed,trial,provenance,objective,performance,best_so_far\n");
    for &seed in &cfg.experiment.seeds {
        let path = run_dir.join(format!("trials-seed{seed}.csv"));
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let records = read_trials_csv(std::io::BufReader::new(file))?;
        for (r, best) in records.iter().zip(best_so_far_performance(&records)) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                cfg.experiment.task,
                cfg.experiment.method,
                seed,
                r.trial,
                r.provenance,
                fmt_num(r.objective),
                fmt_num(r.performance),
                fmt_num(best)
            ));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// A quick self-check of the core invariants, for use on a fresh install.
pub fn validate_suite() -> Vec<Check> {
    let mut checks = Vec::new();
    let mut push = |name: &'static str, outcome: Result<(bool, String)>| {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, e.to_string()));
        checks.push(Check { name, passed, detail });
    };
    push("rdmp limit cycle", checks::limit_cycle());
    push("gp posterior vs dense solve", checks::gp_oracle());
    push("keypoint distance identities", checks::distance_identities());
    push("period estimation on demos", checks::period_estimation());
    push("imagined junction gaps", checks::junctions());
    push("simulation determinism", checks::sim_determinism());
    checks
}

mod checks {
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::error::Result;
    use crate::gp::{GpModel, Hyperparams};
    use crate::imagine::{warm_start, ImagineConfig};
    use crate::keypoints::KeypointVideo;
    use crate::metrics::{estimate_periods, keypoint_distance, split_single_period, DistanceConfig};
    use crate::rdmp::{default_dt, fit_from_demo, rollout, RdmpState};
    use crate::sim::Vec2;
    use crate::sim::{collect_play, scripted_demo, Task};
    use crate::trajectory::{Trajectory, Vec3};

    pub fn limit_cycle() -> Result<(bool, String)> {
        let period = 2.0;
        let n = 400;
        let pts: Vec<Vec3> = (0..n)
            .map(|i| {
                let p = std::f64::consts::TAU * i as f64 * 0.01 / period;
                Vec3::new(0.1 * p.sin() + 0.03 * (2.0 * p).cos(), 0.05 * p.cos(), 0.0)
            })
            .collect();
        let params = fit_from_demo(&Trajectory::new(0.01, pts)?, 25, period)?;
        let dt = default_dt(period);
        let traj = rollout(&params, 4, dt, &RdmpState::initial(&params))?;
        let per = (period / dt).round() as usize;
        let p = traj.points();
        let err = (2 * per..3 * per)
            .map(|i| (p[i + per] - p[i]).norm())
            .fold(0.0, f64::max);
        Ok((err < 1e-3 * 0.13, format!("max period-to-period error {err:.2e} m")))
    }

    pub fn gp_oracle() -> Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = x.iter().map(|v| v[0].sin() + v[1] * v[2]).collect();
        let model = GpModel::fit_with(&x, &y, Hyperparams::initial(3, 1.0))?;
        let h = model.hyperparams();
        let (mu, sc) = (model.input_mean(), model.input_scale());
        let norm = |v: &[f64]| -> Vec<f64> { v.iter().enumerate().map(|(i, a)| (a - mu[i]) / sc[i]).collect() };
        let k = |a: &[f64], b: &[f64]| {
            let q: f64 = a
                .iter()
                .zip(b)
                .zip(&h.length_scales)
                .map(|((p, q), l)| ((p - q) / l).powi(2))
                .sum();
            h.signal_variance * (-0.5 * q).exp()
        };
        let xs: Vec<Vec<f64>> = x.iter().map(|v| norm(v)).collect();
        let n = xs.len();
        let kmat = DMatrix::from_fn(n, n, |i, j| {
            k(&xs[i], &xs[j]) + if i == j { model.noise_variance_used() } else { 0.0 }
        });
        let inv = kmat.try_inverse().expect("invertible");
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - model.prior_mean()));
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let qs = norm(&q);
            let kv = DVector::from_iterator(n, xs.iter().map(|a| k(a, &qs)));
            let mean = model.prior_mean() + (kv.transpose() * &inv * &yc)[0];
            let var = (h.signal_variance - (kv.transpose() * &inv * &kv)[0]).max(0.0);
            let (m, s) = model.posterior(&q)?;
            worst = worst.max((m - mean).abs()).max((s - var.sqrt()).abs());
        }
        Ok((worst < 1e-6, format!("max deviation {worst:.2e}")))
    }

    pub fn distance_identities() -> Result<(bool, String)> {
        let frames: Vec<Vec<Vec2>> = (0..20)
            .map(|i| vec![Vec2::new(0.01 * i as f64, 0.3), Vec2::new(0.5, 0.2)])
            .collect();
        let a = KeypointVideo::new(0.1, frames)?;
        let b = a.map_frames(|f| f.iter().map(|p| Vec2::new(p.x + 0.1, p.y)).collect())?;
        let cfg = DistanceConfig::new(10, 2)?;
        let d0 = keypoint_distance(&a, &a, &cfg)?;
        let d1 = keypoint_distance(&a, &b, &cfg)?;
        Ok((
            d0 == 0.0 && (d1 - 0.1).abs() < 1e-12,
            format!("D(a,a) = {d0}, D(a,a+0.1) = {d1}"),
        ))
    }

    pub fn period_estimation() -> Result<(bool, String)> {
        let mut ok = 0;
        let mut total = 0;
        for task in Task::ALL {
            for n_rep in 2..=6 {
                let (video, _) = scripted_demo(task, n_rep, 0)?;
                total += 1;
                if estimate_periods(&video).map(|e| e.n_rep == n_rep).unwrap_or(false) {
                    ok += 1;
                }
            }
        }
        Ok((ok == total, format!("{ok}/{total} exact")))
    }

    pub fn junctions() -> Result<(bool, String)> {
        let play = collect_play(Task::Stirring, 0, 120.0, 0)?;
        let (demo, _) = scripted_demo(Task::Stirring, 3, 0)?;
        let single = split_single_period(&demo, &estimate_periods(&demo)?)?;
        let cfg = ImagineConfig {
            n_segments: 200,
            n_attempts: 500,
            top_n: 10,
            ..ImagineConfig::default()
        };
        let ws = warm_start(&play, &single, 5, &cfg)?;
        Ok((
            ws.junctions_valid(),
            format!("{} imagined trajectories, d_seg {:.4} m", ws.pool.len(), ws.d_seg),
        ))
    }

    pub fn sim_determinism() -> Result<(bool, String)> {
        let same = Task::ALL
            .iter()
            .all(|&t| collect_play(t, 3, 10.0, 4).ok() == collect_play(t, 3, 10.0, 4).ok());
        Ok((same, "repeat recordings identical".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(method: Method, dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(Task::Stirring, method, vec![0, 1]);
        cfg.experiment.budget = 4;
        cfg.experiment.play_duration = 60.0;
        cfg.experiment.output_dir = dir.to_path_buf();
        cfg.bo.n_warm_start = 2;
        cfg.bo.pool_random = 30;
        cfg.bo.pool_local = 30;
        cfg.imagine.n_segments = 100;
        cfg.imagine.n_attempts = 200;
        cfg.imagine.top_n = 5;
        cfg.mbil.n_action_samples = 50;
        cfg
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = ExperimentConfig::new(Task::Winding, Method::Mbil, vec![3, 4]);
        cfg.bo.perturb_scale = Some(0.02);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn sparse_config_takes_defaults() {
        let cfg =
            ExperimentConfig::from_toml_str("[experiment]\ntask = \"stirring\"\nmethod = \"random-bo\"\nseeds = [1]\n")
                .unwrap();
        assert_eq!(cfg.n_waypoints(), 5);
        assert_eq!(cfg.experiment.budget, 50);
        assert_eq!(cfg.bo, BoSection::default());
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(
            ExperimentConfig::from_toml_str("[experiment]\ntask = \"stirring\"\nmethod = \"viptl\"\nseeds = []\n")
                .is_err()
        );
        assert!(
            ExperimentConfig::from_toml_str("[experiment]\ntask = \"ironing\"\nmethod = \"viptl\"\nseeds = [0]\n")
                .is_err()
        );
        assert!(ExperimentConfig::from_toml_str(
            "[experiment]\ntask = \"stirring\"\nmethod = \"viptl\"\nseeds = [0]\nbogus = 1\n"
        )
        .is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("bo".parse::<Method>().is_err());
    }

    #[test]
    fn aggregate_is_population_mean_and_std() {
        let rec = |trial, objective, performance| TrialRecord {
            trial,
            candidate: Candidate::from_flat(&[0.0; 9]).unwrap(),
            objective,
            performance,
            provenance: Provenance::Random,
        };
        let a = vec![rec(1, -0.5, 0.2), rec(2, -0.1, 0.6)];
        let b = vec![rec(1, -0.2, 0.4), rec(2, -0.3, 0.9)];
        let agg = aggregate(&[a, b]);
        assert!((agg[0].0 - 0.3).abs() < 1e-12 && (agg[0].1 - 0.1).abs() < 1e-12);
        // second seed keeps its first trial: its objective is still the best
        assert!((agg[1].0 - 0.5).abs() < 1e-12 && (agg[1].1 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn trials_csv_round_trip() {
        let records = vec![TrialRecord {
            trial: 1,
            candidate: Candidate::from_flat(&[0.1, 0.2, 0.01, 0.3, 0.1, 0.0, 0.25, 0.05, 0.02]).unwrap(),
            objective: -0.123456789,
            performance: 0.9,
            provenance: Provenance::WarmStart,
        }];
        let mut buf = Vec::new();
        write_trials_csv(&records, 3, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("trial,provenance,objective,performance,v1x,v1y,v1z,v2x"));
        assert_eq!(read_trials_csv(&buf[..]).unwrap(), records);
    }

    #[test]
    fn every_method_writes_a_run_directory() {
        let tmp = tempfile::tempdir().unwrap();
        for method in Method::ALL {
            let cfg = tiny(method, tmp.path());
            let out = run_experiment(&cfg).unwrap();
            assert_eq!(out.aggregate.len(), 4);
            for log in &out.logs {
                assert_eq!(log.records.len(), 4);
            }
            let tidy = tidy_csv(&out.dir).unwrap();
            assert_eq!(tidy.lines().count(), 1 + 2 * 4);
        }
    }

    #[test]
    fn validate_suite_passes() {
        for c in validate_suite() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
