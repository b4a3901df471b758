//! Bayesian optimization of single-period waypoints, optionally warm-started
//! with imagined-trajectory candidates.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gp::{ucb, AcquisitionConfig, GpModel, Hyperparams, DEFAULT_BETA};
use crate::imagine::{warm_start, Candidate, ImagineConfig, PlayDataset, WarmStart};
use crate::keypoints::KeypointVideo;
use crate::metrics::{
    estimate_periods, keypoint_distance, performance, split_single_period, DistanceConfig, PeriodEstimate,
};
use crate::rdmp::{default_dt, from_waypoints, rollout, RdmpState, DEFAULT_N_BASIS};
use crate::sim::{execute_plan, EnvState, Recording, Workspace};
use crate::trajectory::{Trajectory, Vec3};

pub const DEFAULT_BUDGET: usize = 50;
pub const DEFAULT_WARM_START: usize = 10;
pub const DEFAULT_POOL_RANDOM: usize = 1000;
pub const DEFAULT_POOL_LOCAL: usize = 1000;
pub const DEFAULT_REFIT_EVERY: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    WarmStart,
    Random,
    AcquisitionArgmax,
    /// A baseline's fixed open-loop execution.
    Fixed,
    /// One closed-loop baseline episode.
    Episode,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::WarmStart => "warm-start",
            Provenance::Random => "random",
            Provenance::AcquisitionArgmax => "acquisition-argmax",
            Provenance::Fixed => "fixed",
            Provenance::Episode => "episode",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "warm-start" => Ok(Provenance::WarmStart),
            "random" => Ok(Provenance::Random),
            "acquisition-argmax" => Ok(Provenance::AcquisitionArgmax),
            "fixed" => Ok(Provenance::Fixed),
            "episode" => Ok(Provenance::Episode),
            other => Err(Error::Parse {
                what: "provenance",
                reason: format!("unknown tag {other:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// 1-based.
    pub trial: usize,
    pub candidate: Candidate,
    pub objective: f64,
    pub performance: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoConfig {
    pub budget: usize,
    pub n_warm_start: usize,
    pub n_waypoints: usize,
    pub beta: f64,
    pub pool_random: usize,
    pub pool_local: usize,
    /// Std of the local perturbations; `None` uses the warm start's `d_seg`.
    pub perturb_scale: Option<f64>,
    pub bounds: Workspace,
    pub refit_every: usize,
    pub n_basis: usize,
    pub seed: u64,
}

impl BoConfig {
    pub fn new(n_waypoints: usize, seed: u64) -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            n_warm_start: DEFAULT_WARM_START,
            n_waypoints,
            beta: DEFAULT_BETA,
            pool_random: DEFAULT_POOL_RANDOM,
            pool_local: DEFAULT_POOL_LOCAL,
            perturb_scale: None,
            bounds: Workspace::table(),
            refit_every: DEFAULT_REFIT_EVERY,
            n_basis: DEFAULT_N_BASIS,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::invalid("budget", "must be >= 1"));
        }
        if self.n_warm_start > self.budget {
            return Err(Error::invalid("n_warm_start", "must not exceed the budget"));
        }
        if self.n_waypoints < Candidate::MIN_WAYPOINTS {
            return Err(Error::TooFewWaypoints {
                got: self.n_waypoints,
                needed: Candidate::MIN_WAYPOINTS,
            });
        }
        if !(self.beta >= 0.0) {
            return Err(Error::invalid("beta", "must be >= 0"));
        }
        if (0..3).any(|i| !(self.bounds.max[i] > self.bounds.min[i])) {
            return Err(Error::invalid("bounds", "every side must have positive length"));
        }
        if self.refit_every == 0 {
            return Err(Error::invalid("refit_every", "must be >= 1"));
        }
        if let Some(s) = self.perturb_scale {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::invalid("perturb_scale", "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// What a trial is judged against. The exemplar is only used for the
/// performance score and never reaches the optimizer.
#[derive(Debug, Clone)]
pub struct Problem {
    pub env: EnvState,
    pub demo: KeypointVideo,
    pub estimate: PeriodEstimate,
    pub exemplar: Trajectory,
}

/// Result of running one effector plan in the environment.
#[derive(Debug, Clone)]
pub struct Execution {
    pub objective: f64,
    pub performance: f64,
    pub recording: Recording,
}

impl Problem {
    pub fn new(env: EnvState, demo: KeypointVideo, exemplar: Trajectory) -> Result<Self> {
        let estimate = estimate_periods(&demo)?;
        Ok(Self {
            env,
            demo,
            estimate,
            exemplar,
        })
    }

    pub fn period(&self) -> f64 {
        self.estimate.period_frames * self.demo.dt()
    }

    pub fn single_period(&self) -> Result<KeypointVideo> {
        split_single_period(&self.demo, &self.estimate)
    }

    pub fn distance_config(&self) -> Result<DistanceConfig> {
        DistanceConfig::for_reps(self.estimate.n_rep, self.demo.n_keypoints())
    }

    /// Plays `plan` for as many frames as the demo and scores the result.
    pub fn evaluate_plan(&self, plan: &Trajectory) -> Result<Execution> {
        let recording = execute_plan(&self.env, plan, self.demo.len())?;
        let objective = -keypoint_distance(&self.demo, &recording.video, &self.distance_config()?)?;
        let performance = performance(&self.exemplar, &recording.trajectory, self.env.workspace.l1_diagonal());
        Ok(Execution {
            objective,
            performance,
            recording,
        })
    }

    /// Plan for a candidate: the waypoint primitive rolled out for the
    /// demo's number of repetitions.
    pub fn plan(&self, candidate: &Candidate, n_basis: usize) -> Result<Trajectory> {
        let period = self.period();
        let params = from_waypoints(candidate.waypoints(), period, n_basis)?;
        rollout(
            &params,
            self.estimate.n_rep,
            default_dt(period),
            &RdmpState::initial(&params),
        )
    }

    pub fn evaluate(&self, candidate: &Candidate, n_basis: usize) -> Result<Execution> {
        self.evaluate_plan(&self.plan(candidate, n_basis)?)
    }
}

fn uniform_candidate(bounds: &Workspace, n_waypoints: usize, rng: &mut impl Rng) -> Candidate {
    let waypoints = (0..n_waypoints)
        .map(|_| {
            Vec3::new(
                rng.random_range(bounds.min.x..=bounds.max.x),
                rng.random_range(bounds.min.y..=bounds.max.y),
                rng.random_range(bounds.min.z..=bounds.max.z),
            )
        })
        .collect();
    Candidate::new(waypoints).expect("n_waypoints validated")
}

/// Acquisition pool: `pool_random` uniform candidates, then `pool_local`
/// Gaussian perturbations of uniformly chosen initial candidates (clamped to
/// the bounds), then the initial candidates themselves. Without initial
/// candidates the local part is skipped.
pub fn build_pool(initial: &[Candidate], cfg: &BoConfig, perturb_scale: f64, seed: u64) -> Vec<Candidate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = Vec::with_capacity(cfg.pool_random + cfg.pool_local + initial.len());
    for _ in 0..cfg.pool_random {
        pool.push(uniform_candidate(&cfg.bounds, cfg.n_waypoints, &mut rng));
    }
    if !initial.is_empty() {
        let noise = Normal::new(0.0, perturb_scale.max(0.0)).expect("finite scale");
        for _ in 0..cfg.pool_local {
            let src = &initial[rng.random_range(0..initial.len())];
            let waypoints = src
                .waypoints()
                .iter()
                .map(|v| {
                    let d = Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
                    cfg.bounds.clamp(&(v + d))
                })
                .collect();
            pool.push(Candidate::new(waypoints).expect("same length as source"));
        }
        pool.extend(initial.iter().cloned());
    }
    pool
}

/// Index of the pool member with the highest UCB; the lowest index wins ties.
pub fn propose(model: &GpModel, pool: &[Candidate], acq: &AcquisitionConfig) -> Result<usize> {
    if pool.is_empty() {
        return Err(Error::Empty("acquisition pool"));
    }
    let values = pool
        .par_iter()
        .map(|c| ucb(model, &c.flatten(), acq))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Log of one optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct BoRun {
    pub records: Vec<TrialRecord>,
    /// The warm start's junction threshold, when there was a warm start.
    pub d_seg: Option<f64>,
}

impl BoRun {
    /// Highest-objective record; the earliest wins ties.
    pub fn best(&self) -> Option<&TrialRecord> {
        best_record(&self.records)
    }
}

pub fn best_record(records: &[TrialRecord]) -> Option<&TrialRecord> {
    let mut best: Option<&TrialRecord> = None;
    for r in records {
        if best.is_none_or(|b| r.objective > b.objective) {
            best = Some(r);
        }
    }
    best
}

/// Performance of the best-objective trial among the first `k + 1`, for
/// every `k`.
pub fn best_so_far_performance(records: &[TrialRecord]) -> Vec<f64> {
    (1..=records.len())
        .map(|k| best_record(&records[..k]).map(|r| r.performance).unwrap_or(0.0))
        .collect()
}

/// Runs the loop. The first `n_warm_start` trials take `initial` in order
/// (topped up with uniform candidates if there are too few); every later
/// trial executes the UCB argmax over a fresh pool built around `initial`.
pub fn optimize(
    problem: &Problem,
    initial: &[Candidate],
    initial_tag: Provenance,
    perturb_scale: f64,
    cfg: &BoConfig,
) -> Result<Vec<TrialRecord>> {
    optimize_with(problem, initial, initial_tag, perturb_scale, cfg, &mut |_| Ok(()))
}

/// [`optimize`], handing every record to `on_trial` as soon as it exists.
/// An error from `on_trial` aborts the loop.
pub fn optimize_with(
    problem: &Problem,
    initial: &[Candidate],
    initial_tag: Provenance,
    perturb_scale: f64,
    cfg: &BoConfig,
    on_trial: &mut dyn FnMut(&TrialRecord) -> Result<()>,
) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    for c in initial {
        if c.len() != cfg.n_waypoints {
            return Err(Error::DimensionMismatch {
                expected: cfg.n_waypoints,
                got: c.len(),
            });
        }
    }
    let acq = AcquisitionConfig::new(cfg.beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records: Vec<TrialRecord> = Vec::with_capacity(cfg.budget);
    let mut hyper: Option<Hyperparams> = None;

    for trial in 1..=cfg.budget {
        let (candidate, provenance) = if trial <= cfg.n_warm_start || records.is_empty() {
            match initial.get(trial - 1) {
                Some(c) => (c.clone(), initial_tag),
                None => (
                    uniform_candidate(&cfg.bounds, cfg.n_waypoints, &mut rng),
                    Provenance::Random,
                ),
            }
        } else {
            let inputs: Vec<Vec<f64>> = records.iter().map(|r| r.candidate.flatten()).collect();
            let targets: Vec<f64> = records.iter().map(|r| r.objective).collect();
            let refit = hyper.is_none() || (records.len() - cfg.n_warm_start).is_multiple_of(cfg.refit_every);
            let model = match (&hyper, refit) {
                (Some(h), false) => GpModel::fit_with(&inputs, &targets, h.clone())?,
                _ => GpModel::fit(&inputs, &targets, true)?,
            };
            hyper = Some(model.hyperparams().clone());
            let pool: Vec<Candidate> = build_pool(initial, cfg, perturb_scale, cfg.seed ^ ((trial as u64) << 20))
                .into_iter()
                .filter(|c| !records.iter().any(|r| &r.candidate == c))
                .collect();
            let idx = propose(&model, &pool, &acq)?;
            (pool[idx].clone(), Provenance::AcquisitionArgmax)
        };
        let exec = problem
            .evaluate(&candidate, cfg.n_basis)
            .map_err(|e| Error::Environment {
                trial,
                reason: e.to_string(),
            })?;
        let record = TrialRecord {
            trial,
            candidate,
            objective: exec.objective,
            performance: exec.performance,
            provenance,
        };
        on_trial(&record)?;
        records.push(record);
    }
    Ok(records)
}

/// Warm-started optimization: imagined candidates from `play` seed the first
/// trials and anchor the local part of every acquisition pool.
pub fn run(
    problem: &Problem,
    play: &PlayDataset,
    imagine: &ImagineConfig,
    cfg: &BoConfig,
) -> Result<(BoRun, WarmStart)> {
    run_with(problem, play, imagine, cfg, &mut |_| Ok(()))
}

pub fn run_with(
    problem: &Problem,
    play: &PlayDataset,
    imagine: &ImagineConfig,
    cfg: &BoConfig,
    on_trial: &mut dyn FnMut(&TrialRecord) -> Result<()>,
) -> Result<(BoRun, WarmStart)> {
    let ws = warm_start(play, &problem.single_period()?, cfg.n_waypoints, imagine)?;
    let scale = cfg.perturb_scale.unwrap_or(ws.d_seg);
    let records = optimize_with(problem, &ws.candidates, Provenance::WarmStart, scale, cfg, on_trial)?;
    Ok((
        BoRun {
            records,
            d_seg: Some(ws.d_seg),
        },
        ws,
    ))
}

/// Control: uniform initial candidates and a uniform-only pool.
pub fn run_random(problem: &Problem, cfg: &BoConfig) -> Result<BoRun> {
    run_random_with(problem, cfg, &mut |_| Ok(()))
}

pub fn run_random_with(
    problem: &Problem,
    cfg: &BoConfig,
    on_trial: &mut dyn FnMut(&TrialRecord) -> Result<()>,
) -> Result<BoRun> {
    let records = optimize_with(problem, &[], Provenance::Random, 0.0, cfg, on_trial)?;
    Ok(BoRun { records, d_seg: None })
}
