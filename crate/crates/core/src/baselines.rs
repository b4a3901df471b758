//! Comparison methods that learn from the same play data: direct imitation
//! through a keypoint-to-position regressor, and model-based imitation with
//! a learned keypoint dynamics model and random-shooting control.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bo::Problem;
use crate::error::{Error, Result};
use crate::imagine::PlayDataset;
use crate::keypoints::{KeypointFrame, KeypointVideo};
use crate::metrics::{keypoint_distance, performance};
use crate::rdmp::{default_dt, fit_from_demo, rollout, RdmpState};
use crate::sim::{env_step, observe_keypoints, Recording, FRAME_DT, SPEED_CAP, SUBSTEPS};
use crate::trajectory::{Trajectory, Vec3};

pub const DEFAULT_NEIGHBORS: usize = 5;
pub const DEFAULT_ACTION_SAMPLES: usize = 5000;
pub const DEFAULT_RIDGE: f64 = 1e-3;

fn flat(frame: &KeypointFrame) -> Vec<f64> {
    frame.iter().flat_map(|k| [k.x, k.y]).collect()
}

/// Distance-weighted k-nearest-neighbor map from a keypoint frame to the
/// effector position recorded with it.
#[derive(Debug, Clone)]
pub struct KeypointRegressor {
    k: usize,
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec3>,
}

impl KeypointRegressor {
    pub fn fit(play: &PlayDataset, k: usize) -> Result<Self> {
        if play.is_empty() {
            return Err(Error::Empty("play"));
        }
        if k == 0 {
            return Err(Error::invalid("k", "must be >= 1"));
        }
        Ok(Self {
            k,
            inputs: play.robot_keypoints().frames().iter().map(flat).collect(),
            outputs: play.robot_positions().points().to_vec(),
        })
    }

    /// Inverse-distance weighted mean of the `k` nearest positions. An exact
    /// keypoint match returns the position(s) recorded with it.
    pub fn predict(&self, frame: &KeypointFrame) -> Vec3 {
        let q = flat(frame);
        let mut dist: Vec<(f64, usize)> = self
            .inputs
            .iter()
            .enumerate()
            .map(|(i, x)| (x.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i))
            .collect();
        let k = self.k.min(dist.len());
        dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut near = dist[..k].to_vec();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let exact: Vec<usize> = near.iter().filter(|(d, _)| *d == 0.0).map(|&(_, i)| i).collect();
        if !exact.is_empty() {
            return exact.iter().map(|&i| self.outputs[i]).sum::<Vec3>() / exact.len() as f64;
        }
        let (mut sum, mut wsum) = (Vec3::zeros(), 0.0);
        for (d, i) in near {
            sum += self.outputs[i] / d;
            wsum += 1.0 / d;
        }
        sum / wsum
    }
}

/// Direct imitation: each demo frame is mapped to an effector position, a
/// primitive is fitted to that sequence with the demo period, and its
/// rollout is executed. There is nothing to adapt between trials.
pub fn direct_imitation(
    play: &PlayDataset,
    problem: &Problem,
    n_basis: usize,
) -> Result<(Trajectory, crate::bo::Execution)> {
    let regressor = KeypointRegressor::fit(play, DEFAULT_NEIGHBORS)?;
    let predicted: Vec<Vec3> = problem.demo.frames().par_iter().map(|f| regressor.predict(f)).collect();
    let predicted = Trajectory::new(problem.demo.dt(), predicted)?;
    let period = problem.period();
    let params = fit_from_demo(&predicted, n_basis, period)?;
    let plan = rollout(
        &params,
        problem.estimate.n_rep,
        default_dt(period),
        &RdmpState::initial(&params),
    )?;
    let exec = problem.evaluate_plan(&plan)?;
    Ok((plan, exec))
}

/// One-step keypoint dynamics: a ridge-regularized linear map from
/// `[keypoints, action, 1]` to the next keypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointDynamicsModel {
    /// `n_out x (n_out + 3 + 1)`
    coef: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub keypoints: KeypointFrame,
    pub action: Vec3,
    pub next: KeypointFrame,
}

impl KeypointDynamicsModel {
    pub fn fit(data: &[Transition], ridge: f64) -> Result<Self> {
        let first = data.first().ok_or(Error::Empty("transitions"))?;
        let n_out = 2 * first.keypoints.len();
        let n_in = n_out + 4;
        let mut xtx = DMatrix::<f64>::identity(n_in, n_in) * ridge;
        let mut xty = DMatrix::<f64>::zeros(n_in, n_out);
        for t in data {
            if t.keypoints.len() * 2 != n_out || t.next.len() * 2 != n_out {
                return Err(Error::KeypointCountMismatch {
                    left: n_out / 2,
                    right: t.keypoints.len(),
                });
            }
            let x = DVector::from_vec(Self::features(&t.keypoints, &t.action));
            let y = DVector::from_vec(flat(&t.next));
            xtx.ger(1.0, &x, &x, 1.0);
            xty.ger(1.0, &x, &y, 1.0);
        }
        let chol = xtx.cholesky().ok_or(Error::NotPositiveDefinite { jitter: ridge })?;
        let coef = chol.solve(&xty).transpose();
        if coef.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("coefficients", "not finite"));
        }
        Ok(Self { coef })
    }

    fn features(frame: &KeypointFrame, action: &Vec3) -> Vec<f64> {
        let mut x = flat(frame);
        x.extend([action.x, action.y, action.z, 1.0]);
        x
    }

    pub fn predict(&self, frame: &KeypointFrame, action: &Vec3) -> Vec<f64> {
        (&self.coef * DVector::from_vec(Self::features(frame, action)))
            .iter()
            .copied()
            .collect()
    }

    /// Splits the prediction into the action-independent part and the
    /// per-axis action gains, so many actions can be scored cheaply.
    fn affine_in_action(&self, frame: &KeypointFrame) -> (Vec<f64>, [Vec<f64>; 3]) {
        let n_out = self.coef.nrows();
        let base = self.predict(frame, &Vec3::zeros());
        let gains = [0, 1, 2].map(|a| (0..n_out).map(|r| self.coef[(r, n_out + a)]).collect());
        (base, gains)
    }
}

/// Index of the action whose predicted next keypoints are closest (L1) to
/// `goal`; the lowest index wins ties. Also returns every sample's cost.
pub fn choose_action(
    model: &KeypointDynamicsModel,
    frame: &KeypointFrame,
    goal: &KeypointFrame,
    actions: &[Vec3],
) -> (usize, Vec<f64>) {
    let (base, gains) = model.affine_in_action(frame);
    let target = flat(goal);
    let costs: Vec<f64> = actions
        .par_iter()
        .with_min_len(256)
        .map(|a| {
            (0..base.len())
                .map(|r| (base[r] + gains[0][r] * a.x + gains[1][r] * a.y + gains[2][r] * a.z - target[r]).abs())
                .sum()
        })
        .collect();
    let mut best = 0;
    for (i, c) in costs.iter().enumerate() {
        if *c < costs[best] {
            best = i;
        }
    }
    (best, costs)
}

/// Play transitions: consecutive robot frames with the effector displacement
/// between them as the action.
pub fn play_transitions(play: &PlayDataset) -> Vec<Transition> {
    let kp = play.robot_keypoints().frames();
    let pos = play.robot_positions().points();
    (0..play.len().saturating_sub(1))
        .map(|t| Transition {
            keypoints: kp[t].clone(),
            action: pos[t + 1] - pos[t],
            next: kp[t + 1].clone(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MbilConfig {
    pub episodes: usize,
    pub n_action_samples: usize,
    pub ridge: f64,
    pub seed: u64,
}

impl MbilConfig {
    pub fn new(episodes: usize, seed: u64) -> Self {
        Self {
            episodes,
            n_action_samples: DEFAULT_ACTION_SAMPLES,
            ridge: DEFAULT_RIDGE,
            seed,
        }
    }
}

/// Largest per-axis effector displacement per frame.
pub fn action_bound() -> f64 {
    SPEED_CAP * FRAME_DT
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub objective: f64,
    pub performance: f64,
    pub recording: Recording,
    pub transitions: Vec<Transition>,
}

/// One closed-loop episode of single-step random-shooting control toward
/// the time-matched demo frame.
pub fn mbil_episode(
    problem: &Problem,
    model: &KeypointDynamicsModel,
    n_action_samples: usize,
    rng: &mut impl Rng,
) -> Result<Episode> {
    if n_action_samples == 0 {
        return Err(Error::invalid("n_action_samples", "must be >= 1"));
    }
    let n_frames = problem.demo.len();
    let bound = action_bound();
    let dt = FRAME_DT / SUBSTEPS as f64;
    let mut state = problem.env.clone();
    let mut positions = Vec::with_capacity(n_frames);
    let mut frames = Vec::with_capacity(n_frames);
    let mut transitions = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let kp = observe_keypoints(&state);
        positions.push(state.ee);
        frames.push(kp.clone());
        if t + 1 == n_frames {
            break;
        }
        let actions: Vec<Vec3> = (0..n_action_samples)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-bound..=bound),
                    rng.random_range(-bound..=bound),
                    rng.random_range(-bound..=bound),
                )
            })
            .collect();
        let (best, _) = choose_action(model, &kp, &problem.demo.frames()[t + 1], &actions);
        let before = state.ee;
        let target = before + actions[best];
        for _ in 0..SUBSTEPS {
            state = env_step(&state, &target, dt)?;
        }
        transitions.push(Transition {
            keypoints: kp,
            action: state.ee - before,
            next: observe_keypoints(&state),
        });
    }
    let recording = Recording {
        trajectory: Trajectory::new(FRAME_DT, positions)?,
        video: KeypointVideo::new(FRAME_DT, frames)?,
        final_state: state,
    };
    let objective = -keypoint_distance(&problem.demo, &recording.video, &problem.distance_config()?)?;
    let performance = performance(
        &problem.exemplar,
        &recording.trajectory,
        problem.env.workspace.l1_diagonal(),
    );
    Ok(Episode {
        objective,
        performance,
        recording,
        transitions,
    })
}

/// Model-based imitation: the dynamics model is fitted on play, then refitted
/// after every episode on play plus everything collected so far.
pub fn mbil(play: &PlayDataset, problem: &Problem, cfg: &MbilConfig) -> Result<Vec<Episode>> {
    mbil_with(play, problem, cfg, &mut |_| Ok(()))
}

/// [`mbil`], handing every episode to `on_episode` as soon as it finishes.
pub fn mbil_with(
    play: &PlayDataset,
    problem: &Problem,
    cfg: &MbilConfig,
    on_episode: &mut dyn FnMut(&Episode) -> Result<()>,
) -> Result<Vec<Episode>> {
    let mut data = play_transitions(play);
    if data.is_empty() {
        return Err(Error::Empty("play"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = KeypointDynamicsModel::fit(&data, cfg.ridge)?;
    let mut episodes = Vec::with_capacity(cfg.episodes);
    for _ in 0..cfg.episodes {
        let ep = mbil_episode(problem, &model, cfg.n_action_samples, &mut rng)?;
        data.extend(ep.transitions.iter().cloned());
        model = KeypointDynamicsModel::fit(&data, cfg.ridge)?;
        on_episode(&ep)?;
        episodes.push(ep);
    }
    Ok(episodes)
}
