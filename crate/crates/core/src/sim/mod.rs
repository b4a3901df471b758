//! Seeded planar particle environments standing in for the robot, the
//! manipulated objects and the keypoint detector.
//!
//! The effector lives in a 3D box over a 0.50 x 0.43 m table; objects live in
//! the table plane. Keypoints are read straight off designated object
//! particles and normalized by the table extent.

mod cloth;
mod demo;
mod granules;
mod play;
mod rope;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cloth::Cloth;
pub use demo::{demo_period, scripted_demo};
pub use granules::Granules;
pub use play::{collect_play, play_region, PLAY_EPISODE, PLAY_WAYPOINT_INTERVAL};
pub use rope::Rope;

use crate::error::{Error, Result};
pub use crate::keypoints::{KeypointFrame, KeypointVideo, Vec2};
use crate::trajectory::{Trajectory, Vec3};

/// Keypoints reported per frame for every task.
pub const N_KEYPOINTS: usize = 8;
/// Recording interval of every video and effector log.
pub const FRAME_DT: f64 = 0.1;
/// Control steps per recorded frame.
pub const SUBSTEPS: usize = 5;
/// Effector speed limit (m/s).
pub const SPEED_CAP: f64 = 0.5;
/// Effector height at or below which it touches the table.
pub const CONTACT_HEIGHT: f64 = 0.02;
/// Effector height at reset: just clear of the objects.
pub const HOVER_HEIGHT: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Wiping,
    Winding,
    Stirring,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Wiping, Task::Winding, Task::Stirring];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Wiping => "wiping",
            Task::Winding => "winding",
            Task::Stirring => "stirring",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wiping" => Ok(Task::Wiping),
            "winding" => Ok(Task::Winding),
            "stirring" => Ok(Task::Stirring),
            other => Err(Error::UnknownTask(other.to_string())),
        }
    }
}

/// Axis-aligned box (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Workspace {
    pub min: Vec3,
    pub max: Vec3,
}

impl Workspace {
    pub fn table() -> Self {
        Self {
            min: Vec3::zeros(),
            max: Vec3::new(0.50, 0.43, 0.05),
        }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    /// Sum of the box side lengths; the largest possible L1 position error.
    pub fn l1_diagonal(&self) -> f64 {
        self.extent().sum()
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) / 2.0
    }

    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        Vec3::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
            p.z.clamp(self.min.z, self.max.z),
        )
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - 1e-12 && p[i] <= self.max[i] + 1e-12)
    }

    pub fn contains_planar(&self, p: &Vec2) -> bool {
        p.x >= self.min.x - 1e-12 && p.x <= self.max.x + 1e-12 && p.y >= self.min.y - 1e-12 && p.y <= self.max.y + 1e-12
    }

    /// Table-plane point to normalized image coordinates.
    pub fn normalize(&self, p: &Vec2) -> Vec2 {
        let e = self.extent();
        Vec2::new((p.x - self.min.x) / e.x, (p.y - self.min.y) / e.y)
    }

    pub fn denormalize(&self, k: &Vec2) -> Vec2 {
        let e = self.extent();
        Vec2::new(self.min.x + k.x * e.x, self.min.y + k.y * e.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objects {
    Cloth(Cloth),
    Rope(Rope),
    Granules(Granules),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub task: Task,
    pub workspace: Workspace,
    pub ee: Vec3,
    pub time: f64,
    pub objects: Objects,
}

impl EnvState {
    pub fn particles(&self) -> &[Vec2] {
        match &self.objects {
            Objects::Cloth(c) => c.points(),
            Objects::Rope(r) => r.nodes(),
            Objects::Granules(g) => g.positions(),
        }
    }

    /// Inertial particle velocities. The cloth patch and the rope are
    /// kinematic, so theirs are zero.
    pub fn particle_velocities(&self) -> Vec<Vec2> {
        match &self.objects {
            Objects::Granules(g) => g.velocities().to_vec(),
            _ => vec![Vec2::zeros(); self.particles().len()],
        }
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.particle_velocities().iter().map(|v| 0.5 * v.norm_squared()).sum()
    }

    pub fn total_speed(&self) -> f64 {
        self.particle_velocities().iter().map(|v| v.norm()).sum()
    }
}

/// Canonical initial layout of a task, jittered deterministically by `seed`.
pub fn make_env(task: Task, seed: u64) -> EnvState {
    let workspace = Workspace::table();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0e4f);
    let (ee, objects) = match task {
        Task::Wiping => {
            let cloth = Cloth::at_corner(&mut rng);
            let c = cloth.center();
            (Vec3::new(c.x, c.y, HOVER_HEIGHT), Objects::Cloth(cloth))
        }
        Task::Winding => {
            let ee = rope::home_effector();
            (ee, Objects::Rope(Rope::new(&ee, &mut rng)))
        }
        Task::Stirring => (granules::home_effector(), Objects::Granules(Granules::new(&mut rng))),
    };
    EnvState {
        task,
        workspace,
        ee,
        time: 0.0,
        objects,
    }
}

/// Moves the effector toward `target` (clamped to the workspace) at no more
/// than [`SPEED_CAP`] and lets the objects respond.
pub fn env_step(state: &EnvState, target: &Vec3, dt: f64) -> Result<EnvState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    let mut next = state.clone();
    let goal = state.workspace.clamp(target);
    let delta = goal - state.ee;
    let max_move = SPEED_CAP * dt;
    let dist = delta.norm();
    next.ee = if dist > max_move {
        state.ee + delta * (max_move / dist)
    } else {
        goal
    };
    match &mut next.objects {
        Objects::Cloth(c) => c.step(&state.ee, &next.ee, &state.workspace),
        Objects::Rope(r) => r.step(&next.ee),
        Objects::Granules(g) => g.step(&state.ee, &next.ee, dt),
    }
    next.time += dt;
    Ok(next)
}

pub fn observe_keypoints(state: &EnvState) -> KeypointFrame {
    let raw: Vec<Vec2> = match &state.objects {
        Objects::Cloth(c) => c.points().to_vec(),
        Objects::Rope(r) => r.keypoint_nodes(),
        Objects::Granules(g) => g.group_centroids(N_KEYPOINTS),
    };
    raw.iter()
        .map(|p| {
            let k = state.workspace.normalize(p);
            Vec2::new(k.x.clamp(0.0, 1.0), k.y.clamp(0.0, 1.0))
        })
        .collect()
}

/// What a camera and the effector encoders saw during an execution.
#[derive(Debug, Clone)]
pub struct Recording {
    pub trajectory: Trajectory,
    pub video: KeypointVideo,
    pub final_state: EnvState,
}

/// Records `n_frames` frames. Between frames the effector is commanded
/// toward `target_at(t)` at every control step; the first frame is the
/// untouched initial state.
pub fn execute(
    mut state: EnvState,
    n_frames: usize,
    mut target_at: impl FnMut(f64, &EnvState) -> Vec3,
) -> Result<Recording> {
    if n_frames == 0 {
        return Err(Error::invalid("n_frames", "must be >= 1"));
    }
    let t0 = state.time;
    let dt = FRAME_DT / SUBSTEPS as f64;
    let mut positions = Vec::with_capacity(n_frames);
    let mut frames = Vec::with_capacity(n_frames);
    for k in 0..n_frames {
        positions.push(state.ee);
        frames.push(observe_keypoints(&state));
        if k + 1 == n_frames {
            break;
        }
        for s in 1..=SUBSTEPS {
            let t = (k as f64 + s as f64 / SUBSTEPS as f64) * FRAME_DT;
            let target = target_at(t, &state);
            state = env_step(&state, &target, dt)?;
        }
        state.time = t0 + (k + 1) as f64 * FRAME_DT;
    }
    Ok(Recording {
        trajectory: Trajectory::new(FRAME_DT, positions)?,
        video: KeypointVideo::new(FRAME_DT, frames)?,
        final_state: state,
    })
}

/// Plays a planned effector trajectory (sampled at its own time step) in a
/// fresh copy of `env`, recording `n_frames` frames.
pub fn execute_plan(env: &EnvState, plan: &Trajectory, n_frames: usize) -> Result<Recording> {
    execute(env.clone(), n_frames, |t, _| plan.sample_at(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn task_parse_round_trip() {
        for t in Task::ALL {
            assert_eq!(t.as_str().parse::<Task>().unwrap(), t);
        }
        assert!(matches!("folding".parse::<Task>(), Err(Error::UnknownTask(_))));
    }

    #[test]
    fn make_env_is_deterministic() {
        for t in Task::ALL {
            assert_eq!(make_env(t, 9), make_env(t, 9));
        }
    }

    #[test]
    fn initial_keypoints_are_normalized() {
        for t in Task::ALL {
            for seed in 0..5 {
                let kp = observe_keypoints(&make_env(t, seed));
                assert_eq!(kp.len(), N_KEYPOINTS);
                assert!(kp
                    .iter()
                    .all(|k| (0.0..=1.0).contains(&k.x) && (0.0..=1.0).contains(&k.y)));
            }
        }
    }

    #[test]
    fn normalization_examples() {
        let ws = Workspace::table();
        assert_eq!(ws.normalize(&Vec2::new(0.0, 0.0)), Vec2::new(0.0, 0.0));
        let c = ws.center();
        let k = ws.normalize(&Vec2::new(c.x, c.y));
        assert!((k - Vec2::new(0.5, 0.5)).norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let p = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            assert!((ws.denormalize(&ws.normalize(&p)) - p).norm() < 1e-9);
        }
    }

    #[test]
    fn effector_speed_is_capped_and_clamped() {
        let env = make_env(Task::Wiping, 0);
        let next = env_step(&env, &Vec3::new(10.0, 10.0, 10.0), 0.02).unwrap();
        assert!((next.ee - env.ee).norm() <= SPEED_CAP * 0.02 + 1e-12);
        let mut s = env.clone();
        for _ in 0..200 {
            s = env_step(&s, &Vec3::new(10.0, -3.0, 1.0), 0.02).unwrap();
        }
        assert_eq!(s.ee, Vec3::new(0.5, 0.0, 0.05));
        assert!(env_step(&env, &env.ee, 0.0).is_err());
    }

    #[test]
    fn random_motion_keeps_invariants() {
        for task in Task::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let mut s = make_env(task, 4);
            for _ in 0..300 {
                let target = Vec3::new(
                    rng.random_range(-0.1..0.6),
                    rng.random_range(-0.1..0.5),
                    rng.random_range(-0.02..0.07),
                );
                s = env_step(&s, &target, 0.02).unwrap();
                assert!(s.workspace.contains(&s.ee));
                assert!(s.particles().iter().all(|p| s.workspace.contains_planar(p)), "{task}");
                assert!(observe_keypoints(&s)
                    .iter()
                    .all(|k| (0.0..=1.0).contains(&k.x) && (0.0..=1.0).contains(&k.y)));
            }
        }
    }

    #[test]
    fn stationary_effector_dissipates() {
        for task in Task::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let mut s = make_env(task, 8);
            for _ in 0..150 {
                let target = s.ee + Vec3::new(rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02), 0.0);
                s = env_step(&s, &target, 0.02).unwrap();
            }
            let mut energy = s.kinetic_energy();
            let mut speed = s.total_speed();
            for _ in 0..200 {
                let ee = s.ee;
                s = env_step(&s, &ee, 0.02).unwrap();
                assert!(s.kinetic_energy() <= energy + 1e-15);
                assert!(s.total_speed() <= speed + 1e-15);
                energy = s.kinetic_energy();
                speed = s.total_speed();
            }
        }
    }

    #[test]
    fn execute_records_requested_frames() {
        let env = make_env(Task::Stirring, 2);
        let rec = execute(env.clone(), 7, |_, s| s.ee).unwrap();
        assert_eq!(rec.trajectory.len(), 7);
        assert_eq!(rec.video.len(), 7);
        assert_eq!(rec.trajectory.points()[0], env.ee);
        assert!((rec.final_state.time - 0.6).abs() < 1e-12);
    }
}
