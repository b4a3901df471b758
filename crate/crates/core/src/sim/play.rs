use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{execute, make_env, Task, Workspace, FRAME_DT};
use crate::error::{Error, Result};
use crate::imagine::PlayDataset;
use crate::keypoints::KeypointVideo;
use crate::spline::NaturalCubic;
use crate::trajectory::{Trajectory, Vec3};

/// Time between consecutive random waypoints of the play program (seconds).
pub const PLAY_WAYPOINT_INTERVAL: f64 = 1.5;
/// The scene is reset to a freshly seeded layout this often (seconds).
pub const PLAY_EPISODE: f64 = 30.0;

/// Highest play waypoint; most of the play motion touches the objects.
pub const PLAY_MAX_HEIGHT: f64 = 0.025;

/// Box the play waypoints are drawn from: the part of the table around the
/// task's objects, from the table up to [`PLAY_MAX_HEIGHT`].
pub fn play_region(task: Task) -> Workspace {
    let (lo, hi) = match task {
        Task::Wiping => (Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.35, 0.30, 0.0)),
        Task::Winding => (Vec3::new(0.10, 0.065, 0.0), Vec3::new(0.40, 0.365, 0.0)),
        Task::Stirring => (Vec3::new(0.13, 0.095, 0.0), Vec3::new(0.37, 0.335, 0.0)),
    };
    Workspace {
        min: Vec3::new(lo.x, lo.y, 0.0),
        max: Vec3::new(hi.x, hi.y, PLAY_MAX_HEIGHT),
    }
}

fn random_program(region: &Workspace, start: Vec3, duration: f64, rng: &mut ChaCha8Rng) -> NaturalCubic {
    let n = (duration / PLAY_WAYPOINT_INTERVAL).ceil() as usize + 2;
    let mut knots = Vec::with_capacity(n);
    knots.push(start);
    for _ in 1..n {
        knots.push(Vec3::new(
            rng.random_range(region.min.x..=region.max.x),
            rng.random_range(region.min.y..=region.max.y),
            rng.random_range(region.min.z..=region.max.z),
        ));
    }
    NaturalCubic::new(&knots, PLAY_WAYPOINT_INTERVAL)
}

fn record(task: Task, env_seed: u64, n_frames: usize, seed: u64) -> Result<(Trajectory, KeypointVideo)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let region = play_region(task);
    let per_episode = (PLAY_EPISODE / FRAME_DT).round() as usize;
    let mut positions = Vec::with_capacity(n_frames);
    let mut frames = Vec::with_capacity(n_frames);
    let mut episode = 0u64;
    while positions.len() < n_frames {
        let len = per_episode.min(n_frames - positions.len());
        let env = make_env(task, env_seed.wrapping_add(episode.wrapping_mul(0x1000_0001)));
        let spline = random_program(&region, env.ee, len as f64 * FRAME_DT, &mut rng);
        let ws = env.workspace;
        let rec = execute(env, len, |t, _| ws.clamp(&spline.eval(t)))?;
        positions.extend_from_slice(rec.trajectory.points());
        frames.extend(rec.video.frames().iter().cloned());
        episode += 1;
    }
    Ok((
        Trajectory::new(FRAME_DT, positions)?,
        KeypointVideo::new(FRAME_DT, frames)?,
    ))
}

/// Task-agnostic random interaction with the task's objects, in episodes of
/// [`PLAY_EPISODE`] seconds that each start from a reset scene. The effector
/// follows a natural cubic spline through uniformly random waypoints of the
/// play region. The human stream is an independent recording in differently
/// seeded scenes driven by a differently seeded program, so nothing pairs the
/// two.
pub fn collect_play(task: Task, env_seed: u64, duration: f64, seed: u64) -> Result<PlayDataset> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid("duration", format!("must be positive, got {duration}")));
    }
    let n_frames = (duration / FRAME_DT).round().max(1.0) as usize;
    let (positions, robot_keypoints) = record(task, env_seed, n_frames, seed)?;
    let human_seed = seed ^ 0x4855_4d41_4e00;
    let (_, human_keypoints) = record(task, env_seed.wrapping_add(0x0bad_5eed), n_frames, human_seed)?;
    PlayDataset::new(positions, robot_keypoints, human_keypoints)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count_and_bounds() {
        let play = collect_play(Task::Wiping, 0, 60.0, 1).unwrap();
        assert_eq!(play.len(), 600);
        let ws = Workspace::table();
        assert!(play.robot_positions().points().iter().all(|p| ws.contains(p)));
        assert_eq!(
            play.human_keypoints().n_keypoints(),
            play.robot_keypoints().n_keypoints()
        );
        assert_ne!(play.human_keypoints().frames(), play.robot_keypoints().frames());
    }

    #[test]
    fn deterministic() {
        let a = collect_play(Task::Winding, 3, 20.0, 4).unwrap();
        let b = collect_play(Task::Winding, 3, 20.0, 4).unwrap();
        assert_eq!(a, b);
        assert!(collect_play(Task::Winding, 3, 0.0, 4).is_err());
    }
}
