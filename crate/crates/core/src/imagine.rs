//! Warm-start candidates from play data: random play segments are stitched
//! into imagined single-period trajectories, scored against the demo by
//! keypoint distance, and the best are turned into waypoint candidates.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::keypoints::{KeypointFrame, KeypointVideo};
use crate::metrics::{keypoint_distance, subsample_indices, DistanceConfig, FRAMES_PER_REP};
use crate::trajectory::{Trajectory, Vec3};

pub const DEFAULT_SEGMENT_LEN: usize = 10;
pub const DEFAULT_N_SEGMENTS: usize = 500;
pub const DEFAULT_N_ATTEMPTS: usize = 5000;
pub const DEFAULT_TOP_N: usize = 100;
/// `d_seg` as a fraction of the largest segment displacement.
pub const D_SEG_FRACTION: f64 = 1.0 / 6.0;

const POSITIONS_FILE: &str = "robot_positions.csv";
const ROBOT_KEYPOINTS_FILE: &str = "robot_keypoints.csv";
const HUMAN_KEYPOINTS_FILE: &str = "human_keypoints.csv";

/// Unlabeled play: a robot stream with effector positions and aligned
/// keypoints, and an unpaired human stream of keypoints only.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayDataset {
    robot_positions: Trajectory,
    robot_keypoints: KeypointVideo,
    human_keypoints: KeypointVideo,
}

impl PlayDataset {
    pub fn new(
        robot_positions: Trajectory,
        robot_keypoints: KeypointVideo,
        human_keypoints: KeypointVideo,
    ) -> Result<Self> {
        if robot_positions.len() != robot_keypoints.len() {
            return Err(Error::DimensionMismatch {
                expected: robot_positions.len(),
                got: robot_keypoints.len(),
            });
        }
        if !human_keypoints.is_empty() && human_keypoints.n_keypoints() != robot_keypoints.n_keypoints() {
            return Err(Error::KeypointCountMismatch {
                left: robot_keypoints.n_keypoints(),
                right: human_keypoints.n_keypoints(),
            });
        }
        if (robot_positions.dt() - robot_keypoints.dt()).abs() > 1e-12 {
            return Err(Error::invalid("dt", "positions and keypoints must share a time step"));
        }
        Ok(Self {
            robot_positions,
            robot_keypoints,
            human_keypoints,
        })
    }

    pub fn dt(&self) -> f64 {
        self.robot_positions.dt()
    }

    /// Robot frames.
    pub fn len(&self) -> usize {
        self.robot_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.robot_positions.is_empty()
    }

    pub fn robot_positions(&self) -> &Trajectory {
        &self.robot_positions
    }

    pub fn robot_keypoints(&self) -> &KeypointVideo {
        &self.robot_keypoints
    }

    pub fn human_keypoints(&self) -> &KeypointVideo {
        &self.human_keypoints
    }

    /// Writes `robot_positions.csv`, `robot_keypoints.csv` and
    /// `human_keypoints.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| {
            let path = dir.join(name);
            File::create(&path).map_err(|e| Error::io(path, e))
        };
        self.robot_positions.write_csv(create(POSITIONS_FILE)?)?;
        self.robot_keypoints.write_csv(create(ROBOT_KEYPOINTS_FILE)?)?;
        self.human_keypoints.write_csv(create(HUMAN_KEYPOINTS_FILE)?)?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let open = |name: &str| {
            let path = dir.join(name);
            File::open(&path).map(BufReader::new).map_err(|e| Error::io(path, e))
        };
        Self::new(
            Trajectory::read_csv(open(POSITIONS_FILE)?)?,
            KeypointVideo::read_csv(open(ROBOT_KEYPOINTS_FILE)?)?,
            KeypointVideo::read_csv(open(HUMAN_KEYPOINTS_FILE)?)?,
        )
    }
}

/// A contiguous window of robot play.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub dt: f64,
    pub positions: Vec<Vec3>,
    pub keypoints: Vec<KeypointFrame>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn first(&self) -> Vec3 {
        self.positions[0]
    }

    pub fn last(&self) -> Vec3 {
        self.positions[self.positions.len() - 1]
    }

    pub fn displacement(&self) -> f64 {
        (self.last() - self.first()).norm()
    }
}

/// Segments stitched end to start, with their stitched streams and score.
#[derive(Debug, Clone, PartialEq)]
pub struct ImaginedTrajectory {
    pub segment_ids: Vec<usize>,
    pub positions: Vec<Vec3>,
    pub keypoints: KeypointVideo,
    pub score: f64,
}

impl ImaginedTrajectory {
    /// Raw position gap at every junction, measured on the source segments.
    pub fn junction_gaps(&self, segments: &[Segment]) -> Vec<f64> {
        self.segment_ids
            .windows(2)
            .map(|w| (segments[w[1]].first() - segments[w[0]].last()).norm())
            .collect()
    }
}

/// A point in the search space: `L` effector waypoints spanning one period.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    waypoints: Vec<Vec3>,
}

impl Candidate {
    pub const MIN_WAYPOINTS: usize = 3;

    pub fn new(waypoints: Vec<Vec3>) -> Result<Self> {
        if waypoints.len() < Self::MIN_WAYPOINTS {
            return Err(Error::TooFewWaypoints {
                got: waypoints.len(),
                needed: Self::MIN_WAYPOINTS,
            });
        }
        Ok(Self { waypoints })
    }

    /// Inverse of [`Candidate::flatten`].
    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if !values.len().is_multiple_of(3) {
            return Err(Error::invalid(
                "values",
                format!("length {} is not a multiple of 3", values.len()),
            ));
        }
        Self::new(values.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect())
    }

    pub fn waypoints(&self) -> &[Vec3] {
        &self.waypoints
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// `[x1, y1, z1, x2, ...]`
    pub fn flatten(&self) -> Vec<f64> {
        self.waypoints.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImagineConfig {
    pub n_segments: usize,
    pub segment_len: usize,
    pub n_attempts: usize,
    pub top_n: usize,
    pub seed: u64,
}

impl Default for ImagineConfig {
    fn default() -> Self {
        Self {
            n_segments: DEFAULT_N_SEGMENTS,
            segment_len: DEFAULT_SEGMENT_LEN,
            n_attempts: DEFAULT_N_ATTEMPTS,
            top_n: DEFAULT_TOP_N,
            seed: 0,
        }
    }
}

/// `count` windows of `segment_len` frames with independent uniform starts.
pub fn sample_segments(play: &PlayDataset, count: usize, segment_len: usize, seed: u64) -> Result<Vec<Segment>> {
    if segment_len < 2 {
        return Err(Error::invalid("segment_len", "must be >= 2"));
    }
    if count == 0 {
        return Err(Error::invalid("count", "must be >= 1"));
    }
    if play.len() < segment_len {
        return Err(Error::PlayTooShort {
            frames: play.len(),
            segment_len,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last_start = play.len() - segment_len;
    Ok((0..count)
        .map(|_| {
            let start = rng.random_range(0..=last_start);
            Segment {
                start,
                dt: play.dt(),
                positions: play.robot_positions().points()[start..start + segment_len].to_vec(),
                keypoints: play.robot_keypoints().frames()[start..start + segment_len].to_vec(),
            }
        })
        .collect())
}

/// Largest end-to-start displacement over `segments`.
pub fn displacement_scale(segments: &[Segment]) -> f64 {
    segments.iter().map(Segment::displacement).fold(0.0, f64::max)
}

/// Segments per imagined trajectory so that they cover about one period.
pub fn segments_per_period(period_frames: f64, segment_len: usize) -> usize {
    ((period_frames / segment_len as f64).round() as usize).max(1)
}

fn attempt_rng(seed: u64, attempt: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt as u64);
    rng
}

/// Concatenates segments, spreading each junction gap over the two frames
/// after it (2/3 then 1/3 of the gap) in both positions and keypoints.
fn concatenate(segments: &[Segment], ids: &[usize]) -> (Vec<Vec3>, Vec<KeypointFrame>) {
    let mut positions: Vec<Vec3> = Vec::new();
    let mut keypoints: Vec<KeypointFrame> = Vec::new();
    for &id in ids {
        let seg = &segments[id];
        let start = positions.len();
        positions.extend_from_slice(&seg.positions);
        keypoints.extend(seg.keypoints.iter().cloned());
        if start == 0 {
            continue;
        }
        let gap = positions[start - 1] - seg.positions[0];
        let kp_gap: Vec<_> = keypoints[start - 1]
            .iter()
            .zip(&seg.keypoints[0])
            .map(|(a, b)| a - b)
            .collect();
        for (offset, weight) in [(0, 2.0 / 3.0), (1, 1.0 / 3.0)] {
            if offset >= seg.len() {
                break;
            }
            positions[start + offset] += gap * weight;
            for (k, g) in keypoints[start + offset].iter_mut().zip(&kp_gap) {
                *k += g * weight;
            }
        }
    }
    (positions, keypoints)
}

/// Up to `n_attempts` chains of `m` segments whose junction gaps are at most
/// `d_seg`. Each attempt draws a uniform first segment and then, junction by
/// junction, a uniform segment among those that start within `d_seg` of the
/// current end; an attempt that meets a dead end is dropped. Scores are left
/// at zero.
pub fn stitch_imagined(
    segments: &[Segment],
    m: usize,
    d_seg: f64,
    n_attempts: usize,
    seed: u64,
) -> Result<Vec<ImaginedTrajectory>> {
    if segments.is_empty() {
        return Err(Error::Empty("segments"));
    }
    if !(d_seg > 0.0) {
        return Err(Error::invalid("d_seg", format!("must be positive, got {d_seg}")));
    }
    if m == 0 {
        return Err(Error::invalid("m", "must be >= 1"));
    }
    let successors: Vec<Vec<usize>> = segments
        .iter()
        .map(|a| {
            (0..segments.len())
                .filter(|&j| (segments[j].first() - a.last()).norm() <= d_seg)
                .collect()
        })
        .collect();
    let dt = segments[0].dt;
    let accepted: Vec<ImaginedTrajectory> = (0..n_attempts)
        .into_par_iter()
        .filter_map(|attempt| {
            let mut rng = attempt_rng(seed, attempt);
            let mut ids = Vec::with_capacity(m);
            ids.push(rng.random_range(0..segments.len()));
            for _ in 1..m {
                let next = &successors[*ids.last().expect("non-empty")];
                if next.is_empty() {
                    return None;
                }
                ids.push(next[rng.random_range(0..next.len())]);
            }
            let (positions, frames) = concatenate(segments, &ids);
            let keypoints = KeypointVideo::new(dt, frames).ok()?;
            Some(ImaginedTrajectory {
                segment_ids: ids,
                positions,
                keypoints,
                score: 0.0,
            })
        })
        .collect();
    if accepted.is_empty() {
        return Err(Error::NoImaginedTrajectory {
            attempts: n_attempts,
            d_seg,
        });
    }
    Ok(accepted)
}

/// Negated keypoint distance to the single-period demo (higher is better).
pub fn score_imagined(imagined: &ImaginedTrajectory, demo_single_period: &KeypointVideo) -> Result<f64> {
    let cfg = DistanceConfig::new(FRAMES_PER_REP, demo_single_period.n_keypoints())?;
    Ok(-keypoint_distance(demo_single_period, &imagined.keypoints, &cfg)?)
}

/// Waypoints of the `top_n` best imagined trajectories, best first. Ties keep
/// pool order.
pub fn select_initial_candidates(
    pool: &[ImaginedTrajectory],
    demo_single_period: &KeypointVideo,
    top_n: usize,
    n_waypoints: usize,
) -> Result<Vec<Candidate>> {
    rank(pool, demo_single_period, top_n)?
        .into_iter()
        .map(|(i, _)| waypoints_of(&pool[i], n_waypoints))
        .collect()
}

/// Indices and scores of the `top_n` best pool members, best first.
pub fn rank(
    pool: &[ImaginedTrajectory],
    demo_single_period: &KeypointVideo,
    top_n: usize,
) -> Result<Vec<(usize, f64)>> {
    if pool.is_empty() {
        return Err(Error::Empty("imagined pool"));
    }
    if top_n > pool.len() {
        return Err(Error::PoolTooSmall {
            requested: top_n,
            available: pool.len(),
        });
    }
    let mut scored = pool
        .iter()
        .enumerate()
        .map(|(i, t)| Ok((i, score_imagined(t, demo_single_period)?)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored.truncate(top_n);
    Ok(scored)
}

pub fn waypoints_of(imagined: &ImaginedTrajectory, n_waypoints: usize) -> Result<Candidate> {
    Candidate::new(
        subsample_indices(imagined.positions.len(), n_waypoints)
            .into_iter()
            .map(|i| imagined.positions[i])
            .collect(),
    )
}

/// Everything the optimizer needs from play: candidates, `d_seg` and the
/// imagined pool with its emitted junctions.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub segments: Vec<Segment>,
    pub d_seg: f64,
    pub segments_per_trajectory: usize,
    pub pool: Vec<ImaginedTrajectory>,
    pub candidates: Vec<Candidate>,
}

impl WarmStart {
    /// True when every junction of every pooled trajectory is within `d_seg`.
    pub fn junctions_valid(&self) -> bool {
        self.pool
            .iter()
            .all(|t| t.junction_gaps(&self.segments).iter().all(|&g| g <= self.d_seg))
    }
}

/// Runs the whole pipeline. The demo single period sets both the scoring
/// reference and, through its length, the number of segments per trajectory.
pub fn warm_start(
    play: &PlayDataset,
    demo_single_period: &KeypointVideo,
    n_waypoints: usize,
    cfg: &ImagineConfig,
) -> Result<WarmStart> {
    let segments = sample_segments(play, cfg.n_segments, cfg.segment_len, cfg.seed)?;
    let d_seg = D_SEG_FRACTION * displacement_scale(&segments);
    if !(d_seg > 0.0) {
        return Err(Error::NoImaginedTrajectory {
            attempts: cfg.n_attempts,
            d_seg,
        });
    }
    let m = segments_per_period(demo_single_period.len() as f64, cfg.segment_len);
    let mut pool = stitch_imagined(&segments, m, d_seg, cfg.n_attempts, cfg.seed ^ 0x1a6e)?;
    for t in &mut pool {
        t.score = score_imagined(t, demo_single_period)?;
    }
    let top_n = cfg.top_n.min(pool.len());
    let candidates = select_initial_candidates(&pool, demo_single_period, top_n, n_waypoints)?;
    Ok(WarmStart {
        segments,
        d_seg,
        segments_per_trajectory: m,
        pool,
        candidates,
    })
}
