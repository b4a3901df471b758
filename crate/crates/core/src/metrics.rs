//! Demo/execution comparison: keypoint distance, subsampling, period
//! estimation and the cross-method performance score.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::keypoints::KeypointVideo;
use crate::trajectory::Trajectory;

/// Sub-sampled frames per demonstrated period.
pub const FRAMES_PER_REP: usize = 10;
/// Peaks below this autocorrelation are not trusted.
pub const MIN_PERIOD_CONFIDENCE: f64 = 0.3;
/// A shorter-lag autocorrelation peak wins if it reaches this fraction of the
/// highest peak, so harmonics of the period are not picked.
const PEAK_FRACTION: f64 = 0.9;

/// `n` indices spread evenly over `0..len`, first and last included.
///
/// Index `i` is `i * (len - 1) / (n - 1)` rounded to the nearest integer with
/// exact halves rounded down. `n == 1` selects the first element.
pub fn subsample_indices(len: usize, n: usize) -> Vec<usize> {
    if n == 0 || len == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![0];
    }
    let q = (n - 1) as u64;
    (0..n as u64)
        .map(|i| {
            let p = i * (len as u64 - 1);
            ((2 * p + q - 1) / (2 * q)) as usize
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistanceConfig {
    pub n_subsampled: usize,
    pub n_keypoints: usize,
}

impl DistanceConfig {
    pub fn new(n_subsampled: usize, n_keypoints: usize) -> Result<Self> {
        if n_subsampled == 0 {
            return Err(Error::invalid("n_subsampled", "must be >= 1"));
        }
        if n_keypoints == 0 {
            return Err(Error::invalid("n_keypoints", "must be >= 1"));
        }
        Ok(Self {
            n_subsampled,
            n_keypoints,
        })
    }

    /// Ten sub-sampled frames per repetition.
    pub fn for_reps(n_rep: usize, n_keypoints: usize) -> Result<Self> {
        Self::new(FRAMES_PER_REP * n_rep.max(1), n_keypoints)
    }
}

pub fn subsample(video: &KeypointVideo, n: usize) -> KeypointVideo {
    let frames = subsample_indices(video.len(), n)
        .into_iter()
        .map(|i| video.frames()[i].clone())
        .collect();
    KeypointVideo::new(video.dt(), frames).expect("frames taken from a valid video")
}

/// Mean per-keypoint L1 distance between time-aligned sub-sampled frames.
/// Lies in `[0, 2]` for normalized keypoints.
pub fn keypoint_distance(demo: &KeypointVideo, exec: &KeypointVideo, cfg: &DistanceConfig) -> Result<f64> {
    if demo.is_empty() {
        return Err(Error::Empty("demo video"));
    }
    if exec.is_empty() {
        return Err(Error::Empty("execution video"));
    }
    if demo.n_keypoints() != exec.n_keypoints() {
        return Err(Error::KeypointCountMismatch {
            left: demo.n_keypoints(),
            right: exec.n_keypoints(),
        });
    }
    if cfg.n_keypoints != demo.n_keypoints() {
        return Err(Error::KeypointCountMismatch {
            left: cfg.n_keypoints,
            right: demo.n_keypoints(),
        });
    }
    let a = subsample_indices(demo.len(), cfg.n_subsampled);
    let b = subsample_indices(exec.len(), cfg.n_subsampled);
    let mut total = 0.0;
    for (ia, ib) in a.into_iter().zip(b) {
        for (p, q) in demo.frames()[ia].iter().zip(&exec.frames()[ib]) {
            total += (p.x - q.x).abs() + (p.y - q.y).abs();
        }
    }
    Ok(total / (cfg.n_subsampled * cfg.n_keypoints) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodEstimate {
    pub n_rep: usize,
    pub period_frames: f64,
    pub confidence: f64,
}

/// Estimates how many times the motion in `video` repeats.
///
/// Stacked keypoint coordinates are linearly detrended and projected on their
/// first principal direction. The period is the first autocorrelation peak in
/// lags `[T/10, T/2]` that comes within 10% of the highest one, refined by a
/// parabola through its neighbours.
pub fn estimate_periods(video: &KeypointVideo) -> Result<PeriodEstimate> {
    let t_len = video.len();
    if t_len < 4 {
        return Err(Error::NoPeriodicity { confidence: 0.0 });
    }
    let signal = principal_signal(video);
    let energy: f64 = signal.iter().map(|s| s * s).sum();
    if !(energy > 1e-18 * t_len as f64) {
        return Err(Error::NoPeriodicity { confidence: 0.0 });
    }

    let min_lag = (t_len as f64 / 10.0).ceil().max(1.0) as usize;
    let max_lag = (t_len / 2).max(min_lag);
    let corr = |lag: usize| normalized_autocorrelation(&signal, lag);
    let lags: Vec<usize> = (min_lag..=max_lag).collect();
    let values: Vec<f64> = lags.iter().map(|&k| corr(k)).collect();
    let global = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let neighbour = |k: usize| {
        if k >= 1 && k + 1 < t_len {
            corr(k)
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut pick = None;
    for (idx, &k) in lags.iter().enumerate() {
        let v = values[idx];
        let left = if idx > 0 { values[idx - 1] } else { neighbour(k - 1) };
        let right = if idx + 1 < values.len() {
            values[idx + 1]
        } else {
            neighbour(k + 1)
        };
        if v >= left && v >= right && v >= PEAK_FRACTION * global {
            pick = Some((k, v, left, right));
            break;
        }
    }
    let (lag, peak, left, right) = match pick {
        Some(p) => p,
        None => {
            let idx = values
                .iter()
                .enumerate()
                .fold(0, |best, (i, v)| if *v > values[best] { i } else { best });
            (lags[idx], values[idx], f64::NAN, f64::NAN)
        }
    };
    let confidence = peak.clamp(0.0, 1.0);
    if confidence < MIN_PERIOD_CONFIDENCE {
        return Err(Error::NoPeriodicity { confidence });
    }
    let mut period = lag as f64;
    if left.is_finite() && right.is_finite() {
        let denom = left - 2.0 * peak + right;
        if denom < 0.0 {
            period += (0.5 * (left - right) / denom).clamp(-0.5, 0.5);
        }
    }
    let n_rep = ((t_len as f64 / period).round() as usize).max(1);
    Ok(PeriodEstimate {
        n_rep,
        period_frames: period,
        confidence,
    })
}

fn principal_signal(video: &KeypointVideo) -> Vec<f64> {
    let t_len = video.len();
    let cols = 2 * video.n_keypoints();
    let mut x = DMatrix::zeros(t_len, cols);
    for (t, frame) in video.frames().iter().enumerate() {
        for (k, p) in frame.iter().enumerate() {
            x[(t, 2 * k)] = p.x;
            x[(t, 2 * k + 1)] = p.y;
        }
    }
    // remove the least-squares line from each column
    let tm = (t_len as f64 - 1.0) / 2.0;
    let stt: f64 = (0..t_len).map(|t| (t as f64 - tm).powi(2)).sum();
    for c in 0..cols {
        let mean = x.column(c).mean();
        let slope = (0..t_len).map(|t| (t as f64 - tm) * (x[(t, c)] - mean)).sum::<f64>() / stt;
        for t in 0..t_len {
            x[(t, c)] -= mean + slope * (t as f64 - tm);
        }
    }
    let cov = x.transpose() * &x;
    let eig = SymmetricEigen::new(cov);
    let top = eig.eigenvalues.imax();
    let dir = eig.eigenvectors.column(top).into_owned();
    (&x * dir).iter().cloned().collect()
}

fn normalized_autocorrelation(s: &[f64], lag: usize) -> f64 {
    let n = s.len() - lag;
    let (mut cross, mut e0, mut e1) = (0.0, 0.0, 0.0);
    for t in 0..n {
        cross += s[t] * s[t + lag];
        e0 += s[t] * s[t];
        e1 += s[t + lag] * s[t + lag];
    }
    let denom = (e0 * e1).sqrt();
    if denom > 0.0 {
        cross / denom
    } else {
        0.0
    }
}

/// The first period of `demo`.
pub fn split_single_period(demo: &KeypointVideo, estimate: &PeriodEstimate) -> Result<KeypointVideo> {
    let frames = estimate.period_frames.round() as usize;
    if estimate.period_frames > demo.len() as f64 + 0.5 || frames > demo.len() {
        return Err(Error::PeriodTooLong {
            period_frames: estimate.period_frames,
            frames: demo.len(),
        });
    }
    if frames == 0 {
        return Err(Error::invalid("period_frames", "must be at least one frame"));
    }
    Ok(demo.slice(0, frames))
}

/// Similarity of an execution to the exemplar trajectory, mapped to `[0, 1]`.
///
/// The execution is sub-sampled to the exemplar length; the mean per-step L1
/// position error is scaled by `max_error` (the workspace L1 diagonal) and
/// clamped.
pub fn performance(exemplar: &Trajectory, execution: &Trajectory, max_error: f64) -> f64 {
    let idx = subsample_indices(execution.len(), exemplar.len());
    let raw = exemplar
        .points()
        .iter()
        .zip(idx)
        .map(|(e, i)| (e - execution.points()[i]).abs().sum())
        .sum::<f64>()
        / exemplar.len() as f64;
    (1.0 - raw / max_error).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keypoints::Vec2;
    use crate::trajectory::Vec3;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn constant_video(len: usize, p: Vec2, n_k: usize) -> KeypointVideo {
        KeypointVideo::new(0.1, vec![vec![p; n_k]; len]).unwrap()
    }

    fn sine_video(len: usize, cycles: f64, n_k: usize) -> KeypointVideo {
        KeypointVideo::new(
            0.1,
            (0..len)
                .map(|t| {
                    let s = (TAU * cycles * t as f64 / len as f64).sin();
                    (0..n_k)
                        .map(|k| Vec2::new(0.5 + 0.2 * s, 0.3 + 0.01 * k as f64 - 0.1 * s))
                        .collect()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn subsample_index_rule() {
        assert_eq!(subsample_indices(70, 10), vec![0, 8, 15, 23, 31, 38, 46, 54, 61, 69]);
        assert_eq!(subsample_indices(70, 7), vec![0, 11, 23, 34, 46, 57, 69]);
        assert_eq!(subsample_indices(9, 2), vec![0, 8]);
        assert_eq!(subsample_indices(9, 1), vec![0]);
        assert_eq!(subsample_indices(5, 5), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn subsample_identity_and_endpoints() {
        let v = sine_video(30, 2.0, 3);
        assert_eq!(subsample(&v, 30), v);
        let two = subsample(&v, 2);
        assert_eq!(two.frames()[0], v.frames()[0]);
        assert_eq!(two.frames()[1], v.frames()[29]);
    }

    #[test]
    fn distance_examples() {
        let cfg = DistanceConfig::new(10, 4).unwrap();
        let a = sine_video(40, 2.0, 4);
        assert_eq!(keypoint_distance(&a, &a, &cfg).unwrap(), 0.0);
        let shifted = a
            .map_frames(|f| f.iter().map(|p| p + Vec2::new(0.1, 0.0)).collect())
            .unwrap();
        assert!((keypoint_distance(&a, &shifted, &cfg).unwrap() - 0.1).abs() < 1e-12);
        let lo = constant_video(12, Vec2::new(0.0, 0.0), 4);
        let hi = constant_video(25, Vec2::new(1.0, 1.0), 4);
        assert_eq!(keypoint_distance(&lo, &hi, &cfg).unwrap(), 2.0);
    }

    #[test]
    fn distance_rejects_mismatch() {
        let cfg = DistanceConfig::new(5, 2).unwrap();
        let a = constant_video(5, Vec2::zeros(), 2);
        let b = constant_video(5, Vec2::zeros(), 3);
        assert!(matches!(
            keypoint_distance(&a, &b, &cfg),
            Err(Error::KeypointCountMismatch { .. })
        ));
        let empty = KeypointVideo::new(0.1, vec![]).unwrap();
        assert!(keypoint_distance(&empty, &a, &cfg).is_err());
    }

    #[test]
    fn period_of_pure_sine() {
        let est = estimate_periods(&sine_video(400, 4.0, 8)).unwrap();
        assert_eq!(est.n_rep, 4);
        assert!((est.period_frames - 100.0).abs() <= 1.0, "{est:?}");
        assert!(est.confidence > 0.9);
    }

    #[test]
    fn period_counts_two_to_six() {
        for reps in 2..=6 {
            let est = estimate_periods(&sine_video(40 * reps, reps as f64, 5)).unwrap();
            assert_eq!(est.n_rep, reps, "{est:?}");
        }
    }

    #[test]
    fn constant_video_has_no_period() {
        let v = constant_video(100, Vec2::new(0.4, 0.4), 8);
        assert!(matches!(estimate_periods(&v), Err(Error::NoPeriodicity { .. })));
    }

    #[test]
    fn split_examples() {
        let v = sine_video(400, 4.0, 2);
        let est = PeriodEstimate {
            n_rep: 4,
            period_frames: 100.0,
            confidence: 1.0,
        };
        let single = split_single_period(&v, &est).unwrap();
        assert_eq!(single.len(), 100);
        let mut tiled = Vec::new();
        for _ in 0..4 {
            tiled.extend(single.frames().iter().cloned());
        }
        for (a, b) in tiled.iter().zip(v.frames()) {
            for (p, q) in a.iter().zip(b) {
                assert!((p - q).norm() < 1e-9);
            }
        }
        let whole = PeriodEstimate {
            n_rep: 1,
            period_frames: 400.0,
            confidence: 1.0,
        };
        assert_eq!(split_single_period(&v, &whole).unwrap().len(), 400);
        let too_long = PeriodEstimate {
            n_rep: 1,
            period_frames: 401.0,
            confidence: 1.0,
        };
        assert!(matches!(
            split_single_period(&v, &too_long),
            Err(Error::PeriodTooLong { .. })
        ));
    }

    #[test]
    fn performance_bounds() {
        let e = Trajectory::new(0.1, (0..20).map(|i| Vec3::new(0.01 * i as f64, 0.1, 0.0)).collect()).unwrap();
        assert_eq!(performance(&e, &e, 0.98), 1.0);
        let far = e.translated(&Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(performance(&e, &far, 0.98), 0.0);
    }

    /// Execution parked at the exemplar mean of a sine along x: the raw error
    /// is the grid average of |A sin|, computed here by brute force.
    #[test]
    fn performance_of_parked_execution() {
        let amp = 0.1;
        let n = 80;
        let e = Trajectory::new(
            0.1,
            (0..n)
                .map(|i| Vec3::new(0.25 + amp * (TAU * i as f64 / 40.0).sin(), 0.2, 0.01))
                .collect(),
        )
        .unwrap();
        let parked = Trajectory::new(0.1, vec![e.mean(); 57]).unwrap();
        let mean = e.mean();
        let brute: f64 = e.points().iter().map(|p| (p - mean).abs().sum()).sum::<f64>() / n as f64;
        let d_max = 0.5 + 0.43 + 0.05;
        let expected = 1.0 - brute / d_max;
        assert!((performance(&e, &parked, d_max) - expected).abs() < 1e-12);
        // and the continuous-limit value 2A/pi is close to the grid average
        assert!((brute - 2.0 * amp / std::f64::consts::PI).abs() < 2e-3);
    }

    proptest! {
        #[test]
        fn distance_symmetric_and_bounded(
            a in proptest::collection::vec(0.0f64..=1.0, 2 * 3 * 7),
            b in proptest::collection::vec(0.0f64..=1.0, 2 * 3 * 5),
            n_s in 1usize..12,
        ) {
            let mk = |v: &[f64], len: usize| {
                KeypointVideo::new(0.1, (0..len).map(|t| (0..3).map(|k| {
                    let o = 2 * (3 * t + k);
                    Vec2::new(v[o], v[o + 1])
                }).collect()).collect()).unwrap()
            };
            let va = mk(&a, 7);
            let vb = mk(&b, 5);
            let cfg = DistanceConfig::new(n_s, 3).unwrap();
            let ab = keypoint_distance(&va, &vb, &cfg).unwrap();
            let ba = keypoint_distance(&vb, &va, &cfg).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=2.0).contains(&ab));
            prop_assert_eq!(keypoint_distance(&va, &va, &cfg).unwrap(), 0.0);
        }

        #[test]
        fn subsample_idempotent(len in 1usize..200, n in 1usize..50) {
            let v = KeypointVideo::new(0.1, (0..len).map(|t| vec![Vec2::new(t as f64, 0.0)]).collect()).unwrap();
            let once = subsample(&v, n);
            prop_assert_eq!(subsample(&once, n), once);
        }

        #[test]
        fn performance_translation_invariant(dx in -1.0f64..1.0, dy in -1.0f64..1.0, phase in 0.0f64..6.0) {
            let e = Trajectory::new(0.1, (0..30).map(|i| Vec3::new((i as f64 * 0.2).sin() * 0.1, 0.05, 0.0)).collect()).unwrap();
            let r = Trajectory::new(0.1, (0..45).map(|i| Vec3::new((i as f64 * 0.13 + phase).cos() * 0.08, 0.0, 0.01)).collect()).unwrap();
            let off = Vec3::new(dx, dy, 0.0);
            let a = performance(&e, &r, 0.98);
            let b = performance(&e.translated(&off), &r.translated(&off), 0.98);
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
