use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{execute, granules, make_env, rope, KeypointVideo, Task, FRAME_DT};
use crate::error::{Error, Result};
use crate::trajectory::{Trajectory, Vec3};

const JITTER: f64 = 0.03;
const WIPE_AMPLITUDE: f64 = 0.12;
const WIPE_SHIFT: f64 = 0.035;
const WIND_RADIUS: f64 = 0.10;
const STIR_RADIUS: f64 = 0.06;
const DEMO_HEIGHT: f64 = 0.01;

/// Duration of one repetition of the scripted program (seconds).
pub fn demo_period(task: Task) -> f64 {
    match task {
        Task::Wiping => 4.0,
        Task::Winding | Task::Stirring => 3.0,
    }
}

/// Per-period multiplicative jitter factors, one more than `n_rep` so the
/// last period has an end value to blend toward.
fn jitter_factors(n_rep: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..=n_rep)
        .map(|_| 1.0 + JITTER * rng.random_range(-1.0..1.0))
        .collect()
}

/// Smooth blend between consecutive per-period factors.
fn blended(factors: &[f64], cycles: f64) -> f64 {
    let k = (cycles.floor() as usize).min(factors.len() - 2);
    let s = (cycles - k as f64).clamp(0.0, 1.0);
    let w = 0.5 - 0.5 * (std::f64::consts::PI * s).cos();
    factors[k] * (1.0 - w) + factors[k + 1] * w
}

fn circle(center: Vec3, radius: f64, cycles: f64) -> Vec3 {
    let a = TAU * cycles;
    center + Vec3::new(radius * a.cos(), radius * a.sin(), 0.0)
}

/// Records the hand-authored program of `task` for `n_rep` repetitions in
/// `make_env(task, seed)`. Returns the keypoint video and the effector
/// trajectory that produced it.
pub fn scripted_demo(task: Task, n_rep: usize, seed: u64) -> Result<(KeypointVideo, Trajectory)> {
    if n_rep < 2 {
        return Err(Error::TooFewRepetitions { got: n_rep, needed: 2 });
    }
    let env = make_env(task, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0xde40);
    let amp = jitter_factors(n_rep, &mut rng);
    let shift = jitter_factors(n_rep, &mut rng);
    let period = demo_period(task);
    let start = env.ee;
    let program = move |t: f64| -> Vec3 {
        let cycles = t / period;
        match task {
            Task::Wiping => {
                let k = (cycles.floor() as usize).min(n_rep);
                let done: f64 = shift[..k].iter().sum::<f64>();
                let partial = shift[k.min(n_rep)] * (cycles - k as f64);
                let a = WIPE_AMPLITUDE * amp[k.min(n_rep)];
                Vec3::new(
                    start.x + a * (1.0 - (TAU * cycles).cos()),
                    start.y + WIPE_SHIFT * (done + partial),
                    DEMO_HEIGHT,
                )
            }
            Task::Winding => {
                let h = rope::home_effector();
                let c = Vec3::new(h.x - WIND_RADIUS, h.y, DEMO_HEIGHT);
                circle(c, WIND_RADIUS * blended(&amp, cycles), cycles)
            }
            Task::Stirring => {
                let h = granules::home_effector();
                let c = Vec3::new(h.x - STIR_RADIUS, h.y, DEMO_HEIGHT);
                circle(c, STIR_RADIUS * blended(&amp, cycles), cycles)
            }
        }
    };
    let n_frames = (n_rep as f64 * period / FRAME_DT).round() as usize;
    let rec = execute(env, n_frames, |t, _| program(t))?;
    Ok((rec.video, rec.trajectory))
}
