//! Rhythmic dynamic movement primitives.
//!
//! The transformation system is the usual damped spring plus a learned
//! forcing term,
//!
//! ```text
//! tau * dz/dt   = alpha_z * (beta_z * (g - x) - z) + f(phi)
//! tau * dx/dt   = z
//! tau * dphi/dt = 1
//! ```
//!
//! where `f` is a normalized mixture of von Mises-like cyclic bases scaled by
//! the amplitude `r`. The goal `g` is not a constant here: a rollout steps a
//! goal *target* by `goal_shift` at every period boundary and the running goal
//! relaxes toward it through a first-order filter, so the limit cycle drifts
//! without any jump in acceleration.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::NaturalCubic;
use crate::trajectory::{Trajectory, Vec3};

pub const DEFAULT_ALPHA_Z: f64 = 25.0;
pub const DEFAULT_N_BASIS: usize = 25;
/// Integration steps per period used by [`default_dt`].
pub const STEPS_PER_PERIOD: f64 = 200.0;

/// Width of every basis for a given basis count.
pub fn default_width(n_basis: usize) -> f64 {
    2.5 * n_basis as f64
}

/// Integration step for a rollout of a primitive with this period.
pub fn default_dt(period: f64) -> f64 {
    period / STEPS_PER_PERIOD
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdmpParams {
    /// One weight vector (x, y, z) per basis.
    pub weights: Vec<Vec3>,
    /// Basis centers in radians, strictly increasing in `[0, 2pi)`.
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    pub amplitude: f64,
    /// Seconds per radian of phase.
    pub tau: f64,
    pub alpha_z: f64,
    pub beta_z: f64,
    pub goal: Vec3,
    /// Goal displacement applied once per period.
    pub goal_shift: Vec3,
    /// Position and scaled velocity of the fitted motion at phase zero.
    pub start: Vec3,
    pub start_velocity: Vec3,
}

impl RdmpParams {
    /// Zero-weight primitive with the default gains and evenly spaced bases.
    pub fn new(n_basis: usize, period: f64, goal: Vec3) -> Result<Self> {
        if n_basis < 2 {
            return Err(Error::invalid("n_basis", format!("need at least 2, got {n_basis}")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::invalid("period", format!("must be positive, got {period}")));
        }
        let params = Self {
            weights: vec![Vec3::zeros(); n_basis],
            centers: (0..n_basis).map(|i| TAU * i as f64 / n_basis as f64).collect(),
            widths: vec![default_width(n_basis); n_basis],
            amplitude: 1.0,
            tau: period / TAU,
            alpha_z: DEFAULT_ALPHA_Z,
            beta_z: DEFAULT_ALPHA_Z / 4.0,
            goal,
            goal_shift: Vec3::zeros(),
            start: goal,
            start_velocity: Vec3::zeros(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn n_basis(&self) -> usize {
        self.centers.len()
    }

    /// Duration of one period in seconds.
    pub fn period(&self) -> f64 {
        TAU * self.tau
    }

    /// Goal relaxation gain of the running-goal filter.
    pub fn alpha_goal(&self) -> f64 {
        self.alpha_z / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.centers.len();
        if n < 2 {
            return Err(Error::invalid("n_basis", format!("need at least 2, got {n}")));
        }
        if self.weights.len() != n || self.widths.len() != n {
            return Err(Error::invalid(
                "weights/widths",
                format!(
                    "lengths {} / {} do not match {n} centers",
                    self.weights.len(),
                    self.widths.len()
                ),
            ));
        }
        if self.widths.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::invalid("widths", "every width must be > 0"));
        }
        if !self.centers.windows(2).all(|w| w[0] < w[1]) || self.centers[0] < 0.0 || self.centers[n - 1] >= TAU {
            return Err(Error::invalid("centers", "must be strictly increasing within [0, 2pi)"));
        }
        for (name, v) in [("tau", self.tau), ("alpha_z", self.alpha_z), ("beta_z", self.beta_z)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn write_text<W: Write>(&self, mut writer: W) -> Result<()> {
        let doc = ParamsDoc::from(self);
        let text = toml::to_string(&doc).map_err(|e| Error::Parse {
            what: "rdmp params",
            reason: e.to_string(),
        })?;
        writer
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<rdmp params>", e))
    }

    pub fn read_text<R: Read>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| Error::io("<rdmp params>", e))?;
        let doc: ParamsDoc = toml::from_str(&text).map_err(|e| Error::Parse {
            what: "rdmp params",
            reason: e.to_string(),
        })?;
        let params = doc.into_params()?;
        params.validate()?;
        Ok(params)
    }
}

/// On-disk key/value layout of [`RdmpParams`].
#[derive(Debug, Serialize, Deserialize)]
struct ParamsDoc {
    tau: f64,
    alpha_z: f64,
    beta_z: f64,
    amplitude: f64,
    goal: [f64; 3],
    goal_shift: [f64; 3],
    start: [f64; 3],
    start_velocity: [f64; 3],
    centers: Vec<f64>,
    widths: Vec<f64>,
    weights_x: Vec<f64>,
    weights_y: Vec<f64>,
    weights_z: Vec<f64>,
}

impl From<&RdmpParams> for ParamsDoc {
    fn from(p: &RdmpParams) -> Self {
        let arr = |v: &Vec3| [v.x, v.y, v.z];
        Self {
            tau: p.tau,
            alpha_z: p.alpha_z,
            beta_z: p.beta_z,
            amplitude: p.amplitude,
            goal: arr(&p.goal),
            goal_shift: arr(&p.goal_shift),
            start: arr(&p.start),
            start_velocity: arr(&p.start_velocity),
            centers: p.centers.clone(),
            widths: p.widths.clone(),
            weights_x: p.weights.iter().map(|w| w.x).collect(),
            weights_y: p.weights.iter().map(|w| w.y).collect(),
            weights_z: p.weights.iter().map(|w| w.z).collect(),
        }
    }
}

impl ParamsDoc {
    fn into_params(self) -> Result<RdmpParams> {
        let n = self.centers.len();
        if self.weights_x.len() != n || self.weights_y.len() != n || self.weights_z.len() != n {
            return Err(Error::Parse {
                what: "rdmp params",
                reason: "weight columns must match the number of centers".into(),
            });
        }
        let v = |a: [f64; 3]| Vec3::new(a[0], a[1], a[2]);
        Ok(RdmpParams {
            weights: (0..n)
                .map(|i| Vec3::new(self.weights_x[i], self.weights_y[i], self.weights_z[i]))
                .collect(),
            centers: self.centers,
            widths: self.widths,
            amplitude: self.amplitude,
            tau: self.tau,
            alpha_z: self.alpha_z,
            beta_z: self.beta_z,
            goal: v(self.goal),
            goal_shift: v(self.goal_shift),
            start: v(self.start),
            start_velocity: v(self.start_velocity),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdmpState {
    pub x: Vec3,
    /// Scaled velocity `tau * dx/dt`.
    pub z: Vec3,
    /// Phase in radians; never wraps.
    pub phase: f64,
    /// Running goal.
    pub goal: Vec3,
    /// Value the running goal relaxes toward.
    pub goal_target: Vec3,
}

impl RdmpState {
    /// State at phase zero on the fitted motion, with the goal at rest.
    pub fn initial(params: &RdmpParams) -> Self {
        Self {
            x: params.start,
            z: params.start_velocity,
            phase: 0.0,
            goal: params.goal,
            goal_target: params.goal,
        }
    }

    pub fn at_rest(x: Vec3, goal: Vec3) -> Self {
        Self {
            x,
            z: Vec3::zeros(),
            phase: 0.0,
            goal,
            goal_target: goal,
        }
    }
}

pub fn basis_activation(phase: f64, params: &RdmpParams) -> Vec<f64> {
    params
        .centers
        .iter()
        .zip(&params.widths)
        .map(|(c, h)| (h * ((phase - c).cos() - 1.0)).exp())
        .collect()
}

pub fn forcing(phase: f64, params: &RdmpParams) -> Vec3 {
    let psi = basis_activation(phase, params);
    let total: f64 = psi.iter().sum();
    let weighted: Vec3 = psi.iter().zip(&params.weights).map(|(p, w)| w * *p).sum();
    weighted * (params.amplitude / total)
}

/// One explicit Euler step of the transformation, canonical and goal systems.
pub fn step(state: &RdmpState, params: &RdmpParams, dt: f64) -> Result<RdmpState> {
    let max = params.tau / 10.0;
    if !(dt > 0.0 && dt <= max) {
        return Err(Error::InvalidTimeStep { dt, max });
    }
    let f = forcing(state.phase, params);
    let zdot = ((state.goal - state.x) * params.beta_z - state.z) * params.alpha_z + f;
    let gdot = (state.goal_target - state.goal) * params.alpha_goal();
    let k = dt / params.tau;
    Ok(RdmpState {
        x: state.x + state.z * k,
        z: state.z + zdot * k,
        phase: state.phase + k,
        goal: state.goal + gdot * k,
        goal_target: state.goal_target,
    })
}

/// Fits a primitive to a demonstration that covers at least one period.
///
/// The goal is the demo mean. Velocities and accelerations come from central
/// differences (one-sided at the ends), the target forcing is the
/// transformation system solved for `f`, and each weight is the
/// basis-weighted mean of that target (locally weighted regression with the
/// amplitude as the only regressor).
pub fn fit_from_demo(demo: &Trajectory, n_basis: usize, period: f64) -> Result<RdmpParams> {
    let mut params = RdmpParams::new(n_basis, period, demo.mean())?;
    let dt = demo.dt();
    let covered = demo.len() as f64 * dt;
    if covered < period * (1.0 - 1e-9) {
        return Err(Error::DemoTooShort {
            got: covered,
            needed: period,
        });
    }
    let x = demo.points();
    let vel = differentiate(x, dt);
    let acc = differentiate(&vel, dt);
    let tau = params.tau;
    let g = params.goal;

    let mut num = vec![Vec3::zeros(); n_basis];
    let mut den = vec![0.0; n_basis];
    for (i, ((xi, vi), ai)) in x.iter().zip(&vel).zip(&acc).enumerate() {
        let phase = i as f64 * dt / tau;
        let target = ai * (tau * tau) - ((g - xi) * params.beta_z - vi * tau) * params.alpha_z;
        for (b, psi) in basis_activation(phase, &params).into_iter().enumerate() {
            num[b] += target * psi;
            den[b] += psi;
        }
    }
    for b in 0..n_basis {
        params.weights[b] = if den[b] > 1e-300 {
            num[b] / (den[b] * params.amplitude)
        } else {
            Vec3::zeros()
        };
    }
    params.start = x[0];
    params.start_velocity = vel[0] * tau;
    Ok(params)
}

fn differentiate(x: &[Vec3], dt: f64) -> Vec<Vec3> {
    let n = x.len();
    if n < 2 {
        return vec![Vec3::zeros(); n];
    }
    (0..n)
        .map(|i| match i {
            0 => (x[1] - x[0]) / dt,
            _ if i == n - 1 => (x[n - 1] - x[n - 2]) / dt,
            _ => (x[i + 1] - x[i - 1]) / (2.0 * dt),
        })
        .collect()
}

/// Fits a primitive to one period described by `waypoints`.
///
/// The waypoints are spread uniformly over the period and joined by a natural
/// cubic spline, so the last waypoint is where the next period begins. The
/// linear drift `v_L - v_1` is removed before fitting (centered on the period
/// midpoint) and re-introduced through the per-period goal shift.
pub fn from_waypoints(waypoints: &[Vec3], period: f64, n_basis: usize) -> Result<RdmpParams> {
    if waypoints.len() < 3 {
        return Err(Error::TooFewWaypoints {
            got: waypoints.len(),
            needed: 3,
        });
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::invalid("period", format!("must be positive, got {period}")));
    }
    let shift = waypoints[waypoints.len() - 1] - waypoints[0];
    let spline = NaturalCubic::new(waypoints, period / (waypoints.len() - 1) as f64);
    let samples = STEPS_PER_PERIOD as usize;
    let dt = period / samples as f64;
    let dense: Vec<Vec3> = (0..samples)
        .map(|i| {
            let t = i as f64 * dt;
            spline.eval(t) - shift * (t / period - 0.5)
        })
        .collect();
    let mut params = fit_from_demo(&Trajectory::new(dt, dense)?, n_basis, period)?;
    params.goal_shift = shift;
    Ok(params)
}

/// Integrates `n_periods` full periods starting from `init`.
///
/// Every time the phase completes another period the goal target moves by
/// `goal_shift`; the running goal follows continuously.
pub fn rollout(params: &RdmpParams, n_periods: usize, dt: f64, init: &RdmpState) -> Result<Trajectory> {
    params.validate()?;
    let n_steps = (n_periods as f64 * params.period() / dt).round() as usize;
    let mut points = Vec::with_capacity(n_steps + 1);
    points.push(init.x);
    let mut state = init.clone();
    let mut completed = 0usize;
    for _ in 0..n_steps {
        state = step(&state, params, dt)?;
        let now = ((state.phase - init.phase) / TAU + 1e-9).floor() as usize;
        while completed < now {
            state.goal_target += params.goal_shift;
            completed += 1;
        }
        points.push(state.x);
    }
    Trajectory::new(dt, points)
}

/// Changes playback speed and amplitude without refitting.
pub fn rescale(params: &RdmpParams, speed_factor: f64, amplitude_factor: f64) -> Result<RdmpParams> {
    for (name, v) in [("speed_factor", speed_factor), ("amplitude_factor", amplitude_factor)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(name, format!("must be positive, got {v}")));
        }
    }
    let mut out = params.clone();
    out.tau /= speed_factor;
    out.amplitude *= amplitude_factor;
    Ok(out)
}
