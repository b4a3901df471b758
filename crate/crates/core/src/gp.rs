//! Exact Gaussian-process regression with an ARD squared-exponential kernel.
//!
//! Inputs are standardized per dimension with the statistics of the training
//! set and targets are centered on their mean, which doubles as the constant
//! prior mean. Hyperparameters live in the standardized input space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Lower bound on the noise variance added to the kernel diagonal.
pub const JITTER: f64 = 1e-6;
/// Largest noise variance tried when the kernel matrix will not factorize.
pub const MAX_JITTER: f64 = 1e-2;
pub const DEFAULT_BETA: f64 = 0.1;

/// `sigma2 * exp(-0.5 * sum_d ((a_d - b_d) / l_d)^2)`
pub fn kernel(a: &[f64], b: &[f64], signal_variance: f64, length_scales: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if length_scales.len() != a.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: length_scales.len(),
        });
    }
    if length_scales.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::invalid("length_scales", "every length scale must be > 0"));
    }
    Ok(sq_exp(a, b, signal_variance, length_scales))
}

fn sq_exp(a: &[f64], b: &[f64], signal_variance: f64, length_scales: &[f64]) -> f64 {
    let q: f64 = a
        .iter()
        .zip(b)
        .zip(length_scales)
        .map(|((x, y), l)| {
            let d = (x - y) / l;
            d * d
        })
        .sum();
    signal_variance * (-0.5 * q).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub signal_variance: f64,
    pub length_scales: Vec<f64>,
    pub noise_variance: f64,
}

impl Hyperparams {
    /// Starting point of the marginal-likelihood search for standardized
    /// inputs of dimension `dim` and centered targets with variance `target_var`.
    pub fn initial(dim: usize, target_var: f64) -> Self {
        let v = target_var.max(1e-12);
        Self {
            signal_variance: v,
            length_scales: vec![(dim as f64).sqrt().max(1.0); dim],
            noise_variance: (1e-2 * v).max(JITTER),
        }
    }

    fn to_log(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.length_scales.len() + 2);
        v.push(self.signal_variance.ln());
        v.extend(self.length_scales.iter().map(|l| l.ln()));
        v.push(self.noise_variance.ln());
        v
    }

    fn from_log(v: &[f64]) -> Self {
        let n = v.len();
        Self {
            signal_variance: v[0].exp(),
            length_scales: v[1..n - 1].iter().map(|x| x.exp()).collect(),
            noise_variance: v[n - 1].exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionConfig {
    pub beta: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self { beta: DEFAULT_BETA }
    }
}

impl AcquisitionConfig {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::invalid("beta", format!("must be >= 0, got {beta}")));
        }
        Ok(Self { beta })
    }
}

#[derive(Debug, Clone)]
pub struct GpModel {
    dim: usize,
    input_mean: Vec<f64>,
    input_scale: Vec<f64>,
    /// Standardized training inputs, one row per point.
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    prior_mean: f64,
    hyper: Hyperparams,
    noise_used: f64,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
}

impl GpModel {
    /// A model with no data: the posterior is the prior everywhere.
    pub fn prior(dim: usize, hyper: Hyperparams, prior_mean: f64) -> Result<Self> {
        check_hyper(&hyper, dim)?;
        Ok(Self {
            dim,
            input_mean: vec![0.0; dim],
            input_scale: vec![1.0; dim],
            inputs: Vec::new(),
            targets: Vec::new(),
            prior_mean,
            noise_used: hyper.noise_variance.max(JITTER),
            hyper,
            chol: None,
            alpha: DVector::zeros(0),
        })
    }

    /// Fits the model, optionally maximizing the log marginal likelihood over
    /// the hyperparameters first.
    pub fn fit(inputs: &[Vec<f64>], targets: &[f64], optimize_hyperparams: bool) -> Result<Self> {
        let data = Standardized::new(inputs, targets)?;
        let init = Hyperparams::initial(data.dim, data.target_var());
        let hyper = if optimize_hyperparams {
            optimize(&data, &init)
        } else {
            init
        };
        Self::from_standardized(data, hyper)
    }

    /// Fits the model with fixed hyperparameters.
    pub fn fit_with(inputs: &[Vec<f64>], targets: &[f64], hyper: Hyperparams) -> Result<Self> {
        let data = Standardized::new(inputs, targets)?;
        Self::from_standardized(data, hyper)
    }

    fn from_standardized(data: Standardized, hyper: Hyperparams) -> Result<Self> {
        check_hyper(&hyper, data.dim)?;
        let n = data.inputs.len();
        let base = gram(&data.inputs, &hyper);
        let mut noise = hyper.noise_variance.max(JITTER);
        let chol = loop {
            let mut k = base.clone();
            for i in 0..n {
                k[(i, i)] += noise;
            }
            if let Some(c) = k.cholesky() {
                break c;
            }
            noise *= 10.0;
            if noise > MAX_JITTER * (1.0 + 1e-9) {
                return Err(Error::NotPositiveDefinite { jitter: noise / 10.0 });
            }
        };
        let centered = DVector::from_iterator(n, data.targets.iter().map(|y| y - data.prior_mean));
        let alpha = chol.solve(&centered);
        Ok(Self {
            dim: data.dim,
            input_mean: data.mean,
            input_scale: data.scale,
            inputs: data.inputs,
            targets: data.targets,
            prior_mean: data.prior_mean,
            hyper,
            noise_used: noise,
            chol: Some(chol),
            alpha,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_train(&self) -> usize {
        self.inputs.len()
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    /// Noise variance actually on the kernel diagonal after jitter escalation.
    pub fn noise_variance_used(&self) -> f64 {
        self.noise_used
    }

    pub fn input_mean(&self) -> &[f64] {
        &self.input_mean
    }

    /// Per-dimension divisor used to standardize inputs.
    pub fn input_scale(&self) -> &[f64] {
        &self.input_scale
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Log marginal likelihood of the training targets under the fitted model.
    pub fn log_marginal_likelihood(&self) -> f64 {
        match &self.chol {
            None => 0.0,
            Some(chol) => {
                let centered =
                    DVector::from_iterator(self.targets.len(), self.targets.iter().map(|y| y - self.prior_mean));
                lml_from_chol(chol, &centered, &self.alpha)
            }
        }
    }

    fn standardize(&self, w: &[f64]) -> Vec<f64> {
        w.iter()
            .zip(&self.input_mean)
            .zip(&self.input_scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    /// Predictive mean and standard deviation of the latent function at `w`.
    pub fn posterior(&self, w: &[f64]) -> Result<(f64, f64)> {
        if w.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: w.len(),
            });
        }
        let sv = self.hyper.signal_variance;
        let Some(chol) = &self.chol else {
            return Ok((self.prior_mean, sv.sqrt()));
        };
        let q = self.standardize(w);
        let kstar = DVector::from_iterator(
            self.inputs.len(),
            self.inputs.iter().map(|x| sq_exp(x, &q, sv, &self.hyper.length_scales)),
        );
        let mean = self.prior_mean + kstar.dot(&self.alpha);
        let v = chol
            .l_dirty()
            .solve_lower_triangular(&kstar)
            .expect("cholesky factor is invertible");
        let var = (sv - v.dot(&v)).max(0.0);
        Ok((mean, var.sqrt()))
    }
}

/// Upper confidence bound `mean + beta * std`.
pub fn ucb(model: &GpModel, w: &[f64], cfg: &AcquisitionConfig) -> Result<f64> {
    let (mean, std) = model.posterior(w)?;
    Ok(mean + cfg.beta * std)
}

fn check_hyper(hyper: &Hyperparams, dim: usize) -> Result<()> {
    if hyper.length_scales.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: hyper.length_scales.len(),
        });
    }
    if hyper.length_scales.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::invalid("length_scales", "every length scale must be positive"));
    }
    if !(hyper.signal_variance > 0.0 && hyper.signal_variance.is_finite()) {
        return Err(Error::invalid("signal_variance", "must be positive"));
    }
    if !(hyper.noise_variance >= 0.0 && hyper.noise_variance.is_finite()) {
        return Err(Error::invalid("noise_variance", "must be non-negative"));
    }
    Ok(())
}

struct Standardized {
    dim: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    prior_mean: f64,
}

impl Standardized {
    fn new(inputs: &[Vec<f64>], targets: &[f64]) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::Empty("training inputs"));
        }
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        let dim = inputs[0].len();
        if dim == 0 {
            return Err(Error::Empty("input dimension"));
        }
        if let Some(bad) = inputs.iter().find(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        if targets.iter().any(|y| !y.is_finite()) {
            return Err(Error::invalid("targets", "must be finite"));
        }
        let n = inputs.len() as f64;
        let mean: Vec<f64> = (0..dim).map(|d| inputs.iter().map(|x| x[d]).sum::<f64>() / n).collect();
        let scale: Vec<f64> = (0..dim)
            .map(|d| {
                let var = inputs.iter().map(|x| (x[d] - mean[d]).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        let std_inputs = inputs
            .iter()
            .map(|x| (0..dim).map(|d| (x[d] - mean[d]) / scale[d]).collect())
            .collect();
        let prior_mean = targets.iter().sum::<f64>() / n;
        Ok(Self {
            dim,
            mean,
            scale,
            inputs: std_inputs,
            targets: targets.to_vec(),
            prior_mean,
        })
    }

    fn target_var(&self) -> f64 {
        let n = self.targets.len() as f64;
        self.targets.iter().map(|y| (y - self.prior_mean).powi(2)).sum::<f64>() / n
    }
}

fn gram(inputs: &[Vec<f64>], hyper: &Hyperparams) -> DMatrix<f64> {
    let n = inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = sq_exp(&inputs[i], &inputs[j], hyper.signal_variance, &hyper.length_scales);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn lml_from_chol(chol: &Cholesky<f64, Dyn>, centered: &DVector<f64>, alpha: &DVector<f64>) -> f64 {
    let n = centered.len() as f64;
    let log_det_half: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    -0.5 * centered.dot(alpha) - log_det_half - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

/// Log marginal likelihood evaluator with the pairwise squared differences
/// cached per dimension.
struct LmlObjective {
    n: usize,
    sq_diffs: Vec<Vec<f64>>,
    centered: DVector<f64>,
}

impl LmlObjective {
    fn new(data: &Standardized) -> Self {
        let n = data.inputs.len();
        let pairs = n * (n + 1) / 2;
        let mut sq_diffs = vec![Vec::with_capacity(pairs); data.dim];
        for i in 0..n {
            for j in 0..=i {
                for (d, col) in sq_diffs.iter_mut().enumerate() {
                    let v = data.inputs[i][d] - data.inputs[j][d];
                    col.push(v * v);
                }
            }
        }
        let centered = DVector::from_iterator(n, data.targets.iter().map(|y| y - data.prior_mean));
        Self { n, sq_diffs, centered }
    }

    fn eval(&self, log_params: &[f64]) -> f64 {
        let hyper = Hyperparams::from_log(log_params);
        let inv_l2: Vec<f64> = hyper.length_scales.iter().map(|l| 1.0 / (l * l)).collect();
        let noise = hyper.noise_variance.max(JITTER);
        let mut k = DMatrix::zeros(self.n, self.n);
        let mut p = 0;
        for i in 0..self.n {
            for j in 0..=i {
                let q: f64 = self.sq_diffs.iter().zip(&inv_l2).map(|(col, w)| col[p] * w).sum();
                let v = hyper.signal_variance * (-0.5 * q).exp();
                k[(i, j)] = v;
                k[(j, i)] = v;
                p += 1;
            }
            k[(i, i)] += noise;
        }
        match k.cholesky() {
            Some(chol) => {
                let alpha = chol.solve(&self.centered);
                let v = lml_from_chol(&chol, &self.centered, &alpha);
                if v.is_finite() {
                    v
                } else {
                    f64::NEG_INFINITY
                }
            }
            None => f64::NEG_INFINITY,
        }
    }
}

const GRID_STEPS: [f64; 3] = [1.0, 1.0 / 3.0, 1.0 / 9.0];
const GRID_OFFSETS: [f64; 6] = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
const MAX_SWEEPS: usize = 3;

/// Multi-start coordinate ascent in log space over a grid refined twice.
/// Only improving moves are taken, so the result is never worse than `init`.
fn optimize(data: &Standardized, init: &Hyperparams) -> Hyperparams {
    let objective = LmlObjective::new(data);
    let v = data.target_var().max(1e-12);
    let dim = data.dim;
    let mut lower = vec![(1e-3 * v).ln()];
    let mut upper = vec![(1e3 * v).ln()];
    lower.extend(std::iter::repeat_n(1e-2f64.ln(), dim));
    upper.extend(std::iter::repeat_n(1e3f64.ln(), dim));
    lower.push(JITTER.ln());
    upper.push(v.max(JITTER).ln());

    let base = init.to_log();
    let starts: Vec<Vec<f64>> = [0.0, -0.7, 0.7]
        .iter()
        .map(|shift| {
            let mut s = base.clone();
            for x in &mut s[1..=dim] {
                *x += shift;
            }
            s
        })
        .collect();

    let mut best = base.clone();
    let mut best_val = objective.eval(&best);
    for start in starts {
        let mut cur: Vec<f64> = start
            .iter()
            .zip(lower.iter().zip(&upper))
            .map(|(x, (lo, hi))| x.clamp(*lo, *hi))
            .collect();
        let mut cur_val = objective.eval(&cur);
        for step in GRID_STEPS {
            for _ in 0..MAX_SWEEPS {
                let mut improved = false;
                for c in 0..cur.len() {
                    let origin = cur[c];
                    let mut best_here = (origin, cur_val);
                    for off in GRID_OFFSETS {
                        let cand = (origin + off * step).clamp(lower[c], upper[c]);
                        if cand == origin {
                            continue;
                        }
                        cur[c] = cand;
                        let val = objective.eval(&cur);
                        if val > best_here.1 {
                            best_here = (cand, val);
                        }
                    }
                    cur[c] = best_here.0;
                    if best_here.1 > cur_val {
                        cur_val = best_here.1;
                        improved = true;
                    }
                }
                if !improved {
                    break;
                }
            }
        }
        if cur_val > best_val {
            best_val = cur_val;
            best = cur;
        }
    }
    Hyperparams::from_log(&best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_values() {
        assert_eq!(kernel(&[0.3, 0.1], &[0.3, 0.1], 2.5, &[1.0, 1.0]).unwrap(), 2.5);
        let k = kernel(&[0.0, 0.0], &[0.7, 0.0], 1.0, &[0.7, 3.0]).unwrap();
        assert!((k - (-0.5f64).exp()).abs() < 1e-15);
        assert!(matches!(
            kernel(&[0.0], &[0.0, 1.0], 1.0, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(kernel(&[0.0], &[1.0], 1.0, &[0.0]).is_err());
    }

    #[test]
    fn kernel_is_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let l: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..3.0)).collect();
            let k1 = kernel(&a, &b, 1.7, &l).unwrap();
            assert_eq!(k1, kernel(&b, &a, 1.7, &l).unwrap());
            assert!(k1 > 0.0 && k1 <= 1.7);
        }
    }

    #[test]
    fn single_point_interpolates() {
        let x = vec![vec![0.2, -0.4, 1.0]];
        let m = GpModel::fit(&x, &[0.37], true).unwrap();
        let (mean, _) = m.posterior(&x[0]).unwrap();
        assert!((mean - 0.37).abs() < 1e-8);
    }

    #[test]
    fn far_query_recovers_prior() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![0.3, 1.0]];
        let y = [0.1, -0.2, 0.4];
        let hyper = Hyperparams {
            signal_variance: 0.8,
            length_scales: vec![0.5, 0.5],
            noise_variance: JITTER,
        };
        let m = GpModel::fit_with(&x, &y, hyper).unwrap();
        // 0.5 length scales in standardized units; 1e3 raw units is far beyond 20 of them
        let (mean, std) = m.posterior(&[1e3, -1e3]).unwrap();
        assert!((mean - m.prior_mean()).abs() < 1e-6);
        assert!((std - 0.8f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn training_point_posterior() {
        let x = vec![vec![0.0], vec![5.0], vec![10.0]];
        let y = [1.0, -1.0, 0.5];
        let hyper = Hyperparams {
            signal_variance: 1.0,
            length_scales: vec![0.3],
            noise_variance: JITTER,
        };
        let m = GpModel::fit_with(&x, &y, hyper).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let (mean, std) = m.posterior(xi).unwrap();
            assert!((mean - yi).abs() < 1e-5);
            let (_, mid_std) = m.posterior(&[xi[0] + 2.5]).unwrap();
            assert!(std <= mid_std);
        }
    }

    #[test]
    fn prior_model_returns_prior() {
        let hyper = Hyperparams::initial(2, 1.0);
        let m = GpModel::prior(2, hyper, 0.25).unwrap();
        assert_eq!(m.posterior(&[0.1, 0.2]).unwrap(), (0.25, 1.0));
    }

    #[test]
    fn posterior_dimension_check() {
        let m = GpModel::fit(&[vec![0.0, 1.0]], &[1.0], false).unwrap();
        assert!(matches!(m.posterior(&[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn conflicting_duplicates_escalate_jitter() {
        let x = vec![vec![0.5], vec![0.5], vec![1.0]];
        let hyper = Hyperparams {
            signal_variance: 1.0,
            length_scales: vec![1.0],
            noise_variance: 0.0,
        };
        let m = GpModel::fit_with(&x, &[0.0, 1.0, 0.3], hyper).unwrap();
        assert!(m.noise_variance_used() >= JITTER);
        let (mean, _) = m.posterior(&[0.5]).unwrap();
        assert!(mean.is_finite());
    }

    #[test]
    fn optimization_never_worsens_likelihood() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..5 {
            let n = 8 + trial * 3;
            let x: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            let y: Vec<f64> = x
                .iter()
                .map(|p| (3.0 * p[0]).sin() + 0.1 * p[1] + rng.random_range(-0.05..0.05))
                .collect();
            let fixed = GpModel::fit(&x, &y, false).unwrap();
            let tuned = GpModel::fit(&x, &y, true).unwrap();
            assert!(tuned.log_marginal_likelihood() >= fixed.log_marginal_likelihood() - 1e-9);
        }
    }

    #[test]
    fn ucb_definition() {
        let x = vec![vec![0.0], vec![1.0]];
        let m = GpModel::fit(&x, &[0.2, 0.4], false).unwrap();
        let w = [0.4];
        let (mean, std) = m.posterior(&w).unwrap();
        assert_eq!(ucb(&m, &w, &AcquisitionConfig::new(0.0).unwrap()).unwrap(), mean);
        assert_eq!(ucb(&m, &w, &AcquisitionConfig::default()).unwrap(), mean + 0.1 * std);
        assert!(std > 0.0);
        let lo = ucb(&m, &w, &AcquisitionConfig::new(0.5).unwrap()).unwrap();
        let hi = ucb(&m, &w, &AcquisitionConfig::new(0.6).unwrap()).unwrap();
        assert!(hi > lo);
        assert!(AcquisitionConfig::new(-0.1).is_err());
    }
}
