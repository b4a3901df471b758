#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use perimit::gp::GpModel;

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// Solves `a x = b` for every column of `b` by Gauss-Jordan elimination in
/// exact rational arithmetic.
pub fn solve_exact(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<BigRational>> {
    let n = a.len();
    let m = b[0].len();
    let mut rows: Vec<Vec<BigRational>> = (0..n)
        .map(|i| a[i].iter().chain(&b[i]).map(|&v| exact(v)).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&i| !rows[i][col].is_zero()).expect("nonsingular");
        rows.swap(col, pivot);
        let d = rows[col][col].clone();
        for v in rows[col].iter_mut() {
            *v /= d.clone();
        }
        let (head, rest) = rows.split_at_mut(col);
        let (pivot_row, tail) = rest.split_first_mut().unwrap();
        for row in head.iter_mut().chain(tail.iter_mut()) {
            if !row[col].is_zero() {
                let f = row[col].clone();
                for (v, p) in row[col..n + m].iter_mut().zip(&pivot_row[col..n + m]) {
                    *v -= &f * p;
                }
            }
        }
    }
    rows.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Posterior mean and std of `model` at each query, from the textbook
/// equations `m0 + k* K^-1 (y - m0)` and `sigma^2 - k* K^-1 k*` solved exactly.
pub fn dense_posterior(model: &GpModel, inputs: &[Vec<f64>], targets: &[f64], queries: &[Vec<f64>]) -> Vec<(f64, f64)> {
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
    let xs: Vec<Vec<f64>> = inputs.iter().map(|v| norm(v)).collect();
    let n = xs.len();
    let kmat: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| k(&xs[i], &xs[j]) + if i == j { model.noise_variance_used() } else { 0.0 })
                .collect()
        })
        .collect();
    let m0 = targets.iter().map(|&v| exact(v)).sum::<BigRational>() / BigRational::from_integer(BigInt::from(n));
    let m0f = m0.to_f64().unwrap();
    let qs: Vec<Vec<f64>> = queries.iter().map(|w| norm(w)).collect();
    let kstar: Vec<Vec<f64>> = qs.iter().map(|q| xs.iter().map(|a| k(a, q)).collect()).collect();
    let rhs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            std::iter::once(targets[i] - m0f)
                .chain(kstar.iter().map(|kv| kv[i]))
                .collect()
        })
        .collect();
    let sol = solve_exact(&kmat, &rhs);
    kstar
        .iter()
        .enumerate()
        .map(|(c, kv)| {
            let dot = |col: usize| (0..n).map(|i| exact(kv[i]) * &sol[i][col]).sum::<BigRational>();
            let mean = m0.clone() + dot(0);
            let var = exact(h.signal_variance) - dot(c + 1);
            (mean.to_f64().unwrap(), var.to_f64().unwrap().max(0.0).sqrt())
        })
        .collect()
}
