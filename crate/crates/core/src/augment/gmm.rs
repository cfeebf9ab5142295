//! Diagonal-covariance Gaussian mixture models fitted by EM.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Diagonal covariances, one vector per component.
    pub variances: Vec<Vec<f64>>,
}

impl GmmModel {
    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Analytic mixture mean, per dimension.
    pub fn mixture_mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (w, mean) in self.weights.iter().zip(&self.means) {
            for (o, m) in out.iter_mut().zip(mean) {
                *o += w * m;
            }
        }
        out
    }

    /// Mean log-likelihood of `data` under the model.
    pub fn mean_log_likelihood(&self, data: &[Vec<f64>]) -> f64 {
        let consts = self.log_norm_consts();
        let mut scratch = vec![0.0; self.num_components()];
        let total: f64 = data
            .iter()
            .map(|x| self.log_joint(x, &consts, &mut scratch))
            .sum();
        total / data.len() as f64
    }

    fn log_norm_consts(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.variances)
            .map(|(w, var)| {
                let log_det: f64 = var.iter().map(|v| LN_2PI + v.ln()).sum();
                w.ln() - 0.5 * log_det
            })
            .collect()
    }

    /// Fills `log_r` with ln(w_k N(x|k)) and returns their log-sum-exp.
    fn log_joint(&self, x: &[f64], consts: &[f64], log_r: &mut [f64]) -> f64 {
        for (k, lr) in log_r.iter_mut().enumerate() {
            if consts[k] == f64::NEG_INFINITY {
                *lr = f64::NEG_INFINITY;
                continue;
            }
            let maha: f64 = x
                .iter()
                .zip(&self.means[k])
                .zip(&self.variances[k])
                .map(|((xi, mi), vi)| (xi - mi) * (xi - mi) / vi)
                .sum();
            *lr = consts[k] - 0.5 * maha;
        }
        log_sum_exp(log_r)
    }

    /// Writes `component,weight,mean_0..,var_0..` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let d = self.dim();
        let mut out = String::from("component,weight");
        for i in 0..d {
            let _ = write!(out, ",mean_{i}");
        }
        for i in 0..d {
            let _ = write!(out, ",var_{i}");
        }
        out.push('\n');
        for k in 0..self.num_components() {
            let _ = write!(out, "{k},{}", self.weights[k]);
            for v in self.means[k].iter().chain(&self.variances[k]) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub components: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Mean log-likelihood before each M-step, plus the final value.
    pub log_likelihood_trace: Vec<f64>,
}

fn column_moments(data: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = data.len() as f64;
    let d = data[0].len();
    let mut mean = vec![0.0; d];
    for x in data {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for x in data {
        for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    (mean, var)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first centre uniform, then proportional to squared
/// distance to the nearest chosen centre.
fn seed_means(data: &[Vec<f64>], k: usize, rng: &mut SeededRng) -> Vec<Vec<f64>> {
    let mut means = vec![data[rng.below(data.len())].clone()];
    let mut nearest: Vec<f64> = data.iter().map(|x| sq_dist(x, &means[0])).collect();
    while means.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = data.len() - 1;
            for (i, d) in nearest.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.below(data.len())
        };
        let centre = data[pick].clone();
        for (n, x) in nearest.iter_mut().zip(data) {
            *n = n.min(sq_dist(x, &centre));
        }
        means.push(centre);
    }
    means
}

/// Fits a diagonal GMM with EM. Stops when the change in mean
/// log-likelihood drops below `tol` or after `max_iters` M-steps. Variances
/// are floored at `1e-6 * (per-dimension data variance + 1e-12)`.
pub fn gmm_fit(data: &[Vec<f64>], opts: &EmOptions) -> Result<GmmFit> {
    let k = opts.components;
    if k == 0 {
        return Err(Error::invalid("gmm needs at least one component"));
    }
    if data.len() < k {
        return Err(Error::invalid(format!(
            "gmm with {k} components needs at least {k} vectors, got {}",
            data.len()
        )));
    }
    let d = data[0].len();
    if d == 0 {
        return Err(Error::invalid("gmm vectors must have dimension >= 1"));
    }
    for (i, x) in data.iter().enumerate() {
        if x.len() != d {
            return Err(Error::Shape(format!("vector {i} has dimension {}, expected {d}", x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("vector {i} has a non-finite entry")));
        }
    }

    let n = data.len();
    let (_, data_var) = column_moments(data);
    let floor: Vec<f64> = data_var.iter().map(|v| 1e-6 * (v + 1e-12)).collect();
    let mut rng = SeededRng::new(opts.seed);
    let init_var: Vec<f64> = data_var.iter().zip(&floor).map(|(v, f)| v.max(*f)).collect();
    let mut model = GmmModel {
        weights: vec![1.0 / k as f64; k],
        means: seed_means(data, k, &mut rng),
        variances: vec![init_var; k],
    };

    let mut resp = vec![vec![0.0; k]; n];
    let mut trace = Vec::new();
    let mut iters = 0;
    loop {
        // E-step
        let consts = model.log_norm_consts();
        let mut total = 0.0;
        for (x, r) in data.iter().zip(resp.iter_mut()) {
            let lse = model.log_joint(x, &consts, r);
            for v in r.iter_mut() {
                *v = (*v - lse).exp();
            }
            debug_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            total += lse;
        }
        let ll = total / n as f64;
        let converged = trace
            .last()
            .is_some_and(|prev: &f64| (ll - prev).abs() < opts.tol);
        trace.push(ll);
        if converged || iters >= opts.max_iters {
            break;
        }

        // M-step
        for c in 0..k {
            let nk: f64 = resp.iter().map(|r| r[c]).sum();
            model.weights[c] = nk / n as f64;
            if nk <= f64::MIN_POSITIVE {
                continue;
            }
            let mut mean = vec![0.0; d];
            for (x, r) in data.iter().zip(&resp) {
                let w = r[c];
                for (m, v) in mean.iter_mut().zip(x) {
                    *m += w * v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= nk);
            let mut var = vec![0.0; d];
            for (x, r) in data.iter().zip(&resp) {
                let w = r[c];
                for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                    *s += w * (v - m) * (v - m);
                }
            }
            for (s, f) in var.iter_mut().zip(&floor) {
                *s = (*s / nk).max(*f);
            }
            model.means[c] = mean;
            model.variances[c] = var;
        }
        iters += 1;
    }
    Ok(GmmFit {
        model,
        log_likelihood_trace: trace,
    })
}

/// Draws `n` vectors: component by weight, then each dimension from
/// N(mean, sqrt(variance)).
pub fn gmm_sample(model: &GmmModel, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = SeededRng::new(seed);
    let total: f64 = model.weights.iter().sum();
    (0..n)
        .map(|_| {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut k = model.num_components() - 1;
            for (i, w) in model.weights.iter().enumerate() {
                acc += w;
                if acc > target {
                    k = i;
                    break;
                }
            }
            model.means[k]
                .iter()
                .zip(&model.variances[k])
                .map(|(m, v)| m + v.sqrt() * rng.normal())
                .collect()
        })
        .collect()
}
