//! Weight-of-evidence scorecards: WoE estimation, feature transform, and the
//! maximum-likelihood logistic fit on WoE features.

use serde::{Deserialize, Serialize};

use crate::datagen::Sample;
use crate::error::{Error, Result};

pub const DEFAULT_THETA_ADJ: f64 = 0.5;

/// Linear predictors are clamped to this magnitude before the sigmoid.
pub const ETA_CLAMP: f64 = 30.0;

pub const MAX_ITERATIONS: usize = 50;
const GRADIENT_TOL: f64 = 1e-8;
const LOGLIK_TOL: f64 = 1e-10;
/// A full Newton step above this means the coefficients are still drifting,
/// as they do without bound under (quasi-)separation; such fits never count
/// as converged.
const STEP_TOL: f64 = 1e-5;
const MAX_HALVINGS: usize = 40;

/// Estimated WoE and the class counts behind it, for one predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WoeColumn {
    pub nonevent_counts: Vec<u64>,
    pub event_counts: Vec<u64>,
    pub woe: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WoeTable {
    pub theta_adj: f64,
    pub n0: u64,
    pub n1: u64,
    pub columns: Vec<WoeColumn>,
}

impl WoeTable {
    /// Estimated WoE for predictor `j` and 1-based `bin`.
    pub fn woe(&self, j: usize, bin: u32) -> Option<f64> {
        let k = (bin as usize).checked_sub(1)?;
        self.columns.get(j)?.woe.get(k).copied()
    }

    pub fn from_counts(theta_adj: f64, n0: u64, n1: u64, counts: Vec<(Vec<u64>, Vec<u64>)>) -> Result<Self> {
        if n1 == 0 {
            return Err(Error::NoEvents);
        }
        if n0 == 0 {
            return Err(Error::NoNonevents);
        }
        let columns = counts
            .into_iter()
            .map(|(nonevent_counts, event_counts)| {
                let woe = nonevent_counts
                    .iter()
                    .zip(&event_counts)
                    .map(|(&c0, &c1)| adjusted_woe(c0, n0, c1, n1, theta_adj))
                    .collect();
                WoeColumn { nonevent_counts, event_counts, woe }
            })
            .collect();
        Ok(Self { theta_adj, n0, n1, columns })
    }
}

/// `ln{ [(c0 + theta)/n0] / [(c1 + theta)/n1] }`
pub fn adjusted_woe(c0: u64, n0: u64, c1: u64, n1: u64, theta_adj: f64) -> f64 {
    (((c0 as f64 + theta_adj) / n0 as f64) / ((c1 as f64 + theta_adj) / n1 as f64)).ln()
}

/// Tallies per-bin class counts over the bins described by `shape` and turns
/// them into adjusted WoE estimates. Bins absent from the sample get counts of 0.
pub fn estimate_woe(sample: &Sample, shape: &[usize], theta_adj: f64) -> Result<WoeTable> {
    if sample.d() != shape.len() {
        return Err(Error::LengthMismatch { left: sample.d(), right: shape.len() });
    }
    let mut counts: Vec<(Vec<u64>, Vec<u64>)> =
        shape.iter().map(|&k| (vec![0; k], vec![0; k])).collect();
    let (mut n0, mut n1) = (0u64, 0u64);
    for (row, &y) in sample.rows().zip(sample.responses()) {
        if y == 1 {
            n1 += 1;
        } else {
            n0 += 1;
        }
        for (j, (&bin, (c0, c1))) in row.iter().zip(counts.iter_mut()).enumerate() {
            let k = (bin as usize)
                .checked_sub(1)
                .filter(|&k| k < shape[j])
                .ok_or(Error::BinOutOfRange { predictor: j, bin, bins: shape[j] })?;
            if y == 1 {
                c1[k] += 1;
            } else {
                c0[k] += 1;
            }
        }
    }
    WoeTable::from_counts(theta_adj, n0, n1, counts)
}

/// Row-major real feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    d: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(d: usize, data: Vec<f64>) -> Self {
        assert!(d > 0 && data.len().is_multiple_of(d), "ragged feature matrix");
        Self { d, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(1, Vec::len);
        Self::new(d, rows.iter().flatten().copied().collect())
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }
}

/// Replaces every bin label with its estimated WoE.
pub fn transform(sample: &Sample, table: &WoeTable) -> Result<Features> {
    if sample.d() != table.columns.len() {
        return Err(Error::LengthMismatch { left: sample.d(), right: table.columns.len() });
    }
    let mut data = Vec::with_capacity(sample.n() * sample.d());
    for row in sample.rows() {
        for (j, &bin) in row.iter().enumerate() {
            let w = table.woe(j, bin).ok_or(Error::BinOutOfRange {
                predictor: j,
                bin,
                bins: table.columns[j].woe.len(),
            })?;
            data.push(w);
        }
    }
    Ok(Features::new(sample.d().max(1), data))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    /// Intercept followed by one coefficient per feature.
    pub beta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub loglik: f64,
}

impl FittedModel {
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        linear_predictor(&self.beta, row)
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        predict_proba(self, row)
    }

    pub fn predict_all(&self, features: &Features) -> Vec<f64> {
        features.rows().map(|r| self.predict_proba(r)).collect()
    }
}

pub fn linear_predictor(beta: &[f64], row: &[f64]) -> f64 {
    beta[0] + beta[1..].iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
}

pub fn sigmoid(eta: f64) -> f64 {
    let eta = eta.clamp(-ETA_CLAMP, ETA_CLAMP);
    1.0 / (1.0 + (-eta).exp())
}

pub fn predict_proba(model: &FittedModel, row: &[f64]) -> f64 {
    sigmoid(model.linear_predictor(row))
}

/// Bernoulli log-likelihood `sum y ln p + (1-y) ln(1-p)` with clamped linear predictors.
pub fn log_likelihood(beta: &[f64], features: &Features, y: &[u8]) -> f64 {
    features
        .rows()
        .zip(y)
        .map(|(row, &yi)| {
            let eta = linear_predictor(beta, row).clamp(-ETA_CLAMP, ETA_CLAMP);
            // ln p = -ln(1 + e^-eta), ln(1-p) = -ln(1 + e^eta)
            if yi == 1 {
                -softplus(-eta)
            } else {
                -softplus(eta)
            }
        })
        .sum()
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Score vector `sum (y_i - p_i) * (1, x_i)`.
pub fn gradient(beta: &[f64], features: &Features, y: &[u8]) -> Vec<f64> {
    let mut g = vec![0.0; beta.len()];
    for (row, &yi) in features.rows().zip(y) {
        let r = yi as f64 - sigmoid(linear_predictor(beta, row));
        g[0] += r;
        for (gj, x) in g[1..].iter_mut().zip(row) {
            *gj += r * x;
        }
    }
    g
}

/// Observed information `sum p_i (1 - p_i) (1, x_i)(1, x_i)^T`, row-major.
fn information(beta: &[f64], features: &Features) -> Vec<f64> {
    let m = beta.len();
    let mut h = vec![0.0; m * m];
    let mut z = vec![1.0; m];
    for row in features.rows() {
        z[1..].copy_from_slice(row);
        let p = sigmoid(linear_predictor(beta, row));
        let w = p * (1.0 - p);
        for a in 0..m {
            let wa = w * z[a];
            for b in a..m {
                h[a * m + b] += wa * z[b];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            h[a * m + b] = h[b * m + a];
        }
    }
    h
}

/// Solves `h x = g` for symmetric positive semi-definite `h` by Cholesky,
/// adding a growing diagonal jitter when `h` is numerically singular.
fn solve_spd(h: &[f64], g: &[f64]) -> Vec<f64> {
    let m = g.len();
    let scale = (0..m).map(|i| h[i * m + i]).fold(0.0_f64, f64::max).max(1e-300);
    let mut jitter = 0.0;
    loop {
        if let Some(l) = cholesky(h, m, jitter) {
            let mut x = g.to_vec();
            for i in 0..m {
                for k in 0..i {
                    x[i] -= l[i * m + k] * x[k];
                }
                x[i] /= l[i * m + i];
            }
            for i in (0..m).rev() {
                for k in i + 1..m {
                    x[i] -= l[k * m + i] * x[k];
                }
                x[i] /= l[i * m + i];
            }
            return x;
        }
        jitter = if jitter == 0.0 { scale * 1e-12 } else { jitter * 10.0 };
    }
}

fn cholesky(h: &[f64], m: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = h[i * m + j];
            if i == j {
                s += jitter;
            }
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if !(s > 1e-13 * (h[i * m + i] + jitter).abs().max(1e-300)) {
                    return None;
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    Some(l)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Maximum-likelihood logistic regression by Newton's method (IRLS) from
/// `beta = 0`, with step halving whenever the log-likelihood would drop.
pub fn fit_logistic(features: &Features, y: &[u8]) -> Result<FittedModel> {
    if features.n() != y.len() {
        return Err(Error::LengthMismatch { left: features.n(), right: y.len() });
    }
    let events = y.iter().filter(|&&v| v == 1).count();
    if events == 0 || events == y.len() {
        return Err(Error::DegenerateDesign);
    }

    let mut beta = vec![0.0; features.d() + 1];
    let mut loglik = log_likelihood(&beta, features, y);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        let g = gradient(&beta, features, y);
        let h = information(&beta, features);
        let mut step = solve_spd(&h, &g);
        let settled = max_abs(&step) < STEP_TOL;
        if max_abs(&g) < GRADIENT_TOL && settled {
            converged = true;
            break;
        }
        iterations += 1;

        let mut candidate: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + s).collect();
        let mut next = log_likelihood(&candidate, features, y);
        let mut halvings = 0;
        while !(next >= loglik) && halvings < MAX_HALVINGS {
            step.iter_mut().for_each(|s| *s *= 0.5);
            candidate = beta.iter().zip(&step).map(|(b, s)| b + s).collect();
            next = log_likelihood(&candidate, features, y);
            halvings += 1;
        }
        if !(next >= loglik) {
            // no ascent left at machine precision
            converged = settled;
            break;
        }

        let delta = next - loglik;
        beta = candidate;
        loglik = next;
        if delta.abs() < LOGLIK_TOL && settled {
            converged = true;
            break;
        }
    }

    Ok(FittedModel { beta, converged, iterations, loglik })
}
