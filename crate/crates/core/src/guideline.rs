//! Attainable-performance guideline: per event rate, a logistic curve of the
//! median metric against AIV, tabulated over an AIV grid.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::curve::{fit_logistic_curve, CurveFit};
use crate::error::{Error, Result};
use crate::mc::{Split, SummaryMetric, SummaryRecord};

/// AIV grid 0.5, 1.0, ..., 7.0.
pub fn default_aiv_grid() -> Vec<f64> {
    (1..=14).map(|i| i as f64 * 0.5).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidelineRow {
    pub event_rate: f64,
    pub aiv: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidelineTable {
    pub rates: Vec<f64>,
    pub aiv_grid: Vec<f64>,
    /// `values[r][a]` for `rates[r]` and `aiv_grid[a]`.
    pub values: Vec<Vec<f64>>,
}

impl GuidelineTable {
    pub fn rows(&self) -> Vec<GuidelineRow> {
        self.rates
            .iter()
            .zip(&self.values)
            .flat_map(|(&event_rate, row)| {
                self.aiv_grid
                    .iter()
                    .zip(row)
                    .map(move |(&aiv, &predicted)| GuidelineRow { event_rate, aiv, predicted })
            })
            .collect()
    }

    pub fn get(&self, rate: f64, aiv: f64) -> Option<f64> {
        let r = self.rates.iter().position(|&x| x == rate)?;
        let a = self.aiv_grid.iter().position(|&x| x == aiv)?;
        Some(self.values[r][a])
    }

    /// Cells breaking monotonicity in AIV (within a rate) or in event rate
    /// (within an AIV), as `(rate index, aiv index)` of the later cell.
    /// Values are compared after rounding to two decimals, as rendered.
    pub fn monotonicity_violations(&self) -> Vec<(usize, usize)> {
        let round = |v: f64| (v * 100.0).round();
        let mut order: Vec<usize> = (0..self.rates.len()).collect();
        order.sort_by(|&a, &b| self.rates[a].total_cmp(&self.rates[b]));
        let mut out = Vec::new();
        for (r, row) in self.values.iter().enumerate() {
            for a in 1..row.len() {
                if round(row[a]) < round(row[a - 1]) {
                    out.push((r, a));
                }
            }
        }
        for w in order.windows(2) {
            for a in 0..self.aiv_grid.len() {
                if round(self.values[w[1]][a]) < round(self.values[w[0]][a]) {
                    out.push((w[1], a));
                }
            }
        }
        out
    }

    /// Plain-text table with values rounded to two decimals.
    pub fn render(&self) -> String {
        let mut s = String::from("rate  ");
        for a in &self.aiv_grid {
            let _ = write!(s, "{a:>6.2}");
        }
        s.push('\n');
        for (rate, row) in self.rates.iter().zip(&self.values) {
            let _ = write!(s, "{:<6}", format!("{}%", rate * 100.0));
            for v in row {
                let _ = write!(s, "{v:>6.2}");
            }
            s.push('\n');
        }
        s
    }
}

pub fn guideline_table(fits: &[(f64, CurveFit)], aiv_grid: &[f64], rates: &[f64]) -> Result<GuidelineTable> {
    let values = rates
        .iter()
        .map(|&rate| {
            let fit = fits.iter().find(|(r, _)| *r == rate).map(|(_, f)| f).ok_or(Error::MissingFit(rate))?;
            Ok(aiv_grid.iter().map(|&a| fit.eval(a)).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(GuidelineTable { rates: rates.to_vec(), aiv_grid: aiv_grid.to_vec(), values })
}

/// `(aiv, median)` points per event rate for one sample size, metric and split,
/// with rates in ascending order.
pub fn curve_points(
    summary: &[SummaryRecord],
    n: usize,
    metric: SummaryMetric,
    split: Split,
) -> Vec<(f64, Vec<(f64, f64)>)> {
    let mut by_rate: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for s in summary.iter().filter(|s| s.n == n && s.metric == metric && s.split == split) {
        match by_rate.iter_mut().find(|(r, _)| *r == s.event_rate) {
            Some((_, pts)) => pts.push((s.aiv, s.median)),
            None => by_rate.push((s.event_rate, vec![(s.aiv, s.median)])),
        }
    }
    by_rate.sort_by(|a, b| a.0.total_cmp(&b.0));
    by_rate
}

/// Fits one curve per event rate found in `summary` and tabulates it over `aiv_grid`.
pub fn guideline_from_summary(
    summary: &[SummaryRecord],
    n: usize,
    metric: SummaryMetric,
    split: Split,
    aiv_grid: &[f64],
) -> Result<(Vec<(f64, CurveFit)>, GuidelineTable)> {
    let points = curve_points(summary, n, metric, split);
    if points.is_empty() {
        return Err(Error::InsufficientPoints(0));
    }
    let fits = points
        .iter()
        .map(|(rate, pts)| Ok((*rate, fit_logistic_curve(pts)?)))
        .collect::<Result<Vec<_>>>()?;
    let rates: Vec<f64> = fits.iter().map(|f| f.0).collect();
    let table = guideline_table(&fits, aiv_grid, &rates)?;
    Ok((fits, table))
}
