//! Threshold-dependent classification metrics, the Gini coefficient
//! (Somers' D), and grid search for the optimal cut-off.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Relabels events as nonevents and vice versa.
    pub fn swapped(&self) -> Self {
        Self { tp: self.tn, fp: self.fn_, fn_: self.fp, tn: self.tp }
    }
}

fn check_lengths(probs: &[f64], labels: &[u8]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::LengthMismatch { left: probs.len(), right: labels.len() });
    }
    Ok(())
}

/// Tallies predictions against labels; an observation is predicted positive
/// when its probability is at least `theta`.
pub fn confusion(probs: &[f64], labels: &[u8], theta: f64) -> Result<ConfusionMatrix> {
    check_lengths(probs, labels)?;
    if probs.is_empty() {
        return Err(Error::LengthMismatch { left: 0, right: 1 });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &y) in probs.iter().zip(labels) {
        match (y == 1, p >= theta) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// `2 TP / (2 TP + FP + FN)`, or 0 when nothing is positive in either sense.
pub fn f1(cm: &ConfusionMatrix) -> f64 {
    let num = 2 * cm.tp;
    let den = num + cm.fp + cm.fn_;
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `4 TP TN / (4 TP TN + (TP + TN)(FP + FN))`, or 0 when the denominator vanishes.
pub fn p4(cm: &ConfusionMatrix) -> f64 {
    let num = 4 * cm.tp as u128 * cm.tn as u128;
    let den = num + (cm.tp + cm.tn) as u128 * (cm.fp + cm.fn_) as u128;
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricId {
    F1,
    P4,
}

impl MetricId {
    pub fn eval(self, cm: &ConfusionMatrix) -> f64 {
        match self {
            MetricId::F1 => f1(cm),
            MetricId::P4 => p4(cm),
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricId::F1 => "f1",
            MetricId::P4 => "p4",
        })
    }
}

impl FromStr for MetricId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "f1" => Ok(MetricId::F1),
            "p4" => Ok(MetricId::P4),
            other => Err(format!("unknown metric `{other}` (expected f1 or p4)")),
        }
    }
}

/// Concordant/discordant pair counts between events and nonevents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub concordant: u64,
    pub discordant: u64,
    pub mixed: u64,
}

impl PairCounts {
    pub fn somers_d(&self) -> f64 {
        (self.concordant as f64 - self.discordant as f64) / self.mixed as f64
    }
}

/// Pair counts by sorting scores and accumulating class counts across tie
/// groups, in `O(n log n)`.
pub fn concordance(scores: &[f64], labels: &[u8]) -> Result<PairCounts> {
    check_lengths(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let events = labels.iter().filter(|&&y| y == 1).count() as u64;
    let nonevents = labels.len() as u64 - events;
    if events == 0 || nonevents == 0 {
        return Err(Error::SingleClass);
    }

    let (mut concordant, mut discordant) = (0u64, 0u64);
    let mut nonevents_below = 0u64;
    let mut start = 0;
    while start < order.len() {
        let value = scores[order[start]];
        let mut end = start;
        let (mut group_events, mut group_nonevents) = (0u64, 0u64);
        while end < order.len() && scores[order[end]] == value {
            if labels[order[end]] == 1 {
                group_events += 1;
            } else {
                group_nonevents += 1;
            }
            end += 1;
        }
        let nonevents_above = nonevents - nonevents_below - group_nonevents;
        concordant += group_events * nonevents_below;
        discordant += group_events * nonevents_above;
        nonevents_below += group_nonevents;
        start = end;
    }
    Ok(PairCounts { concordant, discordant, mixed: events * nonevents })
}

/// Gini coefficient (Somers' D of the scores with respect to the labels).
/// Tied scores count towards the mixed-pair total only.
pub fn gini(scores: &[f64], labels: &[u8]) -> Result<f64> {
    Ok(concordance(scores, labels)?.somers_d())
}

/// Strictly increasing cut-off grid inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffGrid(Vec<f64>);

impl CutoffGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if points.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::InvalidGrid("grid points must lie in (0, 1)".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
        }
        Ok(Self(points))
    }

    /// `{1/steps, 2/steps, ..., (steps-1)/steps}`
    pub fn uniform(steps: u32) -> Result<Self> {
        Self::new((1..steps).map(|i| i as f64 / steps as f64).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }
}

impl Default for CutoffGrid {
    /// `0.001, 0.002, ..., 0.999`
    fn default() -> Self {
        Self::uniform(1000).expect("static grid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffResult {
    pub theta: f64,
    pub score: f64,
    pub metric: MetricId,
}

/// Confusion matrix at every grid point, computed from one sort of the scores.
/// Each entry equals `confusion(probs, labels, theta)` exactly.
pub fn confusion_sweep(probs: &[f64], labels: &[u8], grid: &CutoffGrid) -> Result<Vec<ConfusionMatrix>> {
    check_lengths(probs, labels)?;
    let mut pairs: Vec<(f64, u8)> = probs.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // events_below[i] = events among the i smallest scores
    let mut events_below = Vec::with_capacity(pairs.len() + 1);
    events_below.push(0u64);
    for &(_, y) in &pairs {
        events_below.push(events_below.last().unwrap() + u64::from(y == 1));
    }
    let n = pairs.len() as u64;
    let events = *events_below.last().unwrap();

    Ok(grid
        .points()
        .iter()
        .map(|&theta| {
            let below = pairs.partition_point(|&(p, _)| !(p >= theta));
            let fn_ = events_below[below];
            let tn = below as u64 - fn_;
            let tp = events - fn_;
            let fp = n - below as u64 - tp;
            ConfusionMatrix { tp, fp, fn_, tn }
        })
        .collect())
}

/// Smallest grid point maximizing the metric.
pub fn optimize_cutoff(probs: &[f64], labels: &[u8], metric: MetricId, grid: &CutoffGrid) -> Result<CutoffResult> {
    if probs.is_empty() {
        return Err(Error::LengthMismatch { left: 0, right: labels.len().max(1) });
    }
    let sweep = confusion_sweep(probs, labels, grid)?;
    let mut best = CutoffResult { theta: grid.points()[0], score: f64::NEG_INFINITY, metric };
    for (&theta, cm) in grid.points().iter().zip(&sweep) {
        let score = metric.eval(cm);
        if score > best.score {
            best = CutoffResult { theta, score, metric };
        }
    }
    Ok(best)
}
