//! Monte Carlo engine: one iteration trains a scorecard on a fresh training
//! sample, picks cut-offs on a validation sample and scores a test sample.
//! A run sweeps the (configuration, sample size, event rate) grid and the
//! summaries reduce each cell to quantiles.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{aggregate_iv, ConfigSpec, EventRate};
use crate::datagen::{generate_sample, make_plan, RngStream, Role, Sample, SamplingPlan};
use crate::error::{Error, Result};
use crate::metrics::{gini, optimize_cutoff, confusion, CutoffGrid, CutoffResult, MetricId};
use crate::scorecard::{estimate_woe, fit_logistic, transform, FittedModel, WoeTable, DEFAULT_THETA_ADJ};

/// Sample sizes 50, 100, ..., 500, 750, 1000, 1500, 2000, 2500.
pub fn paper_sizes() -> Vec<usize> {
    (1..=10).map(|i| i * 50).chain([750, 1000, 1500, 2000, 2500]).collect()
}

pub const PAPER_RATES: [f64; 3] = [0.01, 0.05, 0.10];
pub const DEFAULT_ITERATIONS: usize = 500;

/// Per-iteration estimation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationSettings {
    pub theta_adj: f64,
    pub grid: CutoffGrid,
}

impl Default for IterationSettings {
    fn default() -> Self {
        Self { theta_adj: DEFAULT_THETA_ADJ, grid: CutoffGrid::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub configs: Vec<ConfigSpec>,
    pub sizes: Vec<usize>,
    pub rates: Vec<f64>,
    pub iterations: usize,
    pub master_seed: u64,
    pub settings: IterationSettings,
    pub clamp: bool,
    /// Explicit event count for every sample, overriding `rates`.
    pub fixed_events: Option<usize>,
}

impl RunSpec {
    pub fn new(configs: Vec<ConfigSpec>, master_seed: u64) -> Self {
        Self {
            configs,
            sizes: paper_sizes(),
            rates: PAPER_RATES.to_vec(),
            iterations: DEFAULT_ITERATIONS,
            master_seed,
            settings: IterationSettings::default(),
            clamp: true,
            fixed_events: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidRunSpec("iterations must be at least 1".into()));
        }
        if self.configs.is_empty() || self.sizes.is_empty() {
            return Err(Error::InvalidRunSpec("config and size lists must be nonempty".into()));
        }
        if self.fixed_events.is_none() && self.rates.is_empty() {
            return Err(Error::InvalidRunSpec("rate list must be nonempty".into()));
        }
        for &r in &self.rates {
            EventRate::new(r)?;
        }
        for c in &self.configs {
            c.validate()?;
        }
        if !(self.settings.theta_adj >= 0.0 && self.settings.theta_adj.is_finite()) {
            return Err(Error::InvalidRunSpec("theta_adj must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Every (config, size, plan) cell, in output order.
    fn cells(&self) -> Vec<Cell<'_>> {
        let mut cells = Vec::new();
        for (ci, config) in self.configs.iter().enumerate() {
            let aiv = aggregate_iv(config).aiv;
            for &n in &self.sizes {
                let plans: Vec<(f64, Result<SamplingPlan>)> = match self.fixed_events {
                    Some(n1) => vec![(n1 as f64 / n as f64, SamplingPlan::fixed_events(n, n1))],
                    None => self
                        .rates
                        .iter()
                        .map(|&r| (r, EventRate::new(r).and_then(|rate| make_plan(n, rate, self.clamp))))
                        .collect(),
                };
                for (event_rate, plan) in plans {
                    cells.push(Cell { config_index: ci, config, aiv, n, event_rate, plan });
                }
            }
        }
        cells
    }
}

struct Cell<'a> {
    config_index: usize,
    config: &'a ConfigSpec,
    aiv: f64,
    n: usize,
    event_rate: f64,
    plan: Result<SamplingPlan>,
}

/// Outcome of one Monte Carlo iteration. Invalid iterations carry `NaN` in
/// every metric and cut-off field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub config_id: String,
    pub aiv: f64,
    pub n: usize,
    pub event_rate: f64,
    pub iteration: u64,
    pub clamped: bool,
    pub converged: bool,
    pub theta_f1: f64,
    pub theta_p4: f64,
    pub f1_val: f64,
    pub f1_test: f64,
    pub p4_val: f64,
    pub p4_test: f64,
    pub gini_val: f64,
    pub gini_test: f64,
}

impl IterationRecord {
    pub fn is_valid(&self) -> bool {
        [
            self.theta_f1,
            self.theta_p4,
            self.f1_val,
            self.f1_test,
            self.p4_val,
            self.p4_test,
            self.gini_val,
            self.gini_test,
        ]
        .iter()
        .all(|v| !v.is_nan())
    }

    fn invalid(config_id: &str, aiv: f64, n: usize, event_rate: f64, iteration: u64, clamped: bool) -> Self {
        Self {
            config_id: config_id.to_owned(),
            aiv,
            n,
            event_rate,
            iteration,
            clamped,
            converged: false,
            theta_f1: f64::NAN,
            theta_p4: f64::NAN,
            f1_val: f64::NAN,
            f1_test: f64::NAN,
            p4_val: f64::NAN,
            p4_test: f64::NAN,
            gini_val: f64::NAN,
            gini_test: f64::NAN,
        }
    }

    /// Bitwise equality, treating identical `NaN` payloads as equal.
    pub fn identical(&self, other: &Self) -> bool {
        let bits = |r: &Self| {
            [
                r.aiv, r.event_rate, r.theta_f1, r.theta_p4, r.f1_val, r.f1_test, r.p4_val, r.p4_test,
                r.gini_val, r.gini_test,
            ]
            .map(f64::to_bits)
        };
        self.config_id == other.config_id
            && (self.n, self.iteration, self.clamped, self.converged)
                == (other.n, other.iteration, other.clamped, other.converged)
            && bits(self) == bits(other)
    }
}

/// Everything estimated from the training and validation samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedScorecard {
    pub woe: WoeTable,
    pub model: FittedModel,
    pub cutoff_f1: CutoffResult,
    pub cutoff_p4: CutoffResult,
    pub gini_val: f64,
}

/// Steps 2 to 5: WoE and model from `train`, cut-offs from `val`.
pub fn train_scorecard(
    config: &ConfigSpec,
    train: &Sample,
    val: &Sample,
    settings: &IterationSettings,
) -> Result<TrainedScorecard> {
    let woe = estimate_woe(train, &config.shape(), settings.theta_adj)?;
    let model = fit_logistic(&transform(train, &woe)?, train.responses())?;
    let val_probs = model.predict_all(&transform(val, &woe)?);
    let cutoff_f1 = optimize_cutoff(&val_probs, val.responses(), MetricId::F1, &settings.grid)?;
    let cutoff_p4 = optimize_cutoff(&val_probs, val.responses(), MetricId::P4, &settings.grid)?;
    let gini_val = gini(&val_probs, val.responses())?;
    Ok(TrainedScorecard { woe, model, cutoff_f1, cutoff_p4, gini_val })
}

/// Test-split scores at the trained cut-offs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestScores {
    pub f1: f64,
    pub p4: f64,
    pub gini: f64,
}

/// Steps 6 and 7. The trained scorecard is only read.
pub fn score_test(trained: &TrainedScorecard, test: &Sample) -> Result<TestScores> {
    let probs = trained.model.predict_all(&transform(test, &trained.woe)?);
    let labels = test.responses();
    Ok(TestScores {
        f1: MetricId::F1.eval(&confusion(&probs, labels, trained.cutoff_f1.theta)?),
        p4: MetricId::P4.eval(&confusion(&probs, labels, trained.cutoff_p4.theta)?),
        gini: gini(&probs, labels)?,
    })
}

/// Steps 1 to 7 of one Monte Carlo iteration.
pub fn run_iteration(
    config: &ConfigSpec,
    plan: &SamplingPlan,
    master_seed: u64,
    iteration: u64,
    settings: &IterationSettings,
) -> Result<IterationRecord> {
    let [train, val, test] = [Role::Train, Role::Val, Role::Test]
        .map(|role| generate_sample(config, plan, &RngStream::new(master_seed, iteration, role)));
    let trained = train_scorecard(config, &train, &val, settings)?;
    let scores = score_test(&trained, &test)?;
    Ok(IterationRecord {
        config_id: config.id.clone(),
        aiv: aggregate_iv(config).aiv,
        n: plan.n,
        event_rate: plan.pi1,
        iteration,
        clamped: plan.clamped,
        converged: trained.model.converged,
        theta_f1: trained.cutoff_f1.theta,
        theta_p4: trained.cutoff_p4.theta,
        f1_val: trained.cutoff_f1.score,
        f1_test: scores.f1,
        p4_val: trained.cutoff_p4.score,
        p4_test: scores.p4,
        gini_val: trained.gini_val,
        gini_test: scores.gini,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    /// Uses the current rayon pool.
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationFailure {
    pub config_id: String,
    pub n: usize,
    pub event_rate: f64,
    pub iteration: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct GridRun {
    /// One record per (config, n, rate, iteration), sorted by that key.
    pub records: Vec<IterationRecord>,
    pub failures: Vec<IterationFailure>,
}

pub fn run_grid(spec: &RunSpec, execution: Execution) -> Result<GridRun> {
    spec.validate()?;
    let cells = spec.cells();
    let units: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..spec.iterations as u64).map(move |it| (c, it)))
        .collect();

    let work = |&(c, iteration): &(usize, u64)| -> (usize, u64, std::result::Result<IterationRecord, String>) {
        let cell = &cells[c];
        let outcome = match &cell.plan {
            Ok(plan) => run_iteration(cell.config, plan, spec.master_seed, iteration, &spec.settings)
                .map(|mut r| {
                    r.aiv = cell.aiv;
                    r.event_rate = cell.event_rate;
                    r
                })
                .map_err(|e| e.to_string()),
            Err(e) => Err(e.to_string()),
        };
        (c, iteration, outcome)
    };

    let mut results: Vec<_> = match execution {
        Execution::Serial => units.iter().map(work).collect(),
        Execution::Parallel => units.par_iter().map(work).collect(),
    };
    results.sort_by(|a, b| {
        let (ca, cb) = (&cells[a.0], &cells[b.0]);
        (ca.config_index, ca.n)
            .cmp(&(cb.config_index, cb.n))
            .then(ca.event_rate.total_cmp(&cb.event_rate))
            .then(a.1.cmp(&b.1))
    });

    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (c, iteration, outcome) in results {
        let cell = &cells[c];
        match outcome {
            Ok(r) => records.push(r),
            Err(reason) => {
                let clamped = cell.plan.as_ref().map(|p| p.clamped).unwrap_or(false);
                records.push(IterationRecord::invalid(
                    &cell.config.id,
                    cell.aiv,
                    cell.n,
                    cell.event_rate,
                    iteration,
                    clamped,
                ));
                failures.push(IterationFailure {
                    config_id: cell.config.id.clone(),
                    n: cell.n,
                    event_rate: cell.event_rate,
                    iteration,
                    reason,
                });
            }
        }
    }
    Ok(GridRun { records, failures })
}

/// Summarized quantity of an iteration record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMetric {
    F1,
    P4,
    Gini,
    ThetaF1,
    ThetaP4,
}

impl SummaryMetric {
    pub const ALL: [SummaryMetric; 5] =
        [SummaryMetric::F1, SummaryMetric::P4, SummaryMetric::Gini, SummaryMetric::ThetaF1, SummaryMetric::ThetaP4];

    fn splits(self) -> &'static [Split] {
        match self {
            SummaryMetric::ThetaF1 | SummaryMetric::ThetaP4 => &[Split::Val],
            _ => &[Split::Val, Split::Test],
        }
    }

    pub fn value(self, split: Split, r: &IterationRecord) -> f64 {
        match (self, split) {
            (SummaryMetric::F1, Split::Val) => r.f1_val,
            (SummaryMetric::F1, Split::Test) => r.f1_test,
            (SummaryMetric::P4, Split::Val) => r.p4_val,
            (SummaryMetric::P4, Split::Test) => r.p4_test,
            (SummaryMetric::Gini, Split::Val) => r.gini_val,
            (SummaryMetric::Gini, Split::Test) => r.gini_test,
            (SummaryMetric::ThetaF1, _) => r.theta_f1,
            (SummaryMetric::ThetaP4, _) => r.theta_p4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SummaryMetric::F1 => "f1",
            SummaryMetric::P4 => "p4",
            SummaryMetric::Gini => "gini",
            SummaryMetric::ThetaF1 => "theta_f1",
            SummaryMetric::ThetaP4 => "theta_p4",
        }
    }
}

impl fmt::Display for SummaryMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SummaryMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub config_id: String,
    pub aiv: f64,
    pub n: usize,
    pub event_rate: f64,
    pub metric: SummaryMetric,
    pub split: Split,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub p05: f64,
    pub p95: f64,
    pub n_iter: usize,
    pub n_nonconverged: usize,
}

/// Linear-interpolation quantile of sorted data (`h = (m - 1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    match sorted.get(lo + 1) {
        Some(&next) => sorted[lo] + (h - lo as f64) * (next - sorted[lo]),
        None => sorted[lo],
    }
}

pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

/// Summaries per cell plus the number of invalid iterations left out of each.
#[derive(Debug, Clone)]
pub struct Summary {
    pub records: Vec<SummaryRecord>,
    pub invalid: Vec<(String, usize, f64, usize)>,
}

/// Quantile summary of every (config, n, rate) cell, keeping the order in
/// which cells first appear in `records`.
pub fn summarize(records: &[IterationRecord]) -> Result<Summary> {
    let mut cells: Vec<(&str, usize, f64, Vec<&IterationRecord>)> = Vec::new();
    for r in records {
        match cells
            .iter_mut()
            .find(|c| c.0 == r.config_id && c.1 == r.n && c.2.to_bits() == r.event_rate.to_bits())
        {
            Some(cell) => cell.3.push(r),
            None => cells.push((&r.config_id, r.n, r.event_rate, vec![r])),
        }
    }

    let mut out = Vec::new();
    let mut invalid = Vec::new();
    for (config_id, n, event_rate, members) in cells {
        let valid: Vec<&IterationRecord> = members.iter().copied().filter(|r| r.is_valid()).collect();
        if valid.is_empty() {
            return Err(Error::EmptyCell(format!("{config_id}/n={n}/rate={event_rate}")));
        }
        if valid.len() < members.len() {
            invalid.push((config_id.to_owned(), n, event_rate, members.len() - valid.len()));
        }
        let n_nonconverged = valid.iter().filter(|r| !r.converged).count();
        for metric in SummaryMetric::ALL {
            for &split in metric.splits() {
                let mut values: Vec<f64> = valid.iter().map(|r| metric.value(split, r)).collect();
                values.sort_by(f64::total_cmp);
                out.push(SummaryRecord {
                    config_id: config_id.to_owned(),
                    aiv: valid[0].aiv,
                    n,
                    event_rate,
                    metric,
                    split,
                    median: quantile_sorted(&values, 0.5),
                    q25: quantile_sorted(&values, 0.25),
                    q75: quantile_sorted(&values, 0.75),
                    p05: quantile_sorted(&values, 0.05),
                    p95: quantile_sorted(&values, 0.95),
                    n_iter: valid.len(),
                    n_nonconverged,
                });
            }
        }
    }
    Ok(Summary { records: out, invalid })
}
