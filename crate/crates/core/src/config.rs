//! Data-generating configurations and their population-level quantities.
//!
//! A configuration is a list of binned predictors, each described by its two
//! class-conditional distributions. Predictors are conditionally independent
//! given the response, so the joint distribution within each class is the
//! product of the per-predictor conditionals.
//!
//! Predictor indices are 0-based (they index into `ConfigSpec::predictors`);
//! bin labels are 1-based, matching the labels stored in generated samples.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::RngStream;
use crate::error::{Error, Result};

/// Smallest probability allowed in any class-conditional distribution.
pub const MIN_PROBABILITY: f64 = 1e-6;

/// Smallest probability produced by [`synthesize_config`].
pub const MIN_SYNTH_PROBABILITY: f64 = 1e-4;

/// Largest number of joint cells [`aiv_joint`] will enumerate.
pub const JOINT_CELL_LIMIT: u128 = 1_000_000;

const SUM_TOLERANCE: f64 = 1e-9;

/// Maximum number of contrast redraws per predictor during synthesis.
pub const SYNTH_REDRAWS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorSpec {
    pub name: String,
    /// `P(X = k | Y = 1)` for bins `k = 1..=K`.
    pub p_event: Vec<f64>,
    /// `P(X = k | Y = 0)` for bins `k = 1..=K`.
    pub p_nonevent: Vec<f64>,
}

impl PredictorSpec {
    pub fn new(name: impl Into<String>, p_event: Vec<f64>, p_nonevent: Vec<f64>) -> Self {
        Self { name: name.into(), p_event, p_nonevent }
    }

    pub fn bins(&self) -> usize {
        self.p_event.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.p_event.len();
        if k < 2 {
            return Err(Error::InvalidConfig(format!(
                "predictor `{}` needs at least 2 bins, has {k}",
                self.name
            )));
        }
        if self.p_nonevent.len() != k {
            return Err(Error::InvalidConfig(format!(
                "predictor `{}`: p_event has {k} bins but p_nonevent has {}",
                self.name,
                self.p_nonevent.len()
            )));
        }
        for (label, dist) in [("p_event", &self.p_event), ("p_nonevent", &self.p_nonevent)] {
            if let Some(p) = dist.iter().find(|p| !p.is_finite() || **p < MIN_PROBABILITY) {
                return Err(Error::InvalidConfig(format!(
                    "predictor `{}`: {label} entry {p} is below the floor {MIN_PROBABILITY}",
                    self.name
                )));
            }
            let sum: f64 = dist.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::InvalidConfig(format!(
                    "predictor `{}`: {label} sums to {sum}, expected 1",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Weight of evidence `ln(P(k | Y=0) / P(k | Y=1))` of 1-based bin `bin`.
    pub fn woe(&self, bin: u32) -> Option<f64> {
        let i = (bin as usize).checked_sub(1)?;
        Some((self.p_nonevent.get(i)? / self.p_event.get(i)?).ln())
    }

    pub fn information_value(&self) -> f64 {
        self.p_event
            .iter()
            .zip(&self.p_nonevent)
            .map(|(pe, pn)| (pn - pe) * (pn / pe).ln())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigSpec {
    pub id: String,
    pub predictors: Vec<PredictorSpec>,
}

impl ConfigSpec {
    pub fn new(id: impl Into<String>, predictors: Vec<PredictorSpec>) -> Result<Self> {
        let config = Self { id: id.into(), predictors };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.predictors.is_empty() {
            return Err(Error::InvalidConfig(format!("config `{}` has no predictors", self.id)));
        }
        for (i, p) in self.predictors.iter().enumerate() {
            p.validate()?;
            if self.predictors[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::InvalidConfig(format!(
                    "config `{}`: duplicate predictor name `{}`",
                    self.id, p.name
                )));
            }
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.predictors.len()
    }

    /// Bin count per predictor.
    pub fn shape(&self) -> Vec<usize> {
        self.predictors.iter().map(PredictorSpec::bins).collect()
    }

    fn predictor(&self, j: usize) -> Result<&PredictorSpec> {
        self.predictors
            .get(j)
            .ok_or(Error::PredictorOutOfRange { index: j, d: self.d() })
    }
}

/// Event rate `pi1`; the nonevent rate is `1 - pi1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EventRate(f64);

impl EventRate {
    pub fn new(pi1: f64) -> Result<Self> {
        if pi1 > 0.0 && pi1 < 1.0 {
            Ok(Self(pi1))
        } else {
            Err(Error::InvalidEventRate(pi1))
        }
    }

    pub fn pi1(self) -> f64 {
        self.0
    }

    pub fn pi0(self) -> f64 {
        1.0 - self.0
    }

    pub fn logit(self) -> f64 {
        (self.0 / (1.0 - self.0)).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IvReport {
    pub iv: Vec<f64>,
    pub aiv: f64,
}

pub fn population_woe(config: &ConfigSpec, j: usize, bin: u32) -> Result<f64> {
    let p = config.predictor(j)?;
    p.woe(bin)
        .ok_or(Error::BinOutOfRange { predictor: j, bin, bins: p.bins() })
}

pub fn information_value(config: &ConfigSpec, j: usize) -> Result<f64> {
    Ok(config.predictor(j)?.information_value())
}

/// Per-predictor IVs and their sum, which is the AIV under conditional independence.
pub fn aggregate_iv(config: &ConfigSpec) -> IvReport {
    let iv: Vec<f64> = config.predictors.iter().map(PredictorSpec::information_value).collect();
    let aiv = iv.iter().sum();
    IvReport { iv, aiv }
}

/// AIV by direct enumeration of every joint cell, using product-form
/// class-conditional probabilities.
pub fn aiv_joint(config: &ConfigSpec) -> Result<f64> {
    let shape = config.shape();
    let cells = shape.iter().map(|&k| k as u128).product::<u128>();
    if cells > JOINT_CELL_LIMIT {
        return Err(Error::EnumerationBound { cells, limit: JOINT_CELL_LIMIT });
    }
    let mut index = vec![0usize; shape.len()];
    let mut total = 0.0;
    'cells: loop {
        let (mut p1, mut p0) = (1.0, 1.0);
        for (pred, &k) in config.predictors.iter().zip(&index) {
            p1 *= pred.p_event[k];
            p0 *= pred.p_nonevent[k];
        }
        total += (p0 - p1) * (p0 / p1).ln();

        for (slot, &k) in index.iter_mut().zip(&shape).rev() {
            *slot += 1;
            if *slot < k {
                continue 'cells;
            }
            *slot = 0;
        }
        break;
    }
    Ok(total)
}

/// Class-weighted likelihood masses of a cell under Bayes' rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    /// `pi1 * prod_j P(x_j | Y=1)`
    pub event_mass: f64,
    /// `pi0 * prod_j P(x_j | Y=0)`
    pub nonevent_mass: f64,
}

impl Posterior {
    pub fn probability(&self) -> f64 {
        self.event_mass / (self.event_mass + self.nonevent_mass)
    }

    /// Posterior log odds, evaluated from the masses so it stays exact when the
    /// probability itself rounds towards 0 or 1.
    pub fn logit(&self) -> f64 {
        self.event_mass.ln() - self.nonevent_mass.ln()
    }
}

pub fn bayes_posterior(config: &ConfigSpec, rate: EventRate, x: &[u32]) -> Result<Posterior> {
    if x.len() != config.d() {
        return Err(Error::LengthMismatch { left: x.len(), right: config.d() });
    }
    let mut event_mass = rate.pi1();
    let mut nonevent_mass = rate.pi0();
    for (j, (pred, &bin)) in config.predictors.iter().zip(x).enumerate() {
        let k = (bin as usize)
            .checked_sub(1)
            .filter(|&k| k < pred.bins())
            .ok_or(Error::BinOutOfRange { predictor: j, bin, bins: pred.bins() })?;
        event_mass *= pred.p_event[k];
        nonevent_mass *= pred.p_nonevent[k];
    }
    Ok(Posterior { event_mass, nonevent_mass })
}

/// Mixture `p0 + lambda * (p1 - p0)` used as the event conditional during synthesis.
pub fn mix(p0: &[f64], p1: &[f64], lambda: f64) -> Vec<f64> {
    p0.iter().zip(p1).map(|(a, b)| (1.0 - lambda) * a + lambda * b).collect()
}

/// IV of the pair `(p_event = mix(p0, p1, lambda), p_nonevent = p0)`.
pub fn mixture_iv(p0: &[f64], p1: &[f64], lambda: f64) -> f64 {
    mix(p0, p1, lambda)
        .iter()
        .zip(p0)
        .map(|(pe, pn)| (pn - pe) * (pn / pe).ln())
        .sum()
}

/// Random distribution over `k` bins with every entry at least
/// [`MIN_SYNTH_PROBABILITY`]. Larger `sharpness` concentrates more mass on fewer bins.
pub fn draw_distribution<R: Rng + ?Sized>(rng: &mut R, k: usize, sharpness: f64) -> Vec<f64> {
    let weights: Vec<f64> = (0..k).map(|_| rng.gen::<f64>().powf(sharpness)).collect();
    let total: f64 = weights.iter().sum();
    let free = 1.0 - k as f64 * MIN_SYNTH_PROBABILITY;
    weights
        .iter()
        .map(|w| {
            let share = if total > 0.0 { w / total } else { 1.0 / k as f64 };
            MIN_SYNTH_PROBABILITY + free * share
        })
        .collect()
}

/// Builds a configuration whose AIV lies within `tol` of `target_aiv`, with the
/// target split equally over `bins.len()` predictors.
///
/// Each predictor keeps a random baseline `p0` as its nonevent conditional and
/// uses `mix(p0, p1, lambda)` as its event conditional. The IV grows
/// monotonically in `lambda`, so `lambda` is found by bisection. When the
/// contrast `p1` cannot reach the per-predictor target even at `lambda = 1`,
/// it is redrawn with sharper mass concentration.
pub fn synthesize_config(
    id: impl Into<String>,
    bins: &[usize],
    target_aiv: f64,
    tol: f64,
    stream: &RngStream,
) -> Result<ConfigSpec> {
    if bins.is_empty() {
        return Err(Error::InvalidConfig("synthesis needs at least one predictor".into()));
    }
    if let Some(&k) = bins.iter().find(|&&k| k < 2) {
        return Err(Error::InvalidConfig(format!("every predictor needs at least 2 bins, got {k}")));
    }
    if !target_aiv.is_finite() || target_aiv < 0.0 {
        return Err(Error::InvalidConfig(format!("target AIV must be >= 0, got {target_aiv}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be > 0, got {tol}")));
    }

    let mut rng = stream.rng();
    let per_predictor = target_aiv / bins.len() as f64;
    let mut predictors = Vec::with_capacity(bins.len());

    for (j, &k) in bins.iter().enumerate() {
        let p0 = draw_distribution(&mut rng, k, 1.0);
        let mut chosen = None;
        for redraw in 0..SYNTH_REDRAWS {
            let sharpness = 1.0 + redraw as f64;
            let p1 = draw_distribution(&mut rng, k, sharpness);
            if mixture_iv(&p0, &p1, 1.0) >= per_predictor {
                chosen = Some(p1);
                break;
            }
        }
        let p1 = chosen.ok_or_else(|| Error::TargetUnreachable {
            target: target_aiv,
            bins: bins.to_vec(),
            redraws: SYNTH_REDRAWS,
        })?;

        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mixture_iv(&p0, &p1, mid) < per_predictor {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        let lambda = if per_predictor == 0.0 { 0.0 } else { hi };
        predictors.push(PredictorSpec::new(format!("X{}", j + 1), mix(&p0, &p1, lambda), p0));
    }

    let config = ConfigSpec::new(id, predictors)?;
    let aiv = aggregate_iv(&config).aiv;
    if (aiv - target_aiv).abs() > tol {
        return Err(Error::TargetUnreachable {
            target: target_aiv,
            bins: bins.to_vec(),
            redraws: SYNTH_REDRAWS,
        });
    }
    Ok(config)
}

fn predictor(name: &str, p_event: &[f64], p_nonevent: &[f64]) -> PredictorSpec {
    PredictorSpec::new(name, p_event.to_vec(), p_nonevent.to_vec())
}

/// Weak association.
pub fn config_a() -> ConfigSpec {
    ConfigSpec {
        id: "A".into(),
        predictors: vec![
            predictor("X1", &[0.40, 0.35, 0.25], &[0.30, 0.33, 0.37]),
            predictor("X2", &[0.20, 0.35, 0.32, 0.13], &[0.10, 0.33, 0.34, 0.23]),
            predictor("X3", &[0.10, 0.50, 0.25, 0.15], &[0.15, 0.60, 0.20, 0.05]),
            predictor("X4", &[0.50, 0.30, 0.15, 0.05], &[0.55, 0.28, 0.13, 0.04]),
        ],
    }
}

/// Weak to moderate association, close to a typical credit portfolio.
pub fn config_b() -> ConfigSpec {
    ConfigSpec {
        id: "B".into(),
        predictors: vec![
            predictor("X1", &[0.38, 0.51, 0.11], &[0.08, 0.70, 0.22]),
            predictor("X2", &[0.18, 0.34, 0.29, 0.19], &[0.05, 0.33, 0.32, 0.30]),
            predictor("X3", &[0.08, 0.47, 0.28, 0.17], &[0.12, 0.62, 0.20, 0.06]),
            predictor("X4", &[0.32, 0.60, 0.06, 0.02], &[0.10, 0.40, 0.20, 0.30]),
        ],
    }
}

/// Moderate to strong association.
pub fn config_c() -> ConfigSpec {
    ConfigSpec {
        id: "C".into(),
        predictors: vec![
            predictor("X1", &[0.75, 0.15, 0.10], &[0.15, 0.10, 0.75]),
            predictor("X2", &[0.05, 0.10, 0.15, 0.70], &[0.55, 0.15, 0.10, 0.20]),
            predictor("X3", &[0.05, 0.25, 0.60, 0.10], &[0.20, 0.50, 0.27, 0.03]),
            predictor("X4", &[0.09, 0.10, 0.15, 0.66], &[0.30, 0.20, 0.10, 0.40]),
        ],
    }
}

/// Very strong association.
pub fn config_d() -> ConfigSpec {
    ConfigSpec {
        id: "D".into(),
        predictors: vec![
            predictor("X1", &[0.80, 0.15, 0.05], &[0.05, 0.20, 0.75]),
            predictor("X2", &[0.80, 0.10, 0.07, 0.03], &[0.07, 0.08, 0.15, 0.70]),
            predictor("X3", &[0.10, 0.05, 0.15, 0.70], &[0.80, 0.10, 0.07, 0.03]),
            predictor("X4", &[0.03, 0.05, 0.07, 0.85], &[0.75, 0.15, 0.06, 0.04]),
        ],
    }
}

pub fn builtin_configs() -> Vec<ConfigSpec> {
    vec![config_a(), config_b(), config_c(), config_d()]
}

pub fn builtin(id: &str) -> Option<ConfigSpec> {
    match id {
        "A" => Some(config_a()),
        "B" => Some(config_b()),
        "C" => Some(config_c()),
        "D" => Some(config_d()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Role;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn builtins_are_valid() {
        for c in builtin_configs() {
            c.validate().unwrap();
            assert_eq!(c.shape(), vec![3, 4, 4, 4]);
        }
    }

    #[test]
    fn woe_examples() {
        let a = config_a();
        assert!(close(population_woe(&a, 0, 1).unwrap(), 0.75_f64.ln(), 1e-15));
        assert!(close(population_woe(&a, 0, 1).unwrap(), -0.28768, 1e-5));
        let c = config_c();
        assert!(close(population_woe(&c, 0, 3).unwrap(), 2.01490, 1e-5));
        let flat = ConfigSpec::new("flat", vec![predictor("X", &[0.5, 0.5], &[0.5, 0.5])]).unwrap();
        assert_eq!(population_woe(&flat, 0, 2).unwrap(), 0.0);
    }

    #[test]
    fn woe_index_errors() {
        let a = config_a();
        assert!(matches!(population_woe(&a, 4, 1), Err(Error::PredictorOutOfRange { .. })));
        assert!(matches!(population_woe(&a, 0, 4), Err(Error::BinOutOfRange { .. })));
        assert!(matches!(population_woe(&a, 0, 0), Err(Error::BinOutOfRange { .. })));
        assert!(information_value(&a, 9).is_err());
    }

    #[test]
    fn iv_of_config_a() {
        let a = config_a();
        assert!(close(information_value(&a, 0).unwrap(), 0.0770, 5e-4));
        assert!(close(information_value(&a, 1).unwrap(), 0.1288, 5e-4));
        assert!(close(aggregate_iv(&a).aiv, 0.3765, 1e-3));
        assert!(close(aggregate_iv(&config_d()).aiv, 16.5100, 1e-2));
    }

    #[test]
    fn iv_zero_iff_identical_conditionals() {
        let flat = ConfigSpec::new("flat", vec![predictor("X", &[0.2, 0.8], &[0.2, 0.8])]).unwrap();
        assert_eq!(information_value(&flat, 0).unwrap(), 0.0);
        for c in builtin_configs() {
            for iv in aggregate_iv(&c).iv {
                assert!(iv > 0.0);
            }
        }
    }

    #[test]
    fn single_predictor_aiv_is_its_iv() {
        let c = ConfigSpec::new("one", vec![predictor("X", &[0.7, 0.2, 0.1], &[0.2, 0.3, 0.5])]).unwrap();
        let r = aggregate_iv(&c);
        assert_eq!(r.aiv, r.iv[0]);
        assert!(close(aiv_joint(&c).unwrap(), r.iv[0], 1e-15));
    }

    #[test]
    fn joint_matches_sum() {
        for c in builtin_configs() {
            let joint = aiv_joint(&c).unwrap();
            assert!(close(joint, aggregate_iv(&c).aiv, 1e-9), "{}: {joint}", c.id);
        }
        assert!(close(aiv_joint(&config_a()).unwrap(), 0.3765, 1e-3));
    }

    #[test]
    fn joint_enumeration_bound() {
        let preds = (0..7)
            .map(|j| predictor(&format!("X{j}"), &[0.1; 10], &[0.1; 10]))
            .collect();
        let big = ConfigSpec::new("big", preds).unwrap();
        assert!(matches!(aiv_joint(&big), Err(Error::EnumerationBound { .. })));
    }

    #[test]
    fn posterior_examples() {
        let c = ConfigSpec::new("p", vec![predictor("X", &[0.8, 0.2], &[0.2, 0.8])]).unwrap();
        let rate = EventRate::new(0.1).unwrap();
        let p = bayes_posterior(&c, rate, &[1]).unwrap().probability();
        assert!(close(p, 0.08 / 0.26, 1e-15));
        assert!(close(p, 0.30769, 1e-5));

        let flat = ConfigSpec::new(
            "flat",
            vec![
                predictor("X1", &[0.3, 0.7], &[0.3, 0.7]),
                predictor("X2", &[0.1, 0.6, 0.3], &[0.1, 0.6, 0.3]),
            ],
        )
        .unwrap();
        for x in [[1, 1], [2, 3], [1, 2]] {
            let p = bayes_posterior(&flat, rate, &x).unwrap().probability();
            assert!(close(p, 0.1, 1e-15));
        }
        assert!(bayes_posterior(&flat, rate, &[1, 4]).is_err());
        assert!(bayes_posterior(&flat, rate, &[1]).is_err());
    }

    #[test]
    fn event_rate_bounds() {
        assert!(EventRate::new(0.0).is_err());
        assert!(EventRate::new(1.0).is_err());
        assert!(EventRate::new(f64::NAN).is_err());
        assert!(close(EventRate::new(0.1).unwrap().logit(), -2.1972, 1e-4));
    }

    #[test]
    fn validation_rejects_bad_predictors() {
        let bad_sum = predictor("X", &[0.5, 0.49], &[0.5, 0.5]);
        assert!(bad_sum.validate().is_err());
        let one_bin = predictor("X", &[1.0], &[1.0]);
        assert!(one_bin.validate().is_err());
        let zero = predictor("X", &[1.0, 0.0], &[0.5, 0.5]);
        assert!(zero.validate().is_err());
        let ragged = predictor("X", &[0.5, 0.5], &[0.2, 0.3, 0.5]);
        assert!(ragged.validate().is_err());
        let dup = ConfigSpec::new(
            "dup",
            vec![predictor("X", &[0.5, 0.5], &[0.5, 0.5]), predictor("X", &[0.5, 0.5], &[0.5, 0.5])],
        );
        assert!(dup.is_err());
        assert!(ConfigSpec::new("empty", vec![]).is_err());
    }

    #[test]
    fn synthesis_hits_target() {
        let stream = RngStream::new(11, 0, Role::Synth);
        let c = synthesize_config("S", &[4, 4], 5.51, 0.05, &stream).unwrap();
        let aiv = aggregate_iv(&c).aiv;
        assert!((5.46..=5.56).contains(&aiv), "{aiv}");
        for p in &c.predictors {
            assert!(p.p_event.iter().chain(&p.p_nonevent).all(|&v| v >= MIN_SYNTH_PROBABILITY));
        }
    }

    #[test]
    fn synthesis_zero_target() {
        let stream = RngStream::new(3, 0, Role::Synth);
        let c = synthesize_config("Z", &[3, 5], 0.0, 0.01, &stream).unwrap();
        assert_eq!(aggregate_iv(&c).aiv, 0.0);
    }

    #[test]
    fn synthesis_unreachable() {
        let stream = RngStream::new(3, 0, Role::Synth);
        let err = synthesize_config("U", &[2], 40.0, 0.05, &stream).unwrap_err();
        assert!(matches!(err, Error::TargetUnreachable { .. }));
    }

    #[test]
    fn synthesis_rejects_bad_arguments() {
        let stream = RngStream::new(3, 0, Role::Synth);
        assert!(synthesize_config("U", &[], 1.0, 0.05, &stream).is_err());
        assert!(synthesize_config("U", &[1, 4], 1.0, 0.05, &stream).is_err());
        assert!(synthesize_config("U", &[4], -1.0, 0.05, &stream).is_err());
        assert!(synthesize_config("U", &[4], 1.0, 0.0, &stream).is_err());
    }

    #[test]
    fn mixture_iv_monotone_on_grid() {
        let mut rng = RngStream::new(5, 0, Role::Synth).rng();
        for sharpness in [1.0, 3.0, 10.0] {
            for k in 2..8 {
                let p0 = draw_distribution(&mut rng, k, 1.0);
                let p1 = draw_distribution(&mut rng, k, sharpness);
                let ivs: Vec<f64> = (0..=10).map(|i| mixture_iv(&p0, &p1, i as f64 / 10.0)).collect();
                assert_eq!(ivs[0], 0.0);
                assert!(ivs.windows(2).all(|w| w[1] >= w[0]), "{ivs:?}");
            }
        }
    }
}
