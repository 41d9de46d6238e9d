#![allow(dead_code)]

//! Reference values and brute-force oracles shared by the integration tests.
//! Nothing here calls into the code paths it is used to check.

use imbalance_lab::metrics::ConfusionMatrix;

/// Published per-predictor IVs and AIV for configurations A to D.
pub const REFERENCE_IV: [(&str, [f64; 4], f64); 4] = [
    ("A", [0.0770, 0.1288, 0.1595, 0.0112], 0.3765),
    ("B", [0.6039, 0.2200, 0.1992, 1.2638], 2.2869),
    ("C", [2.2956, 1.8659, 0.7290, 0.4726], 5.3631),
    ("D", [3.9895, 3.9542, 3.6617, 4.9046], 16.5100),
];

/// Published guideline: median F1 by event rate over AIV 0.5, 1.0, ..., 7.0.
pub const REFERENCE_GUIDELINE: [(f64, [f64; 14]); 3] = [
    (0.01, [0.06, 0.07, 0.09, 0.11, 0.13, 0.16, 0.19, 0.23, 0.27, 0.32, 0.37, 0.42, 0.47, 0.52]),
    (0.05, [0.19, 0.23, 0.27, 0.32, 0.36, 0.41, 0.47, 0.52, 0.57, 0.61, 0.65, 0.69, 0.73, 0.76]),
    (0.10, [0.28, 0.32, 0.38, 0.43, 0.48, 0.54, 0.59, 0.64, 0.68, 0.72, 0.76, 0.79, 0.81, 0.84]),
];

pub fn reference_aiv_grid() -> Vec<f64> {
    (1..=14).map(|i| i as f64 * 0.5).collect()
}

pub fn reference_points(rate: f64) -> Vec<(f64, f64)> {
    let row = REFERENCE_GUIDELINE.iter().find(|r| r.0 == rate).expect("rate").1;
    reference_aiv_grid().into_iter().zip(row).collect()
}

/// Concordant minus discordant over all event/nonevent pairs, by enumeration.
pub fn gini_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut c, mut d, mut u) = (0i64, 0i64, 0i64);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1 && labels[j] == 0 {
                u += 1;
                if scores[i] > scores[j] {
                    c += 1;
                } else if scores[i] < scores[j] {
                    d += 1;
                }
            }
        }
    }
    (c as f64 - d as f64) / u as f64
}

/// Confusion matrix by direct tally.
pub fn tally(scores: &[f64], labels: &[u8], theta: f64) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for (&s, &y) in scores.iter().zip(labels) {
        let positive = s >= theta;
        match (y, positive) {
            (1, true) => cm.tp += 1,
            (1, false) => cm.fn_ += 1,
            (_, true) => cm.fp += 1,
            (_, false) => cm.tn += 1,
        }
    }
    cm
}

pub fn f1_direct(cm: &ConfusionMatrix) -> f64 {
    let den = 2 * cm.tp + cm.fp + cm.fn_;
    if den == 0 {
        0.0
    } else {
        (2 * cm.tp) as f64 / den as f64
    }
}

pub fn p4_direct(cm: &ConfusionMatrix) -> f64 {
    let num = 4.0 * cm.tp as f64 * cm.tn as f64;
    let den = num + (cm.tp + cm.tn) as f64 * (cm.fp + cm.fn_) as f64;
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Natural log of the odds.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
