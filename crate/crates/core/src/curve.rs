//! Least-squares fit of a three-parameter logistic curve
//! `f(a) = L / (1 + exp(-k (a - x0)))` with `0 < L <= 1` and `k > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::quantile;

const MAX_ITERATIONS: usize = 200;
const RELATIVE_RSS_TOL: f64 = 1e-10;
const MIN_L: f64 = 1e-9;
const MIN_K: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    /// Upper asymptote.
    pub l: f64,
    /// Slope.
    pub k: f64,
    /// Midpoint.
    pub x0: f64,
    pub rss: f64,
}

impl CurveFit {
    pub fn eval(&self, a: f64) -> f64 {
        logistic(self.params(), a)
    }

    fn params(&self) -> [f64; 3] {
        [self.l, self.k, self.x0]
    }

    /// Gradient of the residual sum of squares with respect to `(L, k, x0)`.
    pub fn rss_gradient(&self, points: &[(f64, f64)]) -> [f64; 3] {
        let p = self.params();
        let mut g = [0.0; 3];
        for &(a, y) in points {
            let r = y - logistic(p, a);
            for (gi, ji) in g.iter_mut().zip(jacobian_row(p, a)) {
                *gi -= 2.0 * r * ji;
            }
        }
        g
    }

    /// Whether no parameter sits on its constraint boundary.
    pub fn is_interior(&self) -> bool {
        self.l < 1.0 && self.l > MIN_L && self.k > MIN_K
    }
}

fn logistic([l, k, x0]: [f64; 3], a: f64) -> f64 {
    l / (1.0 + (-k * (a - x0)).exp())
}

fn jacobian_row([l, k, x0]: [f64; 3], a: f64) -> [f64; 3] {
    let s = 1.0 / (1.0 + (-k * (a - x0)).exp());
    let ds = s * (1.0 - s);
    [s, l * ds * (a - x0), -l * ds * k]
}

fn rss(p: [f64; 3], points: &[(f64, f64)]) -> f64 {
    points.iter().map(|&(a, y)| (y - logistic(p, a)).powi(2)).sum()
}

fn project([l, k, x0]: [f64; 3]) -> [f64; 3] {
    [l.clamp(MIN_L, 1.0), k.max(MIN_K), x0]
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut a = [[0.0; 4]; 3];
    for i in 0..3 {
        a[i][..3].copy_from_slice(&m[i]);
        a[i][3] = b[i];
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        for row in 0..3 {
            if row != col {
                let f = a[row][col] / a[col][col];
                let pivot_row = a[col];
                for (v, p) in a[row].iter_mut().zip(pivot_row).skip(col) {
                    *v -= f * p;
                }
            }
        }
    }
    let x = [a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]];
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Damped Gauss-Newton (Levenberg-Marquardt) from one start, with
/// projection onto the constraint set after every step.
fn fit_from(start: [f64; 3], points: &[(f64, f64)]) -> Option<CurveFit> {
    let mut p = project(start);
    let mut current = rss(p, points);
    if !current.is_finite() {
        return None;
    }
    let mut damping = 1e-3;
    for _ in 0..MAX_ITERATIONS {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for &(a, y) in points {
            let j = jacobian_row(p, a);
            let r = y - logistic(p, a);
            for u in 0..3 {
                jtr[u] += j[u] * r;
                for v in 0..3 {
                    jtj[u][v] += j[u] * j[v];
                }
            }
        }

        let mut accepted = false;
        while damping < 1e16 {
            let mut m = jtj;
            for (u, row) in m.iter_mut().enumerate() {
                row[u] += damping * jtj[u][u].max(1e-12);
            }
            if let Some(delta) = solve3(m, jtr) {
                let trial = project([p[0] + delta[0], p[1] + delta[1], p[2] + delta[2]]);
                let next = rss(trial, points);
                if next.is_finite() && next <= current {
                    let change = (current - next) / current.max(f64::MIN_POSITIVE);
                    p = trial;
                    current = next;
                    damping = (damping / 3.0).max(1e-12);
                    accepted = true;
                    if change < RELATIVE_RSS_TOL {
                        return Some(CurveFit { l: p[0], k: p[1], x0: p[2], rss: current });
                    }
                    break;
                }
            }
            damping *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    Some(CurveFit { l: p[0], k: p[1], x0: p[2], rss: current })
}

/// Best least-squares logistic curve through `(aiv, median)` points over a
/// grid of starting values.
pub fn fit_logistic_curve(points: &[(f64, f64)]) -> Result<CurveFit> {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if points.len() < 4 || xs.len() != points.len() || points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::InsufficientPoints(xs.len()));
    }

    let quartiles = [0.25, 0.5, 0.75].map(|q| quantile(&xs, q));
    let mut best: Option<CurveFit> = None;
    for l in [0.5, 0.75, 1.0] {
        for x0 in quartiles {
            for k in [0.2, 0.5, 1.0] {
                if let Some(fit) = fit_from([l, k, x0], points) {
                    if best.is_none_or(|b| fit.rss < b.rss) {
                        best = Some(fit);
                    }
                }
            }
        }
    }
    best.ok_or(Error::CurveFitDiverged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (1..=16).map(|i| i as f64 * 0.5).collect()
    }

    #[test]
    fn recovers_noiseless_curve() {
        let truth = CurveFit { l: 0.8, k: 0.5, x0: 4.0, rss: 0.0 };
        let points: Vec<(f64, f64)> = grid().into_iter().map(|a| (a, truth.eval(a))).collect();
        let fit = fit_logistic_curve(&points).unwrap();
        assert!((fit.l - 0.8).abs() < 1e-6, "{fit:?}");
        assert!((fit.k - 0.5).abs() < 1e-6);
        assert!((fit.x0 - 4.0).abs() < 1e-6);
        assert!(fit.rss < 1e-12);
    }

    #[test]
    fn flat_data() {
        let points: Vec<(f64, f64)> = grid().into_iter().map(|a| (a, 0.5)).collect();
        let fit = fit_logistic_curve(&points).unwrap();
        assert!(fit.rss <= 1e-10, "{fit:?}");
        for &(a, _) in &points {
            assert!((fit.eval(a) - 0.5).abs() < 1e-6);
        }
        assert!(fit.l <= 1.0 && fit.k > 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(fit_logistic_curve(&[(1.0, 0.1), (2.0, 0.2), (3.0, 0.3)]), Err(Error::InsufficientPoints(_))));
        let dup = [(1.0, 0.1), (1.0, 0.2), (3.0, 0.3), (4.0, 0.4)];
        assert!(fit_logistic_curve(&dup).is_err());
        let nan = [(1.0, 0.1), (2.0, f64::NAN), (3.0, 0.3), (4.0, 0.4)];
        assert!(fit_logistic_curve(&nan).is_err());
    }

    #[test]
    fn constraints_hold_on_saturating_data() {
        // data heading above 1 forces L onto its bound
        let points: Vec<(f64, f64)> = grid().into_iter().map(|a| (a, 0.2 * a)).collect();
        let fit = fit_logistic_curve(&points).unwrap();
        assert!(fit.l <= 1.0 && fit.l > 0.0 && fit.k > 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let points: Vec<(f64, f64)> = grid().into_iter().map(|a| (a, 0.1 + 0.05 * a)).collect();
        let fit = CurveFit { l: 0.7, k: 0.6, x0: 3.0, rss: 0.0 };
        let g = fit.rss_gradient(&points);
        let h = 1e-6;
        for i in 0..3 {
            let mut up = fit.params();
            let mut down = fit.params();
            up[i] += h;
            down[i] -= h;
            let fd = (rss(up, &points) - rss(down, &points)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }
}
