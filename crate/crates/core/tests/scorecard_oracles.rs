mod common;

use common::logit;
use imbalance_lab::config::{builtin_configs, config_a, config_b, population_woe, EventRate};
use imbalance_lab::datagen::{generate_sample, make_plan, RngStream, Role, Sample, SamplingPlan};
use imbalance_lab::scorecard::{
    adjusted_woe, estimate_woe, fit_logistic, gradient, log_likelihood, transform, Features,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn population_features(sample: &Sample, config: &imbalance_lab::config::ConfigSpec) -> Features {
    let data = sample
        .rows()
        .flat_map(|row| row.iter().enumerate().map(|(j, &b)| population_woe(config, j, b).unwrap()))
        .collect();
    Features::new(config.d(), data)
}

fn config_b_sample(n: usize, rate: f64, seed: u64) -> Sample {
    let plan = make_plan(n, EventRate::new(rate).unwrap(), true).unwrap();
    generate_sample(&config_b(), &plan, &RngStream::new(seed, 0, Role::Train))
}

#[test]
fn coefficients_recovered_with_population_woe() {
    let config = config_b();
    let sample = config_b_sample(100_000, 0.10, 20_260_223);
    let fit = fit_logistic(&population_features(&sample, &config), sample.responses()).unwrap();
    assert!(fit.converged);
    assert!((fit.beta[0] - logit(0.10)).abs() <= 0.1, "{:?}", fit.beta);
    for b in &fit.beta[1..] {
        assert!((b + 1.0).abs() <= 0.1, "{:?}", fit.beta);
    }
}

#[test]
fn score_vanishes_at_convergence() {
    for (n, rate, seed) in [(500, 0.05, 1), (2500, 0.01, 2), (20_000, 0.1, 3)] {
        let sample = config_b_sample(n, rate, seed);
        let table = estimate_woe(&sample, &config_b().shape(), 0.5).unwrap();
        let x = transform(&sample, &table).unwrap();
        let fit = fit_logistic(&x, sample.responses()).unwrap();
        assert!(fit.converged);
        let g = gradient(&fit.beta, &x, sample.responses());
        assert!(g.iter().all(|v| v.abs() < 1e-6), "{g:?}");
        assert!(fit.loglik <= 0.0);
    }
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let sample = config_b_sample(800, 0.1, 4);
    let table = estimate_woe(&sample, &config_b().shape(), 0.5).unwrap();
    let x = transform(&sample, &table).unwrap();
    let y = sample.responses();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let h = 1e-6;
    for _ in 0..10 {
        let beta: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.5..1.5)).collect();
        let g = gradient(&beta, &x, y);
        for i in 0..beta.len() {
            let (mut up, mut down) = (beta.clone(), beta.clone());
            up[i] += h;
            down[i] -= h;
            let fd = (log_likelihood(&up, &x, y) - log_likelihood(&down, &x, y)) / (2.0 * h);
            let rel = (fd - g[i]).abs() / g[i].abs().max(1.0);
            assert!(rel < 1e-4, "component {i}: analytic {} vs fd {fd}", g[i]);
        }
    }
}

#[test]
fn fit_invariant_under_row_permutation() {
    let sample = config_b_sample(1000, 0.05, 5);
    let table = estimate_woe(&sample, &config_b().shape(), 0.5).unwrap();
    let x = transform(&sample, &table).unwrap();
    let fit = fit_logistic(&x, sample.responses()).unwrap();

    let n = sample.n();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let xs: Vec<u32> = order.iter().flat_map(|&i| sample.row(i).to_vec()).collect();
    let ys: Vec<u8> = order.iter().map(|&i| sample.responses()[i]).collect();
    let shuffled = Sample::new(sample.d(), xs, ys).unwrap();

    let table2 = estimate_woe(&shuffled, &config_b().shape(), 0.5).unwrap();
    assert_eq!(table, table2);
    let fit2 = fit_logistic(&transform(&shuffled, &table2).unwrap(), shuffled.responses()).unwrap();
    for (a, b) in fit.beta.iter().zip(&fit2.beta) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!((fit.loglik - fit2.loglik).abs() < 1e-8);
}

fn woe_deviations(n: usize, n1: usize, seed: u64) -> Vec<(usize, usize, f64, f64)> {
    let config = config_a();
    let plan = SamplingPlan { n, n1, pi1: n1 as f64 / n as f64, clamped: false };
    let sample = generate_sample(&config, &plan, &RngStream::new(seed, 0, Role::Train));
    let table = estimate_woe(&sample, &config.shape(), 0.5).unwrap();
    let n0 = (n - n1) as f64;
    let mut out = Vec::new();
    for (j, p) in config.predictors.iter().enumerate() {
        for k in 0..p.bins() {
            let (pe, pn) = (p.p_event[k], p.p_nonevent[k]);
            if pe >= 0.05 && pn >= 0.05 {
                let bin = k as u32 + 1;
                let dev = (table.woe(j, bin).unwrap() - population_woe(&config, j, bin).unwrap()).abs();
                // delta-method standard error of the log ratio of two proportions
                let se = ((1.0 - pe) / (pe * n1 as f64) + (1.0 - pn) / (pn * n0)).sqrt();
                out.push((j, k, dev, se));
            }
        }
    }
    out
}

#[test]
fn woe_estimates_within_sampling_error() {
    for (j, k, dev, se) in woe_deviations(200_000, 20_000, 31) {
        assert!(dev < 4.0 * se, "X{} bin {}: deviation {dev} vs se {se}", j + 1, k + 1);
    }
}

#[test]
fn woe_estimates_converge_to_population() {
    // 0.02 is about one standard error at 200k draws, so check it where it is a 3+ sigma bound
    for (j, k, dev, _) in woe_deviations(2_000_000, 1_000_000, 31) {
        assert!(dev < 0.02, "X{} bin {}: deviation {dev}", j + 1, k + 1);
    }
}

#[test]
fn transform_then_recount_reproduces_table() {
    let sample = config_b_sample(3000, 0.05, 8);
    let shape = config_b().shape();
    let table = estimate_woe(&sample, &shape, 0.5).unwrap();
    let x = transform(&sample, &table).unwrap();
    // map each feature value back to the bins that carry it and recount
    let mut recount: Vec<(Vec<u64>, Vec<u64>)> = shape.iter().map(|&k| (vec![0; k], vec![0; k])).collect();
    for (row, &y) in x.rows().zip(sample.responses()) {
        for (j, &w) in row.iter().enumerate() {
            let k = table.columns[j].woe.iter().position(|&v| v == w).unwrap();
            if y == 1 {
                recount[j].1[k] += 1;
            } else {
                recount[j].0[k] += 1;
            }
        }
    }
    for (j, col) in table.columns.iter().enumerate() {
        assert_eq!(col.nonevent_counts, recount[j].0);
        assert_eq!(col.event_counts, recount[j].1);
        for k in 0..col.woe.len() {
            let w = adjusted_woe(recount[j].0[k], table.n0, recount[j].1[k], table.n1, 0.5);
            assert_eq!(w, col.woe[k]);
        }
    }
}

#[test]
fn class_swap_negates_estimates() {
    let sample = config_b_sample(400, 0.1, 12);
    let shape = config_b().shape();
    let table = estimate_woe(&sample, &shape, 0.5).unwrap();
    let flipped: Vec<u8> = sample.responses().iter().map(|y| 1 - y).collect();
    let xs: Vec<u32> = sample.rows().flatten().copied().collect();
    let swapped = estimate_woe(&Sample::new(sample.d(), xs, flipped).unwrap(), &shape, 0.5).unwrap();
    for (a, b) in table.columns.iter().zip(&swapped.columns) {
        for (wa, wb) in a.woe.iter().zip(&b.woe) {
            assert!((wa + wb).abs() < 1e-12, "{wa} vs {wb}");
        }
    }
}

#[test]
fn posterior_identity_on_every_builtin_cell() {
    use imbalance_lab::config::bayes_posterior;
    for config in builtin_configs() {
        let shape = config.shape();
        for rate in [0.01, 0.05, 0.10] {
            let rate = EventRate::new(rate).unwrap();
            let mut x = vec![1u32; shape.len()];
            loop {
                let post = bayes_posterior(&config, rate, &x).unwrap();
                let woe_sum: f64 = x.iter().enumerate().map(|(j, &b)| population_woe(&config, j, b).unwrap()).sum();
                assert!((post.logit() - (rate.logit() - woe_sum)).abs() < 1e-12);
                let p = post.probability();
                assert!(p > 0.0 && p < 1.0);
                // odometer over 1-based bins
                let mut j = shape.len();
                loop {
                    if j == 0 {
                        break;
                    }
                    j -= 1;
                    x[j] += 1;
                    if x[j] as usize <= shape[j] {
                        break;
                    }
                    x[j] = 1;
                    if j == 0 {
                        j = usize::MAX;
                        break;
                    }
                }
                if j == usize::MAX {
                    break;
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjusted_woe_antisymmetric(c0 in 0u64..1000, extra0 in 1u64..1000, c1 in 0u64..1000, extra1 in 1u64..1000, theta in 0.01f64..2.0) {
        let (n0, n1) = (c0 + extra0, c1 + extra1);
        prop_assert!((adjusted_woe(c0, n0, c1, n1, theta) + adjusted_woe(c1, n1, c0, n0, theta)).abs() < 1e-12);
        prop_assert!(adjusted_woe(c0, n0, c1, n1, theta).is_finite());
    }
}
