mod common;

use admitlab::bounds::ThetaOptimizerConfig;
use admitlab::model::{mc_risk, Loss};
use admitlab::poisson::{
    bayes_risk_pi, claim_c2_check, estimate_js, exact_risk_jeffreys, exact_risk_js, jeffreys_lower_bound_closed_form,
    jeffreys_lower_bound_exact, risk_diff_j_minus_js, Jeffreys, MixturePriorPi, PoissonModel, PoissonObservation,
};
use admitlab::RngStream;
use common::oracles::{bayes_risk_mc_oracle, brute_expected_log, brute_kl_risk};
use proptest::prelude::*;

#[test]
fn js_risk_matches_joint_enumeration() {
    let js = |x: &[u64]| {
        let z: u64 = x.iter().sum();
        let f = (z as f64 + 1.0) / (z as f64 + x.len() as f64 / 2.0);
        x.iter().map(|&k| f * (k as f64 + 0.5)).collect::<Vec<_>>()
    };
    for theta in [[0.0, 0.0, 0.0], [1.0, 0.5, 0.2], [0.0, 2.5, 0.5], [1.0, 1.0, 1.0]] {
        let brute = brute_kl_risk(&theta, 45, js);
        let exact = exact_risk_js(&theta, 1e-12).unwrap().value;
        assert!((brute - exact).abs() < 1e-9, "{theta:?}: {brute} vs {exact}");
    }
}

#[test]
fn jeffreys_risk_at_spike_uses_long_sum() {
    let exact = exact_risk_jeffreys(&[1.0, 0.0, 0.0, 0.0], 1e-12).unwrap().value;
    assert!((exact - (2.0 - brute_expected_log(1.0, 0.5))).abs() < 1e-10);
}

#[test]
fn jeffreys_risk_matches_monte_carlo() {
    let theta = vec![1.0; 4];
    let exact = exact_risk_jeffreys(&theta, 1e-12).unwrap().value;
    let model = PoissonModel::new(theta).unwrap();
    let r = mc_risk(&model, &Jeffreys, Loss::KullbackLeibler, 200_000, RngStream::new(21, 0)).unwrap();
    assert!((r.value - exact).abs() <= 4.0 * r.se(), "{} +- {} vs {exact}", r.value, r.se());
}

#[test]
fn dominance_on_grid() {
    for d in [3usize, 4, 8, 16, 64] {
        let df = d as f64;
        let min = (0..2049)
            .map(|k| risk_diff_j_minus_js(df * k as f64 / 2048.0, d, 1e-12).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-9, "d {d}: {min}");
        assert!(min >= jeffreys_lower_bound_closed_form(d).unwrap(), "d {d}");
    }
}

#[test]
fn closed_form_below_exact_infimum() {
    for d in [3usize, 5, 12, 30, 64] {
        let exact = jeffreys_lower_bound_exact(d, &ThetaOptimizerConfig::default(), 1e-12).unwrap();
        assert!(jeffreys_lower_bound_closed_form(d).unwrap() <= exact.value + 1e-9, "d {d}");
    }
}

#[test]
fn js_risk_at_zero_is_one() {
    for d in 4..=64 {
        let r = exact_risk_js(&vec![0.0; d], 1e-12).unwrap().value;
        assert!((r - 1.0).abs() < 1e-12);
    }
}

#[test]
fn bayes_risk_matches_monte_carlo_oracle() {
    let rep = bayes_risk_pi(10, 1e-10).unwrap();
    let (mean, se) = bayes_risk_mc_oracle(10, 200_000, 97);
    assert!((rep.b_pi - mean).abs() <= 4.0 * se, "{} vs {mean} +- {se}", rep.b_pi);
}

#[test]
fn bayes_risk_per_dimension_trend() {
    let vals: Vec<f64> = [50usize, 100, 200].iter().map(|&d| bayes_risk_pi(d, 1e-10).unwrap().b_pi / d as f64).collect();
    assert!(vals.iter().all(|&v| v > 0.0));
    assert!(vals.windows(2).all(|w| w[1] >= w[0]), "{vals:?}");
}

#[test]
fn prior_draws_lie_on_the_two_components() {
    let prior = MixturePriorPi::new(6).unwrap();
    let mut g = RngStream::new(4, 0).generator();
    let mut zeros = 0;
    for _ in 0..2000 {
        let t = prior.sample(&mut g);
        let s: f64 = t.iter().sum();
        if s == 0.0 {
            zeros += 1;
        } else {
            assert!((s - 6.0).abs() < 1e-12);
        }
    }
    assert!((zeros as f64 - 1000.0).abs() < 4.0 * 500f64.sqrt());
    assert!(MixturePriorPi::new(2).is_err());
}

#[test]
fn claim_c2_large_d() {
    let c = claim_c2_check(1000, 0.5).unwrap();
    assert!(c.lhs >= c.rhs);
    let c = claim_c2_check(10_000, 0.5).unwrap();
    assert!((c.lhs - 15_000f64.ln()).abs() < 0.01);
    let brute = brute_expected_log(10_000.0, 5_000.0);
    assert!((c.lhs - brute).abs() < 1e-9, "{} vs {brute}", c.lhs);
}

proptest! {
    #[test]
    fn js_coordinate_sum(counts in prop::collection::vec(0u64..500, 1..20)) {
        let x = PoissonObservation::new(counts.clone());
        let s: f64 = estimate_js(&x).iter().sum();
        let z: u64 = counts.iter().sum();
        prop_assert!((s - (z as f64 + 1.0)).abs() <= 1e-12 * (z as f64 + 1.0));
    }

    #[test]
    fn scale_reduction(raw in prop::collection::vec(0.0f64..1.0, 2..8), mass in 0.0f64..1.0) {
        let d = raw.len();
        let total: f64 = raw.iter().sum::<f64>().max(1e-12);
        let theta: Vec<f64> = raw.iter().map(|r| r / total * mass * d as f64).collect();
        let mu: f64 = theta.iter().sum::<f64>().min(d as f64);
        let rj = exact_risk_jeffreys(&theta, 1e-12).unwrap().value;
        let rjs = exact_risk_js(&theta, 1e-12).unwrap().value;
        let g = risk_diff_j_minus_js(mu, d, 1e-12).unwrap();
        prop_assert!((rj - rjs - g).abs() < 1e-9);
    }
}
