mod common;

use admitlab::model::kl_poisson_loss;
use admitlab::numeric::Moments;
use admitlab::pointproc::{discretize, reconstruct_intensity, simulate_thinning, EventLog, IntensityFn};
use admitlab::poisson::{estimate_jeffreys, estimate_js};
use admitlab::RngStream;
use common::oracles::uniform_cells_p_value;
use proptest::prelude::*;

fn counts_over_seeds(f: &IntensityFn, seeds: u64, stream: u64, mut per_log: impl FnMut(&EventLog)) {
    for seed in 0..seeds {
        let mut g = RngStream::new(seed, stream).generator();
        per_log(&simulate_thinning(f, &mut g).unwrap());
    }
}

#[test]
fn constant_intensity_mean_count() {
    let c = 3.5;
    let mut m = Moments::default();
    counts_over_seeds(&IntensityFn::Constant(c), 10_000, 1, |log| m.push(log.len() as f64));
    assert!((m.mean - c).abs() <= 4.0 * m.std_err(), "{} +- {}", m.mean, m.std_err());
}

#[test]
fn linear_intensity_halves_in_ratio_one_to_three() {
    let f = IntensityFn::Linear(4.0);
    let (mut left, mut right) = (0u64, 0u64);
    counts_over_seeds(&f, 10_000, 2, |log| {
        let c = discretize(log, 2).unwrap().counts;
        left += c[0];
        right += c[1];
    });
    let total = (left + right) as f64;
    let share = left as f64 / total;
    let se = (0.25 * 0.75 / total).sqrt();
    assert!((share - 0.25).abs() <= 4.0 * se, "{share}");
    assert!((f.integral(0.0, 0.5) / f.integral(0.5, 1.0) - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn unit_mass_bins() {
    let d = 8;
    let mut sums = vec![0u64; d];
    let seeds = 5_000;
    counts_over_seeds(&IntensityFn::Constant(d as f64), seeds, 3, |log| {
        for (s, c) in sums.iter_mut().zip(discretize(log, d).unwrap().counts) {
            *s += c;
        }
    });
    let se = (1.0 / seeds as f64).sqrt();
    for s in sums {
        assert!((s as f64 / seeds as f64 - 1.0).abs() <= 4.0 * se);
    }
}

#[test]
fn homogeneous_bins_pass_goodness_of_fit() {
    let d = 10;
    let mut ok = 0;
    counts_over_seeds(&IntensityFn::Constant(500.0), 1000, 4, |log| {
        if uniform_cells_p_value(&discretize(log, d).unwrap().counts) > 0.001 {
            ok += 1;
        }
    });
    assert!(ok >= 990, "{ok}");
}

#[test]
fn shrinkage_wins_after_binning() {
    let d = 16;
    let f = IntensityFn::SineSquared(d as f64);
    let truth: Vec<f64> = (0..d).map(|k| f.integral(k as f64 / d as f64, (k + 1) as f64 / d as f64)).collect();
    let mut gap = Moments::default();
    counts_over_seeds(&f, 20_000, 5, |log| {
        let x = discretize(log, d).unwrap();
        let rj = reconstruct_intensity(&estimate_jeffreys(&x), d).unwrap();
        let rjs = reconstruct_intensity(&estimate_js(&x), d).unwrap();
        let binned = |r: &IntensityFn| -> Vec<f64> {
            (0..d).map(|k| r.integral(k as f64 / d as f64, (k + 1) as f64 / d as f64)).collect()
        };
        gap.push(kl_poisson_loss(&truth, &binned(&rj)).unwrap() - kl_poisson_loss(&truth, &binned(&rjs)).unwrap());
    });
    assert!(gap.mean >= -4.0 * gap.std_err(), "{} +- {}", gap.mean, gap.std_err());
}

#[test]
fn simulation_is_reproducible() {
    let f: IntensityFn = "sin2:40".parse().unwrap();
    let a = simulate_thinning(&f, &mut RngStream::new(9, 0).generator()).unwrap();
    let b = simulate_thinning(&f, &mut RngStream::new(9, 0).generator()).unwrap();
    assert_eq!(a.to_text(), b.to_text());
}

proptest! {
    #[test]
    fn discretize_conserves_counts(times in prop::collection::vec(0.0f64..=1.0, 0..200), d in 1usize..40) {
        let log = EventLog::new(times.clone()).unwrap();
        let x = discretize(&log, d).unwrap();
        prop_assert_eq!(x.total(), times.len() as u64);
        prop_assert!(log.times().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn reconstruct_conserves_mass(theta in prop::collection::vec(1e-3f64..10.0, 1..40)) {
        let d = theta.len();
        let f = reconstruct_intensity(&theta, d).unwrap();
        let total: f64 = theta.iter().sum();
        prop_assert!((f.integral(0.0, 1.0) - total).abs() <= 1e-12 * total.max(1.0));
    }

    #[test]
    fn text_round_trip(times in prop::collection::vec(0.0f64..=1.0, 0..50)) {
        let log = EventLog::new(times).unwrap();
        prop_assert_eq!(EventLog::from_text(&log.to_text()).unwrap(), log);
    }
}
