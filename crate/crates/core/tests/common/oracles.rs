//! Independent reference computations used by the integration and
//! acceptance tests. Nothing here calls into the library's numerical code.

#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

/// `sum_{k <= upto} e^{-mu} mu^k / k! f(k)` with the pmf built by recurrence.
pub fn brute_poisson_sum(f: impl Fn(u64) -> f64, mu: f64, upto: u64) -> f64 {
    let mut p = (-mu).exp();
    let mut s = p * f(0);
    for k in 1..=upto {
        p *= mu / k as f64;
        s += p * f(k);
    }
    s
}

/// Poisson pmf table on `0..=upto`: ratio recurrences outward from the
/// mode, normalised by their sum.
pub fn poisson_pmf_table(mu: f64, upto: u64) -> Vec<f64> {
    let mut out = vec![0.0; upto as usize + 1];
    if mu == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let mode = (mu.floor() as usize).min(upto as usize);
    out[mode] = 1.0;
    for k in (0..mode).rev() {
        out[k] = out[k + 1] * (k + 1) as f64 / mu;
    }
    for k in mode + 1..out.len() {
        out[k] = out[k - 1] * mu / k as f64;
    }
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= z);
    out
}

/// `E_{X ~ Po(mu)} log(shift + X)` by a long direct sum.
pub fn brute_expected_log(mu: f64, shift: f64) -> f64 {
    let upto = (mu + 60.0 + 20.0 * mu.sqrt()).ceil() as u64;
    poisson_pmf_table(mu, upto).iter().enumerate().map(|(k, p)| p * (k as f64 + shift).ln()).sum()
}

/// KL risk of an arbitrary Poisson estimator by full joint enumeration of
/// `X in {0..=k_max}^d`.
pub fn brute_kl_risk(theta: &[f64], k_max: u64, estimator: impl Fn(&[u64]) -> Vec<f64>) -> f64 {
    let d = theta.len();
    let pmfs: Vec<Vec<f64>> = theta.iter().map(|&t| poisson_pmf_table(t, k_max)).collect();
    let mut x = vec![0u64; d];
    let mut total = 0.0;
    loop {
        let p: f64 = x.iter().zip(&pmfs).map(|(&k, pm)| pm[k as usize]).product();
        if p > 0.0 {
            let a = estimator(&x);
            let loss: f64 = theta
                .iter()
                .zip(&a)
                .map(|(&t, &ai)| if t > 0.0 { t * (t / ai).ln() + ai - t } else { ai })
                .sum();
            total += p * loss;
        }
        let mut i = 0;
        loop {
            if i == d {
                return total;
            }
            x[i] += 1;
            if x[i] <= k_max {
                break;
            }
            x[i] = 0;
            i += 1;
        }
    }
}

/// Monte Carlo oracle of the Bayes risk of the half-point-mass,
/// half-scaled-Dirichlet(1/2) prior: averages the closed risk display of the
/// Bayes solution over prior draws. Returns `(mean, std_err)`.
pub fn bayes_risk_mc_oracle(d: usize, draws: usize, seed: u64) -> (f64, f64) {
    let df = d as f64;
    let e = (-df).exp();
    let zero_loss = df * e / (1.0 + e);
    let common = df * e * (df + e.ln_1p()) - df * e / (1.0 + e) - df * df.ln() + df * brute_expected_log(df, df / 2.0);
    let step = 1e-3;
    let table: Vec<f64> = (0..=((df / step).ceil() as usize + 1)).map(|k| brute_expected_log(k as f64 * step, 0.5)).collect();
    let h = |mu: f64| {
        let pos = mu / step;
        let k = (pos.floor() as usize).min(table.len() - 2);
        let w = pos - k as f64;
        table[k] * (1.0 - w) + table[k + 1] * w
    };
    let gamma = Gamma::new(0.5, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let v = if rand::Rng::random_bool(&mut rng, 0.5) {
            zero_loss
        } else {
            let g: Vec<f64> = (0..d).map(|_| gamma.sample(&mut rng)).collect();
            let total: f64 = g.iter().sum();
            let mut acc = common;
            for gi in g {
                let t = df * gi / total;
                if t > 0.0 {
                    acc += t * t.ln() - t * h(t);
                }
            }
            acc
        };
        sum += v;
        sum_sq += v * v;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `int_0^inf (1 + x^m)^{-2} dx = ((m - 1)/m^2) pi / sin(pi/m)` with `m = 2 alpha + 1`.
pub fn integral_closed_form(alpha: f64) -> f64 {
    let m = 2.0 * alpha + 1.0;
    (m - 1.0) / (m * m) * std::f64::consts::PI / (std::f64::consts::PI / m).sin()
}

/// `Pr(N^2 <= b)` for a standard normal `N`.
pub fn normal_square_cdf(b: f64) -> f64 {
    statrs::function::erf::erf((b / 2.0).sqrt())
}

/// Posterior weights of the sieve components by explicit Gaussian densities.
pub fn sieve_weights_brute(x: &[f64], alpha: f64, n: f64, prior_weights: &[f64]) -> Vec<f64> {
    let normal_pdf = |v: f64, var: f64| (-(v * v) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
    let dens: Vec<f64> = prior_weights
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let d = k + 1;
            let mut p = m;
            for (i, &xi) in x.iter().enumerate() {
                let var = if i < d {
                    1.0 / n + (d as f64).powf(2.0 * alpha + 1.0) * ((i + 1) as f64).powf(-2.0 * alpha - 1.0) / n
                } else {
                    1.0 / n
                };
                p *= normal_pdf(xi, var);
            }
            p
        })
        .collect();
    let z: f64 = dens.iter().sum();
    dens.into_iter().map(|p| p / z).collect()
}

/// Pearson chi-square goodness-of-fit p-value against equal cell probabilities.
pub fn uniform_cells_p_value(counts: &[u64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    ChiSquared::new((counts.len() - 1) as f64).unwrap().sf(stat)
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
