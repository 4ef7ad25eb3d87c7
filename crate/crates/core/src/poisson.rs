//! Poisson sequence model `X_i ~ Po(theta_i)`, `i = 1..d`, on
//! `{theta >= 0 : sum theta_i <= d}` under Kullback-Leibler loss.
//!
//! Two estimators are compared: the Jeffreys-prior Bayes estimator
//! `X_i + 1/2` and the James-Stein type shrinkage
//! `(Z + 1) / (Z + d/2) * (X_i + 1/2)` with `Z = sum X_j`. Their risk
//! difference depends on theta only through `mu = sum theta_i`, since
//! `Z ~ Po(mu)`, which turns the theta-infimum into a 1-D problem.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::bounds::{lemma1_lower, LowerBound, SearchSet, ThetaOptimizerConfig};
use crate::error::{Error, Result};
use crate::model::{poisson_expect, Envelope, Estimator, L1BallSpace, Model, RiskValue};
use crate::numeric::{digamma, integrate, ln_gamma, CompensatedSum};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoissonObservation {
    pub counts: Vec<u64>,
}

impl PoissonObservation {
    pub fn new(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// `X_i + 1/2`.
pub fn estimate_jeffreys(x: &PoissonObservation) -> Vec<f64> {
    x.counts.iter().map(|&k| k as f64 + 0.5).collect()
}

/// `(Z + 1) / (Z + d/2) * (X_i + 1/2)`; the coordinates sum to `Z + 1`.
pub fn estimate_js(x: &PoissonObservation) -> Vec<f64> {
    let z = x.total() as f64;
    let factor = (z + 1.0) / (z + x.dim() as f64 / 2.0);
    x.counts.iter().map(|&k| factor * (k as f64 + 0.5)).collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Jeffreys;

impl Estimator<PoissonObservation> for Jeffreys {
    fn id(&self) -> String {
        "poisson-jeffreys".into()
    }

    fn estimate(&self, obs: &PoissonObservation) -> Vec<f64> {
        estimate_jeffreys(obs)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PoissonJamesStein;

impl Estimator<PoissonObservation> for PoissonJamesStein {
    fn id(&self) -> String {
        "poisson-js".into()
    }

    fn estimate(&self, obs: &PoissonObservation) -> Vec<f64> {
        estimate_js(obs)
    }
}

/// Product Poisson model at a fixed mean vector.
#[derive(Debug, Clone)]
pub struct PoissonModel {
    theta: Vec<f64>,
    laws: Vec<Option<Poisson<f64>>>,
}

impl PoissonModel {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        let laws = theta
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                if !(t >= 0.0 && t.is_finite()) {
                    Err(Error::invalid("theta", format!("theta[{i}] = {t} is not a finite non-negative mean")))
                } else if t == 0.0 {
                    Ok(None)
                } else {
                    Poisson::new(t)
                        .map(Some)
                        .map_err(|e| Error::invalid("theta", format!("theta[{i}] = {t}: {e}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { theta, laws })
    }
}

impl Model for PoissonModel {
    type Obs = PoissonObservation;

    fn theta(&self) -> &[f64] {
        &self.theta
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> PoissonObservation {
        PoissonObservation {
            counts: self.laws.iter().map(|law| law.map_or(0, |p| p.sample(rng) as u64)).collect(),
        }
    }
}

fn check_theta(theta: &[f64]) -> Result<()> {
    let space = L1BallSpace::new(theta.len())?;
    if !space.contains(theta) {
        return Err(Error::invalid("theta", "outside {theta >= 0, sum theta_i <= d}"));
    }
    Ok(())
}

/// `E_{X ~ Po(mu)} log(X + shift)`.
pub fn expected_log_shift(mu: f64, shift: f64, tol: f64) -> Result<f64> {
    poisson_expect(|k| (k as f64 + shift).ln(), Envelope::log_shift(shift), mu, tol)
}

/// Exact KL risk of the Jeffreys estimator,
/// `sum_i theta_i (log theta_i - E log(X_i + 1/2)) + d/2`.
pub fn exact_risk_jeffreys(theta: &[f64], tol: f64) -> Result<RiskValue> {
    check_theta(theta)?;
    let per_coordinate = tol / theta.len() as f64;
    let mut acc = CompensatedSum::default();
    for &t in theta.iter().filter(|&&t| t > 0.0) {
        acc.add(t * (t.ln() - expected_log_shift(t, 0.5, per_coordinate)?));
    }
    acc.add(theta.len() as f64 / 2.0);
    Ok(RiskValue::exact_series(acc.value()))
}

/// Exact KL risk of the James-Stein type estimator, `R_J(theta) - g(sum theta)`.
pub fn exact_risk_js(theta: &[f64], tol: f64) -> Result<RiskValue> {
    let jeffreys = exact_risk_jeffreys(theta, tol / 2.0)?;
    let mu: f64 = theta.iter().sum();
    let gap = risk_diff_j_minus_js(mu.min(theta.len() as f64), theta.len(), tol / 2.0)?;
    Ok(RiskValue::exact_series(jeffreys.value - gap))
}

/// `g(mu) = mu E_{Z ~ Po(mu)} log((Z + 1) / (Z + d/2)) + d/2 - 1`, the risk
/// difference `R(theta, J) - R(theta, JS)` at any theta with `sum theta_i = mu`.
pub fn risk_diff_j_minus_js(mu: f64, d: usize, tol: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::invalid("d", format!("need d >= 2, got {d}")));
    }
    if !(0.0..=d as f64).contains(&mu) {
        return Err(Error::invalid("mu", format!("must lie in [0, {d}], got {mu}")));
    }
    let half = d as f64 / 2.0;
    if mu == 0.0 {
        return Ok(half - 1.0);
    }
    let env = Envelope::bounded(half.ln().abs().max(f64::MIN_POSITIVE));
    let e = poisson_expect(|k| ((k as f64 + 1.0) / (k as f64 + half)).ln(), env, mu, tol / mu.max(1.0))?;
    Ok(mu * e + half - 1.0)
}

/// The Jensen lower bound on `inf_mu g(mu)`:
/// `-d log(1 + (d/2 - 1)(1 - e^{-d}) / d) + d/2 - 1`.
pub fn jeffreys_lower_bound_closed_form(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::invalid("d", format!("need d >= 2, got {d}")));
    }
    let df = d as f64;
    let k = df / 2.0 - 1.0;
    Ok(-df * (k * -(-df).exp_m1() / df).ln_1p() + k)
}

/// `inf_{mu in [0, d]} g(mu)`, the comparator lower bound for the Jeffreys
/// estimator with the James-Stein type estimator as comparator.
pub fn jeffreys_lower_bound_exact(d: usize, opt: &ThetaOptimizerConfig, tol: f64) -> Result<LowerBound> {
    lemma1_lower(
        &Jeffreys.id(),
        &PoissonJamesStein.id(),
        &SearchSet::Interval { lo: 0.0, hi: d as f64 },
        |mu| risk_diff_j_minus_js(mu[0], d, tol).map(RiskValue::exact_series),
        opt,
    )
}

/// `1/2 delta_0 + 1/2 (d * Dirichlet(1/2, ..., 1/2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixturePriorPi {
    pub d: usize,
}

impl MixturePriorPi {
    pub const ZERO_WEIGHT: f64 = 0.5;
    pub const DIRICHLET_SHAPE: f64 = 0.5;

    pub fn new(d: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::invalid("d", format!("need d >= 3, got {d}")));
        }
        Ok(Self { d })
    }

    /// One draw; the Dirichlet component uses normalised Gamma(1/2, 1) draws.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        if rng.random_bool(Self::ZERO_WEIGHT) {
            return vec![0.0; self.d];
        }
        let gamma = Gamma::new(Self::DIRICHLET_SHAPE, 1.0).expect("valid gamma shape");
        let g: Vec<f64> = (0..self.d).map(|_| gamma.sample(rng)).collect();
        let total: f64 = g.iter().sum();
        g.into_iter().map(|x| self.d as f64 * x / total).collect()
    }
}

/// Terms of the Bayes risk `b(Pi) = (d/2) * sum(terms)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesRiskTerms {
    /// `e^{-d} log(1 + e^d)`.
    pub no_data_branch: f64,
    /// `psi(3/2)`.
    pub digamma_low: f64,
    /// `-psi(d/2 + 1)`.
    pub neg_digamma_high: f64,
    /// `E_{X ~ Po(d)} log(d/2 + X)`.
    pub total_count_log: f64,
    /// `-E_{b ~ Beta(3/2, (d-1)/2)} E_{X ~ Po(bd)} log(1/2 + X)`.
    pub neg_mixture_log: f64,
}

impl BayesRiskTerms {
    pub fn sum(&self) -> f64 {
        let mut acc = CompensatedSum::default();
        for t in [self.no_data_branch, self.digamma_low, self.neg_digamma_high, self.total_count_log, self.neg_mixture_log] {
            acc.add(t);
        }
        acc.value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesRiskReport {
    pub d: usize,
    pub b_pi: f64,
    pub terms: BayesRiskTerms,
    pub digamma_inputs: (f64, f64),
    pub beta_params: (f64, f64),
    /// Error estimate of the Beta-Poisson mixture quadrature.
    pub quadrature_error: f64,
}

/// Bayes risk of the mixture prior `Pi` in closed series form.
///
/// The mixture term integrates `E_{X ~ Po(bd)} log(1/2 + X)` against the
/// size-biased Dirichlet marginal `Beta(3/2, (d-1)/2)` by adaptive
/// Gauss-Kronrod quadrature on `(0, 1)`.
pub fn bayes_risk_pi(d: usize, tol: f64) -> Result<BayesRiskReport> {
    MixturePriorPi::new(d)?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    let df = d as f64;
    let (a, b) = (1.5, (df - 1.0) / 2.0);
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let inner_tol = tol * 1e-2;
    let density_weighted = |u: f64| {
        let ln_density = (a - 1.0) * u.ln() + (b - 1.0) * (-u).ln_1p() - ln_beta;
        match expected_log_shift(u * df, 0.5, inner_tol) {
            Ok(h) => ln_density.exp() * h,
            Err(_) => f64::NAN,
        }
    };
    let mixture = integrate(density_weighted, 0.0, 1.0, tol, 20_000)?;
    let terms = BayesRiskTerms {
        no_data_branch: (-df).exp() * (df + (-df).exp().ln_1p()),
        digamma_low: digamma(1.5),
        neg_digamma_high: -digamma(df / 2.0 + 1.0),
        total_count_log: expected_log_shift(df, df / 2.0, inner_tol)?,
        neg_mixture_log: -mixture.value,
    };
    Ok(BayesRiskReport {
        d,
        b_pi: df / 2.0 * terms.sum(),
        terms,
        digamma_inputs: (1.5, df / 2.0 + 1.0),
        beta_params: (a, b),
        quadrature_error: mixture.error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaimC2 {
    /// `E_{X ~ Po(d)} log(d/2 + X)`.
    pub lhs: f64,
    /// `log(3d/2) + log(1 - eps)`.
    pub rhs: f64,
}

pub fn claim_c2_check(d: usize, eps: f64) -> Result<ClaimC2> {
    if d == 0 {
        return Err(Error::invalid("d", "need d >= 1"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("eps", format!("must lie in (0, 1), got {eps}")));
    }
    let df = d as f64;
    Ok(ClaimC2 {
        lhs: expected_log_shift(df, df / 2.0, 1e-12)?,
        rhs: (1.5 * df).ln() + (-eps).ln_1p(),
    })
}
