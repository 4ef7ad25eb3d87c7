//! Unit-variance Gaussian location model `X ~ N(theta, I_d)` on the ball
//! `||theta||^2 <= d` under squared error.
//!
//! The James-Stein estimator uses the shrinkage constant `d - 1`
//! (`(1 - (d - 1)/||X||^2) X`). With that constant the exact risk gap to the
//! MLE is `(d - 1)(d - 3) E[1/||X||^2]`, which vanishes at `d = 3`; the classic
//! `d - 2` constant gives `(d - 2)^2 E[1/||X||^2]`. Both are available through
//! [`GaussJamesStein`].

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::{lemma1_lower, LowerBound, SearchSet, ThetaOptimizerConfig};
use crate::error::{Error, Result};
use crate::model::{poisson_expect, Envelope, Estimator, Model, RiskValue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianObservation {
    pub values: Vec<f64>,
}

impl GaussianObservation {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

pub fn estimate_mle(x: &GaussianObservation) -> Vec<f64> {
    x.values.clone()
}

fn shrink(x: &GaussianObservation, shrinkage: f64) -> Vec<f64> {
    let norm_sq = x.norm_sq();
    if norm_sq == 0.0 {
        return vec![0.0; x.dim()];
    }
    let factor = 1.0 - shrinkage / norm_sq;
    x.values.iter().map(|v| factor * v).collect()
}

/// `(1 - (d - 1)/||x||^2) x`, with `x = 0` mapped to 0.
pub fn estimate_js_gauss(x: &GaussianObservation) -> Result<Vec<f64>> {
    let d = check_dim(x.dim())?;
    Ok(shrink(x, d as f64 - 1.0))
}

fn check_dim(d: usize) -> Result<usize> {
    if d < 3 {
        return Err(Error::invalid("d", format!("need d >= 3, got {d}")));
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mle;

impl Estimator<GaussianObservation> for Mle {
    fn id(&self) -> String {
        "gauss-mle".into()
    }

    fn estimate(&self, obs: &GaussianObservation) -> Vec<f64> {
        estimate_mle(obs)
    }
}

/// `(1 - c/||x||^2) x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussJamesStein {
    pub shrinkage: f64,
}

impl GaussJamesStein {
    /// `c = d - 1`.
    pub fn verbatim(d: usize) -> Result<Self> {
        Ok(Self { shrinkage: check_dim(d)? as f64 - 1.0 })
    }

    /// `c = d - 2`.
    pub fn classic(d: usize) -> Result<Self> {
        Ok(Self { shrinkage: check_dim(d)? as f64 - 2.0 })
    }
}

impl Estimator<GaussianObservation> for GaussJamesStein {
    fn id(&self) -> String {
        format!("gauss-js(c={})", self.shrinkage)
    }

    fn estimate(&self, obs: &GaussianObservation) -> Vec<f64> {
        shrink(obs, self.shrinkage)
    }
}

#[derive(Debug, Clone)]
pub struct GaussianL2Model {
    theta: Vec<f64>,
}

impl GaussianL2Model {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() || theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("theta", "must be a non-empty finite vector"));
        }
        Ok(Self { theta })
    }

    /// `theta = (sqrt(norm_sq), 0, ..., 0)`; risks depend on theta only through its norm.
    pub fn with_norm_sq(d: usize, norm_sq: f64) -> Result<Self> {
        if d == 0 || !(norm_sq >= 0.0 && norm_sq.is_finite()) {
            return Err(Error::invalid("norm_sq", format!("need d >= 1 and finite norm_sq >= 0, got {norm_sq}")));
        }
        let mut theta = vec![0.0; d];
        theta[0] = norm_sq.sqrt();
        Self::new(theta)
    }
}

impl Model for GaussianL2Model {
    type Obs = GaussianObservation;

    fn theta(&self) -> &[f64] {
        &self.theta
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> GaussianObservation {
        GaussianObservation::new(
            self.theta
                .iter()
                .map(|&t| {
                    let z: f64 = StandardNormal.sample(rng);
                    t + z
                })
                .collect(),
        )
    }
}

/// `(d - 2)^2 / (d + ||theta||^2)`, the Jensen bound on the Stein identity
/// `R(theta, MLE) - R(theta, JS_{d-2}) = (d - 2)^2 E[1/||X||^2]`.
pub fn stein_gap_lower(d: usize, theta_norm_sq: f64) -> Result<f64> {
    let d = check_dim(d)? as f64;
    if !(theta_norm_sq >= 0.0) {
        return Err(Error::invalid("theta_norm_sq", format!("must be non-negative, got {theta_norm_sq}")));
    }
    Ok((d - 2.0).powi(2) / (d + theta_norm_sq))
}

/// `E[1/||X||^2]` for `||X||^2 ~ chi2_d(norm_sq)`, as the Poisson mixture
/// `sum_k Po(norm_sq/2)(k) / (d - 2 + 2k)`.
pub fn inverse_noncentral_chi2_mean(d: usize, norm_sq: f64, tol: f64) -> Result<f64> {
    let df = check_dim(d)? as f64;
    poisson_expect(|k| 1.0 / (df - 2.0 + 2.0 * k as f64), Envelope::bounded(1.0 / (df - 2.0)), norm_sq / 2.0, tol)
}

/// Exact `R(theta, MLE) - R(theta, JS_c) = (2c(d - 2) - c^2) E[1/||X||^2]`.
pub fn exact_gap_mle_minus_js(d: usize, norm_sq: f64, shrinkage: f64, tol: f64) -> Result<RiskValue> {
    let inv = inverse_noncentral_chi2_mean(d, norm_sq, tol)?;
    let df = d as f64;
    Ok(RiskValue::exact_series((2.0 * shrinkage * (df - 2.0) - shrinkage * shrinkage) * inv))
}

/// Exact `R(theta, JS_c) = d - (2c(d - 2) - c^2) E[1/||X||^2]`.
pub fn exact_risk_js(d: usize, norm_sq: f64, shrinkage: f64, tol: f64) -> Result<RiskValue> {
    let gap = exact_gap_mle_minus_js(d, norm_sq, shrinkage, tol)?;
    Ok(RiskValue::exact_series(d as f64 - gap.value))
}

/// `inf_{||theta||^2 <= d} [R(theta, MLE) - R(theta, JS_c)]`, searched over `||theta||^2`.
pub fn mle_lower_bound(d: usize, shrinkage: f64, opt: &ThetaOptimizerConfig, tol: f64) -> Result<LowerBound> {
    check_dim(d)?;
    lemma1_lower(
        &Mle.id(),
        &GaussJamesStein { shrinkage }.id(),
        &SearchSet::Interval { lo: 0.0, hi: d as f64 },
        |t| exact_gap_mle_minus_js(d, t[0], shrinkage, tol),
        opt,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn js_examples() {
        let x = GaussianObservation::new(vec![1.0, 1.0, 1.0, 0.0]);
        assert_eq!(estimate_js_gauss(&x).unwrap(), vec![0.0; 4]);
        let zero = GaussianObservation::new(vec![0.0; 5]);
        assert_eq!(estimate_js_gauss(&zero).unwrap(), vec![0.0; 5]);
        assert!(estimate_js_gauss(&GaussianObservation::new(vec![1.0, 2.0])).is_err());
        let big = GaussianObservation::new(vec![1e8, -2e8, 3e8]);
        let y = estimate_js_gauss(&big).unwrap();
        for (a, b) in y.iter().zip(&big.values) {
            assert!((a / b - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mle_is_identity() {
        let x = GaussianObservation::new(vec![0.1, -3.5, 7.25]);
        assert_eq!(estimate_mle(&x), x.values);
    }

    #[test]
    fn stein_gap_examples() {
        assert!((stein_gap_lower(10, 10.0).unwrap() - 3.2).abs() < 1e-15);
        assert!((stein_gap_lower(3, 0.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(stein_gap_lower(2, 0.0).is_err());
    }

    #[test]
    fn inverse_chi2_at_zero() {
        for d in [3usize, 4, 10] {
            let v = inverse_noncentral_chi2_mean(d, 0.0, 1e-14).unwrap();
            assert!((v - 1.0 / (d as f64 - 2.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn verbatim_risk_at_zero() {
        for d in [3usize, 10, 50] {
            let df = d as f64;
            let r = exact_risk_js(d, 0.0, df - 1.0, 1e-14).unwrap();
            assert!((r.value - (2.0 * df - 3.0) / (df - 2.0)).abs() < 1e-12);
            let classic = exact_risk_js(d, 0.0, df - 2.0, 1e-14).unwrap();
            assert!((classic.value - 2.0).abs() < 1e-12);
        }
    }
}
