//! Shared model-level types: parameter spaces, risk values, the Poisson
//! expectation engine, losses and the seeded Monte Carlo risk engine.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};
use crate::numeric::{ln_gamma, CompensatedSum, Moments};
use crate::rng::RngStream;

/// `{theta : theta_i >= 0, sum theta_i / d <= 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1BallSpace {
    pub d: usize,
}

impl L1BallSpace {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d", "dimension must be positive"));
        }
        Ok(Self { d })
    }

    /// Per-coordinate radius: the constraint is `sum theta_i <= radius_per_dim * d`.
    pub const fn radius_per_dim(&self) -> f64 {
        1.0
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.d
            && theta.iter().all(|&t| t >= 0.0)
            && theta.iter().sum::<f64>() <= self.d as f64
    }

    /// Euclidean projection: clamp negatives, then project onto the simplex
    /// face `sum = d` if the mass is exceeded.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        let clamped: Vec<f64> = theta.iter().map(|&t| t.max(0.0)).collect();
        let radius = self.d as f64;
        if clamped.iter().sum::<f64>() <= radius {
            return clamped;
        }
        let mut sorted = clamped.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut cumulative = 0.0;
        let mut shift = 0.0;
        for (k, &v) in sorted.iter().enumerate() {
            cumulative += v;
            let candidate = (cumulative - radius) / (k + 1) as f64;
            if v - candidate > 0.0 {
                shift = candidate;
            }
        }
        clamped.iter().map(|&t| (t - shift).max(0.0)).collect()
    }
}

/// `{theta : sum_i i^{2 alpha} theta_i^2 <= B}`, stored to `i_max` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevEllipsoid {
    pub alpha: f64,
    pub b: f64,
    pub i_max: usize,
}

impl SobolevEllipsoid {
    pub fn new(alpha: f64, b: f64, i_max: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid("alpha", format!("must be positive, got {alpha}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::invalid("B", format!("must be positive, got {b}")));
        }
        if i_max == 0 {
            return Err(Error::invalid("i_max", "must be at least 1"));
        }
        Ok(Self { alpha, b, i_max })
    }

    /// `sum_i i^{2 alpha} theta_i^2` over the stored coordinates (1-based i).
    pub fn weighted_norm_sq(&self, theta: &[f64]) -> f64 {
        theta
            .iter()
            .enumerate()
            .map(|(k, t)| ((k + 1) as f64).powf(2.0 * self.alpha) * t * t)
            .sum()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() <= self.i_max && self.weighted_norm_sq(theta) <= self.b
    }

    /// Radial retraction onto the ellipsoid boundary (not the Euclidean projection).
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = theta.iter().take(self.i_max).copied().collect();
        let q = self.weighted_norm_sq(&out);
        if q > self.b {
            let scale = (self.b / q).sqrt();
            out.iter_mut().for_each(|t| *t *= scale);
        }
        out
    }
}

/// `{theta in R^d : sum theta_i^2 <= d}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Ball {
    pub d: usize,
}

impl L2Ball {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d", "dimension must be positive"));
        }
        Ok(Self { d })
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.d && theta.iter().map(|t| t * t).sum::<f64>() <= self.d as f64
    }

    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        let norm_sq: f64 = theta.iter().map(|t| t * t).sum();
        let radius_sq = self.d as f64;
        if norm_sq <= radius_sq {
            return theta.to_vec();
        }
        let scale = (radius_sq / norm_sq).sqrt();
        theta.iter().map(|t| t * scale).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ParameterSpace {
    L1Ball(L1BallSpace),
    Sobolev(SobolevEllipsoid),
    L2Ball(L2Ball),
}

impl ParameterSpace {
    pub fn contains(&self, theta: &[f64]) -> bool {
        match self {
            ParameterSpace::L1Ball(s) => s.contains(theta),
            ParameterSpace::Sobolev(s) => s.contains(theta),
            ParameterSpace::L2Ball(s) => s.contains(theta),
        }
    }

    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        match self {
            ParameterSpace::L1Ball(s) => s.project(theta),
            ParameterSpace::Sobolev(s) => s.project(theta),
            ParameterSpace::L2Ball(s) => s.project(theta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskMethod {
    ExactSeries,
    ClosedForm,
    MonteCarlo,
}

/// A risk evaluation. `std_err` and `n_samples` are present exactly when the
/// value is a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskValue {
    pub value: f64,
    pub std_err: Option<f64>,
    pub method: RiskMethod,
    pub n_samples: Option<u64>,
}

impl RiskValue {
    pub fn exact_series(value: f64) -> Self {
        Self { value, std_err: None, method: RiskMethod::ExactSeries, n_samples: None }
    }

    pub fn closed_form(value: f64) -> Self {
        Self { value, std_err: None, method: RiskMethod::ClosedForm, n_samples: None }
    }

    pub fn monte_carlo(moments: &Moments) -> Self {
        Self {
            value: moments.mean,
            std_err: Some(moments.std_err()),
            method: RiskMethod::MonteCarlo,
            n_samples: Some(moments.count),
        }
    }

    /// Standard error, zero for deterministic methods.
    pub fn se(&self) -> f64 {
        self.std_err.unwrap_or(0.0)
    }

    /// `self - other`; the result is Monte Carlo when either side is, with
    /// standard errors combined as if independent.
    pub fn minus(&self, other: &RiskValue) -> RiskValue {
        let value = self.value - other.value;
        match (self.std_err, other.std_err) {
            (None, None) => RiskValue {
                value,
                std_err: None,
                method: if self.method == other.method { self.method } else { RiskMethod::ClosedForm },
                n_samples: None,
            },
            _ => RiskValue {
                value,
                std_err: Some(self.se().hypot(other.se())),
                method: RiskMethod::MonteCarlo,
                n_samples: self.n_samples.or(other.n_samples),
            },
        }
    }
}

/// Polynomial envelope `|f(k)| <= scale * (1 + k)^degree` used to certify the
/// truncated tail of a Poisson series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub scale: f64,
    pub degree: f64,
}

impl Envelope {
    pub fn bounded(scale: f64) -> Self {
        Self { scale, degree: 0.0 }
    }

    pub fn polynomial(scale: f64, degree: f64) -> Self {
        Self { scale, degree }
    }

    /// Envelope for `log(k + shift)`: `|log(k + s)| <= max(1, s, |log s|) (1 + k)`.
    pub fn log_shift(shift: f64) -> Self {
        Self { scale: 1f64.max(shift).max(shift.ln().abs()), degree: 1.0 }
    }
}

const MAX_SERIES_TERMS: usize = 10_000_000;

/// `E_{K ~ Po(mu)}[f(K)]`, truncated once the certified tail is below `tol`.
///
/// Terms are summed outward from the mode. Past the initial cut
/// `mu + max(25, 12 sqrt(mu))` the remaining tail is bounded by the next
/// term times `1 / (1 - rho)`, where `rho` bounds the ratio of successive
/// `pmf * envelope` terms.
pub fn poisson_expect<F: Fn(u64) -> f64>(f: F, envelope: Envelope, mu: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::invalid("mu", format!("must be finite and non-negative, got {mu}")));
    }
    if mu == 0.0 {
        return finite(f(0), || "poisson_expect f(0)".into());
    }
    let mode = mu.floor() as u64;
    let p_mode = poisson_pmf(mode, mu);

    let mut acc = CompensatedSum::default();
    acc.add(p_mode * f(mode));

    let mut p = p_mode;
    let mut k = mode;
    while k > 0 && p > 0.0 {
        p *= k as f64 / mu;
        k -= 1;
        acc.add(p * f(k));
    }

    let cut = mu + 25f64.max(12.0 * mu.sqrt());
    let mut p = p_mode;
    let mut k = mode;
    let mut terms = 0usize;
    loop {
        k += 1;
        p *= mu / k as f64;
        acc.add(p * f(k));
        terms += 1;
        if k as f64 >= cut {
            let kf = k as f64;
            let rho = mu / (kf + 2.0) * ((kf + 3.0) / (kf + 2.0)).powf(envelope.degree);
            if rho < 1.0 {
                let next = p * mu / (kf + 1.0) * envelope.scale * (kf + 2.0).powf(envelope.degree);
                if next / (1.0 - rho) < tol {
                    break;
                }
            }
        }
        if terms > MAX_SERIES_TERMS {
            return Err(Error::SeriesTruncation { tol, terms });
        }
    }
    finite(acc.value(), || format!("poisson_expect at mu = {mu}"))
}

/// `k ln(k / mu) + mu - k` without cancellation near `k = mu`.
fn bd0(k: f64, mu: f64) -> f64 {
    if (k - mu).abs() < 0.1 * (k + mu) {
        let v = (k - mu) / (k + mu);
        let mut s = (k - mu) * v;
        let mut ej = 2.0 * k * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                return next;
            }
            s = next;
        }
        s
    } else {
        k * (k / mu).ln() + mu - k
    }
}

/// `ln k! - (k + 1/2) ln k + k - ln sqrt(2 pi)`.
fn stirling_error(k: f64) -> f64 {
    if k <= 15.0 {
        return ln_gamma(k + 1.0) - (k + 0.5) * k.ln() + k - 0.5 * (2.0 * std::f64::consts::PI).ln();
    }
    let k2 = k * k;
    (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0) / k2) / k2) / k2) / k
}

/// Poisson pmf by the saddle-point form, accurate to a few ulp for large `mu`.
fn poisson_pmf(k: u64, mu: f64) -> f64 {
    if k == 0 {
        return (-mu).exp();
    }
    let kf = k as f64;
    (-stirling_error(kf) - bd0(kf, mu)).exp() / (2.0 * std::f64::consts::PI * kf).sqrt()
}

/// Kullback-Leibler divergence between product Poisson laws,
/// `sum_i [theta_i log(theta_i / a_i) + a_i - theta_i]` with `0 log 0 = 0`.
pub fn kl_poisson_loss(theta: &[f64], a: &[f64]) -> Result<f64> {
    if theta.len() != a.len() {
        return Err(Error::DimensionMismatch { expected: theta.len(), got: a.len() });
    }
    let mut acc = CompensatedSum::default();
    for (i, (&t, &ai)) in theta.iter().zip(a).enumerate() {
        if !(t >= 0.0) || !(ai >= 0.0) {
            return Err(Error::invalid("theta/a", format!("negative or NaN entry at {i}")));
        }
        if t == 0.0 {
            acc.add(ai);
        } else if ai == 0.0 {
            return Err(Error::invalid("a", format!("a[{i}] = 0 while theta[{i}] = {t} > 0")));
        } else {
            acc.add(t * (t / ai).ln() + ai - t);
        }
    }
    // Rounding can leave tiny negative totals when theta == a.
    Ok(acc.value().max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    KullbackLeibler,
    SquaredError,
}

impl Loss {
    pub fn evaluate(&self, theta: &[f64], action: &[f64]) -> Result<f64> {
        match self {
            Loss::KullbackLeibler => kl_poisson_loss(theta, action),
            Loss::SquaredError => {
                // Missing trailing coordinates are zero on either side.
                let n = theta.len().max(action.len());
                let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
                Ok((0..n).map(|i| (at(theta, i) - at(action, i)).powi(2)).sum())
            }
        }
    }
}

/// A deterministic map from observations to actions.
pub trait Estimator<Obs: ?Sized>: Sync {
    /// Family plus hyperparameters, e.g. `poisson-js(d=4)`.
    fn id(&self) -> String;
    fn estimate(&self, obs: &Obs) -> Vec<f64>;
}

/// A model at a fixed parameter value, able to simulate observations.
pub trait Model: Sync {
    type Obs;
    fn theta(&self) -> &[f64];
    fn sample(&self, rng: &mut ChaCha8Rng) -> Self::Obs;
}

/// Samples per Monte Carlo chunk; each chunk draws from its own substream.
pub const MC_CHUNK: u64 = 2048;

/// Seeded Monte Carlo mean of `draw` over `n_samples` draws.
///
/// The work is cut into fixed chunks of [`MC_CHUNK`] draws; chunk `k` uses
/// `rng.substream(k)` and chunk moments are merged in index order, so the
/// output bits do not depend on the thread count.
pub fn monte_carlo_mean<F>(n_samples: u64, rng: RngStream, draw: F) -> Result<Moments>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    if n_samples < 2 {
        return Err(Error::invalid("n_samples", format!("need at least 2, got {n_samples}")));
    }
    let chunks = n_samples.div_ceil(MC_CHUNK);
    let parts: Vec<Result<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut gen = rng.substream(chunk).generator();
            let count = MC_CHUNK.min(n_samples - chunk * MC_CHUNK);
            let mut m = Moments::default();
            for _ in 0..count {
                let x = draw(&mut gen)?;
                m.push(finite(x, || "Monte Carlo draw".into())?);
            }
            Ok(m)
        })
        .collect();
    parts
        .into_iter()
        .try_fold(Moments::default(), |acc, part| Ok(acc.merge(&part?)))
}

/// Monte Carlo estimate of `R(theta, estimator)` under `loss`.
pub fn mc_risk<M, E>(model: &M, estimator: &E, loss: Loss, n_samples: u64, rng: RngStream) -> Result<RiskValue>
where
    M: Model,
    E: Estimator<M::Obs> + ?Sized,
{
    let moments = monte_carlo_mean(n_samples, rng, |gen| {
        let obs = model.sample(gen);
        loss.evaluate(model.theta(), &estimator.estimate(&obs))
    })?;
    Ok(RiskValue::monte_carlo(&moments))
}

/// Common-random-number estimate of `R(theta, first) - R(theta, second)`.
pub fn mc_risk_gap<M, E1, E2>(
    model: &M,
    first: &E1,
    second: &E2,
    loss: Loss,
    n_samples: u64,
    rng: RngStream,
) -> Result<RiskValue>
where
    M: Model,
    E1: Estimator<M::Obs> + ?Sized,
    E2: Estimator<M::Obs> + ?Sized,
{
    let moments = monte_carlo_mean(n_samples, rng, |gen| {
        let obs = model.sample(gen);
        let theta = model.theta();
        Ok(loss.evaluate(theta, &first.estimate(&obs))? - loss.evaluate(theta, &second.estimate(&obs))?)
    })?;
    Ok(RiskValue::monte_carlo(&moments))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_poisson(f: impl Fn(u64) -> f64, mu: f64, upto: u64) -> f64 {
        let mut p = (-mu).exp();
        let mut s = p * f(0);
        for k in 1..=upto {
            p *= mu / k as f64;
            s += p * f(k);
        }
        s
    }

    #[test]
    fn reciprocal_identity_at_one() {
        let v = poisson_expect(|k| 1.0 / (k as f64 + 1.0), Envelope::bounded(1.0), 1.0, 1e-12).unwrap();
        assert!((v - (1.0 - (-1f64).exp())).abs() < 1e-12);
        assert!((v - 0.632_120_6).abs() < 1e-7);
    }

    #[test]
    fn point_mass_at_zero() {
        let v = poisson_expect(|k| k as f64, Envelope::polynomial(1.0, 1.0), 0.0, 1e-12).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn log_shift_matches_long_sum() {
        let f = |k: u64| (k as f64 + 0.5).ln();
        let v = poisson_expect(f, Envelope::log_shift(0.5), 4.0, 1e-12).unwrap();
        let oracle = brute_poisson(f, 4.0, 200);
        assert!((v - oracle).abs() < 1e-10, "{v} vs {oracle}");
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(poisson_expect(|_| 1.0, Envelope::bounded(1.0), 1.0, 0.0).is_err());
        assert!(poisson_expect(|_| 1.0, Envelope::bounded(1.0), -1.0, 1e-9).is_err());
    }

    #[test]
    fn normalisation_on_grid() {
        for mu in [0.0, 0.01, 0.5, 3.0, 17.0, 100.0, 2500.0] {
            let v = poisson_expect(|_| 2.5, Envelope::bounded(2.5), mu, 1e-12).unwrap();
            assert!((v - 2.5).abs() < 1e-11, "mu = {mu}: {v}");
        }
    }

    #[test]
    fn reciprocal_identity_grid() {
        for i in 1..=500 {
            let mu = 0.1 * i as f64;
            let v = poisson_expect(|k| 1.0 / (k as f64 + 1.0), Envelope::bounded(1.0), mu, 1e-12).unwrap();
            let exact = -(-mu).exp_m1() / mu;
            assert!((v - exact).abs() < 1e-11, "mu = {mu}");
        }
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_poisson_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((kl_poisson_loss(&[0.0, 0.0], &[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-15);
        let v = kl_poisson_loss(&[1.0, 2.0], &[2.0, 1.0]).unwrap();
        let hand = 1.0 * (0.5f64).ln() + 2.0 - 1.0 + 2.0 * 2f64.ln() + 1.0 - 2.0;
        assert!((v - hand).abs() < 1e-15);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn kl_errors() {
        assert!(matches!(kl_poisson_loss(&[1.0], &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        assert!(kl_poisson_loss(&[1.0], &[0.0]).is_err());
        assert_eq!(kl_poisson_loss(&[0.0], &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn l1_projection_lands_on_face() {
        let s = L1BallSpace::new(3).unwrap();
        let p = s.project(&[5.0, -1.0, 2.0]);
        assert!(s.contains(&p) || (p.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert!((p.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert_eq!(p[1], 0.0);
        assert!(s.contains(&[1.0, 1.0, 1.0]));
        assert!(!s.contains(&[1.0, 1.0, 1.5]));
    }

    #[test]
    fn ellipsoid_and_ball_membership() {
        let e = SobolevEllipsoid::new(1.0, 1.0, 10).unwrap();
        assert!(e.contains(&[0.5, 0.25]));
        assert!(!e.contains(&[0.0, 0.6]));
        let p = e.project(&[0.0, 2.0]);
        assert!((e.weighted_norm_sq(&p) - 1.0).abs() < 1e-12);
        let b = L2Ball::new(2).unwrap();
        assert!(b.contains(&[1.0, 1.0]));
        assert!(!b.contains(&[1.5, 1.0]));
        assert!(SobolevEllipsoid::new(0.0, 1.0, 1).is_err());
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative(
            pairs in proptest::collection::vec((0.0f64..20.0, 0.01f64..20.0), 1..12),
            zero_mask in proptest::collection::vec(any::<bool>(), 12),
        ) {
            let theta: Vec<f64> = pairs.iter().zip(&zero_mask).map(|((t, _), z)| if *z { 0.0 } else { *t }).collect();
            let a: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let v = kl_poisson_loss(&theta, &a).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert!(kl_poisson_loss(&a, &a).unwrap() == 0.0);
        }

        #[test]
        fn l1_projection_is_feasible(theta in proptest::collection::vec(-5.0f64..10.0, 1..10)) {
            let s = L1BallSpace::new(theta.len()).unwrap();
            let p = s.project(&theta);
            prop_assert!(p.iter().all(|&t| t >= 0.0));
            prop_assert!(p.iter().sum::<f64>() <= theta.len() as f64 * (1.0 + 1e-12));
        }
    }
}
