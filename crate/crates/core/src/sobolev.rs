//! Gaussian infinite sequence model `X_i ~ N(theta_i, 1/n)` on the Sobolev
//! ellipsoid `sum i^{2 alpha} theta_i^2 <= B` under squared error.
//!
//! Sequences are stored to a finite number of coordinates; unstored
//! coordinates of theta are exactly zero. Closed-form risks carry an
//! explicit bound on the discarded variance tail.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Estimator, Model, RiskValue};
use crate::numeric::{golden_section_min, integrate, CompensatedSum, Moments, Quadrature};
use crate::rng::RngStream;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha", format!("must be positive, got {alpha}")));
    }
    Ok(())
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(name, format!("must be positive, got {v}")));
    }
    Ok(())
}

/// Gaussian prior `N(0, s i^{-2 alpha - 1})` on each coordinate; `s = 1` is
/// the prior `G`, `s < 1` the rescaled `G(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPriorG {
    pub alpha: f64,
    pub s: f64,
}

impl GaussianPriorG {
    pub fn new(alpha: f64, s: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::invalid("s", format!("must lie in (0, 1], got {s}")));
        }
        Ok(Self { alpha, s })
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.s * (i as f64).powf(-2.0 * self.alpha - 1.0)
    }

    /// Posterior-mean factor `1 / (1 + i^{2 alpha + 1} / (n s))` for 1-based `i`.
    pub fn shrink_factor(&self, i: usize, n: f64) -> f64 {
        1.0 / (1.0 + (i as f64).powf(2.0 * self.alpha + 1.0) / (n * self.s))
    }
}

/// `x_i -> x_i / (1 + i^{2 alpha + 1} / (n s))`.
pub fn estimate_shrinkage_g(x: &[f64], alpha: f64, s: f64, n: f64) -> Result<Vec<f64>> {
    let prior = GaussianPriorG::new(alpha, s)?;
    check_positive("n", n)?;
    Ok(x.iter().enumerate().map(|(k, &v)| v * prior.shrink_factor(k + 1, n)).collect())
}

/// The Bayes estimator of [`GaussianPriorG`] at sample size `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkageG {
    pub prior: GaussianPriorG,
    pub n: f64,
}

impl ShrinkageG {
    pub fn new(alpha: f64, s: f64, n: f64) -> Result<Self> {
        check_positive("n", n)?;
        Ok(Self { prior: GaussianPriorG::new(alpha, s)?, n })
    }
}

impl Estimator<Vec<f64>> for ShrinkageG {
    fn id(&self) -> String {
        format!("gauss-g(alpha={}, s={}, n={})", self.prior.alpha, self.prior.s, self.n)
    }

    fn estimate(&self, obs: &Vec<f64>) -> Vec<f64> {
        obs.iter().enumerate().map(|(k, &v)| v * self.prior.shrink_factor(k + 1, self.n)).collect()
    }
}

/// `X_i = theta_i + N_i / sqrt(n)` for `i <= i_max`.
#[derive(Debug, Clone)]
pub struct GaussianSequenceModel {
    theta: Vec<f64>,
    n: f64,
    i_max: usize,
}

impl GaussianSequenceModel {
    pub fn new(theta: Vec<f64>, n: f64, i_max: usize) -> Result<Self> {
        check_positive("n", n)?;
        if theta.len() > i_max {
            return Err(Error::Truncation { required: theta.len(), available: i_max });
        }
        let mut theta = theta;
        theta.resize(i_max, 0.0);
        Ok(Self { theta, n, i_max })
    }

    pub fn i_max(&self) -> usize {
        self.i_max
    }
}

impl Model for GaussianSequenceModel {
    type Obs = Vec<f64>;

    fn theta(&self) -> &[f64] {
        &self.theta
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let sd = self.n.sqrt().recip();
        self.theta
            .iter()
            .map(|&t| {
                let z: f64 = StandardNormal.sample(rng);
                t + sd * z
            })
            .collect()
    }
}

/// `ceil(8 (n s)^{1/(2 alpha + 1)})`.
pub fn default_i_max(alpha: f64, s: f64, n: f64) -> usize {
    (8.0 * (n * s).powf(1.0 / (2.0 * alpha + 1.0))).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedRisk {
    pub risk: RiskValue,
    /// Upper bound on the variance terms beyond `i_max` (not included in `risk`).
    pub tail_bound: f64,
    pub i_max: usize,
}

fn variance_tail_bound(alpha: f64, s: f64, n: f64, i_max: usize) -> f64 {
    // n^{-1} sum_{i > I} (1 + i^m/(ns))^{-2} <= n^{-1} (ns)^2 I^{1-2m} / (2m - 1)
    let m = 2.0 * alpha + 1.0;
    (n * s).powi(2) / n * (i_max as f64).powf(1.0 - 2.0 * m) / (2.0 * m - 1.0)
}

fn required_i_max(alpha: f64, s: f64, n: f64, tol: f64) -> usize {
    let m = 2.0 * alpha + 1.0;
    ((n * s).powi(2) / (n * tol * (2.0 * m - 1.0))).powf(1.0 / (2.0 * m - 1.0)).ceil() as usize
}

/// Closed-form squared-error risk of [`ShrinkageG`]:
/// `sum theta_i^2 (1 - f_i)^2 + n^{-1} sum f_i^2` with `f_i` the shrink factor.
pub fn risk_g(theta: &[f64], alpha: f64, s: f64, n: f64, i_max: usize, tol: f64) -> Result<CertifiedRisk> {
    let prior = GaussianPriorG::new(alpha, s)?;
    check_positive("n", n)?;
    check_positive("tol", tol)?;
    if theta.len() > i_max {
        return Err(Error::Truncation { required: theta.len(), available: i_max });
    }
    let tail_bound = variance_tail_bound(alpha, s, n, i_max);
    if tail_bound > tol {
        return Err(Error::Truncation { required: required_i_max(alpha, s, n, tol), available: i_max });
    }
    let mut acc = CompensatedSum::default();
    for i in 1..=i_max {
        let f = prior.shrink_factor(i, n);
        let t = theta.get(i - 1).copied().unwrap_or(0.0);
        acc.add(t * t * (1.0 - f).powi(2) + f * f / n);
    }
    Ok(CertifiedRisk { risk: RiskValue::closed_form(acc.value()), tail_bound, i_max })
}

/// `int_0^inf (1 + x^{2 alpha + 1})^{-2} dx`, split at 1 with `x = 1/t` on the tail.
pub fn integral_i(alpha: f64, tol: f64) -> Result<Quadrature> {
    check_alpha(alpha)?;
    check_positive("tol", tol)?;
    let m = 2.0 * alpha + 1.0;
    let head = integrate(|x| (1.0 + x.powf(m)).powi(-2), 0.0, 1.0, tol / 2.0, 10_000)?;
    let tail = integrate(|t| t.powf(2.0 * m - 2.0) / (t.powf(m) + 1.0).powi(2), 0.0, 1.0, tol / 2.0, 10_000)?;
    Ok(Quadrature { value: head.value + tail.value, error: head.error + tail.error, panels: head.panels + tail.panels })
}

/// `r = (2 alpha + 2) / (4 alpha + 1)` and `A = r^{(2 alpha + 2)/(2 alpha + 1)}`.
pub fn theorem_factors(alpha: f64) -> (f64, f64) {
    let r = (2.0 * alpha + 2.0) / (4.0 * alpha + 1.0);
    (r, r.powf((2.0 * alpha + 2.0) / (2.0 * alpha + 1.0)))
}

/// The n-free constant
/// `c(s) = B A [ (1 + r)^{-2} - s^{-2} (1 + r/s)^{-2} ] + (1 - s^{1/(2 alpha + 1)}) I(alpha)`.
pub fn c_bound_with_integral(s: f64, alpha: f64, b: f64, integral: f64) -> f64 {
    let (r, a) = theorem_factors(alpha);
    let bias = b * a * ((1.0 + r).powi(-2) - s.powi(-2) * (1.0 + r / s).powi(-2));
    bias + (1.0 - s.powf(1.0 / (2.0 * alpha + 1.0))) * integral
}

pub fn c_bound(s: f64, alpha: f64, b: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::invalid("s", format!("must lie in (0, 1), got {s}")));
    }
    check_positive("B", b)?;
    Ok(c_bound_with_integral(s, alpha, b, integral_i(alpha, 1e-12)?.value))
}

/// The `-n^{-1/(2 alpha + 1)}` term dropped from `c` at finite `n`.
pub fn c_bound_finite_n_correction(alpha: f64, n: f64) -> f64 {
    -n.powf(-1.0 / (2.0 * alpha + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveAxis {
    Alpha,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CBoundCurvePoint {
    pub alpha: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub s_star: f64,
    pub c_value: f64,
    pub integral_i: f64,
}

pub const S_GRID_POINTS: usize = 4097;
const S_LO: f64 = 1e-6;
const S_HI: f64 = 1.0 - 1e-6;

/// `sup_s c(s; alpha, B)`: best of a 4097-point grid on `(1e-6, 1 - 1e-6)`
/// (ties toward smaller s), refined by golden section between neighbours.
pub fn c_sup(alpha: f64, b: f64, integral: f64) -> (f64, f64) {
    let step = (S_HI - S_LO) / (S_GRID_POINTS - 1) as f64;
    let at = |k: usize| S_LO + step * k as f64;
    let mut best = (at(0), c_bound_with_integral(at(0), alpha, b, integral));
    let mut best_k = 0;
    for k in 1..S_GRID_POINTS {
        let v = c_bound_with_integral(at(k), alpha, b, integral);
        if v > best.1 {
            best = (at(k), v);
            best_k = k;
        }
    }
    let lo = at(best_k.saturating_sub(1));
    let hi = at((best_k + 1).min(S_GRID_POINTS - 1));
    let (s, neg) = golden_section_min(|s| -c_bound_with_integral(s, alpha, b, integral), lo, hi, 1e-13);
    if -neg > best.1 {
        (s, -neg)
    } else {
        best
    }
}

/// Curve of `sup_s c` along `alpha` (with `B = fixed_value`) or along `B`
/// (with `alpha = fixed_value`). Output order follows `grid`.
pub fn c_curve(vary: CurveAxis, fixed_value: f64, grid: &[f64]) -> Result<Vec<CBoundCurvePoint>> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "empty"));
    }
    check_positive(if vary == CurveAxis::Alpha { "B" } else { "alpha" }, fixed_value)?;
    for &g in grid {
        check_positive(if vary == CurveAxis::Alpha { "alpha" } else { "B" }, g)?;
    }
    let fixed_integral = match vary {
        CurveAxis::B => Some(integral_i(fixed_value, 1e-12)?.value),
        CurveAxis::Alpha => None,
    };
    grid.par_iter()
        .map(|&g| {
            let (alpha, b) = match vary {
                CurveAxis::Alpha => (g, fixed_value),
                CurveAxis::B => (fixed_value, g),
            };
            let integral = match fixed_integral {
                Some(v) => v,
                None => integral_i(alpha, 1e-12)?.value,
            };
            let (s_star, c_value) = c_sup(alpha, b, integral);
            Ok(CBoundCurvePoint { alpha, b, s_star, c_value, integral_i: integral })
        })
        .collect()
}

/// `x* = ((2 alpha + 2)/(4 alpha + 1))^{1/(2 alpha + 1)} n^{1/(2 alpha + 1)}`.
pub fn x_star(alpha: f64, n: f64) -> f64 {
    let (r, _) = theorem_factors(alpha);
    (r * n).powf(1.0 / (2.0 * alpha + 1.0))
}

/// `f(x, y) = y^2 x^{2 alpha + 2} / (1 + y x^{2 alpha + 1})^2`.
pub fn appendix_c_f(x: f64, y: f64, alpha: f64) -> f64 {
    let m = 2.0 * alpha + 1.0;
    y * y * x.powf(m + 1.0) / (1.0 + y * x.powf(m)).powi(2)
}

/// `f(x, 1/n) - f(x, 1/(n s))`: the per-unit-ellipsoid-mass bias gap of
/// `G` over `G(s)` at coordinate `x`.
pub fn appendix_c_gap(x: f64, n: f64, s: f64, alpha: f64) -> f64 {
    appendix_c_f(x, 1.0 / n, alpha) - appendix_c_f(x, 1.0 / (n * s), alpha)
}

/// Exact finite-n value of `inf_theta [R(theta, G) - R(theta, G(s))]`
/// over the ellipsoid: the variance difference plus
/// `B * min(0, min_i gap(i))`, attained by a single spike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapInfimum {
    pub value: f64,
    pub variance_difference: f64,
    pub min_coordinate_gap: f64,
    /// 1-based spike coordinate, `None` when theta = 0 is optimal.
    pub spike_index: Option<usize>,
    pub tail_bound: f64,
}

pub fn inf_gap_g_vs_gs(alpha: f64, b: f64, s: f64, n: f64, i_max: usize, tol: f64) -> Result<GapInfimum> {
    check_positive("B", b)?;
    let g = GaussianPriorG::new(alpha, 1.0)?;
    let gs = GaussianPriorG::new(alpha, s)?;
    let r_g = risk_g(&[], alpha, 1.0, n, i_max, tol)?;
    let r_gs = risk_g(&[], alpha, s, n, i_max, tol)?;
    let mut best = (0.0, None);
    for i in 1..=i_max {
        let gap = appendix_c_gap(i as f64, n, s, alpha);
        if gap < best.0 {
            best = (gap, Some(i));
        }
    }
    debug_assert!(g.shrink_factor(1, n) >= gs.shrink_factor(1, n));
    let variance_difference = r_g.risk.value - r_gs.risk.value;
    Ok(GapInfimum {
        value: variance_difference + b * best.0,
        variance_difference,
        min_coordinate_gap: best.0,
        spike_index: best.1,
        tail_bound: r_g.tail_bound + r_gs.tail_bound,
    })
}

/// Mixing weights over the truncation level `d` of the sieve prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SieveMixing {
    /// `M(d) = e^{-a d} / sum_j e^{-a j}`.
    Geometric { a: f64 },
    /// Explicit finite weights for `d = 1..=len`.
    Fixed(Vec<f64>),
}

/// `S = sum_d M(d) [ prod_{i <= d} N(0, d^{2 alpha + 1} i^{-2 alpha - 1} / n) x prod_{i > d} delta_0 ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SievePriorS {
    pub alpha: f64,
    pub n: f64,
    pub mixing: SieveMixing,
    /// Smallest `d` whose remaining tail mass `sum_{j > d} M(j)` is below `tol`.
    pub d_tail: usize,
    pub tol: f64,
}

impl SievePriorS {
    pub fn geometric(alpha: f64, a: f64, n: f64, tol: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_positive("a", a)?;
        check_positive("n", n)?;
        check_positive("tol", tol)?;
        // sum_{j > d} M(j) = e^{-a d}
        let d_tail = ((-tol.ln()) / a).floor() as usize + 1;
        Ok(Self { alpha, n, mixing: SieveMixing::Geometric { a }, d_tail, tol })
    }

    pub fn with_weights(alpha: f64, n: f64, weights: Vec<f64>) -> Result<Self> {
        check_alpha(alpha)?;
        check_positive("n", n)?;
        let total: f64 = weights.iter().sum();
        if weights.is_empty() || weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("weights", "must be a non-empty probability vector"));
        }
        let d_tail = weights.len();
        Ok(Self { alpha, n, mixing: SieveMixing::Fixed(weights), d_tail, tol: 0.0 })
    }

    /// `log M(d)` for `d >= 1`.
    pub fn log_weight(&self, d: usize) -> f64 {
        match &self.mixing {
            SieveMixing::Geometric { a } => -a * (d as f64 - 1.0) + (-(-a).exp()).ln_1p(),
            SieveMixing::Fixed(w) => w.get(d - 1).map_or(f64::NEG_INFINITY, |v| v.ln()),
        }
    }

    /// `sum_{j > d} M(j)`.
    pub fn tail_mass(&self, d: usize) -> f64 {
        match &self.mixing {
            SieveMixing::Geometric { a } => (-a * d as f64).exp(),
            SieveMixing::Fixed(w) => w.iter().skip(d).sum(),
        }
    }

    /// Prior-to-noise variance ratio `kappa_{d,i} = (d / i)^{2 alpha + 1}`.
    pub fn kappa(&self, d: usize, i: usize) -> f64 {
        (d as f64 / i as f64).powf(2.0 * self.alpha + 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SieveFit {
    pub estimate: Vec<f64>,
    /// Posterior weights of `d = 1..=d_max`.
    pub weights: Vec<f64>,
    pub d_max: usize,
}

/// Log marginal likelihood ratio of component `d` against the all-zero model,
/// plus `log M(d)`.
fn sieve_log_weight(prior: &SievePriorS, x: &[f64], d: usize) -> f64 {
    let mut acc = CompensatedSum::default();
    acc.add(prior.log_weight(d));
    for i in 1..=d {
        let k = prior.kappa(d, i);
        let xi = x.get(i - 1).copied().unwrap_or(0.0);
        acc.add(-0.5 * k.ln_1p() + 0.5 * prior.n * xi * xi * k / (1.0 + k));
    }
    acc.value()
}

const LOG_WEIGHT_GAP: f64 = 40.0;
const MAX_SIEVE_D: usize = 100_000;

/// Posterior mean under the sieve prior.
///
/// Component log-weights
/// `l(d) = log M(d) + sum_{i <= d} [-log(1 + kappa)/2 + (n x_i^2 / 2) kappa / (1 + kappa)]`
/// are normalised by log-sum-exp; `theta_i = x_i sum_{d >= i} w(d) kappa/(1 + kappa)`.
/// Components are added until the prior tail is below `tol` and the current
/// `l(d)` is 40 nats under the running maximum.
pub fn estimate_sieve_s(x: &[f64], prior: &SievePriorS) -> Result<SieveFit> {
    let mut logw: Vec<f64> = Vec::new();
    let mut running_max = f64::NEG_INFINITY;
    let mut d = 0;
    loop {
        d += 1;
        if let SieveMixing::Fixed(w) = &prior.mixing {
            if d > w.len() {
                d -= 1;
                break;
            }
        }
        if d > x.len() {
            return Err(Error::Truncation { required: suggest_d_max(prior, x, d), available: x.len() });
        }
        let l = sieve_log_weight(prior, x, d);
        logw.push(l);
        running_max = running_max.max(l);
        if d >= prior.d_tail && l < running_max - LOG_WEIGHT_GAP {
            break;
        }
    }
    let lse = running_max + logw.iter().map(|l| (l - running_max).exp()).sum::<f64>().ln();
    let weights: Vec<f64> = logw.iter().map(|l| (l - lse).exp()).collect();
    let estimate = (1..=x.len())
        .map(|i| {
            if i > d {
                return 0.0;
            }
            let factor: f64 = (i..=d)
                .map(|dd| {
                    let k = prior.kappa(dd, i);
                    weights[dd - 1] * k / (1.0 + k)
                })
                .sum();
            factor * x[i - 1]
        })
        .collect();
    Ok(SieveFit { estimate, weights, d_max: d })
}

/// Continues the stopping rule past the stored data with `x_i^2` replaced by
/// its pure-noise mean `1/n`.
fn suggest_d_max(prior: &SievePriorS, x: &[f64], from: usize) -> usize {
    let mut padded = x.to_vec();
    let noise = prior.n.sqrt().recip();
    let mut running_max = (1..from).map(|d| sieve_log_weight(prior, x, d)).fold(f64::NEG_INFINITY, f64::max);
    let mut d = from;
    while d < MAX_SIEVE_D {
        padded.resize(d, noise);
        let l = sieve_log_weight(prior, &padded, d);
        running_max = running_max.max(l);
        if d >= prior.d_tail && l < running_max - LOG_WEIGHT_GAP {
            break;
        }
        d += 1;
    }
    d
}

/// Bayes estimator of the sieve prior.
#[derive(Debug, Clone, PartialEq)]
pub struct SieveS {
    pub prior: SievePriorS,
}

impl Estimator<Vec<f64>> for SieveS {
    fn id(&self) -> String {
        format!("gauss-sieve(alpha={}, n={})", self.prior.alpha, self.prior.n)
    }

    fn estimate(&self, obs: &Vec<f64>) -> Vec<f64> {
        estimate_sieve_s(obs, &self.prior).map(|f| f.estimate).unwrap_or_else(|_| vec![f64::NAN; obs.len()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorMassReport {
    pub n: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub alpha: f64,
    pub a: f64,
    /// `T = floor((n B)^{1/(4 alpha + 2)})`.
    pub t: u64,
    pub mass_complement: f64,
    pub std_err: f64,
    /// `sum_{d <= T} M(d) min(1, LM_d) + sum_{d > T} M(d)`.
    pub bound_value: f64,
    /// `bound_value * e^{a T}`.
    pub c1: f64,
    pub strata: usize,
}

/// Exceedance probability estimate for one stratum.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Stratum {
    p: f64,
    se: f64,
}

/// `Pr(sum_{i <= d} N_i^2 / i > threshold)` by exponentially tilted sampling.
///
/// The tilt `lambda in [0, 1/2)` solves `sum_i 1/(i - 2 lambda) = threshold`
/// so the tilted mean sits at the threshold; coordinates are drawn as
/// `N(0, 1/(1 - 2 lambda / i))` and weighted by
/// `prod_i (1 - 2 lambda/i)^{-1/2} exp(-lambda S)`. With `lambda = 0` this is
/// plain simulation.
fn weighted_chi_square_exceedance(d: usize, threshold: f64, samples: u64, rng: RngStream) -> Stratum {
    if threshold <= 0.0 {
        return Stratum { p: 1.0, se: 0.0 };
    }
    let harmonic: f64 = (1..=d).map(|i| 1.0 / i as f64).sum();
    let lambda = if threshold <= harmonic {
        0.0
    } else {
        let mean_at = |l: f64| (1..=d).map(|i| 1.0 / (i as f64 - 2.0 * l)).sum::<f64>();
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean_at(mid) < threshold {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let sds: Vec<f64> = (1..=d).map(|i| (1.0 - 2.0 * lambda / i as f64).powf(-0.5)).collect();
    let log_norm: f64 = sds.iter().map(|s| s.ln()).sum();
    let mut gen = rng.generator();
    let mut m = Moments::default();
    for _ in 0..samples {
        let mut stat = 0.0;
        for (i, sd) in sds.iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut gen);
            let v = sd * z;
            stat += v * v / (i + 1) as f64;
        }
        m.push(if stat > threshold { (log_norm - lambda * stat).exp() } else { 0.0 });
    }
    Stratum { p: m.mean.clamp(0.0, 1.0), se: m.std_err() }
}

/// Laurent-Massart: `Pr(chi2_d >= d + 2 sqrt(d x) + 2x) <= e^{-x}`, solved for `x`.
pub fn laurent_massart_tail(d: usize, threshold: f64) -> f64 {
    let df = d as f64;
    if threshold <= df {
        return 1.0;
    }
    let root = 0.5 * ((2.0 * threshold - df).sqrt() - df.sqrt());
    (-root * root).exp().min(1.0)
}

const STRATA_BLOCK: usize = 16;
const MAX_STRATA: usize = 20_000;

fn stratified_complement<T>(
    prior: &SievePriorS,
    threshold: T,
    mc_samples: u64,
    rng: RngStream,
) -> Result<(f64, f64, usize)>
where
    T: Fn(usize) -> f64 + Sync,
{
    let mut total = CompensatedSum::default();
    let mut var = 0.0;
    let mut d = 0;
    loop {
        let block: Vec<(f64, Stratum)> = (d + 1..=d + STRATA_BLOCK)
            .into_par_iter()
            .map(|dd| {
                let w = prior.log_weight(dd).exp();
                (w, weighted_chi_square_exceedance(dd, threshold(dd), mc_samples, rng.substream(dd as u64)))
            })
            .collect();
        for (w, st) in &block {
            total.add(w * st.p);
            var += (w * st.se).powi(2);
        }
        d += STRATA_BLOCK;
        let tail = prior.tail_mass(d);
        if d >= prior.d_tail.min(MAX_STRATA) && tail <= 1e-6 * total.value() || tail == 0.0 {
            total.add(tail);
            return Ok((total.value().clamp(0.0, 1.0), var.sqrt(), d));
        }
        if d >= MAX_STRATA {
            return Err(Error::Truncation { required: d + STRATA_BLOCK, available: MAX_STRATA });
        }
    }
}

fn check_mc_samples(mc_samples: u64) -> Result<()> {
    if mc_samples < 10_000 {
        return Err(Error::invalid("mc_samples", format!("need at least 10^4, got {mc_samples}")));
    }
    Ok(())
}

/// `S(Theta^c)`: prior mass of the sieve prior outside the ellipsoid.
///
/// Stratified over `d` with exact weights `M(d)`; within a stratum the
/// exceedance `Pr(sum_{i <= d} N_i^2 / i > n B / d^{2 alpha + 1})` is
/// simulated with exponential tilting. Strata are added until the remaining
/// mixing mass is below 1e-6 of the running total (the remainder is added
/// as if its exceedance probability were 1).
pub fn prior_mass_complement(prior: &SievePriorS, b: f64, mc_samples: u64, rng: RngStream) -> Result<PriorMassReport> {
    check_positive("B", b)?;
    check_mc_samples(mc_samples)?;
    let a = match prior.mixing {
        SieveMixing::Geometric { a } => a,
        SieveMixing::Fixed(_) => return Err(Error::invalid("prior", "prior mass report needs geometric mixing")),
    };
    let (alpha, n) = (prior.alpha, prior.n);
    let m = 2.0 * alpha + 1.0;
    let (mass, se, strata) =
        stratified_complement(prior, |d| n * b / (d as f64).powf(m), mc_samples, rng)?;
    let t = (n * b).powf(1.0 / (4.0 * alpha + 2.0)).floor() as u64;
    let threshold_t = if t == 0 { f64::INFINITY } else { n * b / (t as f64).powf(m) };
    let head: f64 = (1..=t as usize)
        .map(|d| prior.log_weight(d).exp() * laurent_massart_tail(d, threshold_t))
        .sum();
    let bound_value = head + prior.tail_mass(t as usize);
    Ok(PriorMassReport {
        n,
        b,
        alpha,
        a,
        t,
        mass_complement: mass,
        std_err: se,
        bound_value,
        c1: bound_value * (a * t as f64).exp(),
        strata,
    })
}

/// `C(Theta^c)` for the compound prior with `theta_i ~ N(0, i^{-2 alpha - 1})`,
/// `i <= d`: the exceedance threshold is `B` in every stratum, independent of `n`.
pub fn compound_prior_mass_complement(alpha: f64, a: f64, b: f64, mc_samples: u64, rng: RngStream) -> Result<(f64, f64)> {
    check_positive("B", b)?;
    check_mc_samples(mc_samples)?;
    let prior = SievePriorS::geometric(alpha, a, 1.0, 1e-12)?;
    let (mass, se, _) = stratified_complement(&prior, |_| b, mc_samples, rng)?;
    Ok((mass, se))
}
