//! Sandwich bounds on the epsilon-admissibility functional
//! `R(Theta, delta) = sup_{delta~} inf_theta [R(theta, delta) - R(theta, delta~)]`.
//!
//! * [`lemma1_lower`]: for any comparator `delta~`,
//!   `inf_theta [R(theta, delta) - R(theta, delta~)]` is a lower bound.
//! * [`lemma2_upper`]: for any prior `Pi` with Bayes solution `delta_Pi`,
//!   `int [R(theta, delta) - R(theta, delta_Pi)] dPi` is an upper bound.
//! * [`c_admissibility_lower`]: the ratio analogue,
//!   `sup_theta R(theta, delta~) / R(theta, delta)` over the searched set.
//!
//! Monte Carlo inputs widen every bound by 4 standard errors in the
//! conservative direction.

use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ParameterSpace, RiskValue};
use crate::numeric::grid_then_golden_min;

/// Standard errors added to Monte Carlo based bounds.
pub const MC_WIDENING: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchStrategy {
    Grid,
    ReduceToScalar,
    CoordinateSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaOptimizerConfig {
    pub strategy: SearchStrategy,
    pub grid_points: usize,
    pub tol: f64,
}

impl Default for ThetaOptimizerConfig {
    fn default() -> Self {
        Self { strategy: SearchStrategy::ReduceToScalar, grid_points: 2049, tol: 1e-9 }
    }
}

impl ThetaOptimizerConfig {
    pub fn grid(grid_points: usize) -> Self {
        Self { strategy: SearchStrategy::Grid, grid_points, tol: 1e-9 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 2 {
            return Err(Error::invalid("grid_points", format!("need at least 2, got {}", self.grid_points)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", format!("must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Where the theta-search runs.
#[derive(Debug, Clone, PartialEq)]
pub enum SearchSet {
    /// The risk functional depends on theta only through a scalar in `[lo, hi]`.
    Interval { lo: f64, hi: f64 },
    /// An explicit list of parameter values.
    Points(Vec<Vec<f64>>),
    /// A coordinate box intersected with a parameter space; candidate points
    /// are projected onto the space before evaluation.
    Region { space: ParameterSpace, lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub value: f64,
    pub argmin: Vec<f64>,
    pub evaluations: usize,
    pub widened_by: f64,
    pub comparator_id: String,
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    pub value: f64,
    pub prior_id: String,
    pub bayes_id: String,
    pub widened_by: f64,
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsSandwich {
    pub lower: f64,
    pub upper: f64,
    pub comparator_id: String,
    pub prior_id: String,
    pub method_notes: String,
}

impl EpsSandwich {
    pub fn new(lower: &LowerBound, upper: &UpperBound) -> Self {
        Self {
            lower: lower.value,
            upper: upper.value,
            comparator_id: lower.comparator_id.clone(),
            prior_id: upper.prior_id.clone(),
            method_notes: format!("lower: {}; upper: {}", lower.notes, upper.notes),
        }
    }

    pub fn is_nested(&self) -> bool {
        self.lower <= self.upper
    }
}

/// Collects the first failure raised inside a closure that must return `f64`.
struct FailureSlot(Mutex<Option<Error>>);

impl FailureSlot {
    fn new() -> Self {
        Self(Mutex::new(None))
    }

    fn record(&self, err: Error) -> f64 {
        let mut slot = self.0.lock().expect("failure slot poisoned");
        slot.get_or_insert(err);
        f64::NAN
    }

    fn check(self) -> Result<()> {
        match self.0.into_inner().expect("failure slot poisoned") {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

fn checked(value: Result<RiskValue>, point: &[f64], slot: &FailureSlot, widen_sign: f64) -> f64 {
    match value {
        Ok(r) if r.value.is_finite() && r.se().is_finite() => r.value + widen_sign * MC_WIDENING * r.se(),
        Ok(r) => slot.record(Error::NonFinite { context: format!("risk value {} at theta = {point:?}", r.value) }),
        Err(e) => slot.record(e),
    }
}

fn grid_points_on(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|k| if k + 1 == points { hi } else { lo + step * k as f64 }).collect()
}

fn first_min(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v < values[best] { i } else { best })
}

/// Minimises `objective` over the search set. `objective` already contains
/// any Monte Carlo widening.
fn minimise<F>(search: &SearchSet, objective: F, opt: &ThetaOptimizerConfig) -> Result<(f64, Vec<f64>, usize)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    opt.validate()?;
    match (search, opt.strategy) {
        (SearchSet::Interval { lo, hi }, SearchStrategy::Grid) => {
            check_interval(*lo, *hi)?;
            let xs = grid_points_on(*lo, *hi, opt.grid_points);
            let vals: Vec<f64> = xs.par_iter().map(|&x| objective(&[x])).collect();
            let k = first_min(&vals);
            Ok((vals[k], vec![xs[k]], xs.len()))
        }
        (SearchSet::Interval { lo, hi }, SearchStrategy::ReduceToScalar) => {
            check_interval(*lo, *hi)?;
            let xs = grid_points_on(*lo, *hi, opt.grid_points);
            let vals: Vec<f64> = xs.par_iter().map(|&x| objective(&[x])).collect();
            let k = first_min(&vals);
            let refined = grid_then_golden_min(|x| objective(&[x]), xs[k.saturating_sub(1)], xs[(k + 1).min(xs.len() - 1)], 3, opt.tol);
            if refined.value < vals[k] {
                Ok((refined.value, vec![refined.argmin], xs.len() + 3))
            } else {
                Ok((vals[k], vec![xs[k]], xs.len()))
            }
        }
        (SearchSet::Points(points), _) => {
            if points.is_empty() {
                return Err(Error::invalid("search", "empty point set"));
            }
            let vals: Vec<f64> = points.par_iter().map(|p| objective(p)).collect();
            let k = first_min(&vals);
            Ok((vals[k], points[k].clone(), points.len()))
        }
        (SearchSet::Region { space, lo, hi }, SearchStrategy::CoordinateSearch) => {
            if lo.len() != hi.len() || lo.is_empty() {
                return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
            }
            let mut theta: Vec<f64> = space.project(&lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect::<Vec<_>>());
            let mut best = objective(&theta);
            let mut evaluations = 1;
            let per_coordinate = opt.grid_points.min(65);
            for _sweep in 0..50 {
                let before = best;
                for j in 0..theta.len() {
                    let m = grid_then_golden_min(
                        |t| {
                            let mut cand = theta.clone();
                            cand[j] = t;
                            objective(&space.project(&cand))
                        },
                        lo[j],
                        hi[j],
                        per_coordinate,
                        opt.tol,
                    );
                    evaluations += per_coordinate;
                    if m.value < best {
                        theta[j] = m.argmin;
                        theta = space.project(&theta);
                        best = m.value;
                    }
                }
                if !(before - best > opt.tol) {
                    break;
                }
            }
            Ok((best, theta, evaluations))
        }
        (set, strategy) => Err(Error::invalid(
            "strategy",
            format!("{strategy:?} does not apply to search set {}", set_name(set)),
        )),
    }
}

fn set_name(set: &SearchSet) -> &'static str {
    match set {
        SearchSet::Interval { .. } => "interval",
        SearchSet::Points(_) => "points",
        SearchSet::Region { .. } => "region",
    }
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::invalid("interval", format!("need finite lo <= hi, got [{lo}, {hi}]")));
    }
    Ok(())
}

/// Lower bound `inf_theta [R(theta, delta) - R(theta, delta~)]` over `search`.
///
/// `risk_diff` returns the difference at a point of the search set (a scalar
/// reduction for [`SearchSet::Interval`]). Monte Carlo differences are
/// lowered by 4 standard errors before taking the infimum.
pub fn lemma1_lower<F>(
    delta_id: &str,
    comparator_id: &str,
    search: &SearchSet,
    risk_diff: F,
    opt: &ThetaOptimizerConfig,
) -> Result<LowerBound>
where
    F: Fn(&[f64]) -> Result<RiskValue> + Sync,
{
    let slot = FailureSlot::new();
    let (value, argmin, evaluations) = minimise(search, |t| checked(risk_diff(t), t, &slot, -1.0), opt)?;
    slot.check()?;
    Ok(LowerBound {
        value,
        argmin,
        evaluations,
        widened_by: MC_WIDENING,
        comparator_id: comparator_id.to_string(),
        notes: format!(
            "inf of R({delta_id}) - R({comparator_id}) by {:?} over {} ({evaluations} evaluations, first index wins ties)",
            opt.strategy,
            set_name(search)
        ),
    })
}

/// Upper bound `int [R(theta, delta) - R(theta, delta_Pi)] dPi(theta)`.
///
/// `risk_gap_integral` evaluates the prior-averaged gap; the caller certifies
/// that `bayes_id` is the Bayes solution for `prior_id`. Monte Carlo
/// integrals are raised by 4 standard errors.
pub fn lemma2_upper<F>(delta_id: &str, prior_id: &str, bayes_id: &str, risk_gap_integral: F) -> Result<UpperBound>
where
    F: FnOnce() -> Result<RiskValue>,
{
    let gap = risk_gap_integral()?;
    if !(gap.value.is_finite() && gap.se().is_finite()) {
        return Err(Error::NonFinite { context: format!("Bayes gap of {delta_id} under {prior_id}") });
    }
    Ok(UpperBound {
        value: gap.value + MC_WIDENING * gap.se(),
        prior_id: prior_id.to_string(),
        bayes_id: bayes_id.to_string(),
        widened_by: MC_WIDENING,
        notes: format!("Bayes gap of {delta_id} against {bayes_id} under {prior_id} ({:?})", gap.method),
    })
}

/// Point-mass prior at `theta0`: the gap is `R(theta0, delta) - R(theta0, delta_Pi)`.
pub fn point_mass_gap(risk_delta: RiskValue, risk_bayes: RiskValue) -> RiskValue {
    risk_delta.minus(&risk_bayes)
}

/// Supremum over the search set of `R(theta, delta~) / R(theta, delta)`.
///
/// `risk_pair` returns `(R(theta, delta~), R(theta, delta))`. Monte Carlo
/// inputs inflate the numerator and deflate the denominator by 4 standard
/// errors.
pub fn c_admissibility_lower<F>(
    delta_id: &str,
    comparator_id: &str,
    search: &SearchSet,
    risk_pair: F,
    opt: &ThetaOptimizerConfig,
) -> Result<LowerBound>
where
    F: Fn(&[f64]) -> Result<(RiskValue, RiskValue)> + Sync,
{
    let slot = FailureSlot::new();
    let neg_ratio = |t: &[f64]| match risk_pair(t) {
        Ok((tilde, base)) => {
            let num = tilde.value + MC_WIDENING * tilde.se();
            let den = base.value - MC_WIDENING * base.se();
            if !(den > 0.0) {
                slot.record(Error::ZeroRisk { context: format!("theta = {t:?}") })
            } else if !(num.is_finite() && den.is_finite()) {
                slot.record(Error::NonFinite { context: format!("risk ratio at theta = {t:?}") })
            } else {
                -num / den
            }
        }
        Err(e) => slot.record(e),
    };
    let (value, argmax, evaluations) = minimise(search, neg_ratio, opt)?;
    slot.check()?;
    Ok(LowerBound {
        value: -value,
        argmin: argmax,
        evaluations,
        widened_by: MC_WIDENING,
        comparator_id: comparator_id.to_string(),
        notes: format!("sup of R({comparator_id}) / R({delta_id}) by {:?}", opt.strategy),
    })
}
