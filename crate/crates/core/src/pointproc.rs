//! Inhomogeneous Poisson processes on `[0, 1]` and their reduction to the
//! Poisson sequence model by binning.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::integrate;
use crate::poisson::PoissonObservation;

/// Non-negative intensity on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IntensityFn {
    /// `lambda(t) = c`.
    Constant(f64),
    /// `lambda(t) = 2 c t`, total mass `c`.
    Linear(f64),
    /// `lambda(t) = scale sin^2(pi t)`, total mass `scale / 2`.
    SineSquared(f64),
    /// Piecewise constant on `len` equal bins, last bin closed at 1.
    Step(Vec<f64>),
}

impl IntensityFn {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        let valid = match self {
            Self::Constant(c) | Self::Linear(c) | Self::SineSquared(c) => ok(*c),
            Self::Step(h) => !h.is_empty() && h.iter().all(|&v| ok(v)),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::invalid("intensity", "parameters must be finite and non-negative"))
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Linear(c) => 2.0 * c * t,
            Self::SineSquared(scale) => scale * (std::f64::consts::PI * t).sin().powi(2),
            Self::Step(h) => h[bin_index(t, h.len())],
        }
    }

    pub fn lambda_max(&self) -> f64 {
        match self {
            Self::Constant(c) | Self::SineSquared(c) => *c,
            Self::Linear(c) => 2.0 * c,
            Self::Step(h) => h.iter().copied().fold(0.0, f64::max),
        }
    }

    /// `int_a^b lambda(t) dt` for `0 <= a <= b <= 1`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            Self::Constant(c) => c * (b - a),
            Self::Linear(c) => c * (b * b - a * a),
            Self::SineSquared(scale) => {
                let pi2 = 2.0 * std::f64::consts::PI;
                scale * (0.5 * (b - a) - ((pi2 * b).sin() - (pi2 * a).sin()) / (2.0 * pi2))
            }
            Self::Step(h) => {
                let d = h.len() as f64;
                h.iter()
                    .enumerate()
                    .map(|(k, &v)| {
                        let lo = (k as f64 / d).max(a);
                        let hi = ((k + 1) as f64 / d).min(b);
                        if hi > lo {
                            v * (hi - lo)
                        } else {
                            0.0
                        }
                    })
                    .sum()
            }
        }
    }

    /// Checks the closed-form total mass against adaptive quadrature.
    pub fn check_total_mass(&self, tol: f64) -> Result<f64> {
        let mut breaks = vec![0.0, 1.0];
        if let Self::Step(h) = self {
            breaks = (0..=h.len()).map(|k| k as f64 / h.len() as f64).collect();
        }
        let mut quad = 0.0;
        for w in breaks.windows(2) {
            quad += integrate(|t| self.eval(t), w[0], w[1], tol, 10_000)?.value;
        }
        let closed = self.integral(0.0, 1.0);
        if (quad - closed).abs() > tol * 10.0 * closed.max(1.0) {
            return Err(Error::NonFinite { context: format!("intensity mass mismatch: {closed} vs quadrature {quad}") });
        }
        Ok(closed)
    }
}

/// Parses `const:c`, `linear:c`, `sin2:scale` and `step:h1,h2,...`.
impl FromStr for IntensityFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid("lambda", format!("expected kind:params, got {s:?}")))?;
        let num = |v: &str| {
            v.trim().parse::<f64>().map_err(|_| Error::invalid("lambda", format!("bad number {v:?}")))
        };
        let f = match kind {
            "const" => Self::Constant(num(rest)?),
            "linear" => Self::Linear(num(rest)?),
            "sin2" => Self::SineSquared(num(rest)?),
            "step" => Self::Step(rest.split(',').map(num).collect::<Result<_>>()?),
            other => return Err(Error::invalid("lambda", format!("unknown intensity kind {other:?}"))),
        };
        f.validate()?;
        Ok(f)
    }
}

/// 0-based bin of `t` among `d` bins `[(k-1)/d, k/d)`, with `t = 1` in the last bin.
fn bin_index(t: f64, d: usize) -> usize {
    ((t * d as f64).floor() as usize).min(d - 1)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    times: Vec<f64>,
}

pub const EVENT_LOG_HEADER: &str = "# unit-interval event log v1";

impl EventLog {
    pub fn new(mut times: Vec<f64>) -> Result<Self> {
        if let Some(bad) = times.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::invalid("times", format!("event time {bad} outside [0, 1]")));
        }
        times.sort_by(f64::total_cmp);
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Header line followed by one shortest round-trip decimal per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(24 * (self.times.len() + 1));
        out.push_str(EVENT_LOG_HEADER);
        out.push('\n');
        for t in &self.times {
            writeln!(out, "{t:?}").expect("writing to a String");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(EVENT_LOG_HEADER) {
            return Err(Error::invalid("event log", format!("missing header {EVENT_LOG_HEADER:?}")));
        }
        let mut times = Vec::new();
        for (no, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let t = line
                .parse::<f64>()
                .map_err(|_| Error::invalid("event log", format!("line {}: bad time {line:?}", no + 2)))?;
            times.push(t);
        }
        Self::new(times)
    }
}

/// Thinning: `Po(lambda_max)` uniform candidates, each kept with
/// probability `lambda(t) / lambda_max`.
pub fn simulate_thinning(intensity: &IntensityFn, rng: &mut ChaCha8Rng) -> Result<EventLog> {
    intensity.validate()?;
    let lmax = intensity.lambda_max();
    if lmax == 0.0 {
        return Ok(EventLog::default());
    }
    let count = Poisson::new(lmax).map_err(|e| Error::invalid("lambda_max", e.to_string()))?.sample(rng) as u64;
    let mut times = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let t: f64 = rng.random();
        let u: f64 = rng.random();
        if u * lmax < intensity.eval(t) {
            times.push(t);
        }
    }
    EventLog::new(times)
}

/// Bin counts on `d` equal bins.
pub fn discretize(log: &EventLog, d: usize) -> Result<PoissonObservation> {
    if d == 0 {
        return Err(Error::invalid("d", "need d >= 1"));
    }
    let mut counts = vec![0u64; d];
    for &t in log.times() {
        counts[bin_index(t, d)] += 1;
    }
    Ok(PoissonObservation::new(counts))
}

/// `lambda_hat = d theta_hat_k` on bin `k`.
pub fn reconstruct_intensity(theta_hat: &[f64], d: usize) -> Result<IntensityFn> {
    if theta_hat.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: theta_hat.len() });
    }
    let f = IntensityFn::Step(theta_hat.iter().map(|t| t * d as f64).collect());
    f.validate()?;
    Ok(f)
}

/// CSV rows `t_left,t_right,lambda_hat` for a step intensity.
pub fn step_intensity_csv(heights: &[f64]) -> String {
    let d = heights.len() as f64;
    let mut out = String::from("t_left,t_right,lambda_hat\n");
    for (k, h) in heights.iter().enumerate() {
        writeln!(out, "{:.16e},{:.16e},{:.16e}", k as f64 / d, (k + 1) as f64 / d, h).expect("writing to a String");
    }
    out
}
