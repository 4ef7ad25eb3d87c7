//! Numerical building blocks: compensated sums, streaming moments,
//! adaptive Gauss-Kronrod quadrature and bracketed 1-D minimisation.

use crate::error::{Error, Result};

pub use statrs::function::gamma::{digamma, ln_gamma};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Count, mean and centred second moment; merged in a fixed order the result
/// is bit-reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / count as f64;
        Moments {
            count,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.count as f64 * w,
        }
    }

    pub fn sample_variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.m2 / (self.count - 1) as f64
    }

    pub fn std_err(&self) -> f64 {
        (self.sample_variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of per-panel |Kronrod - Gauss| estimates.
    pub error: f64,
    pub panels: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive 15-point Gauss-Kronrod quadrature on a finite interval.
/// The panel with the largest error estimate is halved until the summed
/// estimate drops below `tol` or `max_panels` is reached.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_panels: usize) -> Result<Quadrature> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    if !(a.is_finite() && b.is_finite() && a <= b) {
        return Err(Error::invalid("interval", format!("need finite a <= b, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0, panels: 0 });
    }
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&f, a, b);
    panels.push((a, b, v, e));
    loop {
        let error: f64 = panels.iter().map(|p| p.3).sum();
        let mut value = CompensatedSum::default();
        panels.iter().for_each(|p| value.add(p.2));
        let value = value.value();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::NonFinite { context: "quadrature integrand".into() });
        }
        if error <= tol {
            return Ok(Quadrature { value, error, panels: panels.len() });
        }
        if panels.len() >= max_panels {
            return Err(Error::Quadrature { error, tol });
        }
        let worst = panels
            .iter()
            .enumerate()
            .fold(0, |best, (i, p)| if p.3 > panels[best].3 { i } else { best });
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::Quadrature { error, tol });
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimisation of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMin {
    pub argmin: f64,
    pub value: f64,
    /// Index of the best grid point (first index wins ties).
    pub grid_index: usize,
}

/// Minimum over a uniform `points`-grid on `[lo, hi]`, refined by golden
/// section between the neighbours of the best grid point. The refined point
/// only replaces the grid point when it is strictly better.
pub fn grid_then_golden_min<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    points: usize,
    tol: f64,
) -> ScalarMin {
    let points = points.max(2);
    let step = (hi - lo) / (points - 1) as f64;
    let at = |k: usize| if k + 1 == points { hi } else { lo + step * k as f64 };
    let mut best = ScalarMin { argmin: lo, value: f64::INFINITY, grid_index: 0 };
    for k in 0..points {
        let x = at(k);
        let v = f(x);
        if k == 0 || v < best.value {
            best = ScalarMin { argmin: x, value: v, grid_index: k };
        }
    }
    let k = best.grid_index;
    let a = at(k.saturating_sub(1));
    let b = at((k + 1).min(points - 1));
    if b > a {
        let (x, v) = golden_section_min(&mut f, a, b, tol);
        if v < best.value {
            best.argmin = x;
            best.value = v;
        }
    }
    best
}

/// Inclusive arithmetic grid `start, start+step, ..., stop`; the endpoint is
/// included when it lies within 1e-12 (relative) of a grid point.
pub fn inclusive_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err(Error::invalid("grid", "non-finite bound"));
    }
    if !(step > 0.0) || stop < start {
        return Err(Error::invalid("grid", format!("need step > 0 and stop >= start, got {start}:{stop}:{step}")));
    }
    let span = (stop - start) / step;
    let slack = 1e-12 * span.abs().max(1.0);
    let count = (span + slack).floor() as usize + 1;
    Ok((0..count)
        .map(|k| {
            let x = start + step * k as f64;
            if (x - stop).abs() <= 1e-12 * stop.abs().max(1.0) {
                stop
            } else {
                x
            }
        })
        .collect())
}
