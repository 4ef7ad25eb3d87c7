use std::path::PathBuf;

use admitlab::bounds::{lemma2_upper, point_mass_gap, EpsSandwich, LowerBound, ThetaOptimizerConfig, UpperBound};
use admitlab::l2::{self, GaussJamesStein, GaussianL2Model, Mle};
use admitlab::model::{mc_risk, Loss, RiskValue};
use admitlab::numeric::inclusive_grid;
use admitlab::pointproc::{self, EventLog, IntensityFn};
use admitlab::poisson::{self, PoissonJamesStein};
use admitlab::sobolev::{self, CurveAxis, SievePriorS};
use admitlab::{Estimator, RngStream};

use crate::args::*;
use crate::output::{line_chart_svg, Cell, Format, Table};
use crate::CliError;

/// Everything a command writes; nothing touches the filesystem until the
/// computation has finished.
pub struct Emission {
    pub files: Vec<(Option<PathBuf>, String)>,
}

impl Emission {
    fn table(table: &Table, output: &OutputArgs, default: Format) -> Result<Self, CliError> {
        Ok(Self { files: vec![(output.out_path.clone(), table.render(output.out.unwrap_or(default))?)] })
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--{name} must be positive and finite, got {v}")))
    }
}

fn dim_at_least(d: usize, min: usize) -> Result<(), CliError> {
    if d >= min {
        Ok(())
    } else {
        Err(usage(format!("--d must be at least {min}, got {d}")))
    }
}

fn unit_open(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("--{name} must lie in (0, 1), got {v}")))
    }
}

fn mc_checked(mc: &McArgs, min: u64) -> Result<(), CliError> {
    if mc.mc_samples >= min {
        Ok(())
    } else {
        Err(usage(format!("--mc-samples must be at least {min}, got {}", mc.mc_samples)))
    }
}

/// `start:stop:step`, inclusive of `stop` within 1e-12.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(usage(format!("--grid expects start:stop:step, got {spec:?}")));
    }
    let mut nums = [0.0; 3];
    for (slot, p) in nums.iter_mut().zip(&parts) {
        *slot = p.trim().parse().map_err(|_| usage(format!("--grid: bad number {p:?}")))?;
    }
    inclusive_grid(nums[0], nums[1], nums[2]).map_err(|e| usage(format!("--grid: {e}")))
}

fn grid_within(grid: &[f64], lo: f64, hi: f64, what: &str) -> Result<(), CliError> {
    match grid.iter().find(|&&v| !(lo..=hi).contains(&v)) {
        Some(v) => Err(usage(format!("--grid: {what} {v} outside [{lo}, {hi}]"))),
        None => Ok(()),
    }
}

pub fn dispatch(command: Command) -> Result<Emission, CliError> {
    match command {
        Command::Poisson(c) => poisson_cmd(c),
        Command::Sobolev(c) => sobolev_cmd(c),
        Command::L2(c) => l2_cmd(c),
        Command::Pp(c) => pp_cmd(c),
        Command::Bounds(c) => bounds_cmd(c),
    }
}

fn poisson_cmd(cmd: PoissonCmd) -> Result<Emission, CliError> {
    match cmd {
        PoissonCmd::Bounds { d, tol, output } => {
            dim_at_least(d, 2)?;
            positive("tol", tol)?;
            let (lower, upper) = jeffreys_sandwich(d, tol)?;
            let js_upper = js_point_mass_upper(d, tol)?;
            let table = Table::single(vec![
                ("d", d.into()),
                ("lower_exact", lower.value.into()),
                ("lower_exact_argmin_mu", lower.argmin[0].into()),
                ("lower_closed_form", poisson::jeffreys_lower_bound_closed_form(d)?.into()),
                ("upper_delta0", upper.value.into()),
                ("js_upper_delta0", js_upper.value.into()),
            ]);
            Emission::table(&table, &output, Format::Json)
        }
        PoissonCmd::BayesRisk { d, tol, output } => {
            dim_at_least(d, 3)?;
            positive("tol", tol)?;
            let r = poisson::bayes_risk_pi(d, tol)?;
            let table = Table::single(vec![
                ("d", d.into()),
                ("b_pi", r.b_pi.into()),
                ("no_data_branch", r.terms.no_data_branch.into()),
                ("digamma_low", r.terms.digamma_low.into()),
                ("neg_digamma_high", r.terms.neg_digamma_high.into()),
                ("total_count_log", r.terms.total_count_log.into()),
                ("neg_mixture_log", r.terms.neg_mixture_log.into()),
                ("beta_a", r.beta_params.0.into()),
                ("beta_b", r.beta_params.1.into()),
                ("quadrature_error", r.quadrature_error.into()),
            ]);
            Emission::table(&table, &output, Format::Json)
        }
        PoissonCmd::Gap { d, grid, tol, output } => {
            dim_at_least(d, 2)?;
            positive("tol", tol)?;
            let df = d as f64;
            let mus = match grid {
                Some(g) => parse_grid(&g)?,
                None => inclusive_grid(0.0, df, df / 64.0)?,
            };
            grid_within(&mus, 0.0, df, "mu")?;
            let mut table = Table::new(vec!["mu", "g"]);
            for mu in mus {
                table.push(vec![mu.into(), poisson::risk_diff_j_minus_js(mu, d, tol)?.into()]);
            }
            Emission::table(&table, &output, Format::Csv)
        }
        PoissonCmd::ClaimC2 { d, eps, output } => {
            dim_at_least(d, 1)?;
            unit_open("eps", eps)?;
            let c = poisson::claim_c2_check(d, eps)?;
            let table = Table::single(vec![
                ("d", d.into()),
                ("eps", eps.into()),
                ("lhs", c.lhs.into()),
                ("rhs", c.rhs.into()),
                ("holds", (c.lhs >= c.rhs).into()),
            ]);
            Emission::table(&table, &output, Format::Json)
        }
    }
}

fn jeffreys_sandwich(d: usize, tol: f64) -> Result<(LowerBound, UpperBound), CliError> {
    let lower = poisson::jeffreys_lower_bound_exact(d, &ThetaOptimizerConfig::default(), tol)?;
    let upper = lemma2_upper("poisson-jeffreys", "delta0", "zero", || {
        Ok(point_mass_gap(poisson::exact_risk_jeffreys(&vec![0.0; d], tol)?, RiskValue::exact_series(0.0)))
    })?;
    Ok((lower, upper))
}

fn js_point_mass_upper(d: usize, tol: f64) -> Result<UpperBound, CliError> {
    Ok(lemma2_upper(&PoissonJamesStein.id(), "delta0", "zero", || {
        Ok(point_mass_gap(poisson::exact_risk_js(&vec![0.0; d], tol)?, RiskValue::exact_series(0.0)))
    })?)
}

fn sobolev_cmd(cmd: SobolevCmd) -> Result<Emission, CliError> {
    match cmd {
        SobolevCmd::CCurve { vary, alpha, b, grid, svg, output } => {
            let values = parse_grid(&grid)?;
            let (axis, fixed) = match vary {
                Vary::Alpha => (CurveAxis::Alpha, b.ok_or_else(|| usage("--vary alpha needs --B"))?),
                Vary::B => (CurveAxis::B, alpha.ok_or_else(|| usage("--vary B needs --alpha"))?),
            };
            positive(if axis == CurveAxis::Alpha { "B" } else { "alpha" }, fixed)?;
            for &v in &values {
                positive("grid", v)?;
            }
            let curve = sobolev::c_curve(axis, fixed, &values)?;
            let mut table = Table::new(vec!["alpha", "B", "s_star", "c_value", "integral_I"]);
            for p in &curve {
                table.push(vec![p.alpha.into(), p.b.into(), p.s_star.into(), p.c_value.into(), p.integral_i.into()]);
            }
            let mut emission = Emission::table(&table, &output, Format::Csv)?;
            if let Some(path) = svg {
                let (label, pts): (&str, Vec<(f64, f64)>) = match axis {
                    CurveAxis::Alpha => ("alpha", curve.iter().map(|p| (p.alpha, p.c_value)).collect()),
                    CurveAxis::B => ("B", curve.iter().map(|p| (p.b, p.c_value)).collect()),
                };
                emission.files.push((Some(path), line_chart_svg(label, "c", &pts)));
            }
            Ok(emission)
        }
        SobolevCmd::CBound { s, alpha, b, n, output } => {
            unit_open("s", s)?;
            positive("alpha", alpha)?;
            positive("B", b)?;
            if let Some(n) = n {
                positive("n", n)?;
            }
            let integral = sobolev::integral_i(alpha, 1e-12)?.value;
            let mut fields: Vec<(&'static str, Cell)> = vec![
                ("s", s.into()),
                ("alpha", alpha.into()),
                ("B", b.into()),
                ("c_value", sobolev::c_bound_with_integral(s, alpha, b, integral).into()),
                ("integral_I", integral.into()),
            ];
            if let Some(n) = n {
                let inf = finite_n_infimum(alpha, b, s, n)?;
                fields.push(("n", n.into()));
                fields.push(("finite_n_correction", sobolev::c_bound_finite_n_correction(alpha, n).into()));
                fields.push(("inf_gap", inf.value.into()));
                fields.push(("inf_gap_scaled", (inf.value * n.powf(2.0 * alpha / (2.0 * alpha + 1.0))).into()));
                fields.push(("spike_index", inf.spike_index.unwrap_or(0).into()));
            }
            Emission::table(&Table::single(fields), &output, Format::Json)
        }
        SobolevCmd::Integral { alpha, tol, output } => {
            positive("alpha", alpha)?;
            positive("tol", tol)?;
            let q = sobolev::integral_i(alpha, tol)?;
            let table = Table::single(vec![
                ("alpha", alpha.into()),
                ("integral_I", q.value.into()),
                ("error_estimate", q.error.into()),
                ("panels", q.panels.into()),
            ]);
            Emission::table(&table, &output, Format::Json)
        }
        SobolevCmd::PriorMass { alpha, b, a, n, grid, mc, output } => {
            positive("alpha", alpha)?;
            positive("B", b)?;
            positive("a", a)?;
            mc_checked(&mc, 10_000)?;
            let ns = match (n, grid) {
                (Some(n), None) => vec![n],
                (None, Some(g)) => parse_grid(&g)?,
                _ => return Err(usage("give exactly one of --n and --grid")),
            };
            for &v in &ns {
                positive("n", v)?;
            }
            let (compound, compound_se) =
                sobolev::compound_prior_mass_complement(alpha, a, b, mc.mc_samples, RngStream::new(mc.seed, 1))?;
            let mut table = Table::new(vec![
                "n", "B", "alpha", "a", "T", "mass_complement", "std_err", "bound_value", "c1", "strata",
                "compound_mass_complement", "compound_std_err",
            ]);
            for v in ns {
                let prior = SievePriorS::geometric(alpha, a, v, 1e-12)?;
                let r = sobolev::prior_mass_complement(&prior, b, mc.mc_samples, RngStream::new(mc.seed, 0))?;
                table.push(vec![
                    r.n.into(),
                    r.b.into(),
                    r.alpha.into(),
                    r.a.into(),
                    r.t.into(),
                    r.mass_complement.into(),
                    r.std_err.into(),
                    r.bound_value.into(),
                    r.c1.into(),
                    r.strata.into(),
                    compound.into(),
                    compound_se.into(),
                ]);
            }
            Emission::table(&table, &output, Format::Csv)
        }
        SobolevCmd::Gap { alpha, s, n, grid, output } => {
            positive("alpha", alpha)?;
            unit_open("s", s)?;
            positive("n", n)?;
            let xs = parse_grid(&grid)?;
            for &x in &xs {
                positive("grid", x)?;
            }
            let x_star = sobolev::x_star(alpha, n);
            let mut table = Table::new(vec!["x", "gap", "x_star"]);
            for x in xs {
                table.push(vec![x.into(), sobolev::appendix_c_gap(x, n, s, alpha).into(), x_star.into()]);
            }
            Emission::table(&table, &output, Format::Csv)
        }
    }
}

fn finite_n_infimum(alpha: f64, b: f64, s: f64, n: f64) -> Result<sobolev::GapInfimum, CliError> {
    let i_max = 20 * sobolev::default_i_max(alpha, 1.0, n);
    match sobolev::inf_gap_g_vs_gs(alpha, b, s, n, i_max, 1e-12) {
        Err(admitlab::Error::Truncation { required, .. }) => Ok(sobolev::inf_gap_g_vs_gs(alpha, b, s, n, required, 1e-12)?),
        other => Ok(other?),
    }
}

fn l2_estimator(d: usize, which: L2Estimator) -> Result<Box<dyn Estimator<l2::GaussianObservation>>, CliError> {
    Ok(match which {
        L2Estimator::Mle => Box::new(Mle),
        L2Estimator::Js => Box::new(GaussJamesStein::verbatim(d)?),
        L2Estimator::JsClassic => Box::new(GaussJamesStein::classic(d)?),
    })
}

fn l2_exact(d: usize, which: L2Estimator, norm_sq: f64, tol: f64) -> Result<f64, CliError> {
    Ok(match which {
        L2Estimator::Mle => d as f64,
        L2Estimator::Js => l2::exact_risk_js(d, norm_sq, GaussJamesStein::verbatim(d)?.shrinkage, tol)?.value,
        L2Estimator::JsClassic => l2::exact_risk_js(d, norm_sq, GaussJamesStein::classic(d)?.shrinkage, tol)?.value,
    })
}

fn l2_cmd(cmd: L2Cmd) -> Result<Emission, CliError> {
    match cmd {
        L2Cmd::Risk { d, estimator, grid, tol, mc, output } => {
            dim_at_least(d, 3)?;
            positive("tol", tol)?;
            mc_checked(&mc, 2)?;
            let df = d as f64;
            let norms = match grid {
                Some(g) => parse_grid(&g)?,
                None => inclusive_grid(0.0, df, df / 4.0)?,
            };
            grid_within(&norms, 0.0, df, "||theta||^2")?;
            let est = l2_estimator(d, estimator)?;
            let mut table = Table::new(vec!["norm_sq", "mc_risk", "std_err", "exact_risk"]);
            for (k, &v) in norms.iter().enumerate() {
                let model = GaussianL2Model::with_norm_sq(d, v)?;
                let r = mc_risk(&model, est.as_ref(), Loss::SquaredError, mc.mc_samples, RngStream::new(mc.seed, k as u64))?;
                table.push(vec![v.into(), r.value.into(), r.se().into(), l2_exact(d, estimator, v, tol)?.into()]);
            }
            Emission::table(&table, &output, Format::Csv)
        }
        L2Cmd::Bounds { d, tol, mc, output } => {
            dim_at_least(d, 3)?;
            positive("tol", tol)?;
            mc_checked(&mc, 2)?;
            let df = d as f64;
            let opt = ThetaOptimizerConfig::default();
            let verbatim = GaussJamesStein::verbatim(d)?;
            let classic = GaussJamesStein::classic(d)?;
            let lower = l2::mle_lower_bound(d, verbatim.shrinkage, &opt, tol)?;
            let lower_classic = l2::mle_lower_bound(d, classic.shrinkage, &opt, tol)?;
            let model = GaussianL2Model::with_norm_sq(d, 0.0)?;
            let js0 = mc_risk(&model, &verbatim, Loss::SquaredError, mc.mc_samples, RngStream::new(mc.seed, 0))?;
            let table = Table::single(vec![
                ("d", d.into()),
                ("stein_bound_at_radius", l2::stein_gap_lower(d, df)?.into()),
                ("lower_exact", lower.value.into()),
                ("lower_exact_classic", lower_classic.value.into()),
                ("upper_delta0", df.into()),
                ("js_risk_at_zero_exact", l2::exact_risk_js(d, 0.0, verbatim.shrinkage, tol)?.value.into()),
                ("js_risk_at_zero_mc", js0.value.into()),
                ("js_risk_at_zero_std_err", js0.se().into()),
                ("js_risk_at_zero_stated", (2.0 - 4.0 / df).into()),
            ]);
            Emission::table(&table, &output, Format::Json)
        }
    }
}

fn read_log(path: &PathBuf) -> Result<EventLog, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
    EventLog::from_text(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn pp_cmd(cmd: PpCmd) -> Result<Emission, CliError> {
    match cmd {
        PpCmd::Simulate { lambda, seed, out_path } => {
            let f: IntensityFn = lambda.parse().map_err(|e: admitlab::Error| usage(e.to_string()))?;
            let log = pointproc::simulate_thinning(&f, &mut RngStream::new(seed, 0).generator())?;
            Ok(Emission { files: vec![(out_path, log.to_text())] })
        }
        PpCmd::Discretize { input, d, output } => {
            dim_at_least(d, 1)?;
            let log = read_log(&input)?;
            let x = pointproc::discretize(&log, d)?;
            let mut table = Table::new(vec!["t_left", "t_right", "count"]);
            for (k, c) in x.counts.iter().enumerate() {
                table.push(vec![(k as f64 / d as f64).into(), ((k + 1) as f64 / d as f64).into(), (*c).into()]);
            }
            Emission::table(&table, &output, Format::Csv)
        }
        PpCmd::Estimate { input, d, estimator, output } => {
            dim_at_least(d, 1)?;
            let log = read_log(&input)?;
            let x = pointproc::discretize(&log, d)?;
            let theta = match estimator {
                PoissonEstimator::Jeffreys => poisson::estimate_jeffreys(&x),
                PoissonEstimator::Js => poisson::estimate_js(&x),
            };
            let IntensityFn::Step(heights) = pointproc::reconstruct_intensity(&theta, d)? else {
                unreachable!("reconstruction is a step function")
            };
            let mut table = Table::new(vec!["t_left", "t_right", "lambda_hat"]);
            for (k, h) in heights.iter().enumerate() {
                table.push(vec![(k as f64 / d as f64).into(), ((k + 1) as f64 / d as f64).into(), (*h).into()]);
            }
            Emission::table(&table, &output, Format::Csv)
        }
    }
}

fn bounds_cmd(cmd: BoundsCmd) -> Result<Emission, CliError> {
    let BoundsCmd::Sandwich { model, d, tol, output } = cmd;
    positive("tol", tol)?;
    let mut rows: Vec<(String, EpsSandwich)> = Vec::new();
    let zero_lower = |comparator: &str| LowerBound {
        value: 0.0,
        argmin: vec![],
        evaluations: 0,
        widened_by: 0.0,
        comparator_id: comparator.to_string(),
        notes: "comparator equals the estimator".into(),
    };
    match model {
        SandwichModel::Poisson => {
            dim_at_least(d, 2)?;
            let (lower, upper) = jeffreys_sandwich(d, tol)?;
            rows.push(("poisson-jeffreys".into(), EpsSandwich::new(&lower, &upper)));
            let js = PoissonJamesStein.id();
            rows.push((js.clone(), EpsSandwich::new(&zero_lower(&js), &js_point_mass_upper(d, tol)?)));
        }
        SandwichModel::L2 => {
            dim_at_least(d, 3)?;
            let df = d as f64;
            let opt = ThetaOptimizerConfig::default();
            let upper_mle = lemma2_upper(&Mle.id(), "delta0", "zero", || Ok(RiskValue::closed_form(df)))?;
            for js in [GaussJamesStein::verbatim(d)?, GaussJamesStein::classic(d)?] {
                let lower = l2::mle_lower_bound(d, js.shrinkage, &opt, tol)?;
                rows.push((Mle.id(), EpsSandwich::new(&lower, &upper_mle)));
                let upper_js = lemma2_upper(&js.id(), "delta0", "zero", || l2::exact_risk_js(d, 0.0, js.shrinkage, tol))?;
                rows.push((js.id(), EpsSandwich::new(&zero_lower(&js.id()), &upper_js)));
            }
        }
    }
    let mut table = Table::new(vec!["estimator", "comparator", "prior", "lower", "upper", "nested"]);
    for (est, s) in rows {
        table.push(vec![
            est.into(),
            s.comparator_id.clone().into(),
            s.prior_id.clone().into(),
            s.lower.into(),
            s.upper.into(),
            s.is_nested().into(),
        ]);
    }
    Emission::table(&table, &output, Format::Csv)
}
