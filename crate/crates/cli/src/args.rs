use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "admitlab", version, about = "Risk and epsilon-admissibility computations for sequence models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Poisson sequence model under Kullback-Leibler loss.
    #[command(subcommand)]
    Poisson(PoissonCmd),
    /// Gaussian sequence model on a Sobolev ellipsoid.
    #[command(subcommand)]
    Sobolev(SobolevCmd),
    /// Gaussian location model on an L2 ball.
    #[command(subcommand)]
    L2(L2Cmd),
    /// Inhomogeneous Poisson processes on [0, 1].
    #[command(subcommand)]
    Pp(PpCmd),
    /// Lower/upper sandwiches of the epsilon-admissibility functional.
    #[command(subcommand)]
    Bounds(BoundsCmd),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output encoding (each subcommand has its own default).
    #[arg(long)]
    pub out: Option<Format>,
    /// Destination file, written atomically; stdout when absent.
    #[arg(long = "out-path")]
    pub out_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "mc-samples", default_value_t = 100_000)]
    pub mc_samples: u64,
}

#[derive(Debug, Subcommand)]
pub enum PoissonCmd {
    /// Jeffreys estimator: exact and closed-form lower bounds, point-mass upper bound.
    Bounds {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Bayes risk of the half-point-mass, half-Dirichlet prior and its terms.
    BayesRisk {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Risk difference g(mu) between the Jeffreys and James-Stein type estimators.
    Gap {
        #[arg(long)]
        d: usize,
        /// mu grid as start:stop:step (default 0:d:d/64).
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Both sides of E log(d/2 + X) >= log(3d/2) + log(1 - eps).
    ClaimC2 {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Vary {
    Alpha,
    #[value(name = "B")]
    B,
}

#[derive(Debug, Subcommand)]
pub enum SobolevCmd {
    /// sup_s c(s; alpha, B) along a grid of alpha or B.
    CCurve {
        #[arg(long)]
        vary: Vary,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long = "B")]
        b: Option<f64>,
        #[arg(long)]
        grid: String,
        /// Also write a line chart to this path.
        #[arg(long)]
        svg: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// c(s; alpha, B); with --n also the finite-n correction and exact infimum.
    CBound {
        #[arg(long)]
        s: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long = "B")]
        b: f64,
        #[arg(long)]
        n: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// int_0^inf (1 + x^{2 alpha + 1})^{-2} dx.
    Integral {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sieve-prior mass outside the ellipsoid, with the compound-prior analogue.
    PriorMass {
        #[arg(long)]
        alpha: f64,
        #[arg(long = "B")]
        b: f64,
        #[arg(long)]
        a: f64,
        /// Sample size; use --grid for several.
        #[arg(long)]
        n: Option<f64>,
        /// Sample sizes as start:stop:step.
        #[arg(long)]
        grid: Option<String>,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// f(x, 1/n) - f(x, 1/(ns)) along a grid of x.
    Gap {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        n: f64,
        #[arg(long)]
        grid: String,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum L2Estimator {
    Mle,
    /// Shrinkage constant d - 1.
    Js,
    /// Shrinkage constant d - 2.
    JsClassic,
}

#[derive(Debug, Subcommand)]
pub enum L2Cmd {
    /// Monte Carlo and exact risks over a grid of ||theta||^2.
    Risk {
        #[arg(long)]
        d: usize,
        #[arg(long, value_enum, default_value_t = L2Estimator::Js)]
        estimator: L2Estimator,
        /// ||theta||^2 grid as start:stop:step (default 0:d:d/4).
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// MLE lower bounds against both shrinkage constants and point-mass upper bounds.
    Bounds {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoissonEstimator {
    Jeffreys,
    Js,
}

#[derive(Debug, Subcommand)]
pub enum PpCmd {
    /// Simulate by thinning and write an event log.
    Simulate {
        /// const:c, linear:c, sin2:scale or step:h1,h2,...
        #[arg(long)]
        lambda: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "out-path")]
        out_path: Option<PathBuf>,
    },
    /// Bin counts of an event log on d equal bins.
    Discretize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        d: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Estimate bin means and emit the step intensity.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        d: usize,
        #[arg(long, value_enum, default_value_t = PoissonEstimator::Js)]
        estimator: PoissonEstimator,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SandwichModel {
    Poisson,
    L2,
}

#[derive(Debug, Subcommand)]
pub enum BoundsCmd {
    /// Every implemented (estimator, comparator, prior) sandwich for a model.
    Sandwich {
        #[arg(long)]
        model: SandwichModel,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
}
