//! Numerical decision theory for sequence models.
//!
//! The crate evaluates risks of shrinkage estimators in three models and
//! sandwiches the epsilon-admissibility functional
//!
//! ```text
//! R(Theta, delta) = sup_{delta~} inf_{theta} [ R(theta, delta) - R(theta, delta~) ]
//! ```
//!
//! between a comparator lower bound ([`bounds::lemma1_lower`]) and a prior
//! Bayes-gap upper bound ([`bounds::lemma2_upper`]).
//!
//! - [`poisson`]: Poisson sequence model under Kullback-Leibler loss.
//! - [`sobolev`]: Gaussian infinite sequence model on a Sobolev ellipsoid.
//! - [`l2`]: finite Gaussian sequence model on an L2 ball.
//! - [`pointproc`]: inhomogeneous Poisson process front end for [`poisson`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod l2;
pub mod model;
pub mod numeric;
pub mod pointproc;
pub mod poisson;
pub mod rng;
pub mod sobolev;

pub use error::{Error, Result};
pub use model::{Estimator, Loss, ParameterSpace, RiskMethod, RiskValue};
pub use rng::RngStream;
