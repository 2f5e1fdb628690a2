//! Minimizing the finite-horizon ruin probability of an insurer over a static
//! proportional-reinsurance retention and investment weights.
//!
//! The gradient of `P(U_T < 0)` is estimated without bias by Malliavin
//! weighting of the ruin indicator ([`malliavin`]), and fed to a mini-batch
//! stochastic projected gradient method ([`optimizer`]) over the product of the
//! probability simplex and a retention interval ([`projection`]). Monte Carlo
//! ruin estimates, finite differences and the adjustment-coefficient retention
//! live in [`baselines`]; [`experiments`] wires everything to config files and
//! CSV output.
//!
//! Monte Carlo work fans out over rayon when the `parallel` feature is on
//! (default). Every draw comes from an addressed stream ([`rng::StreamKey`]) and
//! reductions run in a fixed order, so results do not depend on thread count.

// `!(x > 0.0)` is how validation rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod malliavin;
pub mod model;
pub mod numeric;
pub mod optimizer;
pub mod projection;
pub mod rng;

pub use baselines::{RuinEstimate, RuinKind};
pub use error::{Error, Result};
pub use exec::Executor;
pub use experiments::ExperimentConfig;
pub use malliavin::{GradientEstimate, GradientSample, WeightFunction};
pub use model::{AssetModel, ClaimDistribution, ModelParams, ScenarioSample, Strategy};
pub use optimizer::{RunTrace, SpgConfig};
pub use projection::FeasibleRegion;
pub use rng::{Purpose, StreamKey};
