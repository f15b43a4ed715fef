//! Simulation and verification toolkit for the 2-factor and 4-factor
//! path-dependent volatility (PDV) models
//!
//! ```text
//! sigma = beta0 + beta1 * R1 + beta2 * sqrt(R2)
//! dR1   = lambda1 * sigma dW - lambda1 * R1 dt
//! dR2   = lambda2 * (sigma^2 - R2) dt
//! ```
//!
//! and their 4-factor generalisation with two exponential kernels per factor.
//!
//! The crate is split by role:
//!
//! - [`model`]: parameters, states, the volatility functional and effective rates.
//! - [`engine`]: single-path time stepping of the original and measure-changed
//!   ("tilted") systems, the comparison process `Y`, the price `X` and stopping-time monitors.
//! - [`theory`]: closed-form constants (Gronwall moment bounds, the tilted drift
//!   bound, positivity conditions, the 4-factor positivity counterexample).
//! - [`mc`]: ensembles and statistical verification checks.
//! - [`cli`]: JSON run configs, CSV trajectories and JSON reports behind the `pdv` binary.
//!
//! The model, engine and theory layers are generic over [`Real`] (`f32` or
//! `f64`); the aliases below fix the scalar to `f64`, which is what the
//! Monte Carlo and CLI layers use.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod engine;
pub mod mc;
pub mod model;
pub mod scalar;
pub mod theory;

pub use scalar::Real;

/// 2-factor parameters in double precision.
pub type Pdv2 = model::Pdv2Params<f64>;
/// 4-factor parameters in double precision.
pub type Pdv4 = model::Pdv4Params<f64>;
/// 2-factor state in double precision.
pub type Pdv2State = model::State2<f64>;
/// 4-factor state in double precision.
pub type Pdv4State = model::State4<f64>;
/// Volatility functional in double precision.
pub type Functional = model::VolFunctional<f64>;
/// Simulation settings in double precision.
pub type Config = model::SimConfig<f64>;
/// A recorded 2-factor trajectory.
pub type Path2 = engine::PathRecord<f64, model::State2<f64>>;
/// A recorded 4-factor trajectory.
pub type Path4 = engine::PathRecord<f64, model::State4<f64>>;
/// Tilted drift-bound constants in double precision.
pub type TiltedBounds = theory::TiltedConstants<f64>;

/// Single-precision 2-factor parameters.
pub type Pdv2F32 = model::Pdv2Params<f32>;
/// Single-precision 4-factor parameters.
pub type Pdv4F32 = model::Pdv4Params<f32>;
