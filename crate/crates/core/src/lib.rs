//! Symbolic regression networks for Lagrangian discovery.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiations.

pub mod autodiff;
pub mod baselines;
pub mod batch;
pub mod checkpoint;
pub mod error;
pub mod expr;
pub mod mechanics;
pub mod model;
pub mod objective;
pub mod params;
pub mod scalar;
pub mod training;

pub use scalar::Scalar;

pub type Tape64 = autodiff::Tape<f64>;
pub type Batch64 = batch::Batch<f64>;
pub type ParamSet64 = params::ParamSet<f64>;
pub type SyreNet64 = model::SyreNet<f64>;
pub type Mlp64 = baselines::Mlp<f64>;
pub type SysId64 = baselines::SysId<f64>;
pub type AnyModel64 = training::AnyModel<f64>;
