//! Block compressive sensing for distributed MIMO radar.
//!
//! Targets on a position/velocity grid are recovered from compressed
//! matched-filter outputs with block matching pursuit (BMP) or block
//! orthogonal matching pursuit (BOMP). The crate also designs measurement
//! matrices and transmitter power allocations that lower the block
//! coherence of the sensing matrix, and runs Monte-Carlo sweeps over them.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the common choice.

// NaN must fail these checks, which `!(x > 0)` expresses and `x <= 0` does not
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dictionary;
pub mod error;
pub mod experiments;
pub mod io;
pub mod measurement;
pub mod numerics;
pub mod power;
pub mod recovery;
pub mod scalar;
pub mod scene;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Scenario = scene::Scenario<f64>;
pub type BlockDictionary = dictionary::BlockDictionary<f64>;
pub type MeasurementMatrix = measurement::MeasurementMatrix<f64>;
pub type SensingMatrix = measurement::SensingMatrix<f64>;
pub type PowerAllocation = power::PowerAllocation<f64>;
pub type CouplingMatrix = power::CouplingMatrix<f64>;
pub type RecoverySolution = recovery::RecoverySolution<f64>;
pub type ExperimentConfig = experiments::ExperimentConfig<f64>;

pub type Scenario32 = scene::Scenario<f32>;
pub type BlockDictionary32 = dictionary::BlockDictionary<f32>;
pub type MeasurementMatrix32 = measurement::MeasurementMatrix<f32>;
pub type SensingMatrix32 = measurement::SensingMatrix<f32>;
pub type PowerAllocation32 = power::PowerAllocation<f32>;
pub type CouplingMatrix32 = power::CouplingMatrix<f32>;
pub type RecoverySolution32 = recovery::RecoverySolution<f32>;
pub type ExperimentConfig32 = experiments::ExperimentConfig<f32>;
