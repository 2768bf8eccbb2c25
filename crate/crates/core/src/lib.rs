//! Vehicle simulation and torque-vectoring weight tuning.

// Validation uses `!(a < b)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod controller;
pub mod ddpg;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod harness;

pub use baselines::{manual_w_df, GaConfig};
pub use controller::{CgError, CorrectiveForces, Weights};
pub use ddpg::{ActorModel, Hyperparams};
pub use dynamics::{TireParams, VehicleParams, VehicleState};
pub use env::{Action, EpisodeConfig, Observation, PlantConfig, TorqueVectoringEnv};
pub use error::{Error, Result};
pub use harness::RunConfig;
