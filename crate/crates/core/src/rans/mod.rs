//! Steady turbulent channel flow with the standard k-ε closure, an optional
//! neural-network augmentation of the Reynolds stress, pseudo-time relaxation,
//! wall diagnostics and discrete-adjoint calibration of the network.

mod adjoint;
mod config;
mod diagnostics;
mod net;
mod solver;
mod train;

pub use adjoint::{rans_grad, rans_objective, RansGradient};
pub use config::{RansConfig, RelaxConfig};
pub use diagnostics::{diagnostics, load_target_csv, synth_target, Diagnostics, TargetProfile, TargetSource};
pub use net::{ClosureNet, NetShape, Standardizer};
pub use solver::{converge, laminar_state, relax, rans_residual, initial_state, RansState, Residual};
pub use train::{feature_samples, synthetic_targets, train_rans, RansTrainConfig, RansTrainHistory, RansTrainRecord, RansTrainResult};
