//! Adjoint-based training of neural-network source terms in elliptic PDEs, the
//! mean-field limit of that training, and a k-ε channel-flow closure calibrated
//! with the same adjoint machinery.

pub mod elliptic;
pub mod error;
pub mod field;
pub mod grid;
pub mod lab;
pub mod limit;
pub mod network;
pub mod objective;
pub mod par;
pub mod rans;
pub mod trainer;

pub use error::{Error, Result};
pub use field::Field;
