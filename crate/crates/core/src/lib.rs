//! Single-shot discrimination of qubit and spin-5/2 unitary oracles with
//! quantum signal processing, plus a simulator of the trapped-ion hardware
//! used to run the protocols.

pub mod baselines;
pub mod error;
pub mod field_servo;
pub mod ion_sim;
pub mod qsp;
pub mod protocols;
pub mod spin_algebra;

pub use error::{Error, Result};
