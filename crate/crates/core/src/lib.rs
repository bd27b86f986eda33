//! Monte Carlo simulation of ALOHA-family random access with successive interference
//! cancellation: CRDSA, IRSA, CSA and E-SSA under collision, threshold and PER-curve
//! reception models.

pub mod analysis;
pub mod error;
pub mod essa;
pub mod model;
pub mod reception;
pub mod scenario;
pub mod slotted;
pub mod traffic;

pub use error::{Error, Result};
