//! Sharp Fano-type bounds on conditional information measures.

pub mod asymptotics;
pub mod error;
pub mod errprob;
pub mod extremal;
pub mod fano;
pub mod json;
pub mod measures;
pub mod oracle;
pub mod numeric;
pub mod pmf;

pub use error::{Error, Result};
