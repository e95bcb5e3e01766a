//! Laboratory for the masked Unique-SAT block ensemble.

pub mod codec;
pub mod decoders;
pub mod ensemble;
pub mod error;
pub mod field;
pub mod gf2;
pub mod harness;
pub mod hash;
pub mod locality;
pub mod rng;
pub mod sils;
pub mod stats;
pub mod symmetry;

pub use error::{Error, Result};
