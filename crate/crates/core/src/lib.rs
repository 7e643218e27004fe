pub mod adversary;
pub mod config;
pub mod env;
pub mod error;
pub mod frontier;
pub mod naturalness;
pub mod nn;
pub mod rigid;
pub mod rl;
pub mod robustgt;
pub mod runstore;
pub mod seed;
pub mod workflow;

pub use error::{Error, Result};
