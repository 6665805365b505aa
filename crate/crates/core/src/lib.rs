pub mod bo;
pub mod bounds;
pub mod config;
pub mod cpg;
pub mod envs;
pub mod error;
pub mod gp;
pub mod harness;
pub mod nn;
pub mod offline;
pub mod online;
pub mod replay;
pub mod td3;

pub use error::{Error, Result};
