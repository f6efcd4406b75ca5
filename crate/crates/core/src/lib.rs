pub mod cli;
pub mod error;
pub mod estimators;
pub mod featselect;
pub mod grid;
pub mod nn;
pub mod opp;
pub mod pipeline;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
