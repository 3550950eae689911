pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod explain;
pub mod featsel;
pub mod models;
pub mod neural;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod rng;
pub mod synth;
pub mod trees;

pub use error::{Error, Result};
