pub mod ast;
pub mod ast2vec;
mod binfmt;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod model;
pub mod numeric;
pub mod par;
pub mod pipeline;
pub mod synth;
pub mod workflow;

pub use error::{Error, Result};
