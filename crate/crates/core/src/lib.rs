pub mod acceptance;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod inputs;
pub mod logistic;
pub mod measure;
pub mod operator;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
