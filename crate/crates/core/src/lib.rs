pub mod checkpoint;
pub mod data;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod mps;
pub mod run;
pub mod tensor;
pub mod train;
pub mod verify;
pub mod vqc;

pub use error::{Error, Result};
