pub mod benchmark;
pub mod calibration;
pub mod error;
pub mod mas;
pub mod output;
pub mod material;
pub mod solver;
pub mod scenario;
pub mod structure;
pub mod wire;

pub use error::{Error, Result};
pub use material::{MaterialConstants, MaterialParams, WireInput};
