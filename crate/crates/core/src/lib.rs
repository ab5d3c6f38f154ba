pub mod cli;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod labeler;
pub mod maps;
pub mod metrics;
pub mod nn;
pub mod policy;
pub mod train;

pub use error::{Error, Result};
pub use grid::{BinaryMask, Grid};
pub use maps::GraspMaps;
