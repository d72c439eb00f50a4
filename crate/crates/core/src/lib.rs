pub mod concentration;
pub mod error;
pub mod experiments;
pub mod fd_solver;
pub mod ground_state;
pub mod linalg;
pub mod output;
pub mod params;

pub use error::{Error, Result};
