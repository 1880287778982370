pub mod certify;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod hoffman;
pub mod io;
pub mod linops;
pub mod lp;
pub mod solvers;

pub use error::{Error, Result};
