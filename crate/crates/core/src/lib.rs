pub mod basis;
pub mod data;
pub mod error;
pub mod features;
pub mod fpca;
pub mod linalg;

pub use data::{DistanceMatrix, Method, TimeSeries};
pub use error::{FigError, Result};
pub mod distance;
pub mod dig;
pub mod embed;
pub mod simulate;
pub mod config;
pub mod eval;
pub mod io;
pub mod cache;
pub mod svg;
pub mod cli;
