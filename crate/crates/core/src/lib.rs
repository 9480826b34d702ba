pub mod colormodel;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod imageops;
pub mod io;
pub mod matting;
pub mod recommender;
pub mod synthesis;
pub mod synthetic;

pub use error::{Error, Result};
