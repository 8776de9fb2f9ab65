pub mod corpus;
pub mod curvelet;
pub mod error;
pub mod eval;
pub mod features;
pub mod format;
pub mod kmeans;
pub mod labelmap;
pub mod retrieval;
pub mod seed;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
