pub mod cli;
pub mod error;
pub mod lasserre;
pub mod netmodel;
pub mod poly;
pub mod report;
pub mod sdpcore;
pub mod sweep;

pub use error::{Error, Result};
