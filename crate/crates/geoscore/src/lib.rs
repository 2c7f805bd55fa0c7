//! File formats, parallel replicate evaluation and the `geoscore` command
//! line on top of `geoscore-core`.

pub mod cli;
pub mod error;
pub mod io;
pub mod parallel;
pub mod report;

pub use cli::run_with;
pub use error::{InputError, Result};
