//! File formats, dataset IO, parallel batch scoring and the command line
//! for `fpmatch-core`.

pub mod batch;
pub mod cli;
pub mod dataset;
pub mod formats;
