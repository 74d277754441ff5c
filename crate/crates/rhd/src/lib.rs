//! File formats, sweeps and the command line for `rhd-core`.

pub mod cli;
pub mod format;
pub mod sweep;

pub use format::{load_dataset, read_dataset, save_dataset, write_dataset, FormatError};
