//! File formats, frame rendering, reports and the command-line front end for
//! [`evsr_core`].

pub mod cli;
pub mod error;
pub mod format;
pub mod render;
pub mod report;

pub use error::{IoError, Result};
pub use format::{read, write, Format};
