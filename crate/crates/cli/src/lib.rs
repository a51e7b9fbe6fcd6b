//! The `tweetsense` command line and the annotation HTTP service.

pub mod cli;
pub mod server;

pub use cli::{main_with, Cli};
