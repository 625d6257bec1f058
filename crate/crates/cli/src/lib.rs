//! Pipeline stages behind the `moasscope` command.

pub mod analysis;
pub mod config;
pub mod detect;
pub mod output;
pub mod report;
pub mod store;

pub use config::{RunConfig, UsageError};
