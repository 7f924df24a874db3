//! Command-line front end: run configuration, stage commands and report
//! rendering. The binary in `main.rs` is a thin wrapper around [`run`].

mod app;
pub mod commands;
pub mod config;
pub mod layout;
pub mod render;

pub use app::{run, Cli, Command, Ctx, Env};
