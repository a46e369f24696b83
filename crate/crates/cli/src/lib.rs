//! Command-line and HTTP front ends over a project directory.

pub mod args;
pub mod http;
pub mod render;
mod run;

pub use run::{run, simulate};
