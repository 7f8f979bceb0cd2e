//! Std companion to `lfpp-core`: a rayon replica executor, file formats,
//! resumable JSON-lines campaigns and the `lfpp` command-line tool.

pub mod cli;
pub mod config;
pub mod exec;
pub mod formats;
pub mod store;

pub use exec::RayonExecutor;
