//! Networked evaluation loop for entity linkers.
//!
//! * [`wire`]: the JSON `(begin, end, entity)` protocol.
//! * [`service`]: an HTTP annotator service around a reference linker.
//! * [`annotator`]: remote and in-process systems under test.
//! * [`runner`]: corpus benchmark with fail-soft scoring.
//! * [`report`]: CSV, summary and plot-data files.
//! * [`cli`]: the `elbench` command.

pub mod annotator;
pub mod cli;
pub mod config;
pub mod report;
pub mod runner;
pub mod service;
pub mod wire;

pub use annotator::{AnnotateError, Annotator, HttpAnnotator, InProcessAnnotator};
pub use config::{LinkerConfig, RunConfig};
pub use report::emit_report;
pub use runner::{run_benchmark, run_benchmark_detailed, RunOptions};
pub use service::{serve, spawn_server, Pipeline, ServerHandle};
