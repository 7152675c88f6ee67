//! Benchmark harness around `tdmps-core`: configuration and presets, seeded
//! pulses, the error and runtime sweeps, aggregation and file output.

pub mod analysis;
pub mod bench;
pub mod config;
pub mod error;
pub mod output;
pub mod pulses;

pub use analysis::{error_ratios, fit_convergence_order, ConvergenceFit, RatioCell};
pub use bench::{run_error_vs_size, run_error_vs_steps, timed_evolve, BenchOutcome, BenchRecord, ReferenceKind};
pub use config::{BenchConfig, Preset};
pub use error::{BenchError, Result};
pub use output::{emit_csv, emit_metadata, Metadata};
pub use pulses::generate_pulses;
