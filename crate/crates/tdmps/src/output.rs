//! CSV and JSON emission.
//!
//! Reals are written with 17 significant digits (`{:.16e}`), enough to
//! round-trip an `f64`. An unbounded `chi_max` is written as `0`. Failed
//! cells carry `NaN` in their numeric columns.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tdmps_core::C64;

use crate::bench::{BenchOutcome, BenchRecord, ReferenceKind, TraceRecord};
use crate::config::BenchConfig;
use crate::error::{BenchError, Result};

pub const CSV_HEADER: &str = "n_sites,n_steps,stepper,pulse_index,error,runtime_s,chi_max,truncation_weight";
pub const TRACE_HEADER: &str = "n_sites,n_steps,stepper,pulse_index,step,time_us,error";

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Writes `records` sorted by `(n_sites, n_steps, stepper, pulse_index)`.
pub fn write_csv<W: Write>(records: &[BenchRecord], mut w: W) -> io::Result<()> {
    let mut sorted: Vec<&BenchRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.sort_key());
    writeln!(w, "{CSV_HEADER}")?;
    for r in sorted {
        writeln!(
            w,
            "{},{},{},{},{:.16e},{:.16e},{},{:.16e}",
            r.n_sites,
            r.n_steps,
            r.stepper,
            r.pulse_index,
            r.error,
            r.runtime_s,
            r.chi_max.unwrap_or(0),
            r.truncation_weight
        )?;
    }
    w.flush()
}

pub fn emit_csv(records: &[BenchRecord], path: &Path) -> Result<()> {
    write_csv(records, create(path)?).map_err(io_err(path))
}

pub fn write_trace_csv<W: Write>(traces: &[TraceRecord], mut w: W) -> io::Result<()> {
    let mut sorted: Vec<&TraceRecord> = traces.iter().collect();
    sorted.sort_by_key(|r| r.sort_key());
    writeln!(w, "{TRACE_HEADER}")?;
    for r in sorted {
        writeln!(
            w,
            "{},{},{},{},{},{:.16e},{:.16e}",
            r.n_sites, r.n_steps, r.stepper, r.pulse_index, r.step, r.time, r.error
        )?;
    }
    w.flush()
}

pub fn emit_trace_csv(traces: &[TraceRecord], path: &Path) -> Result<()> {
    write_trace_csv(traces, create(path)?).map_err(io_err(path))
}

/// `index,re,im` rows of a state vector.
pub fn write_amplitudes<W: Write>(psi: &[C64], mut w: W) -> io::Result<()> {
    writeln!(w, "index,re,im")?;
    for (i, z) in psi.iter().enumerate() {
        writeln!(w, "{i},{:.16e},{:.16e}", z.re, z.im)?;
    }
    w.flush()
}

/// `out.csv` -> `out.meta.json`.
pub fn metadata_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

/// Run description written next to the CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub command: String,
    pub model: String,
    pub config: BenchConfig,
    pub pulses: Vec<[f64; 4]>,
    pub chi_max: String,
    pub propagator: &'static str,
    pub initial_state: String,
    pub error_metric: &'static str,
    pub ratio_aggregation: &'static str,
    pub runtime: String,
    pub references: BTreeMap<usize, ReferenceKind>,
    pub failures: Vec<String>,
}

impl Metadata {
    pub fn new(command: &str, cfg: &BenchConfig, outcome: &BenchOutcome) -> Self {
        let runtime = if cfg.timing {
            format!(
                "wall-clock seconds of the evolve call only, 1 worker, {} warm-up trajectory discarded",
                if cfg.warmup { "one" } else { "no" }
            )
        } else {
            format!("untimed run with {} workers; runtime_s is not comparable", cfg.effective_jobs())
        };
        Self {
            tool: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).into(),
            command: command.into(),
            model: cfg.model_label(),
            config: cfg.clone(),
            pulses: cfg.pulse_list().iter().map(|p| [p.c1, p.c2, p.w1, p.w2]).collect(),
            chi_max: cfg.effective_chi_max().map_or("unbounded".into(), |c| c.to_string()),
            propagator: "second-order even/odd TEBD, no merged half steps",
            initial_state: cfg.initial_label(),
            error_metric: "max_i |psi_i - ref_i| of the final state, no phase alignment",
            ratio_aggregation: "ratio of means: mean(E_riemann) / mean(E_simpson) per (n_sites, n_steps)",
            runtime,
            references: outcome.references.clone(),
            failures: outcome.failures.clone(),
        }
    }
}

pub fn emit_metadata(meta: &Metadata, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, meta).map_err(|e| io_err(path)(e.into()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(path))
}
