//! Error, error-ratio and runtime sweeps over step counts and chain lengths.
//!
//! Every cell of the grid `N x N_s x stepper x pulse` evolves a product state
//! (all `m = 0` unless `initial_m` says otherwise) with second-order TEBD and compares the final state with a
//! reference computed once per `(N, pulse)`. Up to `oracle_cap` sites the
//! reference is the adaptive state-vector integrator; longer chains fall
//! back to a finer MPS run (see [`ReferenceKind`]).

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use tdmps_core::mps::DEFAULT_DENSE_CAP;
use tdmps_core::oracle::{self, OdeTolerances};
use tdmps_core::tebd::{self, EvolveReport};
use tdmps_core::{Envelope, MpsState, NvChainModel, PulseSpec, StepperKind, SvdTruncation, C64};

use crate::config::BenchConfig;
use crate::error::{BenchError, Result};

/// Step-count multiplier for self-convergence references.
pub const SELF_REFERENCE_REFINEMENT: usize = 8;

/// One benchmark cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub n_sites: usize,
    pub n_steps: usize,
    pub stepper: StepperKind,
    pub pulse_index: usize,
    /// Final-state error; NaN marks a failed cell.
    pub error: f64,
    /// Wall-clock seconds of the evolve call alone.
    pub runtime_s: f64,
    /// `None` is unbounded.
    pub chi_max: Option<usize>,
    pub truncation_weight: f64,
}

impl BenchRecord {
    pub fn sort_key(&self) -> (usize, usize, StepperKind, usize) {
        (self.n_sites, self.n_steps, self.stepper, self.pulse_index)
    }

    pub fn failed(&self) -> bool {
        self.error.is_nan()
    }
}

/// Error of the state after step `step` of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub n_sites: usize,
    pub n_steps: usize,
    pub stepper: StepperKind,
    pub pulse_index: usize,
    pub step: usize,
    pub time: f64,
    pub error: f64,
}

impl TraceRecord {
    pub fn sort_key(&self) -> (usize, usize, StepperKind, usize, usize) {
        (self.n_sites, self.n_steps, self.stepper, self.pulse_index, self.step)
    }
}

/// How the reference state of a chain length was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReferenceKind {
    /// Adaptive state-vector integration; errors are Hölder-∞ distances.
    Oracle,
    /// Simpson TEBD with `n_steps` steps and the run's truncation.
    /// Unverified against the exact dynamics. Errors are Hölder-∞ distances
    /// up to the dense cap and Euclidean distances (an upper bound) beyond.
    MpsSelfConvergence { n_steps: usize },
}

/// Records plus bookkeeping of a sweep.
#[derive(Debug, Clone, Default)]
pub struct BenchOutcome {
    pub records: Vec<BenchRecord>,
    pub traces: Vec<TraceRecord>,
    pub references: BTreeMap<usize, ReferenceKind>,
    /// One diagnostic line per failed cell or pulse.
    pub failures: Vec<String>,
}

impl BenchOutcome {
    pub fn sort(&mut self) {
        self.records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        self.traces.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    }

    pub fn is_success(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Ket of the `m = 0` level in the `(+1, 0, -1)` basis.
pub const KET_M0: [C64; 3] = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)];

/// All sites in `m = 0`.
pub fn initial_state(n_sites: usize) -> Result<MpsState> {
    Ok(MpsState::uniform(n_sites, KET_M0)?)
}

/// The configured product state.
pub fn configured_state(cfg: &BenchConfig, n_sites: usize) -> Result<MpsState> {
    Ok(MpsState::from_product_state(&cfg.initial_kets(n_sites)?)?)
}

/// [`tebd::evolve`] with its wall-clock time.
pub fn timed_evolve(
    psi0: &MpsState,
    model: &NvChainModel,
    kind: StepperKind,
    t_total: f64,
    n_steps: usize,
    trunc: SvdTruncation,
) -> Result<(MpsState, EvolveReport, Duration)> {
    let start = Instant::now();
    let (psi, report) = tebd::evolve(psi0, model, kind, t_total, n_steps, trunc)?;
    Ok((psi, report, start.elapsed()))
}

/// Model for chain length `n` driven by `pulse`.
pub fn build_model(cfg: &BenchConfig, n_sites: usize, pulse: PulseSpec) -> Result<NvChainModel> {
    Ok(cfg.parameters(n_sites)?.into_model(Envelope::Harmonic(pulse))?)
}

enum Reference {
    Dense(Vec<C64>),
    Mps(MpsState),
}

impl Reference {
    fn distance(&self, psi: &MpsState) -> Result<f64> {
        match self {
            Reference::Dense(v) => Ok(oracle::holder_inf_error(&psi.to_dense()?, v)?),
            Reference::Mps(r) => {
                let cross = tdmps_core::mps::overlap(r, psi)?;
                let d2 = r.norm_squared() + psi.norm_squared() - 2.0 * cross.re;
                Ok(d2.max(0.0).sqrt())
            }
        }
    }
}

/// Error versus step count. Every chain length must be within the oracle cap.
pub fn run_error_vs_steps(cfg: &BenchConfig) -> Result<BenchOutcome> {
    cfg.validate()?;
    for n in cfg.sites()? {
        if n > cfg.oracle_cap.min(oracle::STATE_VECTOR_CAP) {
            return Err(BenchError::Config(format!(
                "N = {n} exceeds the oracle cap of {}; use error-vs-size for self-convergence runs",
                cfg.oracle_cap.min(oracle::STATE_VECTOR_CAP)
            )));
        }
    }
    run_grid(cfg)
}

/// Error versus chain length. Lengths beyond the oracle cap are measured
/// against an MPS self-convergence reference and labelled as such.
pub fn run_error_vs_size(cfg: &BenchConfig) -> Result<BenchOutcome> {
    cfg.validate()?;
    run_grid(cfg)
}

struct PulseTask {
    n_sites: usize,
    pulse_index: usize,
    pulse: PulseSpec,
}

fn run_grid(cfg: &BenchConfig) -> Result<BenchOutcome> {
    let trunc = cfg.truncation()?;
    let pulses = cfg.pulse_list();
    let sites = cfg.sites()?;
    let tasks: Vec<PulseTask> = sites
        .iter()
        .flat_map(|&n| pulses.iter().enumerate().map(move |(i, &p)| PulseTask { n_sites: n, pulse_index: i, pulse: p }))
        .collect();

    let mut outcome = BenchOutcome::default();
    for &n in &sites {
        outcome.references.insert(n, reference_kind(cfg, n));
    }

    if cfg.timing && cfg.warmup {
        // discarded; a failure here resurfaces in its own cell
        let t = &tasks[0];
        let _ = build_model(cfg, t.n_sites, t.pulse).and_then(|model| {
            let psi0 = configured_state(cfg, t.n_sites)?;
            timed_evolve(&psi0, &model, cfg.steppers[0], cfg.t_total, cfg.ns_list[0], trunc)
        });
    }

    let run = |t: &PulseTask| run_pulse(cfg, t, trunc);
    let parts: Vec<BenchOutcome> = if cfg.effective_jobs() == 1 {
        tasks.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.effective_jobs())
            .build()
            .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
        pool.install(|| tasks.par_iter().map(run).collect())
    };
    for p in parts {
        outcome.records.extend(p.records);
        outcome.traces.extend(p.traces);
        outcome.failures.extend(p.failures);
    }
    outcome.sort();
    Ok(outcome)
}

fn reference_kind(cfg: &BenchConfig, n_sites: usize) -> ReferenceKind {
    if n_sites <= cfg.oracle_cap.min(oracle::STATE_VECTOR_CAP) {
        ReferenceKind::Oracle
    } else {
        let finest = cfg.ns_list.iter().copied().max().unwrap_or(1);
        ReferenceKind::MpsSelfConvergence { n_steps: finest * SELF_REFERENCE_REFINEMENT }
    }
}

fn failure_row(cfg: &BenchConfig, t: &PulseTask, n_steps: usize, stepper: StepperKind) -> BenchRecord {
    BenchRecord {
        n_sites: t.n_sites,
        n_steps,
        stepper,
        pulse_index: t.pulse_index,
        error: f64::NAN,
        runtime_s: f64::NAN,
        chi_max: cfg.effective_chi_max(),
        truncation_weight: f64::NAN,
    }
}

fn run_pulse(cfg: &BenchConfig, t: &PulseTask, trunc: SvdTruncation) -> BenchOutcome {
    let mut out = BenchOutcome::default();
    let cells = || cfg.ns_list.iter().flat_map(|&ns| cfg.steppers.iter().map(move |&k| (ns, k)));
    let setup = (|| -> Result<(NvChainModel, MpsState, Reference)> {
        let model = build_model(cfg, t.n_sites, t.pulse)?;
        let psi0 = configured_state(cfg, t.n_sites)?;
        let reference = compute_reference(cfg, &model, &psi0, trunc)?;
        Ok((model, psi0, reference))
    })();
    let (model, psi0, reference) = match setup {
        Ok(s) => s,
        Err(e) => {
            out.failures.push(format!("N={} pulse={}: reference failed: {e}", t.n_sites, t.pulse_index));
            out.records.extend(cells().map(|(ns, k)| failure_row(cfg, t, ns, k)));
            return out;
        }
    };
    let dense_reference = matches!(reference, Reference::Dense(_));
    for (ns, kind) in cells() {
        let cell = (|| -> Result<BenchRecord> {
            let (psi, report, elapsed) = timed_evolve(&psi0, &model, kind, cfg.t_total, ns, trunc)?;
            Ok(BenchRecord {
                n_sites: t.n_sites,
                n_steps: ns,
                stepper: kind,
                pulse_index: t.pulse_index,
                error: reference.distance(&psi)?,
                runtime_s: elapsed.as_secs_f64(),
                chi_max: cfg.effective_chi_max(),
                truncation_weight: report.truncation_weight,
            })
        })();
        match cell {
            Ok(r) => out.records.push(r),
            Err(e) => {
                out.failures.push(format!(
                    "N={} N_s={ns} stepper={kind} pulse={}: {e}",
                    t.n_sites, t.pulse_index
                ));
                out.records.push(failure_row(cfg, t, ns, kind));
            }
        }
        if cfg.trace && dense_reference {
            match trace_cell(cfg, &model, &psi0, kind, ns, trunc, t) {
                Ok(tr) => out.traces.extend(tr),
                Err(e) => out.failures.push(format!(
                    "N={} N_s={ns} stepper={kind} pulse={}: trace failed: {e}",
                    t.n_sites, t.pulse_index
                )),
            }
        }
    }
    out
}

fn compute_reference(cfg: &BenchConfig, model: &NvChainModel, psi0: &MpsState, trunc: SvdTruncation) -> Result<Reference> {
    match reference_kind(cfg, model.n_sites()) {
        ReferenceKind::Oracle => {
            let v0 = psi0.to_dense()?;
            Ok(Reference::Dense(oracle::sesolve(model, &v0, cfg.t_total, OdeTolerances::default())?))
        }
        ReferenceKind::MpsSelfConvergence { n_steps } => {
            let (psi, _) = tebd::evolve(psi0, model, StepperKind::Simpson, cfg.t_total, n_steps, trunc)?;
            if model.n_sites() <= DEFAULT_DENSE_CAP {
                Ok(Reference::Dense(psi.to_dense()?))
            } else {
                Ok(Reference::Mps(psi))
            }
        }
    }
}

/// Per-step errors of one cell against the oracle sampled at the step ends.
#[allow(clippy::too_many_arguments)]
fn trace_cell(
    cfg: &BenchConfig,
    model: &NvChainModel,
    psi0: &MpsState,
    kind: StepperKind,
    n_steps: usize,
    trunc: SvdTruncation,
    t: &PulseTask,
) -> Result<Vec<TraceRecord>> {
    let dt = cfg.t_total / n_steps as f64;
    let times: Vec<f64> = (1..=n_steps).map(|k| if k == n_steps { cfg.t_total } else { k as f64 * dt }).collect();
    let exact = oracle::sesolve_at(model, &psi0.to_dense()?, &times, OdeTolerances::default())?;
    let mut rows = Vec::with_capacity(n_steps);
    tebd::evolve_observed(psi0, model, kind, cfg.t_total, n_steps, trunc, |k, time, psi| {
        let error = oracle::holder_inf_error(&psi.to_dense()?, &exact[k - 1])?;
        rows.push(TraceRecord {
            n_sites: t.n_sites,
            n_steps,
            stepper: kind,
            pulse_index: t.pulse_index,
            step: k,
            time,
            error,
        });
        Ok(())
    })?;
    Ok(rows)
}
