use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tdmps::analysis::{error_ratios, fit_convergence_order};
use tdmps::bench::{build_model, configured_state, timed_evolve, BenchOutcome};
use tdmps::config::{BenchConfig, Preset};
use tdmps::output::{self, Metadata};
use tdmps::{BenchError, Result};
use tdmps_core::StepperKind;

/// Riemann versus Simpson time stepping for MPS evolution of NV chains.
#[derive(Parser)]
#[command(name = "tdmps-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error and runtime against the oracle over a list of step counts.
    ErrorVsSteps(Common),
    /// Error and runtime over a list of chain lengths at fixed step count.
    ErrorVsSize(Common),
    /// Like error-vs-steps, then fit the convergence order of each stepper.
    Convergence(Common),
    /// One trajectory; writes the final-state amplitudes.
    Evolve(EvolveArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON config; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// nv2, nv3 or nvN.
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_pulses: Option<usize>,
    /// Step counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    ns: Vec<usize>,
    /// Chain lengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Multiplier of the pulse amplitudes.
    #[arg(long)]
    pulse_scale: Option<f64>,
    /// Total time, µs.
    #[arg(long)]
    t_total: Option<f64>,
    /// Bond-dimension cap; 0 is unbounded.
    #[arg(long)]
    chi_max: Option<usize>,
    #[arg(long)]
    cutoff: Option<f64>,
    /// riemann, simpson or both, comma separated.
    #[arg(long, value_delimiter = ',')]
    steppers: Vec<StepperKind>,
    /// Worker threads; only honoured with --no-timing.
    #[arg(long)]
    jobs: Option<usize>,
    /// Initial m per site (+1, 0, -1), comma separated; one value is broadcast.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    initial_m: Vec<i8>,
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    no_warmup: bool,
    /// Results CSV; a .meta.json sidecar is written next to it. Stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-step error CSV (oracle-verified lengths only).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct EvolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "simpson")]
    stepper: StepperKind,
    #[arg(long, default_value_t = 1000)]
    n_steps: usize,
    #[arg(long, default_value_t = 0)]
    pulse_index: usize,
}

impl Common {
    fn resolve(&self, default_preset: Preset, defaults: impl FnOnce(&mut BenchConfig)) -> Result<BenchConfig> {
        let mut cfg = match &self.config {
            Some(path) => BenchConfig::load(path)?,
            None => {
                let mut cfg = BenchConfig::for_preset(self.preset.unwrap_or(default_preset));
                defaults(&mut cfg);
                cfg
            }
        };
        if let Some(p) = self.preset {
            cfg.preset = Some(p);
            cfg.model = None;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.n_pulses {
            cfg.n_pulses = n;
        }
        if !self.ns.is_empty() {
            cfg.ns_list = self.ns.clone();
        }
        if !self.n.is_empty() {
            cfg.n_list = self.n.clone();
        }
        if let Some(s) = self.pulse_scale {
            cfg.pulse_scale = s;
        }
        if let Some(t) = self.t_total {
            cfg.t_total = t;
        }
        if self.chi_max.is_some() {
            cfg.chi_max = self.chi_max;
        }
        if let Some(c) = self.cutoff {
            cfg.cutoff = c;
        }
        if !self.steppers.is_empty() {
            cfg.steppers = self.steppers.clone();
        }
        if !self.initial_m.is_empty() {
            cfg.initial_m = self.initial_m.clone();
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        cfg.timing &= !self.no_timing;
        cfg.warmup &= !self.no_warmup;
        cfg.trace |= self.trace.is_some();
        if cfg.preset.is_some_and(|p| p.fixed_sites().is_some()) && self.n.is_empty() && self.config.is_none() {
            cfg.n_list.clear();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_outputs(command: &str, c: &Common, cfg: &BenchConfig, outcome: &BenchOutcome) -> Result<()> {
    match &c.out {
        Some(path) => {
            output::emit_csv(&outcome.records, path)?;
            output::emit_metadata(&Metadata::new(command, cfg, outcome), &output::metadata_path(path))?;
        }
        None => {
            let stdout = io::stdout().lock();
            output::write_csv(&outcome.records, stdout).map_err(|source| BenchError::Io { path: "<stdout>".into(), source })?;
        }
    }
    if let Some(path) = &c.trace {
        output::emit_trace_csv(&outcome.traces, path)?;
    }
    Ok(())
}

fn print_ratios(outcome: &BenchOutcome) {
    let cells = error_ratios(&outcome.records);
    if cells.is_empty() {
        return;
    }
    eprintln!("{:>4} {:>7} {:>12} {:>12} {:>10} {:>10}", "N", "N_s", "E_riemann", "E_simpson", "E_r/E_s", "t_s/t_r");
    for c in cells {
        eprintln!(
            "{:>4} {:>7} {:>12.4e} {:>12.4e} {:>10.3} {:>10.3}",
            c.n_sites,
            c.n_steps,
            c.riemann.error,
            c.simpson.error,
            c.error_ratio(),
            c.runtime_ratio()
        );
    }
}

fn sweep(command: &str, c: &Common, cfg: BenchConfig, fit: bool) -> Result<bool> {
    let outcome = match command {
        "error-vs-size" => tdmps::run_error_vs_size(&cfg)?,
        _ => tdmps::run_error_vs_steps(&cfg)?,
    };
    write_outputs(command, c, &cfg, &outcome)?;
    print_ratios(&outcome);
    if fit {
        for f in fit_convergence_order(&outcome.records)? {
            eprintln!("N={} {}: slope {:.4}", f.n_sites, f.stepper, f.slope);
        }
    }
    for msg in &outcome.failures {
        eprintln!("failed: {msg}");
    }
    Ok(outcome.is_success())
}

fn evolve(args: &EvolveArgs) -> Result<bool> {
    let c = &args.common;
    let cfg = c.resolve(Preset::Nv2, |_| {})?;
    let n_sites = cfg.sites()?[0];
    let pulses = cfg.pulse_list();
    let pulse = *pulses.get(args.pulse_index).ok_or_else(|| {
        BenchError::Config(format!("pulse index {} out of range ({} pulses)", args.pulse_index, pulses.len()))
    })?;
    let model = build_model(&cfg, n_sites, pulse)?;
    let psi0 = configured_state(&cfg, n_sites)?;
    let (psi, report, elapsed) = timed_evolve(&psi0, &model, args.stepper, cfg.t_total, args.n_steps, cfg.truncation()?)?;
    let amplitudes = psi.to_dense()?;
    match &c.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|source| BenchError::Io { path: path.clone(), source })?;
            output::write_amplitudes(&amplitudes, io::BufWriter::new(file))
                .map_err(|source| BenchError::Io { path: path.clone(), source })?;
        }
        None => output::write_amplitudes(&amplitudes, io::stdout().lock())
            .map_err(|source| BenchError::Io { path: "<stdout>".into(), source })?,
    }
    eprintln!(
        "N={n_sites} {} N_s={} dt={:.3e} us: {:.3} s, max bond {}, truncation weight {:.3e}, norm^2 {:.15}",
        args.stepper,
        report.n_steps,
        report.dt,
        elapsed.as_secs_f64(),
        report.max_bond_dim,
        report.truncation_weight,
        psi.norm_squared()
    );
    Ok(true)
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::ErrorVsSteps(c) => {
            let cfg = c.resolve(Preset::Nv2, |cfg| cfg.ns_list = vec![50, 100, 200, 400, 800])?;
            sweep("error-vs-steps", c, cfg, false)
        }
        Command::Convergence(c) => {
            let cfg = c.resolve(Preset::Nv2, |cfg| cfg.ns_list = vec![50, 100, 200, 400, 800])?;
            sweep("convergence", c, cfg, true)
        }
        Command::ErrorVsSize(c) => {
            let cfg = c.resolve(Preset::NvN, |cfg| {
                cfg.n_list = vec![2, 3, 4, 5, 6];
                cfg.ns_list = vec![1000];
            })?;
            sweep("error-vs-size", c, cfg, false)
        }
        Command::Evolve(args) => evolve(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            let _ = io::stderr().flush();
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
