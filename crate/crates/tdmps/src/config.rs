//! Benchmark configuration and the named parameter presets.
//!
//! Configs are JSON. A minimal file names a preset and overrides a few
//! fields:
//!
//! ```json
//! { "preset": "nv3", "seed": 7, "ns_list": [250, 500, 1000] }
//! ```
//!
//! A custom chain replaces `preset` with a `model` block. Per-site and
//! per-bond quantities accept a scalar (broadcast) or an explicit array.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use tdmps_core::model::{presets, NvParameters};
use tdmps_core::{PulseSpec, StepperKind, SvdTruncation, C64};

use crate::error::{BenchError, Result};
use crate::pulses::generate_pulses;

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "nv2")]
    Nv2,
    #[serde(rename = "nv3")]
    Nv3,
    /// Uniform chain whose length comes from the sweep.
    #[serde(rename = "nvN")]
    NvN,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Nv2 => "nv2",
            Preset::Nv3 => "nv3",
            Preset::NvN => "nvN",
        }
    }

    /// Chain length fixed by the preset, if any.
    pub fn fixed_sites(self) -> Option<usize> {
        match self {
            Preset::Nv2 => Some(2),
            Preset::Nv3 => Some(3),
            Preset::NvN => None,
        }
    }

    pub fn parameters(self, n_sites: usize) -> Result<NvParameters> {
        if let Some(n) = self.fixed_sites() {
            if n != n_sites {
                return Err(BenchError::Config(format!(
                    "preset {} has {n} sites, cannot run N = {n_sites}",
                    self.as_str()
                )));
            }
        }
        Ok(match self {
            Preset::Nv2 => presets::nv2(),
            Preset::Nv3 => presets::nv3(),
            Preset::NvN => presets::nv_n(n_sites),
        })
    }

    /// Bond-dimension cap used when the config does not set one.
    pub fn default_chi_max(self) -> Option<usize> {
        match self {
            Preset::Nv2 => None,
            Preset::Nv3 => Some(3),
            Preset::NvN => Some(16),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nv2" => Ok(Preset::Nv2),
            "nv3" => Ok(Preset::Nv3),
            "nvN" | "nvn" => Ok(Preset::NvN),
            other => Err(BenchError::Config(format!("unknown preset '{other}' (expected nv2, nv3 or nvN)"))),
        }
    }
}

/// A scalar broadcast over sites or bonds, or one value each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerSite {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerSite {
    fn expand(&self, len: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            PerSite::Uniform(v) => Ok(vec![*v; len]),
            PerSite::Each(v) if v.len() == len => Ok(v.clone()),
            PerSite::Each(v) => Err(BenchError::Config(format!("{what}: expected {len} values, got {}", v.len()))),
        }
    }
}

/// Custom chain parameters in laboratory units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d_zfs_ghz: PerSite,
    pub omega0_ghz: f64,
    pub gamma_e_ghz_per_t: f64,
    pub bz_gauss: PerSite,
    pub g_khz: PerSite,
    #[serde(default)]
    pub zeta_rad: f64,
    /// Pins the chain length; otherwise it comes from `n_list`.
    #[serde(default)]
    pub n_sites: Option<usize>,
}

impl ModelConfig {
    pub fn parameters(&self, n_sites: usize) -> Result<NvParameters> {
        if n_sites < 2 {
            return Err(BenchError::Config(format!("a chain needs at least 2 sites, got {n_sites}")));
        }
        if let Some(n) = self.n_sites {
            if n != n_sites {
                return Err(BenchError::Config(format!("model has {n} sites, cannot run N = {n_sites}")));
            }
        }
        Ok(NvParameters {
            n_sites,
            d_zfs_ghz: self.d_zfs_ghz.expand(n_sites, "d_zfs_ghz")?,
            omega0_ghz: self.omega0_ghz,
            gamma_e_ghz_per_t: self.gamma_e_ghz_per_t,
            bz_gauss: self.bz_gauss.expand(n_sites, "bz_gauss")?,
            g_khz: self.g_khz.expand(n_sites - 1, "g_khz")?,
            zeta_rad: self.zeta_rad,
        })
    }
}

fn default_n_pulses() -> usize {
    10
}

fn default_t_total() -> f64 {
    0.3
}

fn default_ns_list() -> Vec<usize> {
    vec![1000]
}

fn default_pulse_scale() -> f64 {
    1.0
}

fn default_jobs() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_oracle_cap() -> usize {
    tdmps_core::oracle::STATE_VECTOR_CAP
}

/// Everything a benchmark run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default = "default_n_pulses")]
    pub n_pulses: usize,
    #[serde(default)]
    pub seed: u64,
    /// Multiplies the amplitudes `c1`, `c2`; 1 means `u(t)` is in rad/µs.
    #[serde(default = "default_pulse_scale")]
    pub pulse_scale: f64,
    /// Explicit `[c1, c2, w1, w2]` envelopes replacing the seeded draw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulses: Option<Vec<[f64; 4]>>,
    /// Total evolution time, µs.
    #[serde(default = "default_t_total")]
    pub t_total: f64,
    #[serde(default = "default_ns_list")]
    pub ns_list: Vec<usize>,
    /// Chain lengths; empty means the preset's or model's own length.
    #[serde(default)]
    pub n_list: Vec<usize>,
    /// `None` falls back to the preset default; `Some(0)` means unbounded.
    #[serde(default)]
    pub chi_max: Option<usize>,
    #[serde(default)]
    pub cutoff: f64,
    #[serde(default = "all_steppers", with = "stepper_names")]
    pub steppers: Vec<StepperKind>,
    /// Worker threads. Forced to 1 while `timing` is on.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default = "default_true")]
    pub timing: bool,
    /// Run one untimed trajectory before measuring.
    #[serde(default = "default_true")]
    pub warmup: bool,
    /// Largest N checked against the state-vector oracle.
    #[serde(default = "default_oracle_cap")]
    pub oracle_cap: usize,
    /// Also record per-step errors against the oracle.
    #[serde(default)]
    pub trace: bool,
    /// Initial `m` of each site (+1, 0 or -1). Empty is all zero, a single
    /// value is broadcast.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_m: Vec<i8>,
}

fn all_steppers() -> Vec<StepperKind> {
    StepperKind::ALL.to_vec()
}

mod stepper_names {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[StepperKind], s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|k| k.as_str()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> core::result::Result<Vec<StepperKind>, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        names.iter().map(|n| n.parse().map_err(serde::de::Error::custom)).collect()
    }
}

impl BenchConfig {
    pub fn for_preset(preset: Preset) -> Self {
        Self {
            preset: Some(preset),
            model: None,
            n_pulses: default_n_pulses(),
            seed: 0,
            pulse_scale: default_pulse_scale(),
            pulses: None,
            t_total: default_t_total(),
            ns_list: default_ns_list(),
            n_list: Vec::new(),
            chi_max: None,
            cutoff: 0.0,
            steppers: all_steppers(),
            jobs: default_jobs(),
            timing: true,
            warmup: true,
            oracle_cap: default_oracle_cap(),
            trace: false,
            initial_m: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(BenchError::Config(msg));
        match (&self.preset, &self.model) {
            (None, None) => return fail("config needs either `preset` or `model`".into()),
            (Some(_), Some(_)) => return fail("`preset` and `model` are mutually exclusive".into()),
            _ => {}
        }
        if self.n_pulses == 0 {
            return fail("n_pulses must be at least 1".into());
        }
        if !self.pulse_scale.is_finite() {
            return fail(format!("pulse_scale must be finite, got {}", self.pulse_scale));
        }
        if let Some(p) = &self.pulses {
            if p.is_empty() || p.iter().flatten().any(|x| !x.is_finite()) {
                return fail("pulses must be non-empty and finite".into());
            }
        }
        if self.ns_list.is_empty() || self.ns_list.contains(&0) {
            return fail("ns_list must be non-empty with positive entries".into());
        }
        if self.steppers.is_empty() {
            return fail("steppers must be non-empty".into());
        }
        if !(self.t_total > 0.0 && self.t_total.is_finite()) {
            return fail(format!("t_total must be positive, got {}", self.t_total));
        }
        if self.jobs == 0 {
            return fail("jobs must be at least 1".into());
        }
        let sites = self.sites()?;
        if sites.is_empty() {
            return fail("n_list must be non-empty".into());
        }
        for &n in &sites {
            self.parameters(n)?;
        }
        self.truncation()?;
        if let Some(m) = self.initial_m.iter().find(|m| !(-1..=1).contains(*m)) {
            return fail(format!("initial_m entries must be -1, 0 or 1, got {m}"));
        }
        for &n in &sites {
            self.initial_kets(n)?;
        }
        Ok(())
    }

    /// Product-state kets in the `(+1, 0, -1)` basis.
    pub fn initial_kets(&self, n_sites: usize) -> Result<Vec<[C64; 3]>> {
        let ms = match self.initial_m.len() {
            0 => vec![0; n_sites],
            1 => vec![self.initial_m[0]; n_sites],
            len if len == n_sites => self.initial_m.clone(),
            len => return Err(BenchError::Config(format!("initial_m: expected 1 or {n_sites} values, got {len}"))),
        };
        Ok(ms
            .into_iter()
            .map(|m| {
                let mut ket = [C64::new(0.0, 0.0); 3];
                ket[(1 - m) as usize] = C64::new(1.0, 0.0);
                ket
            })
            .collect())
    }

    pub fn initial_label(&self) -> String {
        if self.initial_m.iter().all(|&m| m == 0) {
            "product state, every site in m = 0".into()
        } else {
            format!("product state, m = {:?}", self.initial_m)
        }
    }

    /// Chain lengths to sweep.
    pub fn sites(&self) -> Result<Vec<usize>> {
        if !self.n_list.is_empty() {
            return Ok(self.n_list.clone());
        }
        let fixed = match (&self.preset, &self.model) {
            (Some(p), _) => p.fixed_sites(),
            (_, Some(m)) => m.n_sites,
            _ => None,
        };
        fixed.map(|n| vec![n]).ok_or_else(|| BenchError::Config("n_list is required for this model".into()))
    }

    pub fn parameters(&self, n_sites: usize) -> Result<NvParameters> {
        match (&self.preset, &self.model) {
            (Some(p), None) => p.parameters(n_sites),
            (None, Some(m)) => m.parameters(n_sites),
            _ => Err(BenchError::Config("config needs exactly one of `preset` or `model`".into())),
        }
    }

    /// Drive envelopes of the run, one per pulse index.
    pub fn pulse_list(&self) -> Vec<PulseSpec> {
        let base = match &self.pulses {
            Some(p) => p.iter().map(|&[c1, c2, w1, w2]| PulseSpec { c1, c2, w1, w2 }).collect(),
            None => generate_pulses(self.seed, self.n_pulses),
        };
        if self.pulse_scale == 1.0 {
            return base;
        }
        base.into_iter().map(|p| PulseSpec { c1: p.c1 * self.pulse_scale, c2: p.c2 * self.pulse_scale, ..p }).collect()
    }

    /// Effective bond-dimension cap; `None` is unbounded.
    pub fn effective_chi_max(&self) -> Option<usize> {
        match self.chi_max {
            Some(0) => None,
            Some(c) => Some(c),
            None => self.preset.and_then(Preset::default_chi_max),
        }
    }

    pub fn truncation(&self) -> Result<SvdTruncation> {
        Ok(SvdTruncation::new(self.effective_chi_max().unwrap_or(usize::MAX), self.cutoff)?)
    }

    /// Worker count after the timing rule is applied.
    pub fn effective_jobs(&self) -> usize {
        if self.timing {
            1
        } else {
            self.jobs
        }
    }

    /// Short label of the Hamiltonian source.
    pub fn model_label(&self) -> String {
        match &self.preset {
            Some(p) => p.to_string(),
            None => "custom".into(),
        }
    }
}
