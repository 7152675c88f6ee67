//! Driven NV-centre chain: spin-1 operators, the time-dependent Hamiltonian
//! `H(t) = H_drift + u(t) H_control` split into nearest-neighbour bond terms,
//! and the left-endpoint / Simpson averages of those terms over a step.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use crate::linalg::{hermiticity_defect, kron, real, PairOp, SiteOp, ONE, ZERO};
use crate::{Error, Result, C64};

pub mod units {
    //! Conversions from laboratory units into rad/µs.
    use core::f64::consts::PI;

    /// rad/µs per GHz.
    pub const PER_GHZ: f64 = 2.0 * PI * 1.0e3;
    /// rad/µs per kHz.
    pub const PER_KHZ: f64 = 2.0 * PI * 1.0e-3;
    /// rad/(µs·G) per GHz/T (1 T = 10⁴ G).
    pub const PER_GHZ_PER_TESLA: f64 = 2.0 * PI * 1.0e-1;
}

/// Which matrix plays the role of the y-like drive quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SyConvention {
    /// `(1/√2) [[0,-i,0],[i,0,i],[0,-i,0]]`, the matrix the NV drive model uses.
    #[default]
    Printed,
    /// Textbook spin-1 `S_y`, for sensitivity checks.
    Canonical,
}

/// Spin-1 operators in the `m = +1, 0, -1` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOps {
    pub sz: SiteOp,
    pub sx: SiteOp,
    pub sy_prime: SiteOp,
    pub sz2: SiteOp,
    pub identity: SiteOp,
}

impl SpinOps {
    pub fn new(convention: SyConvention) -> Self {
        let r = real(FRAC_1_SQRT_2);
        let i = C64::new(0.0, FRAC_1_SQRT_2);
        let sz = SiteOp::from_diagonal(&nalgebra::Vector3::new(ONE, ZERO, -ONE));
        #[rustfmt::skip]
        let sx = SiteOp::new(
            ZERO, r, ZERO,
            r, ZERO, r,
            ZERO, r, ZERO,
        );
        #[rustfmt::skip]
        let sy_prime = match convention {
            SyConvention::Printed => SiteOp::new(
                ZERO, -i, ZERO,
                i, ZERO, i,
                ZERO, -i, ZERO,
            ),
            SyConvention::Canonical => SiteOp::new(
                ZERO, -i, ZERO,
                i, ZERO, -i,
                ZERO, i, ZERO,
            ),
        };
        let sz2 = sz * sz;
        Self { sz, sx, sy_prime, sz2, identity: SiteOp::identity() }
    }
}

impl Default for SpinOps {
    fn default() -> Self {
        Self::new(SyConvention::Printed)
    }
}

/// Coefficients of `u(t) = c1 sin(w1 t) + c2 cos(w2 t)`; `w` in rad/µs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PulseSpec {
    pub c1: f64,
    pub c2: f64,
    pub w1: f64,
    pub w2: f64,
}

impl PulseSpec {
    pub const ZERO: Self = Self { c1: 0.0, c2: 0.0, w1: 0.0, w2: 0.0 };

    pub fn value(&self, t: f64) -> f64 {
        self.c1 * libm::sin(self.w1 * t) + self.c2 * libm::cos(self.w2 * t)
    }
}

/// Drive envelope `u(t)`, in rad/µs.
#[derive(Debug, Clone, PartialEq)]
pub enum Envelope {
    Harmonic(PulseSpec),
    /// `u(t) = Σ_k coeffs[k] t^k`.
    Polynomial(Vec<f64>),
}

impl Envelope {
    pub fn zero() -> Self {
        Self::Harmonic(PulseSpec::ZERO)
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Self::Harmonic(p) => p.value(t),
            Self::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &a| acc * t + a),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Harmonic(p) => p.c1 == 0.0 && p.c2 == 0.0,
            Self::Polynomial(c) => c.iter().all(|&a| a == 0.0),
        }
    }
}

/// Hermitian operator on sites `bond` and `bond + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BondTerm {
    pub bond: usize,
    pub matrix: PairOp,
}

/// Anything that can hand out its nearest-neighbour bond terms at time `t`.
///
/// Implementations must be re-entrant: the Simpson rule queries three
/// different times per step.
pub trait TimeDependentHamiltonian {
    fn n_sites(&self) -> usize;

    /// One term per bond, ordered by bond index, summing to `H(t)`.
    fn bond_terms_at(&self, t: f64) -> Vec<BondTerm>;
}

/// Physical parameters in laboratory units, as tabulated for NV chains.
#[derive(Debug, Clone, PartialEq)]
pub struct NvParameters {
    pub n_sites: usize,
    /// Zero-field splitting per site, GHz.
    pub d_zfs_ghz: Vec<f64>,
    pub omega0_ghz: f64,
    pub gamma_e_ghz_per_t: f64,
    pub bz_gauss: Vec<f64>,
    /// Coupling per bond, kHz.
    pub g_khz: Vec<f64>,
    pub zeta_rad: f64,
}

impl NvParameters {
    pub fn into_model(self, envelope: Envelope) -> Result<NvChainModel> {
        NvChainModel::new(
            self.d_zfs_ghz.iter().map(|d| d * units::PER_GHZ).collect(),
            self.omega0_ghz * units::PER_GHZ,
            self.gamma_e_ghz_per_t * units::PER_GHZ_PER_TESLA,
            self.bz_gauss,
            self.g_khz.iter().map(|g| g * units::PER_KHZ).collect(),
            self.zeta_rad,
            envelope,
        )
        .and_then(|m| {
            if m.n_sites() != self.n_sites {
                return Err(Error::Validation(format!(
                    "n_sites = {} but per-site arrays describe {} sites",
                    self.n_sites,
                    m.n_sites()
                )));
            }
            Ok(m)
        })
    }
}

pub mod presets {
    //! Parameter sets for the two-, three- and N-centre benchmarks.
    use super::NvParameters;
    use alloc::vec;

    const D_ZFS_GHZ: f64 = 2.87;
    const GAMMA_E_GHZ_PER_T: f64 = -28.025;

    /// Three centres with individually tuned fields.
    pub fn nv3() -> NvParameters {
        NvParameters {
            n_sites: 3,
            d_zfs_ghz: vec![D_ZFS_GHZ; 3],
            omega0_ghz: 2.797,
            gamma_e_ghz_per_t: GAMMA_E_GHZ_PER_T,
            bz_gauss: vec![42.82, 88.31, 82.88],
            g_khz: vec![53.0; 2],
            zeta_rad: 0.0,
        }
    }

    /// Uniform chain of `n` centres.
    pub fn nv_n(n: usize) -> NvParameters {
        NvParameters {
            n_sites: n,
            d_zfs_ghz: vec![D_ZFS_GHZ; n],
            omega0_ghz: 2.75,
            gamma_e_ghz_per_t: GAMMA_E_GHZ_PER_T,
            bz_gauss: vec![65.0; n],
            g_khz: vec![100.0; n.saturating_sub(1)],
            zeta_rad: 0.0,
        }
    }

    /// Pair of centres.
    pub fn nv2() -> NvParameters {
        NvParameters {
            n_sites: 2,
            d_zfs_ghz: vec![D_ZFS_GHZ; 2],
            omega0_ghz: 2.75,
            gamma_e_ghz_per_t: GAMMA_E_GHZ_PER_T,
            bz_gauss: vec![65.0, 20.086],
            g_khz: vec![100.0],
            zeta_rad: 0.0,
        }
    }
}

/// Chain of `N` spin-1 NV centres in the frame rotating with the drive.
///
/// All frequencies are stored in rad/µs and fields in gauss.
#[derive(Debug, Clone, PartialEq)]
pub struct NvChainModel {
    d_zfs: Vec<f64>,
    omega0: f64,
    /// rad/(µs·G)
    gamma_e: f64,
    bz: Vec<f64>,
    g: Vec<f64>,
    zeta: f64,
    envelope: Envelope,
    ops: SpinOps,
}

impl NvChainModel {
    pub fn new(
        d_zfs: Vec<f64>,
        omega0: f64,
        gamma_e: f64,
        bz: Vec<f64>,
        g: Vec<f64>,
        zeta: f64,
        envelope: Envelope,
    ) -> Result<Self> {
        let n = d_zfs.len();
        if n < 2 {
            return Err(Error::Validation(format!("a chain needs at least 2 sites, got {n}")));
        }
        if bz.len() != n {
            return Err(Error::Validation(format!("expected {n} field values, got {}", bz.len())));
        }
        if g.len() != n - 1 {
            return Err(Error::Validation(format!("expected {} couplings, got {}", n - 1, g.len())));
        }
        let scalars = [omega0, gamma_e, zeta];
        if d_zfs.iter().chain(&bz).chain(&g).chain(&scalars).any(|x| !x.is_finite()) {
            return Err(Error::Validation("model parameters must be finite".into()));
        }
        let finite_envelope = match &envelope {
            Envelope::Harmonic(p) => [p.c1, p.c2, p.w1, p.w2].iter().all(|x| x.is_finite()),
            Envelope::Polynomial(c) => c.iter().all(|x| x.is_finite()),
        };
        if !finite_envelope {
            return Err(Error::Validation("envelope coefficients must be finite".into()));
        }
        Ok(Self { d_zfs, omega0, gamma_e, bz, g, zeta, envelope, ops: SpinOps::default() })
    }

    pub fn with_envelope(&self, envelope: Envelope) -> Self {
        Self { envelope, ..self.clone() }
    }

    pub fn with_sy_convention(mut self, convention: SyConvention) -> Self {
        self.ops = SpinOps::new(convention);
        self
    }

    pub fn n_sites(&self) -> usize {
        self.d_zfs.len()
    }

    pub fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    pub fn ops(&self) -> &SpinOps {
        &self.ops
    }

    pub fn d_zfs(&self) -> &[f64] {
        &self.d_zfs
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn gamma_e(&self) -> f64 {
        self.gamma_e
    }

    pub fn bz(&self) -> &[f64] {
        &self.bz
    }

    pub fn couplings(&self) -> &[f64] {
        &self.g
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Drive envelope `u(t)`.
    pub fn drive(&self, t: f64) -> f64 {
        self.envelope.value(t)
    }

    /// `(D_j - ω₀) S_z² - γ_e B_j S_z`.
    pub fn single_site_term(&self, site: usize) -> SiteOp {
        self.ops.sz2 * real(self.d_zfs[site] - self.omega0) - self.ops.sz * real(self.gamma_e * self.bz[site])
    }

    /// `(cos ζ S_x + sin ζ S_y') / 2`, the per-site template scaled by `u(t)`.
    pub fn control_site_term(&self) -> SiteOp {
        (self.ops.sx * real(libm::cos(self.zeta)) + self.ops.sy_prime * real(libm::sin(self.zeta))) * real(0.5)
    }

    /// Number of bonds touching `site`.
    fn bond_count(&self, site: usize) -> f64 {
        if site == 0 || site + 1 == self.n_sites() {
            1.0
        } else {
            2.0
        }
    }
}

impl TimeDependentHamiltonian for NvChainModel {
    fn n_sites(&self) -> usize {
        self.d_zfs.len()
    }

    fn bond_terms_at(&self, t: f64) -> Vec<BondTerm> {
        let u = real(self.drive(t));
        let control = self.control_site_term();
        let id = &self.ops.identity;
        let local: Vec<SiteOp> = (0..self.n_sites())
            .map(|j| (self.single_site_term(j) + control * u) * real(1.0 / self.bond_count(j)))
            .collect();
        let zz = kron(&self.ops.sz, &self.ops.sz);
        self.g
            .iter()
            .enumerate()
            .map(|(j, &g)| BondTerm {
                bond: j,
                matrix: zz * real(g) + kron(&local[j], id) + kron(id, &local[j + 1]),
            })
            .collect()
    }
}

/// Rule turning `H(t)` on a step into the constant Hamiltonian handed to the
/// propagator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StepperKind {
    /// `H(t0)`.
    Riemann,
    /// `(H(t0) + 4 H(t0 + dt/2) + H(t0 + dt)) / 6`.
    Simpson,
}

impl StepperKind {
    pub const ALL: [StepperKind; 2] = [StepperKind::Riemann, StepperKind::Simpson];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Riemann => "riemann",
            Self::Simpson => "simpson",
        }
    }

    /// Hamiltonian evaluations per step.
    pub fn evaluations(self) -> usize {
        match self {
            Self::Riemann => 1,
            Self::Simpson => 3,
        }
    }

    /// The rule applied to a scalar function.
    pub fn average_scalar<F: Fn(f64) -> f64>(self, f: F, t0: f64, dt: f64) -> f64 {
        match self {
            Self::Riemann => f(t0),
            Self::Simpson => {
                let (a, m, b) = (f(t0), f(t0 + 0.5 * dt), f(t0 + dt));
                a + (4.0 * (m - a) + (b - a)) / 6.0
            }
        }
    }
}

impl core::fmt::Display for StepperKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for StepperKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "riemann" => Ok(Self::Riemann),
            "simpson" => Ok(Self::Simpson),
            other => Err(Error::Validation(format!("unknown stepper '{other}'"))),
        }
    }
}

/// Bond terms of the constant Hamiltonian used for the step `[t0, t0 + dt]`.
///
/// The Simpson combination is evaluated as `h0 + (4 (hm - h0) + (h1 - h0)) / 6`
/// so that a constant integrand comes back bit-for-bit unchanged.
pub fn average_bond_terms<H: TimeDependentHamiltonian + ?Sized>(
    h: &H,
    rule: StepperKind,
    t0: f64,
    dt: f64,
) -> Result<Vec<BondTerm>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Validation(format!("step must be positive and finite, got {dt}")));
    }
    match rule {
        StepperKind::Riemann => Ok(h.bond_terms_at(t0)),
        StepperKind::Simpson => {
            let start = h.bond_terms_at(t0);
            let mid = h.bond_terms_at(t0 + 0.5 * dt);
            let end = h.bond_terms_at(t0 + dt);
            let sixth = real(1.0 / 6.0);
            let four = real(4.0);
            Ok(start
                .into_iter()
                .zip(mid.iter().zip(&end))
                .map(|(a, (m, b))| {
                    debug_assert!(a.bond == m.bond && a.bond == b.bond);
                    let delta = ((m.matrix - a.matrix) * four + (b.matrix - a.matrix)) * sixth;
                    BondTerm { bond: a.bond, matrix: a.matrix + delta }
                })
                .collect())
        }
    }
}

/// Largest Hermiticity defect over a set of bond terms.
pub fn max_hermiticity_defect(terms: &[BondTerm]) -> f64 {
    terms.iter().map(|t| hermiticity_defect(&t.matrix)).fold(0.0, f64::max)
}
