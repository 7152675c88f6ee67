//! Dense state-vector reference dynamics and the max-entry error metric.
//!
//! The Hamiltonian here is assembled straight from the single-site,
//! interaction and drive terms of the chain model, never from its bond
//! decomposition, so it can serve as an independent check on the TEBD path.
//! Amplitude ordering matches [`MpsState::to_dense`](crate::MpsState::to_dense).

use alloc::format;
use alloc::vec::Vec;

use crate::linalg::{real, CMatrix, SiteOp, ZERO};
use crate::model::NvChainModel;
use crate::{Error, Result, C64};

/// Largest chain for which the full `3^N x 3^N` matrix is materialised.
pub const DENSE_MATRIX_CAP: usize = 7;
/// Largest chain the matrix-free integrators accept.
pub const STATE_VECTOR_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeTolerances {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Optional ceiling on the adaptive step, µs.
    pub max_step: Option<f64>,
}

impl Default for OdeTolerances {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-10, max_step: None }
    }
}

impl OdeTolerances {
    fn validate(&self) -> Result<()> {
        let ok = self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.max_step.is_none_or(|h| h > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid tolerances {self:?}")))
        }
    }
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::Capacity { sites: n, cap })
    } else {
        Ok(())
    }
}

/// `1 ⊗ … ⊗ op ⊗ … ⊗ 1` with `op` on `site`.
fn embed(op: &CMatrix, site: usize, span: usize, n: usize) -> CMatrix {
    let left = CMatrix::identity(3usize.pow(site as u32), 3usize.pow(site as u32));
    let right_sites = n - site - span;
    let right = CMatrix::identity(3usize.pow(right_sites as u32), 3usize.pow(right_sites as u32));
    left.kronecker(op).kronecker(&right)
}

fn site_matrix(op: &SiteOp) -> CMatrix {
    CMatrix::from_fn(3, 3, |r, c| op[(r, c)])
}

/// Full `H(t)` on the `3^N` space.
pub fn dense_hamiltonian(m: &NvChainModel, t: f64) -> Result<CMatrix> {
    let n = m.n_sites();
    check_cap(n, DENSE_MATRIX_CAP)?;
    let dim = 3usize.pow(n as u32);
    let ops = m.ops();
    let u = m.drive(t);
    let control = site_matrix(&m.control_site_term());
    let zz = site_matrix(&ops.sz).kronecker(&site_matrix(&ops.sz));
    let mut h = CMatrix::zeros(dim, dim);
    for j in 0..n {
        let local = site_matrix(&ops.sz2) * real(m.d_zfs()[j] - m.omega0())
            - site_matrix(&ops.sz) * real(m.gamma_e() * m.bz()[j]);
        h += embed(&local, j, 1, n);
        h += embed(&(&control * real(u)), j, 1, n);
    }
    for (j, &g) in m.couplings().iter().enumerate() {
        h += embed(&(&zz * real(g)), j, 2, n);
    }
    Ok(h)
}

/// Matrix-free `H(t)`: a cached diagonal drift plus `u(t)` times the sum of
/// single-site drive terms.
#[derive(Debug, Clone)]
pub struct ChainOperator {
    n_sites: usize,
    drift: Vec<f64>,
    control: SiteOp,
    model: NvChainModel,
}

impl ChainOperator {
    pub fn new(m: &NvChainModel) -> Result<Self> {
        let n = m.n_sites();
        check_cap(n, STATE_VECTOR_CAP)?;
        let dim = 3usize.pow(n as u32);
        // m = +1, 0, -1 for digit 0, 1, 2
        let mut drift = alloc::vec![0.0; dim];
        let mut digits = alloc::vec![0usize; n];
        for value in drift.iter_mut() {
            let spin = |s: usize| 1.0 - s as f64;
            let mut e = 0.0;
            for j in 0..n {
                let mj = spin(digits[j]);
                e += (m.d_zfs()[j] - m.omega0()) * mj * mj - m.gamma_e() * m.bz()[j] * mj;
            }
            for (j, &g) in m.couplings().iter().enumerate() {
                e += g * spin(digits[j]) * spin(digits[j + 1]);
            }
            *value = e;
            for d in digits.iter_mut().rev() {
                *d += 1;
                if *d < 3 {
                    break;
                }
                *d = 0;
            }
        }
        Ok(Self { n_sites: n, drift, control: m.control_site_term(), model: m.clone() })
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    /// `out = H(t) psi`.
    pub fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        for ((o, &p), &d) in out.iter_mut().zip(psi).zip(&self.drift) {
            *o = p * d;
        }
        let u = self.model.drive(t);
        if u == 0.0 {
            return;
        }
        let c = self.control * real(u);
        let dim = self.dim();
        for site in 0..self.n_sites {
            let stride = 3usize.pow((self.n_sites - 1 - site) as u32);
            let block = 3 * stride;
            for base in (0..dim).step_by(block) {
                for r in 0..stride {
                    let i0 = base + r;
                    let x = [psi[i0], psi[i0 + stride], psi[i0 + 2 * stride]];
                    for s in 0..3 {
                        out[i0 + s * stride] += c[(s, 0)] * x[0] + c[(s, 1)] * x[1] + c[(s, 2)] * x[2];
                    }
                }
            }
        }
    }

    /// `H(t)` as a dense matrix, assembled column by column from [`apply`](Self::apply).
    pub fn to_matrix(&self, t: f64) -> Result<CMatrix> {
        check_cap(self.n_sites, DENSE_MATRIX_CAP)?;
        let dim = self.dim();
        let mut h = CMatrix::zeros(dim, dim);
        let mut e = alloc::vec![ZERO; dim];
        let mut col = alloc::vec![ZERO; dim];
        for k in 0..dim {
            e[k] = C64::new(1.0, 0.0);
            self.apply(t, &e, &mut col);
            for (r, v) in col.iter().enumerate() {
                h[(r, k)] = *v;
            }
            e[k] = ZERO;
        }
        Ok(h)
    }

    /// `out = -i H(t) psi`.
    fn rhs(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        self.apply(t, psi, out);
        for z in out.iter_mut() {
            *z = C64::new(z.im, -z.re);
        }
    }
}

fn check_initial(op: &ChainOperator, psi0: &[C64]) -> Result<()> {
    if psi0.len() != op.dim() {
        return Err(Error::Validation(format!(
            "state has {} amplitudes, model needs {}",
            psi0.len(),
            op.dim()
        )));
    }
    let norm2: f64 = psi0.iter().map(|z| z.norm_sqr()).sum();
    if !((norm2 - 1.0).abs() <= 1e-12) {
        return Err(Error::Validation(format!("initial state has norm² {norm2}")));
    }
    Ok(())
}

// DOP853 tableau (Hairer, Nørsett & Wanner), 12 stages plus the FSAL stage.
const C: [f64; 12] = [0.0, 0.05260015195876773, 0.0789002279381516, 0.1183503419072274, 0.2816496580927726, 0.3333333333333333, 0.25, 0.3076923076923077, 0.6512820512820513, 0.6, 0.8571428571428571, 1.0];
const A: [[f64; 12]; 13] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.05260015195876773, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0197250569845379, 0.0591751709536137, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.02958758547680685, 0.0, 0.08876275643042054, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2413651341592667, 0.0, -0.8845494793282861, 0.924834003261792, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.037037037037037035, 0.0, 0.0, 0.17082860872947386, 0.12546768756682242, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.037109375, 0.0, 0.0, 0.17025221101954405, 0.06021653898045596, -0.017578125, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.03709200011850479, 0.0, 0.0, 0.17038392571223998, 0.10726203044637328, -0.015319437748624402, 0.008273789163814023, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.6241109587160757, 0.0, 0.0, -3.3608926294469414, -0.868219346841726, 27.59209969944671, 20.154067550477894, -43.48988418106996, 0.0, 0.0, 0.0, 0.0],
    [0.47766253643826434, 0.0, 0.0, -2.4881146199716677, -0.590290826836843, 21.230051448181193, 15.279233632882423, -33.28821096898486, -0.020331201708508627, 0.0, 0.0, 0.0],
    [-0.9371424300859873, 0.0, 0.0, 5.186372428844064, 1.0914373489967295, -8.149787010746927, -18.52006565999696, 22.739487099350505, 2.4936055526796523, -3.0467644718982196, 0.0, 0.0],
    [2.273310147516538, 0.0, 0.0, -10.53449546673725, -2.0008720582248625, -17.9589318631188, 27.94888452941996, -2.8589982771350235, -8.87285693353063, 12.360567175794303, 0.6433927460157636, 0.0],
    [0.054293734116568765, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, 0.3111643669578199, -0.1521609496625161, 0.20136540080403034, 0.04471061572777259],
];
/// Fifth-order error estimator weights.
const E5: [f64; 12] = [0.01312004499419488, 0.0, 0.0, 0.0, 0.0, -1.2251564463762044, -0.4957589496572502, 1.6643771824549864, -0.35032884874997366, 0.3341791187130175, 0.08192320648511571, -0.022355307863886294];
/// Third-order error estimator weights.
const E3: [f64; 12] = [-0.18980075407240762, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, -0.4226823213237919, -0.1521609496625161, 0.20136540080403034, 0.02265179219836082];

/// Adaptive DOP853 integrator of `dψ/dt = -i H(t) ψ`.
struct Dop853<'a> {
    op: &'a ChainOperator,
    tol: OdeTolerances,
    /// Stage derivatives; `k[12]` holds `f(t + h, y_new)`.
    k: [Vec<C64>; 13],
    stage: Vec<C64>,
    y_new: Vec<C64>,
    h: f64,
    k0_current: bool,
}

impl<'a> Dop853<'a> {
    fn new(op: &'a ChainOperator, tol: OdeTolerances) -> Self {
        let dim = op.dim();
        Self {
            op,
            tol,
            k: core::array::from_fn(|_| alloc::vec![ZERO; dim]),
            stage: alloc::vec![ZERO; dim],
            y_new: alloc::vec![ZERO; dim],
            h: 0.0,
            k0_current: false,
        }
    }

    fn scale(&self, a: &C64, b: &C64) -> f64 {
        self.tol.abs_tol + self.tol.rel_tol * a.norm().max(b.norm())
    }

    fn initial_step(&mut self, t: f64, y: &[C64], span: f64) -> f64 {
        self.op.rhs(t, y, &mut self.k[0]);
        self.k0_current = true;
        let rms = |v: &[C64]| {
            let s: f64 = v.iter().zip(y).map(|(x, yi)| (x.norm() / self.scale(yi, yi)).powi(2)).sum();
            libm::sqrt(s / v.len() as f64)
        };
        let d0 = rms(y);
        let d1 = rms(&self.k[0]);
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h = h.min(span);
        self.tol.max_step.map_or(h, |m| h.min(m))
    }

    /// Hairer's combined fifth/third-order error norm for the step just taken.
    fn error_norm(&self, y: &[C64], h: f64) -> f64 {
        let (mut e5, mut e3) = (0.0, 0.0);
        for i in 0..y.len() {
            let (mut a5, mut a3) = (ZERO, ZERO);
            for j in 0..12 {
                a5 += self.k[j][i] * E5[j];
                a3 += self.k[j][i] * E3[j];
            }
            let sc = self.scale(&y[i], &self.y_new[i]);
            e5 += (a5.norm() / sc).powi(2);
            e3 += (a3.norm() / sc).powi(2);
        }
        if e5 == 0.0 && e3 == 0.0 {
            return 0.0;
        }
        h.abs() * e5 / libm::sqrt((e5 + 0.01 * e3) * y.len() as f64)
    }

    /// Integrates `y` in place from `t` to `t_end`.
    fn advance(&mut self, t: &mut f64, y: &mut [C64], t_end: f64) -> Result<()> {
        const SAFETY: f64 = 0.9;
        const MIN_FACTOR: f64 = 0.2;
        const MAX_FACTOR: f64 = 6.0;
        const MAX_STEPS: usize = 50_000_000;

        if self.h == 0.0 {
            self.h = self.initial_step(*t, y, t_end - *t);
        }
        let mut steps = 0usize;
        let mut rejected_last = false;
        while *t < t_end {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::Integration { time: *t, reason: "too many steps".into() });
            }
            let remaining = t_end - *t;
            let mut h = self.h.min(remaining);
            if let Some(m) = self.tol.max_step {
                h = h.min(m);
            }
            if h <= 1e-14 * t.abs().max(1.0) && h < remaining {
                return Err(Error::Integration { time: *t, reason: format!("step size underflow (h = {h:e})") });
            }
            if !self.k0_current {
                self.op.rhs(*t, y, &mut self.k[0]);
                self.k0_current = true;
            }
            for s in 1..13 {
                let target = if s == 12 { &mut self.y_new } else { &mut self.stage };
                for i in 0..y.len() {
                    let mut acc = ZERO;
                    for (j, &a) in A[s][..s].iter().enumerate() {
                        if a != 0.0 {
                            acc += self.k[j][i] * a;
                        }
                    }
                    target[i] = y[i] + acc * h;
                }
                if s < 12 {
                    let (_, tail) = self.k.split_at_mut(s);
                    self.op.rhs(*t + C[s] * h, &self.stage, &mut tail[0]);
                }
            }
            let err = self.error_norm(y, h);
            if !err.is_finite() {
                return Err(Error::Integration { time: *t, reason: "non-finite error estimate".into() });
            }
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * libm::pow(err, -1.0 / 8.0)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if err <= 1.0 {
                let t_new = if h == remaining { t_end } else { *t + h };
                y.copy_from_slice(&self.y_new);
                self.op.rhs(t_new, y, &mut self.k[12]);
                self.k.swap(0, 12);
                *t = t_new;
                let grow = if rejected_last { factor.min(1.0) } else { factor };
                // a step clipped to hit t_end says nothing about the natural step
                if h >= self.h {
                    self.h = h * grow;
                }
                rejected_last = false;
            } else {
                self.h = h * factor;
                rejected_last = true;
            }
        }
        Ok(())
    }
}

/// State at `t_total` starting from `psi0` at `t = 0`.
pub fn sesolve(m: &NvChainModel, psi0: &[C64], t_total: f64, tol: OdeTolerances) -> Result<Vec<C64>> {
    let mut out = sesolve_at(m, psi0, &[t_total], tol)?;
    Ok(out.pop().unwrap_or_default())
}

/// States at each of the non-decreasing `times`, starting from `psi0` at `t = 0`.
pub fn sesolve_at(m: &NvChainModel, psi0: &[C64], times: &[f64], tol: OdeTolerances) -> Result<Vec<Vec<C64>>> {
    tol.validate()?;
    let op = ChainOperator::new(m)?;
    check_initial(&op, psi0)?;
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Validation("output times must be finite, non-negative and sorted".into()));
    }
    let mut solver = Dop853::new(&op, tol);
    let mut y = psi0.to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        if target > t {
            solver.advance(&mut t, &mut y, target)?;
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Classical fixed-step RK4; the step is `t_total / ceil(t_total / dt)`.
pub fn rk4_fixed(m: &NvChainModel, psi0: &[C64], t_total: f64, dt: f64) -> Result<Vec<C64>> {
    if !(dt > 0.0) || !(t_total > 0.0) {
        return Err(Error::Validation(format!("need positive dt and t_total, got {dt}, {t_total}")));
    }
    let op = ChainOperator::new(m)?;
    check_initial(&op, psi0)?;
    let n = libm::ceil(t_total / dt) as usize;
    let h = t_total / n as f64;
    let dim = op.dim();
    let mut y = psi0.to_vec();
    let mut k = [alloc::vec![ZERO; dim], alloc::vec![ZERO; dim], alloc::vec![ZERO; dim], alloc::vec![ZERO; dim]];
    let mut tmp = alloc::vec![ZERO; dim];
    for step in 0..n {
        let t = step as f64 * h;
        op.rhs(t, &y, &mut k[0]);
        for (s, (frac, coef)) in [(0.5, 0.5), (0.5, 0.5), (1.0, 1.0)].into_iter().enumerate() {
            for i in 0..dim {
                tmp[i] = y[i] + k[s][i] * (coef * h);
            }
            let (_, tail) = k.split_at_mut(s + 1);
            op.rhs(t + frac * h, &tmp, &mut tail[0]);
        }
        for i in 0..dim {
            y[i] += (k[0][i] + (k[1][i] + k[2][i]) * 2.0 + k[3][i]) * (h / 6.0);
        }
    }
    Ok(y)
}

/// `max_i |a_i - b_i|`, with no global-phase alignment.
pub fn holder_inf_error(a: &[C64], b: &[C64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!("vectors of length {} and {}", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
}
