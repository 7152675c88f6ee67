//! Second-order TEBD for time-dependent Hamiltonians.
//!
//! Each step replaces `H(t)` on `[t0, t0 + dt]` by a constant Hamiltonian
//! chosen by a [`StepperKind`] and applies the symmetric splitting
//! `A(dt/2) B(dt) A(dt/2)`, where layer `A` holds bonds 0, 2, 4, ... and
//! layer `B` holds bonds 1, 3, 5, ... (zero-based). Half-gates of neighbouring
//! steps are never merged, since the averaged Hamiltonian changes from step to
//! step.

use alloc::format;
use alloc::vec::Vec;

use crate::linalg::{hermiticity_defect, hermitian_propagator, max_abs, PairOp};
use crate::model::{average_bond_terms, BondTerm, TimeDependentHamiltonian};
use crate::mps::{Absorb, MpsState};
use crate::tensor::SvdTruncation;
use crate::{Error, Result};

pub use crate::model::StepperKind;

/// Tolerated Hermiticity defect, relative to the largest entry (or 1).
const HERMITIAN_TOL: f64 = 1e-10;

/// `exp(-i h tau)` for a bond term.
pub fn exponentiate_bond(h: &BondTerm, tau: f64) -> Result<PairOp> {
    let scale = max_abs(h.matrix.iter()).max(1.0);
    let defect = hermiticity_defect(&h.matrix);
    if !(defect <= HERMITIAN_TOL * scale) {
        return Err(Error::Validation(format!(
            "bond {} term is not Hermitian (defect {defect:e})",
            h.bond
        )));
    }
    if !tau.is_finite() {
        return Err(Error::Validation(format!("non-finite exponent time {tau}")));
    }
    Ok(hermitian_propagator(&h.matrix, tau))
}

/// Gates for one symmetric second-order step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrotterGates {
    /// `exp(-i h_j dt/2)` for even zero-based bonds, applied first and last.
    pub outer_half: Vec<(usize, PairOp)>,
    /// `exp(-i h_j dt)` for odd zero-based bonds, applied in the middle.
    pub inner_full: Vec<(usize, PairOp)>,
    pub dt: f64,
}

pub fn build_gates(terms: &[BondTerm], dt: f64) -> Result<TrotterGates> {
    if terms.is_empty() {
        return Err(Error::Validation("no bond terms to exponentiate".into()));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Validation(format!("step must be positive and finite, got {dt}")));
    }
    let mut outer_half = Vec::with_capacity(terms.len().div_ceil(2));
    let mut inner_full = Vec::with_capacity(terms.len() / 2);
    for h in terms {
        if h.bond % 2 == 0 {
            outer_half.push((h.bond, exponentiate_bond(h, 0.5 * dt)?));
        } else {
            inner_full.push((h.bond, exponentiate_bond(h, dt)?));
        }
    }
    Ok(TrotterGates { outer_half, inner_full, dt })
}

impl TrotterGates {
    /// Applies `outer · inner · outer` to `psi`.
    pub fn apply(&self, psi: &mut MpsState, trunc: SvdTruncation) -> Result<()> {
        apply_layer(psi, &self.outer_half, trunc)?;
        apply_layer(psi, &self.inner_full, trunc)?;
        apply_layer(psi, &self.outer_half, trunc)
    }

    pub fn max_unitarity_defect(&self) -> f64 {
        self.outer_half
            .iter()
            .chain(&self.inner_full)
            .map(|(_, g)| crate::linalg::unitarity_defect(g))
            .fold(0.0, f64::max)
    }
}

/// Gates of one layer act on disjoint bonds, so their order is free; sweep
/// away from whichever end the canonical centre is nearer to.
fn apply_layer(psi: &mut MpsState, layer: &[(usize, PairOp)], trunc: SvdTruncation) -> Result<()> {
    let n = psi.n_sites();
    let left_to_right = psi.center().is_none_or(|c| 2 * c < n);
    if left_to_right {
        for (bond, gate) in layer {
            psi.apply_two_site_gate(gate, *bond, trunc, Absorb::Right)?;
        }
    } else {
        for (bond, gate) in layer.iter().rev() {
            psi.apply_two_site_gate(gate, *bond, trunc, Absorb::Left)?;
        }
    }
    Ok(())
}

fn check_sites<H: TimeDependentHamiltonian + ?Sized>(psi: &MpsState, h: &H) -> Result<()> {
    if psi.n_sites() != h.n_sites() {
        return Err(Error::Validation(format!(
            "state has {} sites, Hamiltonian has {}",
            psi.n_sites(),
            h.n_sites()
        )));
    }
    if h.n_sites() < 2 {
        return Err(Error::Validation("TEBD needs at least two sites".into()));
    }
    Ok(())
}

/// Advances `psi` across `[t0, t0 + dt]`.
pub fn step<H: TimeDependentHamiltonian + ?Sized>(
    psi: &mut MpsState,
    h: &H,
    kind: StepperKind,
    t0: f64,
    dt: f64,
    trunc: SvdTruncation,
) -> Result<()> {
    check_sites(psi, h)?;
    let terms = average_bond_terms(h, kind, t0, dt)?;
    build_gates(&terms, dt)?.apply(psi, trunc)
}

/// Summary of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveReport {
    pub n_steps: usize,
    pub dt: f64,
    /// Summed discarded weight of this trajectory's splits.
    pub truncation_weight: f64,
    pub max_bond_dim: usize,
}

/// Evolves `psi0` over `[0, t_total]` with `n_steps` uniform steps.
pub fn evolve<H: TimeDependentHamiltonian + ?Sized>(
    psi0: &MpsState,
    h: &H,
    kind: StepperKind,
    t_total: f64,
    n_steps: usize,
    trunc: SvdTruncation,
) -> Result<(MpsState, EvolveReport)> {
    evolve_observed(psi0, h, kind, t_total, n_steps, trunc, |_, _, _| Ok(()))
}

/// Like [`evolve`], calling `observe(k, t, state)` after every step `k`
/// (one-based), where `t` is the end time of that step.
pub fn evolve_observed<H, F>(
    psi0: &MpsState,
    h: &H,
    kind: StepperKind,
    t_total: f64,
    n_steps: usize,
    trunc: SvdTruncation,
    observe: F,
) -> Result<(MpsState, EvolveReport)>
where
    H: TimeDependentHamiltonian + ?Sized,
    F: FnMut(usize, f64, &MpsState) -> Result<()>,
{
    if n_steps == 0 {
        return Err(Error::Validation("n_steps must be at least 1".into()));
    }
    if !(t_total > 0.0) || !t_total.is_finite() {
        return Err(Error::Validation(format!("total time must be positive, got {t_total}")));
    }
    let dt = t_total / n_steps as f64;
    evolve_from(psi0, h, kind, 0.0, dt, n_steps, trunc, observe)
}

/// Takes `n_steps` steps of size `dt`, step `k` spanning
/// `[t_start + k dt, t_start + (k + 1) dt]`.
#[allow(clippy::too_many_arguments)]
pub fn evolve_from<H, F>(
    psi0: &MpsState,
    h: &H,
    kind: StepperKind,
    t_start: f64,
    dt: f64,
    n_steps: usize,
    trunc: SvdTruncation,
    mut observe: F,
) -> Result<(MpsState, EvolveReport)>
where
    H: TimeDependentHamiltonian + ?Sized,
    F: FnMut(usize, f64, &MpsState) -> Result<()>,
{
    check_sites(psi0, h)?;
    let mut psi = psi0.clone();
    let start_weight = psi.total_discarded_weight();
    let mut max_bond_dim = psi.max_bond_dim();
    for k in 0..n_steps {
        let t0 = t_start + k as f64 * dt;
        step(&mut psi, h, kind, t0, dt, trunc)?;
        max_bond_dim = max_bond_dim.max(psi.max_bond_dim());
        observe(k + 1, t_start + (k + 1) as f64 * dt, &psi)?;
    }
    let report = EvolveReport {
        n_steps,
        dt,
        truncation_weight: psi.total_discarded_weight() - start_weight,
        max_bond_dim,
    };
    Ok((psi, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, real, SiteOp, ONE, ZERO};
    use crate::model::{presets, Envelope, NvChainModel, PulseSpec};
    use crate::C64;
    use core::f64::consts::PI;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const MID: [C64; 3] = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)];

    /// Independent oracle: Taylor series with scaling and squaring.
    fn expm_taylor(a: &PairOp) -> PairOp {
        let norm = max_abs(a.iter()) * 9.0;
        let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
        let scaled = a * real(0.5f64.powi(squarings as i32));
        let mut term = PairOp::identity();
        let mut sum = PairOp::identity();
        for k in 1..30 {
            term = term * scaled * real(1.0 / k as f64);
            sum += term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }

    fn random_hermitian(rng: &mut ChaCha8Rng) -> PairOp {
        let h = PairOp::from_fn(|_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        (h + h.adjoint()) * real(0.5)
    }

    fn zero_model(n: usize) -> NvChainModel {
        NvChainModel::new(alloc::vec![0.0; n], 0.0, 0.0, alloc::vec![0.0; n], alloc::vec![0.0; n - 1], 0.0, Envelope::zero())
            .unwrap()
    }

    fn max_diff(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    /// Sum of embedded bond terms as a dense matrix.
    fn embedded(terms: &[BondTerm], n: usize) -> crate::linalg::CMatrix {
        let dim = 3usize.pow(n as u32);
        let mut out = crate::linalg::CMatrix::zeros(dim, dim);
        for t in terms {
            let left = 3usize.pow(t.bond as u32);
            let right = 3usize.pow((n - t.bond - 2) as u32);
            for a in 0..left {
                for r in 0..right {
                    for p in 0..9 {
                        for q in 0..9 {
                            out[((a * 9 + p) * right + r, (a * 9 + q) * right + r)] += t.matrix[(p, q)];
                        }
                    }
                }
            }
        }
        out
    }

    fn dense_expm_apply(h: &crate::linalg::CMatrix, tau: f64, v: &[C64]) -> Vec<C64> {
        let eig = nalgebra::SymmetricEigen::new(h.clone());
        let vecs = &eig.eigenvectors;
        let x = crate::linalg::CMatrix::from_column_slice(v.len(), 1, v);
        let mut coeffs = vecs.adjoint() * x;
        for (k, e) in eig.eigenvalues.iter().enumerate() {
            coeffs[k] *= C64::new((-e * tau).cos(), (-e * tau).sin());
        }
        (vecs * coeffs).iter().copied().collect()
    }

    #[test]
    fn zero_term_exponentiates_to_identity() {
        let g = exponentiate_bond(&BondTerm { bond: 0, matrix: PairOp::zeros() }, 0.3).unwrap();
        assert!(max_abs((g - PairOp::identity()).iter()) <= 1e-15);
    }

    #[test]
    fn periodic_phases_give_identity() {
        let sz = SiteOp::from_diagonal(&nalgebra::Vector3::new(ONE, ZERO, -ONE));
        let h = kron(&sz, &SiteOp::identity()) * real(2.0 * PI);
        let g = exponentiate_bond(&BondTerm { bond: 0, matrix: h }, 1.0).unwrap();
        assert!(max_abs((g - PairOp::identity()).iter()) <= 1e-12);
    }

    #[test]
    fn exponential_matches_taylor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let h = random_hermitian(&mut rng);
            let g = exponentiate_bond(&BondTerm { bond: 0, matrix: h }, 0.01).unwrap();
            let oracle = expm_taylor(&(h * C64::new(0.0, -0.01)));
            assert!(max_abs((g - oracle).iter()) <= 1e-11);
            assert!(crate::linalg::unitarity_defect(&g) <= 1e-12);
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut h = PairOp::zeros();
        h[(0, 1)] = ONE;
        assert!(matches!(exponentiate_bond(&BondTerm { bond: 0, matrix: h }, 0.1), Err(Error::Validation(_))));
    }

    #[test]
    fn gate_layout() {
        assert!(build_gates(&[], 0.1).is_err());
        let m = zero_model(5);
        let gates = build_gates(&m.bond_terms_at(0.0), 0.1).unwrap();
        assert_eq!(gates.outer_half.iter().map(|g| g.0).collect::<Vec<_>>(), alloc::vec![0, 2]);
        assert_eq!(gates.inner_full.iter().map(|g| g.0).collect::<Vec<_>>(), alloc::vec![1, 3]);
        for (_, g) in gates.outer_half.iter().chain(&gates.inner_full) {
            assert_eq!(*g, PairOp::identity());
        }
        assert!(build_gates(&m.bond_terms_at(0.0), 0.0).is_err());
    }

    #[test]
    fn single_bond_step_is_exact() {
        let m = presets::nv2().into_model(Envelope::zero()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_hermitian(&mut rng) * real(50.0);
        let term = BondTerm { bond: 0, matrix: h };
        let gates = build_gates(core::slice::from_ref(&term), 0.02).unwrap();
        let mut psi = MpsState::uniform(2, MID).unwrap();
        let start = psi.to_dense().unwrap();
        gates.apply(&mut psi, SvdTruncation::unbounded()).unwrap();
        let expected = dense_expm_apply(&embedded(&[term], 2), 0.02, &start);
        assert!(max_diff(&psi.to_dense().unwrap(), &expected) <= 1e-12);
        assert_eq!(m.n_sites(), 2);
    }

    #[test]
    fn splitting_error_is_third_order() {
        // Constant random nearest-neighbour Hamiltonian on three sites.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let terms: Vec<BondTerm> = (0..2).map(|j| BondTerm { bond: j, matrix: random_hermitian(&mut rng) }).collect();
        let dense_h = embedded(&terms, 3);
        let kets = [MID, [C64::new(0.6, 0.0), ZERO, C64::new(0.0, 0.8)], MID];
        let psi0 = MpsState::from_product_state(&kets).unwrap();
        let start = psi0.to_dense().unwrap();
        let error = |dt: f64| {
            let mut psi = psi0.clone();
            build_gates(&terms, dt).unwrap().apply(&mut psi, SvdTruncation::unbounded()).unwrap();
            max_diff(&psi.to_dense().unwrap(), &dense_expm_apply(&dense_h, dt, &start))
        };
        let (e1, e2, e3) = (error(0.04), error(0.02), error(0.01));
        let r1 = e1 / e2;
        let r2 = e2 / e3;
        assert!((6.5..9.5).contains(&r1), "ratio {r1}");
        assert!((6.5..9.5).contains(&r2), "ratio {r2}");
    }

    #[test]
    fn zero_hamiltonian_leaves_state() {
        let m = zero_model(4);
        let psi0 = MpsState::uniform(4, MID).unwrap();
        for kind in StepperKind::ALL {
            let mut psi = psi0.clone();
            step(&mut psi, &m, kind, 0.0, 1e-3, SvdTruncation::unbounded()).unwrap();
            assert!(max_diff(&psi.to_dense().unwrap(), &psi0.to_dense().unwrap()) <= 1e-12);
            let (out, report) = evolve(&psi0, &m, kind, 0.3, 17, SvdTruncation::unbounded()).unwrap();
            assert!(max_diff(&out.to_dense().unwrap(), &psi0.to_dense().unwrap()) <= 1e-12);
            assert_eq!(report.truncation_weight, 0.0);
        }
    }

    #[test]
    fn constant_drift_steppers_agree_exactly() {
        let m = presets::nv3().into_model(Envelope::zero()).unwrap();
        let kets = [MID, [C64::new(0.6, 0.0), C64::new(0.0, 0.8), ZERO], MID];
        let psi0 = MpsState::from_product_state(&kets).unwrap();
        let mut a = psi0.clone();
        let mut b = psi0.clone();
        step(&mut a, &m, StepperKind::Riemann, 0.05, 1e-3, SvdTruncation::unbounded()).unwrap();
        step(&mut b, &m, StepperKind::Simpson, 0.05, 1e-3, SvdTruncation::unbounded()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn one_step_evolve_equals_step() {
        let m = presets::nv2().into_model(Envelope::Harmonic(PulseSpec { c1: 3.0, c2: 2.0, w1: 20.0, w2: 11.0 })).unwrap();
        let psi0 = MpsState::uniform(2, MID).unwrap();
        for kind in StepperKind::ALL {
            let mut stepped = psi0.clone();
            step(&mut stepped, &m, kind, 0.0, 0.01, SvdTruncation::unbounded()).unwrap();
            let (evolved, report) = evolve(&psi0, &m, kind, 0.01, 1, SvdTruncation::unbounded()).unwrap();
            assert_eq!(stepped, evolved);
            assert_eq!(report.n_steps, 1);
        }
    }

    #[test]
    fn evolve_validates_inputs() {
        let m = zero_model(3);
        let psi = MpsState::uniform(3, MID).unwrap();
        assert!(evolve(&psi, &m, StepperKind::Riemann, 0.3, 0, SvdTruncation::unbounded()).is_err());
        assert!(evolve(&psi, &m, StepperKind::Riemann, 0.0, 10, SvdTruncation::unbounded()).is_err());
        let short = MpsState::uniform(2, MID).unwrap();
        assert!(evolve(&short, &m, StepperKind::Riemann, 0.3, 10, SvdTruncation::unbounded()).is_err());
    }

    #[test]
    fn observer_sees_every_step() {
        let m = zero_model(3);
        let psi = MpsState::uniform(3, MID).unwrap();
        let mut times = Vec::new();
        evolve_observed(&psi, &m, StepperKind::Simpson, 0.3, 3, SvdTruncation::unbounded(), |k, t, _| {
            times.push((k, t));
            Ok(())
        })
        .unwrap();
        assert_eq!(times.len(), 3);
        assert_eq!(times[2].0, 3);
        assert!((times[2].1 - 0.3).abs() < 1e-15);
    }
}
