//! Open-boundary matrix product states for spin-1 chains.
//!
//! Site tensors carry the index order `(left bond, physical, right bond)` with
//! physical dimension 3 and unit boundary bonds. Densification is site-major:
//! site 0 is the most significant base-3 digit of the amplitude index.

use alloc::format;
use alloc::vec::Vec;

use crate::linalg::{PairOp, CMatrix, ONE, ZERO};
use crate::tensor::{svd_truncate, DenseTensor, SvdTruncation};
use crate::{Error, Result, C64};

pub const PHYS_DIM: usize = 3;

/// Largest chain that [`MpsState::to_dense`] will expand by default.
pub const DEFAULT_DENSE_CAP: usize = 12;

/// Which side of a split bond receives the singular values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Absorb {
    /// Into the right tensor; the canonical centre ends on `left + 1`.
    Right,
    /// Into the left tensor; the canonical centre ends on `left`.
    Left,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpsState {
    tensors: Vec<DenseTensor>,
    center: Option<usize>,
    discarded_weight: f64,
}

impl MpsState {
    /// Product state from normalised single-site kets (`m = +1, 0, -1`).
    pub fn from_product_state(kets: &[[C64; PHYS_DIM]]) -> Result<Self> {
        if kets.is_empty() {
            return Err(Error::Validation("a state needs at least one site".into()));
        }
        let tensors = kets
            .iter()
            .enumerate()
            .map(|(j, ket)| {
                let norm2: f64 = ket.iter().map(|z| z.norm_sqr()).sum();
                if !((norm2 - 1.0).abs() <= 1e-12) {
                    return Err(Error::Validation(format!("ket at site {j} has norm² {norm2}")));
                }
                DenseTensor::new(alloc::vec![1, PHYS_DIM, 1], ket.to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        // Unit-norm rank-1 tensors are trivially canonical about site 0.
        Ok(Self { tensors, center: Some(0), discarded_weight: 0.0 })
    }

    /// Every site in the same local ket.
    pub fn uniform(n_sites: usize, ket: [C64; PHYS_DIM]) -> Result<Self> {
        Self::from_product_state(&alloc::vec![ket; n_sites])
    }

    /// Wraps arbitrary site tensors; no canonical form is assumed.
    pub fn from_tensors(tensors: Vec<DenseTensor>) -> Result<Self> {
        let n = tensors.len();
        if n == 0 {
            return Err(Error::Validation("a state needs at least one site".into()));
        }
        for (j, t) in tensors.iter().enumerate() {
            let s = t.shape();
            if s.len() != 3 || s[1] != PHYS_DIM {
                return Err(Error::Shape(format!("site {j} has shape {s:?}, expected [l, 3, r]")));
            }
            if j == 0 && s[0] != 1 {
                return Err(Error::Shape("left boundary bond must have extent 1".into()));
            }
            if j + 1 == n && s[2] != 1 {
                return Err(Error::Shape("right boundary bond must have extent 1".into()));
            }
            if j + 1 < n && s[2] != tensors[j + 1].shape()[0] {
                return Err(Error::Shape(format!("bond {j} extents disagree")));
            }
        }
        Ok(Self { tensors, center: None, discarded_weight: 0.0 })
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[DenseTensor] {
        &self.tensors
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    /// Sum of the relative discarded weights of every truncating split so far.
    ///
    /// A diagnostic, not a rigorous error bound.
    pub fn total_discarded_weight(&self) -> f64 {
        self.discarded_weight
    }

    /// Extents of the `N - 1` internal bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.n_sites() - 1].iter().map(|t| t.shape()[2]).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Full state vector, refusing chains longer than [`DEFAULT_DENSE_CAP`].
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        self.to_dense_capped(DEFAULT_DENSE_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<Vec<C64>> {
        if self.n_sites() > cap {
            return Err(Error::Capacity { sites: self.n_sites(), cap });
        }
        // acc is (3^k) x r, row-major
        let mut acc = alloc::vec![ONE];
        let mut rows = 1usize;
        for t in &self.tensors {
            let (l, r) = (t.shape()[0], t.shape()[2]);
            acc = crate::linalg::matmul(rows, l, PHYS_DIM * r, &acc, t.data());
            rows *= PHYS_DIM;
        }
        Ok(acc)
    }

    pub fn norm_squared(&self) -> f64 {
        overlap(self, self).map(|z| z.re).unwrap_or(f64::NAN)
    }

    /// Brings the state into mixed canonical form about `center`.
    pub fn canonicalize(&mut self, center: usize) -> Result<()> {
        let n = self.n_sites();
        if center >= n {
            return Err(Error::Validation(format!("site {center} out of range for {n} sites")));
        }
        match self.center {
            Some(c) if c <= center => (c..center).try_for_each(|k| self.shift_right(k))?,
            Some(c) => (center + 1..=c).rev().try_for_each(|k| self.shift_left(k))?,
            None => {
                (0..center).try_for_each(|k| self.shift_right(k))?;
                (center + 1..n).rev().try_for_each(|k| self.shift_left(k))?;
            }
        }
        self.center = Some(center);
        Ok(())
    }

    /// Makes site `k` left-orthonormal with a QR split, pushing `R` into `k + 1`.
    fn shift_right(&mut self, k: usize) -> Result<()> {
        let t = &self.tensors[k];
        let (l, r) = (t.shape()[0], t.shape()[2]);
        let m = CMatrix::from_row_slice(l * PHYS_DIM, r, t.data());
        let qr = m.qr();
        let (q, rm) = (qr.q(), qr.r());
        let kdim = q.ncols();
        self.tensors[k] = DenseTensor::from_matrix(&q).reshape(alloc::vec![l, PHYS_DIM, kdim])?;
        let next = &self.tensors[k + 1];
        let (nl, nr) = (next.shape()[0], next.shape()[2]);
        debug_assert_eq!(nl, r);
        let data = crate::linalg::matmul(kdim, r, PHYS_DIM * nr, DenseTensor::from_matrix(&rm).data(), next.data());
        self.tensors[k + 1] = DenseTensor::from_parts_unchecked(alloc::vec![kdim, PHYS_DIM, nr], data);
        Ok(())
    }

    /// Makes site `k` right-orthonormal with an LQ split, pushing `L` into `k - 1`.
    fn shift_left(&mut self, k: usize) -> Result<()> {
        let t = &self.tensors[k];
        let (l, r) = (t.shape()[0], t.shape()[2]);
        // M = L Q  <=>  M^† = Q^† L^†
        let m_adj = CMatrix::from_row_slice(l, PHYS_DIM * r, t.data()).adjoint();
        let qr = m_adj.qr();
        let q = qr.q().adjoint();
        let lm = qr.r().adjoint();
        let kdim = q.nrows();
        self.tensors[k] = DenseTensor::from_matrix(&q).reshape(alloc::vec![kdim, PHYS_DIM, r])?;
        let prev = &self.tensors[k - 1];
        let pl = prev.shape()[0];
        let data = crate::linalg::matmul(pl * PHYS_DIM, l, kdim, prev.data(), DenseTensor::from_matrix(&lm).data());
        self.tensors[k - 1] = DenseTensor::from_parts_unchecked(alloc::vec![pl, PHYS_DIM, kdim], data);
        Ok(())
    }

    /// Applies a two-site operator to sites `left` and `left + 1`, splitting
    /// the result with a truncated SVD. Returns the discarded weight of the
    /// split, which is also added to the running total.
    ///
    /// The canonical centre is first moved onto `left` or `left + 1` if it is
    /// elsewhere, and afterwards sits where `absorb` puts it.
    pub fn apply_two_site_gate(
        &mut self,
        gate: &PairOp,
        left: usize,
        trunc: SvdTruncation,
        absorb: Absorb,
    ) -> Result<f64> {
        let n = self.n_sites();
        if left + 1 >= n {
            return Err(Error::Validation(format!("bond {left} out of range for {n} sites")));
        }
        match self.center {
            Some(c) if c == left || c == left + 1 => {}
            Some(c) if c > left + 1 => self.canonicalize(left + 1)?,
            _ => self.canonicalize(left)?,
        }

        let a = &self.tensors[left];
        let b = &self.tensors[left + 1];
        let (l, m, r) = (a.shape()[0], a.shape()[2], b.shape()[2]);
        // theta[l, (s1 s2), r]
        let theta = crate::linalg::matmul(l * PHYS_DIM, m, PHYS_DIM * r, a.data(), b.data());
        let d2 = PHYS_DIM * PHYS_DIM;
        let mut out = alloc::vec![ZERO; theta.len()];
        for li in 0..l {
            let src = &theta[li * d2 * r..(li + 1) * d2 * r];
            let dst = &mut out[li * d2 * r..(li + 1) * d2 * r];
            for p in 0..d2 {
                let row = &mut dst[p * r..(p + 1) * r];
                for q in 0..d2 {
                    let g = gate[(p, q)];
                    if g == ZERO {
                        continue;
                    }
                    for (o, &x) in row.iter_mut().zip(&src[q * r..(q + 1) * r]) {
                        *o += g * x;
                    }
                }
            }
        }

        let mat = DenseTensor::from_parts_unchecked(alloc::vec![l * PHYS_DIM, PHYS_DIM * r], out);
        let svd = svd_truncate(&mat, trunc)?;
        let k = svd.s.len();
        let mut u = svd.u.into_data();
        let mut v = svd.v.into_data();
        match absorb {
            Absorb::Right => {
                for (row, &s) in v.chunks_mut(PHYS_DIM * r).zip(&svd.s) {
                    row.iter_mut().for_each(|z| *z *= s);
                }
            }
            Absorb::Left => {
                for row in u.chunks_mut(k) {
                    row.iter_mut().zip(&svd.s).for_each(|(z, &s)| *z *= s);
                }
            }
        }
        self.tensors[left] = DenseTensor::from_parts_unchecked(alloc::vec![l, PHYS_DIM, k], u);
        self.tensors[left + 1] = DenseTensor::from_parts_unchecked(alloc::vec![k, PHYS_DIM, r], core::mem::take(&mut v));
        self.center = Some(match absorb {
            Absorb::Right => left + 1,
            Absorb::Left => left,
        });
        self.discarded_weight += svd.discarded_weight;
        Ok(svd.discarded_weight)
    }

    /// Worst deviation from the isometry conditions implied by the centre.
    pub fn canonical_residual(&self) -> Option<f64> {
        let c = self.center?;
        let mut worst = 0.0_f64;
        for (k, t) in self.tensors.iter().enumerate() {
            let (l, r) = (t.shape()[0], t.shape()[2]);
            let defect = if k < c {
                let m = CMatrix::from_row_slice(l * PHYS_DIM, r, t.data());
                identity_defect(&(m.adjoint() * &m))
            } else if k > c {
                let m = CMatrix::from_row_slice(l, PHYS_DIM * r, t.data());
                identity_defect(&(&m * m.adjoint()))
            } else {
                0.0
            };
            worst = worst.max(defect);
        }
        Some(worst)
    }
}

fn identity_defect(g: &CMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let t = if i == j { ONE } else { ZERO };
            worst = worst.max((g[(i, j)] - t).norm());
        }
    }
    worst
}

/// Checks a dense tensor is 9 x 9 and converts it to a pair operator.
pub fn pair_op_from_tensor(t: &DenseTensor) -> Result<PairOp> {
    if t.shape() != [9, 9] {
        return Err(Error::Shape(format!("two-site gate must be 9x9, got {:?}", t.shape())));
    }
    Ok(PairOp::from_row_slice(t.data()))
}

/// `<a|b>`.
pub fn overlap(a: &MpsState, b: &MpsState) -> Result<C64> {
    if a.n_sites() != b.n_sites() {
        return Err(Error::Validation(format!(
            "overlap of states with {} and {} sites",
            a.n_sites(),
            b.n_sites()
        )));
    }
    // env[ra, rb]
    let mut env = alloc::vec![ONE];
    let mut ra_prev = 1usize;
    let mut rb_prev = 1usize;
    for (ta, tb) in a.tensors.iter().zip(&b.tensors) {
        let (ra, rb) = (ta.shape()[2], tb.shape()[2]);
        // tmp[la, s, rb] = sum_lb env[la, lb] B[lb, s, rb]
        let tmp = crate::linalg::matmul(ra_prev, rb_prev, PHYS_DIM * rb, &env, tb.data());
        let mut next = alloc::vec![ZERO; ra * rb];
        for la in 0..ra_prev {
            for s in 0..PHYS_DIM {
                let arow = &ta.data()[(la * PHYS_DIM + s) * ra..(la * PHYS_DIM + s + 1) * ra];
                let trow = &tmp[(la * PHYS_DIM + s) * rb..(la * PHYS_DIM + s + 1) * rb];
                for (i, x) in arow.iter().enumerate() {
                    let xc = x.conj();
                    for (o, y) in next[i * rb..(i + 1) * rb].iter_mut().zip(trow) {
                        *o += xc * y;
                    }
                }
            }
        }
        env = next;
        ra_prev = ra;
        rb_prev = rb;
    }
    Ok(env[0])
}
