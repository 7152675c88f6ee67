//! Dense complex tensors and truncated singular value decomposition.
//!
//! Storage is row-major: the last axis varies fastest. A tensor with shape
//! `[a, b, c]` stores entry `(i, j, k)` at `(i * b + j) * c + k`.

use alloc::format;
use alloc::vec::Vec;

use crate::linalg::{jacobi_svd, matmul, CMatrix, ZERO};
use crate::{Error, Result, C64};

/// Singular values below this fraction of the largest one are always dropped.
pub const SVD_NOISE_FLOOR: f64 = 1e-14;

const SVD_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("zero extent in shape {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("tensor has non-finite entries".into()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, data: alloc::vec![ZERO; len] }
    }

    /// Builds a rank-2 tensor from a row-major slice.
    pub fn matrix(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        Self::new(alloc::vec![rows, cols], data)
    }

    pub(crate) fn from_parts_unchecked(shape: Vec<usize>, data: Vec<C64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> C64 {
        self.data[self.offset(index)]
    }

    fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| {
                debug_assert!(i < d);
                acc * d + i
            })
    }

    pub fn scale(&self, alpha: C64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&z| z * alpha).collect() }
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|z| z.norm_sqr()).sum())
    }

    /// Same data under a new shape with the same number of entries.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() || shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        Ok(Self { shape, data: self.data })
    }

    /// Reorders axes so that output axis `k` is input axis `axes[k]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let rank = self.rank();
        let mut seen = alloc::vec![false; rank];
        if axes.len() != rank || axes.iter().any(|&a| a >= rank || core::mem::replace(&mut seen[a], true)) {
            return Err(Error::Shape(format!("{axes:?} is not a permutation of {rank} axes")));
        }
        if axes.iter().enumerate().all(|(k, &a)| k == a) {
            return Ok(self.clone());
        }
        let new_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let mut strides = alloc::vec![1usize; rank];
        for k in (0..rank.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.shape[k + 1];
        }
        let perm_strides: Vec<usize> = axes.iter().map(|&a| strides[a]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = alloc::vec![0usize; rank];
        let mut src = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[src]);
            // odometer increment over the output index
            for k in (0..rank).rev() {
                idx[k] += 1;
                src += perm_strides[k];
                if idx[k] < new_shape[k] {
                    break;
                }
                src -= perm_strides[k] * new_shape[k];
                idx[k] = 0;
            }
        }
        Ok(Self { shape: new_shape, data })
    }

    /// Copies a rank-2 tensor into an nalgebra matrix.
    pub fn to_matrix(&self) -> Result<CMatrix> {
        match self.shape.as_slice() {
            &[r, c] => Ok(CMatrix::from_row_slice(r, c, &self.data)),
            s => Err(Error::Shape(format!("expected a rank-2 tensor, got shape {s:?}"))),
        }
    }

    pub fn from_matrix(m: &CMatrix) -> Self {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self { shape: alloc::vec![r, c], data }
    }
}

/// Contracts `a` with `b`, summing over each `(a_axis, b_axis)` pair.
///
/// The result carries the unpaired axes of `a` in order, then the unpaired
/// axes of `b` in order.
pub fn contract(a: &DenseTensor, b: &DenseTensor, pairs: &[(usize, usize)]) -> Result<DenseTensor> {
    for &(ia, ib) in pairs {
        if ia >= a.rank() || ib >= b.rank() {
            return Err(Error::Shape(format!(
                "axis pair ({ia}, {ib}) out of range for ranks {} and {}",
                a.rank(),
                b.rank()
            )));
        }
        if a.shape[ia] != b.shape[ib] {
            return Err(Error::Shape(format!(
                "contracted extents differ: a[{ia}] = {}, b[{ib}] = {}",
                a.shape[ia], b.shape[ib]
            )));
        }
    }
    let a_paired: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let b_paired: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    if has_duplicates(&a_paired) || has_duplicates(&b_paired) {
        return Err(Error::Shape("an axis appears in more than one pair".into()));
    }
    let a_free: Vec<usize> = (0..a.rank()).filter(|k| !a_paired.contains(k)).collect();
    let b_free: Vec<usize> = (0..b.rank()).filter(|k| !b_paired.contains(k)).collect();

    let a_axes: Vec<usize> = a_free.iter().chain(&a_paired).copied().collect();
    let b_axes: Vec<usize> = b_paired.iter().chain(&b_free).copied().collect();
    let ap = a.permute(&a_axes)?;
    let bp = b.permute(&b_axes)?;

    let m: usize = a_free.iter().map(|&k| a.shape[k]).product();
    let k: usize = a_paired.iter().map(|&k| a.shape[k]).product();
    let n: usize = b_free.iter().map(|&k| b.shape[k]).product();
    let data = matmul(m, k, n, &ap.data, &bp.data);

    let shape: Vec<usize> = a_free
        .iter()
        .map(|&k| a.shape[k])
        .chain(b_free.iter().map(|&k| b.shape[k]))
        .collect();
    // A full contraction yields a scalar, stored as shape [1].
    let shape = if shape.is_empty() { alloc::vec![1] } else { shape };
    Ok(DenseTensor { shape, data })
}

fn has_duplicates(v: &[usize]) -> bool {
    v.iter().enumerate().any(|(i, x)| v[..i].contains(x))
}

/// Limits applied when splitting a matrix by SVD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdTruncation {
    /// Maximum number of singular values kept.
    pub chi_max: usize,
    /// Singular values below `cutoff * s_max` are dropped.
    pub cutoff: f64,
}

impl SvdTruncation {
    pub fn new(chi_max: usize, cutoff: f64) -> Result<Self> {
        if chi_max == 0 {
            return Err(Error::Validation("chi_max must be positive".into()));
        }
        if !(cutoff >= 0.0) || !cutoff.is_finite() {
            return Err(Error::Validation(format!("cutoff must be finite and >= 0, got {cutoff}")));
        }
        Ok(Self { chi_max, cutoff })
    }

    /// No bond cap and no relative cutoff; only the noise floor applies.
    pub const fn unbounded() -> Self {
        Self { chi_max: usize::MAX, cutoff: 0.0 }
    }

    pub const fn with_chi_max(chi_max: usize) -> Self {
        Self { chi_max, cutoff: 0.0 }
    }
}

impl Default for SvdTruncation {
    fn default() -> Self {
        Self::unbounded()
    }
}

/// Output of [`svd_truncate`]: `m ≈ u · diag(s) · v`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// `rows x k` with orthonormal columns.
    pub u: DenseTensor,
    /// Kept singular values, non-increasing.
    pub s: Vec<f64>,
    /// `k x cols` with orthonormal rows.
    pub v: DenseTensor,
    /// Squared norm of the dropped singular values over the total.
    pub discarded_weight: f64,
}

pub fn svd_truncate(m: &DenseTensor, trunc: SvdTruncation) -> Result<TruncatedSvd> {
    let mat = m.to_matrix()?;
    let (rows, cols) = mat.shape();
    let (u, sorted, vt) = jacobi_svd(&mat, SVD_MAX_SWEEPS).ok_or(Error::SvdNoConvergence { rows, cols })?;

    let total: f64 = sorted.iter().map(|s| s * s).sum();
    let s_max = sorted.first().copied().unwrap_or(0.0);
    let threshold = s_max * trunc.cutoff.max(SVD_NOISE_FLOOR);
    let keep = if s_max > 0.0 {
        sorted.iter().take_while(|&&s| s > threshold).count().clamp(1, trunc.chi_max)
    } else {
        1
    };
    let discarded: f64 = sorted[keep..].iter().map(|s| s * s).sum();
    let discarded_weight = if total > 0.0 { (discarded / total).clamp(0.0, 1.0) } else { 0.0 };

    let mut u_data = Vec::with_capacity(rows * keep);
    for r in 0..rows {
        for c in 0..keep {
            u_data.push(u[(r, c)]);
        }
    }
    let mut v_data = Vec::with_capacity(keep * cols);
    for r in 0..keep {
        for c in 0..cols {
            v_data.push(vt[(r, c)]);
        }
    }
    Ok(TruncatedSvd {
        u: DenseTensor::from_parts_unchecked(alloc::vec![rows, keep], u_data),
        s: sorted[..keep].to_vec(),
        v: DenseTensor::from_parts_unchecked(alloc::vec![keep, cols], v_data),
        discarded_weight,
    })
}
