//! Small dense complex matrix helpers shared by the model, TEBD and oracle.

use alloc::vec::Vec;
use nalgebra::{DMatrix, Matrix3, SMatrix, SymmetricEigen};

use crate::C64;

/// Dynamically sized complex matrix.
pub type CMatrix = DMatrix<C64>;
/// Operator on a single spin-1 site.
pub type SiteOp = Matrix3<C64>;
/// Operator on a pair of neighbouring spin-1 sites, row index `3 * s1 + s2`.
pub type PairOp = SMatrix<C64, 9, 9>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

pub(crate) fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Kronecker product of two site operators, left factor most significant.
pub fn kron(a: &SiteOp, b: &SiteOp) -> PairOp {
    PairOp::from_fn(|r, c| a[(r / 3, c / 3)] * b[(r % 3, c % 3)])
}

/// Largest entry modulus of any iterator of complex numbers.
pub fn max_abs<'a, I: IntoIterator<Item = &'a C64>>(it: I) -> f64 {
    it.into_iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// Largest entry modulus of `m - m^dagger`.
pub fn hermiticity_defect<R, C, S>(m: &nalgebra::Matrix<C64, R, C, S>) -> f64
where
    R: nalgebra::Dim,
    C: nalgebra::Dim,
    S: nalgebra::RawStorage<C64, R, C>,
{
    let (n, k) = m.shape();
    if n != k {
        return f64::INFINITY;
    }
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entry modulus of `u^dagger u - 1`.
pub fn unitarity_defect(u: &PairOp) -> f64 {
    let p = u.adjoint() * u;
    let mut worst = 0.0_f64;
    for i in 0..9 {
        for j in 0..9 {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((p[(i, j)] - target).norm());
        }
    }
    worst
}

/// `exp(-i h tau)` for Hermitian `h`, through its eigendecomposition.
pub fn hermitian_propagator(h: &PairOp, tau: f64) -> PairOp {
    // Symmetrise first so rounding in h cannot leak anti-Hermitian parts.
    let sym = (h + h.adjoint()) * real(0.5);
    let eig = SymmetricEigen::new(sym);
    let phases: Vec<C64> = eig
        .eigenvalues
        .iter()
        .map(|&e| {
            let theta = -e * tau;
            C64::new(libm::cos(theta), libm::sin(theta))
        })
        .collect();
    let v = &eig.eigenvectors;
    PairOp::from_fn(|r, c| {
        let mut acc = ZERO;
        for (k, p) in phases.iter().enumerate() {
            acc += v[(r, k)] * p * v[(c, k)].conj();
        }
        acc
    })
}

/// Thin SVD `a = u diag(s) v_t` by one-sided (Hestenes) Jacobi rotations,
/// singular values non-increasing. `None` if `max_sweeps` is exhausted.
///
/// Bidiagonal QR only resolves singular values to `eps * s_max`; nearly
/// product states have Schmidt coefficients far below that scale relative
/// to their own size, and losing them costs ~1e-9 per TEBD step. Jacobi
/// keeps each singular value accurate relative to itself.
pub fn jacobi_svd(a: &CMatrix, max_sweeps: usize) -> Option<(CMatrix, Vec<f64>, CMatrix)> {
    let (m, n) = a.shape();
    if m < n {
        let (u, s, vt) = jacobi_svd(&a.adjoint(), max_sweeps)?;
        return Some((vt.adjoint(), s, u.adjoint()));
    }
    let mut u: Vec<Vec<C64>> = (0..n).map(|j| a.column(j).iter().copied().collect()).collect();
    let mut v: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let mut e = alloc::vec![ZERO; n];
            e[j] = ONE;
            e
        })
        .collect();
    let tol = f64::EPSILON * libm::sqrt(m as f64);
    let norm2 = |x: &[C64]| x.iter().map(|z| z.norm_sqr()).sum::<f64>();

    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = norm2(&u[p]);
                let beta = norm2(&u[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma: C64 = u[p].iter().zip(&u[q]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g <= tol * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let phase = gamma.conj() / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta >= 0.0 { 1.0 } else { -1.0 } / (zeta.abs() + libm::hypot(1.0, zeta));
                let c = 1.0 / libm::hypot(1.0, t);
                let s = c * t;
                for cols in [&mut u, &mut v] {
                    let (head, tail) = cols.split_at_mut(q);
                    for (xp, xq) in head[p].iter_mut().zip(tail[0].iter_mut()) {
                        let yq = *xq * phase;
                        let yp = *xp;
                        *xp = yp * c - yq * s;
                        *xq = yp * s + yq * c;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }

    let sigma: Vec<f64> = u.iter().map(|col| libm::sqrt(norm2(col))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    let u_out = CMatrix::from_fn(m, n, |r, k| {
        let j = order[k];
        if sigma[j] > 0.0 {
            u[j][r] / sigma[j]
        } else if r == k {
            ONE
        } else {
            ZERO
        }
    });
    let vt_out = CMatrix::from_fn(n, n, |k, c| v[order[k]][c].conj());
    Some((u_out, order.iter().map(|&j| sigma[j]).collect(), vt_out))
}

/// Row-major `m x k` times row-major `k x n`.
pub(crate) fn matmul(m: usize, k: usize, n: usize, a: &[C64], b: &[C64]) -> Vec<C64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = alloc::vec![ZERO; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (l, &x) in a[i * k..(i + 1) * k].iter().enumerate() {
            if x == ZERO {
                continue;
            }
            for (o, &y) in row.iter_mut().zip(&b[l * n..(l + 1) * n]) {
                *o += x * y;
            }
        }
    }
    out
}
