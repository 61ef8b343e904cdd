//! Matrix-calculus primitives: vec/vech stacking, duplication/elimination
//! matrices, half-vectorization index maps, hafnians, Gaussian higher-order
//! moments, and a discrete-Lyapunov (Stein) solver.
//!
//! Half-vectorization order is fixed once for the whole crate: column-major
//! over the lower triangle, 0-based indices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TdrError};

/// Stacks the columns of `a` into a vector of length `nrows * ncols`.
pub fn vec_op(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(a.as_slice())
}

/// Stacks the lower triangle (diagonal included) of a symmetric `n x n`
/// matrix into a vector of length `n (n + 1) / 2`, column by column.
pub fn vech_op(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(TdrError::InvalidArgument(format!(
            "vech needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !is_symmetric(a, 1e-12) {
        return Err(TdrError::InvalidArgument(
            "vech needs a symmetric matrix".into(),
        ));
    }
    let mut v = DVector::zeros(vech_len(n));
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            v[k] = a[(i, j)];
            k += 1;
        }
    }
    Ok(v)
}

/// Rebuilds the symmetric `n x n` matrix whose half-vectorization is `v`.
pub fn unvech(v: &DVector<f64>, n: usize) -> Result<DMatrix<f64>> {
    if v.len() != vech_len(n) {
        return Err(TdrError::InvalidArgument(format!(
            "unvech of length {} does not match dimension {}",
            v.len(),
            n
        )));
    }
    let mut a = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            a[(i, j)] = v[k];
            a[(j, i)] = v[k];
            k += 1;
        }
    }
    Ok(a)
}

/// Length of the half-vectorization of an `n x n` symmetric matrix.
pub fn vech_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of entry `(i, j)`, `i >= j`, in vech order (0-based).
pub fn vech_index(i: usize, j: usize, n: usize) -> Result<usize> {
    if j > i || i >= n {
        return Err(TdrError::InvalidArgument(format!(
            "vech index needs n > i >= j, got i={i}, j={j}, n={n}"
        )));
    }
    Ok(j * (2 * n + 1 - j) / 2 + (i - j))
}

/// Lower-triangle entry `(i, j)` sitting at position `k` of vech order;
/// inverse of [`vech_index`].
pub fn vech_inverse_index(k: usize, n: usize) -> Result<(usize, usize)> {
    if k >= vech_len(n) {
        return Err(TdrError::InvalidArgument(format!(
            "vech position {k} out of range for dimension {n}"
        )));
    }
    let mut col_start = 0;
    for j in 0..n {
        let col_len = n - j;
        if k < col_start + col_len {
            return Ok((j + (k - col_start), j));
        }
        col_start += col_len;
    }
    unreachable!("k bounds already checked")
}

/// Duplication matrix `D_n` of size `n^2 x n(n+1)/2`: for symmetric `A`,
/// `vec(A) = D_n vech(A)`.
pub fn duplication_matrix(n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n * n, vech_len(n));
    for j in 0..n {
        for i in 0..n {
            let slot = vech_index(i.max(j), i.min(j), n).expect("in range");
            d[(j * n + i, slot)] = 1.0;
        }
    }
    d
}

/// Elimination matrix `L_n` of size `n(n+1)/2 x n^2`: for any square `A`,
/// `L_n vec(A)` picks the lower triangle in vech order.
pub fn elimination_matrix(n: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(vech_len(n), n * n);
    for k in 0..vech_len(n) {
        let (i, j) = vech_inverse_index(k, n).expect("in range");
        l[(k, j * n + i)] = 1.0;
    }
    l
}

/// Hafnian of an even-dimensional symmetric matrix: the sum over all
/// perfect matchings of `{0, .., 2l-1}` of the products of matched entries.
///
/// Recursive pairing on the first unmatched index, `(2l-1)!!` terms. The
/// moment engine only ever needs `2l <= 8`, where this is instantaneous.
pub fn hafnian(s: &DMatrix<f64>) -> Result<f64> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(TdrError::InvalidArgument(
            "hafnian needs a square matrix".into(),
        ));
    }
    if !n.is_multiple_of(2) {
        return Err(TdrError::InvalidArgument(format!(
            "hafnian needs even dimension, got {n}"
        )));
    }
    let active: Vec<usize> = (0..n).collect();
    Ok(hafnian_rec(&active, s))
}

fn hafnian_rec(active: &[usize], s: &DMatrix<f64>) -> f64 {
    if active.is_empty() {
        return 1.0;
    }
    let first = active[0];
    let mut total = 0.0;
    for p in 1..active.len() {
        let mate = active[p];
        let mut rest = Vec::with_capacity(active.len() - 2);
        rest.extend_from_slice(&active[1..p]);
        rest.extend_from_slice(&active[p + 1..]);
        total += s[(first, mate)] * hafnian_rec(&rest, s);
    }
    total
}

/// Higher-order moment `E[z_1^{k_1} ... z_n^{k_n}]` of a centered Gaussian
/// vector with covariance `sigma`.
///
/// Builds the covariance of the coordinate-repeated vector (coordinate `i`
/// repeated `k_i` times) and evaluates its hafnian; odd total order is 0 and
/// the empty exponent gives 1.
pub fn gaussian_moment(sigma: &DMatrix<f64>, k: &[usize]) -> Result<f64> {
    if sigma.nrows() != k.len() || sigma.ncols() != k.len() {
        return Err(TdrError::InvalidArgument(format!(
            "exponent vector of length {} does not match covariance {}x{}",
            k.len(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let total: usize = k.iter().sum();
    if total == 0 {
        return Ok(1.0);
    }
    if !total.is_multiple_of(2) {
        return Ok(0.0);
    }
    let mut repeated = Vec::with_capacity(total);
    for (var, &count) in k.iter().enumerate() {
        repeated.extend(std::iter::repeat_n(var, count));
    }
    let expanded = DMatrix::from_fn(total, total, |a, b| sigma[(repeated[a], repeated[b])]);
    hafnian(&expanded)
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

const STEIN_RTOL: f64 = 1e-12;
const STEIN_MAX_DOUBLINGS: usize = 64;
const STEIN_DENSE_FALLBACK_DIM: usize = 250;

/// Solves the Stein equation `G = A G A^T + S` for the unique symmetric `G`,
/// assuming the spectral radius of `A` is below one.
///
/// Uses the squared-power doubling iteration `G <- G + A^(2^k) G (A^(2^k))^T`
/// and falls back to the dense half-vectorized linear system when the
/// iteration stalls (possible only for spectra hugging the unit circle).
pub fn stein_solve(a: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = a.nrows();
    if a.ncols() != m || s.nrows() != m || s.ncols() != m {
        return Err(TdrError::InvalidArgument(format!(
            "stein solve needs square same-size matrices, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            s.nrows(),
            s.ncols()
        )));
    }
    if !is_symmetric(s, 1e-9 * (1.0 + s.norm())) {
        return Err(TdrError::InvalidArgument(
            "stein solve needs a symmetric right-hand side".into(),
        ));
    }
    let rho = spectral_radius(a);
    if rho >= 1.0 {
        return Err(TdrError::Instability(format!(
            "spectral radius {rho:.6} is not below one"
        )));
    }

    let mut gamma = symmetrize(s);
    let mut power = a.clone();
    for _ in 0..STEIN_MAX_DOUBLINGS {
        let increment = &power * &gamma * power.transpose();
        gamma += &increment;
        if increment.norm() <= STEIN_RTOL * gamma.norm() {
            return Ok(symmetrize(&gamma));
        }
        power = &power * &power;
    }
    if m <= STEIN_DENSE_FALLBACK_DIM {
        return stein_solve_dense(a, s);
    }
    Err(TdrError::Numeric(format!(
        "stein iteration did not converge in {STEIN_MAX_DOUBLINGS} doublings (rho = {rho:.6})"
    )))
}

/// Direct solve of the Stein equation through the half-vectorized system
/// `(I - L (A (x) A) D) vech(G) = vech(S)`, assembled entry-wise so the
/// `m^2 x m^2` Kronecker product is never materialized.
fn stein_solve_dense(a: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = a.nrows();
    let nv = vech_len(m);
    let mut system = DMatrix::zeros(nv, nv);
    for col in 0..nv {
        let (ip, jp) = vech_inverse_index(col, m).expect("in range");
        for row in 0..nv {
            let (i, j) = vech_inverse_index(row, m).expect("in range");
            let mut coeff = a[(i, ip)] * a[(j, jp)];
            if ip != jp {
                coeff += a[(i, jp)] * a[(j, ip)];
            }
            system[(row, col)] = -coeff;
        }
        system[(col, col)] += 1.0;
    }
    let rhs = vech_op(&symmetrize(s))?;
    let solution = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| TdrError::Singular("half-vectorized stein system".into()))?;
    unvech(&solution, m)
}

/// Assembles a block-diagonal matrix from square blocks.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let total: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(total, total);
    let mut offset = 0;
    for b in blocks {
        out.view_mut((offset, offset), (b.nrows(), b.ncols()))
            .copy_from(b);
        offset += b.nrows();
    }
    out
}

pub(crate) fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    for j in 0..a.ncols() {
        for i in (j + 1)..a.nrows() {
            if (a[(i, j)] - a[(j, i)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

pub(crate) fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}
