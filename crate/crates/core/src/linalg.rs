//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Relative cutoff below which singular values / eigenvalues count as zero
/// in every pseudoinverse of the crate.
pub const PINV_RTOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Eigendecomposition of a Hermitian matrix. Only the Hermitian part is used.
pub fn hermitian_eigen(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    (eig.eigenvalues, eig.eigenvectors)
}

pub fn spectral_norm_hermitian(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let (vals, _) = hermitian_eigen(m);
    vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Moore-Penrose pseudoinverse of a Hermitian matrix.
pub fn hermitian_pinv(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    if n == 0 {
        return out;
    }
    let (vals, vecs) = hermitian_eigen(m);
    let top = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if top == 0.0 {
        return out;
    }
    for (i, &v) in vals.iter().enumerate() {
        if v.abs() > PINV_RTOL * top {
            let u = vecs.column(i);
            out += (&u * u.adjoint()) * c(1.0 / v, 0.0);
        }
    }
    out
}

/// Moore-Penrose pseudoinverse of a general real matrix via SVD.
pub fn real_pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, cols) = m.shape();
    if r == 0 || cols == 0 {
        return DMatrix::zeros(cols, r);
    }
    let svd = m.clone().svd(true, true);
    let top = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut out = DMatrix::zeros(cols, r);
    if top == 0.0 {
        return out;
    }
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > PINV_RTOL * top {
            out += (vt.row(i).transpose() * u.column(i).transpose()) / s;
        }
    }
    out
}

/// Factor a Hermitian PSD matrix as `F^H F`, flooring negative eigenvalues at
/// zero and dropping null directions. `F` has one row per retained eigenvalue.
pub fn psd_factor(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    let (vals, vecs) = hermitian_eigen(m);
    let top = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let keep: Vec<usize> = (0..n)
        .filter(|&i| top > 0.0 && vals[i] > PINV_RTOL * top)
        .collect();
    let mut f = CMatrix::zeros(keep.len(), n);
    for (row, &i) in keep.iter().enumerate() {
        let s = vals[i].sqrt();
        for j in 0..n {
            f[(row, j)] = vecs[(j, i)].conj() * s;
        }
    }
    f
}

pub fn submatrix(m: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

pub fn subvector(v: &CVector, idx: &[usize]) -> CVector {
    CVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

/// Scatter `v` (indexed by `idx`) into a zero vector of length `n`.
pub fn embed(v: &CVector, idx: &[usize], n: usize) -> CVector {
    let mut out = CVector::zeros(n);
    for (i, &j) in idx.iter().enumerate() {
        out[j] = v[i];
    }
    out
}

pub fn norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `a^H b`
pub fn inner(a: &CVector, b: &CVector) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn is_diagonal(m: &CMatrix, tol: f64) -> bool {
    let (r, cols) = m.shape();
    (0..r).all(|i| (0..cols).all(|j| i == j || m[(i, j)].norm() <= tol))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_rank_deficient_hermitian() {
        // hh^H with h = [1, i]: pinv is hh^H / |h|^4
        let h = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let m = &h * h.adjoint();
        let p = hermitian_pinv(&m);
        let expected = &m * c(0.25, 0.0);
        assert!((p - expected).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn factor_reconstructs_psd() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[c(2.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(1.0, 0.0)],
        );
        let f = psd_factor(&m);
        let back = f.adjoint() * &f;
        assert!((back - m).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn factor_drops_null_space() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(3.0, 0.0), c(0.0, 0.0)]));
        assert_eq!(psd_factor(&m).nrows(), 1);
    }

    #[test]
    fn real_pinv_solves_square_system() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        let p = real_pinv(&m);
        let id = &m * &p;
        assert!((id - DMatrix::identity(2, 2)).abs().max() < 1e-12);
    }
}
