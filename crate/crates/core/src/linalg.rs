//! Small dense helpers on top of `nalgebra`. Everything here works on the
//! (d+1)-sized matrices this crate deals with, so nothing is blocked or cached.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{BanditError, Result};

/// Eigenvalues at or below this are treated as zero when an inverse is requested.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Relative singular-value cutoff for span-restricted (pseudo-)inverses.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Replace `m` by `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let mut s = m.clone();
    symmetrize(&mut s);
    SymmetricEigen::new(s).eigenvalues
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    symmetric_eigenvalues(m).min()
}

/// Inverse of a symmetric positive-definite matrix. Fails when the smallest
/// eigenvalue is at or below [`SINGULAR_TOL`].
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let min_eig = min_eigenvalue(m);
    if min_eig <= SINGULAR_TOL || !min_eig.is_finite() {
        return Err(BanditError::SingularOrIndefinite {
            min_eigenvalue: min_eig,
        });
    }
    let mut s = m.clone();
    symmetrize(&mut s);
    let chol = s
        .cholesky()
        .ok_or(BanditError::SingularOrIndefinite { min_eigenvalue: min_eig })?;
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// `log det(m)` for symmetric positive-definite `m`.
pub fn logdet_pd(m: &DMatrix<f64>) -> Result<f64> {
    let eig = symmetric_eigenvalues(m);
    let min_eig = if eig.is_empty() { f64::INFINITY } else { eig.min() };
    if min_eig <= SINGULAR_TOL || !min_eig.is_finite() {
        return Err(BanditError::SingularOrIndefinite {
            min_eigenvalue: min_eig,
        });
    }
    Ok(eig.iter().map(|l| l.ln()).sum())
}

/// Moore–Penrose pseudo-inverse of a symmetric PSD matrix; eigenvalues below
/// `PINV_CUTOFF · λ_max` are dropped.
pub fn pinv_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut s = m.clone();
    symmetrize(&mut s);
    let eig = SymmetricEigen::new(s);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let mut out = DMatrix::zeros(n, n);
    if lmax <= 0.0 {
        return out;
    }
    let cutoff = PINV_CUTOFF * lmax;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > cutoff {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / lam;
        }
    }
    symmetrize(&mut out);
    out
}

/// Numerical rank of a PSD matrix under the relative cutoff [`PINV_CUTOFF`].
pub fn psd_rank(m: &DMatrix<f64>) -> usize {
    let eig = symmetric_eigenvalues(m);
    let lmax = eig.iter().cloned().fold(0.0_f64, f64::max);
    if lmax <= 0.0 {
        return 0;
    }
    eig.iter().filter(|&&l| l > PINV_CUTOFF * lmax).count()
}

/// Frobenius inner product `⟨a, b⟩ = tr(aᵀ b)`.
pub fn frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `xᵀ m x`.
pub fn quad_form(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x))
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    let n = m.nrows();
    m.ncols() == n
        && (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_rank_one() {
        let v = DVector::from_vec(vec![1.0, 2.0, 0.0]);
        let m = &v * v.transpose();
        let p = pinv_psd(&m);
        // m p m = m
        let back = &m * &p * &m;
        assert!((back - &m).norm() < 1e-10);
        assert_eq!(psd_rank(&m), 1);
    }

    #[test]
    fn spd_inverse_rejects_singular() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        assert!(matches!(
            spd_inverse(&m),
            Err(BanditError::SingularOrIndefinite { .. })
        ));
    }

    #[test]
    fn logdet_diag() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        assert!((logdet_pd(&m).unwrap() - 6.0_f64.ln()).abs() < 1e-14);
    }
}
