//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::channel::ChannelMatrix;
use crate::constellation::C64;
use crate::error::{Error, Result};

/// Reciprocal condition below which `H` is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// `H H^H`.
pub fn gram(h: &DMatrix<C64>) -> DMatrix<C64> {
    h * h.adjoint()
}

/// Ratio of extreme singular values `σ_max / σ_min` of `H`.
pub fn condition_number(h: &DMatrix<C64>) -> f64 {
    let sv = h.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `(H H^H)^{-1}` for a full-row-rank channel.
pub fn gram_inverse(channel: &ChannelMatrix) -> Result<DMatrix<C64>> {
    let h = channel.matrix();
    if h.nrows() > h.ncols() {
        return Err(Error::RankDeficient {
            condition: f64::INFINITY,
        });
    }
    let condition = condition_number(h);
    if !(condition * RANK_TOL < 1.0) {
        return Err(Error::RankDeficient { condition });
    }
    let chol = gram(h)
        .cholesky()
        .ok_or(Error::RankDeficient { condition })?;
    Ok(chol.inverse())
}

/// Minimum-norm `x` with `H x = y`, given `(H H^H)^{-1}`.
pub fn least_norm(h: &DMatrix<C64>, gram_inv: &DMatrix<C64>, y: &DVector<C64>) -> DVector<C64> {
    h.adjoint() * (gram_inv * y)
}

/// Solve the real symmetric positive definite system `A z = b`.
pub fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.cholesky().map(|c| c.solve(b))
}

/// Solve a general real square system.
pub fn solve_real(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let sol = a.lu().solve(b)?;
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

/// Symmetric orthonormalisation `A (A^H A)^{-1/2}` of the columns of `A`.
pub fn orthonormalize_columns(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let s = a.adjoint() * a;
    let eig = s.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l > 1e-14)) {
        return Err(Error::RankDeficient {
            condition: f64::INFINITY,
        });
    }
    let inv_sqrt = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| C64::new(1.0 / l.sqrt(), 0.0)),
    );
    let v = &eig.eigenvectors;
    let root = v * DMatrix::from_diagonal(&inv_sqrt) * v.adjoint();
    Ok(a * root)
}
