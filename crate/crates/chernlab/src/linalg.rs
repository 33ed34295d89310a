//! Small dense helpers on top of `faer`.

use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Ascending eigenvalues and matching orthonormal eigenvectors (columns).
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Mat<c64>,
}

pub fn hermitian_eigen(h: MatRef<'_, c64>) -> Result<Eigen> {
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = evd.S();
    let values = (0..h.nrows()).map(|i| s[i].re).collect();
    Ok(Eigen { values, vectors: evd.U().to_owned() })
}

pub fn hermitian_eigenvalues(h: MatRef<'_, c64>) -> Result<Vec<f64>> {
    let mut v: Vec<f64> = h
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Largest singular value.
pub fn spectral_norm(a: MatRef<'_, c64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    if a.nrows() == 2 && a.ncols() == 2 {
        let (f, d) = frob_det2(a);
        let disc = (f * f - 4.0 * d * d).max(0.0).sqrt();
        return ((f + disc) / 2.0).max(0.0).sqrt();
    }
    singular_values(a).into_iter().fold(0.0, f64::max)
}

/// Sum of singular values.
pub fn trace_norm(a: MatRef<'_, c64>) -> f64 {
    if a.nrows() == 2 && a.ncols() == 2 {
        let (f, d) = frob_det2(a);
        return (f + 2.0 * d).max(0.0).sqrt();
    }
    singular_values(a).into_iter().sum()
}

fn frob_det2(a: MatRef<'_, c64>) -> (f64, f64) {
    let f = a[(0, 0)].norm_sqr() + a[(0, 1)].norm_sqr() + a[(1, 0)].norm_sqr() + a[(1, 1)].norm_sqr();
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    (f, det.norm())
}

fn singular_values(a: MatRef<'_, c64>) -> Vec<f64> {
    let g = a.adjoint() * a;
    match hermitian_eigenvalues(g.as_ref()) {
        Ok(v) => v.into_iter().map(|x| x.max(0.0).sqrt()).collect(),
        Err(_) => vec![f64::NAN],
    }
}

/// Largest entrywise modulus.
pub fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

/// `max |A − A†|`.
pub fn hermiticity_defect(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..=j.min(a.nrows().saturating_sub(1)) {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}
