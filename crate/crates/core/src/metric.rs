//! CMD similarity between two covariance matrices.
//!
//! `d = Tr(R1^H R2) / (||R1||_F ||R2||_F)`. This is the similarity form
//! (1 for collinear structure, 0 for orthogonal); it is never converted to
//! a distance.

use thiserror::Error;

use crate::covar::CovarianceMatrix;

/// Relative tolerance for the Hermitian check and the imaginary trace residue.
pub const HERMITIAN_TOL: f64 = 1e-9;
/// Roundoff allowance around the `[0, 1]` range before clamping.
pub const CLAMP_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("covariance matrix has (near) zero Frobenius norm")]
    ZeroMatrix,
    #[error("covariance matrix is not Hermitian (relative defect {0:e})")]
    NotHermitian(f64),
    #[error("similarity {0} outside [0, 1]; inputs are not positive semidefinite")]
    OutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Similarity(f64);

impl Similarity {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Similarity> for f64 {
    fn from(s: Similarity) -> f64 {
        s.0
    }
}

pub fn cmd_similarity(r1: &CovarianceMatrix, r2: &CovarianceMatrix) -> Result<Similarity, MetricError> {
    let n = r1.dim();
    if n != r2.dim() {
        return Err(MetricError::DimensionMismatch(n, r2.dim()));
    }
    let n1 = r1.frobenius_norm();
    let n2 = r2.frobenius_norm();
    let floor = 1e-30 * n as f64;
    if !(n1 > floor) || !(n2 > floor) {
        return Err(MetricError::ZeroMatrix);
    }
    for r in [r1, r2] {
        let defect = r.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(MetricError::NotHermitian(defect));
        }
    }

    // Tr(A^H B) = sum_ij conj(A_ij) B_ij
    let (mut re, mut im) = (0.0f64, 0.0f64);
    for (a, b) in r1.as_slice().iter().zip(r2.as_slice()) {
        re += a.re * b.re + a.im * b.im;
        im += a.re * b.im - a.im * b.re;
    }
    let scale = n1 * n2;
    if im.abs() > HERMITIAN_TOL * (re.abs() + f64::EPSILON * scale) {
        return Err(MetricError::NotHermitian(im.abs() / scale));
    }
    let value = re / scale;
    if !(-CLAMP_TOL..=1.0 + CLAMP_TOL).contains(&value) {
        return Err(MetricError::OutOfRange(value));
    }
    Ok(Similarity(value.clamp(0.0, 1.0)))
}
