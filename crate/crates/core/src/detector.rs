//! Zero-forcing and MMSE linear detectors under perfect CSI.
//!
//! Both detectors are `A = H (H^H H + λ I)^{-1}` with `λ = 0` for ZF and
//! `λ = σn²/σx²` for MMSE. The regularized Gram matrix is Cholesky-factored
//! once, and `A^H = (H^H H + λ I)^{-1} H^H` is obtained by solving against
//! `H^H` rather than by forming an inverse.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Cholesky, ComplexMatrix, LinalgError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectorError {
    #[error("singular channel: {0}")]
    SingularChannel(#[source] LinalgError),
    #[error(transparent)]
    Dimension(LinalgError),
    #[error("user index {index} out of range for K={k_users}")]
    UserIndexOutOfRange { index: usize, k_users: usize },
    #[error("invalid variance: sigma_n2={sigma_n2}, sigma_x2={sigma_x2}")]
    InvalidVariance { sigma_n2: f64, sigma_x2: f64 },
    #[error("unknown detector `{0}` (expected zf or mmse)")]
    UnknownDetector(String),
}

impl From<LinalgError> for DetectorError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::NotPositiveDefinite { .. } => DetectorError::SingularChannel(e),
            other => DetectorError::Dimension(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Zf,
    Mmse,
}

impl DetectorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Zf => "zf",
            DetectorKind::Mmse => "mmse",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorKind {
    type Err = DetectorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zf" => Ok(DetectorKind::Zf),
            "mmse" => Ok(DetectorKind::Mmse),
            other => Err(DetectorError::UnknownDetector(other.to_string())),
        }
    }
}

/// `M x K` detection matrix `A`, stored together with `A^H` for the
/// per-vector product.
#[derive(Debug, Clone)]
pub struct DetectionMatrix {
    kind: DetectorKind,
    a: ComplexMatrix,
    a_h: ComplexMatrix,
}

impl DetectionMatrix {
    pub fn build(
        kind: DetectorKind,
        h: &ComplexMatrix,
        sigma_n2: f64,
        sigma_x2: f64,
    ) -> Result<Self, DetectorError> {
        match kind {
            DetectorKind::Zf => build_zf(h),
            DetectorKind::Mmse => build_mmse(h, sigma_n2, sigma_x2),
        }
    }

    fn from_regularized(
        kind: DetectorKind,
        h: &ComplexMatrix,
        lambda: f64,
    ) -> Result<Self, DetectorError> {
        let mut g = h.gram();
        if lambda != 0.0 {
            g = g.add_scaled_identity(lambda)?;
        }
        let chol = Cholesky::factor(&g)?;
        let a_h = chol.solve(&h.hermitian_transpose())?;
        Ok(Self {
            kind,
            a: a_h.hermitian_transpose(),
            a_h,
        })
    }

    pub fn kind(&self) -> DetectorKind {
        self.kind
    }

    /// `A`, `M x K`.
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.a
    }

    /// `A^H`, `K x M`.
    pub fn matrix_h(&self) -> &ComplexMatrix {
        &self.a_h
    }

    pub fn k_users(&self) -> usize {
        self.a.cols()
    }

    pub fn m_antennas(&self) -> usize {
        self.a.rows()
    }

    /// `x̂ = A^H r`.
    pub fn detect(&self, r: &ComplexMatrix) -> Result<ComplexMatrix, DetectorError> {
        if !r.is_column() || r.rows() != self.m_antennas() {
            return Err(DetectorError::Dimension(LinalgError::DimensionMismatch {
                left_rows: self.a_h.rows(),
                left_cols: self.a_h.cols(),
                right_rows: r.rows(),
                right_cols: r.cols(),
            }));
        }
        Ok(self.a_h.matmul(r)?)
    }

    /// Allocation-free `x̂ = A^H r`.
    #[inline]
    pub fn detect_into(&self, r: &[Complex64], out: &mut [Complex64]) {
        self.a_h.mul_vec_into(r, out);
    }

    /// Splits user `k` (0-based) of the unquantized estimate `A^H (H x + n)`
    /// into desired signal, inter-user interference and noise.
    pub fn decompose_user(
        &self,
        h: &ComplexMatrix,
        x: &ComplexMatrix,
        n: &ComplexMatrix,
        k: usize,
    ) -> Result<UserDecomposition, DetectorError> {
        let k_users = self.k_users();
        if k >= k_users {
            return Err(DetectorError::UserIndexOutOfRange { index: k, k_users });
        }
        let m = self.m_antennas();
        if h.shape() != (m, k_users) || x.shape() != (k_users, 1) || n.shape() != (m, 1) {
            return Err(DetectorError::Dimension(LinalgError::DimensionMismatch {
                left_rows: h.rows(),
                left_cols: h.cols(),
                right_rows: x.rows(),
                right_cols: x.cols(),
            }));
        }
        let a_k = self.a_h.row(k);
        // a_k^H h_i for every user i
        let gains: Vec<Complex64> = (0..k_users)
            .map(|i| (0..m).map(|row| a_k[row] * h[(row, i)]).sum())
            .collect();
        let xs = x.as_slice();
        let desired = gains[k] * xs[k];
        let interference = (0..k_users)
            .filter(|&i| i != k)
            .map(|i| gains[i] * xs[i])
            .sum();
        let noise = crate::linalg::dot(a_k, n.as_slice());
        Ok(UserDecomposition {
            desired,
            interference,
            noise,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserDecomposition {
    pub desired: Complex64,
    pub interference: Complex64,
    pub noise: Complex64,
}

impl UserDecomposition {
    pub fn total(&self) -> Complex64 {
        self.desired + self.interference + self.noise
    }
}

pub fn build_zf(h: &ComplexMatrix) -> Result<DetectionMatrix, DetectorError> {
    DetectionMatrix::from_regularized(DetectorKind::Zf, h, 0.0)
}

pub fn build_mmse(
    h: &ComplexMatrix,
    sigma_n2: f64,
    sigma_x2: f64,
) -> Result<DetectionMatrix, DetectorError> {
    if !(sigma_n2 >= 0.0 && sigma_x2 > 0.0 && sigma_n2.is_finite() && sigma_x2.is_finite()) {
        return Err(DetectorError::InvalidVariance { sigma_n2, sigma_x2 });
    }
    DetectionMatrix::from_regularized(DetectorKind::Mmse, h, sigma_n2 / sigma_x2)
}
