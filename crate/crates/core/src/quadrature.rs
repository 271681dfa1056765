//! Single-mode Gaussian quadrature states in the (amplitude, phase) basis,
//! normalized so that vacuum has the identity covariance.

use nalgebra::{Matrix2, SymmetricEigen};

use crate::error::{ModelError, Result};
use crate::params::{check_efficiency, SqueezerParams};

/// Smallest eigenvalue accepted as "positive" after symmetrization.
pub const EIGEN_TOLERANCE: f64 = -1e-10;
const SYMMETRY_TOLERANCE: f64 = 1e-12;
const UNCERTAINTY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadCovariance(Matrix2<f64>);

impl QuadCovariance {
    /// Validates symmetry and positivity. Use [`QuadCovariance::is_physical`]
    /// to additionally test the uncertainty relation.
    pub fn new(matrix: Matrix2<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Unphysical("non-finite entry".into()));
        }
        let scale = matrix.abs().max().max(1.0);
        if (matrix[(0, 1)] - matrix[(1, 0)]).abs() > SYMMETRY_TOLERANCE * scale {
            return Err(ModelError::Unphysical("matrix is not symmetric".into()));
        }
        let sym = 0.5 * (matrix + matrix.transpose());
        let min_eig = SymmetricEigen::new(sym).eigenvalues.min();
        if min_eig <= EIGEN_TOLERANCE {
            return Err(ModelError::Unphysical(format!(
                "smallest eigenvalue {min_eig} is not positive"
            )));
        }
        Ok(Self(sym))
    }

    pub fn vacuum() -> Self {
        Self(Matrix2::identity())
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.0
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    /// det Σ ≥ 1, saturated by pure states.
    pub fn is_physical(&self) -> bool {
        self.determinant() >= 1.0 - UNCERTAINTY_TOLERANCE
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        let e = SymmetricEigen::new(self.0).eigenvalues;
        (e.min(), e.max())
    }
}

/// Linear map acting on the (amplitude, phase) quadrature vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadTransform(Matrix2<f64>);

impl QuadTransform {
    pub fn new(matrix: Matrix2<f64>) -> Self {
        Self(matrix)
    }

    pub fn identity() -> Self {
        Self(Matrix2::identity())
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.0
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn then(&self, next: &QuadTransform) -> QuadTransform {
        QuadTransform(next.0 * self.0)
    }

    /// Congruence T Σ Tᵀ.
    pub fn apply(&self, cov: &QuadCovariance) -> QuadCovariance {
        let m = self.0 * cov.0 * self.0.transpose();
        QuadCovariance(0.5 * (m + m.transpose()))
    }
}

/// Tuned-interferometer input–output map: amplitude passes unchanged, the
/// phase quadrature picks up −K times the amplitude quadrature.
pub fn ponderomotive_transfer(kimble: f64) -> QuadTransform {
    QuadTransform(Matrix2::new(1.0, 0.0, -kimble, 1.0))
}

/// Pure squeezed vacuum with variance e^{−2r} along quadrature angle φ and
/// e^{+2r} orthogonal to it.
pub fn squeezed_input_covariance(sq: &SqueezerParams) -> QuadCovariance {
    let two_r = 2.0 * sq.squeeze_factor();
    let (s2, c2) = (2.0 * sq.injection_angle()).sin_cos();
    let (ch, sh) = (two_r.cosh(), two_r.sinh());
    QuadCovariance(Matrix2::new(ch - sh * c2, -sh * s2, -sh * s2, ch + sh * c2))
}

/// Beam-splitter loss: η Σ + (1 − η) 𝟙.
pub fn apply_readout_loss(cov: &QuadCovariance, efficiency: f64) -> Result<QuadCovariance> {
    let eta = check_efficiency(efficiency)?;
    Ok(QuadCovariance(
        cov.0 * eta + Matrix2::identity() * (1.0 - eta),
    ))
}

/// Variance of the homodyne quadrature cos ζ · amplitude + sin ζ · phase.
pub fn readout_variance(cov: &QuadCovariance, zeta: f64) -> f64 {
    let (s, c) = zeta.sin_cos();
    let m = &cov.0;
    c * c * m[(0, 0)] + 2.0 * s * c * m[(0, 1)] + s * s * m[(1, 1)]
}
