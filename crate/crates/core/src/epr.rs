//! Two-mode (signal/idler) Gaussian states and EPR conditioning.

use nalgebra::{Matrix4, SMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{ModelError, Result};
use crate::params::check_efficiency;
use crate::quadrature::EIGEN_TOLERANCE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    Amplitude,
    Phase,
}

impl Quadrature {
    fn signal_index(self) -> usize {
        match self {
            Quadrature::Amplitude => 0,
            Quadrature::Phase => 1,
        }
    }

    fn idler_index(self) -> usize {
        self.signal_index() + 2
    }
}

/// Covariance over (signal amplitude, signal phase, idler amplitude,
/// idler phase); vacuum is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeCovariance(Matrix4<f64>);

impl TwoModeCovariance {
    /// Checks symmetry, positivity and the uncertainty relation Σ + iΩ ⪰ 0.
    pub fn new(matrix: Matrix4<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Unphysical("non-finite entry".into()));
        }
        let scale = matrix.abs().max().max(1.0);
        if (matrix - matrix.transpose()).abs().max() > 1e-12 * scale {
            return Err(ModelError::Unphysical("matrix is not symmetric".into()));
        }
        let sym = 0.5 * (matrix + matrix.transpose());
        let min_eig = SymmetricEigen::new(sym).eigenvalues.min();
        if min_eig <= EIGEN_TOLERANCE {
            return Err(ModelError::Unphysical(format!(
                "smallest eigenvalue {min_eig} is not positive"
            )));
        }
        let state = Self(sym);
        let bound = state.uncertainty_margin();
        if bound < EIGEN_TOLERANCE * scale {
            return Err(ModelError::Unphysical(format!(
                "violates the uncertainty relation (margin {bound})"
            )));
        }
        Ok(state)
    }

    pub fn vacuum() -> Self {
        Self(Matrix4::identity())
    }

    /// Ideal two-mode squeezed vacuum: marginals cosh 2r, amplitude
    /// correlation +sinh 2r, phase correlation −sinh 2r.
    pub fn two_mode_squeezed(squeeze_factor: f64) -> Result<Self> {
        if !(squeeze_factor.is_finite() && squeeze_factor >= 0.0) {
            return Err(ModelError::Domain {
                name: "squeeze_factor",
                value: squeeze_factor,
                reason: "must be finite and non-negative",
            });
        }
        let (ch, sh) = ((2.0 * squeeze_factor).cosh(), (2.0 * squeeze_factor).sinh());
        #[rustfmt::skip]
        let m = Matrix4::new(
            ch, 0.0, sh, 0.0,
            0.0, ch, 0.0, -sh,
            sh, 0.0, ch, 0.0,
            0.0, -sh, 0.0, ch,
        );
        Ok(Self(m))
    }

    /// Equal loss on both modes: η Σ + (1 − η) 𝟙.
    pub fn with_loss(&self, efficiency: f64) -> Result<Self> {
        let eta = check_efficiency(efficiency)?;
        Ok(Self(self.0 * eta + Matrix4::identity() * (1.0 - eta)))
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    /// Smallest eigenvalue of the realified form of Σ + iΩ.
    pub fn uncertainty_margin(&self) -> f64 {
        let mut omega = Matrix4::zeros();
        for k in [0, 2] {
            omega[(k, k + 1)] = 1.0;
            omega[(k + 1, k)] = -1.0;
        }
        let mut big = SMatrix::<f64, 8, 8>::zeros();
        big.fixed_view_mut::<4, 4>(0, 0).copy_from(&self.0);
        big.fixed_view_mut::<4, 4>(4, 4).copy_from(&self.0);
        big.fixed_view_mut::<4, 4>(0, 4).copy_from(&(-omega));
        big.fixed_view_mut::<4, 4>(4, 0).copy_from(&omega);
        SymmetricEigen::new(big).eigenvalues.min()
    }

    pub fn signal_variance(&self, q: Quadrature) -> f64 {
        self.0[(q.signal_index(), q.signal_index())]
    }

    pub fn idler_variance(&self, q: Quadrature) -> f64 {
        self.0[(q.idler_index(), q.idler_index())]
    }

    pub fn cross_covariance(&self, q: Quadrature) -> f64 {
        self.0[(q.signal_index(), q.idler_index())]
    }
}

/// Var(x_s + g·x_i) for the chosen quadrature pair.
pub fn conditional_variance(
    state: &TwoModeCovariance,
    quadrature: Quadrature,
    gain: f64,
) -> Result<f64> {
    let vi = state.idler_variance(quadrature);
    if vi <= 0.0 {
        return Err(ModelError::DegenerateState("idler variance is zero"));
    }
    let vs = state.signal_variance(quadrature);
    let cov = state.cross_covariance(quadrature);
    Ok(vs + 2.0 * gain * cov + gain * gain * vi)
}

/// g* = −Cov(x_s, x_i) / Var(x_i).
pub fn optimal_gain(state: &TwoModeCovariance, quadrature: Quadrature) -> Result<f64> {
    let vi = state.idler_variance(quadrature);
    if vi <= 0.0 {
        return Err(ModelError::DegenerateState("idler variance is zero"));
    }
    Ok(-state.cross_covariance(quadrature) / vi)
}

/// Var(x_s) − Cov²/Var(x_i).
pub fn min_conditional_variance(state: &TwoModeCovariance, quadrature: Quadrature) -> Result<f64> {
    let g = optimal_gain(state, quadrature)?;
    let vs = state.signal_variance(quadrature);
    let cov = state.cross_covariance(quadrature);
    Ok(vs + g * cov)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReidCriterion {
    pub amplitude: f64,
    pub phase: f64,
    pub product: f64,
    pub entangled: bool,
}

/// Product of the two optimally conditioned variances; below 1 certifies
/// EPR entanglement.
pub fn reid_epr_criterion(state: &TwoModeCovariance) -> Result<ReidCriterion> {
    let amplitude = min_conditional_variance(state, Quadrature::Amplitude)?;
    let phase = min_conditional_variance(state, Quadrature::Phase)?;
    let product = amplitude * phase;
    Ok(ReidCriterion {
        amplitude,
        phase,
        product,
        entangled: product < 1.0,
    })
}

/// Summary of conditioning a symmetric two-mode squeezed state with loss η.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EprReport {
    pub squeeze_factor: f64,
    pub efficiency: f64,
    pub marginal_variance: f64,
    pub optimal_gain_amplitude: f64,
    pub optimal_gain_phase: f64,
    pub conditional_variance_amplitude: f64,
    pub conditional_variance_phase: f64,
    pub reid_product: f64,
    pub entangled: bool,
}

pub fn epr_report(squeeze_factor: f64, efficiency: f64) -> Result<EprReport> {
    let state = TwoModeCovariance::two_mode_squeezed(squeeze_factor)?.with_loss(efficiency)?;
    let reid = reid_epr_criterion(&state)?;
    Ok(EprReport {
        squeeze_factor,
        efficiency,
        marginal_variance: state.signal_variance(Quadrature::Amplitude),
        optimal_gain_amplitude: optimal_gain(&state, Quadrature::Amplitude)?,
        optimal_gain_phase: optimal_gain(&state, Quadrature::Phase)?,
        conditional_variance_amplitude: reid.amplitude,
        conditional_variance_phase: reid.phase,
        reid_product: reid.product,
        entangled: reid.entangled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vacuum_is_not_entangled() {
        let v = TwoModeCovariance::vacuum();
        assert_eq!(
            conditional_variance(&v, Quadrature::Phase, 0.0).unwrap(),
            1.0
        );
        let reid = reid_epr_criterion(&v).unwrap();
        assert_eq!(reid.product, 1.0);
        assert!(!reid.entangled);
        assert_eq!(
            TwoModeCovariance::two_mode_squeezed(0.0).unwrap(),
            TwoModeCovariance::vacuum()
        );
    }

    #[test]
    fn ideal_state_conditioning() {
        for r in [0.1, 0.5, 1.0, 1.5] {
            let s = TwoModeCovariance::two_mode_squeezed(r).unwrap();
            for q in [Quadrature::Amplitude, Quadrature::Phase] {
                let marginal = conditional_variance(&s, q, 0.0).unwrap();
                assert_relative_eq!(marginal, (2.0 * r).cosh(), max_relative = 1e-14);
                assert!(marginal > 1.0);
                assert_relative_eq!(
                    min_conditional_variance(&s, q).unwrap(),
                    1.0 / (2.0 * r).cosh(),
                    max_relative = 1e-12
                );
            }
            assert!(optimal_gain(&s, Quadrature::Amplitude).unwrap() < 0.0);
            assert!(optimal_gain(&s, Quadrature::Phase).unwrap() > 0.0);
        }
        let reid = reid_epr_criterion(&TwoModeCovariance::two_mode_squeezed(1.0).unwrap()).unwrap();
        assert_relative_eq!(
            reid.product,
            1.0 / 2f64.cosh().powi(2),
            max_relative = 1e-12
        );
        assert_relative_eq!(reid.product, 0.070651, epsilon = 1e-6);
        assert!(reid.entangled);
    }

    #[test]
    fn optimal_gain_minimizes() {
        let s = TwoModeCovariance::two_mode_squeezed(0.8)
            .unwrap()
            .with_loss(0.7)
            .unwrap();
        let q = Quadrature::Phase;
        let g = optimal_gain(&s, q).unwrap();
        let best = conditional_variance(&s, q, g).unwrap();
        assert_relative_eq!(
            best,
            min_conditional_variance(&s, q).unwrap(),
            max_relative = 1e-14
        );
        for dg in [-0.1, -1e-3, 1e-3, 0.1] {
            assert!(conditional_variance(&s, q, g + dg).unwrap() > best);
        }
    }

    #[test]
    fn small_squeezing_approaches_unity() {
        let mut last = 0.0;
        for r in [0.3, 0.1, 0.01, 1e-4] {
            let p = reid_epr_criterion(&TwoModeCovariance::two_mode_squeezed(r).unwrap())
                .unwrap()
                .product;
            assert!(p < 1.0 && p > last);
            last = p;
        }
        assert!(1.0 - last < 1e-6);
    }

    #[test]
    fn physicality_checks() {
        let s = TwoModeCovariance::two_mode_squeezed(1.2).unwrap();
        assert!(TwoModeCovariance::new(*s.matrix()).is_ok());
        assert!(TwoModeCovariance::new(*s.with_loss(0.3).unwrap().matrix()).is_ok());
        // squeezed below vacuum in both quadratures of one mode
        let bad = Matrix4::from_diagonal(&nalgebra::Vector4::new(0.5, 0.5, 1.0, 1.0));
        assert!(matches!(
            TwoModeCovariance::new(bad),
            Err(ModelError::Unphysical(_))
        ));
        let mut asym = Matrix4::identity();
        asym[(0, 2)] = 0.1;
        assert!(TwoModeCovariance::new(asym).is_err());
        assert!(TwoModeCovariance::two_mode_squeezed(-1.0).is_err());
    }

    #[test]
    fn report_fields() {
        let rep = epr_report(1.0, 1.0).unwrap();
        assert_relative_eq!(rep.conditional_variance_phase, 0.265802, epsilon = 1e-6);
        assert_relative_eq!(rep.marginal_variance, 2f64.cosh(), max_relative = 1e-14);
        assert!(rep.entangled);
        let vac = epr_report(0.0, 0.5).unwrap();
        assert_eq!(vac.reid_product, 1.0);
        assert!(!vac.entangled);
        assert!(epr_report(1.0, 1.2).is_err());
    }
}
