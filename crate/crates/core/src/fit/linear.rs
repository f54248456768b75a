use nalgebra::{DMatrix, DVector};

use super::FitReport;
use crate::error::{Error, Result};
use crate::model::OperatingPoint;
use crate::surface::{canonical_basis, Monomial, PolynomialSurface};

/// Largest accepted 2-norm condition number of the column-scaled design matrix.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub condition: f64,
}

impl LstsqSolution {
    pub fn ssr(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}

/// Least squares `min ‖X c − y‖` through a Householder QR of `X` with every
/// column first scaled to unit RMS.
pub fn lstsq_scaled(design: &DMatrix<f64>, y: &[f64]) -> Result<LstsqSolution> {
    let (n, k) = design.shape();
    if y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if n < k {
        return Err(Error::InsufficientData { needed: k, got: n });
    }
    let mut scaled = design.clone();
    let mut scales = vec![0.0; k];
    for (j, scale) in scales.iter_mut().enumerate() {
        let rms = (scaled.column(j).norm_squared() / n as f64).sqrt();
        if !(rms > 0.0 && rms.is_finite()) {
            return Err(Error::RankDeficient { condition: f64::INFINITY });
        }
        scaled.column_mut(j).scale_mut(1.0 / rms);
        *scale = rms;
    }
    let qr = scaled.clone().qr();
    let r = qr.r();
    let singular = r.singular_values();
    let smax = singular.max();
    let smin = singular.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::RankDeficient { condition });
    }
    let rhs = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &rhs;
    let solved = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient { condition })?;
    let coefficients: Vec<f64> = solved.iter().zip(&scales).map(|(c, s)| c / s).collect();
    let fitted = scaled * solved;
    let residuals = rhs.iter().zip(fitted.iter()).map(|(y, f)| y - f).collect();
    Ok(LstsqSolution {
        coefficients,
        residuals,
        condition,
    })
}

pub(crate) fn design_matrix(samples: &[(OperatingPoint, f64)], basis: &[Monomial]) -> DMatrix<f64> {
    DMatrix::from_fn(samples.len(), basis.len(), |i, j| basis[j].eval(samples[i].0))
}

/// Fits coefficients of a fixed monomial basis to surface samples.
///
/// The reported RMSE is over surface values, `√(Σr²/n)`.
pub fn fit_surface_linear(
    samples: &[(OperatingPoint, f64)],
    basis: &[Monomial],
) -> Result<FitReport<PolynomialSurface>> {
    if basis.is_empty() {
        return Err(Error::Domain("empty basis".into()));
    }
    let basis = canonical_basis(basis.to_vec())?;
    if samples.len() < basis.len() {
        return Err(Error::InsufficientData {
            needed: basis.len(),
            got: samples.len(),
        });
    }
    for (op, v) in samples {
        op.validate()?;
        if !v.is_finite() {
            return Err(Error::Domain(format!("non-finite sample value at {op}")));
        }
    }
    let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let sol = lstsq_scaled(&design_matrix(samples, &basis), &y)?;
    let rmse = (sol.ssr() / samples.len() as f64).sqrt();
    let surface = PolynomialSurface::new(basis.into_iter().zip(sol.coefficients))?;
    Ok(FitReport::direct(surface, rmse))
}
