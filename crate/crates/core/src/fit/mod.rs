//! Least-squares machinery: per-point scalar Rapp fits, polynomial and
//! log-product surface fits, and the two-stage extended-model fit.

mod extended;
mod linear;
mod log_product;
mod rapp;

pub use extended::{
    fit_extended_model, fit_param_map, fit_surface, ExtendedFit, FormSpec, Param, SurfaceFits,
    SurfaceForm,
};
pub use linear::{fit_surface_linear, lstsq_scaled, LstsqSolution, MAX_CONDITION};
pub use log_product::{fit_log_product, A_SCAN_RANGE, A_TOLERANCE};
pub use rapp::{am_am_points, amplitude_log_gradient, fit_rapp_point, AmAmPoint, RappFitOptions};

/// Which quantity an RMSE is measured over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmseKind {
    /// AM/AM output amplitude, volts.
    Amplitude,
    /// Surface value, in units of the fitted parameter.
    Surface,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport<T> {
    pub result: T,
    pub rmse: f64,
    pub rmse_kind: RmseKind,
    /// Accepted solver steps; 0 for direct (non-iterative) solves.
    pub iterations: usize,
    pub converged: bool,
    /// Residual 2-norm after each accepted step, starting with the initial guess.
    pub residual_norm_history: Vec<f64>,
}

impl<T> FitReport<T> {
    pub(crate) fn direct(result: T, rmse: f64) -> Self {
        FitReport {
            result,
            rmse,
            rmse_kind: RmseKind::Surface,
            iterations: 0,
            converged: true,
            residual_norm_history: Vec::new(),
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> FitReport<U> {
        FitReport {
            result: f(self.result),
            rmse: self.rmse,
            rmse_kind: self.rmse_kind,
            iterations: self.iterations,
            converged: self.converged,
            residual_norm_history: self.residual_norm_history,
        }
    }
}
