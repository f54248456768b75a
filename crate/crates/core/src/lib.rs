//! Behavioral modeling of RF power amplifiers with an extended Rapp model
//! whose gain, smoothness and saturation voltage are surfaces over supply
//! voltage and carrier frequency.

pub mod error;
pub mod fit;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod model;
pub mod select;
pub mod signal;
pub mod surface;

pub use error::{Error, Result};
pub use model::{am_am_curve, apply_to_frame, rapp_eval, ComplexSample, OperatingPoint, RappParams};
pub use surface::{
    extended_eval, extended_params, surface_eval, ExtendedRappModel, LogProductSurface, Monomial,
    ParamSurface, PolynomialSurface,
};
pub use fit::{fit_extended_model, ExtendedFit, FitReport, FormSpec, Param};
pub use grid::{Grid, GridMap};
pub use signal::{Campaign, MeasurementRecord};
