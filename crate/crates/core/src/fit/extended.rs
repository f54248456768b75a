use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::linear::fit_surface_linear;
use super::log_product::fit_log_product;
use super::rapp::{am_am_points, fit_rapp_point, RappFitOptions};
use super::FitReport;
use crate::error::{Error, Result};
use crate::grid::GridMap;
use crate::model::{OperatingPoint, RappParams};
use crate::signal::Campaign;
use crate::surface::{canonical_p_basis, canonical_vsat_basis, ExtendedRappModel, Monomial, ParamSurface};

/// One of the three Rapp parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    Gain,
    Smoothness,
    Vsat,
}

impl Param {
    pub const ALL: [Param; 3] = [Param::Gain, Param::Smoothness, Param::Vsat];

    pub fn name(self) -> &'static str {
        match self {
            Param::Gain => "g",
            Param::Smoothness => "p",
            Param::Vsat => "vsat",
        }
    }

    pub fn of(self, params: &RappParams) -> f64 {
        match self {
            Param::Gain => params.gain,
            Param::Smoothness => params.smoothness,
            Param::Vsat => params.vsat,
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "g" | "gain" => Ok(Param::Gain),
            "p" | "smoothness" => Ok(Param::Smoothness),
            "vsat" | "v_sat" => Ok(Param::Vsat),
            _ => Err(Error::parse("parameter name", format!("unknown parameter {s:?}"))),
        }
    }
}

/// Functional form used for one parameter surface.
#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceForm {
    Polynomial(Vec<Monomial>),
    LogProduct { freq_degree: u32, include_f2: bool },
}

/// Forms for the three surfaces of the extended model.
#[derive(Debug, Clone, PartialEq)]
pub struct FormSpec {
    pub gain: SurfaceForm,
    pub smoothness: SurfaceForm,
    pub vsat: SurfaceForm,
}

impl Default for FormSpec {
    /// Cubic log-product gain, four-term polynomials for smoothness and V_sat.
    fn default() -> Self {
        FormSpec {
            gain: SurfaceForm::LogProduct {
                freq_degree: 3,
                include_f2: true,
            },
            smoothness: SurfaceForm::Polynomial(canonical_p_basis()),
            vsat: SurfaceForm::Polynomial(canonical_vsat_basis()),
        }
    }
}

impl FormSpec {
    pub fn get(&self, param: Param) -> &SurfaceForm {
        match param {
            Param::Gain => &self.gain,
            Param::Smoothness => &self.smoothness,
            Param::Vsat => &self.vsat,
        }
    }
}

pub fn fit_surface(samples: &[(OperatingPoint, f64)], form: &SurfaceForm) -> Result<FitReport<ParamSurface>> {
    match form {
        SurfaceForm::Polynomial(basis) => Ok(fit_surface_linear(samples, basis)?.map(ParamSurface::from)),
        SurfaceForm::LogProduct {
            freq_degree,
            include_f2,
        } => Ok(fit_log_product(samples, *freq_degree, *include_f2)?.map(ParamSurface::from)),
    }
}

/// Stage 1: an independent scalar Rapp fit at every grid point.
///
/// Records are expected to be aligned already. Errors carry the operating
/// point that failed.
pub fn fit_param_map(campaign: &Campaign, opts: &RappFitOptions) -> Result<GridMap<FitReport<RappParams>>> {
    let records: Vec<_> = campaign.iter().collect();
    let reports = records
        .into_par_iter()
        .map(|rec| {
            am_am_points(&rec.input, &rec.output)
                .and_then(|pts| fit_rapp_point(&pts, opts))
                .map_err(|e| Error::at(rec.op, e))
        })
        .collect::<Result<Vec<_>>>()?;
    GridMap::new(campaign.grid().clone(), reports)
}

/// Surface-value fits of the three parameter maps.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceFits {
    pub gain: FitReport<ParamSurface>,
    pub smoothness: FitReport<ParamSurface>,
    pub vsat: FitReport<ParamSurface>,
}

impl SurfaceFits {
    pub fn get(&self, param: Param) -> &FitReport<ParamSurface> {
        match param {
            Param::Gain => &self.gain,
            Param::Smoothness => &self.smoothness,
            Param::Vsat => &self.vsat,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedFit {
    pub model: ExtendedRappModel,
    pub point_fits: GridMap<FitReport<RappParams>>,
    pub surfaces: SurfaceFits,
}

impl ExtendedFit {
    /// Stage-1 parameters per grid point.
    pub fn param_map(&self) -> GridMap<RappParams> {
        self.point_fits.map(|r| r.result)
    }

    pub fn param_values(&self, param: Param) -> GridMap<f64> {
        self.point_fits.map(|r| param.of(&r.result))
    }
}

/// Two-stage fit: per-point scalar fits, then one surface per parameter.
pub fn fit_extended_model(campaign: &Campaign, forms: &FormSpec, opts: &RappFitOptions) -> Result<ExtendedFit> {
    let grid = campaign.grid();
    if grid.vsup().len() < 3 || grid.freq().len() < 3 {
        return Err(Error::DegenerateGrid(format!(
            "extended fit needs at least 3×3 operating points, got {}×{}",
            grid.vsup().len(),
            grid.freq().len()
        )));
    }
    let point_fits = fit_param_map(campaign, opts)?;
    let fit = |param: Param| {
        let samples: Vec<_> = point_fits.iter().map(|(op, r)| (op, param.of(&r.result))).collect();
        fit_surface(&samples, forms.get(param))
    };
    let surfaces = SurfaceFits {
        gain: fit(Param::Gain)?,
        smoothness: fit(Param::Smoothness)?,
        vsat: fit(Param::Vsat)?,
    };
    let model = ExtendedRappModel::new(
        surfaces.gain.result.clone(),
        surfaces.smoothness.result.clone(),
        surfaces.vsat.result.clone(),
    );
    Ok(ExtendedFit {
        model,
        point_fits,
        surfaces,
    })
}
