//! AM/AM error scores and the basic / extended / frequency-blind comparison.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::{fit_surface_linear, Param};
use crate::grid::{map_from_rows, GridMap};
use crate::model::{OperatingPoint, RappParams};
use crate::signal::{Campaign, MeasurementRecord};
use crate::surface::{ExtendedRappModel, Monomial, ParamSurface};

pub const NORMALIZATION: &str = "rms-of-measured";
pub const AGGREGATION: &str = "uniform-mean";

fn check_pair(pred: &[f64], actual: &[f64]) -> Result<()> {
    if pred.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: actual.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyFrame);
    }
    Ok(())
}

/// `√(Σ(pred − actual)² / n)`.
pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_pair(pred, actual)?;
    let ss: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((ss / pred.len() as f64).sqrt())
}

/// RMSE normalized by the RMS of the measured amplitudes.
pub fn nrmse_amam(pred: &[f64], measured: &[f64]) -> Result<f64> {
    check_pair(pred, measured)?;
    let norm = (measured.iter().map(|m| m * m).sum::<f64>() / measured.len() as f64).sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroFrame);
    }
    Ok(rmse(pred, measured)? / norm)
}

/// A model to score against a campaign.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelVariant {
    /// Independent scalar parameters at every grid point.
    Basic(GridMap<RappParams>),
    Extended(ExtendedRappModel),
    /// Surfaces of supply voltage only, fitted on one frequency slice.
    ExtendedNoFreq { model: ExtendedRappModel, ref_freq: f64 },
}

impl ModelVariant {
    pub fn name(&self) -> &'static str {
        match self {
            ModelVariant::Basic(_) => "basic",
            ModelVariant::Extended(_) => "extended",
            ModelVariant::ExtendedNoFreq { .. } => "extended_no_freq",
        }
    }

    pub fn params_at(&self, op: OperatingPoint) -> Result<RappParams> {
        match self {
            ModelVariant::Basic(map) => map.get(op).copied().ok_or(Error::MissingGridCell(op)),
            ModelVariant::Extended(model) | ModelVariant::ExtendedNoFreq { model, .. } => {
                Ok(model.params_at(op)?.params)
            }
        }
    }

    /// Frequency-blind model from a stage-1 parameter map.
    ///
    /// Uses the grid frequency nearest `ref_freq` (default: the median grid
    /// frequency) and fits each parameter along that slice with a polynomial
    /// in supply voltage of degree up to 3.
    pub fn no_freq_from_map(map: &GridMap<RappParams>, ref_freq: Option<f64>) -> Result<ModelVariant> {
        let grid = map.grid();
        let ref_freq = grid.freq()[grid.nearest_freq_index(ref_freq.unwrap_or_else(|| grid.median_freq()))];
        let slice: Vec<(OperatingPoint, RappParams)> = grid
            .vsup()
            .iter()
            .map(|&v| {
                let op = OperatingPoint { vsup: v, freq: ref_freq };
                (op, *map.get(op).expect("op on grid"))
            })
            .collect();
        let degree = (slice.len() as u32).saturating_sub(1).min(3);
        let basis: Vec<Monomial> = (0..=degree).map(|k| Monomial::new(k, 0)).collect();
        let fit = |param: Param| -> Result<ParamSurface> {
            let samples: Vec<_> = slice.iter().map(|(op, p)| (*op, param.of(p))).collect();
            Ok(fit_surface_linear(&samples, &basis)?.result.into())
        };
        let model = ExtendedRappModel::new(fit(Param::Gain)?, fit(Param::Smoothness)?, fit(Param::Vsat)?);
        Ok(ModelVariant::ExtendedNoFreq { model, ref_freq })
    }
}

/// Predicted and measured output amplitudes for one record.
pub fn amam_pairs(params: &RappParams, record: &MeasurementRecord) -> (Vec<f64>, Vec<f64>) {
    record
        .input
        .iter()
        .zip(&record.output)
        .map(|(x, y)| (params.amplitude(x.norm()), y.norm()))
        .unzip()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantScore {
    pub name: String,
    pub mean_nrmse: f64,
    pub per_point: GridMap<f64>,
    pub ref_freq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub variants: Vec<VariantScore>,
    pub normalization: &'static str,
    pub aggregation: &'static str,
}

impl ComparisonReport {
    pub fn get(&self, name: &str) -> Option<&VariantScore> {
        self.variants.iter().find(|v| v.name == name)
    }
}

/// AM/AM NRMSE of every variant at every grid point, and its grid mean.
pub fn compare_variants(campaign: &Campaign, variants: &[ModelVariant]) -> Result<ComparisonReport> {
    let records: Vec<&MeasurementRecord> = campaign.iter().collect();
    let scores = variants
        .iter()
        .map(|variant| {
            let values = records
                .par_iter()
                .map(|rec| {
                    let params = variant.params_at(rec.op)?;
                    let (pred, measured) = amam_pairs(&params, rec);
                    nrmse_amam(&pred, &measured)
                })
                .collect::<Result<Vec<f64>>>()?;
            let per_point = GridMap::new(campaign.grid().clone(), values)?;
            Ok(VariantScore {
                name: variant.name().to_string(),
                mean_nrmse: per_point.mean(),
                per_point,
                ref_freq: match variant {
                    ModelVariant::ExtendedNoFreq { ref_freq, .. } => Some(*ref_freq),
                    _ => None,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonReport {
        variants: scores,
        normalization: NORMALIZATION,
        aggregation: AGGREGATION,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapRow {
    pub vsup: f64,
    pub freq: f64,
    pub value: f64,
}

/// One row per grid cell, vsup outer and freq inner.
pub fn export_heatmap(map: &GridMap<f64>) -> Vec<HeatmapRow> {
    map.iter()
        .map(|(op, &value)| HeatmapRow {
            vsup: op.vsup,
            freq: op.freq,
            value,
        })
        .collect()
}

pub const HEATMAP_HEADER: &str = "vsup,freq,value";

/// Fixed-point CSV: 3 decimals for the axes, 12 for values.
pub fn heatmap_to_csv(rows: &[HeatmapRow]) -> String {
    let mut out = String::from(HEATMAP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{:.3},{:.3},{:.12}", r.vsup, r.freq, r.value);
    }
    out
}

/// Parses a heatmap CSV back into a full grid map.
pub fn heatmap_from_csv(text: &str) -> Result<GridMap<f64>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == HEATMAP_HEADER => {}
        other => {
            return Err(Error::parse(
                "heatmap csv",
                format!("expected header {HEATMAP_HEADER:?}, got {other:?}"),
            ))
        }
    }
    let rows = lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let ctx = format!("heatmap csv line {}", i + 2);
            let nums = line
                .split(',')
                .map(|f| f.trim().parse::<f64>().map_err(|e| Error::parse(&ctx, e)))
                .collect::<Result<Vec<_>>>()?;
            let [vsup, freq, value] = nums[..] else {
                return Err(Error::parse(ctx, "expected 3 fields"));
            };
            Ok((OperatingPoint::new(vsup, freq).map_err(|e| Error::parse(&ctx, e))?, value))
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::parse("heatmap csv", "no rows"));
    }
    map_from_rows(&rows)
}

/// Sample-by-sample AM/AM data at one operating point: input amplitude,
/// measured output amplitude, and each variant's predicted amplitude.
/// Rows are sorted by input amplitude.
pub fn amam_overlay(record: &MeasurementRecord, variants: &[ModelVariant]) -> Result<Vec<(f64, f64, Vec<f64>)>> {
    let params = variants
        .iter()
        .map(|v| v.params_at(record.op))
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<(f64, f64, Vec<f64>)> = record
        .input
        .iter()
        .zip(&record.output)
        .map(|(x, y)| {
            let a = x.norm();
            (a, y.norm(), params.iter().map(|p| p.amplitude(a)).collect())
        })
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(rows)
}
