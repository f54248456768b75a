use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::atomic::write_atomic;
use super::store::record_to_csv;
use crate::error::{Error, Result};
use crate::fit::ExtendedFit;
use crate::signal::Campaign;
use crate::surface::{ExtendedRappModel, LogProductSurface, ParamSurface, PolynomialSurface};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Unit conventions the coefficients assume.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Units {
    pub supply: String,
    pub frequency: String,
    pub log: String,
}

impl Default for Units {
    fn default() -> Self {
        Units {
            supply: "V".into(),
            frequency: "GHz".into(),
            log: "natural".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceEntry {
    #[serde(flatten)]
    pub surface: ParamSurface,
    /// Surface-value RMSE of the fit that produced the coefficients.
    pub fit_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surfaces {
    pub gain: SurfaceEntry,
    pub smoothness: SurfaceEntry,
    pub vsat: SurfaceEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the campaign records the model was fitted to.
    pub campaign_sha256: Option<String>,
    pub created_unix: u64,
    pub tool_version: String,
}

impl Provenance {
    /// Current time, or `SOURCE_DATE_EPOCH` when set, for reproducible output.
    pub fn now(campaign_sha256: Option<String>) -> Self {
        let created_unix = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or_else(|| {
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            });
        Provenance {
            campaign_sha256,
            created_unix,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Serialized extended model. Floats are written in shortest round-trip
/// form, so parsing restores every coefficient bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub amplifier_id: String,
    pub units: Units,
    pub clamp_floor: f64,
    pub surfaces: Surfaces,
    pub provenance: Provenance,
}

fn entry(surface: &ParamSurface, fit_rmse: Option<f64>) -> SurfaceEntry {
    SurfaceEntry {
        surface: surface.clone(),
        fit_rmse,
    }
}

fn validate_surface(surface: &ParamSurface) -> Result<()> {
    match surface {
        ParamSurface::Polynomial { terms } => {
            PolynomialSurface::new(terms.terms().iter().map(|t| (t.monomial, t.coefficient)))?;
        }
        ParamSurface::LogProduct(s) => {
            LogProductSurface::new(s.a, s.freq_coeffs.clone())?;
        }
    }
    Ok(())
}

impl ModelFile {
    pub fn new(amplifier_id: impl Into<String>, model: &ExtendedRappModel, provenance: Provenance) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            amplifier_id: amplifier_id.into(),
            units: Units::default(),
            clamp_floor: model.clamp_floor,
            surfaces: Surfaces {
                gain: entry(&model.gain, None),
                smoothness: entry(&model.smoothness, None),
                vsat: entry(&model.vsat, None),
            },
            provenance,
        }
    }

    pub fn from_fit(campaign: &Campaign, fit: &ExtendedFit) -> Self {
        let mut file = ModelFile::new(
            campaign.amplifier_id.clone(),
            &fit.model,
            Provenance::now(Some(campaign_digest(campaign))),
        );
        file.surfaces.gain.fit_rmse = Some(fit.surfaces.gain.rmse);
        file.surfaces.smoothness.fit_rmse = Some(fit.surfaces.smoothness.rmse);
        file.surfaces.vsat.fit_rmse = Some(fit.surfaces.vsat.rmse);
        file
    }

    pub fn model(&self) -> ExtendedRappModel {
        ExtendedRappModel {
            gain: self.surfaces.gain.surface.clone(),
            smoothness: self.surfaces.smoothness.surface.clone(),
            vsat: self.surfaces.vsat.surface.clone(),
            clamp_floor: self.clamp_floor,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model file serializes");
        s.push('\n');
        s
    }

    /// Parses and validates a model file, checking the format version
    /// before anything else.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::parse("model file", e))?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::parse("model file", "missing format_version"))?;
        if found != MODEL_FORMAT_VERSION as u64 {
            return Err(Error::UnsupportedVersion {
                what: "model file",
                found: found.min(u32::MAX as u64) as u32,
                supported: MODEL_FORMAT_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::parse("model file", e))?;
        if file.units != Units::default() {
            return Err(Error::parse(
                "model file",
                format!("unsupported units {:?}; expected V, GHz, natural log", file.units),
            ));
        }
        if !(file.clamp_floor.is_finite() && file.clamp_floor > 0.0) {
            return Err(Error::parse("model file", "clamp_floor must be positive"));
        }
        for s in [&file.surfaces.gain, &file.surfaces.smoothness, &file.surfaces.vsat] {
            validate_surface(&s.surface).map_err(|e| Error::parse("model file", e))?;
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ModelFile::from_json(&text).map_err(|e| match e {
            Error::Parse { context, message } => Error::Parse {
                context: format!("{} ({context})", path.display()),
                message,
            },
            other => other,
        })
    }
}

/// SHA-256 over the amplifier id and every record in its on-disk CSV form,
/// in grid order.
pub fn campaign_digest(campaign: &Campaign) -> String {
    let mut hasher = Sha256::new();
    hasher.update(campaign.amplifier_id.as_bytes());
    hasher.update([0]);
    for rec in campaign.iter() {
        hasher.update(format!("{:e},{:e}\n", rec.op.vsup, rec.op.freq).as_bytes());
        hasher.update(record_to_csv(rec).as_bytes());
    }
    hex::encode(hasher.finalize())
}
