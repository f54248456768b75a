//! Campaign directories: `manifest.json` plus `records/<cell>.csv`, one CSV
//! per operating point with columns `index,in_re,in_im,out_re,out_im`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::atomic::{write_atomic, write_dir_atomic};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{ComplexSample, OperatingPoint};
use crate::signal::{scale_record, Campaign, Impairments, MeasurementRecord, OfdmConfig};

pub const CAMPAIGN_FORMAT_VERSION: u32 = 1;
pub const RECORD_HEADER: &str = "index,in_re,in_im,out_re,out_im";
const RECORDS_DIR: &str = "records";
const MANIFEST: &str = "manifest.json";

/// Gains applied to the raw captures when a campaign is loaded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub cable_loss_in_db: f64,
    pub cable_loss_out_db: f64,
    pub virtual_gain_db: f64,
}

impl Scaling {
    fn is_identity(&self) -> bool {
        self.cable_loss_in_db == 0.0 && self.cable_loss_out_db == 0.0 && self.virtual_gain_db == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub vsup: f64,
    pub freq: f64,
    pub file: String,
    pub delay: i64,
    pub phase: f64,
    /// `None` for noiseless records.
    pub noise_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub amplifier_id: String,
    pub vsup: Vec<f64>,
    pub freq: Vec<f64>,
    #[serde(default)]
    pub scaling: Scaling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stimulus: Option<OfdmConfig>,
    pub records: Vec<ManifestRecord>,
}

pub fn record_file_name(op: OperatingPoint) -> String {
    format!("v{:.3}_f{:.3}.csv", op.vsup, op.freq)
}

/// Record samples in shortest round-trip exponent notation.
pub fn record_to_csv(record: &MeasurementRecord) -> String {
    let mut out = String::with_capacity(80 * record.len() + 40);
    out.push_str(RECORD_HEADER);
    out.push('\n');
    for (i, (x, y)) in record.input.iter().zip(&record.output).enumerate() {
        let _ = writeln!(out, "{i},{:e},{:e},{:e},{:e}", x.re, x.im, y.re, y.im);
    }
    out
}

/// Parses a record CSV into input and output frames.
pub fn record_from_csv(text: &str, context: &str) -> Result<(Vec<ComplexSample>, Vec<ComplexSample>)> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(RECORD_HEADER) {
        return Err(Error::parse(context, format!("expected header {RECORD_HEADER:?}")));
    }
    let mut input = Vec::new();
    let mut output = Vec::new();
    for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let ctx = || format!("{context} row {}", i + 1);
        let mut fields = line.split(',').map(str::trim);
        let index: usize = fields
            .next()
            .ok_or_else(|| Error::parse(ctx(), "empty row"))?
            .parse()
            .map_err(|e| Error::parse(ctx(), e))?;
        if index != i {
            return Err(Error::parse(ctx(), format!("index {index} out of sequence")));
        }
        let nums = fields
            .map(|f| f.parse::<f64>().map_err(|e| Error::parse(ctx(), e)))
            .collect::<Result<Vec<_>>>()?;
        let [a, b, c, d] = nums[..] else {
            return Err(Error::parse(ctx(), "expected 5 fields"));
        };
        input.push(ComplexSample::new(a, b));
        output.push(ComplexSample::new(c, d));
    }
    Ok((input, output))
}

fn manifest_for(campaign: &Campaign, stimulus: Option<&OfdmConfig>) -> Manifest {
    Manifest {
        format_version: CAMPAIGN_FORMAT_VERSION,
        amplifier_id: campaign.amplifier_id.clone(),
        vsup: campaign.grid().vsup().to_vec(),
        freq: campaign.grid().freq().to_vec(),
        scaling: Scaling::default(),
        stimulus: stimulus.cloned(),
        records: campaign
            .iter()
            .map(|rec| ManifestRecord {
                vsup: rec.op.vsup,
                freq: rec.op.freq,
                file: record_file_name(rec.op),
                delay: rec.meta.delay,
                phase: rec.meta.phase,
                noise_db: (rec.meta.noise_db > f64::NEG_INFINITY).then_some(rec.meta.noise_db),
            })
            .collect(),
    }
}

/// Writes a campaign directory atomically. Records are stored unscaled.
pub fn save_campaign(campaign: &Campaign, dir: &Path, stimulus: Option<&OfdmConfig>, overwrite: bool) -> Result<()> {
    let manifest = manifest_for(campaign, stimulus);
    write_dir_atomic(dir, overwrite, |tmp| {
        let records_dir = tmp.join(RECORDS_DIR);
        fs::create_dir(&records_dir).map_err(|e| Error::io(&records_dir, e))?;
        for (rec, entry) in campaign.iter().zip(&manifest.records) {
            write_atomic(&records_dir.join(&entry.file), record_to_csv(rec).as_bytes())?;
        }
        let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        json.push('\n');
        write_atomic(&tmp.join(MANIFEST), json.as_bytes())
    })
}

/// Loads a campaign directory, applying the manifest's scaling.
///
/// Every grid cell must have exactly one record and the records directory
/// may not contain files the manifest does not list.
pub fn load_campaign(dir: &Path) -> Result<(Campaign, Manifest)> {
    let manifest_path = dir.join(MANIFEST);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let ctx = manifest_path.display().to_string();
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::parse(&ctx, e))?;
    let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0);
    if found != CAMPAIGN_FORMAT_VERSION as u64 {
        return Err(Error::UnsupportedVersion {
            what: "campaign manifest",
            found: found.min(u32::MAX as u64) as u32,
            supported: CAMPAIGN_FORMAT_VERSION,
        });
    }
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::parse(&ctx, e))?;
    for v in [
        manifest.scaling.cable_loss_in_db,
        manifest.scaling.cable_loss_out_db,
        manifest.scaling.virtual_gain_db,
    ] {
        if !v.is_finite() {
            return Err(Error::parse(&ctx, "scaling values must be finite"));
        }
    }
    let grid = Grid::new(manifest.vsup.clone(), manifest.freq.clone())?;

    let mut entries: Vec<Option<&ManifestRecord>> = vec![None; grid.len()];
    for entry in &manifest.records {
        let op = OperatingPoint::new(entry.vsup, entry.freq).map_err(|e| Error::parse(&ctx, e))?;
        let i = grid
            .index_of(op)
            .ok_or_else(|| Error::parse(&ctx, format!("record {op} is not on the grid")))?;
        if entries[i].replace(entry).is_some() {
            return Err(Error::parse(&ctx, format!("duplicate record for {op}")));
        }
    }

    let records_dir = dir.join(RECORDS_DIR);
    let listed: BTreeSet<&str> = manifest.records.iter().map(|r| r.file.as_str()).collect();
    if let Ok(read) = fs::read_dir(&records_dir) {
        for item in read {
            let item = item.map_err(|e| Error::io(&records_dir, e))?;
            let name = item.file_name().to_string_lossy().into_owned();
            if !listed.contains(name.as_str()) {
                return Err(Error::parse(&ctx, format!("record file {name} is not in the manifest")));
            }
        }
    }

    let mut records = Vec::with_capacity(grid.len());
    for (i, entry) in entries.into_iter().enumerate() {
        let op = grid.op(i);
        let entry = entry.ok_or(Error::MissingGridCell(op))?;
        let path = records_dir.join(&entry.file);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::MissingGridCell(op)),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let (input, output) = record_from_csv(&text, &path.display().to_string())?;
        let mut record = MeasurementRecord {
            op,
            input,
            output,
            meta: Impairments {
                noise_db: entry.noise_db.unwrap_or(f64::NEG_INFINITY),
                delay: entry.delay,
                phase: entry.phase,
            },
        };
        if !manifest.scaling.is_identity() {
            let s = manifest.scaling;
            record = scale_record(&record, s.cable_loss_in_db, s.cable_loss_out_db, s.virtual_gain_db)?;
        }
        records.push(record);
    }
    let campaign = Campaign::new(manifest.amplifier_id.clone(), grid, records)?;
    Ok((campaign, manifest))
}
