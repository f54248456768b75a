use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::measure::{align, simulate_measurement, Impairments, MeasurementRecord};
use super::ofdm::{generate_ofdm, OfdmConfig};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridMap};
use crate::model::OperatingPoint;
use crate::surface::ExtendedRappModel;

/// Measurement records covering a full characterization grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub amplifier_id: String,
    records: GridMap<MeasurementRecord>,
}

impl Campaign {
    /// Every record's operating point must match its grid cell.
    pub fn new(amplifier_id: impl Into<String>, grid: Grid, records: Vec<MeasurementRecord>) -> Result<Self> {
        let records = GridMap::new(grid, records)?;
        for (op, rec) in records.iter() {
            if records.grid().index_of(rec.op) != records.grid().index_of(op) {
                return Err(Error::Domain(format!(
                    "record for {} stored in grid cell {op}",
                    rec.op
                )));
            }
            if rec.input.len() != rec.output.len() {
                return Err(Error::at(
                    op,
                    Error::LengthMismatch {
                        left: rec.input.len(),
                        right: rec.output.len(),
                    },
                ));
            }
        }
        Ok(Campaign {
            amplifier_id: amplifier_id.into(),
            records,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.records.grid()
    }

    pub fn records(&self) -> &GridMap<MeasurementRecord> {
        &self.records
    }

    pub fn get(&self, op: OperatingPoint) -> Option<&MeasurementRecord> {
        self.records.get(op)
    }

    pub fn iter(&self) -> impl Iterator<Item = &MeasurementRecord> + '_ {
        self.records.values().iter()
    }
}

/// Random impairments applied independently at every grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpairmentSpec {
    /// Noise relative to the clean output power, dB; `-inf` for none.
    pub noise_db: f64,
    /// Delays are drawn uniformly from `[-max_delay, max_delay]`.
    pub max_delay: u32,
    /// Draw a uniform phase in `[-π, π)` per point instead of zero.
    pub random_phase: bool,
    pub seed: u64,
}

impl Default for ImpairmentSpec {
    fn default() -> Self {
        ImpairmentSpec {
            noise_db: -45.0,
            max_delay: 64,
            random_phase: true,
            seed: 0,
        }
    }
}

impl ImpairmentSpec {
    pub const NONE: ImpairmentSpec = ImpairmentSpec {
        noise_db: f64::NEG_INFINITY,
        max_delay: 0,
        random_phase: false,
        seed: 0,
    };
}

/// SplitMix64 finalizer, used to derive well-separated per-point seeds.
fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulates one measurement per grid point with the same stimulus frame.
///
/// Point `i` draws its delay, phase and noise from a generator seeded by
/// mixing `impairments.seed` with `i`, so results do not depend on the
/// order in which points are evaluated.
pub fn synth_campaign(
    amplifier_id: &str,
    truth: &ExtendedRappModel,
    grid: &Grid,
    stimulus: &OfdmConfig,
    impairments: &ImpairmentSpec,
) -> Result<Campaign> {
    if grid.is_empty() {
        return Err(Error::DegenerateGrid("empty grid".into()));
    }
    let frame = generate_ofdm(stimulus)?;
    let max_delay = impairments.max_delay as i64;
    if max_delay >= frame.len() as i64 / 2 {
        return Err(Error::Domain(format!(
            "max delay {max_delay} must be under half the frame length {}",
            frame.len()
        )));
    }
    let records = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let op = grid.op(i);
            let mut rng = ChaCha8Rng::seed_from_u64(mix(impairments.seed, i as u64));
            let delay = rng.random_range(-max_delay..=max_delay);
            let phase = if impairments.random_phase {
                rng.random_range(-PI..PI)
            } else {
                0.0
            };
            let noise_seed = rng.random::<u64>();
            let imp = Impairments {
                noise_db: impairments.noise_db,
                delay,
                phase,
            };
            simulate_measurement(truth, op, &frame, &imp, noise_seed).map_err(|e| Error::at(op, e))
        })
        .collect::<Result<Vec<_>>>()?;
    Campaign::new(amplifier_id, grid.clone(), records)
}

/// Aligns every record of a campaign.
pub fn align_campaign(campaign: &Campaign) -> Result<Campaign> {
    let records = campaign
        .iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|rec| align(rec).map_err(|e| Error::at(rec.op, e)))
        .collect::<Result<Vec<_>>>()?;
    Campaign::new(campaign.amplifier_id.clone(), campaign.grid().clone(), records)
}
