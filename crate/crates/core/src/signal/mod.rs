//! OFDM stimulus, the synthetic measurement rig, and record conditioning.

mod campaign;
mod measure;
mod ofdm;

pub use campaign::{align_campaign, synth_campaign, Campaign, ImpairmentSpec};
pub use measure::{
    align, circular_shift, estimate_alignment, scale_record, simulate_measurement, Alignment, Impairments,
    MeasurementRecord,
};
pub use ofdm::{generate_ofdm, papr, OfdmConfig};
