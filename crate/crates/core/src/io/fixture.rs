use super::model_file::ModelFile;

pub const SYNTH_2534_ID: &str = "SYNTH-2534";
/// Supply-voltage axis of the bundled synthetic amplifier, volts.
pub const SYNTH_2534_VSUP: &str = "2.4:0.2:5.0";
/// Frequency axis of the bundled synthetic amplifier, GHz.
pub const SYNTH_2534_FREQ: &str = "0.5:0.5:2.5";
/// Stimulus RMS that drives the synthetic amplifier into compression
/// across the grid, volts.
pub const SYNTH_2534_TARGET_RMS: f64 = 0.2;

const SYNTH_2534_JSON: &str = include_str!("../../fixtures/synth-2534.json");

/// Ground-truth model of the bundled synthetic amplifier.
///
/// Over its grid the smoothness stays within (0.5, 3], V_sat varies by
/// more than a factor of two, and gain rises with supply voltage at every
/// frequency.
pub fn synth_2534() -> ModelFile {
    ModelFile::from_json(SYNTH_2534_JSON).expect("bundled fixture parses")
}
