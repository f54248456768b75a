//! On-disk formats: the model file, campaign directories, and the bundled
//! synthetic amplifier.

mod atomic;
mod fixture;
mod model_file;
mod store;

pub use atomic::{write_atomic, write_dir_atomic};
pub use fixture::{synth_2534, SYNTH_2534_FREQ, SYNTH_2534_ID, SYNTH_2534_TARGET_RMS, SYNTH_2534_VSUP};
pub use model_file::{
    campaign_digest, ModelFile, Provenance, SurfaceEntry, Units, MODEL_FORMAT_VERSION,
};
pub use store::{
    load_campaign, record_file_name, record_from_csv, record_to_csv, save_campaign, Manifest, ManifestRecord, Scaling,
    CAMPAIGN_FORMAT_VERSION, RECORD_HEADER,
};
