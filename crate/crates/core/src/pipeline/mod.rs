//! Measurement preprocessing and dataset assembly.

use serde::{Deserialize, Serialize};

mod bundle;
mod dataset;
mod noise;
mod resample;
mod scrub;
mod window;

pub use bundle::{decode_samples, encode_samples, load_dataset, sample_to_csv, save_dataset, MAGIC};
pub use dataset::{
    assemble_dataset, build_dataset, linspace, process_point, simulate_sweep, Dataset, DatasetOptions, Manifest,
    Normalization, Sample, SampleMeta, Split, Sweep, SweepConfig, SweepRecord, SCHEMA_VERSION, TARGET_RATE,
};
pub use noise::{add_noise, empirical_snr_db, signal_power};
pub use resample::downsample;
pub use scrub::{bad_points, scrub_bad_data, MAX_BAD_FRACTION, SPIKE_K};
pub use window::{extract_window, Slab};

/// Candidate measurement channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureId {
    #[serde(rename = "delta_omega")]
    DeltaOmega,
    #[serde(rename = "rocof")]
    RoCoF,
    #[serde(rename = "volt_mag")]
    VoltMag,
}

impl FeatureId {
    pub const ALL: [FeatureId; 3] = [FeatureId::DeltaOmega, FeatureId::RoCoF, FeatureId::VoltMag];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureId::DeltaOmega => "delta_omega",
            FeatureId::RoCoF => "rocof",
            FeatureId::VoltMag => "volt_mag",
        }
    }

    /// Accepts the snake-case name or the short forms `dw`, `rocof`, `v`.
    pub fn parse(s: &str) -> Option<FeatureId> {
        match s.trim().to_ascii_lowercase().as_str() {
            "delta_omega" | "dw" | "deltaomega" => Some(FeatureId::DeltaOmega),
            "rocof" | "dwdt" => Some(FeatureId::RoCoF),
            "volt_mag" | "v" | "voltmag" => Some(FeatureId::VoltMag),
            _ => None,
        }
    }
}
