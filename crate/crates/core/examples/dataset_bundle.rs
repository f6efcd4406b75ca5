//! Builds a small noisy dataset, writes it as a bundle and reads it back.

use inertia_core::grid::build_ieee24;
use inertia_core::pipeline::{assemble_dataset, linspace, load_dataset, sample_to_csv, save_dataset, FeatureId};

fn main() -> inertia_core::Result<()> {
    let sys = build_ieee24();
    let h = linspace(3.0, 8.0, 6);
    let pe = linspace(0.001, 0.01, 5);
    let features = [FeatureId::DeltaOmega, FeatureId::RoCoF];
    let d = assemble_dataset(&sys, &h, &pe, &features, [0.0, 1.0], Some(45.0), 7)?;
    println!("{} samples of shape {:?}, split {}/{}", d.samples.len(), d.shape(), d.split.train.len(), d.split.val.len());

    let dir = std::env::temp_dir().join("inertia-dataset-example");
    save_dataset(&d, &dir)?;
    let back = load_dataset(&dir)?;
    println!("bundle at {} reloads {}", dir.display(), if back == d { "identically" } else { "with differences" });
    println!("manifest: buses {:?}, snr {:?} dB", back.manifest.bus_numbers, back.manifest.snr_db);

    let csv = sample_to_csv(&back, 0);
    for line in csv.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
