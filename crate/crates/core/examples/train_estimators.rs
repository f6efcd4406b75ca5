//! Trains the four families on a reduced sweep and compares them.

use inertia_core::estimators::{evaluate, train, Family, ModelSpec, TrainConfig};
use inertia_core::grid::build_ieee24;
use inertia_core::pipeline::{assemble_dataset, linspace, FeatureId};

fn main() -> inertia_core::Result<()> {
    let sys = build_ieee24();
    let d = assemble_dataset(
        &sys,
        &linspace(3.0, 8.0, 11),
        &linspace(0.001, 0.01, 8),
        &[FeatureId::DeltaOmega, FeatureId::RoCoF],
        [0.0, 1.0],
        None,
        1,
    )?;
    let cfg = TrainConfig { base_lr: 2e-3, momentum: 0.9, max_epochs: 60, lr_patience: 15, seed: 1, ..Default::default() };
    println!("family   ACC     MSE      R2      best epoch");
    for family in Family::ALL {
        let spec = ModelSpec::for_dataset(family, &sys, &d, 1);
        let t = train(&spec, &d, &cfg)?;
        let m = evaluate(&t.model, &d, &d.split.val, 0.5)?;
        println!(
            "{:<8} {:.3}   {:.4}   {:.3}   {}",
            family.name(),
            m.acc,
            m.mse,
            m.r2.unwrap_or(f64::NAN),
            t.best_epoch
        );
    }
    Ok(())
}
