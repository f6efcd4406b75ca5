//! Greedy forward selection over frequency, RoCoF and voltage channels.

use inertia_core::estimators::{Family, TrainConfig};
use inertia_core::featselect::{greedy_forward, restricting, trace_csv, WrapperConfig};
use inertia_core::grid::build_ieee24;
use inertia_core::pipeline::{assemble_dataset, linspace, FeatureId};

fn main() -> inertia_core::Result<()> {
    let sys = build_ieee24();
    let base = assemble_dataset(&sys, &linspace(3.0, 8.0, 11), &linspace(0.001, 0.01, 6), &FeatureId::ALL, [0.0, 1.0], Some(45.0), 2)?;
    let cfg = WrapperConfig {
        family: Family::Gcn,
        mu: 0.5,
        train: TrainConfig { base_lr: 2e-3, momentum: 0.9, max_epochs: 40, lr_patience: 10, seed: 2, ..Default::default() },
        repeats: 1,
    };
    let factory = restricting(&base);
    let result = greedy_forward(&FeatureId::ALL, &factory, &sys, &cfg)?;
    print!("{}", trace_csv(&result));
    let names: Vec<&str> = result.chosen.iter().map(|f| f.name()).collect();
    println!("chosen: {}", names.join(" + "));
    Ok(())
}
