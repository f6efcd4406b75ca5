//! Step probe at the highest-load bus: lower inertia gives a steeper
//! initial frequency decline.

use inertia_core::grid::{build_ieee24, scale_inertia};
use inertia_core::sim::{simulate, ProbingSignal, SimConfig};

fn main() -> inertia_core::Result<()> {
    let base = build_ieee24();
    let bus = base.highest_load_bus();
    let probe = ProbingSignal::step(0.01, bus);
    println!("probe 0.01 pu at bus {}", base.buses[bus].number);
    println!("   H (s)   peak |RoCoF| (pu/s)   min dw (pu)");
    for h in [3.0, 4.0, 5.0, 6.0, 7.0, 8.0] {
        let sys = scale_inertia(&base, h)?;
        let trace = simulate(&sys, &probe, &SimConfig::default())?;
        let peak = trace.rocof[bus].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let nadir = trace.delta_omega[bus].iter().fold(f64::INFINITY, |m, &v| m.min(v));
        println!("{h:>8.1}   {peak:>19.3e}   {nadir:>11.3e}");
    }
    Ok(())
}
