//! The embedded IEEE-24 case: topology, machine fleet, inertia rescaling
//! and the plain-text case format.

use inertia_core::grid::{build_ieee24, parse_case, scale_inertia, write_case};

fn main() -> inertia_core::Result<()> {
    let sys = build_ieee24();
    println!("{} buses, {} branches, {} machines", sys.n_buses(), sys.branches.len(), sys.generators.len());
    let gens: Vec<usize> = sys.generator_buses().iter().map(|&i| sys.buses[i].number).collect();
    println!("generator buses: {gens:?}");
    println!("highest-load bus: {}", sys.buses[sys.highest_load_bus()].number);
    println!("fleet inertia: {:.3} s", sys.h_sys());

    for h in [3.0, 5.5, 8.0] {
        let scaled = scale_inertia(&sys, h)?;
        println!("rescaled to {h} s -> {:.3} s", scaled.h_sys());
    }

    let text = write_case(&sys);
    let back = parse_case(&text)?;
    println!("case file: {} lines, round trip {}", text.lines().count(), if back == sys { "exact" } else { "differs" });
    Ok(())
}
