//! Budgeted PMU placement on IEEE-24 with ZGIB virtual edges, checked
//! against exhaustive enumeration.

use inertia_core::grid::build_ieee24;
use inertia_core::opp::{brute_force_opp, detect_zgib, observability, solve_opp, Objective, Placement, Topology, ZgibMode};

fn main() -> inertia_core::Result<()> {
    let topo = Topology::from_system(&build_ieee24());
    let zgib = detect_zgib(&topo, ZgibMode::NeighborPairs);
    let reference: [&[usize]; 4] = [&[2, 16], &[2, 16, 21], &[2, 16, 21, 23], &[2, 13, 16, 21, 23]];
    println!("budget  solver buses          score  reference score  exhaustive agrees");
    for (budget, refset) in (2..=5).zip(reference) {
        let (p, r) = solve_opp(&topo, budget, Some(ZgibMode::NeighborPairs), Objective::MaxObservability)?;
        let idx: Vec<usize> = refset.iter().map(|&b| b - 1).collect();
        let ref_score = observability(&Placement::from_buses(topo.n(), &idx, budget)?, &topo, Some(&zgib))?.score;
        let agrees = brute_force_opp(&topo, budget, Some(ZgibMode::NeighborPairs))? == p;
        let buses: Vec<usize> = p.buses().iter().map(|&i| topo.labels[i]).collect();
        println!("{budget:>6}  {:<22} {:>5}  {:>15}  {agrees}", format!("{buses:?}"), r.score, ref_score);
    }
    let (full, _) = solve_opp(&topo, 0, Some(ZgibMode::NeighborPairs), Objective::MinPmusFull)?;
    let buses: Vec<usize> = full.buses().iter().map(|&i| topo.labels[i]).collect();
    println!("full observability needs {} PMUs: {buses:?}", full.count());
    Ok(())
}
