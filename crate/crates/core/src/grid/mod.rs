//! Static grid description: buses, branches, machines, per-unit bookkeeping,
//! nodal admittance construction and system inertia aggregation.
//!
//! Internal bus indices are 0-based positions in [`PowerSystem::buses`]; the
//! published (1-based) numbering survives in [`Bus::number`] and is what every
//! external file format uses.

mod case_file;
mod rts24;

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use case_file::{parse_case, write_case};
pub use rts24::{build_ieee24, build_ieee24_with, Ieee24Options};

/// Default classical-model damping on machine base.
pub const DEFAULT_DAMPING: f64 = 1.0;
/// Default transient reactance on machine base.
pub const DEFAULT_XD_T: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// External (published) bus number.
    pub number: usize,
    pub base_kv: f64,
    /// Active load, per unit on the system base.
    pub load_p: f64,
    /// Reactive load, per unit on the system base.
    pub load_q: f64,
    pub has_generator: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Internal index of the sending bus.
    pub from_bus: usize,
    /// Internal index of the receiving bus.
    pub to_bus: usize,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance.
    pub b_shunt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    /// Internal bus index.
    pub bus: usize,
    /// Rating in MVA.
    pub s_rated: f64,
    /// Inertia constant in seconds on the machine rating.
    pub h: f64,
    /// Damping, per unit on machine base.
    pub d: f64,
    /// Transient reactance, per unit on machine base.
    pub xd_t: f64,
    /// Mechanical power setpoint, per unit on the system base.
    pub p_set: f64,
}

/// A validated, immutable grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSystem {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    /// System MVA base; also the S_B that normalizes the system inertia constant.
    pub s_base: f64,
    pub f_nominal: f64,
}

impl PowerSystem {
    /// Validates and assembles a system. `has_generator` flags are recomputed
    /// from the generator list.
    pub fn new(
        mut buses: Vec<Bus>,
        branches: Vec<Branch>,
        generators: Vec<Generator>,
        s_base: f64,
        f_nominal: f64,
    ) -> Result<Self> {
        if buses.is_empty() {
            return Err(invalid("system has no buses"));
        }
        if !(s_base > 0.0 && s_base.is_finite()) {
            return Err(invalid(format!("s_base must be positive, got {s_base}")));
        }
        if !(f_nominal > 0.0) {
            return Err(invalid(format!("f_nominal must be positive, got {f_nominal}")));
        }
        let n = buses.len();
        let mut numbers = BTreeSet::new();
        for bus in &buses {
            if !numbers.insert(bus.number) {
                return Err(invalid(format!("duplicate bus number {}", bus.number)));
            }
            if !(bus.base_kv > 0.0) {
                return Err(invalid(format!("bus {}: base_kv must be positive", bus.number)));
            }
            if !bus.load_p.is_finite() || !bus.load_q.is_finite() {
                return Err(invalid(format!("bus {}: non-finite load", bus.number)));
            }
        }
        for (k, br) in branches.iter().enumerate() {
            if br.from_bus >= n || br.to_bus >= n {
                return Err(invalid(format!("branch {k}: bus index out of range")));
            }
            if br.from_bus == br.to_bus {
                return Err(invalid(format!("branch {k}: self loop")));
            }
            if br.x == 0.0 {
                return Err(invalid(format!("branch {k}: zero reactance")));
            }
        }
        for (k, g) in generators.iter().enumerate() {
            if g.bus >= n {
                return Err(invalid(format!("generator {k}: bus index out of range")));
            }
            if !(g.s_rated > 0.0 && g.h > 0.0 && g.d >= 0.0 && g.xd_t > 0.0) {
                return Err(invalid(format!(
                    "generator {k}: requires s_rated > 0, h > 0, d >= 0, xd_t > 0"
                )));
            }
        }
        for bus in &mut buses {
            bus.has_generator = false;
        }
        for g in &generators {
            buses[g.bus].has_generator = true;
        }
        let sys = PowerSystem { buses, branches, generators, s_base, f_nominal };
        if !sys.is_connected() {
            return Err(invalid("branch graph is not connected"));
        }
        Ok(sys)
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// Internal index of the bus with external number `number`.
    pub fn bus_index(&self, number: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.number == number)
    }

    /// Sorted internal indices of buses hosting at least one machine.
    pub fn generator_buses(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.generators.iter().map(|g| g.bus).collect();
        set.into_iter().collect()
    }

    /// Bus with the largest active load (lowest index on ties).
    pub fn highest_load_bus(&self) -> usize {
        let mut best = 0;
        for (i, b) in self.buses.iter().enumerate() {
            if b.load_p > self.buses[best].load_p {
                best = i;
            }
        }
        best
    }

    /// Sorted neighbour lists; parallel branches collapse to one edge.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![BTreeSet::new(); self.n_buses()];
        for br in &self.branches {
            sets[br.from_bus].insert(br.to_bus);
            sets[br.to_bus].insert(br.from_bus);
        }
        sets.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Binary, symmetric, zero-diagonal adjacency matrix (row-major).
    pub fn adjacency(&self) -> Vec<Vec<u8>> {
        let n = self.n_buses();
        let mut a = vec![vec![0u8; n]; n];
        for br in &self.branches {
            a[br.from_bus][br.to_bus] = 1;
            a[br.to_bus][br.from_bus] = 1;
        }
        a
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n_buses();
        let adj = self.neighbors();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Inertia of the full fleet.
    pub fn h_sys(&self) -> f64 {
        let all: Vec<usize> = (0..self.generators.len()).collect();
        system_inertia(self, &all).map(|(_, h)| h).unwrap_or(0.0)
    }
}

/// Rotational kinetic energy ½·J·ω² in joules.
pub fn kinetic_energy(j: f64, omega: f64) -> Result<f64> {
    if !(j > 0.0 && omega > 0.0) {
        return Err(invalid("moment of inertia and speed must be positive"));
    }
    Ok(0.5 * j * omega * omega)
}

/// Inertia constant J·ω²/(2·S) in seconds, with `s_rated` in VA.
pub fn inertia_constant(j: f64, omega: f64, s_rated: f64) -> Result<f64> {
    if !(j > 0.0 && omega > 0.0 && s_rated > 0.0) {
        return Err(invalid("J, omega and rating must be positive"));
    }
    Ok(j * omega * omega / (2.0 * s_rated))
}

/// Stored energy Σ H_i·S_i (MW·s) over `active` machines and the system
/// inertia constant obtained by dividing by `s_base`.
pub fn system_inertia(sys: &PowerSystem, active: &[usize]) -> Result<(f64, f64)> {
    if active.is_empty() {
        return Err(invalid("active generator set is empty"));
    }
    let mut energy = 0.0;
    for &k in active {
        let g = sys
            .generators
            .get(k)
            .ok_or_else(|| invalid(format!("generator index {k} out of range")))?;
        energy += g.h * g.s_rated;
    }
    Ok((energy, energy / sys.s_base))
}

/// Nodal admittance matrix from branch data (loads and machines excluded).
pub fn admittance_matrix(sys: &PowerSystem) -> Result<DMatrix<Complex64>> {
    let n = sys.n_buses();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for br in &sys.branches {
        let z = Complex64::new(br.r, br.x);
        if z.norm() == 0.0 {
            return Err(invalid("zero-impedance branch"));
        }
        let ys = z.inv();
        let half_b = Complex64::new(0.0, br.b_shunt / 2.0);
        let (i, j) = (br.from_bus, br.to_bus);
        y[(i, i)] += ys + half_b;
        y[(j, j)] += ys + half_b;
        y[(i, j)] -= ys;
        y[(j, i)] -= ys;
    }
    Ok(y)
}

/// Copy of `sys` with every machine's H scaled by the same factor so that the
/// fleet inertia equals `h_target`.
pub fn scale_inertia(sys: &PowerSystem, h_target: f64) -> Result<PowerSystem> {
    if !(h_target > 0.0 && h_target.is_finite()) {
        return Err(invalid(format!("target inertia must be positive, got {h_target}")));
    }
    let current = sys.h_sys();
    if current <= 0.0 {
        return Err(invalid("system has no inertia to scale"));
    }
    let factor = h_target / current;
    let mut out = sys.clone();
    for g in &mut out.generators {
        g.h *= factor;
    }
    Ok(out)
}

/// Like [`scale_inertia`] but first perturbs each machine's H by an independent
/// factor drawn from `[1 - spread, 1 + spread]`.
pub fn scale_inertia_heterogeneous(
    sys: &PowerSystem,
    h_target: f64,
    spread: f64,
    seed: u64,
) -> Result<PowerSystem> {
    if !(0.0..1.0).contains(&spread) {
        return Err(invalid(format!("spread must be in [0, 1), got {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perturbed = sys.clone();
    for g in &mut perturbed.generators {
        g.h *= 1.0 + rng.gen_range(-spread..=spread);
    }
    scale_inertia(&perturbed, h_target)
}
