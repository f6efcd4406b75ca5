//! Classical machine model: constant EMF behind transient reactance, loads as
//! constant impedances, solved algebraically against the nodal network.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{admittance_matrix, PowerSystem};

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Precomputed linear maps from machine EMFs (and a probe current) to bus
/// voltages, plus the equilibrium the run starts from.
#[derive(Debug, Clone)]
pub struct MachineNetwork {
    /// Bus voltages per unit EMF: `V = K·E + z_probe·I_probe`.
    k: DMatrix<Complex64>,
    z_probe: DVector<Complex64>,
    /// Internal admittance 1/(j·xd') on the system base.
    y_int: Vec<Complex64>,
    machine_bus: Vec<usize>,
    /// Distinct machine buses and, per machine, its slot in that list.
    gen_buses: Vec<usize>,
    slot: Vec<usize>,
    /// |E| per machine, fixed in the classical model.
    pub e_mag: Vec<f64>,
    /// Initial rotor angles.
    pub delta0: Vec<f64>,
    /// Mechanical input that balances the initial electrical output.
    pub p_m0: Vec<f64>,
    /// Initial bus voltages.
    pub v0: Vec<Complex64>,
    pub probe_bus: usize,
}

impl MachineNetwork {
    pub fn new(sys: &PowerSystem, probe_bus: usize) -> Result<Self> {
        let n = sys.n_buses();
        if probe_bus >= n {
            return Err(Error::InvalidInput(format!("probe bus index {probe_bus} out of range")));
        }
        let ng = sys.generators.len();
        if ng == 0 {
            return Err(Error::InvalidInput("system has no machines".into()));
        }

        let mut y_aug = admittance_matrix(sys)?;
        for (i, b) in sys.buses.iter().enumerate() {
            // constant impedance drawing (P + jQ) at 1 pu
            y_aug[(i, i)] += Complex64::new(b.load_p, -b.load_q);
        }
        let y_int: Vec<Complex64> = sys
            .generators
            .iter()
            .map(|g| (J * g.xd_t * sys.s_base / g.s_rated).inv())
            .collect();
        for (g, y) in sys.generators.iter().zip(&y_int) {
            y_aug[(g.bus, g.bus)] += *y;
        }
        let z = y_aug.try_inverse().ok_or(Error::SingularNetwork)?;
        if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::SingularNetwork);
        }

        let mut k = DMatrix::from_element(n, ng, Complex64::new(0.0, 0.0));
        for (m, g) in sys.generators.iter().enumerate() {
            for i in 0..n {
                k[(i, m)] = z[(i, g.bus)] * y_int[m];
            }
        }
        let z_probe = z.column(probe_bus).into_owned();
        let machine_bus: Vec<usize> = sys.generators.iter().map(|g| g.bus).collect();
        let gen_buses = sys.generator_buses();
        let slot = machine_bus
            .iter()
            .map(|b| gen_buses.binary_search(b).expect("machine bus is a generator bus"))
            .collect();

        let e0 = initial_emfs(sys, &y_int)?;
        let e_mag: Vec<f64> = e0.iter().map(|e| e.norm()).collect();
        let delta0: Vec<f64> = e0.iter().map(|e| e.arg()).collect();

        let mut net = MachineNetwork {
            k,
            z_probe,
            y_int,
            machine_bus,
            gen_buses,
            slot,
            e_mag,
            delta0,
            p_m0: Vec::new(),
            v0: Vec::new(),
            probe_bus,
        };
        let e = net.emfs(&net.delta0);
        net.v0 = net.bus_voltages(&e, 0.0);
        let mut p_e = vec![0.0; ng];
        net.electrical_power(&net.delta0, 0.0, &mut p_e);
        net.p_m0 = p_e;
        Ok(net)
    }

    pub fn n_machines(&self) -> usize {
        self.y_int.len()
    }

    pub fn emfs(&self, delta: &[f64]) -> Vec<Complex64> {
        delta.iter().zip(&self.e_mag).map(|(&d, &m)| Complex64::from_polar(m, d)).collect()
    }

    fn row_product(&self, bus: usize, e: &[Complex64]) -> Complex64 {
        e.iter().enumerate().map(|(m, em)| self.k[(bus, m)] * em).sum()
    }

    /// Current that draws active power `p` at the probe bus, referenced to the
    /// voltage the machines alone would impose there.
    pub fn probe_current(&self, e: &[Complex64], p: f64) -> Complex64 {
        if p == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        -p / self.row_product(self.probe_bus, e).conj()
    }

    /// Bus voltages for EMFs `e` with a deficit `p` drawn at the probe bus.
    pub fn bus_voltages(&self, e: &[Complex64], p: f64) -> Vec<Complex64> {
        let i_probe = self.probe_current(e, p);
        (0..self.k.nrows()).map(|i| self.row_product(i, e) + self.z_probe[i] * i_probe).collect()
    }

    /// Electrical power delivered by each machine at rotor angles `delta`.
    pub fn electrical_power(&self, delta: &[f64], p: f64, out: &mut [f64]) {
        let e = self.emfs(delta);
        let i_probe = self.probe_current(&e, p);
        let v: Vec<Complex64> = self
            .gen_buses
            .iter()
            .map(|&b| self.row_product(b, &e) + self.z_probe[b] * i_probe)
            .collect();
        for (m, out) in out.iter_mut().enumerate() {
            let i = self.y_int[m] * (e[m] - v[self.slot[m]]);
            *out = (e[m] * i.conj()).re;
        }
    }

    /// Machine-to-machine admittance after eliminating every bus
    /// (no probe current).
    pub fn reduced_admittance(&self) -> DMatrix<Complex64> {
        let ng = self.n_machines();
        DMatrix::from_fn(ng, ng, |m, q| {
            let direct = if m == q { self.y_int[m] } else { Complex64::new(0.0, 0.0) };
            direct - self.y_int[m] * self.k[(self.machine_bus[m], q)]
        })
    }

    /// Time derivative of each bus angle divided by ω_n, given machine speed
    /// deviations `w` and bus voltages `v` solved with deficit `p`.
    pub fn bus_frequency(&self, e: &[Complex64], w: &[f64], p: f64, v: &[Complex64]) -> Vec<f64> {
        // dV/dt = j·ω_n·(K·(w∘E) + z_probe·I·conj(S_p/Vn_p)), where Vn_p is the
        // machine-only voltage at the probe bus and S_p its own K·(w∘E) row.
        let weighted: Vec<Complex64> = e.iter().zip(w).map(|(em, wm)| em * wm).collect();
        let i_probe = self.probe_current(e, p);
        let probe_term = if p == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            let vn = self.row_product(self.probe_bus, e);
            let sp = self.row_product(self.probe_bus, &weighted);
            i_probe * (sp / vn).conj()
        };
        (0..self.k.nrows())
            .map(|i| {
                let num = self.row_product(i, &weighted) + self.z_probe[i] * probe_term;
                (num / v[i]).re
            })
            .collect()
    }
}

/// EMFs from a flat-magnitude DC power-flow estimate of the operating point.
fn initial_emfs(sys: &PowerSystem, y_int: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = sys.n_buses();
    let total_load: f64 = sys.buses.iter().map(|b| b.load_p).sum();
    let total_gen: f64 = sys.generators.iter().map(|g| g.p_set).sum();
    let dispatch = if total_gen > 0.0 { total_load / total_gen } else { 0.0 };

    let mut inj = vec![0.0; n];
    for (i, b) in sys.buses.iter().enumerate() {
        inj[i] -= b.load_p;
    }
    for g in &sys.generators {
        inj[g.bus] += g.p_set * dispatch;
    }

    // Reference: the bus with the largest installed rating.
    let mut rating = vec![0.0; n];
    for g in &sys.generators {
        rating[g.bus] += g.s_rated;
    }
    let slack = (0..n).fold(0, |best, i| if rating[i] > rating[best] { i } else { best });

    let mut bmat = DMatrix::<f64>::zeros(n, n);
    for br in &sys.branches {
        let b = 1.0 / br.x;
        let (i, j) = (br.from_bus, br.to_bus);
        bmat[(i, i)] += b;
        bmat[(j, j)] += b;
        bmat[(i, j)] -= b;
        bmat[(j, i)] -= b;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let reduced = DMatrix::from_fn(keep.len(), keep.len(), |a, b| bmat[(keep[a], keep[b])]);
    let rhs = DVector::from_iterator(keep.len(), keep.iter().map(|&i| inj[i]));
    let theta_red = reduced.lu().solve(&rhs).ok_or(Error::SingularNetwork)?;
    let mut theta = vec![0.0; n];
    for (a, &i) in keep.iter().enumerate() {
        theta[i] = theta_red[a];
    }

    // Reactive demand net of line charging, shared by rating.
    let q_demand: f64 = sys.buses.iter().map(|b| b.load_q).sum::<f64>()
        - sys.branches.iter().map(|br| br.b_shunt).sum::<f64>();
    let total_rating: f64 = sys.generators.iter().map(|g| g.s_rated).sum();

    Ok(sys
        .generators
        .iter()
        .zip(y_int)
        .map(|(g, y)| {
            let v = Complex64::from_polar(1.0, theta[g.bus]);
            let s = Complex64::new(g.p_set * dispatch, q_demand * g.s_rated / total_rating);
            let i = (s / v).conj();
            v + i / y
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_ieee24, Branch, Bus, Generator};

    #[test]
    fn equilibrium_balances_power() {
        let sys = build_ieee24();
        let net = MachineNetwork::new(&sys, 0).unwrap();
        let mut p = vec![0.0; net.n_machines()];
        net.electrical_power(&net.delta0, 0.0, &mut p);
        for (a, b) in p.iter().zip(&net.p_m0) {
            assert_eq!(a, b);
        }
        for v in &net.v0 {
            assert!((0.85..1.2).contains(&v.norm()), "|V| = {}", v.norm());
        }
    }

    #[test]
    fn reduced_admittance_reproduces_power() {
        let sys = build_ieee24();
        let net = MachineNetwork::new(&sys, 3).unwrap();
        let y = net.reduced_admittance();
        let delta: Vec<f64> = net.delta0.iter().enumerate().map(|(i, d)| d + 0.01 * i as f64).collect();
        let e = net.emfs(&delta);
        let mut p = vec![0.0; net.n_machines()];
        net.electrical_power(&delta, 0.0, &mut p);
        for m in 0..net.n_machines() {
            let i: Complex64 = (0..net.n_machines()).map(|q| y[(m, q)] * e[q]).sum();
            assert!(((e[m] * i.conj()).re - p[m]).abs() < 1e-9);
        }
    }

    #[test]
    fn bus_frequency_is_the_angle_derivative() {
        let sys = build_ieee24();
        let net = MachineNetwork::new(&sys, 17).unwrap();
        let ng = net.n_machines();
        let w: Vec<f64> = (0..ng).map(|i| 1e-3 * ((i as f64) * 0.7).sin()).collect();
        let p = 0.004;
        let e = net.emfs(&net.delta0);
        let v = net.bus_voltages(&e, p);
        let analytic = net.bus_frequency(&e, &w, p, &v);
        // Advance the angles by dδ = w·h in both directions.
        let h = 1e-4;
        let shifted = |sign: f64| {
            let d: Vec<f64> = net.delta0.iter().zip(&w).map(|(d, wi)| d + sign * h * wi).collect();
            net.bus_voltages(&net.emfs(&d), p)
        };
        let (vp, vm) = (shifted(1.0), shifted(-1.0));
        for i in 0..sys.n_buses() {
            let numeric = (vp[i] / vm[i]).arg() / (2.0 * h);
            assert!((numeric - analytic[i]).abs() < 1e-9, "bus {i}: {numeric} vs {}", analytic[i]);
        }
    }

    /// Three machines on a lossless, load-free ring, perturbed from
    /// equilibrium, integrated with zero damping and no governor.
    #[test]
    fn lossless_energy_is_conserved() {
        let bus = |number| Bus { number, base_kv: 230.0, load_p: 0.0, load_q: 0.0, has_generator: false };
        let line = |f, t| Branch { from_bus: f, to_bus: t, r: 0.0, x: 0.2, b_shunt: 0.0 };
        let gen = |b, h, p| Generator { bus: b, s_rated: 100.0, h, d: 0.0, xd_t: 0.3, p_set: p };
        let sys = PowerSystem::new(
            vec![bus(1), bus(2), bus(3)],
            vec![line(0, 1), line(1, 2), line(0, 2)],
            vec![gen(0, 4.0, 0.5), gen(1, 6.0, -0.2), gen(2, 3.0, -0.3)],
            300.0,
            60.0,
        )
        .unwrap();
        let net = MachineNetwork::new(&sys, 0).unwrap();
        let y = net.reduced_admittance();
        let ng = 3;
        let m: Vec<f64> = sys.generators.iter().map(|g| 2.0 * g.h * g.s_rated / sys.s_base).collect();
        let wn = 2.0 * std::f64::consts::PI * sys.f_nominal;

        let energy = |delta: &[f64], w: &[f64]| {
            let mut ke = 0.0;
            let mut pe = 0.0;
            for i in 0..ng {
                ke += 0.5 * m[i] * wn * w[i] * w[i];
                pe -= net.p_m0[i] * delta[i];
                for j in (i + 1)..ng {
                    pe -= net.e_mag[i] * net.e_mag[j] * y[(i, j)].im * (delta[i] - delta[j]).cos();
                }
            }
            ke + pe
        };

        let mut state: Vec<f64> = net.delta0.clone();
        state[0] += 0.05;
        state.extend(std::iter::repeat_n(0.0, ng));
        let rhs = |s: &[f64], out: &mut [f64]| {
            let mut p = vec![0.0; ng];
            net.electrical_power(&s[..ng], 0.0, &mut p);
            for i in 0..ng {
                out[i] = wn * s[ng + i];
                out[ng + i] = (net.p_m0[i] - p[i]) / m[i];
            }
        };
        let dt = 1e-3;
        let e_start = energy(&state[..ng], &state[ng..]);
        let kinetic_scale = {
            // energy swing amplitude sets the scale for the relative drift
            let mut s = state.clone();
            let mut max_ke: f64 = 0.0;
            for _ in 0..1000 {
                super::super::rk4_step(&mut s, dt, &rhs);
                let ke: f64 = (0..ng).map(|i| 0.5 * m[i] * wn * s[ng + i] * s[ng + i]).sum();
                max_ke = max_ke.max(ke);
            }
            state = s;
            max_ke
        };
        let e_end = energy(&state[..ng], &state[ng..]);
        assert!(kinetic_scale > 0.0);
        let drift = (e_end - e_start).abs() / kinetic_scale;
        assert!(drift < 1e-3, "relative drift {drift:e} over 1 s");
    }
}
