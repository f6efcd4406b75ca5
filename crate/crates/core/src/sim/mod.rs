//! Multi-machine swing dynamics under a probing injection, and synthesis of
//! per-bus measurement streams.
//!
//! Each machine obeys `m·Δω̇ + d·Δω = p_m0 + p_gov − p_e` with
//! `m = 2·H·S/S_B` and `δ̇ = ω_n·Δω`, where `p_gov` is a first-order droop
//! response to the machine's own speed and `p_e` comes from solving the
//! network at every integration stage.

pub mod network;
mod pmu;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::PowerSystem;

pub use network::MachineNetwork;
pub use pmu::{sample_pmu, Channel, PmuRecord, REPORTING_RATES};

/// Largest probing amplitude still considered a low-level perturbation.
pub const MAX_PROBE_AMPLITUDE: f64 = 0.05;
/// Speed deviation beyond which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProbeShape {
    Step,
    Pulse { width: f64 },
    /// Pseudo-random binary sequence switching sign every `period` seconds.
    Prbs { period: f64 },
}

/// A power deficit of `amplitude` drawn at `bus` from `start` onward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbingSignal {
    pub amplitude: f64,
    /// Internal bus index.
    pub bus: usize,
    pub shape: ProbeShape,
    pub start: f64,
}

impl ProbingSignal {
    pub fn step(amplitude: f64, bus: usize) -> Self {
        ProbingSignal { amplitude, bus, shape: ProbeShape::Step, start: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_PROBE_AMPLITUDE).contains(&self.amplitude) {
            return Err(invalid(format!(
                "probe amplitude {} outside [0, {MAX_PROBE_AMPLITUDE}]",
                self.amplitude
            )));
        }
        if !(self.start >= 0.0 && self.start.is_finite()) {
            return Err(invalid("probe start must be non-negative"));
        }
        match self.shape {
            ProbeShape::Step => {}
            ProbeShape::Pulse { width } if width >= 0.0 => {}
            ProbeShape::Prbs { period } if period > 0.0 => {}
            _ => return Err(invalid("pulse width must be >= 0 and PRBS period > 0")),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    /// Droop gain on machine base (20 = 5% droop).
    pub droop_gain: f64,
    pub governor_tc: f64,
    #[serde(with = "crate::seed::as_string")]
    pub seed: u64,
    /// Smoothing width (samples) for numerically differentiated channels.
    pub rocof_window: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            duration: 2.0,
            droop_gain: 20.0,
            governor_tc: 0.5,
            seed: 0,
            rocof_window: 5,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 0.005) {
            return Err(invalid(format!("dt must be in (0, 0.005], got {}", self.dt)));
        }
        if !(self.duration >= 2.0 && self.duration.is_finite()) {
            return Err(invalid(format!("duration must be >= 2 s, got {}", self.duration)));
        }
        if !(self.governor_tc > 0.0) {
            return Err(invalid("governor time constant must be positive"));
        }
        if !(self.droop_gain >= 0.0) {
            return Err(invalid("droop gain must be non-negative"));
        }
        if self.rocof_window == 0 || self.rocof_window.is_multiple_of(2) {
            return Err(invalid("rocof window must be odd and >= 1"));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn rate(&self) -> f64 {
        1.0 / self.dt
    }
}

/// Full-resolution simulator output. Per-bus arrays are indexed `[bus][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    /// Frequency deviation, pu.
    pub delta_omega: Vec<Vec<f64>>,
    /// Rate of change of frequency, pu/s.
    pub rocof: Vec<Vec<f64>>,
    /// Voltage magnitude deviation from the initial operating point, pu.
    pub v_mag: Vec<Vec<f64>>,
    /// Per-machine speed deviation.
    pub machine_delta_omega: Vec<Vec<f64>>,
    /// Per-machine acceleration.
    pub machine_rocof: Vec<Vec<f64>>,
    pub label_h_sys: f64,
    pub dt: f64,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn rate(&self) -> f64 {
        1.0 / self.dt
    }
}

/// Probe injection sampled at `k·dt` for `k = 0..=n_steps`.
pub fn generate_probing(probe: &ProbingSignal, cfg: &SimConfig) -> Vec<f64> {
    let n = cfg.n_steps() + 1;
    let a = probe.amplitude;
    // Sample instants are snapped to a nanosecond grid so that boundaries that
    // land exactly on a sample are not lost to rounding.
    let snap = |t: f64| (t * 1e9).round() / 1e9;
    match probe.shape {
        ProbeShape::Step => (0..n)
            .map(|k| if snap(k as f64 * cfg.dt) >= probe.start { a } else { 0.0 })
            .collect(),
        ProbeShape::Pulse { width } => (0..n)
            .map(|k| {
                let t = snap(k as f64 * cfg.dt);
                if t >= probe.start && t < probe.start + width {
                    a
                } else {
                    0.0
                }
            })
            .collect(),
        ProbeShape::Prbs { period } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut bits: Vec<f64> = Vec::new();
            (0..n)
                .map(|k| {
                    let t = snap(k as f64 * cfg.dt);
                    if t < probe.start {
                        return 0.0;
                    }
                    let slot = (snap((t - probe.start) / period)).floor() as usize;
                    while bits.len() <= slot {
                        bits.push(if rng.gen::<bool>() { a } else { -a });
                    }
                    bits[slot]
                })
                .collect()
        }
    }
}

/// One classical fourth-order Runge–Kutta step of `ẋ = f(x)`.
pub(crate) fn rk4_step<F>(x: &mut [f64], dt: f64, f: &F)
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(x, &mut k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    f(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    f(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = x[i] + dt * k3[i];
    }
    f(&tmp, &mut k4);
    for i in 0..n {
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

struct MachineConsts {
    m: Vec<f64>,
    d: Vec<f64>,
    droop: Vec<f64>,
}

pub fn simulate(sys: &PowerSystem, probe: &ProbingSignal, cfg: &SimConfig) -> Result<SimulationTrace> {
    cfg.validate()?;
    probe.validate()?;
    let net = MachineNetwork::new(sys, probe.bus)?;
    let ng = net.n_machines();
    let nb = sys.n_buses();
    let wn = 2.0 * std::f64::consts::PI * sys.f_nominal;
    let sb = sys.s_base;

    let consts = MachineConsts {
        m: sys.generators.iter().map(|g| 2.0 * g.h * g.s_rated / sb).collect(),
        d: sys.generators.iter().map(|g| g.d * g.s_rated / sb).collect(),
        // Machines without a mechanical setpoint (condensers) have no governor.
        droop: sys
            .generators
            .iter()
            .map(|g| if g.p_set > 0.0 { cfg.droop_gain * g.s_rated / sb } else { 0.0 })
            .collect(),
    };
    let tc = cfg.governor_tc;

    let rhs = |x: &[f64], deficit: f64, out: &mut [f64], p_e: &mut [f64]| {
        let (delta, rest) = x.split_at(ng);
        let (w, pg) = rest.split_at(ng);
        net.electrical_power(delta, deficit, p_e);
        for i in 0..ng {
            out[i] = wn * w[i];
            out[ng + i] = (net.p_m0[i] + pg[i] - p_e[i] - consts.d[i] * w[i]) / consts.m[i];
            out[2 * ng + i] = (-consts.droop[i] * w[i] - pg[i]) / tc;
        }
    };

    // Inertia weights for folding machines onto their bus.
    let mut bus_weight = vec![0.0; nb];
    for (g, m) in sys.generators.iter().zip(&consts.m) {
        bus_weight[g.bus] += m;
    }

    let injection = generate_probing(probe, cfg);
    let n = injection.len();
    let mut state = vec![0.0; 3 * ng];
    state[..ng].copy_from_slice(&net.delta0);

    let mut times = Vec::with_capacity(n);
    let mut delta_omega = vec![Vec::with_capacity(n); nb];
    let mut rocof_out = vec![Vec::with_capacity(n); nb];
    let mut v_mag = vec![Vec::with_capacity(n); nb];
    let mut m_dw = vec![Vec::with_capacity(n); ng];
    let mut m_rocof = vec![Vec::with_capacity(n); ng];

    let mut deriv = vec![0.0; 3 * ng];
    let mut p_e = vec![0.0; ng];
    for (k, &a) in injection.iter().enumerate() {
        let t = k as f64 * cfg.dt;
        rhs(&state, a, &mut deriv, &mut p_e);

        let w = &state[ng..2 * ng];
        let accel = &deriv[ng..2 * ng];
        if let Some(i) = w.iter().position(|v| !(v.abs() <= DIVERGENCE_LIMIT)) {
            return Err(Error::Divergence {
                time: t,
                bus: sys.buses[sys.generators[i].bus].number,
                value: w[i].abs(),
            });
        }
        let e = net.emfs(&state[..ng]);
        let v = net.bus_voltages(&e, a);
        let bus_freq = net.bus_frequency(&e, w, a, &v);

        let mut w_bus = vec![0.0; nb];
        let mut a_bus = vec![0.0; nb];
        for (i, g) in sys.generators.iter().enumerate() {
            w_bus[g.bus] += consts.m[i] * w[i];
            a_bus[g.bus] += consts.m[i] * accel[i];
        }
        for b in 0..nb {
            if bus_weight[b] > 0.0 {
                delta_omega[b].push(w_bus[b] / bus_weight[b]);
                rocof_out[b].push(a_bus[b] / bus_weight[b]);
            } else {
                delta_omega[b].push(bus_freq[b]);
            }
            v_mag[b].push(v[b].norm() - net.v0[b].norm());
        }
        for i in 0..ng {
            m_dw[i].push(w[i]);
            m_rocof[i].push(accel[i]);
        }
        times.push(t);

        if k + 1 < n {
            let f = |x: &[f64], out: &mut [f64]| {
                let mut scratch = vec![0.0; ng];
                rhs(x, a, out, &mut scratch);
            };
            rk4_step(&mut state, cfg.dt, &f);
        }
    }

    let rate = cfg.rate();
    for b in 0..nb {
        if bus_weight[b] == 0.0 {
            rocof_out[b] = rocof(&delta_omega[b], rate, cfg.rocof_window)?;
        }
    }

    Ok(SimulationTrace {
        times,
        delta_omega,
        rocof: rocof_out,
        v_mag,
        machine_delta_omega: m_dw,
        machine_rocof: m_rocof,
        label_h_sys: sys.h_sys(),
        dt: cfg.dt,
    })
}

/// Derivative of a uniformly sampled series: central differences inside, one
/// sided at the ends, then a centered moving average of width `window` whose
/// span shrinks symmetrically near the edges.
pub fn rocof(series: &[f64], rate: f64, window: usize) -> Result<Vec<f64>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(invalid("window must be odd and >= 1"));
    }
    let n = series.len();
    if n <= window || n < 2 {
        return Err(invalid(format!("series of length {n} too short for window {window}")));
    }
    if !(rate > 0.0) {
        return Err(invalid("rate must be positive"));
    }
    let mut d = vec![0.0; n];
    d[0] = (series[1] - series[0]) * rate;
    d[n - 1] = (series[n - 1] - series[n - 2]) * rate;
    for i in 1..n - 1 {
        d[i] = (series[i + 1] - series[i - 1]) * rate * 0.5;
    }
    let half = window / 2;
    Ok((0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let span = &d[i - h..=i + h];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect())
}
