use serde::{Deserialize, Serialize};

use super::SimulationTrace;
use crate::error::{invalid, Result};
use crate::pipeline::FeatureId;

/// Lowest and highest standard PMU reporting rates.
pub const REPORTING_RATES: (f64, f64) = (10.0, 240.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    /// Internal bus index.
    pub bus: usize,
    pub feature: FeatureId,
    pub data: Vec<f64>,
}

/// Synchronized multi-bus measurement stream. Channels are ordered bus-major,
/// then by feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmuRecord {
    pub buses: Vec<usize>,
    pub rate: f64,
    /// Time of the first sample, seconds.
    pub t0: f64,
    pub channels: Vec<Channel>,
    /// Points repaired by bad-data scrubbing.
    pub repairs: usize,
    /// Free-form processing notes (e.g. degenerate channels).
    pub flags: Vec<String>,
}

impl PmuRecord {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |c| c.data.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        (self.len().saturating_sub(1)) as f64 / self.rate
    }

    pub fn features(&self) -> Vec<FeatureId> {
        let mut f: Vec<FeatureId> = self.channels.iter().map(|c| c.feature).collect();
        f.sort();
        f.dedup();
        f
    }

    pub fn channel(&self, bus: usize, feature: FeatureId) -> Option<&Channel> {
        self.channels.iter().find(|c| c.bus == bus && c.feature == feature)
    }

    /// True when the rate is within the standard PMU reporting range.
    pub fn is_reporting_rate(&self) -> bool {
        (REPORTING_RATES.0..=REPORTING_RATES.1).contains(&self.rate)
    }

    /// Keeps only `features`, preserving channel order.
    pub fn select_features(&self, features: &[FeatureId]) -> PmuRecord {
        PmuRecord {
            channels: self.channels.iter().filter(|c| features.contains(&c.feature)).cloned().collect(),
            ..self.clone()
        }
    }

    /// Keeps only channels of `buses` (internal indices).
    pub fn select_buses(&self, buses: &[usize]) -> PmuRecord {
        PmuRecord {
            buses: self.buses.iter().copied().filter(|b| buses.contains(b)).collect(),
            channels: self.channels.iter().filter(|c| buses.contains(&c.bus)).cloned().collect(),
            ..self.clone()
        }
    }
}

/// Decimates a trace to `rate` and attaches every feature for each requested
/// bus. `rate` must divide the simulator rate.
pub fn sample_pmu(trace: &SimulationTrace, buses: &[usize], rate: f64) -> Result<PmuRecord> {
    if buses.is_empty() {
        return Err(invalid("no buses requested"));
    }
    let sim_rate = trace.rate();
    let factor = sim_rate / rate;
    if !(rate > 0.0) || (factor - factor.round()).abs() > 1e-9 || factor.round() < 1.0 {
        return Err(invalid(format!(
            "rate {rate} Hz does not divide simulator rate {sim_rate} Hz"
        )));
    }
    let step = factor.round() as usize;
    let mut sorted = buses.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let n_bus = trace.delta_omega.len();
    if let Some(&b) = sorted.iter().find(|&&b| b >= n_bus) {
        return Err(invalid(format!("bus index {b} out of range")));
    }

    let decimate = |s: &[f64]| s.iter().step_by(step).copied().collect::<Vec<_>>();
    let mut channels = Vec::with_capacity(sorted.len() * FeatureId::ALL.len());
    for &bus in &sorted {
        for feature in FeatureId::ALL {
            let src = match feature {
                FeatureId::DeltaOmega => &trace.delta_omega[bus],
                FeatureId::RoCoF => &trace.rocof[bus],
                FeatureId::VoltMag => &trace.v_mag[bus],
            };
            channels.push(Channel { bus, feature, data: decimate(src) });
        }
    }
    Ok(PmuRecord {
        buses: sorted,
        rate,
        t0: trace.times.first().copied().unwrap_or(0.0),
        channels,
        repairs: 0,
        flags: Vec::new(),
    })
}
