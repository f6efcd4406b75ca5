use crate::error::{invalid, Result};
use crate::sim::PmuRecord;

/// Dense `[buses × features × steps]` block, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Slab {
    pub shape: [usize; 3],
    pub data: Vec<f64>,
}

impl Slab {
    pub fn get(&self, b: usize, f: usize, t: usize) -> f64 {
        self.data[(b * self.shape[1] + f) * self.shape[2] + t]
    }
}

/// Cuts `[t0, t1)` (seconds after the record start) out of every channel.
pub fn extract_window(record: &PmuRecord, t0: f64, t1: f64) -> Result<Slab> {
    if !(t0 >= 0.0 && t1 > t0 && t1 <= record.duration() + 1e-9) {
        return Err(invalid(format!(
            "window [{t0}, {t1}) outside record of {} s",
            record.duration()
        )));
    }
    let start = (t0 * record.rate).round() as usize;
    let steps = ((t1 - t0) * record.rate).round() as usize;
    if steps == 0 || start + steps > record.len() {
        return Err(invalid(format!("window [{t0}, {t1}) holds no complete samples")));
    }
    let features = record.features();
    let n_bus = record.buses.len();
    if record.channels.len() != n_bus * features.len() {
        return Err(invalid("record channels are not a full bus × feature grid"));
    }
    let mut data = Vec::with_capacity(record.channels.len() * steps);
    for ch in &record.channels {
        data.extend_from_slice(&ch.data[start..start + steps]);
    }
    Ok(Slab { shape: [n_bus, features.len(), steps], data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::FeatureId;
    use crate::sim::Channel;

    fn record() -> PmuRecord {
        let mut channels = Vec::new();
        for bus in [2, 5] {
            for feature in [FeatureId::DeltaOmega, FeatureId::RoCoF] {
                let data = (0..=400).map(|k| (bus * 1000 + k) as f64).collect();
                channels.push(Channel { bus, feature, data });
            }
        }
        PmuRecord { buses: vec![2, 5], rate: 200.0, t0: 0.0, channels, repairs: 0, flags: vec![] }
    }

    #[test]
    fn window_lengths() {
        let rec = record();
        let a = extract_window(&rec, 0.0, 1.0).unwrap();
        assert_eq!(a.shape, [2, 2, 200]);
        let b = extract_window(&rec, 0.5, 1.5).unwrap();
        assert_eq!(b.shape[2], 200);
        assert_eq!(b.get(1, 0, 0), 5100.0);
        assert_eq!(b.get(0, 1, 199), 2299.0);
    }

    #[test]
    fn bad_windows() {
        let rec = record();
        assert!(extract_window(&rec, 0.3, 0.3).is_err());
        assert!(extract_window(&rec, 1.5, 2.5).is_err());
        assert!(extract_window(&rec, -0.1, 0.5).is_err());
    }
}
