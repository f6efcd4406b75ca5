use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::pipeline::FeatureId;
use crate::seed;
use crate::sim::PmuRecord;

/// Mean square of `x` after removing its mean.
pub fn signal_power(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Adds zero-mean Gaussian noise to every channel at `snr_db` relative to the
/// channel's own (mean-removed) power. `f64::INFINITY` means no noise.
/// Constant channels fall back to their raw mean square and are flagged.
///
/// Each channel draws from its own stream keyed by (bus, feature), so the
/// noise on a channel does not depend on which other channels are present.
pub fn add_noise(record: &PmuRecord, snr_db: f64, seed: u64) -> Result<PmuRecord> {
    if snr_db == f64::INFINITY {
        return Ok(record.clone());
    }
    if !snr_db.is_finite() {
        return Err(invalid(format!("snr_db must be finite or +inf, got {snr_db}")));
    }
    let mut out = record.clone();
    let ratio = 10f64.powf(snr_db / 10.0);
    for ch in &mut out.channels {
        let key = (ch.bus * FeatureId::ALL.len() + ch.feature.index()) as u64;
        let mut rng = seed::rng(seed::derive_indexed(seed, seed::stream::NOISE, key));
        let mut power = signal_power(&ch.data);
        if power <= 0.0 {
            power = ch.data.iter().map(|v| v * v).sum::<f64>() / ch.data.len().max(1) as f64;
            out.flags.push(format!("bus {} {:?}: constant channel, noise from raw power", ch.bus, ch.feature));
        }
        if power <= 0.0 {
            continue;
        }
        let normal = Normal::new(0.0, (power / ratio).sqrt()).expect("finite std");
        for v in &mut ch.data {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

/// Empirical SNR of `noisy` against `clean`, pooled over channels:
/// 10·log10(Σ signal power / Σ noise power).
pub fn empirical_snr_db(clean: &PmuRecord, noisy: &PmuRecord) -> f64 {
    let mut sig = 0.0;
    let mut noise = 0.0;
    for (c, n) in clean.channels.iter().zip(&noisy.channels) {
        sig += signal_power(&c.data);
        noise += c.data.iter().zip(&n.data).map(|(a, b)| (b - a).powi(2)).sum::<f64>() / c.data.len() as f64;
    }
    10.0 * (sig / noise).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Channel;

    fn record(data: Vec<f64>) -> PmuRecord {
        PmuRecord {
            buses: vec![0],
            rate: 200.0,
            t0: 0.0,
            channels: vec![Channel { bus: 0, feature: FeatureId::RoCoF, data }],
            repairs: 0,
            flags: vec![],
        }
    }

    fn unit_square(n: usize) -> Vec<f64> {
        (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect()
    }

    #[test]
    fn infinite_snr_is_identity() {
        let rec = record(unit_square(100));
        assert_eq!(add_noise(&rec, f64::INFINITY, 3).unwrap(), rec);
        assert!(add_noise(&rec, f64::NAN, 3).is_err());
    }

    #[test]
    fn variance_at_45_db() {
        let rec = record(unit_square(200_000));
        let noisy = add_noise(&rec, 45.0, 11).unwrap();
        let var = rec.channels[0]
            .data
            .iter()
            .zip(&noisy.channels[0].data)
            .map(|(a, b)| (b - a).powi(2))
            .sum::<f64>()
            / 200_000.0;
        let expected = 10f64.powf(-4.5);
        assert!((var / expected - 1.0).abs() < 0.02, "var {var}");
        let snr = empirical_snr_db(&rec, &noisy);
        assert!((snr - 45.0).abs() < 0.2, "snr {snr}");
    }

    #[test]
    fn deterministic_per_seed() {
        let rec = record(unit_square(500));
        assert_eq!(add_noise(&rec, 30.0, 5).unwrap(), add_noise(&rec, 30.0, 5).unwrap());
        assert_ne!(add_noise(&rec, 30.0, 5).unwrap(), add_noise(&rec, 30.0, 6).unwrap());
    }

    #[test]
    fn constant_channel_is_flagged() {
        let rec = record(vec![2.0; 1000]);
        let noisy = add_noise(&rec, 20.0, 1).unwrap();
        assert_eq!(noisy.flags.len(), 1);
        assert_ne!(noisy.channels[0].data, rec.channels[0].data);
    }
}
