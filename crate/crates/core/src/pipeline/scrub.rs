use crate::error::{invalid, Error, Result};
use crate::sim::PmuRecord;

/// Spike threshold in units of the residual MAD.
pub const SPIKE_K: f64 = 8.0;
/// Largest tolerated fraction of bad points per channel.
pub const MAX_BAD_FRACTION: f64 = 0.2;
/// Residuals below this fraction of the channel range are never spikes.
const RANGE_FLOOR: f64 = 1e-3;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Deviation of each point from the straight line through its neighbours
/// (one-sided extrapolation at the ends). Needs at least 3 points.
fn residuals(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| match i {
            0 => x[0] - (2.0 * x[1] - x[2]),
            _ if i == n - 1 => x[i] - (2.0 * x[i - 1] - x[i - 2]),
            _ => x[i] - 0.5 * (x[i - 1] + x[i + 1]),
        })
        .collect()
}

fn spike_threshold(x: &[f64], r: &[f64]) -> f64 {
    let mut abs: Vec<f64> = r.iter().map(|v| v.abs()).collect();
    let mad = median(&mut abs);
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    SPIKE_K * mad.max(RANGE_FLOOR * (hi - lo)).max(f64::MIN_POSITIVE)
}

/// Flags non-finite points and isolated spikes. A spike is a point whose
/// second-difference residual exceeds `SPIKE_K` times the channel's median
/// absolute residual. Spikes are peeled off worst-first, repairing each
/// before re-testing, so a spike's neighbours are not flagged with it.
pub fn bad_points(data: &[f64]) -> Vec<bool> {
    let mut bad: Vec<bool> = data.iter().map(|v| !v.is_finite()).collect();
    if bad.iter().all(|&b| b) || data.len() < 3 {
        return bad;
    }
    let mut x = data.to_vec();
    repair(&mut x, &bad);
    let limit = (MAX_BAD_FRACTION * data.len() as f64) as usize + 1;
    while bad.iter().filter(|&&b| b).count() <= limit {
        let r = residuals(&x);
        let threshold = spike_threshold(&x, &r);
        let (worst, mag) = r
            .iter()
            .enumerate()
            .filter(|(i, _)| !bad[*i])
            .map(|(i, v)| (i, v.abs()))
            .fold((0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if mag <= threshold {
            break;
        }
        bad[worst] = true;
        x = data.to_vec();
        repair(&mut x, &bad);
    }
    bad
}

/// Replaces flagged points by linear interpolation between the nearest good
/// neighbours (nearest good value at the edges). Returns the repair count.
fn repair(data: &mut [f64], bad: &[bool]) -> usize {
    let good: Vec<usize> = (0..data.len()).filter(|&i| !bad[i]).collect();
    let mut count = 0;
    for i in 0..data.len() {
        if !bad[i] {
            continue;
        }
        count += 1;
        if good.is_empty() {
            continue;
        }
        let next = good.partition_point(|&g| g < i);
        data[i] = match (next.checked_sub(1).map(|p| good[p]), good.get(next)) {
            (Some(a), Some(&b)) => {
                let w = (i - a) as f64 / (b - a) as f64;
                data[a] + w * (data[b] - data[a])
            }
            (Some(a), None) => data[a],
            (None, Some(&b)) => data[b],
            (None, None) => unreachable!(),
        };
    }
    count
}

/// Repairs non-finite values and spikes in every channel.
pub fn scrub_bad_data(record: &PmuRecord) -> Result<PmuRecord> {
    if record.is_empty() {
        return Err(invalid("empty record"));
    }
    let mut out = record.clone();
    for ch in &mut out.channels {
        let bad = bad_points(&ch.data);
        let n_bad = bad.iter().filter(|&&b| b).count();
        if n_bad as f64 > MAX_BAD_FRACTION * ch.data.len() as f64 {
            return Err(Error::UnusableChannel {
                channel: format!("bus {} {:?}", ch.bus, ch.feature),
                bad: n_bad,
                len: ch.data.len(),
            });
        }
        out.repairs += repair(&mut ch.data, &bad);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::FeatureId;
    use crate::sim::Channel;

    fn record(data: Vec<f64>) -> PmuRecord {
        PmuRecord {
            buses: vec![0],
            rate: 200.0,
            t0: 0.0,
            channels: vec![Channel { bus: 0, feature: FeatureId::DeltaOmega, data }],
            repairs: 0,
            flags: vec![],
        }
    }

    fn sine(n: usize) -> Vec<f64> {
        (0..n).map(|k| (2.0 * std::f64::consts::PI * k as f64 / 200.0).sin()).collect()
    }

    #[test]
    fn clean_record_is_untouched() {
        let rec = record(sine(400));
        let out = scrub_bad_data(&rec).unwrap();
        assert_eq!(out, rec);
        assert_eq!(out.repairs, 0);
    }

    #[test]
    fn nan_is_interpolated() {
        let mut data: Vec<f64> = (0..50).map(|k| k as f64 * 0.5).collect();
        data[20] = f64::NAN;
        let out = scrub_bad_data(&record(data)).unwrap();
        assert_eq!(out.channels[0].data[20], 10.0);
        assert_eq!(out.repairs, 1);
    }

    #[test]
    fn spike_is_removed() {
        let clean = sine(400);
        let sigma = {
            let mean = clean.iter().sum::<f64>() / clean.len() as f64;
            (clean.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / clean.len() as f64).sqrt()
        };
        let mut dirty = clean.clone();
        dirty[123] += 100.0 * sigma;
        let out = scrub_bad_data(&record(dirty)).unwrap();
        let worst = out.channels[0]
            .data
            .iter()
            .zip(&clean)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "worst {worst}");
        assert_eq!(out.repairs, 1);
    }

    #[test]
    fn mostly_bad_channel_is_rejected() {
        let mut data = sine(100);
        for v in data.iter_mut().take(30) {
            *v = f64::INFINITY;
        }
        assert!(matches!(scrub_bad_data(&record(data)), Err(Error::UnusableChannel { .. })));
    }
}
