use crate::error::{invalid, Result};
use crate::sim::{PmuRecord, REPORTING_RATES};

/// Centered moving average whose span shrinks symmetrically at the edges.
fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    let half = width / 2;
    (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let span = &x[i - h..=i + h];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect()
}

fn resample_channel(x: &[f64], src: f64, dst: f64) -> Vec<f64> {
    let factor = src / dst;
    let integral = (factor - factor.round()).abs() < 1e-9;
    // odd anti-alias width covering one output period
    let mut width = factor.floor() as usize;
    if width.is_multiple_of(2) {
        width += 1;
    }
    let smooth = if width > 1 { moving_average(x, width) } else { x.to_vec() };
    if integral {
        return smooth.iter().step_by(factor.round() as usize).copied().collect();
    }
    let duration = (x.len() - 1) as f64 / src;
    let n_out = (duration * dst + 1e-9).floor() as usize + 1;
    (0..n_out)
        .map(|j| {
            let pos = j as f64 * factor;
            let i = (pos.floor() as usize).min(x.len() - 1);
            let frac = pos - i as f64;
            if i + 1 < x.len() {
                smooth[i] + frac * (smooth[i + 1] - smooth[i])
            } else {
                smooth[i]
            }
        })
        .collect()
}

/// Anti-aliases and decimates to `target` Hz. Integral factors keep every
/// factor-th smoothed sample; other ratios interpolate linearly.
pub fn downsample(record: &PmuRecord, target: f64) -> Result<PmuRecord> {
    if !(REPORTING_RATES.0..=REPORTING_RATES.1).contains(&target) {
        return Err(invalid(format!("target rate {target} Hz outside PMU reporting range")));
    }
    if target > record.rate * (1.0 + 1e-12) {
        return Err(invalid(format!(
            "target rate {target} Hz exceeds source rate {} Hz",
            record.rate
        )));
    }
    if record.is_empty() {
        return Err(invalid("empty record"));
    }
    if (target - record.rate).abs() < 1e-9 {
        return Ok(record.clone());
    }
    let mut out = record.clone();
    out.rate = target;
    for ch in &mut out.channels {
        ch.data = resample_channel(&ch.data, record.rate, target);
    }
    Ok(out)
}
