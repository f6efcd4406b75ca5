//! Dense, convolution and pooling kernels with explicit backward passes.
//! Layouts are row-major: dense `w[out][in]`, conv `w[c_out][c_in][k]` over
//! inputs `x[c_in][len]`.

use crate::error::{Error, Result};

fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::Shape { expected: format!("{what} of length {expected}"), got: got.to_string() });
    }
    Ok(())
}

/// `y = W x + b`.
pub fn dense_forward(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(o, &bo)| bo + w[o * n_in..(o + 1) * n_in].iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
        .collect()
}

/// Accumulates `dw += dy xᵀ`, `db += dy`; returns `dx = Wᵀ dy`.
pub fn dense_backward(x: &[f64], w: &[f64], dy: &[f64], dw: &mut [f64], db: &mut [f64]) -> Vec<f64> {
    let n_in = x.len();
    let mut dx = vec![0.0; n_in];
    for (o, &g) in dy.iter().enumerate() {
        db[o] += g;
        if g == 0.0 {
            continue;
        }
        let row = &w[o * n_in..(o + 1) * n_in];
        let drow = &mut dw[o * n_in..(o + 1) * n_in];
        for i in 0..n_in {
            drow[i] += g * x[i];
            dx[i] += g * row[i];
        }
    }
    dx
}

/// Valid cross-correlation, stride 1: `L_out = L − k + 1`.
pub fn conv1d_forward(x: &[f64], c_in: usize, w: &[f64], b: &[f64], k: usize) -> Result<Vec<f64>> {
    let c_out = b.len();
    if c_in == 0 || !x.len().is_multiple_of(c_in) {
        return Err(Error::Shape { expected: format!("multiple of {c_in} inputs"), got: x.len().to_string() });
    }
    let len = x.len() / c_in;
    check_len("conv weight", w.len(), c_out * c_in * k)?;
    if k == 0 || k > len {
        return Err(Error::Shape { expected: format!("kernel 1..={len}"), got: k.to_string() });
    }
    let l_out = len - k + 1;
    let mut y = vec![0.0; c_out * l_out];
    for o in 0..c_out {
        let yo = &mut y[o * l_out..(o + 1) * l_out];
        yo.fill(b[o]);
        for i in 0..c_in {
            let xi = &x[i * len..(i + 1) * len];
            for kk in 0..k {
                let wv = w[(o * c_in + i) * k + kk];
                for (t, yv) in yo.iter_mut().enumerate() {
                    *yv += wv * xi[t + kk];
                }
            }
        }
    }
    Ok(y)
}

/// Accumulates weight and bias gradients and returns `dx`.
pub fn conv1d_backward(
    x: &[f64],
    c_in: usize,
    w: &[f64],
    k: usize,
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let c_out = db.len();
    let len = x.len() / c_in;
    let l_out = len - k + 1;
    let mut dx = vec![0.0; x.len()];
    for o in 0..c_out {
        let go = &dy[o * l_out..(o + 1) * l_out];
        db[o] += go.iter().sum::<f64>();
        for i in 0..c_in {
            let xi = &x[i * len..(i + 1) * len];
            let dxi = &mut dx[i * len..(i + 1) * len];
            for kk in 0..k {
                let idx = (o * c_in + i) * k + kk;
                let wv = w[idx];
                let mut acc = 0.0;
                for (t, &g) in go.iter().enumerate() {
                    acc += g * xi[t + kk];
                    dxi[t + kk] += wv * g;
                }
                dw[idx] += acc;
            }
        }
    }
    dx
}

/// Width-2, stride-2 max pool over each channel of `x[c][len]`. Returns the
/// pooled values and the flat argmax of each output (first index on ties).
pub fn maxpool1d(x: &[f64], channels: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    if channels == 0 || !x.len().is_multiple_of(channels) {
        return Err(Error::Shape { expected: format!("multiple of {channels} inputs"), got: x.len().to_string() });
    }
    let len = x.len() / channels;
    if len < 2 {
        return Err(Error::Shape { expected: "length >= 2".into(), got: len.to_string() });
    }
    let half = len / 2;
    let mut y = Vec::with_capacity(channels * half);
    let mut arg = Vec::with_capacity(channels * half);
    for c in 0..channels {
        for j in 0..half {
            let a = c * len + 2 * j;
            let pick = if x[a + 1] > x[a] { a + 1 } else { a };
            y.push(x[pick]);
            arg.push(pick);
        }
    }
    Ok((y, arg))
}

pub fn maxpool1d_backward(arg: &[usize], dy: &[f64], in_len: usize) -> Vec<f64> {
    let mut dx = vec![0.0; in_len];
    for (&a, &g) in arg.iter().zip(dy) {
        dx[a] += g;
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_kernel_selects_window_start() {
        let y = conv1d_forward(&[1.0, 2.0, 3.0, 4.0], 1, &[1.0, 0.0, 0.0], &[0.0], 3).unwrap();
        assert_eq!(y, vec![1.0, 2.0]);
    }

    #[test]
    fn ones_kernel_sums() {
        let y = conv1d_forward(&[2.5; 6], 1, &[1.0; 3], &[0.25], 3).unwrap();
        assert_eq!(y, vec![7.75; 4]);
        assert!(conv1d_forward(&[1.0; 2], 1, &[1.0; 3], &[0.0], 3).is_err());
    }

    #[test]
    fn pooling_and_tie_rule() {
        let (y, arg) = maxpool1d(&[1.0, 3.0, 2.0, 2.0], 1).unwrap();
        assert_eq!(y, vec![3.0, 2.0]);
        assert_eq!(arg, vec![1, 2]);
        let (y, arg) = maxpool1d(&[5.0; 5], 1).unwrap();
        assert_eq!(y, vec![5.0; 2]);
        assert_eq!(maxpool1d_backward(&arg, &[1.0, 1.0], 5), vec![1.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(maxpool1d(&[1.0], 1).is_err());
    }

    #[test]
    fn dense_matches_hand_product() {
        let y = dense_forward(&[1.0, 2.0], &[1.0, 0.0, 3.0, -1.0], &[0.5, 0.0]);
        assert_eq!(y, vec![1.5, 1.0]);
    }
}
