use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Recurrent cell variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    /// Input, forget and output gates with a separate cell state.
    #[default]
    Standard,
    /// Single update gate blending the previous output with a tanh candidate:
    /// `h_t = (1 − z)·h_{t−1} + z·tanh(W_h[h_{t−1}, x_t] + b_h)`.
    Literal,
}

impl CellKind {
    pub fn gates(self) -> usize {
        match self {
            CellKind::Standard => 4,
            CellKind::Literal => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(units: usize) -> Self {
        LstmState { h: vec![0.0; units], c: vec![0.0; units] }
    }
}

/// Weights `w[gates·units][n_in + units]` acting on `[x_t, h_{t−1}]`; gate
/// blocks are ordered i, f, g, o (standard) or z, h̃ (literal).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<'a> {
    pub n_in: usize,
    pub units: usize,
    pub kind: CellKind,
    pub w: &'a [f64],
    pub b: &'a [f64],
}

impl LstmParams<'_> {
    fn preact(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let cols = self.n_in + self.units;
        self.b
            .iter()
            .enumerate()
            .map(|(r, &b)| {
                let row = &self.w[r * cols..(r + 1) * cols];
                let xs: f64 = row[..self.n_in].iter().zip(x).map(|(a, c)| a * c).sum();
                let hs: f64 = row[self.n_in..].iter().zip(h).map(|(a, c)| a * c).sum();
                b + xs + hs
            })
            .collect()
    }

    fn check(&self, x_len: usize, state: &LstmState) -> Result<()> {
        let rows = self.kind.gates() * self.units;
        if self.w.len() != rows * (self.n_in + self.units)
            || self.b.len() != rows
            || x_len != self.n_in
            || state.h.len() != self.units
            || state.c.len() != self.units
        {
            return Err(Error::Shape {
                expected: format!("lstm n_in {} units {}", self.n_in, self.units),
                got: format!("x {x_len}, h {}, w {}", state.h.len(), self.w.len()),
            });
        }
        Ok(())
    }
}

/// Activated gate values kept for the backward pass.
#[derive(Debug, Clone)]
struct StepCache {
    gates: Vec<f64>,
    c: Vec<f64>,
}

fn step(p: &LstmParams, x: &[f64], prev: &LstmState) -> (LstmState, StepCache) {
    let u = p.units;
    let mut a = p.preact(x, &prev.h);
    match p.kind {
        CellKind::Standard => {
            for (j, v) in a.iter_mut().enumerate() {
                *v = if j / u == 2 { v.tanh() } else { sigmoid(*v) };
            }
            let c: Vec<f64> = (0..u).map(|j| a[u + j] * prev.c[j] + a[j] * a[2 * u + j]).collect();
            let h = (0..u).map(|j| a[3 * u + j] * c[j].tanh()).collect();
            (LstmState { h, c: c.clone() }, StepCache { gates: a, c })
        }
        CellKind::Literal => {
            for (j, v) in a.iter_mut().enumerate() {
                *v = if j < u { sigmoid(*v) } else { v.tanh() };
            }
            let h: Vec<f64> = (0..u).map(|j| (1.0 - a[j]) * prev.h[j] + a[j] * a[u + j]).collect();
            (LstmState { h: h.clone(), c: h.clone() }, StepCache { gates: a, c: h })
        }
    }
}

/// One recurrent step.
pub fn lstm_step(x_t: &[f64], state: &LstmState, params: &LstmParams) -> Result<LstmState> {
    params.check(x_t.len(), state)?;
    Ok(step(params, x_t, state).0)
}

/// Cached forward pass over a sequence, reusable for backward.
#[derive(Debug, Clone)]
pub struct SequenceCache {
    xs: Vec<Vec<f64>>,
    states: Vec<LstmState>,
    steps: Vec<StepCache>,
}

/// Runs the cell over `x[n_in][T]` (channel-major, as produced by a
/// convolution) from a zero state and returns the last hidden state.
pub fn lstm_sequence(p: &LstmParams, x: &[f64]) -> Result<(Vec<f64>, SequenceCache)> {
    if p.n_in == 0 || !x.len().is_multiple_of(p.n_in) {
        return Err(Error::Shape { expected: format!("multiple of {}", p.n_in), got: x.len().to_string() });
    }
    let t_len = x.len() / p.n_in;
    let mut state = LstmState::zeros(p.units);
    p.check(p.n_in, &state)?;
    let mut cache = SequenceCache { xs: Vec::with_capacity(t_len), states: vec![state.clone()], steps: Vec::new() };
    for t in 0..t_len {
        let xt: Vec<f64> = (0..p.n_in).map(|c| x[c * t_len + t]).collect();
        let (next, sc) = step(p, &xt, &state);
        cache.xs.push(xt);
        cache.steps.push(sc);
        cache.states.push(next.clone());
        state = next;
    }
    Ok((state.h, cache))
}

/// Backpropagation through time from a gradient on the last hidden state.
/// Accumulates into `dw`, `db`; returns `dx` in the input layout.
pub fn lstm_sequence_backward(
    p: &LstmParams,
    cache: &SequenceCache,
    dh_last: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let u = p.units;
    let n_in = p.n_in;
    let cols = n_in + u;
    let t_len = cache.xs.len();
    let mut dx = vec![0.0; n_in * t_len];
    let mut dh = dh_last.to_vec();
    let mut dc = vec![0.0; u];
    let mut da = vec![0.0; p.b.len()];
    for t in (0..t_len).rev() {
        let g = &cache.steps[t].gates;
        let prev = &cache.states[t];
        match p.kind {
            CellKind::Standard => {
                let c = &cache.steps[t].c;
                for j in 0..u {
                    let (i, f, gg, o) = (g[j], g[u + j], g[2 * u + j], g[3 * u + j]);
                    let tc = c[j].tanh();
                    let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
                    da[j] = dcj * gg * i * (1.0 - i);
                    da[u + j] = dcj * prev.c[j] * f * (1.0 - f);
                    da[2 * u + j] = dcj * i * (1.0 - gg * gg);
                    da[3 * u + j] = dh[j] * tc * o * (1.0 - o);
                    dc[j] = dcj * f;
                }
            }
            CellKind::Literal => {
                for j in 0..u {
                    let (z, cand) = (g[j], g[u + j]);
                    da[j] = dh[j] * (cand - prev.h[j]) * z * (1.0 - z);
                    da[u + j] = dh[j] * z * (1.0 - cand * cand);
                }
            }
        }
        let mut dh_prev = vec![0.0; u];
        if p.kind == CellKind::Literal {
            for j in 0..u {
                dh_prev[j] = dh[j] * (1.0 - g[j]);
            }
        }
        let xt = &cache.xs[t];
        for (r, &d) in da.iter().enumerate() {
            db[r] += d;
            if d == 0.0 {
                continue;
            }
            let row = &p.w[r * cols..(r + 1) * cols];
            let drow = &mut dw[r * cols..(r + 1) * cols];
            for c in 0..n_in {
                drow[c] += d * xt[c];
                dx[c * t_len + t] += d * row[c];
            }
            for j in 0..u {
                drow[n_in + j] += d * prev.h[j];
                dh_prev[j] += d * row[n_in + j];
            }
        }
        dh = dh_prev;
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    #[test]
    fn zero_params_keep_zero_state() {
        let w = vec![0.0; 4 * 3 * 5];
        let b = vec![0.0; 12];
        let p = LstmParams { n_in: 2, units: 3, kind: CellKind::Standard, w: &w, b: &b };
        let s = lstm_step(&[4.0, -7.0], &LstmState::zeros(3), &p).unwrap();
        assert_eq!(s.h, vec![0.0; 3]);
        let s = lstm_step(&[0.0, 0.0], &LstmState { h: vec![0.0; 3], c: vec![2.0; 3] }, &p).unwrap();
        assert_eq!(s.c, vec![1.0; 3]);
        assert!((s.h[0] - 0.5 * 1f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn hidden_state_is_bounded() {
        let mut rng = seed::rng(4);
        for kind in [CellKind::Standard, CellKind::Literal] {
            let rows = kind.gates() * 4;
            let w: Vec<f64> = (0..rows * 7).map(|_| rng.gen_range(-20.0..20.0)).collect();
            let b: Vec<f64> = (0..rows).map(|_| rng.gen_range(-20.0..20.0)).collect();
            let p = LstmParams { n_in: 3, units: 4, kind, w: &w, b: &b };
            let x: Vec<f64> = (0..3 * 30).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let (h, _) = lstm_sequence(&p, &x).unwrap();
            assert!(h.iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn dimension_mismatch() {
        let w = vec![0.0; 4 * 3 * 5];
        let b = vec![0.0; 12];
        let p = LstmParams { n_in: 2, units: 3, kind: CellKind::Standard, w: &w, b: &b };
        assert!(lstm_step(&[1.0], &LstmState::zeros(3), &p).is_err());
    }
}
