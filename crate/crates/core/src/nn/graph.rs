use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Symmetrically renormalized adjacency `D̃^{-1/2} (A + I) D̃^{-1/2}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphOperator {
    pub n: usize,
    pub v: Vec<f64>,
}

impl GraphOperator {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.v[i * self.n + j]
    }

    pub fn identity(n: usize) -> Self {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        GraphOperator { n, v }
    }

    pub fn spectral_radius(&self) -> f64 {
        let m = DMatrix::from_row_slice(self.n, self.n, &self.v);
        m.symmetric_eigenvalues().iter().fold(0.0f64, |a, e| a.max(e.abs()))
    }

    /// `P V Pᵀ` for the node order `perm` (new node i is old node perm[i]).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                v[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        GraphOperator { n, v }
    }
}

pub fn renormalized_adjacency(a: &[Vec<u8>]) -> Result<GraphOperator> {
    let n = a.len();
    for (i, row) in a.iter().enumerate() {
        if row.len() != n {
            return Err(invalid("adjacency must be square"));
        }
        if row[i] != 0 {
            return Err(invalid(format!("adjacency diagonal at {i} must be zero")));
        }
        for (j, &x) in row.iter().enumerate() {
            if x > 1 {
                return Err(invalid(format!("adjacency entry ({i}, {j}) is not binary")));
            }
            if x != a[j][i] {
                return Err(invalid(format!("adjacency is asymmetric at ({i}, {j})")));
            }
        }
    }
    let deg: Vec<f64> = a.iter().map(|r| 1.0 + r.iter().map(|&x| x as f64).sum::<f64>()).collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let aij = if i == j { 1.0 } else { a[i][j] as f64 };
            if aij != 0.0 {
                v[i * n + j] = aij / (deg[i] * deg[j]).sqrt();
            }
        }
    }
    Ok(GraphOperator { n, v })
}

/// Pre-activation `V·F·W + b` for `f[N][d_in]`, `w[d_in][d_out]`; the bias is
/// shared by all nodes. Also returns `V·F` for the backward pass.
pub fn gcn_preact(v: &GraphOperator, f: &[f64], w: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = v.n;
    let d_out = b.len();
    if n == 0 || !f.len().is_multiple_of(n) || w.len() != (f.len() / n) * d_out {
        return Err(Error::Shape {
            expected: format!("{n} nodes, weight [d_in × {d_out}]"),
            got: format!("features {}, weight {}", f.len(), w.len()),
        });
    }
    let d_in = f.len() / n;
    let mut vf = vec![0.0; n * d_in];
    for i in 0..n {
        for j in 0..n {
            let vij = v.get(i, j);
            if vij == 0.0 {
                continue;
            }
            for k in 0..d_in {
                vf[i * d_in + k] += vij * f[j * d_in + k];
            }
        }
    }
    let mut z = vec![0.0; n * d_out];
    for i in 0..n {
        let zi = &mut z[i * d_out..(i + 1) * d_out];
        zi.copy_from_slice(b);
        for k in 0..d_in {
            let a = vf[i * d_in + k];
            if a == 0.0 {
                continue;
            }
            for (zo, &wv) in zi.iter_mut().zip(&w[k * d_out..(k + 1) * d_out]) {
                *zo += a * wv;
            }
        }
    }
    Ok((z, vf))
}

/// `ReLU(V·F·W + b)`.
pub fn gcn_layer(v: &GraphOperator, f: &[f64], w: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let (mut z, _) = gcn_preact(v, f, w, b)?;
    for x in &mut z {
        *x = x.max(0.0);
    }
    Ok(z)
}

/// Backward of the pre-activation given `dz`; accumulates `dw`, `db`, returns `df`.
pub fn gcn_backward(v: &GraphOperator, vf: &[f64], w: &[f64], dz: &[f64], dw: &mut [f64], db: &mut [f64]) -> Vec<f64> {
    let n = v.n;
    let d_out = db.len();
    let d_in = vf.len() / n;
    let mut dvf = vec![0.0; n * d_in];
    for i in 0..n {
        let dzi = &dz[i * d_out..(i + 1) * d_out];
        for (o, &g) in dzi.iter().enumerate() {
            db[o] += g;
        }
        for k in 0..d_in {
            let a = vf[i * d_in + k];
            let wk = &w[k * d_out..(k + 1) * d_out];
            let dwk = &mut dw[k * d_out..(k + 1) * d_out];
            let mut acc = 0.0;
            for o in 0..d_out {
                dwk[o] += a * dzi[o];
                acc += wk[o] * dzi[o];
            }
            dvf[i * d_in + k] = acc;
        }
    }
    // V is symmetric, so Vᵀ·dVF = V·dVF
    let mut df = vec![0.0; n * d_in];
    for i in 0..n {
        for j in 0..n {
            let vji = v.get(j, i);
            if vji == 0.0 {
                continue;
            }
            for k in 0..d_in {
                df[i * d_in + k] += vji * dvf[j * d_in + k];
            }
        }
    }
    df
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_ieee24;

    #[test]
    fn two_node_graph() {
        let v = renormalized_adjacency(&[vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(v.v, vec![0.5; 4]);
    }

    #[test]
    fn isolated_node_keeps_self_loop() {
        let v = renormalized_adjacency(&[vec![0, 1, 0], vec![1, 0, 0], vec![0, 0, 0]]).unwrap();
        assert_eq!(v.get(2, 2), 1.0);
        assert_eq!(v.get(2, 0), 0.0);
        assert_eq!(v.get(0, 2), 0.0);
    }

    #[test]
    fn rejects_bad_adjacency() {
        assert!(renormalized_adjacency(&[vec![0, 1], vec![0, 0]]).is_err());
        assert!(renormalized_adjacency(&[vec![0, 2], vec![2, 0]]).is_err());
        assert!(renormalized_adjacency(&[vec![1, 0], vec![0, 0]]).is_err());
    }

    #[test]
    fn ieee24_operator_is_bounded() {
        let v = renormalized_adjacency(&build_ieee24().adjacency()).unwrap();
        for i in 0..v.n {
            for j in 0..v.n {
                assert_eq!(v.get(i, j), v.get(j, i));
            }
        }
        assert!(v.spectral_radius() <= 1.0 + 1e-9);
    }

    #[test]
    fn identity_stack_is_transparent() {
        let f = [0.5, 2.0, 1.0, 0.0, 3.0, 4.0];
        let w = [1.0, 0.0, 0.0, 1.0];
        let out = gcn_layer(&GraphOperator::identity(3), &f, &w, &[0.0, 0.0]).unwrap();
        assert_eq!(out, f.to_vec());
    }
}
