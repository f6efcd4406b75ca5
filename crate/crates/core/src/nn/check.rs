//! Central finite-difference gradient checking.

use super::Network;

/// Denominator floor for the relative error, so that gradients that are zero
/// up to roundoff are compared absolutely.
pub const GRAD_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates sitting on a kink (one-sided slopes disagree by more than
    /// the analytic-vs-numeric gap), e.g. a ReLU input at exactly 0.
    pub excluded: usize,
}

/// Compares `analytic` with `(f(x+ε) − f(x−ε)) / 2ε` coordinate by coordinate.
/// Relative error is `|a − n| / max(|a|, |n|, GRAD_FLOOR)`.
pub fn grad_check(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64], eps: f64) -> GradCheck {
    let f0 = f(x);
    let mut probe = x.to_vec();
    let mut out = GradCheck { max_rel_error: 0.0, checked: 0, excluded: 0 };
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let fp = f(&probe);
        probe[i] = x[i] - eps;
        let fm = f(&probe);
        probe[i] = x[i];
        let numeric = (fp - fm) / (2.0 * eps);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
        let one_sided_gap = ((fp - f0) / eps - (f0 - fm) / eps).abs();
        if rel > 1e-6 && one_sided_gap >= (a - numeric).abs() {
            out.excluded += 1;
            continue;
        }
        out.checked += 1;
        out.max_rel_error = out.max_rel_error.max(rel);
    }
    out
}

impl Network {
    /// Checks every parameter and input coordinate of `loss = proj · forward(x)`.
    pub fn grad_check(&self, x: &[f64], proj: &[f64], eps: f64) -> GradCheck {
        let loss = |net: &Network, input: &[f64]| -> f64 {
            net.forward(input).expect("shape checked").iter().zip(proj).map(|(a, b)| a * b).sum()
        };
        let (_, caches) = self.forward_train(x).expect("input shape");
        let mut grads = self.zero_grads();
        let dx = self.backward(&caches, proj, &mut grads);

        let flat = self.flat_params();
        let mut scratch = self.clone();
        let p = grad_check(
            |theta| {
                scratch.set_flat_params(theta);
                loss(&scratch, x)
            },
            &flat,
            &grads.concat(),
            eps,
        );
        let i = grad_check(|input| loss(self, input), x, &dx, eps);
        GradCheck {
            max_rel_error: p.max_rel_error.max(i.max_rel_error),
            checked: p.checked + i.checked,
            excluded: p.excluded + i.excluded,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn rand_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn check_layer(layer: Layer, seed_: u64) -> GradCheck {
        let net = Network::new(vec![layer], seed_).unwrap();
        let mut rng = seed::rng(seed_ + 1000);
        let mut net = net;
        for p in &mut net.params {
            for v in p.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        let x = rand_vec(&mut rng, net.in_size());
        let proj = rand_vec(&mut rng, net.out_size());
        net.grad_check(&x, &proj, 1e-5)
    }

    #[test]
    fn linear_layer_is_exact() {
        let r = check_layer(Layer::Dense { n_in: 5, n_out: 3, act: Activation::Identity }, 1);
        assert!(r.max_rel_error < 1e-9, "{r:?}");
    }

    #[test]
    fn relu_at_zero_is_excluded() {
        let net = Network {
            layers: vec![Layer::Dense { n_in: 1, n_out: 1, act: Activation::Relu }],
            params: vec![vec![1.0, 0.0]],
        };
        let r = net.grad_check(&[0.0], &[1.0], 1e-5);
        assert!(r.excluded >= 1);
        assert_eq!(r.max_rel_error, 0.0);
    }

    #[test]
    fn layers_match_finite_differences() {
        for s in 0..5 {
            let cases = vec![
                Layer::Dense { n_in: 6, n_out: 4, act: Activation::Relu },
                Layer::Conv1d { c_in: 2, c_out: 3, k: 3, len: 9, act: Activation::Identity },
                Layer::MaxPool { channels: 2, len: 7 },
                Layer::Lstm { n_in: 3, units: 4, steps: 5, cell: CellKind::Standard },
                Layer::Lstm { n_in: 3, units: 4, steps: 5, cell: CellKind::Literal },
                Layer::MeanNodes { n: 4, d: 3 },
            ];
            for layer in cases {
                let r = check_layer(layer.clone(), s);
                assert!(r.max_rel_error < 1e-5, "{layer:?}: {r:?}");
            }
        }
    }

    #[test]
    fn gcn_on_random_graph() {
        let mut rng = seed::rng(3);
        let n = 6;
        let mut a = vec![vec![0u8; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(0.4) {
                    a[i][j] = 1;
                    a[j][i] = 1;
                }
            }
        }
        let op = renormalized_adjacency(&a).unwrap();
        let r = check_layer(Layer::Gcn { op, d_in: 4, d_out: 3, act: Activation::Relu }, 5);
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }
}
