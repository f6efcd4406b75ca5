use crate::error::{invalid, Error, Result};

/// Learning rate never drops below this.
pub const LR_FLOOR: f64 = 1e-6;
/// A loss must fall by more than this to count as an improvement.
pub const MIN_IMPROVEMENT: f64 = 1e-8;

pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(Error::Shape { expected: format!("{} predictions", y.len()), got: y_hat.len().to_string() });
    }
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64)
}

/// `w ← w − lr·grad`. A non-finite gradient leaves `w` untouched.
pub fn sgd_step(w: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
    if !(lr >= 0.0) {
        return Err(invalid(format!("learning rate must be non-negative, got {lr}")));
    }
    if w.len() != grad.len() {
        return Err(Error::Shape { expected: w.len().to_string(), got: grad.len().to_string() });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { batch: 0 });
    }
    for (wi, gi) in w.iter_mut().zip(grad) {
        *wi -= lr * gi;
    }
    Ok(())
}

/// Gradient descent with optional heavy-ball momentum
/// (`v ← μ·v + g`, `w ← w − lr·v`).
#[derive(Debug, Clone)]
pub struct Sgd {
    pub momentum: f64,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(momentum: f64) -> Self {
        Sgd { momentum, velocity: Vec::new() }
    }

    pub fn step(&mut self, params: &mut [Vec<f64>], grads: &[Vec<f64>], lr: f64) -> Result<()> {
        if grads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { batch: 0 });
        }
        if self.momentum == 0.0 {
            for (p, g) in params.iter_mut().zip(grads) {
                sgd_step(p, g, lr)?;
            }
            return Ok(());
        }
        if self.velocity.is_empty() {
            self.velocity = grads.iter().map(|g| vec![0.0; g.len()]).collect();
        }
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
            for ((pi, &gi), vi) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                *vi = self.momentum * *vi + gi;
                *pi -= lr * *vi;
            }
        }
        Ok(())
    }
}

/// Halves (by `factor`) the learning rate after `patience` epochs without an
/// improvement over the best loss seen, starting from a reference loss.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauSchedule {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub best: f64,
    pub wait: usize,
}

impl PlateauSchedule {
    pub fn new(lr: f64, factor: f64, patience: usize, reference: f64) -> Result<Self> {
        if !(factor > 0.0 && factor < 1.0) || patience == 0 {
            return Err(invalid("plateau factor must be in (0, 1) and patience >= 1"));
        }
        Ok(PlateauSchedule { lr, factor, patience, best: reference, wait: 0 })
    }

    /// Records one epoch's loss and returns the learning rate for the next.
    pub fn observe(&mut self, loss: f64) -> f64 {
        if loss < self.best - MIN_IMPROVEMENT {
            self.best = loss;
            self.wait = 0;
        } else {
            self.wait += 1;
            if self.wait >= self.patience {
                self.lr = (self.lr * self.factor).max(LR_FLOOR.min(self.lr));
                self.wait = 0;
            }
        }
        self.lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!(mse(&[0.0], &[1.0, 1.0]).is_err());
        let mut rng = seed::rng(1);
        let y: Vec<f64> = (0..1000).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let p: Vec<f64> = (0..1000).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let mut acc = 0.0;
        for i in 0..1000 {
            let d = y[i] - p[i];
            acc += d * d;
        }
        assert!((mse(&y, &p).unwrap() - acc / 1000.0).abs() < 1e-12);
    }

    #[test]
    fn sgd_examples() {
        let mut w = vec![1.0];
        sgd_step(&mut w, &[0.0], 0.5).unwrap();
        assert_eq!(w, vec![1.0]);
        sgd_step(&mut w, &[2.0], 0.5).unwrap();
        assert_eq!(w, vec![0.0]);
        assert!(matches!(sgd_step(&mut w, &[f64::NAN], 0.5), Err(Error::NonFiniteGradient { .. })));
        assert_eq!(w, vec![0.0]);
    }

    #[test]
    fn quadratic_converges() {
        let mut w = vec![0.0];
        for _ in 0..200 {
            let g = 2.0 * (w[0] - 3.0);
            sgd_step(&mut w, &[g], 0.1).unwrap();
        }
        assert!((w[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn zero_lr_freezes_with_momentum() {
        let mut opt = Sgd::new(0.9);
        let mut p = vec![vec![1.0, -2.0]];
        for _ in 0..5 {
            opt.step(&mut p, &[vec![0.3, 0.7]], 0.0).unwrap();
        }
        assert_eq!(p, vec![vec![1.0, -2.0]]);
    }

    #[test]
    fn plateau_examples() {
        let mut s = PlateauSchedule::new(1e-3, 0.5, 50, f64::INFINITY).unwrap();
        for k in 0..300 {
            assert_eq!(s.observe(10.0 - k as f64 * 0.01), 1e-3);
        }

        let mut s = PlateauSchedule::new(1e-3, 0.5, 50, 1.0).unwrap();
        for epoch in 1..=50 {
            let lr = s.observe(1.0);
            assert_eq!(lr, if epoch == 50 { 5e-4 } else { 1e-3 }, "epoch {epoch}");
        }
        for _ in 51..=150 {
            s.observe(1.0);
        }
        assert_eq!(s.lr, 1e-3 / 8.0);

        let mut s = PlateauSchedule::new(2e-6, 0.5, 1, 1.0).unwrap();
        s.observe(1.0);
        s.observe(1.0);
        assert_eq!(s.lr, LR_FLOOR);
    }
}
