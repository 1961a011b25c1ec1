//! Adam with bias correction and coupled weight decay.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
}

impl Adam {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    /// Updates `params` in place. `decay[i]` marks tensors that receive
    /// `weight_decay · θ` on top of their gradient.
    pub fn step(&mut self, params: &mut [&mut DenseMatrix], grads: &[DenseMatrix], decay: &[bool]) -> Result<()> {
        if params.len() != grads.len() || params.len() != decay.len() {
            return Err(Error::invalid("params, grads and decay mask differ in length"));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::shape("adam", p.shape(), g.shape()));
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| DenseMatrix::zeros(p.rows(), p.cols())).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len() || self.m.iter().zip(params.iter()).any(|(m, p)| m.shape() != p.shape()) {
            return Err(Error::invalid("parameter layout changed between steps"));
        }
        self.step += 1;
        let c1 = 1.0 - libm::pow(self.beta1, f64::from(self.step));
        let c2 = 1.0 - libm::pow(self.beta2, f64::from(self.step));
        for (i, p) in params.iter_mut().enumerate() {
            let wd = if decay[i] { self.weight_decay } else { 0.0 };
            let (m, v) = (self.m[i].data_mut(), self.v[i].data_mut());
            for (k, theta) in p.data_mut().iter_mut().enumerate() {
                let g = grads[i].data()[k] + wd * *theta;
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g * g;
                let mhat = m[k] / c1;
                let vhat = v[k] / c2;
                *theta -= self.lr * mhat / (libm::sqrt(vhat) + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_step(opt: &mut Adam, theta: &mut DenseMatrix, g: f64) {
        opt.step(&mut [theta], &[DenseMatrix::scalar(g)], &[true]).unwrap();
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut opt = Adam::new(0.01, 0.0);
        let mut theta = DenseMatrix::scalar(0.5);
        scalar_step(&mut opt, &mut theta, 1.0);
        let delta = theta.item().unwrap() - 0.5;
        assert!((delta + 0.01 / (1.0 + 1e-8)).abs() < 1e-12, "{delta}");
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut opt = Adam::new(0.01, 0.0);
        let mut theta = DenseMatrix::from_rows(&[[1.0, -2.0]]).unwrap();
        let before = theta.clone();
        for _ in 0..5 {
            opt.step(&mut [&mut theta], &[DenseMatrix::zeros(1, 2)], &[true]).unwrap();
        }
        assert_eq!(theta, before);
    }

    #[test]
    fn decay_only_touches_marked_tensors() {
        let mut opt = Adam::new(0.01, 0.5);
        let mut w = DenseMatrix::scalar(1.0);
        let mut b = DenseMatrix::scalar(1.0);
        let zero = DenseMatrix::scalar(0.0);
        opt.step(&mut [&mut w, &mut b], &[zero.clone(), zero], &[true, false]).unwrap();
        assert!(w.item().unwrap() < 1.0);
        assert_eq!(b.item().unwrap(), 1.0);
    }

    #[test]
    fn matches_reference_trace_on_square() {
        // Straight-line Adam on f(θ) = θ², written independently of the matrix code.
        let (lr, b1, b2, eps) = (0.1_f64, 0.9_f64, 0.999_f64, 1e-8);
        let (mut th, mut m, mut v) = (1.0_f64, 0.0_f64, 0.0_f64);
        let mut opt = Adam::new(lr, 0.0);
        let mut theta = DenseMatrix::scalar(1.0);
        let mut trace = Vec::new();
        for t in 1..=100 {
            let g = 2.0 * th;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            th -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
            let grad = 2.0 * theta.item().unwrap();
            scalar_step(&mut opt, &mut theta, grad);
            assert!((theta.item().unwrap() - th).abs() < 1e-12, "step {t}");
            trace.push(th.abs());
        }
        assert!(trace[99] < trace[0]);
        assert!(trace[99] < 0.1);
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let mut opt = Adam::new(0.01, 0.0);
        let mut theta = DenseMatrix::zeros(2, 2);
        let err = opt.step(&mut [&mut theta], &[DenseMatrix::zeros(1, 2)], &[true]);
        assert!(matches!(err, Err(Error::Shape { .. })));
        assert!(opt.step(&mut [&mut theta], &[], &[]).is_err());
    }
}
