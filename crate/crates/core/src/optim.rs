//! Adam over a fixed-order list of parameter tensors.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        AdamConfig { learning_rate, ..Default::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

pub struct Adam {
    cfg: AdamConfig,
    step: u64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, shapes: &[&[usize]]) -> Self {
        Adam {
            cfg,
            step: 0,
            first_moment: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            second_moment: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }

    /// One update with bias-corrected moment estimates. `params` and `grads`
    /// must match the shapes the optimizer was built with, in order.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::Contract(format!(
                "optimizer holds {} slots, got {} params and {} grads",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.cfg.beta1.powi(t);
        let bc2 = 1.0 - self.cfg.beta2.powi(t);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            if param.shape() != grad.shape() || param.shape() != m.shape() {
                return Err(Error::Shape {
                    op: "adam-step",
                    details: format!(
                        "param {:?}, grad {:?}, state {:?}",
                        param.shape(),
                        grad.shape(),
                        m.shape()
                    ),
                });
            }
            for i in 0..param.numel() {
                let g = grad.data()[i];
                let mi = self.cfg.beta1 * m.data()[i] + (1.0 - self.cfg.beta1) * g;
                let vi = self.cfg.beta2 * v.data()[i] + (1.0 - self.cfg.beta2) * g * g;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let m_hat = mi / bc1;
                let v_hat = vi / bc2;
                param.data_mut()[i] -=
                    self.cfg.learning_rate * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic() {
        // f(x) = (x - 3)^2, gradient 2(x - 3).
        let mut x = Tensor::scalar(0.0);
        let mut adam = Adam::new(AdamConfig::with_lr(0.05), &[&[]]);
        for _ in 0..2000 {
            let g = Tensor::scalar(2.0 * (x.scalar_value().unwrap() - 3.0));
            adam.step(&mut [&mut x], &[g]).unwrap();
        }
        assert!((x.scalar_value().unwrap() - 3.0).abs() < 1e-3);
    }

    #[test]
    fn zero_learning_rate_leaves_params_unchanged() {
        let mut x = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        let before = x.clone();
        let mut adam = Adam::new(AdamConfig::with_lr(0.0), &[&[3]]);
        for _ in 0..10 {
            let g = Tensor::new(vec![3], vec![10.0, -5.0, 1.0]).unwrap();
            adam.step(&mut [&mut x], &[g]).unwrap();
        }
        assert_eq!(x, before);
    }

    #[test]
    fn first_step_size_is_about_the_learning_rate() {
        // With bias correction, step 1 moves by ~lr regardless of |g|.
        let mut x = Tensor::scalar(0.0);
        let mut adam = Adam::new(AdamConfig::with_lr(0.01), &[&[]]);
        adam.step(&mut [&mut x], &[Tensor::scalar(1234.0)]).unwrap();
        assert!((x.scalar_value().unwrap() + 0.01).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut x = Tensor::zeros(&[2]);
        let mut adam = Adam::new(AdamConfig::default(), &[&[2]]);
        assert!(adam.step(&mut [&mut x], &[Tensor::zeros(&[3])]).is_err());
        assert!(adam.step(&mut [&mut x], &[]).is_err());
    }

    #[test]
    fn updates_are_deterministic() {
        let run = || {
            let mut x = Tensor::new(vec![2], vec![0.3, -0.7]).unwrap();
            let mut adam = Adam::new(AdamConfig::with_lr(0.02), &[&[2]]);
            for i in 0..50 {
                let g = Tensor::new(vec![2], vec![(i as f64).sin(), (i as f64).cos()]).unwrap();
                adam.step(&mut [&mut x], &[g]).unwrap();
            }
            x.data().to_vec()
        };
        assert_eq!(run(), run());
    }
}
