use alloc::vec;
use alloc::vec::Vec;

use super::Tensor;
use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Multiplier applied to the learning rate on each decay.
    pub decay_factor: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, decay_factor: 0.1 }
    }
}

/// Bias-corrected Adam with one moment pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    config: AdamConfig,
    lr: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Result<Self> {
        if !(config.lr > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(Self {
            config,
            lr: config.lr,
            step: 0,
            first: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            second: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        })
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Multiply the learning rate by the decay factor.
    pub fn decay(&mut self) {
        self.lr *= self.config.decay_factor;
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::ShapeMismatch { expected: vec![self.first.len()], got: vec![params.len(), grads.len()] });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.len() != m.len() {
                return Err(Error::ShapeMismatch { expected: vec![m.len()], got: p.shape().to_vec() });
            }
            g.ensure_shape(p.shape())?;
        }
        self.step += 1;
        let AdamConfig { beta1, beta2, eps, .. } = self.config;
        let t = self.step.min(i32::MAX as u64) as i32;
        let bias1 = 1.0 - math::powi(beta1, t);
        let bias2 = 1.0 - math::powi(beta2, t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            for (((theta, &grad), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * grad;
                *v = beta2 * *v + (1.0 - beta2) * grad * grad;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *theta -= self.lr * m_hat / (math::sqrt(v_hat) + eps);
            }
        }
        Ok(())
    }
}

/// When to decay the learning rate.
#[derive(Debug, Clone, PartialEq)]
pub enum LrSchedule {
    Constant,
    /// Decay when the mean loss of a `window`-step block fails to improve on
    /// the best block mean by at least `min_improvement`; at most `max_decays` times.
    Plateau { window: usize, min_improvement: f64, max_decays: usize },
    /// Decay after each listed step count (1-based).
    Milestones(Vec<usize>),
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule::Plateau { window: 100, min_improvement: 1e-4, max_decays: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct LrScheduler {
    schedule: LrSchedule,
    steps: usize,
    block_sum: f64,
    best_mean: f64,
    decays: usize,
}

impl LrScheduler {
    pub fn new(schedule: LrSchedule) -> Self {
        Self { schedule, steps: 0, block_sum: 0.0, best_mean: f64::INFINITY, decays: 0 }
    }

    pub fn decays(&self) -> usize {
        self.decays
    }

    /// Record one step's loss; returns `true` when the optimizer should decay now.
    pub fn observe(&mut self, loss: f64) -> bool {
        self.steps += 1;
        match &self.schedule {
            LrSchedule::Constant => false,
            LrSchedule::Milestones(steps) => {
                let hit = steps.contains(&self.steps);
                if hit {
                    self.decays += 1;
                }
                hit
            }
            &LrSchedule::Plateau { window, min_improvement, max_decays } => {
                self.block_sum += loss;
                if window == 0 || !self.steps.is_multiple_of(window) {
                    return false;
                }
                let mean = self.block_sum / window as f64;
                self.block_sum = 0.0;
                if self.best_mean - mean >= min_improvement {
                    self.best_mean = mean;
                    return false;
                }
                self.best_mean = self.best_mean.min(mean);
                if self.decays < max_decays {
                    self.decays += 1;
                    true
                } else {
                    false
                }
            }
        }
    }
}
