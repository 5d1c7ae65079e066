//! Adagrad and Adam with per-parameter state.
//!
//! Parameters are handed over as a list of flat tensors; the optimizer keeps
//! one accumulator buffer per tensor, sized on the first step.

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_LEARNING_RATE: f64 = 0.001;

/// Learning rates searched by the optimizer sweep.
pub const SWEEP_LEARNING_RATES: [f64; 3] = [0.01, 0.001, 0.0001];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Adagrad,
    Adam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adagrad => "adagrad",
            OptimizerKind::Adam => "adam",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adagrad" => Ok(OptimizerKind::Adagrad),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!(
                "unknown optimizer {other:?} (expected adagrad or adam)"
            ))),
        }
    }
}

/// `{Adagrad, Adam} x {0.01, 0.001, 0.0001}`.
pub fn sweep_grid() -> Vec<(OptimizerKind, f64)> {
    [OptimizerKind::Adagrad, OptimizerKind::Adam]
        .into_iter()
        .flat_map(|k| SWEEP_LEARNING_RATES.into_iter().map(move |lr| (k, lr)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub epsilon: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub step_count: u64,
    /// Adagrad: running sum of squared gradients. Adam: first moment.
    pub first: Vec<Vec<f64>>,
    /// Adam: second moment. Unused by Adagrad.
    pub second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            epsilon: DEFAULT_EPSILON,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            step_count: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn adagrad(learning_rate: f64) -> Self {
        Self::new(OptimizerKind::Adagrad, learning_rate)
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self::new(OptimizerKind::Adam, learning_rate)
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        match self.kind {
            OptimizerKind::Adagrad => self.adagrad_step(params, grads),
            OptimizerKind::Adam => self.adam_step(params, grads),
        }
    }

    /// `G += g^2; theta -= lr * g / (sqrt(G) + eps)`.
    pub fn adagrad_step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        self.expect_kind(OptimizerKind::Adagrad)?;
        self.prepare(params, grads)?;
        let (lr, eps) = (self.learning_rate, self.epsilon);
        for ((theta, g), acc) in params.iter_mut().zip(grads).zip(&mut self.first) {
            for ((t, &g), a) in theta.iter_mut().zip(g.iter()).zip(acc.iter_mut()) {
                *a += g * g;
                *t -= lr * g / (a.sqrt() + eps);
            }
        }
        self.step_count += 1;
        self.check_finite(params)
    }

    /// Bias-corrected Adam.
    pub fn adam_step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        self.expect_kind(OptimizerKind::Adam)?;
        self.prepare(params, grads)?;
        self.step_count += 1;
        let t = self.step_count as i32;
        let (lr, eps, b1, b2) = (self.learning_rate, self.epsilon, self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for (((theta, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for (((p, &g), m), v) in theta.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        self.check_finite(params)
    }

    fn expect_kind(&self, requested: OptimizerKind) -> Result<()> {
        if self.kind == requested {
            Ok(())
        } else {
            Err(Error::OptimizerKind {
                actual: self.kind.name(),
                requested: requested.name(),
            })
        }
    }

    /// Validates shapes and gradients, allocating state on first use.
    fn prepare(&mut self, params: &[&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::ShapeMismatch {
                index: params.len().min(grads.len()),
                params: params.len(),
                grads: grads.len(),
            });
        }
        for (index, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(Error::ShapeMismatch {
                    index,
                    params: p.len(),
                    grads: g.len(),
                });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { index });
            }
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            if self.kind == OptimizerKind::Adam {
                self.second = self.first.clone();
            }
        }
        for (index, (p, acc)) in params.iter().zip(&self.first).enumerate() {
            if p.len() != acc.len() {
                return Err(Error::ShapeMismatch {
                    index,
                    params: p.len(),
                    grads: acc.len(),
                });
            }
        }
        if self.first.len() != params.len() {
            return Err(Error::ShapeMismatch {
                index: self.first.len().min(params.len()),
                params: params.len(),
                grads: self.first.len(),
            });
        }
        Ok(())
    }

    fn check_finite(&self, params: &[&mut [f64]]) -> Result<()> {
        let state_ok = self
            .first
            .iter()
            .chain(&self.second)
            .all(|b| b.iter().all(|v| v.is_finite()));
        let params_ok = params.iter().all(|p| p.iter().all(|v| v.is_finite()));
        if state_ok && params_ok {
            Ok(())
        } else {
            Err(Error::NonFiniteParameter("optimizer"))
        }
    }
}
