//! First-order optimizers over flat parameter slices.
//!
//! Momentum SGD uses the damped velocity recurrence
//! `V <- beta V + (1 - beta) g`, `W <- W - lr V`.
//! Adam is the usual bias-corrected variant.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "sgd" | "sgd_momentum" | "momentum" => Ok(Self::SgdMomentum),
            "adam" => Ok(Self::Adam),
            other => Err(format!("unknown optimizer {other:?}")),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OptimError {
    #[error("shape mismatch: state {state}, params {params}, grads {grads}")]
    ShapeMismatch { state: usize, params: usize, grads: usize },
    #[error("optimizer state is {actual:?}, expected {expected:?}")]
    WrongKind { expected: OptimizerKind, actual: OptimizerKind },
    #[error("momentum must lie in [0, 1), got {0}")]
    BadMomentum(f64),
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Momentum velocity (SGD) or first moment (Adam).
    pub first: Vec<f64>,
    /// Second moment (Adam only; empty for SGD).
    pub second: Vec<f64>,
    pub t: u64,
}

impl OptimizerState {
    pub fn sgd_momentum(len: usize, lr: f64, momentum: f64) -> Result<Self, OptimError> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(OptimError::BadMomentum(momentum));
        }
        Ok(Self {
            kind: OptimizerKind::SgdMomentum,
            lr,
            momentum,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            first: vec![0.0; len],
            second: Vec::new(),
            t: 0,
        })
    }

    pub fn adam(len: usize, lr: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr,
            momentum: 0.0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            first: vec![0.0; len],
            second: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), OptimError> {
        match self.kind {
            OptimizerKind::SgdMomentum => sgd_momentum_step(self, params, grads),
            OptimizerKind::Adam => adam_step(self, params, grads),
        }
    }

    fn check(&self, expected: OptimizerKind, params: &[f64], grads: &[f64]) -> Result<(), OptimError> {
        if self.kind != expected {
            return Err(OptimError::WrongKind { expected, actual: self.kind });
        }
        if self.first.len() != params.len() || grads.len() != params.len() {
            return Err(OptimError::ShapeMismatch { state: self.first.len(), params: params.len(), grads: grads.len() });
        }
        Ok(())
    }
}

pub fn sgd_momentum_step(state: &mut OptimizerState, params: &mut [f64], grads: &[f64]) -> Result<(), OptimError> {
    state.check(OptimizerKind::SgdMomentum, params, grads)?;
    let (beta, lr) = (state.momentum, state.lr);
    for ((w, v), g) in params.iter_mut().zip(state.first.iter_mut()).zip(grads) {
        *v = beta * *v + (1.0 - beta) * g;
        *w -= lr * *v;
    }
    state.t += 1;
    Ok(())
}

pub fn adam_step(state: &mut OptimizerState, params: &mut [f64], grads: &[f64]) -> Result<(), OptimError> {
    state.check(OptimizerKind::Adam, params, grads)?;
    if state.second.len() != params.len() {
        return Err(OptimError::ShapeMismatch { state: state.second.len(), params: params.len(), grads: grads.len() });
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.first[i] = b1 * state.first[i] + (1.0 - b1) * g;
        state.second[i] = b2 * state.second[i] + (1.0 - b2) * g * g;
        let m_hat = state.first[i] / c1;
        let v_hat = state.second[i] / c2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}
