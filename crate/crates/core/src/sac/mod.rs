//! Soft actor-critic with a separate soft state-value network.
//!
//! The agent owns a squashed Gaussian actor, twin Q critics, a value network
//! with a Polyak-averaged target copy and a learned entropy temperature. All
//! gradients are computed by explicit backpropagation through [`crate::nn`].

mod agent;
mod document;
mod policy;
mod replay;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::AdamParams;

pub use agent::{
    actor_loss_grad, alpha_loss_grad, regression_loss_grad, ActorOutcome, Batch, LossReport,
    SacAgent,
};
pub use document::{DocumentError, ModelDocument, MODEL_SCHEMA};
pub use policy::{GaussianPolicy, PolicySample};
pub use replay::{ReplayBuffer, Transition};

/// Observation width.
pub const STATE_DIM: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SacError {
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("non-finite observation component {index}")]
    NonFiniteState { index: usize },
    #[error("non-finite {which} loss ({value}) at update {update}")]
    NonFiniteLoss {
        which: &'static str,
        value: f64,
        update: u64,
    },
    #[error("invalid agent configuration: {0}")]
    Config(String),
}

/// Agent hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub target_entropy: f64,
    pub log_std_min: f64,
    pub log_std_max: f64,
    pub hidden_sizes: Vec<usize>,
    pub output_init_scale: f64,
    pub initial_log_alpha: f64,
    pub optimizer: AdamParams,
    /// Per-component divisor applied to observations before every network.
    pub state_scale: [f64; STATE_DIM],
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            batch_size: 256,
            target_entropy: -1.0,
            log_std_min: -20.0,
            log_std_max: 2.0,
            hidden_sizes: vec![32, 32],
            output_init_scale: 1e-2,
            initial_log_alpha: 0.0,
            optimizer: AdamParams::default(),
            state_scale: [0.25, 0.25, 0.6, 0.6, 0.1, 0.1, 0.4, 0.4],
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), SacError> {
        let err = |m: &str| Err(SacError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return err("gamma outside [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return err("tau outside [0, 1]");
        }
        if self.batch_size == 0 {
            return err("batch_size must be positive");
        }
        // Also rejects NaN bounds.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.log_std_min < self.log_std_max) {
            return err("log_std_min must be below log_std_max");
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return err("hidden_sizes must be non-empty and positive");
        }
        if self.state_scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return err("state_scale entries must be positive");
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0 && (0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2))
        {
            return err("invalid optimizer parameters");
        }
        let finite = [
            self.target_entropy,
            self.output_init_scale,
            self.initial_log_alpha,
            o.epsilon,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return err("non-finite hyperparameter");
        }
        Ok(())
    }

    pub fn actor_sizes(&self) -> Vec<usize> {
        self.sizes(STATE_DIM, 2)
    }

    pub fn critic_sizes(&self) -> Vec<usize> {
        self.sizes(STATE_DIM + 1, 1)
    }

    pub fn value_sizes(&self) -> Vec<usize> {
        self.sizes(STATE_DIM, 1)
    }

    fn sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut s = vec![input];
        s.extend_from_slice(&self.hidden_sizes);
        s.push(output);
        s
    }
}
