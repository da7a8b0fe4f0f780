use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::nn::{Mlp, MlpCache};
use crate::scalar::Scalar;

/// Gaussian over the pre-squash action, squashed through tanh.
///
/// The trunk emits `(mean, raw log-std)` per state; the log-std is clamped to
/// `[log_std_min, log_std_max]` before use.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy<S> {
    pub trunk: Mlp<S>,
    pub log_std_min: S,
    pub log_std_max: S,
}

/// A reparameterised batch of actions together with what backprop needs.
#[derive(Debug, Clone)]
pub struct PolicySample<S> {
    pub actions: Array1<S>,
    pub log_probs: Array1<S>,
    pub means: Array1<S>,
    pub log_stds: Array1<S>,
    pub pre_tanh: Array1<S>,
    noise: Array1<S>,
    log_std_active: Vec<bool>,
    cache: MlpCache<S>,
}

/// `ln(1 + e^z)` without overflow.
fn softplus<S: Scalar>(z: S) -> S {
    z.max(S::zero()) + (-z.abs()).exp().ln_1p()
}

/// `ln(1 - tanh(u)^2)`, finite for every finite `u`.
pub(crate) fn log_tanh_jacobian<S: Scalar>(u: S) -> S {
    let two = S::lit(2.0);
    two * (S::lit(std::f64::consts::LN_2) - u - softplus(-two * u))
}

impl<S: Scalar> GaussianPolicy<S> {
    pub fn new(trunk: Mlp<S>, log_std_min: S, log_std_max: S) -> Self {
        assert_eq!(trunk.output_width(), 2, "policy trunk must emit mean and log-std");
        Self {
            trunk,
            log_std_min,
            log_std_max,
        }
    }

    /// `tanh(mean)` for each (normalised) state row.
    pub fn mean_actions(&self, states: ArrayView2<S>) -> Array1<S> {
        self.trunk.forward(states).column(0).mapv(S::tanh)
    }

    /// Draws `tanh(mean + std * noise)` with the given standard-normal noise.
    pub fn sample(&self, states: ArrayView2<S>, noise: ArrayView1<S>) -> PolicySample<S> {
        assert_eq!(states.nrows(), noise.len());
        let (out, cache) = self.trunk.forward_cached(states);
        let means = out.column(0).to_owned();
        let raw = out.column(1);
        let log_std_active: Vec<bool> = raw
            .iter()
            .map(|&l| l >= self.log_std_min && l <= self.log_std_max)
            .collect();
        let log_stds = raw.mapv(|l| l.max(self.log_std_min).min(self.log_std_max));
        let half_ln_2pi = S::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
        let half = S::lit(0.5);
        let n = means.len();
        let mut pre_tanh = Array1::zeros(n);
        let mut actions = Array1::zeros(n);
        let mut log_probs = Array1::zeros(n);
        for i in 0..n {
            let e = noise[i];
            let u = means[i] + log_stds[i].exp() * e;
            pre_tanh[i] = u;
            actions[i] = u.tanh();
            log_probs[i] = -half * e * e - log_stds[i] - half_ln_2pi - log_tanh_jacobian(u);
        }
        PolicySample {
            actions,
            log_probs,
            means,
            log_stds,
            pre_tanh,
            noise: noise.to_owned(),
            log_std_active,
            cache,
        }
    }

    /// Trunk gradients given `d loss / d action` and `d loss / d log_prob`,
    /// holding the sampling noise fixed.
    pub fn backward(
        &self,
        sample: &PolicySample<S>,
        d_action: ArrayView1<S>,
        d_log_prob: ArrayView1<S>,
    ) -> Mlp<S> {
        let n = sample.actions.len();
        let two = S::lit(2.0);
        let mut grad_out = Array2::zeros((n, 2));
        for i in 0..n {
            let a = sample.actions[i];
            // d log_prob / d u = 2 tanh(u); d action / d u = 1 - tanh(u)^2.
            let d_u = d_action[i] * (S::one() - a * a) + d_log_prob[i] * two * a;
            grad_out[[i, 0]] = d_u;
            if sample.log_std_active[i] {
                let std = sample.log_stds[i].exp();
                grad_out[[i, 1]] = d_u * std * sample.noise[i] - d_log_prob[i];
            }
        }
        self.trunk.backward(&sample.cache, grad_out, false).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn policy_with_output(mean: f64, log_std: f64) -> GaussianPolicy<f64> {
        let mut trunk = Mlp::<f64>::zeros(&[8, 4, 2]);
        trunk.layers[1].bias[0] = mean;
        trunk.layers[1].bias[1] = log_std;
        GaussianPolicy::new(trunk, -20.0, 2.0)
    }

    #[test]
    fn zero_mean_zero_noise_gives_zero_action() {
        let p = policy_with_output(0.0, -20.0);
        let s = p.sample(Array2::zeros((1, 8)).view(), array![0.0].view());
        assert_eq!(s.actions[0], 0.0);
        assert!(s.log_probs[0].is_finite());
    }

    #[test]
    fn large_mean_saturates_below_one() {
        let p = policy_with_output(10.0, 0.0);
        let s = p.sample(Array2::zeros((1, 8)).view(), array![0.0].view());
        assert!(s.actions[0] < 1.0 && s.actions[0] > 0.999_999);
        assert!(s.log_probs[0].is_finite());
    }

    #[test]
    fn log_std_is_clamped() {
        let p = policy_with_output(0.0, 50.0);
        let s = p.sample(Array2::zeros((1, 8)).view(), array![1.0].view());
        assert_eq!(s.log_stds[0], 2.0);
    }

    #[test]
    fn log_prob_matches_change_of_variables() {
        let p = policy_with_output(0.3, -0.5);
        let e = 0.7;
        let s = p.sample(Array2::zeros((1, 8)).view(), array![e].view());
        let std = (-0.5f64).exp();
        let u = 0.3 + std * e;
        let gauss = -0.5 * e * e - (-0.5) - 0.5 * (2.0 * std::f64::consts::PI).ln();
        let expected = gauss - (1.0 - u.tanh().powi(2)).ln();
        assert!((s.log_probs[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn stable_jacobian_in_the_tails() {
        assert!(log_tanh_jacobian(40.0f64).is_finite());
        assert!(log_tanh_jacobian(-40.0f64).is_finite());
        let u = 0.4f64;
        assert!((log_tanh_jacobian(u) - (1.0 - u.tanh().powi(2)).ln()).abs() < 1e-14);
    }
}
