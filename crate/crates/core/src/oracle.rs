//! Test-only reference implementations.
//!
//! Losses are recomputed here with plain per-example loops, independent of the
//! batched `ndarray` path, and differentiated by central finite differences.
//! Only compiled for tests or with the `test-oracle` feature.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::Mlp;
use crate::sac::{actor_loss_grad, alpha_loss_grad, regression_loss_grad, GaussianPolicy};

/// Naive forward pass of one example.
pub fn naive_forward(net: &Mlp<f64>, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    let last = net.layers.len() - 1;
    for (li, layer) in net.layers.iter().enumerate() {
        let mut out = vec![0.0; layer.outputs()];
        for (o, slot) in out.iter_mut().enumerate() {
            let mut acc = layer.bias[o];
            for (i, hv) in h.iter().enumerate() {
                acc += layer.weight[[o, i]] * hv;
            }
            *slot = if li == last { acc } else { acc.tanh() };
        }
        h = out;
    }
    h
}

pub fn naive_regression_loss(net: &Mlp<f64>, inputs: &Array2<f64>, targets: &Array1<f64>) -> f64 {
    let n = inputs.nrows() as f64;
    inputs
        .rows()
        .into_iter()
        .zip(targets)
        .map(|(row, t)| {
            let e = naive_forward(net, row.as_slice().unwrap())[0] - t;
            0.5 * e * e
        })
        .sum::<f64>()
        / n
}

/// Per-example `(action, log_prob)` for the squashed Gaussian, textbook form.
pub fn naive_policy_sample(policy: &GaussianPolicy<f64>, s: &[f64], eps: f64) -> (f64, f64) {
    let out = naive_forward(&policy.trunk, s);
    let ls = out[1].clamp(policy.log_std_min, policy.log_std_max);
    let u = out[0] + ls.exp() * eps;
    let a = u.tanh();
    let gauss = -0.5 * eps * eps - ls - 0.5 * (2.0 * std::f64::consts::PI).ln();
    (a, gauss - (1.0 - a * a).ln())
}

pub fn naive_actor_loss(
    policy: &GaussianPolicy<f64>,
    q1: &Mlp<f64>,
    q2: &Mlp<f64>,
    states: &Array2<f64>,
    noise: &Array1<f64>,
    alpha: f64,
) -> f64 {
    let n = states.nrows() as f64;
    let mut total = 0.0;
    for (row, &e) in states.rows().into_iter().zip(noise) {
        let s = row.as_slice().unwrap();
        let (a, logp) = naive_policy_sample(policy, s, e);
        let mut sa = s.to_vec();
        sa.push(a);
        let q = naive_forward(q1, &sa)[0].min(naive_forward(q2, &sa)[0]);
        total += alpha * logp - q;
    }
    total / n
}

pub fn naive_alpha_loss(log_alpha: f64, log_probs: &[f64], target_entropy: f64) -> f64 {
    let n = log_probs.len() as f64;
    -log_alpha.exp() * log_probs.iter().map(|l| l + target_entropy).sum::<f64>() / n
}

/// Worst relative error between analytic and central-difference gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
}

/// Relative error with an absolute floor so that vanishing gradients are
/// compared on an absolute scale.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Central differences of `loss` over every parameter of `net`.
pub fn check_network<F>(net: &mut Mlp<f64>, analytic: &Mlp<f64>, h: f64, floor: f64, loss: F) -> GradCheck
where
    F: Fn(&Mlp<f64>) -> f64,
{
    let grads: Vec<f64> = analytic.params().collect();
    let mut worst: f64 = 0.0;
    let mut k = 0;
    let n_slices = net.param_slices().len();
    for si in 0..n_slices {
        let len = net.param_slices()[si].len();
        for j in 0..len {
            let orig = net.param_slices()[si][j];
            net.param_slices_mut()[si][j] = orig + h;
            let up = loss(net);
            net.param_slices_mut()[si][j] = orig - h;
            let down = loss(net);
            net.param_slices_mut()[si][j] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(grads[k], numeric, floor));
            k += 1;
        }
    }
    GradCheck {
        max_rel_error: worst,
        checked: k,
    }
}

/// Finite-difference step and absolute floor used by the gradient checks.
pub const FD_STEP: f64 = 1e-5;
pub const FD_FLOOR: f64 = 1e-6;

fn random_states<R: Rng>(n: usize, width: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((n, width), |_| rng.gen_range(-1.0..1.0))
}

fn random_net<R: Rng>(sizes: &[usize], rng: &mut R) -> Mlp<f64> {
    Mlp::init(sizes, 1.0, rng)
}

/// Summary of one randomised check of all four objectives.
#[derive(Debug, Clone, Copy)]
pub struct SacGradReport {
    pub critic: GradCheck,
    pub value: GradCheck,
    pub actor: GradCheck,
    pub log_alpha: f64,
}

impl SacGradReport {
    pub fn worst(&self) -> f64 {
        self.critic
            .max_rel_error
            .max(self.value.max_rel_error)
            .max(self.actor.max_rel_error)
            .max(self.log_alpha)
    }
}

/// Draws random networks, a random batch and random policy noise, then checks
/// every analytic gradient of the critic, value, actor and temperature
/// objectives against central differences.
///
/// Batches are redrawn until no example sits on a non-differentiable point:
/// an active log-std clamp or a near tie between the two critics.
pub fn check_sac_gradients<R: Rng>(rng: &mut R, batch: usize) -> SacGradReport {
    let hidden = [32usize, 32];
    let sizes = |i: usize, o: usize| [i, hidden[0], hidden[1], o];
    let mut q1 = random_net(&sizes(9, 1), rng);
    let q2 = random_net(&sizes(9, 1), rng);
    let mut v = random_net(&sizes(8, 1), rng);
    let trunk = random_net(&sizes(8, 2), rng);
    let mut policy = GaussianPolicy::new(trunk, -20.0, 2.0);
    let alpha: f64 = rng.gen_range(0.05..2.0);
    let log_alpha = alpha.ln();
    let target_entropy = -1.0;

    let (states, noise) = loop {
        let states = random_states(batch, 8, rng);
        let noise: Array1<f64> = (0..batch).map(|_| rng.sample(StandardNormal)).collect();
        let ok = states.rows().into_iter().zip(&noise).all(|(row, &e)| {
            let s = row.as_slice().unwrap();
            let out = naive_forward(&policy.trunk, s);
            let clamp_free = out[1] > -19.9 && out[1] < 1.9;
            let (a, _) = naive_policy_sample(&policy, s, e);
            let mut sa = s.to_vec();
            sa.push(a);
            let gap = (naive_forward(&q1, &sa)[0] - naive_forward(&q2, &sa)[0]).abs();
            clamp_free && gap > 1e-3
        });
        if ok {
            break (states, noise);
        }
    };

    // Critic regression.
    let actions: Array1<f64> = (0..batch).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut sa = Array2::zeros((batch, 9));
    for i in 0..batch {
        for j in 0..8 {
            sa[[i, j]] = states[[i, j]];
        }
        sa[[i, 8]] = actions[i];
    }
    let targets: Array1<f64> = (0..batch).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let (_, g) = regression_loss_grad(&q1, sa.view(), targets.view());
    let critic = check_network(&mut q1, &g, FD_STEP, FD_FLOOR, |net| {
        naive_regression_loss(net, &sa, &targets)
    });

    // Value regression.
    let v_targets: Array1<f64> = (0..batch).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let (_, g) = regression_loss_grad(&v, states.view(), v_targets.view());
    let value = check_network(&mut v, &g, FD_STEP, FD_FLOOR, |net| {
        naive_regression_loss(net, &states, &v_targets)
    });

    // Actor through the reparameterised sample and min-Q.
    let out = actor_loss_grad(&policy, &q1, &q2, states.view(), noise.view(), alpha);
    let (min, max) = (policy.log_std_min, policy.log_std_max);
    let actor = check_network(&mut policy.trunk, &out.grad, FD_STEP, FD_FLOOR, |trunk| {
        let p = GaussianPolicy::new(trunk.clone(), min, max);
        naive_actor_loss(&p, &q1, &q2, &states, &noise, alpha)
    });

    // Temperature.
    let logps: Vec<f64> = out.log_probs.to_vec();
    let (_, g_alpha) = alpha_loss_grad(log_alpha, out.log_probs.view(), target_entropy);
    let numeric = (naive_alpha_loss(log_alpha + FD_STEP, &logps, target_entropy)
        - naive_alpha_loss(log_alpha - FD_STEP, &logps, target_entropy))
        / (2.0 * FD_STEP);
    let log_alpha_err = relative_error(g_alpha, numeric, FD_FLOOR);

    SacGradReport {
        critic,
        value,
        actor,
        log_alpha: log_alpha_err,
    }
}
