//! Small dense networks with hand-written backpropagation.
//!
//! All networks are `in -> hidden -> ... -> out` with tanh hidden activations
//! and a linear output layer. Batches are row-major: one example per row.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// One fully connected layer, `weight` has shape `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<S> {
    pub weight: Array2<S>,
    pub bias: Array1<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    fn affine(&self, x: &ArrayView2<S>) -> Array2<S> {
        x.dot(&self.weight.t()) + &self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<S> {
    pub layers: Vec<Dense<S>>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache<S> {
    /// Input to every layer; entries past the first are tanh outputs.
    inputs: Vec<Array2<S>>,
}

impl<S: Scalar> Mlp<S> {
    /// A network with layer widths `sizes`, all parameters zero.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output widths");
        Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    /// Fan-in scaled uniform init, with the output layer shrunk by `output_scale`.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], output_scale: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        let last = net.layers.len() - 1;
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let bound = 1.0 / (layer.inputs() as f64).sqrt();
            let scale = if i == last { output_scale } else { 1.0 };
            for w in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
                *w = S::lit(rng.gen_range(-bound..bound) * scale);
            }
        }
        net
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs()];
        s.extend(self.layers.iter().map(Dense::outputs));
        s
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.sizes())
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Forward pass without keeping activations.
    pub fn forward(&self, x: ArrayView2<S>) -> Array2<S> {
        let mut h = self.layers[0].affine(&x);
        for layer in &self.layers[1..] {
            h.mapv_inplace(S::tanh_fast);
            h = layer.affine(&h.view());
        }
        h
    }

    /// Forward pass that records what [`Mlp::backward`] needs.
    pub fn forward_cached(&self, x: ArrayView2<S>) -> (Array2<S>, MlpCache<S>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        inputs.push(x.to_owned());
        let mut h = self.layers[0].affine(&x);
        for layer in &self.layers[1..] {
            h.mapv_inplace(S::tanh_fast);
            let next = layer.affine(&h.view());
            inputs.push(h);
            h = next;
        }
        (h, MlpCache { inputs })
    }

    /// Backpropagates `grad_out` (d loss / d output, shape `(batch, out)`).
    ///
    /// Returns parameter gradients shaped like `self` and, if requested, the
    /// gradient with respect to the network input.
    pub fn backward(
        &self,
        cache: &MlpCache<S>,
        grad_out: Array2<S>,
        want_input_grad: bool,
    ) -> (Mlp<S>, Option<Array2<S>>) {
        let mut grads: Vec<Dense<S>> = Vec::with_capacity(self.layers.len());
        let mut delta = grad_out;
        let mut input_grad = None;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.inputs[i];
            grads.push(Dense {
                weight: delta.t().dot(x),
                bias: delta.sum_axis(Axis(0)),
            });
            if i > 0 {
                let mut back = delta.dot(&layer.weight);
                // x here is the tanh output of the previous layer.
                ndarray::Zip::from(&mut back)
                    .and(x)
                    .for_each(|g, &h| *g = *g * (S::one() - h * h));
                delta = back;
            } else if want_input_grad {
                input_grad = Some(delta.dot(&layer.weight));
            }
        }
        grads.reverse();
        (Mlp { layers: grads }, input_grad)
    }

    /// Gradient with respect to the input only; parameter gradients are skipped.
    pub fn input_gradient(&self, cache: &MlpCache<S>, grad_out: Array2<S>) -> Array2<S> {
        let mut delta = grad_out;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let mut back = delta.dot(&layer.weight);
            if i > 0 {
                ndarray::Zip::from(&mut back)
                    .and(&cache.inputs[i])
                    .for_each(|g, &h| *g = *g * (S::one() - h * h));
            }
            delta = back;
        }
        delta
    }

    /// Parameters as flat slices, in a fixed order: per layer, weight then bias.
    pub fn param_slices(&self) -> Vec<&[S]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [S]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn params(&self) -> impl Iterator<Item = S> + '_ {
        self.param_slices().into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn all_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    /// `self <- (1 - tau) * self + tau * source`.
    pub fn soft_update_from(&mut self, source: &Mlp<S>, tau: S) {
        let keep = S::one() - tau;
        for (dst, src) in self.param_slices_mut().into_iter().zip(source.param_slices()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = keep * *d + tau * s;
            }
        }
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S> {
    pub step: u64,
    pub m: Vec<Vec<S>>,
    pub v: Vec<Vec<S>>,
}

impl<S: Scalar> AdamState<S> {
    /// Zeroed moments for slices of the given lengths.
    pub fn new(lengths: &[usize]) -> Self {
        Self {
            step: 0,
            m: lengths.iter().map(|&n| vec![S::zero(); n]).collect(),
            v: lengths.iter().map(|&n| vec![S::zero(); n]).collect(),
        }
    }

    pub fn for_net(net: &Mlp<S>) -> Self {
        let lens: Vec<usize> = net.param_slices().iter().map(|s| s.len()).collect();
        Self::new(&lens)
    }

    /// One bias-corrected Adam step: `params -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, hp: &AdamParams, params: Vec<&mut [S]>, grads: Vec<&[S]>) {
        assert_eq!(params.len(), self.m.len(), "parameter group shape changed");
        self.step += 1;
        let t = self.step as i32;
        let b1 = S::lit(hp.beta1);
        let b2 = S::lit(hp.beta2);
        let one = S::one();
        let c1 = one - S::lit(hp.beta1.powi(t));
        let c2 = one - S::lit(hp.beta2.powi(t));
        let lr = S::lit(hp.learning_rate);
        let eps = S::lit(hp.epsilon);
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            assert_eq!(p.len(), g.len());
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }

    pub fn step_net(&mut self, hp: &AdamParams, net: &mut Mlp<S>, grad: &Mlp<S>) {
        self.step(hp, net.param_slices_mut(), grad.param_slices());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_and_param_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::<f64>::init(&[8, 32, 32, 2], 1e-2, &mut rng);
        assert_eq!(net.sizes(), vec![8, 32, 32, 2]);
        assert_eq!(net.num_params(), 8 * 32 + 32 + 32 * 32 + 32 + 32 * 2 + 2);
        let out = net.forward(Array2::zeros((5, 8)).view());
        assert_eq!(out.dim(), (5, 2));
    }

    #[test]
    fn small_output_init_gives_near_zero_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::<f64>::init(&[8, 32, 32, 1], 1e-2, &mut rng);
        let x = Array2::from_elem((4, 8), 0.7);
        assert!(net.forward(x.view()).iter().all(|v| v.abs() < 0.05));
    }

    #[test]
    fn cached_forward_matches_plain_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::<f32>::init(&[3, 4, 2], 1.0, &mut rng);
        let x = array![[0.1f32, -0.2, 0.3], [1.0, 0.5, -1.0]];
        let (a, _) = net.forward_cached(x.view());
        assert_eq!(a, net.forward(x.view()));
    }

    #[test]
    fn soft_update_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let src = Mlp::<f64>::init(&[2, 3, 1], 1.0, &mut rng);
        let orig = Mlp::<f64>::init(&[2, 3, 1], 1.0, &mut rng);
        let mut dst = orig.clone();
        dst.soft_update_from(&src, 0.0);
        assert_eq!(dst, orig);
        dst.soft_update_from(&src, 1.0);
        assert_eq!(dst, src);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let hp = AdamParams::default();
        let mut p = [1.0f64, -1.0];
        let g = [0.5, -2.0];
        let mut st = AdamState::new(&[2]);
        st.step(&hp, vec![&mut p[..]], vec![&g[..]]);
        assert_eq!(st.step, 1);
        assert!((p[0] - (1.0 - 3e-4)).abs() < 1e-9);
        assert!((p[1] - (-1.0 + 3e-4)).abs() < 1e-9);
    }
}
