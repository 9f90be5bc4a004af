//! Dense tanh network over a flat parameter vector.
//!
//! Layer `k` maps `sizes[k]` inputs to `sizes[k + 1]` outputs. Its weights
//! are stored row-major (`out × in`) followed by its biases. Hidden layers
//! use tanh; the last layer is linear.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer inputs recorded by [`Mlp::forward_cached`]; the last entry is the output.
#[derive(Debug, Clone)]
pub struct Activations(Vec<Vec<f64>>);

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.0.last().expect("at least the input is recorded")
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases; the output layer is scaled by `output_gain`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output_gain: f64, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!("bad layer sizes {sizes:?}")));
        }
        let n_layers = sizes.len() - 1;
        let mut params = Vec::with_capacity(param_count(sizes));
        for k in 0..n_layers {
            let (fan_in, fan_out) = (sizes[k], sizes[k + 1]);
            let gain = if k + 1 == n_layers { output_gain } else { 1.0 };
            let limit = gain * (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)));
            params.resize(params.len() + fan_out, 0.0);
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn from_parts(sizes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) || params.len() != param_count(&sizes) {
            return Err(Error::Checkpoint(format!(
                "{} parameters do not fit layer sizes {sizes:?}",
                params.len()
            )));
        }
        Ok(Self { sizes, params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        self.each_layer(|k, w, b, last| {
            x = affine(w, b, &x, self.sizes[k + 1]);
            if !last {
                x.iter_mut().for_each(|v| *v = v.tanh());
            }
        });
        x
    }

    pub fn forward_cached(&self, input: &[f64]) -> Activations {
        let mut acts = vec![input.to_vec()];
        self.each_layer(|k, w, b, last| {
            let mut y = affine(w, b, acts.last().unwrap(), self.sizes[k + 1]);
            if !last {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(y);
        });
        Activations(acts)
    }

    /// Accumulates `∂L/∂θ` into `grads` given `∂L/∂output`.
    pub fn backward(&self, acts: &Activations, grad_output: &[f64], grads: &mut [f64]) {
        debug_assert_eq!(grads.len(), self.params.len());
        let n_layers = self.sizes.len() - 1;
        let offsets = layer_offsets(&self.sizes);
        let mut delta = grad_output.to_vec();
        for k in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.sizes[k], self.sizes[k + 1]);
            let x = &acts.0[k];
            let w_off = offsets[k];
            let b_off = w_off + fan_in * fan_out;
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grads[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += d * xi;
                }
                grads[b_off + o] += d;
            }
            if k == 0 {
                break;
            }
            // back through W, then through the tanh that produced x
            let w = &self.params[w_off..b_off];
            let mut prev = vec![0.0; fan_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (p, wi) in prev.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                    *p += d * wi;
                }
            }
            for (p, xi) in prev.iter_mut().zip(x) {
                *p *= 1.0 - xi * xi;
            }
            delta = prev;
        }
    }

    fn each_layer(&self, mut f: impl FnMut(usize, &[f64], &[f64], bool)) {
        let n_layers = self.sizes.len() - 1;
        let mut off = 0;
        for k in 0..n_layers {
            let n_w = self.sizes[k] * self.sizes[k + 1];
            let w = &self.params[off..off + n_w];
            let b = &self.params[off + n_w..off + n_w + self.sizes[k + 1]];
            f(k, w, b, k + 1 == n_layers);
            off += n_w + self.sizes[k + 1];
        }
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64], fan_out: usize) -> Vec<f64> {
    let fan_in = x.len();
    (0..fan_out)
        .map(|o| {
            w[o * fan_in..(o + 1) * fan_in]
                .iter()
                .zip(x)
                .fold(b[o], |acc, (wi, xi)| acc + wi * xi)
        })
        .collect()
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn layer_offsets(sizes: &[usize]) -> Vec<usize> {
    sizes
        .windows(2)
        .scan(0, |off, w| {
            let here = *off;
            *off += w[0] * w[1] + w[1];
            Some(here)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_and_parameter_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[5, 64, 64, 150], 0.01, &mut rng).unwrap();
        assert_eq!(net.params().len(), 5 * 64 + 64 + 64 * 64 + 64 + 64 * 150 + 150);
        assert_eq!(net.forward(&[0.1; 5]).len(), 150);
        assert!(Mlp::new(&[5], 1.0, &mut rng).is_err());
        assert!(Mlp::new(&[5, 0, 3], 1.0, &mut rng).is_err());
        assert!(Mlp::from_parts(vec![2, 2], vec![0.0; 5]).is_err());
    }

    #[test]
    fn cached_forward_matches_plain_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::new(&[3, 8, 8, 4], 1.0, &mut rng).unwrap();
        let x = [0.3, -0.7, 0.9];
        assert_eq!(net.forward(&x), net.forward_cached(&x).output());
    }

    /// Finite-difference check of the backward pass for a linear readout of the output.
    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Mlp::new(&[3, 6, 5, 2], 1.0, &mut rng).unwrap();
        let x = [0.2, 0.5, -0.4];
        let c = [0.7, -1.3];
        let loss = |n: &Mlp| n.forward(&x).iter().zip(&c).map(|(y, ci)| y * ci).sum::<f64>();

        let mut grads = vec![0.0; net.params().len()];
        net.backward(&net.forward_cached(&x), &c, &mut grads);

        let h = 1e-6;
        for (i, &analytic) in grads.iter().enumerate() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let up = loss(&net);
            net.params_mut()[i] = orig - h;
            let down = loss(&net);
            net.params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            assert!((numeric - analytic).abs() < 1e-7, "param {i}: {numeric} vs {analytic}");
        }
    }
}
