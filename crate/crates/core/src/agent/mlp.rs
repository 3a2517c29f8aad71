use rand::Rng;

use crate::error::{invalid, Result};

/// Fully connected network with ReLU hidden layers and a linear output.
///
/// All parameters live in one flat buffer, layer-major; each layer stores its
/// weight matrix row-major (`out x in`) followed by its bias vector. The same
/// layout is used for gradients, optimizer state and checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    /// Start offset of each layer's weights in `params`.
    offsets: Vec<usize>,
}

/// Activations recorded by [`Mlp::forward_cached`]; `acts[0]` is the input
/// and `acts[l]` the (post-ReLU) output of layer `l - 1`.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    acts: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace has at least the input")
    }
}

impl Mlp {
    /// Zero-initialized network with the given layer widths (input first).
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|s| *s > 0), "invalid layer sizes {sizes:?}");
        let mut offsets = Vec::with_capacity(sizes.len() - 1);
        let mut total = 0;
        for pair in sizes.windows(2) {
            offsets.push(total);
            total += pair[0] * pair[1] + pair[1];
        }
        Self { sizes: sizes.to_vec(), params: vec![0.0; total], offsets }
    }

    /// He-style uniform init, `U(-sqrt(6 / fan_in), +sqrt(6 / fan_in))`, zero
    /// biases. The output layer's range is multiplied by `output_scale`.
    pub fn he_uniform(sizes: &[usize], output_scale: f64, rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(sizes);
        let layers = net.num_layers();
        for l in 0..layers {
            let (fan_in, fan_out) = (net.sizes[l], net.sizes[l + 1]);
            let mut bound = (6.0 / fan_in as f64).sqrt();
            if l + 1 == layers {
                bound *= output_scale;
            }
            let start = net.offsets[l];
            for w in &mut net.params[start..start + fan_in * fan_out] {
                *w = rng.random_range(-bound..=bound);
            }
        }
        net
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.params.len() {
            return invalid(format!("expected {} parameters, got {}", self.params.len(), values.len()));
        }
        self.params.copy_from_slice(values);
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        for l in 0..self.num_layers() {
            x = self.layer(l, &x);
        }
        x
    }

    pub fn forward_cached(&self, input: &[f64]) -> ForwardTrace {
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(input.to_vec());
        for l in 0..self.num_layers() {
            let next = self.layer(l, acts.last().unwrap());
            acts.push(next);
        }
        ForwardTrace { acts }
    }

    /// Outputs for every input `[prefix, e_k]` where `e_k` ranges over the
    /// one-hot vectors filling the remaining input width. Shares the prefix
    /// part of the first layer across all `k`.
    pub fn forward_one_hot_suffixes(&self, prefix: &[f64]) -> Vec<Vec<f64>> {
        let (n_in, n_out) = (self.sizes[0], self.sizes[1]);
        let p = prefix.len();
        assert!(p < n_in, "prefix must leave room for a one-hot suffix");
        let w = &self.params[..n_in * n_out];
        let b = &self.params[n_in * n_out..n_in * n_out + n_out];
        let shared: Vec<f64> = w
            .chunks_exact(n_in)
            .zip(b)
            .map(|(row, bias)| row[..p].iter().zip(prefix).map(|(a, x)| a * x).sum::<f64>() + bias)
            .collect();
        let hidden = self.num_layers() > 1;
        (0..n_in - p)
            .map(|k| {
                let mut x: Vec<f64> = shared
                    .iter()
                    .zip(w.chunks_exact(n_in))
                    .map(|(s, row)| {
                        let z = s + row[p + k];
                        if hidden {
                            z.max(0.0)
                        } else {
                            z
                        }
                    })
                    .collect();
                for l in 1..self.num_layers() {
                    x = self.layer(l, &x);
                }
                x
            })
            .collect()
    }

    fn layer(&self, l: usize, x: &[f64]) -> Vec<f64> {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        debug_assert_eq!(x.len(), n_in);
        let w = &self.params[self.offsets[l]..self.offsets[l] + n_in * n_out];
        let b = &self.params[self.offsets[l] + n_in * n_out..self.offsets[l] + n_in * n_out + n_out];
        let hidden = l + 1 < self.num_layers();
        w.chunks_exact(n_in)
            .zip(b)
            .map(|(row, bias)| {
                let z = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias;
                if hidden {
                    z.max(0.0)
                } else {
                    z
                }
            })
            .collect()
    }

    /// Accumulates `dL/dparams` into `grads` given `dL/doutput`; returns `dL/dinput`.
    pub fn backward(&self, trace: &ForwardTrace, d_out: &[f64], grads: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(grads.len(), self.params.len());
        let mut delta = d_out.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let input = &trace.acts[l];
            let w_off = self.offsets[l];
            let b_off = w_off + n_in * n_out;
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &mut grads[w_off + o * n_in..w_off + (o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grads[b_off + o] += d;
            }
            let w = &self.params[w_off..b_off];
            let mut d_in = vec![0.0; n_in];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (di, wv) in d_in.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *di += wv * d;
                }
            }
            if l > 0 {
                // `input` is the ReLU output of the previous layer.
                for (di, a) in d_in.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *di = 0.0;
                    }
                }
            }
            delta = d_in;
        }
        delta
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Pulls `dL/dprobs` back through the softmax to `dL/dlogits`.
pub fn softmax_backward(probs: &[f64], d_probs: &[f64]) -> Vec<f64> {
    let dot: f64 = probs.iter().zip(d_probs).map(|(p, d)| p * d).sum();
    probs.iter().zip(d_probs).map(|(p, d)| p * (d - dot)).collect()
}
