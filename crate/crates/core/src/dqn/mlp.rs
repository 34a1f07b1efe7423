//! Fully connected network with ReLU hidden layers and a linear head.
//!
//! All weights and biases live in one flat vector, layer by layer, with each
//! layer stored as a row-major `(out, in)` weight block followed by its bias.
//! Gradients use the same layout, so the optimizer and checkpoints never need
//! to know about layer structure.

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer inputs and pre-activations kept from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.pre.last().expect("at least one layer")
    }
}

fn layout(sizes: &[usize]) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(sizes.len() - 1);
    let mut n = 0;
    for w in sizes.windows(2) {
        offsets.push(n);
        n += w[0] * w[1] + w[1];
    }
    (offsets, n)
}

/// Number of trainable parameters for the given layer sizes.
pub fn param_count(sizes: &[usize]) -> usize {
    layout(sizes).1
}

impl Mlp {
    /// Uniform fan-in initialization: each weight and bias of a layer with
    /// `n_in` inputs is drawn from `U(-1/sqrt(n_in), 1/sqrt(n_in))`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        assert!(sizes.iter().all(|&s| s > 0), "layer sizes must be positive");
        let (offsets, n) = layout(sizes);
        let mut params = Vec::with_capacity(n);
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] * w[1] + w[1]) {
                params.push(rng.random_range(-bound..bound));
            }
        }
        Self {
            sizes: sizes.to_vec(),
            offsets,
            params,
        }
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Option<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return None;
        }
        let (offsets, n) = layout(sizes);
        (params.len() == n).then(|| Self {
            sizes: sizes.to_vec(),
            offsets,
            params,
        })
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

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn zero_grads(&self) -> Vec<f64> {
        vec![0.0; self.params.len()]
    }

    pub fn copy_from(&mut self, other: &Mlp) {
        assert_eq!(self.sizes, other.sizes, "shape mismatch");
        self.params.copy_from_slice(&other.params);
    }

    pub fn zero_output_layer(&mut self) {
        let l = self.offsets.len() - 1;
        let start = self.offsets[l];
        self.params[start..].fill(0.0);
    }

    fn layer(&self, l: usize) -> (&[f64], &[f64], usize, usize) {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w0 = self.offsets[l];
        let b0 = w0 + n_in * n_out;
        (&self.params[w0..b0], &self.params[b0..b0 + n_out], n_in, n_out)
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim(), "input dimension");
        let n_layers = self.offsets.len();
        let mut h = x.to_vec();
        for l in 0..n_layers {
            let mut z = affine(self.layer(l), &h);
            if l + 1 < n_layers {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            h = z;
        }
        h
    }

    pub fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        assert_eq!(x.len(), self.input_dim(), "input dimension");
        let n_layers = self.offsets.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers);
        let mut h = x.to_vec();
        for l in 0..n_layers {
            let z = affine(self.layer(l), &h);
            let next = if l + 1 < n_layers {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                Vec::new()
            };
            inputs.push(h);
            pre.push(z);
            h = next;
        }
        ForwardCache { inputs, pre }
    }

    /// Adds the gradient of a scalar loss to `grads`, given the loss gradient
    /// with respect to the network output.
    pub fn backward(&self, cache: &ForwardCache, d_out: &[f64], grads: &mut [f64]) {
        assert_eq!(d_out.len(), self.output_dim(), "output gradient dimension");
        assert_eq!(grads.len(), self.params.len(), "gradient buffer length");
        let mut delta = d_out.to_vec();
        for l in (0..self.offsets.len()).rev() {
            let (w, _, n_in, n_out) = self.layer(l);
            let h = &cache.inputs[l];
            let w0 = self.offsets[l];
            let b0 = w0 + n_in * n_out;
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grads[w0 + o * n_in..w0 + (o + 1) * n_in];
                for (g, &hi) in row.iter_mut().zip(h) {
                    *g += d * hi;
                }
                grads[b0 + o] += d;
            }
            if l == 0 {
                break;
            }
            let z_prev = &cache.pre[l - 1];
            let mut d_prev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (dp, &wi) in d_prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *dp += d * wi;
                }
            }
            for (dp, &z) in d_prev.iter_mut().zip(z_prev) {
                if z <= 0.0 {
                    *dp = 0.0;
                }
            }
            delta = d_prev;
        }
    }
}

fn affine((w, b, n_in, n_out): (&[f64], &[f64], usize, usize), h: &[f64]) -> Vec<f64> {
    (0..n_out)
        .map(|o| {
            w[o * n_in..(o + 1) * n_in]
                .iter()
                .zip(h)
                .fold(b[o], |acc, (wi, hi)| acc + wi * hi)
        })
        .collect()
}
