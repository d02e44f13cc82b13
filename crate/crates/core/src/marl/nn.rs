//! Fully connected networks with rectifier hidden layers, batched
//! forward/backward passes and an Adam optimizer over flat parameters.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

/// Final-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Output {
    Identity,
    /// `tanh` mapped affinely onto `[lo, hi]`.
    Squash {
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    /// Per layer: weights (out × in, row-major) then biases.
    params: Vec<f64>,
    output: Output,
    generation: u64,
}

/// Activations kept from a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    generation: u64,
    batch: usize,
    /// `acts[0]` is the input; `acts[l + 1]` the activation of layer `l`.
    /// For a squashed output the last entry holds `tanh(z)`.
    acts: Vec<Vec<f64>>,
}

/// Row-major `c = a · op(b) + beta · c` with `a: m × k`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: slice lengths cover every index reachable through the strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Mlp {
    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn new<R: Rng>(sizes: &[usize], output: Output, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument("network needs at least two non-empty layers".into()));
        }
        let mut params = Vec::with_capacity(Self::param_count(sizes));
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] + 1) * w[1] {
                params.push(rng.random_range(-bound..=bound));
            }
        }
        Ok(Self { sizes: sizes.to_vec(), params, output, generation: next_generation() })
    }

    /// Builds a network from explicit parameters in the flat layout.
    pub fn from_params(sizes: &[usize], params: Vec<f64>, output: Output) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument("network needs at least two non-empty layers".into()));
        }
        let expected = Self::param_count(sizes);
        if params.len() != expected {
            return Err(Error::Shape { expected, actual: params.len() });
        }
        Ok(Self { sizes: sizes.to_vec(), params, output, generation: next_generation() })
    }

    pub fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn output(&self) -> Output {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameters; any outstanding cache becomes stale.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.generation = next_generation();
        &mut self.params
    }

    /// Weight matrix (row-major, out × in) and bias vector of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let off = self.offset(l);
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        (&self.params[off..off + o * i], &self.params[off + o * i..off + o * i + o])
    }

    fn offset(&self, l: usize) -> usize {
        Self::param_count(&self.sizes[..=l])
    }

    fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Forward pass over a row-major batch of inputs.
    pub fn forward(&self, x: &[f64], batch: usize) -> Result<(Vec<f64>, Cache)> {
        let expected = batch * self.input_dim();
        if x.len() != expected || batch == 0 {
            return Err(Error::Shape { expected, actual: x.len() });
        }
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        for l in 0..self.layers() {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let (w, b) = self.layer(l);
            let mut z = Vec::with_capacity(batch * o);
            for _ in 0..batch {
                z.extend_from_slice(b);
            }
            // z = a · wᵀ + b
            gemm(batch, i, o, &acts[l], (i as isize, 1), w, (1, i as isize), 1.0, &mut z);
            if l + 1 < self.layers() {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            } else if let Output::Squash { .. } = self.output {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        let last = acts.last().expect("at least one layer");
        let y = match self.output {
            Output::Identity => last.clone(),
            Output::Squash { lo, hi } => last.iter().map(|t| lo + 0.5 * (hi - lo) * (t + 1.0)).collect(),
        };
        Ok((y, Cache { generation: self.generation, batch, acts }))
    }

    /// Single-input convenience wrapper.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x, 1)?.0)
    }

    /// Reverse pass: returns parameter gradients (flat layout) and, when
    /// `want_input`, the gradient with respect to the batch input.
    pub fn backward(&self, cache: &Cache, upstream: &[f64], want_input: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        if cache.generation != self.generation || cache.acts.len() != self.sizes.len() {
            return Err(Error::StaleCache);
        }
        let batch = cache.batch;
        let expected = batch * self.output_dim();
        if upstream.len() != expected {
            return Err(Error::Shape { expected, actual: upstream.len() });
        }
        let mut grads = vec![0.0; self.params.len()];
        let last = &cache.acts[self.layers()];
        let mut delta: Vec<f64> = match self.output {
            Output::Identity => upstream.to_vec(),
            Output::Squash { lo, hi } => {
                upstream.iter().zip(last).map(|(g, t)| g * 0.5 * (hi - lo) * (1.0 - t * t)).collect()
            }
        };
        let mut input_grad = None;
        for l in (0..self.layers()).rev() {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.offset(l);
            let a_prev = &cache.acts[l];
            {
                let (gw, gb) = grads[off..off + (i + 1) * o].split_at_mut(o * i);
                // gw = deltaᵀ · a_prev
                gemm(o, batch, i, &delta, (1, o as isize), a_prev, (i as isize, 1), 0.0, gw);
                for row in delta.chunks_exact(o) {
                    gb.iter_mut().zip(row).for_each(|(g, d)| *g += d);
                }
            }
            if l == 0 && !want_input {
                break;
            }
            let (w, _) = self.layer(l);
            let mut da = vec![0.0; batch * i];
            // da = delta · w
            gemm(batch, o, i, &delta, (o as isize, 1), w, (i as isize, 1), 0.0, &mut da);
            if l == 0 {
                input_grad = Some(da);
                break;
            }
            da.iter_mut().zip(a_prev).for_each(|(d, a)| {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            });
            delta = da;
        }
        Ok((grads, input_grad))
    }
}

/// Elementwise `θ′ ← τθ + (1 − τ)θ′`.
pub fn soft_update(target: &mut Mlp, learned: &Mlp, tau: f64) -> Result<()> {
    if target.sizes != learned.sizes {
        return Err(Error::Shape { expected: learned.params.len(), actual: target.params.len() });
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau {tau} outside [0, 1]")));
    }
    for (t, l) in target.params_mut().iter_mut().zip(&learned.params) {
        *t = tau * l + (1.0 - tau) * *t;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    /// One descent step on `net` along `grads`.
    pub fn step(&mut self, net: &mut Mlp, grads: &[f64]) -> Result<()> {
        if grads.len() != self.m.len() || net.params.len() != self.m.len() {
            return Err(Error::Shape { expected: self.m.len(), actual: grads.len() });
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let params = net.params_mut();
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
        Ok(())
    }
}
