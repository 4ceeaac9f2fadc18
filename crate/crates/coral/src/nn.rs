//! Minimal numeric core: feed-forward networks with manual backprop,
//! Adam, soft target updates, and finite-difference gradient checking.
//!
//! Networks use ReLU hidden layers and a linear output layer. Parameters
//! live in one flat `Vec<f64>` (per layer: weight matrix row-major, then
//! bias) so Adam state, soft updates, and checkpointing operate uniformly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Per-parameter first/second moment state for Adam.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// One bias-corrected Adam step, in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) {
    assert_eq!(params.len(), grads.len(), "adam_step: shape mismatch");
    assert_eq!(params.len(), state.m.len(), "adam_step: state shape mismatch");
    state.t += 1;
    let bc1 = 1.0 - BETA1.powi(state.t as i32);
    let bc2 = 1.0 - BETA2.powi(state.t as i32);
    for i in 0..params.len() {
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * grads[i];
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * grads[i] * grads[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
    }
}

/// Target-network soft update: `target = tau * online + (1 - tau) * target`.
pub fn soft_update(target: &mut [f64], online: &[f64], tau: f64) {
    assert_eq!(target.len(), online.len(), "soft_update: shape mismatch");
    for (t, o) in target.iter_mut().zip(online) {
        *t = tau * o + (1.0 - tau) * *t;
    }
}

/// Fully connected network, ReLU hidden layers, linear output.
#[derive(Debug, Clone)]
pub struct FeedForwardNet {
    sizes: Vec<usize>,
    params: Vec<f64>,
    adam: AdamState,
}

/// Per-sample forward pass cache for backprop: input plus every
/// post-activation layer output.
pub struct ForwardTrace {
    activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has at least the input")
    }
}

fn layer_param_count(fan_in: usize, fan_out: usize) -> usize {
    fan_in * fan_out + fan_out
}

impl FeedForwardNet {
    /// Seeded init: weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`,
    /// biases zero.
    pub fn new(sizes: &[usize], seed: u64) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = sizes.windows(2).map(|w| layer_param_count(w[0], w[1])).sum();
        let mut params = Vec::with_capacity(n);
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(rng.gen_range(-bound..=bound));
            }
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        FeedForwardNet { sizes: sizes.to_vec(), params, adam: AdamState::new(n) }
    }

    /// Seeded init biased toward the identity map. Each routed input
    /// coordinate is split into rectified positive and negative halves by
    /// the first hidden layer, passed through any middle layers, and
    /// recombined by the output layer as `relu(x) - relu(-x) = x`, so the
    /// net starts out echoing those coordinates up to the
    /// symmetry-breaking noise mixed into every weight (`noise` scales
    /// the usual random init). A hidden layer of width `h` can route
    /// `h / 2` coordinates; when that is less than the input width, the
    /// trailing input coordinates are routed first. Input and output
    /// widths must match.
    pub fn near_identity(sizes: &[usize], seed: u64, noise: f64) -> Self {
        let n_in = sizes[0];
        assert_eq!(
            n_in,
            *sizes.last().unwrap(),
            "near_identity needs matching input/output widths"
        );
        let capacity = sizes[1..sizes.len() - 1].iter().map(|&h| h / 2).min().unwrap_or(n_in);
        let k = n_in.min(capacity);
        let first = n_in - k; // route input coords first..n_in
        let mut net = Self::new(sizes, seed);
        for p in &mut net.params {
            *p *= noise;
        }
        let layers = net.layer_offsets();
        let n_layers = layers.len();
        for (li, &(off, fan_in, _)) in layers.iter().enumerate() {
            let mut bump = |o: usize, i: usize, v: f64| net.params[off + o * fan_in + i] += v;
            if n_layers == 1 {
                for j in 0..n_in {
                    bump(j, j, 1.0);
                }
            } else if li == 0 {
                // hidden unit 2j carries relu(x), 2j+1 carries relu(-x)
                for j in 0..k {
                    bump(2 * j, first + j, 1.0);
                    bump(2 * j + 1, first + j, -1.0);
                }
            } else if li + 1 < n_layers {
                for j in 0..2 * k {
                    bump(j, j, 1.0);
                }
            } else {
                for j in 0..k {
                    bump(first + j, 2 * j, 1.0);
                    bump(first + j, 2 * j + 1, -1.0);
                }
            }
        }
        net
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2);
        let n: usize = sizes.windows(2).map(|w| layer_param_count(w[0], w[1])).sum();
        FeedForwardNet {
            sizes: sizes.to_vec(),
            params: vec![0.0; n],
            adam: AdamState::new(n),
        }
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

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn layer_offsets(&self) -> Vec<(usize, usize, usize)> {
        // (offset, fan_in, fan_out) per layer
        let mut out = Vec::with_capacity(self.sizes.len() - 1);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            out.push((off, w[0], w[1]));
            off += layer_param_count(w[0], w[1]);
        }
        out
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).activations.pop().unwrap()
    }

    pub fn forward_trace(&self, x: &[f64]) -> ForwardTrace {
        assert_eq!(x.len(), self.input_dim(), "forward: input dimension mismatch");
        let layers = self.layer_offsets();
        let n_layers = layers.len();
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(x.to_vec());
        for (li, &(off, fan_in, fan_out)) in layers.iter().enumerate() {
            let inp = activations.last().unwrap();
            let mut out = Vec::with_capacity(fan_out);
            let bias_off = off + fan_in * fan_out;
            for o in 0..fan_out {
                let row = &self.params[off + o * fan_in..off + (o + 1) * fan_in];
                let mut z = self.params[bias_off + o];
                for (w, xi) in row.iter().zip(inp) {
                    z += w * xi;
                }
                // ReLU on hidden layers, linear output
                if li + 1 < n_layers && z < 0.0 {
                    z = 0.0;
                }
                out.push(z);
            }
            activations.push(out);
        }
        ForwardTrace { activations }
    }

    /// Backprop from an output gradient. Returns the flat parameter
    /// gradient and the gradient with respect to the input.
    pub fn backward(&self, trace: &ForwardTrace, dy: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(dy.len(), self.output_dim(), "backward: output dimension mismatch");
        let layers = self.layer_offsets();
        let n_layers = layers.len();
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = dy.to_vec();
        for li in (0..n_layers).rev() {
            let (off, fan_in, fan_out) = layers[li];
            let inp = &trace.activations[li];
            let out = &trace.activations[li + 1];
            // Hidden layers stored post-ReLU: zero activation means the
            // pre-activation was clamped, so the gradient is cut there.
            if li + 1 < n_layers {
                for (d, a) in delta.iter_mut().zip(out) {
                    if *a == 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let bias_off = off + fan_in * fan_out;
            let mut dx = vec![0.0; fan_in];
            for o in 0..fan_out {
                let d = delta[o];
                grads[bias_off + o] += d;
                let row_off = off + o * fan_in;
                for i in 0..fan_in {
                    grads[row_off + i] += d * inp[i];
                    dx[i] += d * self.params[row_off + i];
                }
            }
            delta = dx;
        }
        (grads, delta)
    }

    pub fn apply_adam(&mut self, grads: &[f64], lr: f64) {
        let mut adam = std::mem::replace(&mut self.adam, AdamState::new(0));
        adam_step(&mut self.params, grads, &mut adam, lr);
        self.adam = adam;
    }

    /// Soft-update this network's parameters toward `online`.
    pub fn soft_update_from(&mut self, online: &FeedForwardNet, tau: f64) {
        assert_eq!(self.sizes, online.sizes, "soft_update: architecture mismatch");
        soft_update(&mut self.params, &online.params, tau);
    }
}

/// Max relative error between an analytic gradient and central finite
/// differences of `f` at `params` (h = 1e-4).
pub fn grad_check<F>(params: &[f64], analytic: &[f64], mut f: F) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len());
    let h = 1e-4;
    let mut p = params.to_vec();
    let mut max_err: f64 = 0.0;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let fp = f(&p);
        p[i] = orig - h;
        let fm = f(&p);
        p[i] = orig;
        let numeric = (fp - fm) / (2.0 * h);
        let ga = analytic[i];
        let err = (ga - numeric).abs() / f64::max(1e-8, ga.abs() + numeric.abs());
        max_err = max_err.max(err);
    }
    max_err
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
