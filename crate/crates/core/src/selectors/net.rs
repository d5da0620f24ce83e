//! Dense feedforward networks trained full-batch with Adam.
//!
//! One implementation serves three selector variants: the multi-label
//! suitability classifier (sigmoid + BCE head), the per-algorithm error
//! regressor (linear + MSE head), and the one-vs-rest logistic selector
//! (the same BCE head with no hidden layers). Training is sequential
//! and fully deterministic: a given (seed, data) pair always produces
//! the same parameters, bit for bit.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::algorithms::{sigmoid, softplus, Adam};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// A fully-connected network. Hidden layers use the rectifier; the
/// output layer is linear (loss heads attach sigmoid/identity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Net {
    /// Layer widths, input first, output last; `len() ≥ 2`.
    pub sizes: Vec<usize>,
    /// All parameters, layer-major: W₀ (row-major, out×in), b₀, W₁, b₁, …
    pub params: Vec<f64>,
}

/// Loss attached to the output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossHead {
    /// Mean binary cross-entropy between `sigmoid(logit)` and targets.
    Bce,
    /// Mean squared error between raw outputs and targets.
    Mse,
}

/// Full-batch training hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetTrainConfig {
    pub lr: f64,
    pub epochs: usize,
}

impl Default for NetTrainConfig {
    fn default() -> Self {
        NetTrainConfig {
            lr: 1e-3,
            epochs: 2000,
        }
    }
}

/// Loss trajectory facts recorded during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetDiagnostics {
    /// Loss of the freshly initialised parameters.
    pub initial_loss: f64,
    /// Loss after the final update.
    pub final_loss: f64,
    /// Largest single-epoch loss increase observed after the first 10%
    /// of epochs (negative when the tail is strictly decreasing).
    pub max_increase_after_burnin: f64,
}

/// Number of parameters a network with these layer widths holds.
pub fn param_count(sizes: &[usize]) -> usize {
    sizes
        .windows(2)
        .map(|w| w[1] * w[0] + w[1])
        .sum()
}

impl Net {
    /// Glorot-uniform initialisation: each weight is drawn from
    /// `U(−s, s)` with `s = √(6 / (fan_in + fan_out))`; biases start at
    /// zero. Draw order is layer-major, row-major — part of the
    /// reproducibility contract.
    pub fn init(sizes: &[usize], rng: &mut Rng) -> Result<Net> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::DegenerateInput(format!(
                "network needs ≥ 2 non-zero layer widths, got {sizes:?}"
            )));
        }
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push((rng.gen::<f64>() * 2.0 - 1.0) * s);
            }
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        Ok(Net {
            sizes: sizes.to_vec(),
            params,
        })
    }

    /// Raw output (logits / predictions) for a single input row.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.sizes[0] {
            return Err(Error::DimensionMismatch {
                expected: self.sizes[0],
                got: x.len(),
                context: "network input".into(),
            });
        }
        let acts = forward_batch(&self.sizes, &self.params, x, 1);
        Ok(acts.last().expect("≥ 1 layer").clone())
    }
}

/// Offsets of (weights, biases) for layer `l` in the flat vector.
fn layer_offsets(sizes: &[usize]) -> Vec<(usize, usize)> {
    let mut offs = Vec::with_capacity(sizes.len() - 1);
    let mut pos = 0;
    for w in sizes.windows(2) {
        offs.push((pos, pos + w[1] * w[0]));
        pos += w[1] * w[0] + w[1];
    }
    offs
}

/// C (n×m) = A (n×k) · Bᵀ where B is m×k. Overwrites `c`.
fn matmul_nt(a: &[f64], b: &[f64], n: usize, k: usize, m: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), m * k);
    debug_assert_eq!(c.len(), n * m);
    for i in 0..n {
        let ar = &a[i * k..(i + 1) * k];
        for j in 0..m {
            let br = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for l in 0..k {
                acc += ar[l] * br[l];
            }
            c[i * m + j] = acc;
        }
    }
}

/// C (n×m) = A (n×k) · B (k×m). Overwrites `c`.
fn matmul_nn(a: &[f64], b: &[f64], n: usize, k: usize, m: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), k * m);
    debug_assert_eq!(c.len(), n * m);
    c.fill(0.0);
    for i in 0..n {
        for l in 0..k {
            let av = a[i * k + l];
            if av == 0.0 {
                continue;
            }
            let br = &b[l * m..(l + 1) * m];
            let cr = &mut c[i * m..(i + 1) * m];
            for j in 0..m {
                cr[j] += av * br[j];
            }
        }
    }
}

/// C (k×m) = Aᵀ · B where A is n×k and B is n×m. Overwrites `c`.
fn matmul_tn(a: &[f64], b: &[f64], n: usize, k: usize, m: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), n * m);
    debug_assert_eq!(c.len(), k * m);
    c.fill(0.0);
    for r in 0..n {
        let ar = &a[r * k..(r + 1) * k];
        let br = &b[r * m..(r + 1) * m];
        for i in 0..k {
            let av = ar[i];
            if av == 0.0 {
                continue;
            }
            let cr = &mut c[i * m..(i + 1) * m];
            for j in 0..m {
                cr[j] += av * br[j];
            }
        }
    }
}

/// Forward pass over a batch; returns one activation matrix per layer
/// boundary: `[input, h₁, …, output]`. Hidden activations are
/// post-rectifier; the last entry holds raw outputs.
fn forward_batch(sizes: &[usize], params: &[f64], x: &[f64], n: usize) -> Vec<Vec<f64>> {
    let offs = layer_offsets(sizes);
    let layers = sizes.len() - 1;
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers + 1);
    acts.push(x.to_vec());
    for l in 0..layers {
        let (in_w, out_w) = (sizes[l], sizes[l + 1]);
        let (w_off, b_off) = offs[l];
        let w = &params[w_off..w_off + out_w * in_w];
        let b = &params[b_off..b_off + out_w];
        let mut z = vec![0.0; n * out_w];
        matmul_nt(&acts[l], w, n, in_w, out_w, &mut z);
        for row in 0..n {
            for j in 0..out_w {
                z[row * out_w + j] += b[j];
            }
        }
        if l + 1 < layers {
            for v in &mut z {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        acts.push(z);
    }
    acts
}

/// Mean loss over all (record, output) cells, and — when `grad` is
/// provided — its gradient with respect to every parameter.
///
/// Used both by the trainer and by finite-difference gradient checks.
pub fn net_loss_and_grad(
    sizes: &[usize],
    params: &[f64],
    x: &[f64],
    y: &[f64],
    n: usize,
    head: LossHead,
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    let (in_w, out_w) = (sizes[0], *sizes.last().expect("non-empty sizes"));
    if params.len() != param_count(sizes) {
        return Err(Error::DimensionMismatch {
            expected: param_count(sizes),
            got: params.len(),
            context: "network parameters".into(),
        });
    }
    if x.len() != n * in_w || y.len() != n * out_w || n == 0 {
        return Err(Error::DimensionMismatch {
            expected: n * in_w,
            got: x.len(),
            context: "network batch".into(),
        });
    }
    let acts = forward_batch(sizes, params, x, n);
    let z = acts.last().expect("output activations");
    let cells = (n * out_w) as f64;

    let mut loss = 0.0;
    for i in 0..n * out_w {
        loss += match head {
            // BCE with logits: softplus(z) − y·z is max-stable.
            LossHead::Bce => softplus(z[i]) - y[i] * z[i],
            LossHead::Mse => (z[i] - y[i]) * (z[i] - y[i]),
        };
    }
    loss /= cells;

    let Some(grad) = grad else {
        return Ok(loss);
    };
    if grad.len() != params.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            got: grad.len(),
            context: "gradient buffer".into(),
        });
    }

    let offs = layer_offsets(sizes);
    let layers = sizes.len() - 1;
    // d loss / d output-logits.
    let mut delta: Vec<f64> = (0..n * out_w)
        .map(|i| match head {
            LossHead::Bce => (sigmoid(z[i]) - y[i]) / cells,
            LossHead::Mse => 2.0 * (z[i] - y[i]) / cells,
        })
        .collect();

    for l in (0..layers).rev() {
        let (in_l, out_l) = (sizes[l], sizes[l + 1]);
        let (w_off, b_off) = offs[l];
        // dW = deltaᵀ · a_l ; db = column sums of delta.
        matmul_tn(
            &delta,
            &acts[l],
            n,
            out_l,
            in_l,
            &mut grad[w_off..w_off + out_l * in_l],
        );
        for g in &mut grad[b_off..b_off + out_l] {
            *g = 0.0;
        }
        for row in 0..n {
            for j in 0..out_l {
                grad[b_off + j] += delta[row * out_l + j];
            }
        }
        if l > 0 {
            // Propagate: d a_l = delta · W_l, gated by the rectifier.
            let w = &params[w_off..w_off + out_l * in_l];
            let mut next = vec![0.0; n * in_l];
            matmul_nn(&delta, w, n, out_l, in_l, &mut next);
            for (i, v) in next.iter_mut().enumerate() {
                if acts[l][i] <= 0.0 {
                    *v = 0.0;
                }
            }
            delta = next;
        }
    }
    Ok(loss)
}

/// Train a network full-batch with Adam from a seeded Glorot init.
///
/// Fails with [`Error::Divergence`] on a non-finite loss and with
/// [`Error::NoImprovement`] when the final loss does not undercut the
/// initial loss (the usual cause is a too-large learning rate).
pub fn train_net(
    sizes: &[usize],
    x: &[f64],
    y: &[f64],
    n: usize,
    head: LossHead,
    cfg: &NetTrainConfig,
    seed: u64,
) -> Result<(Net, NetDiagnostics)> {
    if cfg.epochs == 0 || !(cfg.lr > 0.0) {
        return Err(Error::DegenerateInput(format!(
            "network training needs epochs ≥ 1 and lr > 0, got epochs {} lr {}",
            cfg.epochs, cfg.lr
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut net = Net::init(sizes, &mut rng)?;
    let mut adam = Adam::new(net.params.len(), cfg.lr);
    let mut grad = vec![0.0; net.params.len()];

    let burnin = cfg.epochs / 10;
    let mut initial_loss = f64::NAN;
    let mut prev_loss = f64::NAN;
    let mut max_increase = f64::NEG_INFINITY;
    for epoch in 0..cfg.epochs {
        let loss = net_loss_and_grad(sizes, &net.params, x, y, n, head, Some(&mut grad))?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        if epoch == 0 {
            initial_loss = loss;
        }
        if epoch > burnin {
            max_increase = max_increase.max(loss - prev_loss);
        }
        prev_loss = loss;
        adam.step(&mut net.params, &grad);
    }
    let final_loss = net_loss_and_grad(sizes, &net.params, x, y, n, head, None)?;
    if !final_loss.is_finite() {
        return Err(Error::Divergence { epoch: cfg.epochs });
    }
    max_increase = max_increase.max(final_loss - prev_loss);
    if final_loss >= initial_loss {
        return Err(Error::NoImprovement {
            initial_loss,
            final_loss,
        });
    }
    Ok((
        net,
        NetDiagnostics {
            initial_loss,
            final_loss,
            max_increase_after_burnin: max_increase,
        },
    ))
}
