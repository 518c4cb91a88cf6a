//! Unrolled forward pass with cached state and its exact reverse sweep.
//!
//! Per spiking layer `l` and step `t` the forward pass computes
//!
//! ```text
//! u[l][t] = decay * u[l][t-1] * (1 - s[l][t-1]) + I[l][t-1]
//! s[l][t] = f(u[l][t] - u_th)
//! I[l][t] = sum_k sum_i W[l][k][i][j] * s[l-1][t - lev_k][i]
//! ```
//!
//! with `s[0]` the input raster. In hard mode `f` is the Heaviside step and
//! its derivative is replaced by [`surrogate_grad`]; in soft mode `f` is the
//! fast sigmoid itself, so the gradient is the true derivative of the loss.

use crate::error::{Error, Result};
use crate::network::trace::predict;
use crate::network::{LayerTrace, NetworkModel, Raster, Readout};

/// Derivative of the fast sigmoid, `1 / (beta * |v| + 1)^2`, used in place
/// of the Heaviside derivative in the backward pass.
pub fn surrogate_grad(v: f64, beta: f64) -> f64 {
    let d = beta * v.abs() + 1.0;
    1.0 / (d * d)
}

/// Forward nonlinearity used during training.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpikeFn {
    /// Heaviside forward, surrogate backward. Matches the executors exactly.
    Hard { beta: f64 },
    /// Smooth forward `0.5 * (1 + beta*v / (1 + beta*|v|))`; used to check
    /// gradients against finite differences.
    Soft { beta: f64 },
}

impl SpikeFn {
    #[inline]
    fn value(self, v: f64) -> f64 {
        match self {
            SpikeFn::Hard { .. } => {
                if v >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            SpikeFn::Soft { beta } => 0.5 * (1.0 + beta * v / (1.0 + beta * v.abs())),
        }
    }

    #[inline]
    fn derivative(self, v: f64) -> f64 {
        match self {
            SpikeFn::Hard { beta } => surrogate_grad(v, beta),
            SpikeFn::Soft { beta } => 0.5 * beta * surrogate_grad(v, beta),
        }
    }
}

/// Loss settings shared by the forward and backward pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSpec {
    pub spike_fn: SpikeFn,
    /// Weight of the final membrane potential in the spike-count logits.
    pub vmem_weight: f64,
}

impl LossSpec {
    pub fn hard(beta: f64, vmem_weight: f64) -> Self {
        Self {
            spike_fn: SpikeFn::Hard { beta },
            vmem_weight,
        }
    }

    pub fn soft(beta: f64, vmem_weight: f64) -> Self {
        Self {
            spike_fn: SpikeFn::Soft { beta },
            vmem_weight,
        }
    }
}

/// Gradient of the loss with respect to every connection's weights, laid out
/// like [`crate::network::DelayWeights::weights`]. Masked entries are zero.
pub type Gradients = Vec<Vec<f64>>;

/// Cached forward state of one sample.
struct Tape {
    steps: usize,
    /// `s[l][t * width + n]` for l = 0 (input) ..= L.
    s: Vec<Vec<f64>>,
    /// `u[l - 1][t * width + n]` for spiking layers.
    u: Vec<Vec<f64>>,
    logits: Vec<f64>,
    /// Time index of the peak membrane per output neuron (max-membrane readout).
    peak_t: Vec<usize>,
}

fn forward_tape(model: &NetworkModel, raster: &Raster, spec: &LossSpec) -> Result<Tape> {
    if raster.timesteps() != model.timesteps() || raster.channels() != model.input_width() {
        return Err(Error::Dimension {
            what: "raster shape",
            expected: model.timesteps() * model.input_width(),
            found: raster.timesteps() * raster.channels(),
        });
    }
    let steps = model.timesteps();
    let widths = model.widths();
    let input: Vec<f64> = (0..steps)
        .flat_map(|t| raster.frame(t).iter().map(|&b| if b { 1.0 } else { 0.0 }))
        .collect();
    let mut s = vec![input];
    let mut u = Vec::with_capacity(model.num_layers());
    for (c, w) in model.connections().iter().enumerate() {
        let (pre, post) = (widths[c], widths[c + 1]);
        let params = model.neurons()[c];
        let decay = params.decay();
        let levels = w.delays().levels();
        let prev = &s[c];
        let mut ul = vec![0.0; steps * post];
        let mut sl = vec![0.0; steps * post];
        let mut current = vec![0.0; post];
        for t in 0..steps {
            for n in 0..post {
                let (u_prev, s_prev) = if t == 0 {
                    (0.0, 0.0)
                } else {
                    (ul[(t - 1) * post + n], sl[(t - 1) * post + n])
                };
                let v = decay * u_prev * (1.0 - s_prev) + current[n];
                ul[t * post + n] = v;
                sl[t * post + n] = spec.spike_fn.value(v - params.u_th);
            }
            // current produced at t, consumed at t + 1
            current.fill(0.0);
            for k in (0..levels.len()).rev() {
                let Some(src) = t.checked_sub(levels[k]) else {
                    continue;
                };
                for i in 0..pre {
                    let si = prev[src * pre + i];
                    if si == 0.0 {
                        continue;
                    }
                    for (acc, &wij) in current.iter_mut().zip(w.row(k, i)) {
                        *acc += wij * si;
                    }
                }
            }
        }
        u.push(ul);
        s.push(sl);
    }

    let out_w = model.output_width();
    let (u_out, s_out) = (u.last().expect("layers"), s.last().expect("layers"));
    let mut logits = vec![0.0; out_w];
    let mut peak_t = vec![0; out_w];
    match model.readout() {
        Readout::SpikeCount => {
            for t in 0..steps {
                for (j, l) in logits.iter_mut().enumerate() {
                    *l += s_out[t * out_w + j];
                }
            }
            for (j, l) in logits.iter_mut().enumerate() {
                *l += spec.vmem_weight * u_out[(steps - 1) * out_w + j];
            }
        }
        Readout::MaxMembrane => {
            for j in 0..out_w {
                let mut best = 0;
                for t in 1..steps {
                    if u_out[t * out_w + j] > u_out[best * out_w + j] {
                        best = t;
                    }
                }
                peak_t[j] = best;
                logits[j] = u_out[best * out_w + j];
            }
        }
    }
    Ok(Tape {
        steps,
        s,
        u,
        logits,
        peak_t,
    })
}

/// Cross-entropy of `logits` against `label` and its gradient
/// `softmax - onehot`.
fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + max - logits[label];
    let grad = exps
        .iter()
        .enumerate()
        .map(|(j, &e)| e / sum - if j == label { 1.0 } else { 0.0 })
        .collect();
    (loss, grad)
}

fn check_label(model: &NetworkModel, label: usize) -> Result<()> {
    if label >= model.output_width() {
        return Err(Error::InvalidParam(format!(
            "label {label} out of range for {} output neurons",
            model.output_width()
        )));
    }
    Ok(())
}

/// Loss of one labelled sample.
pub fn sample_loss(
    model: &NetworkModel,
    raster: &Raster,
    label: usize,
    spec: &LossSpec,
) -> Result<f64> {
    check_label(model, label)?;
    let tape = forward_tape(model, raster, spec)?;
    Ok(cross_entropy(&tape.logits, label).0)
}

/// Readout logits of one sample (spike counts plus the membrane term, or
/// peak membrane potentials).
pub fn sample_logits(model: &NetworkModel, raster: &Raster, spec: &LossSpec) -> Result<Vec<f64>> {
    Ok(forward_tape(model, raster, spec)?.logits)
}

/// Loss of one labelled sample and its gradient with respect to all weights.
pub fn loss_and_grad(
    model: &NetworkModel,
    raster: &Raster,
    label: usize,
    spec: &LossSpec,
) -> Result<(f64, Gradients)> {
    let (loss, grads, _) = sample_step(model, raster, label, spec)?;
    Ok((loss, grads))
}

/// Loss, gradient and the readout's prediction for one sample.
pub(crate) fn sample_step(
    model: &NetworkModel,
    raster: &Raster,
    label: usize,
    spec: &LossSpec,
) -> Result<(f64, Gradients, usize)> {
    check_label(model, label)?;
    let tape = forward_tape(model, raster, spec)?;
    let (loss, dlogits) = cross_entropy(&tape.logits, label);
    let prediction = tape_prediction(model, &tape);
    Ok((loss, backward(model, &tape, &dlogits, spec), prediction))
}

/// Readout decision on the cached output layer; identical to the executors'
/// readout in hard mode.
fn tape_prediction(model: &NetworkModel, tape: &Tape) -> usize {
    let width = model.output_width();
    let trace = LayerTrace {
        width,
        spikes: tape.s[model.num_layers()]
            .iter()
            .map(|&s| s >= 0.5)
            .collect(),
        vmem: tape.u[model.num_layers() - 1].clone(),
    };
    predict(model.readout(), &trace)
}

fn backward(model: &NetworkModel, tape: &Tape, dlogits: &[f64], spec: &LossSpec) -> Gradients {
    let steps = tape.steps;
    let n_layers = model.num_layers();
    let widths = model.widths();
    let readout = model.readout();
    // gu[l - 1][t * width + n] = dL/du^l_t
    let mut gu: Vec<Vec<f64>> = (1..=n_layers)
        .map(|l| vec![0.0; steps * widths[l]])
        .collect();
    let mut grads: Gradients = model
        .connections()
        .iter()
        .map(|w| vec![0.0; w.len()])
        .collect();

    for t in (0..steps).rev() {
        for l in (1..=n_layers).rev() {
            let width = widths[l];
            let params = model.neurons()[l - 1];
            let decay = params.decay();
            let is_out = l == n_layers;
            let mut gs = vec![0.0; width];
            // readout and next-step recurrence
            for n in 0..width {
                let mut g = 0.0;
                if is_out && readout == Readout::SpikeCount {
                    g += dlogits[n];
                }
                if t + 1 < steps {
                    g += gu[l - 1][(t + 1) * width + n] * (-decay * tape.u[l - 1][t * width + n]);
                }
                gs[n] = g;
            }
            // spikes feeding the next connection at t + lev_k
            if l < n_layers {
                let w = model.connection(l);
                let post = widths[l + 1];
                let gnext = &gu[l];
                for (k, &lev) in w.delays().levels().iter().enumerate() {
                    // I^{l+1}_{t+lev} enters u^{l+1}_{t+lev+1}
                    let target = t + lev + 1;
                    if target >= steps {
                        continue;
                    }
                    let gi = &gnext[target * post..(target + 1) * post];
                    for (i, g) in gs.iter_mut().enumerate() {
                        *g += w.row(k, i).iter().zip(gi).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
            }
            for n in 0..width {
                let idx = t * width + n;
                let v = tape.u[l - 1][idx] - params.u_th;
                let mut g = gs[n] * spec.spike_fn.derivative(v);
                if t + 1 < steps {
                    g += gu[l - 1][idx + width] * decay * (1.0 - tape.s[l][idx]);
                }
                if is_out {
                    match readout {
                        Readout::SpikeCount if t + 1 == steps => g += spec.vmem_weight * dlogits[n],
                        Readout::MaxMembrane if tape.peak_t[n] == t => g += dlogits[n],
                        _ => {}
                    }
                }
                gu[l - 1][idx] = g;
            }
        }
    }

    // dW_c[k][i][j] = sum_t gu^{c+1}_{t+1}[j] * s^c_{t-lev_k}[i]
    for (c, w) in model.connections().iter().enumerate() {
        let (pre, post) = (widths[c], widths[c + 1]);
        let levels = w.delays().levels();
        let grad = &mut grads[c];
        let spikes = &tape.s[c];
        for t in 0..steps.saturating_sub(1) {
            let gi = &gu[c][(t + 1) * post..(t + 2) * post];
            if gi.iter().all(|&g| g == 0.0) {
                continue;
            }
            for (k, &lev) in levels.iter().enumerate() {
                let Some(src) = t.checked_sub(lev) else {
                    continue;
                };
                for i in 0..pre {
                    let si = spikes[src * pre + i];
                    if si == 0.0 {
                        continue;
                    }
                    let base = (k * pre + i) * post;
                    for (gw, &g) in grad[base..base + post].iter_mut().zip(gi) {
                        *gw += si * g;
                    }
                }
            }
        }
        for (gw, &m) in grad.iter_mut().zip(w.mask()) {
            if !m {
                *gw = 0.0;
            }
        }
    }
    grads
}
