//! Shared fixtures: seeded random networks and a naive reference executor
//! written independently of the library's executors.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synaptic_delays::{DelaySet, NetworkModel, NeuronParams, Raster, Readout, SimTrace};

/// Limits of the randomized suite.
pub const MAX_WIDTH: usize = 16;
/// Delay slots per connection, `max_level + 1`.
pub const MAX_SLOTS: usize = 8;
pub const MAX_STEPS: usize = 32;

pub struct Instance {
    pub model: NetworkModel,
    pub raster: Raster,
}

fn random_delay_set(rng: &mut ChaCha8Rng) -> DelaySet {
    let slots = rng.gen_range(1..=MAX_SLOTS);
    let mut levels: Vec<usize> = (0..slots).filter(|_| rng.gen_bool(0.5)).collect();
    if levels.is_empty() || rng.gen_bool(0.5) {
        // make the top slot a member so the connection really spans `slots`
        levels.push(slots - 1);
    }
    levels.sort_unstable();
    levels.dedup();
    DelaySet::new(levels).expect("non-empty sorted levels")
}

/// Random model with 1..=3 connections, random delay sets, zero and masked
/// weights, and weight scales that keep every layer active.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.gen_range(1..=3);
    let widths: Vec<usize> = (0..=depth).map(|_| rng.gen_range(1..=MAX_WIDTH)).collect();
    let sets: Vec<DelaySet> = (0..depth)
        .map(|c| {
            if c == 0 {
                DelaySet::zero()
            } else {
                random_delay_set(&mut rng)
            }
        })
        .collect();
    let steps = rng.gen_range(1..=MAX_STEPS);
    let neuron = NeuronParams::new(rng.gen_range(0.5..20.0), rng.gen_range(0.3..2.0)).unwrap();
    let mut model = NetworkModel::zeros(&widths, &sets, neuron, steps).unwrap();
    let zero_rate = rng.gen_range(0.0..0.6);
    let mask_rate = rng.gen_range(0.0..0.4);
    for w in model.connections_mut() {
        let gain = 2.5 / (w.pre() as f64).sqrt();
        w.update_live(|_, _| {
            if rng.gen_bool(zero_rate) {
                0.0
            } else {
                rng.gen_range(-0.5 * gain..gain)
            }
        });
        for k in 0..w.num_levels() {
            for i in 0..w.pre() {
                for j in 0..w.post() {
                    if rng.gen_bool(mask_rate) {
                        w.prune(k, i, j);
                    }
                }
            }
        }
    }
    if rng.gen_bool(0.3) {
        model.set_readout(Readout::MaxMembrane);
    }
    let raster = random_raster(&mut rng, steps, widths[0]);
    Instance { model, raster }
}

pub fn random_raster(rng: &mut impl Rng, steps: usize, channels: usize) -> Raster {
    let rate = rng.gen_range(0.05..0.5);
    let mut r = Raster::new(steps, channels);
    for t in 0..steps {
        for c in 0..channels {
            if rng.gen_bool(rate) {
                r.set(t, c, true);
            }
        }
    }
    r
}

/// Zeroes every axon `(level, pre)` except one randomly chosen level per
/// presynaptic neuron, which makes the model executable on the cascaded
/// shared queue.
pub fn make_axonal(model: &mut NetworkModel, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for w in model.connections_mut() {
        let (levels, pre, post) = (w.num_levels(), w.pre(), w.post());
        let keep: Vec<usize> = (0..pre).map(|_| rng.gen_range(0..levels)).collect();
        w.update_live(|idx, v| {
            let (k, i) = (idx / (pre * post), idx / post % pre);
            if k == keep[i] {
                v
            } else {
                0.0
            }
        });
    }
}

/// Spikes and membrane potentials of every spiking layer, `[layer][t][n]`.
pub struct OracleTrace {
    pub spikes: Vec<Vec<Vec<bool>>>,
    pub vmem: Vec<Vec<Vec<f64>>>,
    pub prediction: usize,
}

/// Textbook evaluation of the network from whole spike histories:
/// `u[t] = u[t-1] * exp(-1/tau) * (1 - s[t-1]) + I[t-1]`, `s[t] = u[t] >= th`
/// and `I[t] = sum_d sum_i w[d][i] * s_pre[t - d]`. Sums run over levels
/// from the largest delay down and presynaptic neurons upwards, the order
/// the hardware models accumulate in.
pub fn oracle_forward(model: &NetworkModel, raster: &Raster) -> OracleTrace {
    let steps = model.timesteps();
    let mut pre: Vec<Vec<bool>> = (0..steps).map(|t| raster.frame(t).to_vec()).collect();
    let mut spikes = Vec::new();
    let mut vmem = Vec::new();
    for (c, w) in model.connections().iter().enumerate() {
        let post = w.post();
        let p = model.neurons()[c];
        let decay = (-1.0 / p.tau).exp();
        let levels = w.delays().levels();
        let current_at = |t: usize| -> Vec<f64> {
            let mut cur = vec![0.0; post];
            for k in (0..levels.len()).rev() {
                if t < levels[k] {
                    continue;
                }
                for (i, _) in pre[t - levels[k]].iter().enumerate().filter(|(_, &s)| s) {
                    {
                        for (j, acc) in cur.iter_mut().enumerate() {
                            *acc += w.get(k, i, j);
                        }
                    }
                }
            }
            cur
        };
        let mut s = vec![vec![false; post]; steps];
        let mut u = vec![vec![0.0; post]; steps];
        for t in 1..steps {
            let cur = current_at(t - 1);
            for j in 0..post {
                u[t][j] = if s[t - 1][j] {
                    cur[j]
                } else {
                    u[t - 1][j] * decay + cur[j]
                };
                s[t][j] = u[t][j] >= p.u_th;
            }
        }
        pre = s.clone();
        spikes.push(s);
        vmem.push(u);
    }
    let out_s = spikes.last().unwrap();
    let out_u = vmem.last().unwrap();
    let width = model.output_width();
    let prediction = match model.readout() {
        Readout::SpikeCount => {
            let count = |j: usize| out_s.iter().filter(|f| f[j]).count();
            (0..width)
                .fold(None::<usize>, |best, j| match best {
                    Some(b)
                        if count(b) > count(j)
                            || (count(b) == count(j)
                                && out_u[steps - 1][b] >= out_u[steps - 1][j]) =>
                    {
                        Some(b)
                    }
                    _ => Some(j),
                })
                .unwrap()
        }
        Readout::MaxMembrane => {
            let peak = |j: usize| out_u.iter().map(|f| f[j]).fold(f64::NEG_INFINITY, f64::max);
            (0..width)
                .fold(None::<usize>, |best, j| match best {
                    Some(b) if peak(b) >= peak(j) => Some(b),
                    _ => Some(j),
                })
                .unwrap()
        }
    };
    OracleTrace {
        spikes,
        vmem,
        prediction,
    }
}

/// Bit-level agreement between an executor trace and the oracle.
pub fn matches_oracle(trace: &SimTrace, oracle: &OracleTrace) -> Result<(), String> {
    if trace.prediction != oracle.prediction {
        return Err(format!(
            "prediction {} vs {}",
            trace.prediction, oracle.prediction
        ));
    }
    for (l, layer) in trace.layers.iter().enumerate() {
        for (t, (s, u)) in oracle.spikes[l].iter().zip(&oracle.vmem[l]).enumerate() {
            if layer.spikes_at(t) != s.as_slice() {
                return Err(format!("spikes differ at layer {l}, t {t}"));
            }
            for (n, (a, b)) in layer.vmem_at(t).iter().zip(u).enumerate() {
                if a.to_bits() != b.to_bits() {
                    return Err(format!(
                        "vmem differs at layer {l}, t {t}, neuron {n}: {a} vs {b}"
                    ));
                }
            }
        }
    }
    Ok(())
}
