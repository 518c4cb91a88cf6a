use super::delay::DelayWeights;
use super::lif::{self, NeuronState};
use super::model::NetworkModel;
use super::trace::{Raster, SimTrace};
use crate::error::{Error, Result};

/// Synaptic current into postsynaptic neuron `j`:
/// `sum_k sum_i w[k][i][j] * delayed_spikes[k][i]`, where `delayed_spikes[k]`
/// is the presynaptic spike frame emitted `levels[k]` steps ago.
pub fn layer_input_current(
    w: &DelayWeights,
    delayed_spikes: &[Vec<bool>],
    j: usize,
) -> Result<f64> {
    if delayed_spikes.len() != w.num_levels() {
        return Err(Error::Dimension {
            what: "delayed spike levels",
            expected: w.num_levels(),
            found: delayed_spikes.len(),
        });
    }
    if let Some(bad) = delayed_spikes.iter().find(|f| f.len() != w.pre()) {
        return Err(Error::Dimension {
            what: "delayed spike frame",
            expected: w.pre(),
            found: bad.len(),
        });
    }
    if j >= w.post() {
        return Err(Error::Dimension {
            what: "postsynaptic index",
            expected: w.post(),
            found: j,
        });
    }
    let mut current = 0.0;
    for k in (0..w.num_levels()).rev() {
        for (i, _) in delayed_spikes[k].iter().enumerate().filter(|(_, &s)| s) {
            current += w.get(k, i, j);
        }
    }
    Ok(current)
}

/// Circular store of the most recent spike frames of one layer.
#[derive(Clone, Debug)]
pub struct SpikeHistory {
    width: usize,
    depth: usize,
    frames: Vec<bool>,
    /// Number of frames pushed so far.
    len: usize,
}

impl SpikeHistory {
    /// Keeps frames `t, t-1, ..., t-max_delay`.
    pub fn new(width: usize, max_delay: usize) -> Self {
        let depth = max_delay + 1;
        Self {
            width,
            depth,
            frames: vec![false; width * depth],
            len: 0,
        }
    }

    pub fn push(&mut self, frame: &[bool]) {
        debug_assert_eq!(frame.len(), self.width);
        let slot = self.len % self.depth;
        self.frames[slot * self.width..(slot + 1) * self.width].copy_from_slice(frame);
        self.len += 1;
    }

    /// The frame pushed `delay` pushes before the latest one, or `None` when
    /// that lies before the first push (no spikes before stimulus onset).
    pub fn frame_ago(&self, delay: usize) -> Option<&[bool]> {
        if delay >= self.depth || delay >= self.len {
            return None;
        }
        let slot = (self.len - 1 - delay) % self.depth;
        Some(&self.frames[slot * self.width..(slot + 1) * self.width])
    }
}

/// Accumulates the current of every postsynaptic neuron into `out` in the
/// canonical order (levels descending, presynaptic index ascending).
pub(crate) fn accumulate_current(w: &DelayWeights, history: &SpikeHistory, out: &mut [f64]) {
    out.fill(0.0);
    let levels = w.delays().levels();
    for k in (0..levels.len()).rev() {
        let Some(frame) = history.frame_ago(levels[k]) else {
            continue;
        };
        for (i, _) in frame.iter().enumerate().filter(|(_, &s)| s) {
            for (acc, &wij) in out.iter_mut().zip(w.row(k, i)) {
                *acc += wij;
            }
        }
    }
}

pub(crate) fn check_raster(model: &NetworkModel, raster: &Raster) -> Result<()> {
    if raster.timesteps() != model.timesteps() {
        return Err(Error::Dimension {
            what: "raster timesteps",
            expected: model.timesteps(),
            found: raster.timesteps(),
        });
    }
    if raster.channels() != model.input_width() {
        return Err(Error::Dimension {
            what: "raster channels",
            expected: model.input_width(),
            found: raster.channels(),
        });
    }
    Ok(())
}

/// Per-layer LIF state shared by all executors. `pending[l]` is the current
/// produced during the previous step, consumed by the next update.
pub(crate) struct LayerStack {
    states: Vec<Vec<NeuronState>>,
    pub(crate) pending: Vec<Vec<f64>>,
    decay: Vec<f64>,
    threshold: Vec<f64>,
}

impl LayerStack {
    pub(crate) fn new(model: &NetworkModel) -> Self {
        let widths = &model.widths()[1..];
        Self {
            states: widths
                .iter()
                .map(|&w| vec![NeuronState::default(); w])
                .collect(),
            pending: widths.iter().map(|&w| vec![0.0; w]).collect(),
            decay: model.neurons().iter().map(|p| p.decay()).collect(),
            threshold: model.neurons().iter().map(|p| p.u_th).collect(),
        }
    }

    /// Advances every spiking layer by one step and records the result at
    /// time `t` of `trace`.
    pub(crate) fn update(&mut self, t: usize, trace: &mut SimTrace) {
        for (l, layer) in trace.layers.iter_mut().enumerate() {
            let width = layer.width;
            let (decay, th) = (self.decay[l], self.threshold[l]);
            for (n, state) in self.states[l].iter_mut().enumerate() {
                *state = lif::step(*state, self.pending[l][n], decay, th);
                layer.spikes[t * width + n] = state.spiked;
                layer.vmem[t * width + n] = state.u;
            }
        }
    }
}

/// Reference executor: evaluates every synaptic current directly from the
/// stored presynaptic spike history.
pub fn forward_dense(model: &NetworkModel, raster: &Raster) -> Result<SimTrace> {
    check_raster(model, raster)?;
    let steps = model.timesteps();
    let mut trace = SimTrace::empty(model.widths(), steps);
    let mut stack = LayerStack::new(model);
    let mut histories: Vec<SpikeHistory> = model
        .connections()
        .iter()
        .map(|w| SpikeHistory::new(w.pre(), w.delays().max_level()))
        .collect();

    for t in 0..steps {
        stack.update(t, &mut trace);
        for (c, w) in model.connections().iter().enumerate() {
            let frame = if c == 0 {
                raster.frame(t)
            } else {
                trace.layers[c - 1].spikes_at(t)
            };
            histories[c].push(frame);
            accumulate_current(w, &histories[c], &mut stack.pending[c]);
        }
    }
    trace.label = raster.label();
    trace.finish(model.readout());
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{DelaySet, NeuronParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_zero_current() {
        let w = DelayWeights::zeros(DelaySet::strided(3, 1).unwrap(), 2, 2);
        let spikes = vec![vec![true, true]; 3];
        assert_eq!(layer_input_current(&w, &spikes, 1).unwrap(), 0.0);
    }

    #[test]
    fn same_step_spikes_use_the_zero_delay_weights() {
        // A and B fire at t=0: only the delay-0 synapses into C are visible.
        let mut w = DelayWeights::zeros(DelaySet::strided(3, 1).unwrap(), 2, 1);
        for k in 0..3 {
            w.set(k, 0, 0, 0.1 * (k + 1) as f64).unwrap();
            w.set(k, 1, 0, 1.0 * (k + 1) as f64).unwrap();
        }
        let delayed = vec![vec![true, true], vec![false, false], vec![false, false]];
        assert_eq!(layer_input_current(&w, &delayed, 0).unwrap(), 0.1 + 1.0);
    }

    #[test]
    fn current_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut w = DelayWeights::zeros(DelaySet::strided(3, 1).unwrap(), 4, 2);
        w.update_live(|_, _| rng.gen_range(-1.0..1.0));
        let delayed: Vec<Vec<bool>> = (0..3)
            .map(|_| (0..4).map(|_| rng.gen_bool(0.5)).collect())
            .collect();
        for j in 0..2 {
            let mut expected = 0.0;
            for d in (0..3).rev() {
                for (i, _) in delayed[d].iter().enumerate().filter(|(_, &s)| s) {
                    expected += w.weights()[(d * 4 + i) * 2 + j];
                }
            }
            assert_eq!(layer_input_current(&w, &delayed, j).unwrap(), expected);
        }
    }

    #[test]
    fn shape_errors() {
        let w = DelayWeights::zeros(DelaySet::strided(2, 1).unwrap(), 2, 2);
        assert!(layer_input_current(&w, &[vec![true, false]], 0).is_err());
        assert!(layer_input_current(&w, &[vec![true], vec![false]], 0).is_err());
        assert!(layer_input_current(&w, &[vec![true, false], vec![false, true]], 2).is_err());
    }

    #[test]
    fn history_reports_frames_before_onset_as_missing() {
        let mut h = SpikeHistory::new(2, 2);
        assert!(h.frame_ago(0).is_none());
        h.push(&[true, false]);
        h.push(&[false, true]);
        assert_eq!(h.frame_ago(0).unwrap(), &[false, true]);
        assert_eq!(h.frame_ago(1).unwrap(), &[true, false]);
        assert!(h.frame_ago(2).is_none());
        h.push(&[true, true]);
        h.push(&[false, false]);
        assert_eq!(h.frame_ago(2).unwrap(), &[false, true]);
        assert!(h.frame_ago(3).is_none());
    }

    #[test]
    fn zero_raster_gives_zero_trace() {
        let sets = [DelaySet::zero(), DelaySet::strided(3, 1).unwrap()];
        let mut model = NetworkModel::zeros(&[3, 4, 2], &sets, NeuronParams::default(), 6).unwrap();
        model.connection_mut(1).update_live(|idx, _| idx as f64);
        let trace = forward_dense(&model, &Raster::new(6, 3)).unwrap();
        for layer in &trace.layers {
            assert!(layer.spikes.iter().all(|&s| !s));
            assert!(layer.vmem.iter().all(|&v| v == 0.0));
        }
        assert!(forward_dense(&model, &Raster::new(5, 3)).is_err());
    }

    #[test]
    fn input_reaches_each_layer_one_step_later() {
        let sets = [DelaySet::zero(), DelaySet::zero()];
        let mut model = NetworkModel::zeros(&[1, 1, 1], &sets, NeuronParams::default(), 4).unwrap();
        model.connection_mut(0).set(0, 0, 0, 1.0).unwrap();
        model.connection_mut(1).set(0, 0, 0, 1.0).unwrap();
        let raster = Raster::from_events(4, 1, [(0, 0)]).unwrap();
        let trace = forward_dense(&model, &raster).unwrap();
        assert_eq!(trace.layers[0].spikes, vec![false, true, false, false]);
        assert_eq!(trace.layers[1].spikes, vec![false, false, true, false]);
    }
}
