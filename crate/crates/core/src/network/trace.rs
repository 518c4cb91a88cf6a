use serde::{Deserialize, Serialize};

use super::model::Readout;
use crate::error::{Error, Result};

/// Binary input spike raster, stored `[t][channel]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    timesteps: usize,
    channels: usize,
    spikes: Vec<bool>,
    label: Option<usize>,
}

impl Raster {
    pub fn new(timesteps: usize, channels: usize) -> Self {
        Self {
            timesteps,
            channels,
            spikes: vec![false; timesteps * channels],
            label: None,
        }
    }

    /// Builds a raster from `(t, channel)` events. Events may repeat; the
    /// raster is binary.
    pub fn from_events(
        timesteps: usize,
        channels: usize,
        events: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut raster = Self::new(timesteps, channels);
        for (t, c) in events {
            if t >= timesteps || c >= channels {
                return Err(Error::InvalidParam(format!(
                    "event ({t}, {c}) outside a {timesteps}x{channels} raster"
                )));
            }
            raster.set(t, c, true);
        }
        Ok(raster)
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn set_label(&mut self, label: Option<usize>) {
        self.label = label;
    }

    pub fn get(&self, t: usize, c: usize) -> bool {
        self.spikes[t * self.channels + c]
    }

    pub fn set(&mut self, t: usize, c: usize, value: bool) {
        self.spikes[t * self.channels + c] = value;
    }

    pub fn frame(&self, t: usize) -> &[bool] {
        &self.spikes[t * self.channels..(t + 1) * self.channels]
    }

    /// Events sorted by time, then channel.
    pub fn events(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.spikes
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(move |(idx, _)| (idx / self.channels, idx % self.channels))
    }

    pub fn num_spikes(&self) -> usize {
        self.spikes.iter().filter(|&&s| s).count()
    }

    /// The first `timesteps` frames.
    pub fn truncated(&self, timesteps: usize) -> Self {
        let timesteps = timesteps.min(self.timesteps);
        Self {
            timesteps,
            channels: self.channels,
            spikes: self.spikes[..timesteps * self.channels].to_vec(),
            label: self.label,
        }
    }
}

/// Spikes and membrane potentials of one spiking layer, `[t][neuron]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerTrace {
    pub width: usize,
    pub spikes: Vec<bool>,
    pub vmem: Vec<f64>,
}

impl LayerTrace {
    pub fn new(width: usize, timesteps: usize) -> Self {
        Self {
            width,
            spikes: vec![false; width * timesteps],
            vmem: vec![0.0; width * timesteps],
        }
    }

    pub fn timesteps(&self) -> usize {
        self.spikes.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn spikes_at(&self, t: usize) -> &[bool] {
        &self.spikes[t * self.width..(t + 1) * self.width]
    }

    pub fn vmem_at(&self, t: usize) -> &[f64] {
        &self.vmem[t * self.width..(t + 1) * self.width]
    }

    pub fn spike_count(&self) -> usize {
        self.spikes.iter().filter(|&&s| s).count()
    }

    pub fn spike_counts_per_neuron(&self) -> Vec<usize> {
        let mut counts = vec![0; self.width];
        for (idx, &s) in self.spikes.iter().enumerate() {
            if s {
                counts[idx % self.width] += 1;
            }
        }
        counts
    }
}

/// Record of one forward pass: every spiking layer (hidden and output) plus
/// the readout decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub layers: Vec<LayerTrace>,
    pub prediction: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
}

impl SimTrace {
    pub(crate) fn empty(widths: &[usize], timesteps: usize) -> Self {
        Self {
            layers: widths[1..]
                .iter()
                .map(|&w| LayerTrace::new(w, timesteps))
                .collect(),
            prediction: 0,
            label: None,
        }
    }

    pub(crate) fn finish(&mut self, readout: Readout) {
        let out = self.layers.last().expect("at least one spiking layer");
        self.prediction = predict(readout, out);
    }

    pub fn output(&self) -> &LayerTrace {
        self.layers.last().expect("at least one spiking layer")
    }

    /// Exact equality including the sign and payload of every `f64`.
    pub fn bitwise_eq(&self, other: &SimTrace) -> bool {
        self.prediction == other.prediction
            && self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.width == b.width
                    && a.spikes == b.spikes
                    && a.vmem.len() == b.vmem.len()
                    && a.vmem
                        .iter()
                        .zip(&b.vmem)
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }

    /// Index of the first differing `(layer, t, neuron)`, if any. Handy in
    /// assertion messages.
    pub fn first_difference(&self, other: &SimTrace) -> Option<(usize, usize, usize)> {
        for (l, (a, b)) in self.layers.iter().zip(&other.layers).enumerate() {
            for idx in 0..a.spikes.len().min(b.spikes.len()) {
                if a.spikes[idx] != b.spikes[idx] || a.vmem[idx].to_bits() != b.vmem[idx].to_bits()
                {
                    return Some((l, idx / a.width, idx % a.width));
                }
            }
        }
        None
    }
}

pub(crate) fn predict(readout: Readout, out: &LayerTrace) -> usize {
    let steps = out.timesteps();
    if steps == 0 {
        return 0;
    }
    match readout {
        Readout::SpikeCount => {
            let counts = out.spike_counts_per_neuron();
            let last = out.vmem_at(steps - 1);
            let mut best = 0;
            for j in 1..out.width {
                let better =
                    counts[j] > counts[best] || (counts[j] == counts[best] && last[j] > last[best]);
                if better {
                    best = j;
                }
            }
            best
        }
        Readout::MaxMembrane => {
            let mut peak = vec![f64::NEG_INFINITY; out.width];
            for t in 0..steps {
                for (p, &v) in peak.iter_mut().zip(out.vmem_at(t)) {
                    *p = p.max(v);
                }
            }
            let mut best = 0;
            for j in 1..out.width {
                if peak[j] > peak[best] {
                    best = j;
                }
            }
            best
        }
    }
}
