use serde::{Deserialize, Serialize};

use super::delay::{DelaySet, DelayWeights};
use super::lif::NeuronParams;
use crate::error::{Error, Result};
use crate::train::QuantSpec;

/// How the output layer's activity is turned into a class index.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    /// Argmax of output spike counts over the whole window; ties go to the
    /// larger final membrane potential, then to the lower index.
    #[default]
    SpikeCount,
    /// Argmax over neurons of the peak membrane potential in the window.
    MaxMembrane,
}

/// Feed-forward delay-extended LIF network.
///
/// `connections[c]` links layer `c` to layer `c + 1`; `neurons[c]` holds the
/// parameters of layer `c + 1`. The input connection carries the single delay
/// level 0.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    widths: Vec<usize>,
    connections: Vec<DelayWeights>,
    neurons: Vec<NeuronParams>,
    timesteps: usize,
    readout: Readout,
    max_delay: Option<usize>,
    quant: QuantSpec,
    scales: Vec<f64>,
    seed: u64,
}

impl NetworkModel {
    pub fn new(
        widths: Vec<usize>,
        connections: Vec<DelayWeights>,
        neurons: Vec<NeuronParams>,
        timesteps: usize,
        readout: Readout,
    ) -> Result<Self> {
        let scales = vec![1.0; connections.len()];
        let model = Self {
            widths,
            connections,
            neurons,
            timesteps,
            readout,
            max_delay: None,
            quant: QuantSpec::Float64,
            scales,
            seed: 0,
        };
        model.validate()?;
        Ok(model)
    }

    /// All-zero weights over the given per-connection delay sets. The first
    /// entry of `delays` must be `{0}`.
    pub fn zeros(
        widths: &[usize],
        delays: &[DelaySet],
        neuron: NeuronParams,
        timesteps: usize,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidParam(
                "a network needs at least two layers".into(),
            ));
        }
        if delays.len() != widths.len() - 1 {
            return Err(Error::Dimension {
                what: "per-connection delay sets",
                expected: widths.len() - 1,
                found: delays.len(),
            });
        }
        let connections = delays
            .iter()
            .enumerate()
            .map(|(c, set)| DelayWeights::zeros(set.clone(), widths[c], widths[c + 1]))
            .collect();
        Self::new(
            widths.to_vec(),
            connections,
            vec![neuron; widths.len() - 1],
            timesteps,
            Readout::SpikeCount,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::InvalidParam(
                "a network needs at least two layers".into(),
            ));
        }
        if let Some(pos) = self.widths.iter().position(|&w| w == 0) {
            return Err(Error::InvalidParam(format!("layer {pos} has zero width")));
        }
        let n_conn = self.widths.len() - 1;
        if self.connections.len() != n_conn {
            return Err(Error::Dimension {
                what: "connections",
                expected: n_conn,
                found: self.connections.len(),
            });
        }
        if self.neurons.len() != n_conn {
            return Err(Error::Dimension {
                what: "layer neuron parameters",
                expected: n_conn,
                found: self.neurons.len(),
            });
        }
        if self.scales.len() != n_conn {
            return Err(Error::Dimension {
                what: "quantization scales",
                expected: n_conn,
                found: self.scales.len(),
            });
        }
        for (c, w) in self.connections.iter().enumerate() {
            if w.pre() != self.widths[c] {
                return Err(Error::Dimension {
                    what: "connection presynaptic width",
                    expected: self.widths[c],
                    found: w.pre(),
                });
            }
            if w.post() != self.widths[c + 1] {
                return Err(Error::Dimension {
                    what: "connection postsynaptic width",
                    expected: self.widths[c + 1],
                    found: w.post(),
                });
            }
            if let Some(limit) = self.max_delay {
                if w.delays().max_level() > limit {
                    return Err(Error::InvalidParam(format!(
                        "connection {c} uses delay {} above the platform limit {limit}",
                        w.delays().max_level()
                    )));
                }
            }
        }
        if self.connections[0].delays().levels() != [0] {
            return Err(Error::InvalidParam(
                "the input connection must use the single delay level 0".into(),
            ));
        }
        for p in &self.neurons {
            p.validate()?;
        }
        if self.timesteps == 0 {
            return Err(Error::InvalidParam("num_timesteps must be positive".into()));
        }
        Ok(())
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated")
    }

    /// Number of spiking (non-input) layers.
    pub fn num_layers(&self) -> usize {
        self.connections.len()
    }

    pub fn connections(&self) -> &[DelayWeights] {
        &self.connections
    }

    pub fn connection(&self, c: usize) -> &DelayWeights {
        &self.connections[c]
    }

    /// Mutable access to a connection. Shape changes are rejected by the next
    /// [`NetworkModel::validate`].
    pub fn connection_mut(&mut self, c: usize) -> &mut DelayWeights {
        &mut self.connections[c]
    }

    pub fn connections_mut(&mut self) -> &mut [DelayWeights] {
        &mut self.connections
    }

    pub fn neurons(&self) -> &[NeuronParams] {
        &self.neurons
    }

    pub fn set_neurons(&mut self, neurons: Vec<NeuronParams>) -> Result<()> {
        let old = std::mem::replace(&mut self.neurons, neurons);
        if let Err(e) = self.validate() {
            self.neurons = old;
            return Err(e);
        }
        Ok(())
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn set_timesteps(&mut self, timesteps: usize) -> Result<()> {
        if timesteps == 0 {
            return Err(Error::InvalidParam("num_timesteps must be positive".into()));
        }
        self.timesteps = timesteps;
        Ok(())
    }

    pub fn readout(&self) -> Readout {
        self.readout
    }

    pub fn set_readout(&mut self, readout: Readout) {
        self.readout = readout;
    }

    pub fn max_delay(&self) -> Option<usize> {
        self.max_delay
    }

    /// Sets the platform's maximum supported delay, failing if any connection
    /// already exceeds it.
    pub fn set_max_delay(&mut self, limit: Option<usize>) -> Result<()> {
        let old = std::mem::replace(&mut self.max_delay, limit);
        if let Err(e) = self.validate() {
            self.max_delay = old;
            return Err(e);
        }
        Ok(())
    }

    pub fn quant(&self) -> QuantSpec {
        self.quant
    }

    /// Per-connection quantization scale (1.0 for non-integer schemes).
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub(crate) fn set_quantization(&mut self, quant: QuantSpec, scales: Vec<f64>) {
        debug_assert_eq!(scales.len(), self.connections.len());
        self.quant = quant;
        self.scales = scales;
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    pub fn max_level(&self) -> usize {
        self.connections
            .iter()
            .map(|w| w.delays().max_level())
            .max()
            .unwrap_or(0)
    }

    /// Surviving (unmasked) synapses over all connections.
    pub fn num_parameters(&self) -> usize {
        self.connections.iter().map(DelayWeights::num_live).sum()
    }

    pub fn num_nonzero(&self) -> usize {
        self.connections.iter().map(DelayWeights::num_nonzero).sum()
    }
}
