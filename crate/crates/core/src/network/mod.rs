//! Delay-extended LIF network and its reference (dense) executor.
//!
//! Time indexing follows the discrete LIF recurrence literally: the current a
//! layer integrates at step `t` was produced by presynaptic spikes visible at
//! step `t - 1`. Spikes emitted by layer `l-1` at step `s` through delay level
//! `d` therefore contribute to the current `I_{s+d}` of layer `l`, which enters
//! the membrane potential at step `s + d + 1`. Every backend in
//! [`crate::delayq`] reproduces this schedule and the summation order below
//! bit for bit.
//!
//! Synaptic currents are accumulated per postsynaptic neuron in a fixed order:
//! delay levels from the largest to the smallest, and within a level
//! presynaptic neurons in ascending index order. That is the order in which
//! events leave a FIFO-based delay structure (oldest spikes first), so all
//! backends agree exactly in `f64`.

mod delay;
pub(crate) mod dense;
mod lif;
mod model;
pub(crate) mod trace;

pub use delay::{DelaySet, DelayWeights};
pub use dense::{forward_dense, layer_input_current, SpikeHistory};
pub use lif::{lif_step, NeuronParams, NeuronState};
pub use model::{NetworkModel, Readout};
pub use trace::{LayerTrace, Raster, SimTrace};
