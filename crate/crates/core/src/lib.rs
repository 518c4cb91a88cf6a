//! Spiking networks whose synapses carry trainable delays, plus event-driven
//! models of the hardware structures that realize those delays.
//!
//! The crate is organised around one reference semantics:
//!
//! - [`network`] defines the delay-extended LIF network and the dense
//!   executor every other backend is checked against.
//! - [`delayq`] holds the event-driven backends: the shared circular delay
//!   queue (PRQ/POQ pair with a WVU zero-skipping filter), per-neuron ring
//!   buffers and the cascaded shared delay queue.
//! - [`train`] implements surrogate-gradient BPTT, delay pruning, fine-tuning
//!   and weight quantization.
//! - [`metrics`] compares executor traces and evaluates the analytic memory
//!   cost of each delay structure.
//! - [`io`] covers model and raster files, the synthetic delayed-coincidence
//!   task and the `sdelay` command line.

pub mod delayq;
pub mod error;
pub mod io;
pub mod metrics;
pub mod network;
pub mod train;

pub use error::{Error, Result};
pub use network::{
    forward_dense, lif_step, DelaySet, DelayWeights, NetworkModel, NeuronParams, NeuronState,
    Raster, Readout, SimTrace,
};
