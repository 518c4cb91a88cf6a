//! Training pipeline for delay-parameterized networks.
//!
//! Delays are learned through weights: every hidden connection starts with a
//! dense strided set of delay levels, surrogate-gradient BPTT trains all of
//! them, and pruning removes the weak ones so the surviving levels are the
//! learned delays. Fine-tuning then adapts the survivors, and quantization
//! maps the result to a deployment precision.

mod bptt;
mod fit;
mod optim;
mod prune;
mod quant;

pub use bptt::{
    loss_and_grad, sample_logits, sample_loss, surrogate_grad, Gradients, LossSpec, SpikeFn,
};
pub use fit::{
    bptt_train, evaluate, finetune, init_model, quant_finetune, run_pipeline, EpochRecord, LrDecay,
    PipelineOutcome, TrainConfig, TrainOutcome,
};
pub use optim::Adam;
pub use prune::{prune_delays, refine_delays, PruneMode, PruneSpec, PruneTarget};
pub use quant::{bf16_bits, bf16_from_bits, int_code, int_scale, quantize, round_bf16, QuantSpec};
