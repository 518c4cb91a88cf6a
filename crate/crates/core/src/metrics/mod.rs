//! Executor fidelity and the memory cost model of delay structures.

mod cost;
mod fidelity;

pub use cost::{
    cost_report, crossover_alpha, mem_ring, mem_scdq, mem_sharedq, mem_sharedq_summation,
    preset_report, reported_alpha, scaling_sweep, sweep_csv, ConnectionCost, CostReport, Preset,
    PresetReport, QueueCost, SweepRow, EVENT_BITS,
};
pub use fidelity::{compare_traces, ExecutorSummary, FidelityReport};
