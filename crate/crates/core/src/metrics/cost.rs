//! Analytic memory cost of the three delay structures.
//!
//! With `I` presynaptic and `J` postsynaptic neurons, `D` delay slots and a
//! peak fraction `alpha` of presynaptic neurons active per timestep:
//!
//! - ring buffers hold `J * D` weight-wide accumulators,
//! - the cascaded shared queue holds `alpha * I * (D^2 + D) / 2` events,
//! - the shared circular delay queue holds `alpha * I * (2D - 1)` events.
//!
//! The shared-queue closed form above is not what its own summation
//! `sum_{d=1}^{D} (D - d) = D (D - 1) / 2` gives; both are provided and
//! reports carry the two values side by side.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::delayq::BackendRun;
use crate::error::{Error, Result};
use crate::network::NetworkModel;

/// Default address-event width in bits.
pub const EVENT_BITS: u32 = 16;

/// Capacity of a queue-based delay structure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueCost {
    pub events: f64,
    pub bits: f64,
}

impl QueueCost {
    fn from_events(events: f64, event_bits: u32) -> Self {
        Self {
            events,
            bits: events * f64::from(event_bits),
        }
    }
}

/// Accumulator storage of per-neuron ring buffers, `J * D * w_bits`.
pub fn mem_ring(post: u64, levels: u64, weight_bits: u32) -> u64 {
    post * levels * u64::from(weight_bits)
}

/// Cascaded shared delay queue, closed form `alpha * I * (D^2 + D) / 2`.
pub fn mem_sharedq(alpha: f64, pre: u64, levels: u64, event_bits: u32) -> QueueCost {
    let d = levels as f64;
    QueueCost::from_events(0.5 * alpha * pre as f64 * (d * d + d), event_bits)
}

/// Cascaded shared delay queue, summation form `alpha * I * sum_{d=1}^{D} (D - d)`.
pub fn mem_sharedq_summation(alpha: f64, pre: u64, levels: u64, event_bits: u32) -> QueueCost {
    let slots: u64 = (1..=levels).map(|d| levels - d).sum();
    QueueCost::from_events(alpha * pre as f64 * slots as f64, event_bits)
}

/// Shared circular delay queue, `alpha * I * (2D - 1)`; zero for `D = 0`.
pub fn mem_scdq(alpha: f64, pre: u64, levels: u64, event_bits: u32) -> QueueCost {
    let slots = (2 * levels).saturating_sub(1) as f64;
    QueueCost::from_events(alpha * pre as f64 * slots, event_bits)
}

/// Activation fraction below which the circular queue needs less memory
/// than ring buffers.
pub fn crossover_alpha(ring_bits: f64, scdq_bits_at_alpha1: f64) -> f64 {
    ring_bits / scdq_bits_at_alpha1
}

/// Rounds a crossover fraction down to the 0.05 grid it is quoted on.
pub fn reported_alpha(alpha: f64) -> f64 {
    (alpha * 20.0 + 1e-9).floor() / 20.0
}

/// Reference platform whose delay-buffer dimensions are reproduced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    TrueNorth,
    Loihi,
    SpiNNaker,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::TrueNorth, Preset::Loihi, Preset::SpiNNaker];

    pub fn name(self) -> &'static str {
        match self {
            Preset::TrueNorth => "truenorth",
            Preset::Loihi => "loihi",
            Preset::SpiNNaker => "spinnaker",
        }
    }

    /// `(neurons, delay slots, ring weight bits)`. The same neuron count is
    /// used on both sides of the connection.
    fn dimensions(self) -> (u64, u64, Option<u32>) {
        match self {
            Preset::TrueNorth => (256, 16, None),
            Preset::Loihi => (48, 64, Some(8)),
            Preset::SpiNNaker => (256, 16, Some(16)),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown preset `{s}`")))
    }
}

/// Worst-case (`alpha = 1`) memory figures of one preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresetReport {
    pub preset: Preset,
    pub neurons: u64,
    pub delay_slots: u64,
    pub event_bits: u32,
    pub ring_bits: Option<u64>,
    pub sharedq: QueueCost,
    pub sharedq_summation: QueueCost,
    pub scdq: QueueCost,
    pub crossover_alpha: Option<f64>,
    pub crossover_reported: Option<f64>,
}

pub fn preset_report(preset: Preset) -> PresetReport {
    let (n, d, w_bits) = preset.dimensions();
    let scdq = mem_scdq(1.0, n, d, EVENT_BITS);
    let ring_bits = w_bits.map(|b| mem_ring(n, d, b));
    let crossover = ring_bits.map(|r| crossover_alpha(r as f64, scdq.bits));
    PresetReport {
        preset,
        neurons: n,
        delay_slots: d,
        event_bits: EVENT_BITS,
        ring_bits,
        sharedq: mem_sharedq(1.0, n, d, EVENT_BITS),
        sharedq_summation: mem_sharedq_summation(1.0, n, d, EVENT_BITS),
        scdq,
        crossover_alpha: crossover,
        crossover_reported: crossover.map(reported_alpha),
    }
}

impl PresetReport {
    /// Human-readable summary lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{}: I=J={}, D={}, {}-bit events",
            self.preset.name(),
            self.neurons,
            self.delay_slots,
            self.event_bits
        );
        let _ = writeln!(
            s,
            "  shared delay queue: {} events ({} bits); summation form gives {} events",
            self.sharedq.events, self.sharedq.bits, self.sharedq_summation.events
        );
        let _ = writeln!(
            s,
            "  circular delay queue: {} events ({} bits)",
            self.scdq.events, self.scdq.bits
        );
        if let (Some(ring), Some(a), Some(r)) = (
            self.ring_bits,
            self.crossover_alpha,
            self.crossover_reported,
        ) {
            let _ = writeln!(s, "  ring buffers: {ring} bits");
            let _ = writeln!(s, "  crossover alpha: {a:.3} (reported {r})");
        }
        s
    }
}

/// One point of the worst-case capacity sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delay_slots: u64,
    pub presynaptic: u64,
    pub sharedq_events: f64,
    pub scdq_events: f64,
}

/// Worst-case (`alpha = 1`) capacities over every `(D, I)` combination.
pub fn scaling_sweep(delay_slots: &[u64], presynaptic: &[u64]) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(delay_slots.len() * presynaptic.len());
    for &d in delay_slots {
        for &i in presynaptic {
            rows.push(SweepRow {
                delay_slots: d,
                presynaptic: i,
                sharedq_events: mem_sharedq(1.0, i, d, EVENT_BITS).events,
                scdq_events: mem_scdq(1.0, i, d, EVENT_BITS).events,
            });
        }
    }
    rows
}

pub fn sweep_csv(rows: &[SweepRow], event_bits: u32) -> String {
    let mut s =
        String::from("delay_slots,presynaptic,sharedq_events,scdq_events,sharedq_bits,scdq_bits\n");
    let b = f64::from(event_bits);
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.delay_slots,
            r.presynaptic,
            r.sharedq_events,
            r.scdq_events,
            r.sharedq_events * b,
            r.scdq_events * b
        );
    }
    s
}

/// Memory and traffic of one delayed connection of a deployed model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectionCost {
    pub connection: usize,
    pub presynaptic: usize,
    pub postsynaptic: usize,
    /// `max delay + 1`: slots a structure must cover.
    pub delay_slots: usize,
    /// Peak measured per-timestep activation fraction.
    pub alpha: f64,
    pub ring_bits: u64,
    pub sharedq: QueueCost,
    pub sharedq_summation: QueueCost,
    pub scdq: QueueCost,
    pub peak_scdq_occupancy: usize,
    pub within_bound: bool,
    pub live_parameters: usize,
    pub pushes: u64,
    pub deliveries: u64,
    /// Accumulate operations implied by the deliveries (energy proxy).
    pub synaptic_ops: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub samples: usize,
    pub weight_bits: u32,
    pub event_bits: u32,
    pub parameters: usize,
    /// Storage of the surviving weights in compressed form.
    pub parameter_bits: u64,
    /// Position indices of the surviving weights, reported separately.
    pub index_bits: u64,
    pub connections: Vec<ConnectionCost>,
}

fn index_width(len: usize) -> u64 {
    if len <= 1 {
        0
    } else {
        u64::from(usize::BITS - (len - 1).leading_zeros())
    }
}

/// Cost of deploying `model`, with traffic and occupancy taken from
/// circular-queue runs over a set of inputs.
pub fn cost_report(model: &NetworkModel, runs: &[BackendRun], event_bits: u32) -> CostReport {
    let weight_bits = model.quant().weight_bits();
    let mut connections = Vec::new();
    let (mut parameter_bits, mut index_bits) = (0, 0);
    for (c, w) in model.connections().iter().enumerate() {
        let live = w.num_live();
        parameter_bits += live as u64 * u64::from(weight_bits);
        index_bits += live as u64 * index_width(w.len());
        let alpha = runs
            .iter()
            .filter_map(|r| r.activity.get(c))
            .map(|a| a.max_activation_fraction())
            .fold(0.0, f64::max);
        let peak = runs
            .iter()
            .filter_map(|r| r.queues.get(c))
            .map(|q| q.peak_occupancy())
            .max()
            .unwrap_or(0);
        let pushes = runs
            .iter()
            .filter_map(|r| r.queues.get(c))
            .map(|q| q.pushes)
            .sum();
        let deliveries: u64 = runs
            .iter()
            .filter_map(|r| r.queues.get(c))
            .map(|q| q.deliveries)
            .sum();
        let (pre, post) = (w.pre() as u64, w.post() as u64);
        let slots = w.delays().max_level() as u64 + 1;
        let scdq = mem_scdq(alpha, pre, slots, event_bits);
        connections.push(ConnectionCost {
            connection: c,
            presynaptic: w.pre(),
            postsynaptic: w.post(),
            delay_slots: slots as usize,
            alpha,
            ring_bits: mem_ring(post, slots, weight_bits),
            sharedq: mem_sharedq(alpha, pre, slots, event_bits),
            sharedq_summation: mem_sharedq_summation(alpha, pre, slots, event_bits),
            scdq,
            peak_scdq_occupancy: peak,
            within_bound: peak as f64 <= scdq.events + 1e-9,
            live_parameters: live,
            pushes,
            deliveries,
            synaptic_ops: deliveries * post,
        });
    }
    CostReport {
        samples: runs.len(),
        weight_bits,
        event_bits,
        parameters: model.num_parameters(),
        parameter_bits,
        index_bits,
        connections,
    }
}
