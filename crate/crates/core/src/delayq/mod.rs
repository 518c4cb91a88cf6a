//! Event-driven executors that realize synaptic delays the way digital
//! neuromorphic hardware does.
//!
//! Each executor keeps the LIF update of [`crate::network`] and replaces the
//! dense history lookup with a delay structure per connection:
//!
//! - [`forward_scdq`]: one shared circular delay queue per connection,
//!   optionally with the WVU zero-skipping filter.
//! - [`forward_ring`]: one ring buffer of current accumulators per
//!   postsynaptic neuron.
//! - [`forward_sharedq`]: a cascade of FIFOs supporting one delay per axon
//!   (or one event copy per useful axon in multi-copy mode).
//!
//! All of them produce traces bit-identical to [`forward_dense`].

mod events;
mod ring;
mod scdq;
mod sharedq;
mod wvu;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use events::{Delivery, EventLog};
pub use ring::RingBufferState;
pub use scdq::{scdq_push, scdq_timestep, QueueStats, ScdqState, SpikeEvent};
pub use sharedq::{AxonEvent, SharedQueueState};
pub use wvu::{wvu_build, wvu_max_residency, WvuMatrix};

use crate::error::{Error, Result};
use crate::network::dense::{check_raster, LayerStack};
use crate::network::{forward_dense, NetworkModel, Raster, SimTrace};

/// Presynaptic activity seen by one connection.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConnectionActivity {
    pub presynaptic: usize,
    /// Largest number of presynaptic spikes in a single timestep.
    pub max_active: usize,
    pub total_spikes: u64,
}

impl ConnectionActivity {
    fn new(presynaptic: usize) -> Self {
        Self {
            presynaptic,
            ..Self::default()
        }
    }

    fn observe(&mut self, active: usize) {
        self.max_active = self.max_active.max(active);
        self.total_spikes += active as u64;
    }

    /// Peak fraction of presynaptic neurons active in one timestep.
    pub fn max_activation_fraction(&self) -> f64 {
        if self.presynaptic == 0 {
            0.0
        } else {
            self.max_active as f64 / self.presynaptic as f64
        }
    }
}

/// Output of an executor run: the trace plus per-connection structure
/// statistics.
#[derive(Clone, Debug)]
pub struct BackendRun {
    pub trace: SimTrace,
    pub queues: Vec<QueueStats>,
    pub activity: Vec<ConnectionActivity>,
    pub events: Option<EventLog>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Dense,
    Scdq,
    Ring,
    SharedQ,
}

impl Backend {
    pub const ALL: [Backend; 4] = [
        Backend::Dense,
        Backend::Scdq,
        Backend::Ring,
        Backend::SharedQ,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Dense => "dense",
            Backend::Scdq => "scdq",
            Backend::Ring => "ring",
            Backend::SharedQ => "sharedq",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Backend::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| {
                Error::InvalidParam(format!(
                    "unknown backend `{s}` (expected dense, scdq, ring or sharedq)"
                ))
            })
    }
}

/// Knobs shared by the event-driven executors. Fields that do not apply to a
/// backend are ignored by it.
#[derive(Clone, Debug)]
pub struct BackendOptions {
    /// SCDQ: build the WVU from the weights (true) or use an all-ones matrix.
    pub wvu_filter: bool,
    /// SCDQ / shared queue: hard cap on queued events.
    pub capacity: Option<usize>,
    /// Ring buffer: slots per neuron; defaults to `max_level + 1`.
    pub ring_slots: Option<usize>,
    /// Shared queue: enqueue one copy per useful axon instead of requiring a
    /// single delay per presynaptic neuron.
    pub multi_copy: bool,
    pub record_events: bool,
}

impl Default for BackendOptions {
    fn default() -> Self {
        Self {
            wvu_filter: true,
            capacity: None,
            ring_slots: None,
            multi_copy: false,
            record_events: false,
        }
    }
}

/// Runs `backend` on one raster.
pub fn run_backend(
    backend: Backend,
    model: &NetworkModel,
    raster: &Raster,
    opts: &BackendOptions,
) -> Result<BackendRun> {
    match backend {
        Backend::Dense => run_dense(model, raster, opts.record_events),
        Backend::Scdq => forward_scdq(model, raster, opts),
        Backend::Ring => forward_ring(model, raster, opts),
        Backend::SharedQ => forward_sharedq(model, raster, opts),
    }
}

fn presynaptic_frame<'a>(
    raster: &'a Raster,
    trace: &'a SimTrace,
    c: usize,
    t: usize,
) -> &'a [bool] {
    if c == 0 {
        raster.frame(t)
    } else {
        trace.layers[c - 1].spikes_at(t)
    }
}

/// Dense reference wrapped as a [`BackendRun`]: deliveries are the useful
/// `(source, delay)` pairs visible from the spike history.
fn run_dense(model: &NetworkModel, raster: &Raster, record: bool) -> Result<BackendRun> {
    let trace = forward_dense(model, raster)?;
    let mut queues = Vec::new();
    let mut activity = Vec::new();
    let mut log = record.then(EventLog::default);
    for (c, w) in model.connections().iter().enumerate() {
        let mut stats = QueueStats::default();
        let mut act = ConnectionActivity::new(w.pre());
        let levels = w.delays().levels();
        for t in 0..model.timesteps() {
            act.observe(
                presynaptic_frame(raster, &trace, c, t)
                    .iter()
                    .filter(|&&s| s)
                    .count(),
            );
            for k in (0..levels.len()).rev() {
                let Some(src_t) = t.checked_sub(levels[k]) else {
                    continue;
                };
                let frame = presynaptic_frame(raster, &trace, c, src_t);
                for i in (0..w.pre()).filter(|&i| frame[i] && w.axon_is_useful(k, i)) {
                    stats.deliveries += 1;
                    if let Some(log) = log.as_mut() {
                        log.push(c, t, i, levels[k]);
                    }
                }
            }
            stats.timesteps += 1;
        }
        queues.push(stats);
        activity.push(act);
    }
    Ok(BackendRun {
        trace,
        queues,
        activity,
        events: log,
    })
}

/// Executes the model with one shared circular delay queue per connection.
pub fn forward_scdq(
    model: &NetworkModel,
    raster: &Raster,
    opts: &BackendOptions,
) -> Result<BackendRun> {
    check_raster(model, raster)?;
    let steps = model.timesteps();
    let mut trace = SimTrace::empty(model.widths(), steps);
    let mut stack = LayerStack::new(model);
    let mut queues: Vec<ScdqState> = model
        .connections()
        .iter()
        .map(|w| ScdqState::for_weights(w, opts.wvu_filter, opts.capacity))
        .collect();
    let mut activity: Vec<ConnectionActivity> = model
        .connections()
        .iter()
        .map(|w| ConnectionActivity::new(w.pre()))
        .collect();
    let mut log = opts.record_events.then(EventLog::default);

    for t in 0..steps {
        stack.update(t, &mut trace);
        for (c, w) in model.connections().iter().enumerate() {
            let frame = presynaptic_frame(raster, &trace, c, t);
            let mut active = 0;
            for (i, _) in frame.iter().enumerate().filter(|(_, &s)| s) {
                queues[c].push(i)?;
                active += 1;
            }
            activity[c].observe(active);
            let current = &mut stack.pending[c];
            current.fill(0.0);
            queues[c].end_timestep(|i, k, d| {
                for (acc, &wij) in current.iter_mut().zip(w.row(k, i)) {
                    *acc += wij;
                }
                if let Some(log) = log.as_mut() {
                    log.push(c, t, i, d);
                }
            })?;
        }
    }
    trace.label = raster.label();
    trace.finish(model.readout());
    Ok(BackendRun {
        trace,
        queues: queues.iter().map(|q| q.stats().clone()).collect(),
        activity,
        events: log,
    })
}

/// Executes the model with per-neuron ring buffers.
pub fn forward_ring(
    model: &NetworkModel,
    raster: &Raster,
    opts: &BackendOptions,
) -> Result<BackendRun> {
    check_raster(model, raster)?;
    let mut rings = Vec::with_capacity(model.num_layers());
    for w in model.connections() {
        let slots = opts.ring_slots.unwrap_or(w.delays().max_level() + 1);
        if w.delays().max_level() >= slots {
            return Err(Error::RingConfig {
                delay: w.delays().max_level(),
                slots,
            });
        }
        rings.push(RingBufferState::new(w.post(), slots)?);
    }
    let steps = model.timesteps();
    let mut trace = SimTrace::empty(model.widths(), steps);
    let mut stack = LayerStack::new(model);
    let mut stats = vec![QueueStats::default(); model.num_layers()];
    let mut activity: Vec<ConnectionActivity> = model
        .connections()
        .iter()
        .map(|w| ConnectionActivity::new(w.pre()))
        .collect();
    let mut log = opts.record_events.then(EventLog::default);

    for t in 0..steps {
        stack.update(t, &mut trace);
        for (c, w) in model.connections().iter().enumerate() {
            let frame = presynaptic_frame(raster, &trace, c, t);
            let levels = w.delays().levels();
            let mut active = 0;
            for (i, _) in frame.iter().enumerate().filter(|(_, &s)| s) {
                active += 1;
                stats[c].pushes += 1;
                for (k, &d) in levels.iter().enumerate() {
                    rings[c].accumulate(d, w.row(k, i))?;
                    stats[c].deliveries += 1;
                    if let Some(log) = log.as_mut() {
                        if t + d < steps && w.axon_is_useful(k, i) {
                            log.push(c, t + d, i, d);
                        }
                    }
                }
            }
            activity[c].observe(active);
            rings[c].drain_into(&mut stack.pending[c]);
            stats[c].timesteps += 1;
        }
    }
    if let Some(log) = log.as_mut() {
        log.sort();
    }
    trace.label = raster.label();
    trace.finish(model.readout());
    Ok(BackendRun {
        trace,
        queues: stats,
        activity,
        events: log,
    })
}

/// Levels with a useful axon for every presynaptic neuron of connection `c`,
/// checking the single-delay-per-axon requirement unless `multi_copy`.
fn axonal_levels(model: &NetworkModel, c: usize, multi_copy: bool) -> Result<Vec<Vec<usize>>> {
    let w = model.connection(c);
    (0..w.pre())
        .map(|i| {
            let useful: Vec<usize> = (0..w.num_levels())
                .filter(|&k| w.axon_is_useful(k, i))
                .collect();
            if useful.len() > 1 && !multi_copy {
                return Err(Error::NotAxonal {
                    connection: c,
                    neuron: i,
                    levels: useful.len(),
                });
            }
            Ok(useful)
        })
        .collect()
}

/// True when every presynaptic neuron of every connection has at most one
/// delay level with nonzero weights.
pub fn is_axonal(model: &NetworkModel) -> bool {
    (0..model.num_layers()).all(|c| axonal_levels(model, c, false).is_ok())
}

/// Executes the model with a cascaded shared delay queue per connection.
pub fn forward_sharedq(
    model: &NetworkModel,
    raster: &Raster,
    opts: &BackendOptions,
) -> Result<BackendRun> {
    check_raster(model, raster)?;
    let axons = (0..model.num_layers())
        .map(|c| axonal_levels(model, c, opts.multi_copy))
        .collect::<Result<Vec<_>>>()?;
    let steps = model.timesteps();
    let mut trace = SimTrace::empty(model.widths(), steps);
    let mut stack = LayerStack::new(model);
    let mut queues: Vec<SharedQueueState> = model
        .connections()
        .iter()
        .map(|w| SharedQueueState::new(w.delays().max_level(), opts.capacity))
        .collect();
    let mut activity: Vec<ConnectionActivity> = model
        .connections()
        .iter()
        .map(|w| ConnectionActivity::new(w.pre()))
        .collect();
    let mut log = opts.record_events.then(EventLog::default);

    for t in 0..steps {
        stack.update(t, &mut trace);
        for (c, w) in model.connections().iter().enumerate() {
            let frame = presynaptic_frame(raster, &trace, c, t);
            let levels = w.delays().levels();
            let mut active = 0;
            for (i, _) in frame.iter().enumerate().filter(|(_, &s)| s) {
                active += 1;
                for &k in &axons[c][i] {
                    queues[c].push(i, levels[k])?;
                }
            }
            activity[c].observe(active);
            let current = &mut stack.pending[c];
            current.fill(0.0);
            queues[c].end_timestep(|i, d| {
                let k = w.delays().index_of(d).expect("queued delays are members");
                for (acc, &wij) in current.iter_mut().zip(w.row(k, i)) {
                    *acc += wij;
                }
                if let Some(log) = log.as_mut() {
                    log.push(c, t, i, d);
                }
            });
        }
    }
    trace.label = raster.label();
    trace.finish(model.readout());
    Ok(BackendRun {
        trace,
        queues: queues
            .iter()
            .map(|q| {
                let mut s = q.stats().clone();
                // one cascade position per delay: report total FIFO storage
                s.peak_prq = q.peak_occupancy();
                s
            })
            .collect(),
        activity,
        events: log,
    })
}
