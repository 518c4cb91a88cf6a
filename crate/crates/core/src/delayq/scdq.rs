//! Shared circular delay queue.
//!
//! Two FIFOs, the pre-processing queue (PRQ) and the post-processing queue
//! (POQ), sit between a presynaptic and a postsynaptic layer. Incoming
//! address events enter the PRQ with an elapsed-delay counter of zero. The
//! read side drains the PRQ: an event whose counter equals a delay level with
//! a useful weight is delivered, and an event that still has a useful level
//! ahead of it is written to the POQ with its counter advanced. An
//! end-of-timestep token closes each algorithmic step and swaps the two
//! buffers, so one event orbits the pair once per timestep until its last
//! useful delay has passed.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::wvu::WvuMatrix;
use crate::error::{Error, Result};
use crate::network::{DelaySet, DelayWeights};

/// Address event with its elapsed delay in timesteps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpikeEvent {
    pub source: u32,
    pub counter: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Packet {
    Spike(SpikeEvent),
    EndOfTimestep,
}

/// Traffic and occupancy counters of one delay structure.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueStats {
    /// Events accepted at the queue input.
    pub pushes: u64,
    /// Events discarded on entry because their source has no useful axon.
    pub dropped: u64,
    /// Events forwarded to the postsynaptic layer.
    pub deliveries: u64,
    /// Writes into the POQ (events kept for a later timestep).
    pub recirculations: u64,
    pub peak_prq: usize,
    pub peak_poq: usize,
    /// Largest number of events held at any instant.
    pub peak_live: usize,
    pub timesteps: u64,
}

impl QueueStats {
    /// Storage needed if PRQ and POQ are separate buffers.
    pub fn peak_occupancy(&self) -> usize {
        self.peak_prq + self.peak_poq
    }
}

#[derive(Clone, Debug)]
pub struct ScdqState {
    prq: VecDeque<Packet>,
    poq: VecDeque<Packet>,
    wvu: WvuMatrix,
    levels: Vec<usize>,
    /// Level index of each elapsed delay value, if it is a member level.
    level_of_delay: Vec<Option<u32>>,
    /// Largest useful delay per source; `None` drops the source's events.
    residency: Vec<Option<u32>>,
    capacity: Option<usize>,
    live: usize,
    stats: QueueStats,
}

impl ScdqState {
    pub fn new(delays: &DelaySet, wvu: WvuMatrix, capacity: Option<usize>) -> Self {
        assert_eq!(
            wvu.levels(),
            delays.len(),
            "WVU width must match the delay set"
        );
        let levels = delays.levels().to_vec();
        let mut level_of_delay = vec![None; delays.max_level() + 1];
        for (k, &d) in levels.iter().enumerate() {
            level_of_delay[d] = Some(k as u32);
        }
        let residency = (0..wvu.pre())
            .map(|i| {
                let k = wvu.max_residency(i);
                (k >= 0).then(|| levels[k as usize] as u32)
            })
            .collect();
        Self {
            prq: VecDeque::new(),
            poq: VecDeque::new(),
            wvu,
            levels,
            level_of_delay,
            residency,
            capacity,
            live: 0,
            stats: QueueStats::default(),
        }
    }

    /// Queue for connection `w`. With `filter` off the WVU is all ones, so no
    /// delivery or recirculation is ever skipped.
    pub fn for_weights(w: &DelayWeights, filter: bool, capacity: Option<usize>) -> Self {
        let wvu = if filter {
            WvuMatrix::build(w)
        } else {
            WvuMatrix::all_ones(w.pre(), w.num_levels())
        };
        Self::new(w.delays(), wvu, capacity)
    }

    pub fn wvu(&self) -> &WvuMatrix {
        &self.wvu
    }

    pub fn stats(&self) -> &QueueStats {
        &self.stats
    }

    /// Events currently held in PRQ and POQ.
    pub fn occupancy(&self) -> usize {
        self.live
    }

    /// Largest delay after which events from `source` leave the queue.
    pub fn residency_delay(&self, source: usize) -> Option<usize> {
        self.residency[source].map(|d| d as usize)
    }

    /// Every queued event, PRQ first.
    pub fn queued(&self) -> impl Iterator<Item = SpikeEvent> + '_ {
        self.prq.iter().chain(&self.poq).filter_map(|p| match p {
            Packet::Spike(e) => Some(*e),
            Packet::EndOfTimestep => None,
        })
    }

    fn reserve_slot(&mut self) -> Result<()> {
        if let Some(cap) = self.capacity {
            if self.live + 1 > cap {
                return Err(Error::QueueOverflow {
                    capacity: cap,
                    peak: self.stats.peak_live.max(self.live + 1),
                });
            }
        }
        self.live += 1;
        self.stats.peak_live = self.stats.peak_live.max(self.live);
        Ok(())
    }

    /// Write controller: accepts an event from `source` during the current
    /// timestep. Sources without any useful axon are filtered out here.
    pub fn push(&mut self, source: usize) -> Result<()> {
        if self.residency[source].is_none() {
            self.stats.dropped += 1;
            return Ok(());
        }
        self.reserve_slot()?;
        self.prq.push_back(Packet::Spike(SpikeEvent {
            source: source as u32,
            counter: 0,
        }));
        self.stats.pushes += 1;
        self.stats.peak_prq = self.stats.peak_prq.max(self.prq.len());
        Ok(())
    }

    /// Closes the timestep: appends the end-of-timestep token, drains the PRQ
    /// through the read controller, and swaps the buffers when the token
    /// reaches the output. `deliver(source, level_index, delay)` is called
    /// for every event due now, in queue order.
    pub fn end_timestep(&mut self, mut deliver: impl FnMut(usize, usize, usize)) -> Result<()> {
        self.prq.push_back(Packet::EndOfTimestep);
        loop {
            match self.prq.pop_front() {
                Some(Packet::Spike(event)) => {
                    self.live -= 1;
                    let source = event.source as usize;
                    if let Some(k) = self.level_of_delay[event.counter as usize] {
                        let k = k as usize;
                        if self.wvu.get(source, k) {
                            deliver(source, k, self.levels[k]);
                            self.stats.deliveries += 1;
                        }
                    }
                    let last = self.residency[source].expect("only useful sources are queued");
                    if event.counter < last {
                        self.reserve_slot()?;
                        self.poq.push_back(Packet::Spike(SpikeEvent {
                            source: event.source,
                            counter: event.counter + 1,
                        }));
                        self.stats.recirculations += 1;
                        self.stats.peak_poq = self.stats.peak_poq.max(self.poq.len());
                    }
                }
                Some(Packet::EndOfTimestep) => {
                    std::mem::swap(&mut self.prq, &mut self.poq);
                    break;
                }
                None => unreachable!("end-of-timestep token was queued"),
            }
        }
        self.stats.timesteps += 1;
        Ok(())
    }
}

/// See [`ScdqState::push`].
pub fn scdq_push(state: &mut ScdqState, source: usize) -> Result<()> {
    state.push(source)
}

/// See [`ScdqState::end_timestep`].
pub fn scdq_timestep(
    state: &mut ScdqState,
    deliver: impl FnMut(usize, usize, usize),
) -> Result<()> {
    state.end_timestep(deliver)
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: usize = 0;
    const B: usize = 1;

    fn run_step(q: &mut ScdqState, pushes: &[usize]) -> Vec<(usize, usize)> {
        for &s in pushes {
            q.push(s).unwrap();
        }
        let mut out = Vec::new();
        q.end_timestep(|s, _, d| out.push((s, d))).unwrap();
        out.sort_unstable();
        out
    }

    #[test]
    fn three_timestep_event_flow() {
        let delays = DelaySet::strided(3, 1).unwrap();
        let mut q = ScdqState::new(&delays, WvuMatrix::all_ones(2, 3), None);
        assert_eq!(run_step(&mut q, &[A, B]), vec![(A, 0), (B, 0)]);
        assert_eq!(run_step(&mut q, &[B]), vec![(A, 1), (B, 0), (B, 1)]);
        assert_eq!(run_step(&mut q, &[]), vec![(A, 2), (B, 1), (B, 2)]);
        assert_eq!(run_step(&mut q, &[]), vec![(B, 2)]);
        assert_eq!(q.occupancy(), 0);
    }

    #[test]
    fn empty_queue_swaps_without_deliveries() {
        let mut q = ScdqState::new(&DelaySet::zero(), WvuMatrix::all_ones(1, 1), None);
        assert!(run_step(&mut q, &[]).is_empty());
        assert_eq!(q.stats().timesteps, 1);
        assert_eq!(q.occupancy(), 0);
    }

    #[test]
    fn filter_skips_useless_levels_and_shortens_residency() {
        let delays = DelaySet::strided(3, 1).unwrap();
        let wvu = WvuMatrix::from_rows(&[vec![true, true, false], vec![false, false, true]]);
        let mut q = ScdqState::new(&delays, wvu, None);
        assert_eq!(q.residency_delay(A), Some(1));
        assert_eq!(q.residency_delay(B), Some(2));
        assert_eq!(run_step(&mut q, &[A, B]), vec![(A, 0)]);
        assert_eq!(run_step(&mut q, &[]), vec![(A, 1)]);
        assert_eq!(q.queued().count(), 1);
        assert_eq!(run_step(&mut q, &[]), vec![(B, 2)]);
        assert_eq!(q.occupancy(), 0);
    }

    #[test]
    fn sources_without_useful_axons_are_dropped() {
        let wvu = WvuMatrix::from_rows(&[vec![false, false], vec![true, false]]);
        let mut q = ScdqState::new(&DelaySet::strided(2, 1).unwrap(), wvu, None);
        assert_eq!(run_step(&mut q, &[0, 1]), vec![(1, 0)]);
        assert_eq!(q.stats().dropped, 1);
        assert_eq!(q.occupancy(), 0);
    }

    #[test]
    fn strided_levels_deliver_only_at_members() {
        let delays = DelaySet::new(vec![0, 2, 4]).unwrap();
        let mut q = ScdqState::new(&delays, WvuMatrix::all_ones(1, 3), None);
        let mut log = Vec::new();
        for t in 0..6 {
            let pushes: &[usize] = if t == 0 { &[0] } else { &[] };
            log.push(run_step(&mut q, pushes));
        }
        assert_eq!(log[0], vec![(0, 0)]);
        assert!(log[1].is_empty());
        assert_eq!(log[2], vec![(0, 2)]);
        assert!(log[3].is_empty());
        assert_eq!(log[4], vec![(0, 4)]);
        assert!(log[5].is_empty());
    }

    #[test]
    fn overflow_reports_peak() {
        let mut q = ScdqState::new(
            &DelaySet::strided(4, 1).unwrap(),
            WvuMatrix::all_ones(3, 4),
            Some(4),
        );
        run_step(&mut q, &[0, 1]);
        q.push(2).unwrap();
        q.push(0).unwrap();
        match q.push(1) {
            Err(Error::QueueOverflow { capacity, peak }) => {
                assert_eq!(capacity, 4);
                assert_eq!(peak, 5);
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }
}
