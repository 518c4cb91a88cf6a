use std::collections::VecDeque;

use super::scdq::QueueStats;
use crate::error::{Error, Result};

/// Event waiting in the cascade: its source and the delay it was sent with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AxonEvent {
    pub source: u32,
    pub delay: u32,
}

/// Linear cascade of FIFOs. FIFO `r` holds the events due in `r` timesteps;
/// at the end of each timestep FIFO 0 is delivered and every other FIFO
/// moves one position down. An event enters and leaves exactly once.
#[derive(Clone, Debug)]
pub struct SharedQueueState {
    fifos: VecDeque<VecDeque<AxonEvent>>,
    capacity: Option<usize>,
    live: usize,
    peak_per_fifo: Vec<usize>,
    stats: QueueStats,
}

impl SharedQueueState {
    /// A cascade serving delays `0..=max_delay`.
    pub fn new(max_delay: usize, capacity: Option<usize>) -> Self {
        Self {
            fifos: (0..=max_delay).map(|_| VecDeque::new()).collect(),
            capacity,
            live: 0,
            peak_per_fifo: vec![0; max_delay + 1],
            stats: QueueStats::default(),
        }
    }

    pub fn depth(&self) -> usize {
        self.fifos.len()
    }

    pub fn occupancy(&self) -> usize {
        self.live
    }

    pub fn stats(&self) -> &QueueStats {
        &self.stats
    }

    /// Sum over FIFOs of each FIFO's own peak length: the storage a cascade
    /// of separately sized FIFOs would need.
    pub fn peak_occupancy(&self) -> usize {
        self.peak_per_fifo.iter().sum()
    }

    pub fn push(&mut self, source: usize, delay: usize) -> Result<()> {
        if delay >= self.fifos.len() {
            return Err(Error::InvalidParam(format!(
                "delay {delay} exceeds the cascade depth {}",
                self.fifos.len()
            )));
        }
        if let Some(cap) = self.capacity {
            if self.live + 1 > cap {
                return Err(Error::QueueOverflow {
                    capacity: cap,
                    peak: self.stats.peak_live.max(self.live + 1),
                });
            }
        }
        let fifo = &mut self.fifos[delay];
        fifo.push_back(AxonEvent {
            source: source as u32,
            delay: delay as u32,
        });
        let len = fifo.len();
        let peak = &mut self.peak_per_fifo[delay];
        *peak = (*peak).max(len);
        self.live += 1;
        self.stats.pushes += 1;
        self.stats.peak_live = self.stats.peak_live.max(self.live);
        Ok(())
    }

    /// Delivers FIFO 0 via `deliver(source, delay)` and shifts the cascade.
    pub fn end_timestep(&mut self, mut deliver: impl FnMut(usize, usize)) {
        let mut due = self.fifos.pop_front().expect("cascade depth >= 1");
        for e in due.drain(..) {
            deliver(e.source as usize, e.delay as usize);
            self.stats.deliveries += 1;
            self.live -= 1;
        }
        self.fifos.push_back(due);
        for (peak, fifo) in self.peak_per_fifo.iter_mut().zip(&self.fifos) {
            *peak = (*peak).max(fifo.len());
        }
        self.stats.recirculations += self.live as u64;
        self.stats.timesteps += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_leaves_after_exactly_its_delay() {
        let mut q = SharedQueueState::new(3, None);
        q.push(7, 3).unwrap();
        q.push(8, 0).unwrap();
        let mut seen = Vec::new();
        for t in 0..5 {
            q.end_timestep(|s, d| seen.push((t, s, d)));
        }
        assert_eq!(seen, vec![(0, 8, 0), (3, 7, 3)]);
        assert_eq!(q.stats().deliveries, 2);
        assert_eq!(q.occupancy(), 0);
    }

    #[test]
    fn rejects_delays_beyond_depth() {
        let mut q = SharedQueueState::new(2, None);
        assert!(q.push(0, 3).is_err());
        let mut capped = SharedQueueState::new(2, Some(1));
        capped.push(0, 1).unwrap();
        assert!(matches!(
            capped.push(1, 1),
            Err(Error::QueueOverflow { .. })
        ));
    }
}
