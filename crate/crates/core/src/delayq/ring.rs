use crate::error::{Error, Result};

/// Per-neuron ring buffers of one connection.
///
/// Each postsynaptic neuron owns `slots` accumulators. A spike delayed by `d`
/// adds its weight into slot `head + d`; at the end of a timestep the head
/// slot is drained into the neuron's input current, cleared, and the head
/// advances so the drained slot becomes the one for the maximum delay.
#[derive(Clone, Debug)]
pub struct RingBufferState {
    post: usize,
    slots: usize,
    head: usize,
    /// `[j][slot]`
    acc: Vec<f64>,
    accumulations: u64,
}

impl RingBufferState {
    pub fn new(post: usize, slots: usize) -> Result<Self> {
        if slots == 0 {
            return Err(Error::RingConfig { delay: 0, slots });
        }
        Ok(Self {
            post,
            slots,
            head: 0,
            acc: vec![0.0; post * slots],
            accumulations: 0,
        })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn head(&self) -> usize {
        self.head
    }

    /// Synaptic accumulate operations performed so far.
    pub fn accumulations(&self) -> u64 {
        self.accumulations
    }

    /// Accumulates one presynaptic spike's weights (one per postsynaptic
    /// neuron) for delivery `delay` steps from now.
    pub fn accumulate(&mut self, delay: usize, weights: &[f64]) -> Result<()> {
        if delay >= self.slots {
            return Err(Error::RingConfig {
                delay,
                slots: self.slots,
            });
        }
        debug_assert_eq!(weights.len(), self.post);
        let slot = (self.head + delay) % self.slots;
        for (j, &w) in weights.iter().enumerate() {
            self.acc[j * self.slots + slot] += w;
        }
        self.accumulations += weights.len() as u64;
        Ok(())
    }

    /// Moves the head slot of every neuron into `out`, zeroes it and advances.
    pub fn drain_into(&mut self, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let cell = &mut self.acc[j * self.slots + self.head];
            *o = *cell;
            *cell = 0.0;
        }
        self.head = (self.head + 1) % self.slots;
    }

    pub fn slot_values(&self, j: usize) -> &[f64] {
        &self.acc[j * self.slots..(j + 1) * self.slots]
    }

    pub fn is_idle(&self) -> bool {
        self.acc.iter().all(|&v| v == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_impulse_arrives_once_after_the_delay() {
        for d in 0..5 {
            let mut ring = RingBufferState::new(1, 5).unwrap();
            ring.accumulate(d, &[0.75]).unwrap();
            let mut seen = Vec::new();
            for _ in 0..12 {
                let mut out = [0.0];
                ring.drain_into(&mut out);
                seen.push(out[0]);
            }
            for (t, v) in seen.iter().enumerate() {
                assert_eq!(*v, if t == d { 0.75 } else { 0.0 }, "delay {d}, t {t}");
            }
        }
    }

    #[test]
    fn delay_beyond_slot_count_is_a_configuration_error() {
        let mut ring = RingBufferState::new(2, 3).unwrap();
        assert!(matches!(
            ring.accumulate(3, &[1.0, 1.0]),
            Err(Error::RingConfig { delay: 3, slots: 3 })
        ));
    }

    #[test]
    fn zero_weights_leave_accumulators_zero() {
        let mut ring = RingBufferState::new(3, 4).unwrap();
        for d in 0..4 {
            ring.accumulate(d, &[0.0; 3]).unwrap();
        }
        assert!(ring.is_idle());
    }
}
