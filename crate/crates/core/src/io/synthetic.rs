use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Raster;

/// Delayed-coincidence task: channel 0 fires at an onset `t0`, channel 1 at
/// `t0 + lag`, and the class is the index of `lag` in `lags`. Only the
/// timing between the two spikes carries the label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticTask {
    pub timesteps: usize,
    pub lags: Vec<usize>,
    /// Steps left after the latest possible second spike.
    pub tail: usize,
    /// Probability of an extra spike per `(t, channel)` cell.
    pub noise: f64,
}

impl Default for SyntheticTask {
    fn default() -> Self {
        Self {
            timesteps: 32,
            lags: vec![2, 6, 10],
            tail: 8,
            noise: 0.0,
        }
    }
}

impl SyntheticTask {
    pub const CHANNELS: usize = 2;

    pub fn classes(&self) -> usize {
        self.lags.len()
    }

    /// Number of admissible onsets, `T - max_lag - tail`.
    pub fn onsets(&self) -> Result<usize> {
        let max_lag =
            self.lags.iter().copied().max().ok_or_else(|| {
                Error::InvalidParam("the task needs at least one lag class".into())
            })?;
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::InvalidParam(format!(
                "noise rate {} outside [0, 1]",
                self.noise
            )));
        }
        let mut sorted = self.lags.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.lags.len() {
            return Err(Error::InvalidParam("lag classes must be distinct".into()));
        }
        match self.timesteps.checked_sub(max_lag + self.tail) {
            Some(n) if n > 0 => Ok(n),
            _ => Err(Error::InvalidParam(format!(
                "lag {max_lag} plus tail {} does not fit in {} timesteps",
                self.tail, self.timesteps
            ))),
        }
    }
}

/// `n` labelled rasters with balanced classes (counts differ by at most one),
/// in a seeded random order.
pub fn gen_synthetic(task: &SyntheticTask, n: usize, seed: u64) -> Result<Vec<Raster>> {
    let onsets = task.onsets()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..n).map(|k| k % task.classes()).collect();
    labels.shuffle(&mut rng);
    labels
        .into_iter()
        .map(|label| {
            let t0 = rng.gen_range(0..onsets);
            let mut r = Raster::new(task.timesteps, SyntheticTask::CHANNELS);
            if task.noise > 0.0 {
                for t in 0..task.timesteps {
                    for c in 0..SyntheticTask::CHANNELS {
                        if rng.gen_bool(task.noise) {
                            r.set(t, c, true);
                        }
                    }
                }
            }
            r.set(t0, 0, true);
            r.set(t0 + task.lags[label], 1, true);
            Ok(r.with_label(label))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_generation_is_reproducible_and_balanced() {
        let task = SyntheticTask::default();
        let a = gen_synthetic(&task, 100, 9).unwrap();
        assert_eq!(a, gen_synthetic(&task, 100, 9).unwrap());
        assert_ne!(a, gen_synthetic(&task, 100, 10).unwrap());
        let mut counts = [0; 3];
        for r in &a {
            counts[r.label().unwrap()] += 1;
            let events: Vec<_> = r.events().collect();
            assert_eq!(events.len(), 2);
            let t0 = events.iter().find(|e| e.1 == 0).unwrap().0;
            let t1 = events.iter().find(|e| e.1 == 1).unwrap().0;
            assert_eq!(t1 - t0, task.lags[r.label().unwrap()]);
            assert!(t1 + task.tail < task.timesteps);
        }
        assert_eq!(counts, [34, 33, 33]);
    }

    #[test]
    fn empty_and_impossible_tasks() {
        assert!(gen_synthetic(&SyntheticTask::default(), 0, 1)
            .unwrap()
            .is_empty());
        let tight = SyntheticTask {
            timesteps: 18,
            ..SyntheticTask::default()
        };
        assert!(gen_synthetic(&tight, 4, 1).is_err());
    }
}
