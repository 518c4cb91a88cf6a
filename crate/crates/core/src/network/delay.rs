use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Admissible synaptic delays of one connection, in timesteps.
///
/// Levels are strictly increasing. A freshly initialised connection uses a
/// strided range; pruning may leave an arbitrary subset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct DelaySet {
    levels: Vec<usize>,
}

impl DelaySet {
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidParam("delay set must not be empty".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParam(format!(
                "delay levels must be strictly increasing: {levels:?}"
            )));
        }
        Ok(Self { levels })
    }

    /// The single level `{0}` (no delay).
    pub fn zero() -> Self {
        Self { levels: vec![0] }
    }

    /// `{0, stride, 2*stride, ...}` up to but excluding `limit`, so that
    /// `strided(60, 2)` yields the 30 levels `{0, 2, ..., 58}`.
    pub fn strided(limit: usize, stride: usize) -> Result<Self> {
        if stride == 0 || limit == 0 {
            return Err(Error::InvalidParam(format!(
                "strided delay set needs limit > 0 and stride > 0 (got {limit}, {stride})"
            )));
        }
        Ok(Self {
            levels: (0..limit).step_by(stride).collect(),
        })
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn max_level(&self) -> usize {
        *self.levels.last().expect("delay set is never empty")
    }

    pub fn index_of(&self, delay: usize) -> Option<usize> {
        self.levels.binary_search(&delay).ok()
    }

    pub fn contains(&self, delay: usize) -> bool {
        self.index_of(delay).is_some()
    }
}

impl TryFrom<Vec<usize>> for DelaySet {
    type Error = Error;

    fn try_from(levels: Vec<usize>) -> Result<Self> {
        Self::new(levels)
    }
}

impl From<DelaySet> for Vec<usize> {
    fn from(set: DelaySet) -> Self {
        set.levels
    }
}

/// Weights `w[k][i][j]` of a delay-extended connection together with the
/// sparsity mask. `k` indexes the connection's [`DelaySet`], `i` the
/// presynaptic and `j` the postsynaptic neuron.
///
/// Masked entries are exactly `+0.0` and cannot be written through the public
/// API: every mutator skips or rejects them.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayWeights {
    delays: DelaySet,
    pre: usize,
    post: usize,
    weights: Vec<f64>,
    mask: Vec<bool>,
}

impl DelayWeights {
    pub fn zeros(delays: DelaySet, pre: usize, post: usize) -> Self {
        let n = delays.len() * pre * post;
        Self {
            delays,
            pre,
            post,
            weights: vec![0.0; n],
            mask: vec![true; n],
        }
    }

    /// Builds a tensor from raw parts. Masked entries must be zero.
    pub fn from_parts(
        delays: DelaySet,
        pre: usize,
        post: usize,
        weights: Vec<f64>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        let n = delays.len() * pre * post;
        if weights.len() != n {
            return Err(Error::Dimension {
                what: "weight tensor",
                expected: n,
                found: weights.len(),
            });
        }
        if mask.len() != n {
            return Err(Error::Dimension {
                what: "weight mask",
                expected: n,
                found: mask.len(),
            });
        }
        if let Some(idx) = (0..n).find(|&x| !mask[x] && weights[x] != 0.0) {
            let (k, i, j) = unflatten(idx, pre, post);
            return Err(Error::InvalidParam(format!(
                "masked weight ({k}, {i}, {j}) holds nonzero value {}",
                weights[idx]
            )));
        }
        let mut weights = weights;
        // normalise -0.0 in masked slots
        for (w, &m) in weights.iter_mut().zip(&mask) {
            if !m {
                *w = 0.0;
            }
        }
        Ok(Self {
            delays,
            pre,
            post,
            weights,
            mask,
        })
    }

    pub fn delays(&self) -> &DelaySet {
        &self.delays
    }

    pub fn num_levels(&self) -> usize {
        self.delays.len()
    }

    pub fn pre(&self) -> usize {
        self.pre
    }

    pub fn post(&self) -> usize {
        self.post
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn index(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.pre + i) * self.post + j
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.weights[self.index(k, i, j)]
    }

    pub fn is_live(&self, k: usize, i: usize, j: usize) -> bool {
        self.mask[self.index(k, i, j)]
    }

    /// Outgoing weights of presynaptic neuron `i` at level index `k`, one per
    /// postsynaptic neuron.
    #[inline]
    pub fn row(&self, k: usize, i: usize) -> &[f64] {
        let start = self.index(k, i, 0);
        &self.weights[start..start + self.post]
    }

    /// True when at least one outgoing weight of `(k, i)` is nonzero.
    pub fn axon_is_useful(&self, k: usize, i: usize) -> bool {
        self.row(k, i).iter().any(|&w| w != 0.0)
    }

    pub fn set(&mut self, k: usize, i: usize, j: usize, value: f64) -> Result<()> {
        let idx = self.index(k, i, j);
        if !self.mask[idx] {
            return Err(Error::MaskedWeight {
                level: k,
                pre: i,
                post: j,
            });
        }
        self.weights[idx] = value;
        Ok(())
    }

    /// Masks out `(k, i, j)` and zeroes it. Pruning is irreversible.
    pub fn prune(&mut self, k: usize, i: usize, j: usize) {
        let idx = self.index(k, i, j);
        self.prune_flat(idx);
    }

    pub(crate) fn prune_flat(&mut self, idx: usize) {
        self.mask[idx] = false;
        self.weights[idx] = 0.0;
    }

    /// Rewrites every live weight through `f(flat_index, old) -> new`.
    pub fn update_live(&mut self, mut f: impl FnMut(usize, f64) -> f64) {
        for (idx, (w, &m)) in self.weights.iter_mut().zip(&self.mask).enumerate() {
            if m {
                *w = f(idx, *w);
            }
        }
    }

    pub fn num_live(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn num_nonzero(&self) -> usize {
        self.weights.iter().filter(|&&w| w != 0.0).count()
    }

    /// Number of delay levels that still have at least one live synapse.
    pub fn live_levels(&self) -> usize {
        (0..self.num_levels())
            .filter(|&k| self.level_mask(k).iter().any(|&m| m))
            .count()
    }

    fn level_mask(&self, k: usize) -> &[bool] {
        let n = self.pre * self.post;
        &self.mask[k * n..(k + 1) * n]
    }

    /// Drops delay levels whose synapses are all masked. At least one level is
    /// always kept so the tensor stays well formed.
    pub fn compact(&mut self) {
        let keep: Vec<usize> = (0..self.num_levels())
            .filter(|&k| self.level_mask(k).iter().any(|&m| m))
            .collect();
        if keep.len() == self.num_levels() {
            return;
        }
        let keep = if keep.is_empty() { vec![0] } else { keep };
        self.retain_levels(&keep);
    }

    fn retain_levels(&mut self, keep: &[usize]) {
        let n = self.pre * self.post;
        let mut weights = Vec::with_capacity(keep.len() * n);
        let mut mask = Vec::with_capacity(keep.len() * n);
        for &k in keep {
            weights.extend_from_slice(&self.weights[k * n..(k + 1) * n]);
            mask.extend_from_slice(&self.mask[k * n..(k + 1) * n]);
        }
        let levels = keep.iter().map(|&k| self.delays.levels[k]).collect();
        self.delays = DelaySet { levels };
        self.weights = weights;
        self.mask = mask;
    }

    /// Re-expresses the tensor over `delays`, which must be a superset of the
    /// current levels. New levels start live with zero weights.
    pub fn extend_levels(&mut self, delays: DelaySet) -> Result<()> {
        if let Some(&missing) = self.delays.levels.iter().find(|&&d| !delays.contains(d)) {
            return Err(Error::InvalidParam(format!(
                "new delay set drops existing level {missing}"
            )));
        }
        let n = self.pre * self.post;
        let mut weights = vec![0.0; delays.len() * n];
        let mut mask = vec![true; delays.len() * n];
        for (k, &d) in self.delays.levels.iter().enumerate() {
            let nk = delays.index_of(d).expect("checked above");
            weights[nk * n..(nk + 1) * n].copy_from_slice(&self.weights[k * n..(k + 1) * n]);
            mask[nk * n..(nk + 1) * n].copy_from_slice(&self.mask[k * n..(k + 1) * n]);
        }
        self.delays = delays;
        self.weights = weights;
        self.mask = mask;
        Ok(())
    }
}

pub(crate) fn unflatten(idx: usize, pre: usize, post: usize) -> (usize, usize, usize) {
    let j = idx % post;
    let rest = idx / post;
    (rest / pre, rest % pre, j)
}
