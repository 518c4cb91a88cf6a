use crate::network::DelayWeights;

/// "Weight value useful" matrix: bit `(i, k)` is set when presynaptic neuron
/// `i` has at least one nonzero outgoing weight at delay level index `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WvuMatrix {
    pre: usize,
    levels: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl WvuMatrix {
    pub fn zeros(pre: usize, levels: usize) -> Self {
        let words_per_row = levels.div_ceil(64).max(1);
        Self {
            pre,
            levels,
            words_per_row,
            bits: vec![0; pre * words_per_row],
        }
    }

    /// Every delayed axon marked useful: the filter is effectively disabled.
    pub fn all_ones(pre: usize, levels: usize) -> Self {
        let mut m = Self::zeros(pre, levels);
        for i in 0..pre {
            for k in 0..levels {
                m.set(i, k, true);
            }
        }
        m
    }

    pub fn build(w: &DelayWeights) -> Self {
        let mut m = Self::zeros(w.pre(), w.num_levels());
        for k in 0..w.num_levels() {
            for i in 0..w.pre() {
                if w.axon_is_useful(k, i) {
                    m.set(i, k, true);
                }
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Self {
        let levels = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows.len(), levels);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), levels, "ragged WVU rows");
            for (k, &b) in row.iter().enumerate() {
                m.set(i, k, b);
            }
        }
        m
    }

    pub fn pre(&self) -> usize {
        self.pre
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> bool {
        let word = self.bits[i * self.words_per_row + k / 64];
        word >> (k % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, k: usize, value: bool) {
        assert!(k < self.levels, "level index {k} out of range");
        let word = &mut self.bits[i * self.words_per_row + k / 64];
        if value {
            *word |= 1 << (k % 64);
        } else {
            *word &= !(1 << (k % 64));
        }
    }

    pub fn rows(&self) -> Vec<Vec<bool>> {
        (0..self.pre)
            .map(|i| (0..self.levels).map(|k| self.get(i, k)).collect())
            .collect()
    }

    /// Leading zeros of row `i` read as a `levels`-bit number whose most
    /// significant bit is the highest delay level.
    pub fn clz(&self, i: usize) -> usize {
        let row = &self.bits[i * self.words_per_row..(i + 1) * self.words_per_row];
        for (w, &word) in row.iter().enumerate().rev() {
            if word != 0 {
                let top = w * 64 + (63 - word.leading_zeros() as usize);
                return self.levels - 1 - top;
            }
        }
        self.levels
    }

    /// Highest level index with a useful weight, `levels - 1 - clz`, or -1
    /// when the row is empty and events from `i` need never be queued.
    pub fn max_residency(&self, i: usize) -> i64 {
        self.levels as i64 - 1 - self.clz(i) as i64
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// See [`WvuMatrix::build`].
pub fn wvu_build(w: &DelayWeights) -> WvuMatrix {
    WvuMatrix::build(w)
}

/// See [`WvuMatrix::max_residency`].
pub fn wvu_max_residency(wvu: &WvuMatrix, i: usize) -> i64 {
    wvu.max_residency(i)
}
