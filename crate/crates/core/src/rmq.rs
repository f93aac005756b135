//! Sparse-table range minimum over a fixed slice of floats.

/// `levels[j][i] = min(values[i .. i + 2^j])`.
#[derive(Debug, Clone)]
pub struct SparseTable {
    levels: Vec<Vec<f64>>,
}

impl SparseTable {
    pub fn new(values: &[f64]) -> Self {
        let n = values.len();
        let mut levels = vec![values.to_vec()];
        let mut width = 1;
        while 2 * width <= n {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = (0..=n - 2 * width)
                .map(|i| prev[i].min(prev[i + width]))
                .collect();
            levels.push(next);
            width *= 2;
        }
        Self { levels }
    }

    pub fn len(&self) -> usize {
        self.levels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels[0].is_empty()
    }

    /// Minimum over the inclusive index range `[lo, hi]` (order-insensitive).
    pub fn min(&self, lo: usize, hi: usize) -> f64 {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let span = hi - lo + 1;
        let j = (usize::BITS - 1 - span.leading_zeros()) as usize;
        let row = &self.levels[j];
        row[lo].min(row[hi + 1 - (1 << j)])
    }
}
