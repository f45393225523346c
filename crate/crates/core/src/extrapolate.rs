//! Polynomial extrapolation to `h = 0` (Richardson / Neville tableau).

use crate::numerics::HPReal;

/// First-order Richardson step: the value at `h = 0` of the line through
/// `(h0, v0)` and `(h1, v1)`.
pub fn richardson_first_order(h0: &HPReal, v0: &HPReal, h1: &HPReal, v1: &HPReal) -> HPReal {
    let num = &(h0 * v1) - &(h1 * v0);
    &num / &(h0 - h1)
}

/// Neville tableau for extrapolation to zero.
///
/// Row `i` holds the estimates from the `j + 1` nodes ending at node `i`, so
/// `table[i][0]` is the raw value and `table[i][i]` uses every node up to `i`.
#[derive(Clone, Debug, Default)]
pub struct Tableau {
    nodes: Vec<HPReal>,
    table: Vec<Vec<HPReal>>,
}

impl Tableau {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, h: HPReal, value: HPReal) {
        let i = self.nodes.len();
        let mut row = Vec::with_capacity(i + 1);
        row.push(value);
        for j in 1..=i {
            let (hi, hk) = (&h, &self.nodes[i - j]);
            let prev = &self.table[i - 1][j - 1];
            let next = richardson_first_order(hk, prev, hi, &row[j - 1]);
            row.push(next);
        }
        self.nodes.push(h);
        self.table.push(row);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn row(&self, i: usize) -> &[HPReal] {
        &self.table[i]
    }

    /// Estimate at node `i` using at most `order + 1` nodes.
    pub fn estimate(&self, i: usize, order: usize) -> &HPReal {
        &self.table[i][order.min(i)]
    }

    /// Most refined estimate available.
    pub fn best(&self) -> Option<&HPReal> {
        self.table.last().and_then(|r| r.last())
    }

    /// Difference between the two most refined diagonal estimates.
    pub fn diagonal_delta(&self) -> Option<HPReal> {
        let n = self.table.len();
        if n < 2 {
            return None;
        }
        Some((&self.table[n - 1][n - 1] - &self.table[n - 2][n - 2]).abs())
    }
}
