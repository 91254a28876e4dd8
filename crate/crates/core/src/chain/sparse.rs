use crate::operator::TransitionOperator;

/// Compressed sparse row matrix of transition probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a square matrix from per-row `(column, value)` lists.
    /// Duplicate columns are summed and explicit zeros dropped.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|&(j, _)| j);
            let start = cols.len();
            for (j, p) in row {
                assert!(j < n, "column {j} out of range for {n} states");
                if cols.len() > start && cols[cols.len() - 1] == j {
                    *vals.last_mut().unwrap() += p;
                } else {
                    cols.push(j);
                    vals.push(p);
                }
            }
            // Drop entries that are exactly zero after merging.
            let mut k = start;
            for i in start..cols.len() {
                if vals[i] != 0.0 {
                    cols[k] = cols[i];
                    vals[k] = vals[i];
                    k += 1;
                }
            }
            cols.truncate(k);
            vals.truncate(k);
            row_ptr.push(cols.len());
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        CsrMatrix::from_rows(
            rows.iter()
                .map(|row| row.iter().copied().enumerate().filter(|&(_, p)| p != 0.0).collect())
                .collect(),
        )
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[range.clone()], &self.vals[range])
    }

    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (c, v) = self.row(i);
        c.iter().copied().zip(v.iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map_or(0.0, |k| v[k])
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).1.iter().sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| {
                let mut row = vec![0.0; self.n];
                for (j, p) in self.row_entries(i) {
                    row[j] = p;
                }
                row
            })
            .collect()
    }
}

impl TransitionOperator for CsrMatrix {
    fn num_states(&self) -> usize {
        self.n
    }

    fn push_forward(&self, dist: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &m) in dist.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let (c, v) = self.row(i);
            for (&j, &p) in c.iter().zip(v) {
                out[j] += m * p;
            }
        }
    }

    fn pull_back(&self, f: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            *o = c.iter().zip(v).map(|(&j, &p)| p * f[j]).sum();
        }
    }
}
