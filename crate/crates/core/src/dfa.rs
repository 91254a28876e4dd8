//! Random deterministic finite automata viewed as colored r-out-regular digraphs.
//!
//! A [`Dfa`] on `n` vertices with alphabet size `r` stores, for every vertex
//! `x` and color `c`, the target `f_x(c)`. The maps `f_x` are one-to-one, so
//! each vertex has exactly `r` distinct out-neighbors. Vertices and colors
//! are 0-based everywhere, including the JSON form:
//!
//! ```json
//! {"n": 3, "r": 2, "out": [[1, 2], [0, 2], [2, 0]]}
//! ```

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_u64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    n: usize,
    r: usize,
    /// Row-major `n * r` transition table.
    out: Vec<usize>,
}

/// A finite word over the color alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn new(letters: Vec<usize>) -> Self {
        Word(letters)
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.0.clone();
        letters.extend_from_slice(&other.0);
        Word(letters)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DfaDiagnostics {
    /// Unordered pairs of distinct vertices with at least one common in-neighbor.
    pub common_in_neighbor_pairs: usize,
    /// Largest number of common in-neighbors shared by a pair of distinct vertices.
    pub max_common_in_neighbors: usize,
    /// `in_degree_histogram[k]` is the number of vertices with in-degree `k`.
    pub in_degree_histogram: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct DfaFile {
    n: usize,
    r: usize,
    out: Vec<Vec<usize>>,
}

impl Dfa {
    /// Builds a DFA from a row-major table, enforcing the one-to-one constraint.
    pub fn from_table(n: usize, r: usize, out: Vec<usize>) -> Result<Self> {
        check_sizes(n, r)?;
        if out.len() != n * r {
            return Err(Error::Structure {
                field: "out",
                message: format!("expected {} entries, got {}", n * r, out.len()),
            });
        }
        let dfa = Dfa { n, r, out };
        dfa.validate()?;
        Ok(dfa)
    }

    /// Builds a DFA from per-vertex rows.
    pub fn from_rows(rows: &[Vec<usize>]) -> Result<Self> {
        let n = rows.len();
        let r = rows.first().map_or(0, Vec::len);
        if let Some((x, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != r) {
            return Err(Error::Structure {
                field: "out",
                message: format!("row {x} has {} entries, expected {r}", row.len()),
            });
        }
        Dfa::from_table(n, r, rows.concat())
    }

    /// Samples a DFA uniformly among all DFAs with one-to-one out-maps.
    pub fn generate<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Result<Self> {
        check_sizes(n, r)?;
        let mut scratch: Vec<usize> = (0..n).collect();
        let mut out = Vec::with_capacity(n * r);
        for _ in 0..n {
            // Partial Fisher-Yates: the first r slots become a uniform ordered
            // r-subset whatever permutation the scratch array currently holds.
            for i in 0..r {
                let j = rng.random_range(i..n);
                scratch.swap(i, j);
                out.push(scratch[i]);
            }
        }
        Ok(Dfa { n, r, out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// `f_x(c)`.
    #[inline]
    pub fn target(&self, x: usize, c: usize) -> usize {
        self.out[x * self.r + c]
    }

    /// The out-neighbors of `x`, indexed by color.
    #[inline]
    pub fn row(&self, x: usize) -> &[usize] {
        &self.out[x * self.r..(x + 1) * self.r]
    }

    pub fn table(&self) -> &[usize] {
        &self.out
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        self.out.chunks_exact(self.r)
    }

    pub fn apply_word(&self, v: usize, w: &Word) -> usize {
        assert!(v < self.n, "vertex {v} out of range (n = {})", self.n);
        w.letters().iter().fold(v, |x, &c| self.target(x, c))
    }

    pub fn diagnostics(&self) -> DfaDiagnostics {
        let mut in_degree = vec![0usize; self.n];
        for &y in &self.out {
            in_degree[y] += 1;
        }
        let max_deg = in_degree.iter().copied().max().unwrap_or(0);
        let mut in_degree_histogram = vec![0usize; max_deg + 1];
        for &d in &in_degree {
            in_degree_histogram[d] += 1;
        }

        // Each vertex z is a common in-neighbor of every pair of its targets.
        let mut shared: HashMap<(usize, usize), usize> = HashMap::new();
        for row in self.rows() {
            for (i, &a) in row.iter().enumerate() {
                for &b in &row[i + 1..] {
                    let key = if a < b { (a, b) } else { (b, a) };
                    *shared.entry(key).or_insert(0) += 1;
                }
            }
        }
        DfaDiagnostics {
            common_in_neighbor_pairs: shared.len(),
            max_common_in_neighbors: shared.values().copied().max().unwrap_or(0),
            in_degree_histogram,
        }
    }

    pub fn to_json(&self) -> String {
        let file = DfaFile {
            n: self.n,
            r: self.r,
            out: self.rows().map(<[usize]>::to_vec).collect(),
        };
        serde_json::to_string(&file).expect("DFA serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DfaFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        check_sizes(file.n, file.r)?;
        if file.out.len() != file.n {
            return Err(Error::Structure {
                field: "out",
                message: format!("header declares n = {} but {} rows given", file.n, file.out.len()),
            });
        }
        let dfa = Dfa::from_rows(&file.out)?;
        if dfa.r != file.r {
            return Err(Error::Structure {
                field: "out",
                message: format!("header declares r = {} but rows have {} entries", file.r, dfa.r),
            });
        }
        Ok(dfa)
    }

    fn validate(&self) -> Result<()> {
        for (x, row) in self.rows().enumerate() {
            for (i, &y) in row.iter().enumerate() {
                if y >= self.n {
                    return Err(Error::TargetOutOfRange { vertex: x, target: y, n: self.n });
                }
                if row[..i].contains(&y) {
                    return Err(Error::OneToOneViolated { vertex: x, target: y });
                }
            }
        }
        Ok(())
    }
}

fn check_sizes(n: usize, r: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameters(format!("n must be at least 2, got {n}")));
    }
    if r < 2 || r > n {
        return Err(Error::InvalidParameters(format!(
            "alphabet size must satisfy 2 <= r <= n, got r = {r}, n = {n}"
        )));
    }
    Ok(())
}

/// Samples a DFA from a 64-bit seed.
pub fn generate_dfa(n: usize, r: usize, seed: u64) -> Result<Dfa> {
    Dfa::generate(n, r, &mut rng_from_u64(seed))
}
