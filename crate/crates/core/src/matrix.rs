//! Dense symmetric similarity matrices.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// A symmetric `n x n` matrix of pairwise similarities in `[0, 1]` with a unit diagonal.
///
/// The invariants are checked exactly at construction; tolerant loading of
/// slightly-off files lives in [`crate::io`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Build a matrix from row-major values, checking every invariant exactly.
    pub fn new(ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if values.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} values for {n} ids, got {}",
                n * n,
                values.len()
            )));
        }
        let index = index_ids(&ids)?;
        for i in 0..n {
            for j in 0..n {
                let v = values[i * n + j];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invariant(format!(
                        "similarity ({}, {}) = {v} is outside [0, 1]",
                        ids[i], ids[j]
                    )));
                }
                if i == j && v != 1.0 {
                    return Err(Error::invariant(format!(
                        "diagonal entry for {} is {v}, expected 1",
                        ids[i]
                    )));
                }
                if j > i && v != values[j * n + i] {
                    return Err(Error::invariant(format!(
                        "matrix is not symmetric at ({}, {}): {v} vs {}",
                        ids[i],
                        ids[j],
                        values[j * n + i]
                    )));
                }
            }
        }
        Ok(Self { ids, index, values })
    }

    /// Build a matrix by evaluating `f(i, j)` once for every `i < j`.
    ///
    /// The diagonal is set to 1 and the lower triangle mirrors the upper one,
    /// so symmetry holds by construction. Values are still range-checked.
    pub fn from_upper<F>(ids: Vec<String>, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let n = ids.len();
        let mut values = vec![1.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self::new(ids, values)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Similarity between the objects at positions `i` and `j`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ids.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.ids.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Position of `id`, or an invalid-input error naming it.
    pub fn require_index(&self, id: &str) -> Result<usize> {
        self.index_of(id)
            .ok_or_else(|| Error::invalid(format!("unknown object id `{id}`")))
    }

    /// Similarity between two objects addressed by id.
    pub fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.get(self.require_index(a)?, self.require_index(b)?))
    }

    /// Entries strictly above the diagonal, row by row.
    pub fn upper_triangle(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.ids.len();
        (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| self.get(i, j)))
    }

    /// Row-major copy of all values.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.row(i).to_vec()).collect()
    }
}

fn index_ids(ids: &[String]) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if index.insert(id.clone(), i).is_some() {
            return Err(Error::invalid(format!("duplicate object id `{id}`")));
        }
    }
    Ok(index)
}
