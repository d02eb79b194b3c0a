use crate::error::{invalid_input, Result};

/// A length-`n` vector storing only its nonzero entries, indices ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVector {
    len: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVector {
    /// Entries may come in any order; explicit zeros are dropped and
    /// duplicate indices are rejected.
    pub fn new(len: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, f64)> = entries.into_iter().filter(|e| e.1 != 0.0).collect();
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(invalid_input("duplicate index in sparse vector"));
        }
        if let Some(&(i, _)) = entries.iter().find(|e| e.0 >= len) {
            return Err(invalid_input(format!("index {i} out of range for length {len}")));
        }
        if entries.iter().any(|e| !e.1.is_finite()) {
            return Err(invalid_input("sparse vector entry is not finite"));
        }
        let (indices, values) = entries.into_iter().unzip();
        Ok(Self { len, indices, values })
    }

    pub fn zeros(len: usize) -> Self {
        Self { len, indices: Vec::new(), values: Vec::new() }
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .unzip();
        Self { len: dense.len(), indices, values }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            len: self.len,
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}
