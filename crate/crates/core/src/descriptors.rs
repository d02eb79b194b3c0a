//! Dense unit-norm descriptor storage and query similarities.

use crate::error::{invalid_input, invalid_param, Result};

/// Allowed deviation of a row's Euclidean norm from one.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// `n` unit-norm descriptors of dimension `d`, stored row-major in single
/// precision (the on-disk representation).
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorSet {
    dim: usize,
    data: Vec<f32>,
}

impl DescriptorSet {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid_param("descriptor dimension must be positive"));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(invalid_input(format!(
                "descriptor buffer of length {} is not a positive multiple of d={dim}",
                data.len()
            )));
        }
        for (i, row) in data.chunks_exact(dim).enumerate() {
            let norm = row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
            if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(invalid_input(format!("row {i} has norm {norm}, expected 1")));
            }
        }
        Ok(Self { dim, data })
    }

    /// Builds a set from double precision rows, normalizing each one.
    /// Zero rows are rejected.
    pub fn from_rows_normalized(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(invalid_input(format!("row {i} has length {}, expected {dim}", row.len())));
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(invalid_input(format!("row {i} cannot be normalized")));
            }
            data.extend(row.iter().map(|v| (v / norm) as f32));
        }
        Self::new(dim, data)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    /// Inner products of `query` with every stored descriptor.
    pub fn similarities(&self, query: &[f32]) -> Result<Vec<f64>> {
        if query.len() != self.dim {
            return Err(invalid_input(format!(
                "query has dimension {}, dataset has {}",
                query.len(),
                self.dim
            )));
        }
        Ok(self.rows().map(|row| dot(row, query)).collect())
    }
}

/// Inner product accumulated in double precision.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

/// The clamped power similarity `max(s, 0)^exponent`.
#[inline]
pub fn similarity_weight(similarity: f64, exponent: u32) -> f64 {
    similarity.max(0.0).powi(exponent as i32)
}

/// Indices of the `k` largest entries of `scores`, best first. Ties are broken
/// by the smaller index. `skip` is excluded from consideration.
pub(crate) fn top_k_indices(scores: &[f64], k: usize, skip: Option<usize>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&j| Some(j) != skip).collect();
    let cmp = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    let k = k.min(idx.len());
    if k == 0 {
        return Vec::new();
    }
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    idx
}
