//! Reciprocal kNN similarity graphs in compressed-row form.
//!
//! A [`SparseGraph`] holds either the raw adjacency `W` or its symmetric
//! normalization `D^{-1/2} W D^{-1/2}`. Both are symmetric, nonnegative and
//! zero-diagonal; rows store sorted column indices so matrix-vector products
//! visit entries in a fixed order.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::descriptors::{dot, similarity_weight, top_k_indices, DescriptorSet};
use crate::error::{invalid_input, invalid_param, Error, Result};

/// Reciprocal neighbors per vertex used when building a graph.
pub const DEFAULT_K: usize = 50;
/// Exponent of the clamped similarity `max(v·z, 0)^3`.
pub const DEFAULT_EXPONENT: u32 = 3;

const PARALLEL_MATVEC_MIN_ROWS: usize = 2048;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseGraph {
    n: usize,
    offsets: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    normalized: bool,
}

impl SparseGraph {
    /// Assembles a graph from CSR arrays, checking every graph invariant.
    pub fn from_csr(
        n: usize,
        offsets: Vec<usize>,
        indices: Vec<u32>,
        values: Vec<f64>,
        normalized: bool,
    ) -> Result<Self> {
        if offsets.len() != n + 1 || offsets[0] != 0 {
            return Err(invalid_input("row offsets must have length n+1 and start at 0"));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) || offsets[n] != indices.len() {
            return Err(invalid_input("row offsets are not monotone or disagree with nnz"));
        }
        if indices.len() != values.len() {
            return Err(invalid_input("index and value arrays differ in length"));
        }
        let g = Self { n, offsets, indices, values, normalized };
        for i in 0..n {
            let (cols, vals) = g.row(i);
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid_input(format!("row {i} columns are not strictly increasing")));
            }
            for (&j, &v) in cols.iter().zip(vals) {
                let j = j as usize;
                if j >= n {
                    return Err(invalid_input(format!("column {j} out of range in row {i}")));
                }
                if j == i {
                    return Err(invalid_input(format!("diagonal entry stored at {i}")));
                }
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(invalid_input(format!("weight {v} at ({i},{j}) is not finite and nonnegative")));
                }
                if g.get(j, i).map(f64::to_bits) != Some(v.to_bits()) {
                    return Err(invalid_input(format!("entry ({i},{j}) has no symmetric twin")));
                }
            }
        }
        Ok(g)
    }

    /// Builds an unnormalized graph from undirected weighted edges. Each
    /// `(i, j, w)` with `i != j` and `w > 0` is stored in both triangles;
    /// repeated pairs keep the last weight.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(invalid_input(format!("edge ({i},{j}) out of range for n={n}")));
            }
            if i == j {
                return Err(invalid_input(format!("self loop at {i}")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(invalid_input(format!("edge weight {w} must be finite and nonnegative")));
            }
            if w == 0.0 {
                continue;
            }
            rows[i].push((j as u32, w));
            rows[j].push((i as u32, w));
        }
        Ok(Self::from_rows(rows, false))
    }

    fn from_rows(mut rows: Vec<Vec<(u32, f64)>>, normalized: bool) -> Self {
        let n = rows.len();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
            // keep the last occurrence of a duplicated column
            let mut dedup: Vec<(u32, f64)> = Vec::with_capacity(row.len());
            for &(j, w) in row.iter() {
                match dedup.last_mut() {
                    Some(last) if last.0 == j => last.1 = w,
                    _ => dedup.push((j, w)),
                }
            }
            indices.extend(dedup.iter().map(|e| e.0));
            values.extend(dedup.iter().map(|e| e.1));
            offsets.push(indices.len());
        }
        Self { n, offsets, indices, values, normalized }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let range = self.offsets[i]..self.offsets[i + 1];
        (&self.indices[range.clone()], &self.values[range])
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&(j as u32)).ok().map(|p| vals[p])
    }

    /// Row sums.
    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// `out = self * x`.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        let row_dot = |i: usize| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(|(&j, &v)| v * x[j as usize]).sum::<f64>()
        };
        if self.n >= PARALLEL_MATVEC_MIN_ROWS {
            out.par_iter_mut().enumerate().for_each(|(i, o)| *o = row_dot(i));
        } else {
            out.iter_mut().enumerate().for_each(|(i, o)| *o = row_dot(i));
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j as usize)] = v;
            }
        }
        m
    }

    /// The principal submatrix on `keep` (sorted, distinct), with the
    /// normalization flag preserved.
    fn principal_submatrix(&self, keep: &[usize]) -> Self {
        let mut local = vec![u32::MAX; self.n];
        for (l, &g) in keep.iter().enumerate() {
            local[g] = l as u32;
        }
        let mut offsets = Vec::with_capacity(keep.len() + 1);
        offsets.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for &g in keep {
            let (cols, vals) = self.row(g);
            for (&j, &v) in cols.iter().zip(vals) {
                let l = local[j as usize];
                if l != u32::MAX {
                    indices.push(l);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        Self { n: keep.len(), offsets, indices, values, normalized: self.normalized }
    }
}

/// Builds the reciprocal kNN graph with weights `max(v_i·v_j, 0)^exponent`.
///
/// Edge `(i, j)` exists iff each endpoint is among the other's `k` most
/// similar descriptors (ties at rank `k` go to the smaller index). Pairs with
/// zero weight are not stored.
pub fn build_knn_graph(data: &DescriptorSet, k: usize, exponent: u32) -> Result<SparseGraph> {
    let n = data.len();
    if k == 0 || k >= n {
        return Err(invalid_param(format!("k={k} must satisfy 0 < k < n={n}")));
    }
    if exponent == 0 {
        return Err(invalid_param("similarity exponent must be at least 1"));
    }

    let neighbors: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = data.row(i);
            let sims: Vec<f64> = data.rows().map(|other| dot(row, other)).collect();
            let mut top = top_k_indices(&sims, k, Some(i));
            top.sort_unstable();
            top
        })
        .collect();

    let mut edges = Vec::new();
    for (i, list) in neighbors.iter().enumerate() {
        for &j in list.iter().filter(|&&j| j > i) {
            if neighbors[j].binary_search(&i).is_ok() {
                let w = similarity_weight(dot(data.row(i), data.row(j)), exponent);
                if w > 0.0 {
                    edges.push((i, j, w));
                }
            }
        }
    }
    SparseGraph::from_edges(n, &edges)
}

/// Returns `D^{-1/2} W D^{-1/2}`. Vertices with zero degree keep empty rows.
pub fn symmetric_normalize(g: &SparseGraph) -> Result<SparseGraph> {
    if g.normalized {
        return Err(Error::InvalidState("graph is already normalized".into()));
    }
    let degrees = g.degrees();
    let mut values = Vec::with_capacity(g.nnz());
    for i in 0..g.n {
        let (cols, vals) = g.row(i);
        // stored edges have positive weight, so both degrees are positive
        values.extend(cols.iter().zip(vals).map(|(&j, &v)| v / (degrees[i] * degrees[j as usize]).sqrt()));
    }
    Ok(SparseGraph {
        n: g.n,
        offsets: g.offsets.clone(),
        indices: g.indices.clone(),
        values,
        normalized: true,
    })
}

/// Connected-component labelling with a distinguished largest component.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentMap {
    /// Component label of each vertex. Labels are assigned in order of each
    /// component's smallest vertex index.
    pub component_ids: Vec<usize>,
    pub sizes: Vec<usize>,
    pub largest: usize,
    local_to_global: Vec<usize>,
    global_to_local: Vec<Option<usize>>,
}

impl ComponentMap {
    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn largest_size(&self) -> usize {
        self.local_to_global.len()
    }

    /// Global indices of the largest component, ascending.
    pub fn members(&self) -> &[usize] {
        &self.local_to_global
    }

    pub fn to_global(&self, local: usize) -> usize {
        self.local_to_global[local]
    }

    pub fn to_local(&self, global: usize) -> Option<usize> {
        self.global_to_local[global]
    }

    pub fn is_whole_graph(&self) -> bool {
        self.sizes.len() == 1
    }

    /// Principal submatrix of `g` on the largest component.
    pub fn restrict(&self, g: &SparseGraph) -> SparseGraph {
        g.principal_submatrix(&self.local_to_global)
    }

    /// Gathers the largest-component entries of a global vector.
    pub fn gather(&self, global: &[f64]) -> Vec<f64> {
        self.local_to_global.iter().map(|&g| global[g]).collect()
    }
}

/// Labels connected components by breadth-first search. The largest has the
/// most vertices; ties go to the component holding the smallest index.
pub fn largest_component(g: &SparseGraph) -> ComponentMap {
    let n = g.n;
    let mut ids = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if ids[start] != usize::MAX {
            continue;
        }
        let label = sizes.len();
        ids[start] = label;
        queue.push_back(start);
        let mut size = 0;
        while let Some(v) = queue.pop_front() {
            size += 1;
            for &u in g.row(v).0 {
                let u = u as usize;
                if ids[u] == usize::MAX {
                    ids[u] = label;
                    queue.push_back(u);
                }
            }
        }
        sizes.push(size);
    }
    // first maximum wins, i.e. the smallest minimum vertex index
    let largest = sizes
        .iter()
        .enumerate()
        .fold(0, |best, (l, &s)| if s > sizes[best] { l } else { best });
    let local_to_global: Vec<usize> = (0..n).filter(|&v| ids[v] == largest).collect();
    let mut global_to_local = vec![None; n];
    for (l, &v) in local_to_global.iter().enumerate() {
        global_to_local[v] = Some(l);
    }
    ComponentMap { component_ids: ids, sizes, largest, local_to_global, global_to_local }
}

/// Restricts the raw adjacency to `keep` and normalizes the submatrix.
///
/// Returns the normalized subgraph and the ascending global index of each
/// local vertex.
pub fn truncate_and_renormalize(raw: &SparseGraph, keep: &[usize]) -> Result<(SparseGraph, Vec<usize>)> {
    if raw.normalized {
        return Err(Error::InvalidState("truncation requires the raw adjacency".into()));
    }
    if keep.is_empty() {
        return Err(invalid_param("keep set must be nonempty"));
    }
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some(&bad) = sorted.iter().find(|&&v| v >= raw.n) {
        return Err(invalid_param(format!("vertex {bad} out of range")));
    }
    let sub = raw.principal_submatrix(&sorted);
    Ok((symmetric_normalize(&sub)?, sorted))
}
