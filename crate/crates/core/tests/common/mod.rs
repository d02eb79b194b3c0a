//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use hybrid_rank::{symmetric_normalize, SparseGraph, SparseVector};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Raw weighted graph on `n` vertices: a random spanning tree (so the graph
/// is connected) plus each remaining pair with probability `density`.
pub fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> SparseGraph {
    let mut edges = Vec::new();
    for v in 1..n {
        let parent = rng.random_range(0..v);
        edges.push((parent, v, rng.random_range(0.05..1.0)));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < density {
                edges.push((i, j, rng.random_range(0.05..1.0)));
            }
        }
    }
    SparseGraph::from_edges(n, &edges).unwrap()
}

pub fn random_normalized_graph(rng: &mut ChaCha8Rng, n: usize) -> SparseGraph {
    let density = rng.random_range(0.05..0.4);
    symmetric_normalize(&random_connected_graph(rng, n, density)).unwrap()
}

/// Eigenvalues in descending order with matching eigenvector columns.
pub fn dense_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs_diff_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    max_abs_diff(a.as_slice(), b.as_slice())
}

/// Observation vector with `m` distinct random positive entries.
pub fn random_observation(rng: &mut ChaCha8Rng, n: usize, m: usize) -> SparseVector {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..m.min(n) {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    SparseVector::new(n, idx[..m.min(n)].iter().map(|&i| (i, rng.random_range(0.1..1.0)))).unwrap()
}
