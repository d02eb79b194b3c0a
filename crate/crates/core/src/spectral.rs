//! Spectral filtering with a truncated eigenbasis of the normalized graph.
//!
//! The basis holds the `r` algebraically largest eigenpairs of the normalized
//! adjacency. Filters act on it as `U₁ f(Λ₁) U₁ᵀ y`, evaluated right to left
//! so the cost is proportional to the storage of `U₁`.

use nalgebra::DMatrix;

use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::graph::SparseGraph;
use crate::lanczos::{lanczos_top_eigenpairs, LanczosOptions};
use crate::vector::SparseVector;

/// Diffusion weight used by default.
pub const DEFAULT_ALPHA: f64 = 0.99;

/// Slack allowed above one (and below minus one) for computed eigenvalues.
const EIGENVALUE_SLACK: f64 = 1e-9;

/// The diffusion parameter `α ∈ [0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterParams {
    alpha: f64,
}

impl FilterParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(invalid_param(format!("alpha={alpha} must lie in [0, 1)")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for FilterParams {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA }
    }
}

/// Transfer function `(1 − α) / (1 − αx)`.
#[inline]
pub fn h_alpha(x: f64, p: FilterParams) -> f64 {
    (1.0 - p.alpha) / (1.0 - p.alpha * x)
}

/// `h_α(x) − h_α(0) = (1 − α) α x / (1 − αx)`.
#[inline]
pub fn g_alpha(x: f64, p: FilterParams) -> f64 {
    (1.0 - p.alpha) * p.alpha * x / (1.0 - p.alpha * x)
}

/// Compressed-column storage of a sparse `n × r` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub col_offsets: Vec<usize>,
    pub row_indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn ncols(&self) -> usize {
        self.col_offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn column(&self, j: usize) -> (&[u32], &[f64]) {
        let range = self.col_offsets[j]..self.col_offsets[j + 1];
        (&self.row_indices[range.clone()], &self.values[range])
    }

    fn validate(&self) -> Result<()> {
        if self.col_offsets.first() != Some(&0)
            || self.col_offsets.windows(2).any(|w| w[0] > w[1])
            || self.col_offsets.last() != Some(&self.values.len())
            || self.row_indices.len() != self.values.len()
        {
            return Err(invalid_input("malformed compressed-column offsets"));
        }
        for j in 0..self.ncols() {
            let (rows, _) = self.column(j);
            if rows.windows(2).any(|w| w[0] >= w[1]) || rows.iter().any(|&i| i as usize >= self.nrows) {
                return Err(invalid_input(format!("column {j} has unsorted or out-of-range rows")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Eigenvectors {
    Dense(DMatrix<f64>),
    Sparse(CscMatrix),
}

/// The top-`r` eigenvalues (descending) and eigenvectors `U₁` of a
/// normalized graph.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralBasis {
    n: usize,
    eigenvalues: Vec<f64>,
    vectors: Eigenvectors,
}

impl SpectralBasis {
    pub fn empty(n: usize) -> Self {
        Self { n, eigenvalues: Vec::new(), vectors: Eigenvectors::Dense(DMatrix::zeros(n, 0)) }
    }

    /// Wraps a dense eigenbasis; eigenvalues must be descending and lie in
    /// `[−1, 1]` up to a slack of 1e-9.
    pub fn from_dense(eigenvalues: Vec<f64>, vectors: DMatrix<f64>) -> Result<Self> {
        let n = vectors.nrows();
        Self::check_eigenvalues(&eigenvalues, vectors.ncols())?;
        Ok(Self { n, eigenvalues, vectors: Eigenvectors::Dense(vectors) })
    }

    pub fn from_sparse(eigenvalues: Vec<f64>, vectors: CscMatrix) -> Result<Self> {
        vectors.validate()?;
        Self::check_eigenvalues(&eigenvalues, vectors.ncols())?;
        Ok(Self { n: vectors.nrows, eigenvalues, vectors: Eigenvectors::Sparse(vectors) })
    }

    fn check_eigenvalues(values: &[f64], ncols: usize) -> Result<()> {
        if values.len() != ncols {
            return Err(invalid_input(format!("{} eigenvalues for {ncols} eigenvectors", values.len())));
        }
        if values.iter().any(|v| !v.is_finite() || v.abs() > 1.0 + EIGENVALUE_SLACK) {
            return Err(invalid_input("eigenvalue outside [-1, 1]"));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(invalid_input("eigenvalues must be sorted in descending order"));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn vectors(&self) -> &Eigenvectors {
        &self.vectors
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.vectors, Eigenvectors::Sparse(_))
    }

    /// Number of stored nonzero entries of `U₁`.
    pub fn nnz(&self) -> usize {
        match &self.vectors {
            Eigenvectors::Dense(u) => u.iter().filter(|v| **v != 0.0).count(),
            Eigenvectors::Sparse(u) => u.values.iter().filter(|v| **v != 0.0).count(),
        }
    }

    /// Fraction of zero entries of `U₁`.
    pub fn sparsity(&self) -> f64 {
        let total = self.n * self.rank();
        if total == 0 {
            return 0.0;
        }
        1.0 - self.nnz() as f64 / total as f64
    }

    /// Bytes needed to hold the eigenvalues and `U₁` in double precision,
    /// counting index arrays for sparse storage.
    pub fn memory_bytes(&self) -> usize {
        let values = self.rank() * 8;
        match &self.vectors {
            Eigenvectors::Dense(u) => values + u.len() * 8,
            Eigenvectors::Sparse(u) => values + u.col_offsets.len() * 8 + u.nnz() * (4 + 8),
        }
    }

    /// `U₁` as a dense matrix.
    pub fn dense_vectors(&self) -> DMatrix<f64> {
        match &self.vectors {
            Eigenvectors::Dense(u) => u.clone(),
            Eigenvectors::Sparse(u) => {
                let mut m = DMatrix::zeros(self.n, u.ncols());
                for j in 0..u.ncols() {
                    let (rows, vals) = u.column(j);
                    for (&i, &v) in rows.iter().zip(vals) {
                        m[(i as usize, j)] = v;
                    }
                }
                m
            }
        }
    }

    /// The leading `r` eigenpairs.
    pub fn truncated(&self, r: usize) -> Result<Self> {
        if r > self.rank() {
            return Err(invalid_param(format!("cannot truncate rank {} basis to {r}", self.rank())));
        }
        let eigenvalues = self.eigenvalues[..r].to_vec();
        let vectors = match &self.vectors {
            Eigenvectors::Dense(u) => Eigenvectors::Dense(u.columns(0, r).into_owned()),
            Eigenvectors::Sparse(u) => {
                let end = u.col_offsets[r];
                Eigenvectors::Sparse(CscMatrix {
                    nrows: u.nrows,
                    col_offsets: u.col_offsets[..=r].to_vec(),
                    row_indices: u.row_indices[..end].to_vec(),
                    values: u.values[..end].to_vec(),
                })
            }
        };
        Ok(Self { n: self.n, eigenvalues, vectors })
    }

    /// `U₁ᵀ z` for dense `z`.
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.n);
        match &self.vectors {
            Eigenvectors::Dense(u) => u.column_iter().map(|c| c.iter().zip(z).map(|(a, b)| a * b).sum()).collect(),
            Eigenvectors::Sparse(u) => (0..u.ncols())
                .map(|j| {
                    let (rows, vals) = u.column(j);
                    rows.iter().zip(vals).map(|(&i, &v)| v * z[i as usize]).sum()
                })
                .collect(),
        }
    }

    /// `U₁ᵀ y` touching only the nonzeros of `y` for dense `U₁`.
    pub fn project_sparse(&self, y: &SparseVector) -> Vec<f64> {
        assert_eq!(y.len(), self.n);
        match &self.vectors {
            Eigenvectors::Dense(u) => {
                let mut t = vec![0.0; self.rank()];
                for (i, yi) in y.iter() {
                    for (tj, &uij) in t.iter_mut().zip(u.row(i).iter()) {
                        *tj += uij * yi;
                    }
                }
                t
            }
            Eigenvectors::Sparse(_) => self.project(&y.to_dense()),
        }
    }

    /// `out += U₁ t`.
    pub fn expand_add(&self, t: &[f64], out: &mut [f64]) {
        assert_eq!(t.len(), self.rank());
        assert_eq!(out.len(), self.n);
        match &self.vectors {
            Eigenvectors::Dense(u) => {
                for (col, &tj) in u.column_iter().zip(t) {
                    if tj != 0.0 {
                        for (o, &v) in out.iter_mut().zip(col.iter()) {
                            *o += v * tj;
                        }
                    }
                }
            }
            Eigenvectors::Sparse(u) => {
                for (j, &tj) in t.iter().enumerate() {
                    let (rows, vals) = u.column(j);
                    for (&i, &v) in rows.iter().zip(vals) {
                        out[i as usize] += v * tj;
                    }
                }
            }
        }
    }

    /// `U₁ f(Λ₁) U₁ᵀ y`.
    pub fn apply_filter(&self, y: &SparseVector, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        if y.len() != self.n {
            return Err(invalid_input(format!("observation length {} != basis size {}", y.len(), self.n)));
        }
        let mut t = self.project_sparse(y);
        for (tj, &lambda) in t.iter_mut().zip(&self.eigenvalues) {
            *tj *= f(lambda);
        }
        let mut out = vec![0.0; self.n];
        self.expand_add(&t, &mut out);
        Ok(out)
    }
}

/// The `r` algebraically largest eigenpairs of a normalized graph, computed
/// by thick-restart Lanczos with default options.
pub fn top_eigenpairs(g: &SparseGraph, r: usize) -> Result<SpectralBasis> {
    top_eigenpairs_with(g, r, &LanczosOptions::default())
}

pub fn top_eigenpairs_with(g: &SparseGraph, r: usize, opts: &LanczosOptions) -> Result<SpectralBasis> {
    if !g.is_normalized() {
        return Err(Error::InvalidState("eigendecomposition expects a normalized graph".into()));
    }
    if r > g.n() {
        return Err(invalid_param(format!("rank {r} exceeds graph size {}", g.n())));
    }
    let (values, vectors) = lanczos_top_eigenpairs(g, r, opts)?;
    // rounding can push the top eigenvalue a hair past one
    let values = values.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    SpectralBasis::from_dense(values, vectors)
}

/// The spectral term `x^s = U₁ g_α(Λ₁) U₁ᵀ y` of the hybrid split.
pub fn spectral_term(basis: &SpectralBasis, y: &SparseVector, p: FilterParams) -> Result<Vec<f64>> {
    basis.apply_filter(y, |lambda| g_alpha(lambda, p))
}

/// Zeroes the entries of smallest magnitude across the whole of `U₁` until
/// at least `target` of them are zero, and stores the result sparse.
/// Equal magnitudes are zeroed in column-major order.
pub fn sparsify(basis: &SpectralBasis, target: f64) -> Result<SpectralBasis> {
    if !(0.0..1.0).contains(&target) {
        return Err(invalid_param(format!("target sparsity {target} must lie in [0, 1)")));
    }
    let u = match &basis.vectors {
        Eigenvectors::Dense(u) => u,
        Eigenvectors::Sparse(_) => return Err(Error::InvalidState("basis is already sparse".into())),
    };
    let total = u.len();
    // the epsilon absorbs representation error in target·total
    let needed = ((target * total as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut order: Vec<usize> = (0..total).collect();
    let values = u.as_slice();
    order.sort_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()).then(a.cmp(&b)));
    let mut keep = vec![true; total];
    for &idx in &order[..needed.min(total)] {
        keep[idx] = false;
    }

    let mut col_offsets = vec![0];
    let mut row_indices = Vec::new();
    let mut out = Vec::new();
    for j in 0..u.ncols() {
        for i in 0..u.nrows() {
            let idx = j * u.nrows() + i;
            if keep[idx] && values[idx] != 0.0 {
                row_indices.push(i as u32);
                out.push(values[idx]);
            }
        }
        col_offsets.push(out.len());
    }
    SpectralBasis::from_sparse(
        basis.eigenvalues.clone(),
        CscMatrix { nrows: u.nrows(), col_offsets, row_indices, values: out },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(alpha: f64) -> FilterParams {
        FilterParams::new(alpha).unwrap()
    }

    #[test]
    fn alpha_range() {
        assert!(FilterParams::new(1.0).is_err());
        assert!(FilterParams::new(-0.1).is_err());
        assert_eq!(FilterParams::default().alpha(), 0.99);
    }

    #[test]
    fn transfer_values() {
        for a in [0.0, 0.3, 0.99] {
            assert!((h_alpha(0.0, p(a)) - (1.0 - a)).abs() < 1e-15);
            assert!((h_alpha(1.0, p(a)) - 1.0).abs() < 1e-15);
            assert_eq!(g_alpha(0.0, p(a)), 0.0);
            assert!((g_alpha(1.0, p(a)) - a).abs() < 1e-15);
        }
        assert!((h_alpha(0.5, p(0.5)) - 2.0 / 3.0).abs() < 1e-15);
        let expected = 0.01 * 0.99 * 0.7 / (1.0 - 0.99 * 0.7);
        assert!((g_alpha(0.7, p(0.99)) - expected).abs() < 1e-15);
        assert!((g_alpha(0.7, p(0.99)) - 0.0225733).abs() < 1e-7);
    }

    proptest! {
        #[test]
        fn g_is_shifted_h(alpha in 0.0f64..0.999, x in -1.0f64..=1.0) {
            let q = p(alpha);
            prop_assert!((g_alpha(x, q) - (h_alpha(x, q) - h_alpha(0.0, q))).abs() <= 1e-15);
        }

        #[test]
        fn h_is_positive_and_increasing(alpha in 0.01f64..0.999, x in -1.0f64..0.99) {
            let q = p(alpha);
            prop_assert!(h_alpha(x, q) > 0.0);
            prop_assert!(h_alpha(x + 0.01, q) > h_alpha(x, q));
        }
    }

    #[test]
    fn empty_basis_gives_zero_term() {
        let basis = SpectralBasis::empty(4);
        let y = SparseVector::new(4, [(1, 0.5)]).unwrap();
        assert_eq!(spectral_term(&basis, &y, p(0.9)).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn eigenvector_observation_scales() {
        let s = 0.5f64.sqrt();
        let u = DMatrix::from_column_slice(2, 1, &[s, s]);
        let basis = SpectralBasis::from_dense(vec![1.0], u).unwrap();
        let y = SparseVector::from_dense(&[s, s]);
        let x = spectral_term(&basis, &y, p(0.5)).unwrap();
        let g = g_alpha(1.0, p(0.5));
        assert!((x[0] - g * s).abs() < 1e-15 && (x[1] - g * s).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let basis = SpectralBasis::empty(3);
        let y = SparseVector::zeros(4);
        assert!(matches!(spectral_term(&basis, &y, p(0.5)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn sparsify_two_by_two() {
        let u = DMatrix::from_row_slice(2, 2, &[0.8, 0.6, -0.6, 0.8]);
        let basis = SpectralBasis::from_dense(vec![1.0, 0.5], u).unwrap();
        let s = sparsify(&basis, 0.5).unwrap();
        assert!(s.is_sparse());
        assert_eq!(s.eigenvalues(), basis.eigenvalues());
        assert_eq!(s.dense_vectors(), DMatrix::from_row_slice(2, 2, &[0.8, 0.0, 0.0, 0.8]));
        assert_eq!(s.sparsity(), 0.5);
    }

    #[test]
    fn sparsify_zero_target_keeps_values() {
        let u = DMatrix::from_row_slice(2, 2, &[0.8, 0.0, -0.6, 1.0]);
        let basis = SpectralBasis::from_dense(vec![1.0, 0.5], u.clone()).unwrap();
        let s = sparsify(&basis, 0.0).unwrap();
        assert_eq!(s.dense_vectors(), u);
        assert_eq!(s.sparsity(), 0.25);
        assert!(sparsify(&basis, 1.0).is_err());
        assert!(sparsify(&s, 0.5).is_err());
    }

    #[test]
    fn truncation_keeps_leading_pairs() {
        let u = DMatrix::from_row_slice(2, 2, &[0.8, 0.6, -0.6, 0.8]);
        let basis = SpectralBasis::from_dense(vec![1.0, 0.5], u).unwrap();
        let t = basis.truncated(1).unwrap();
        assert_eq!(t.eigenvalues(), &[1.0]);
        assert_eq!(t.dense_vectors(), DMatrix::from_column_slice(2, 1, &[0.8, -0.6]));
        let st = sparsify(&basis, 0.5).unwrap().truncated(1).unwrap();
        assert_eq!(st.dense_vectors(), DMatrix::from_column_slice(2, 1, &[0.8, 0.0]));
    }
}
