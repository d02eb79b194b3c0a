//! Convergence analysis of the space-time trade-off.
//!
//! Removing the `r` largest eigenvalues of `𝒲` turns the condition number of
//! the regularized Laplacian into `(1 − αλ_n) / (1 − αλ_{r+1})`, and CG's
//! relative A-norm error after `i` steps is bounded by
//! `φ_i = 2((√κ − 1)/(√κ + 1))^i`. This module evaluates both and checks
//! the low-rank split for general polynomial filters.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::graph::SparseGraph;

const SPECTRUM_SLACK: f64 = 1e-9;

/// Largest graph accepted for dense spectrum computation.
pub const DENSE_SPECTRUM_LIMIT: usize = 2048;

/// Descending eigenvalues of a normalized graph: a leading run
/// `λ₁ ≥ … ≥ λ_k` and the smallest eigenvalue (or a lower bound for it).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumSummary {
    n: usize,
    leading: Vec<f64>,
    smallest: f64,
}

impl SpectrumSummary {
    /// A complete spectrum, sorted here into descending order.
    pub fn from_full(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(invalid_input("empty spectrum"));
        }
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let smallest = *eigenvalues.last().unwrap();
        Self::new(eigenvalues.len(), eigenvalues, smallest)
    }

    /// The leading `k ≤ n` eigenvalues (descending) and a value at or below
    /// `λ_n`; `−1` is always valid.
    pub fn new(n: usize, leading: Vec<f64>, smallest: f64) -> Result<Self> {
        if leading.len() > n {
            return Err(invalid_input("more leading eigenvalues than the graph size"));
        }
        if leading.windows(2).any(|w| w[0] < w[1]) {
            return Err(invalid_input("leading eigenvalues must be descending"));
        }
        let in_range = |v: f64| v.is_finite() && v.abs() <= 1.0 + SPECTRUM_SLACK;
        if !leading.iter().all(|&v| in_range(v)) || !in_range(smallest) {
            return Err(invalid_input("eigenvalues must lie in [-1, 1]"));
        }
        if leading.last().is_some_and(|&l| l < smallest) {
            return Err(invalid_input("smallest eigenvalue exceeds a leading eigenvalue"));
        }
        Ok(Self { n, leading, smallest })
    }

    /// Dense spectrum of a normalized graph.
    pub fn of_graph(g: &SparseGraph) -> Result<Self> {
        if g.n() > DENSE_SPECTRUM_LIMIT {
            return Err(invalid_param(format!(
                "dense spectrum refused for n={} > {DENSE_SPECTRUM_LIMIT}",
                g.n()
            )));
        }
        if g.n() == 0 {
            return Err(invalid_input("empty graph"));
        }
        Self::from_full(g.to_dense().symmetric_eigen().eigenvalues.iter().copied().collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn leading(&self) -> &[f64] {
        &self.leading
    }

    pub fn smallest(&self) -> f64 {
        self.smallest
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "j,lambda")?;
        for (j, l) in self.leading.iter().enumerate() {
            writeln!(out, "{},{l:?}", j + 1)?;
        }
        Ok(())
    }

    /// Reads a `j,lambda` table holding the full spectrum.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut values = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('j')) {
                continue;
            }
            let lambda = line
                .split(',')
                .nth(1)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Format(format!("bad spectrum row {}: '{line}'", lineno + 1)))?;
            values.push(lambda);
        }
        Self::from_full(values)
    }
}

/// `κ(ℒ_α(𝒲_r)) = (1 − αλ_n) / (1 − αλ_{r+1})`.
pub fn condition_number(alpha: f64, lambda_r1: f64, lambda_n: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(invalid_param(format!("alpha={alpha} must lie in [0, 1)")));
    }
    let ok = |v: f64| v.is_finite() && v.abs() <= 1.0 + SPECTRUM_SLACK;
    if !ok(lambda_r1) || !ok(lambda_n) {
        return Err(invalid_param("eigenvalues must lie in [-1, 1]"));
    }
    if lambda_n > lambda_r1 {
        return Err(invalid_param(format!("λ_n={lambda_n} exceeds λ_(r+1)={lambda_r1}")));
    }
    Ok((1.0 - alpha * lambda_n) / (1.0 - alpha * lambda_r1))
}

/// `κ(ℒ_α(𝒲_r)) / κ(ℒ_α(𝒲)) = (1 − α) / (1 − αλ_{r+1})`, using `λ₁ = 1`.
pub fn condition_number_ratio(alpha: f64, lambda_r1: f64) -> Result<f64> {
    let lambda_n = -1.0;
    Ok(condition_number(alpha, lambda_r1, lambda_n)? / condition_number(alpha, 1.0, lambda_n)?)
}

/// `φ_i = 2((√κ − 1)/(√κ + 1))^i`.
pub fn cg_error_bound(kappa: f64, i: usize) -> Result<f64> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(invalid_param(format!("condition number {kappa} must be finite and at least 1")));
    }
    let s = kappa.sqrt();
    Ok(2.0 * ((s - 1.0) / (s + 1.0)).powi(i as i32))
}

/// `φ_i(ℒ_α(𝒲_r))` on the grid `0 ≤ r ≤ r_max`, `0 ≤ i ≤ i_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContourGrid {
    pub alpha: f64,
    /// `values[r][i]`.
    pub values: Vec<Vec<f64>>,
}

impl ContourGrid {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "r,i,phi")?;
        for (r, row) in self.values.iter().enumerate() {
            for (i, phi) in row.iter().enumerate() {
                writeln!(out, "{r},{i},{phi:e}")?;
            }
        }
        Ok(())
    }
}

pub fn tradeoff_contour(spectrum: &SpectrumSummary, alpha: f64, r_max: usize, i_max: usize) -> Result<ContourGrid> {
    if r_max >= spectrum.n {
        return Err(invalid_param(format!("r_max={r_max} must be below n={}", spectrum.n)));
    }
    if spectrum.leading.len() < r_max + 1 {
        return Err(invalid_param(format!(
            "spectrum has {} leading eigenvalues, need {}",
            spectrum.leading.len(),
            r_max + 1
        )));
    }
    let values = (0..=r_max)
        .map(|r| {
            let kappa = condition_number(alpha, spectrum.leading[r], spectrum.smallest)?;
            (0..=i_max).map(|i| cg_error_bound(kappa, i)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContourGrid { alpha, values })
}

/// A finite power series `h(A) = Σ cᵢ Aⁱ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesFilter {
    pub coefficients: Vec<f64>,
}

impl SeriesFilter {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self { coefficients }
    }

    /// `(1 − α) Σ_{i ≤ degree} (αx)ⁱ`, the truncated expansion of `h_α`.
    pub fn geometric(alpha: f64, degree: usize) -> Self {
        Self::new((0..=degree).map(|i| (1.0 - alpha) * alpha.powi(i as i32)).collect())
    }

    pub fn constant_term(&self) -> f64 {
        self.coefficients.first().copied().unwrap_or(0.0)
    }

    /// Horner evaluation at a scalar.
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

/// Horner evaluation of the series at a square matrix.
pub fn apply_series_filter(a: &DMatrix<f64>, f: &SeriesFilter) -> DMatrix<f64> {
    let n = a.nrows();
    let identity = DMatrix::<f64>::identity(n, n);
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for &c in f.coefficients.iter().rev() {
        acc = &acc * a + &identity * c;
    }
    acc
}

/// Max-abs residual of `h(A) = U₁ g(Λ₁) U₁ᵀ + h(A − U₁Λ₁U₁ᵀ)` with
/// `g(λ) = h(λ) − c₀`, where `U₁, Λ₁` are the top-`r` eigenpairs of `A`.
pub fn verify_series_decomposition(a: &DMatrix<f64>, f: &SeriesFilter, r: usize) -> Result<f64> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(invalid_input("matrix must be square"));
    }
    if r > n {
        return Err(invalid_param(format!("rank {r} exceeds matrix size {n}")));
    }
    let lhs = apply_series_filter(a, f);
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let u1 = DMatrix::from_fn(n, r, |i, j| eig.eigenvectors[(i, order[j])]);
    let lambda1: Vec<f64> = order[..r].iter().map(|&j| eig.eigenvalues[j]).collect();

    let scaled = |w: &dyn Fn(f64) -> f64| {
        let mut m = u1.clone();
        for (mut col, &l) in m.column_iter_mut().zip(&lambda1) {
            col *= w(l);
        }
        &m * u1.transpose()
    };
    let low_rank = scaled(&|l| l);
    let c0 = f.constant_term();
    let spectral = scaled(&|l| f.eval(l) - c0);
    let rhs = spectral + apply_series_filter(&(a - low_rank), f);
    Ok((lhs - rhs).amax())
}
