//! Dense reference filters for validating the iterative and low-rank paths.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::graph::SparseGraph;
use crate::spectral::FilterParams;

/// Largest graph the dense oracle will factorize.
pub const DENSE_ORACLE_LIMIT: usize = 2048;

/// `h_α(A) = (1 − α)(I − αA)⁻¹` by direct inversion.
pub fn dense_transfer(a: &DMatrix<f64>, p: FilterParams) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let system = DMatrix::<f64>::identity(n, n) - a * p.alpha();
    let inv = system.try_inverse().ok_or_else(|| Error::NumericalFailure {
        message: "I - alpha A is singular".into(),
        residual: f64::INFINITY,
    })?;
    Ok(inv * (1.0 - p.alpha()))
}

/// `x = (1 − α)(I − α𝒲)⁻¹ y` via an LU factorization of the densified graph.
pub fn dense_exact_filter(g: &SparseGraph, p: FilterParams, y: &[f64]) -> Result<Vec<f64>> {
    let n = g.n();
    if n > DENSE_ORACLE_LIMIT {
        return Err(invalid_param(format!("dense oracle refused for n={n} > {DENSE_ORACLE_LIMIT}")));
    }
    if y.len() != n {
        return Err(invalid_input(format!("vector length {} != graph size {n}", y.len())));
    }
    let system = DMatrix::<f64>::identity(n, n) - g.to_dense() * p.alpha();
    let x = system.lu().solve(&DVector::from_column_slice(y)).ok_or_else(|| Error::NumericalFailure {
        message: "I - alpha W is singular".into(),
        residual: f64::INFINITY,
    })?;
    Ok(x.iter().map(|v| v * (1.0 - p.alpha())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::symmetric_normalize;

    #[test]
    fn zero_alpha_is_identity() {
        let g = symmetric_normalize(&SparseGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 2.0)]).unwrap()).unwrap();
        let y = [0.2, -0.4, 1.0];
        let x = dense_exact_filter(&g, FilterParams::new(0.0).unwrap(), &y).unwrap();
        assert_eq!(x, y.to_vec());
    }

    #[test]
    fn two_node_pair() {
        let g = symmetric_normalize(&SparseGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap()).unwrap();
        let x = dense_exact_filter(&g, FilterParams::new(0.5).unwrap(), &[1.0, 0.0]).unwrap();
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn size_guard() {
        let g = SparseGraph::from_edges(DENSE_ORACLE_LIMIT + 1, &[]).unwrap();
        let y = vec![0.0; DENSE_ORACLE_LIMIT + 1];
        assert!(matches!(dense_exact_filter(&g, FilterParams::default(), &y), Err(Error::InvalidParameter(_))));
    }
}
