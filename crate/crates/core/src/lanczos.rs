//! Thick-restart Lanczos for the algebraically largest eigenpairs of a
//! symmetric operator.
//!
//! Every new Krylov vector is orthogonalized twice against the whole basis
//! (classical Gram-Schmidt with one reorthogonalization pass), and the
//! projected matrix `Vᵀ A V` is assembled from those coefficients. On restart
//! the leading Ritz vectors are kept and the last residual direction is
//! appended, so the projected matrix becomes diagonal plus one arrow row.
//! A breakdown (invariant subspace) is continued with a fresh random
//! direction, which lets repeated eigenvalues be found.

use log::debug;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid_param, Error, Result};
use crate::operator::LinearOperator;

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    /// A Ritz pair is accepted when `‖A u − θ u‖ ≤ tol · max(1, |θ|)`.
    pub tol: f64,
    pub max_restarts: usize,
    /// Subspace size; defaults to `max(2r, r + 32)` capped at `n`.
    pub max_subspace: Option<usize>,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_restarts: 500, max_subspace: None, seed: 0x5eed_1a2c }
    }
}

/// Returns the `r` largest eigenvalues in descending order and the matching
/// orthonormal eigenvectors as columns. Each eigenvector is signed so that
/// its entry of largest magnitude is positive.
pub fn lanczos_top_eigenpairs<A: LinearOperator + ?Sized>(
    op: &A,
    r: usize,
    opts: &LanczosOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = op.dim();
    if r > n {
        return Err(invalid_param(format!("requested {r} eigenpairs of a {n}x{n} operator")));
    }
    if r == 0 {
        return Ok((Vec::new(), DMatrix::zeros(n, 0)));
    }
    let m = opts.max_subspace.unwrap_or_else(|| (2 * r).max(r + 32)).clamp(r, n);
    let keep = (r + (m - r) / 2).min(m.saturating_sub(1)).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis = DMatrix::<f64>::zeros(n, m);
    let mut proj = DMatrix::<f64>::zeros(m, m);
    let start = random_unit_orthogonal(&mut rng, &basis, 0);
    basis.set_column(0, &start);

    let mut filled = 0;
    let mut residual = DVector::<f64>::zeros(n);
    let mut beta = 0.0;
    let mut scale = 0.0f64;
    let mut worst = f64::INFINITY;
    let mut w = vec![0.0; n];

    for restart in 0..=opts.max_restarts {
        while filled < m {
            op.apply(basis.column(filled).as_slice(), &mut w);
            let mut wv = DVector::from_column_slice(&w);
            let coeffs = orthogonalize(&basis, filled + 1, &mut wv);
            for (i, &c) in coeffs.iter().enumerate() {
                proj[(i, filled)] = c;
                proj[(filled, i)] = c;
            }
            beta = wv.norm();
            scale = scale.max(coeffs.amax()).max(beta);
            filled += 1;
            if filled == m {
                residual = wv;
                break;
            }
            let next = if beta > 1e-12 * scale.max(1.0) {
                wv / beta
            } else {
                random_unit_orthogonal(&mut rng, &basis, filled)
            };
            basis.set_column(filled, &next);
        }

        let sym = (&proj + proj.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

        let estimates: Vec<f64> = order[..r].iter().map(|&i| beta * eig.eigenvectors[(m - 1, i)].abs()).collect();
        let estimated_ok = estimates
            .iter()
            .zip(&theta)
            .all(|(&res, &t)| res <= opts.tol * t.abs().max(1.0));
        worst = estimates.iter().cloned().fold(0.0, f64::max);
        debug!("lanczos restart {restart}: m={m} worst residual estimate {worst:e}");

        if estimated_ok || m == n {
            let ritz = ritz_matrix(&eig.eigenvectors, &order[..r]);
            let mut vectors = &basis * ritz;
            let explicit = explicit_residuals(op, &vectors, &theta[..r]);
            worst = explicit.iter().cloned().fold(0.0, f64::max);
            if explicit.iter().zip(&theta).all(|(&res, &t)| res <= opts.tol * t.abs().max(1.0)) {
                fix_signs(&mut vectors);
                return Ok((theta[..r].to_vec(), vectors));
            }
            if m == n {
                break;
            }
        }

        // thick restart: keep the leading Ritz vectors, continue from the residual
        let ritz = ritz_matrix(&eig.eigenvectors, &order[..keep]);
        let kept = &basis * ritz;
        basis.columns_mut(0, keep).copy_from(&kept);
        basis.columns_mut(keep, m - keep).fill(0.0);
        proj.fill(0.0);
        for (i, &t) in theta[..keep].iter().enumerate() {
            proj[(i, i)] = t;
        }
        let next = if beta > 1e-12 * scale.max(1.0) {
            let mut f = residual.clone() / beta;
            // the residual is orthogonal in exact arithmetic; clean it anyway
            orthogonalize(&basis, keep, &mut f);
            let nf = f.norm();
            if nf > 0.5 {
                f / nf
            } else {
                random_unit_orthogonal(&mut rng, &basis, keep)
            }
        } else {
            random_unit_orthogonal(&mut rng, &basis, keep)
        };
        basis.set_column(keep, &next);
        filled = keep;
    }

    Err(Error::NumericalFailure {
        message: format!("Lanczos did not converge to {r} eigenpairs"),
        residual: worst,
    })
}

/// Two passes of classical Gram-Schmidt of `w` against the first `k`
/// columns of `basis`. Returns the accumulated projection coefficients.
fn orthogonalize(basis: &DMatrix<f64>, k: usize, w: &mut DVector<f64>) -> DVector<f64> {
    let v = basis.columns(0, k);
    let mut total = DVector::zeros(k);
    for _ in 0..2 {
        let c = v.tr_mul(w);
        w.gemv(-1.0, &v, &c, 1.0);
        total += c;
    }
    total
}

fn random_unit_orthogonal(rng: &mut ChaCha8Rng, basis: &DMatrix<f64>, k: usize) -> DVector<f64> {
    let n = basis.nrows();
    loop {
        let mut v = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)));
        let before = v.norm();
        orthogonalize(basis, k, &mut v);
        let after = v.norm();
        if after > 1e-3 * before {
            return v / after;
        }
    }
}

fn ritz_matrix(eigenvectors: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(eigenvectors.nrows(), cols.len(), |i, j| eigenvectors[(i, cols[j])])
}

fn explicit_residuals<A: LinearOperator + ?Sized>(op: &A, vectors: &DMatrix<f64>, theta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; vectors.nrows()];
    vectors
        .column_iter()
        .zip(theta)
        .map(|(u, &t)| {
            let u = u.clone_owned();
            op.apply(u.as_slice(), &mut out);
            out.iter().zip(u.iter()).map(|(a, b)| (a - t * b).powi(2)).sum::<f64>().sqrt()
        })
        .collect()
}

fn fix_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        (&a + a.transpose()) * (0.5 / n as f64)
    }

    fn dense_descending(a: &DMatrix<f64>) -> Vec<f64> {
        let mut v: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        v.sort_by(|x, y| y.total_cmp(x));
        v
    }

    #[test]
    fn matches_dense_eigenvalues() {
        let a = random_symmetric(120, 7);
        let (vals, vecs) = lanczos_top_eigenpairs(&a, 10, &LanczosOptions::default()).unwrap();
        let dense = dense_descending(&a);
        for (x, y) in vals.iter().zip(&dense) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
        let gram = vecs.transpose() * &vecs;
        assert!((gram - DMatrix::identity(10, 10)).amax() < 1e-10);
    }

    #[test]
    fn finds_repeated_eigenvalues() {
        // diag(1,1,1,0.5,...) rotated is still handled through breakdown
        let n = 12;
        let mut d = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = if i < 3 { 1.0 } else { 0.5 - 0.01 * i as f64 };
        }
        let (vals, _) = lanczos_top_eigenpairs(&d, 4, &LanczosOptions::default()).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        assert!((vals[2] - 1.0).abs() < 1e-12);
        assert!((vals[3] - 0.47).abs() < 1e-12);
    }

    #[test]
    fn restarts_when_subspace_is_small() {
        let a = random_symmetric(300, 3);
        let opts = LanczosOptions { max_subspace: Some(20), ..Default::default() };
        let (vals, _) = lanczos_top_eigenpairs(&a, 5, &opts).unwrap();
        let dense = dense_descending(&a);
        for (x, y) in vals.iter().zip(&dense) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn sign_convention() {
        let a = random_symmetric(40, 11);
        let (_, vecs) = lanczos_top_eigenpairs(&a, 3, &LanczosOptions::default()).unwrap();
        for col in vecs.column_iter() {
            let imax = col.iamax();
            assert!(col[imax] > 0.0);
        }
    }

    #[test]
    fn reports_failure_when_restarts_exhausted() {
        let a = random_symmetric(400, 5);
        let opts = LanczosOptions { max_subspace: Some(8), max_restarts: 0, ..Default::default() };
        let err = lanczos_top_eigenpairs(&a, 6, &opts).unwrap_err();
        assert!(matches!(err, Error::NumericalFailure { .. }));
    }
}
