//! Temporal filtering: conjugate gradient on the regularized Laplacian of
//! the (optionally deflated) normalized graph.

use std::io::Write;

use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::graph::SparseGraph;
use crate::operator::{dot, norm, LinearOperator};
use crate::spectral::{FilterParams, SpectralBasis};
use crate::vector::SparseVector;

pub const DEFAULT_REL_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 20;

/// `ℒ_α(𝒲 − U₁Λ₁U₁ᵀ) = (I − α(𝒲 − U₁Λ₁U₁ᵀ)) / (1 − α)` as a matvec.
/// With an empty basis this is the plain regularized Laplacian.
#[derive(Clone, Copy, Debug)]
pub struct DeflatedOperator<'a> {
    graph: &'a SparseGraph,
    basis: &'a SpectralBasis,
    params: FilterParams,
}

impl<'a> DeflatedOperator<'a> {
    pub fn new(graph: &'a SparseGraph, basis: &'a SpectralBasis, params: FilterParams) -> Result<Self> {
        if graph.n() != basis.n() {
            return Err(invalid_input(format!("graph has {} vertices, basis {}", graph.n(), basis.n())));
        }
        Ok(Self { graph, basis, params })
    }
}

impl LinearOperator for DeflatedOperator<'_> {
    fn dim(&self) -> usize {
        self.graph.n()
    }

    fn apply(&self, z: &[f64], out: &mut [f64]) {
        // out <- Wz - U Λ Uᵀ z
        self.graph.matvec_into(z, out);
        if self.basis.rank() > 0 {
            let mut t = self.basis.project(z);
            for (tj, &lambda) in t.iter_mut().zip(self.basis.eigenvalues()) {
                *tj *= -lambda;
            }
            self.basis.expand_add(&t, out);
        }
        let alpha = self.params.alpha();
        let scale = 1.0 / (1.0 - alpha);
        for (o, &zi) in out.iter_mut().zip(z) {
            *o = (zi - alpha * *o) * scale;
        }
    }
}

/// Applies the deflated operator to `z`, checking its length.
pub fn deflated_matvec(op: &DeflatedOperator<'_>, z: &[f64]) -> Result<Vec<f64>> {
    if z.len() != op.dim() {
        return Err(invalid_input(format!("vector length {} != operator size {}", z.len(), op.dim())));
    }
    Ok(op.apply_vec(z))
}

/// Convergence history of one conjugate gradient solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CgReport {
    pub iterations_run: usize,
    /// Euclidean residual norms, starting with the initial residual.
    pub residual_norms: Vec<f64>,
    pub converged: bool,
}

impl CgReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_norms.last().copied().unwrap_or(0.0)
    }

    /// Writes `iteration,residual` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,residual")?;
        for (i, r) in self.residual_norms.iter().enumerate() {
            writeln!(out, "{i},{r:e}")?;
        }
        Ok(())
    }
}

/// Conjugate gradient from `x₀ = 0`. Stops after `max_iters` iterations or
/// once `‖r‖ / ‖y‖ ≤ rel_tol`.
pub fn conjugate_gradient<A: LinearOperator + ?Sized>(
    op: &A,
    y: &[f64],
    max_iters: usize,
    rel_tol: f64,
) -> Result<(Vec<f64>, CgReport)> {
    conjugate_gradient_observed(op, y, max_iters, rel_tol, |_, _| {})
}

/// As [`conjugate_gradient`], calling `observe(i, x_i)` for every iterate
/// including `x₀`.
pub fn conjugate_gradient_observed<A, F>(
    op: &A,
    y: &[f64],
    max_iters: usize,
    rel_tol: f64,
    mut observe: F,
) -> Result<(Vec<f64>, CgReport)>
where
    A: LinearOperator + ?Sized,
    F: FnMut(usize, &[f64]),
{
    let n = op.dim();
    if y.len() != n {
        return Err(invalid_input(format!("right-hand side length {} != operator size {n}", y.len())));
    }
    if !(rel_tol > 0.0) {
        return Err(invalid_param(format!("relative tolerance {rel_tol} must be positive")));
    }
    let y_norm = norm(y);
    if !y_norm.is_finite() {
        return Err(Error::NumericalFailure { message: "non-finite right-hand side".into(), residual: y_norm });
    }

    let mut x = vec![0.0; n];
    let mut report = CgReport { iterations_run: 0, residual_norms: vec![y_norm], converged: false };
    observe(0, &x);
    if y_norm == 0.0 {
        report.converged = true;
        return Ok((x, report));
    }

    let mut r = y.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = y_norm * y_norm;
    for iter in 1..=max_iters {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= 0.0 {
            return Err(Error::NumericalFailure {
                message: format!("curvature pᵀAp = {pap} at iteration {iter}; operator not positive-definite"),
                residual: rr.sqrt(),
            });
        }
        let step = rr / pap;
        for ((xi, ri), (&pi, &api)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)) {
            *xi += step * pi;
            *ri -= step * api;
        }
        let rr_next = dot(&r, &r);
        if !rr_next.is_finite() {
            return Err(Error::NumericalFailure { message: "non-finite residual".into(), residual: rr_next });
        }
        report.iterations_run = iter;
        report.residual_norms.push(rr_next.sqrt());
        observe(iter, &x);
        if rr_next.sqrt() <= rel_tol * y_norm {
            report.converged = true;
            break;
        }
        let beta = rr_next / rr;
        for (pi, &ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_next;
    }
    Ok((x, report))
}

/// The temporal term `x^t`, solving `ℒ_α(𝒲 − U₁Λ₁U₁ᵀ) x^t = y` by CG.
pub fn temporal_term(
    g: &SparseGraph,
    basis: &SpectralBasis,
    y: &SparseVector,
    p: FilterParams,
    max_iters: usize,
    rel_tol: f64,
) -> Result<(Vec<f64>, CgReport)> {
    if !g.is_normalized() {
        return Err(Error::InvalidState("temporal filtering expects a normalized graph".into()));
    }
    if y.len() != g.n() {
        return Err(invalid_input(format!("observation length {} != graph size {}", y.len(), g.n())));
    }
    let op = DeflatedOperator::new(g, basis, p)?;
    conjugate_gradient(&op, &y.to_dense(), max_iters, rel_tol)
}
