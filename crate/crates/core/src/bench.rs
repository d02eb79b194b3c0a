//! Timing, memory and mAP sweeps over ranking configurations.
//!
//! Query time covers diffusion only: similarities and observation vectors
//! are prepared before the clock starts.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::config::Config;
use crate::error::{invalid_param, Result};
use crate::eval::mean_average_precision;
use crate::hybrid::{observation_from_similarities, QuerySettings, RankingIndex, RankingMode, RankingResult};
use crate::spectral::{sparsify, FilterParams, SpectralBasis};
use crate::synthetic::EvalSet;
use crate::vector::SparseVector;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchGrid {
    pub modes: Vec<RankingMode>,
    pub ranks: Vec<usize>,
    pub iterations: Vec<usize>,
    pub sparsity: Vec<f64>,
    pub shortlists: Vec<usize>,
    /// Defaults for every other query setting.
    pub base: QuerySettings,
    /// Run queries concurrently. Only meaningful for throughput; reported
    /// per-query latency is then wall time divided by query count.
    pub parallel: bool,
}

impl Default for BenchGrid {
    fn default() -> Self {
        Self {
            modes: vec![RankingMode::Temporal, RankingMode::Hybrid],
            ranks: vec![0, 100, 200, 300, 400, 500],
            iterations: vec![5],
            sparsity: vec![0.0],
            shortlists: vec![1000],
            base: QuerySettings::default(),
            parallel: false,
        }
    }
}

impl BenchGrid {
    /// Reads `modes`, `ranks`, `iterations`, `sparsity`, `shortlist`,
    /// `alpha`, `observation`, `tol` and `parallel` keys; missing keys keep
    /// their defaults.
    pub fn from_config(c: &Config) -> Result<Self> {
        let mut g = Self::default();
        if let Some(modes) = c.get_list::<String>("modes")? {
            g.modes = modes.iter().map(|m| m.parse()).collect::<Result<_>>()?;
        }
        if let Some(v) = c.get_list("ranks")? {
            g.ranks = v;
        }
        if let Some(v) = c.get_list("iterations")? {
            g.iterations = v;
        }
        if let Some(v) = c.get_list("sparsity")? {
            g.sparsity = v;
        }
        if let Some(v) = c.get_list("shortlist")? {
            g.shortlists = v;
        }
        if let Some(a) = c.get::<f64>("alpha")? {
            g.base.params = FilterParams::new(a)?;
        }
        if let Some(m) = c.get("observation")? {
            g.base.observation_size = m;
        }
        if let Some(t) = c.get("tol")? {
            g.base.rel_tol = t;
        }
        if let Some(p) = c.get("parallel")? {
            g.parallel = p;
        }
        Ok(g)
    }

    fn max_rank(&self) -> usize {
        if self.modes.iter().any(|m| matches!(m, RankingMode::Spectral | RankingMode::Hybrid)) {
            self.ranks.iter().copied().max().unwrap_or(0)
        } else {
            0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub mode: RankingMode,
    pub rank: usize,
    pub iterations: usize,
    pub sparsity: f64,
    pub shortlist: usize,
    pub query_ms: f64,
    pub memory_bytes: usize,
    pub map: f64,
    pub mean_cg_iterations: f64,
}

pub fn write_bench_csv<W: Write>(mut out: W, rows: &[BenchRow]) -> std::io::Result<()> {
    writeln!(out, "mode,rank,iterations,sparsity,shortlist,query_ms,memory_bytes,map,cg_iterations")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{:.6},{},{:.6},{:.3}",
            r.mode, r.rank, r.iterations, r.sparsity, r.shortlist, r.query_ms, r.memory_bytes, r.map, r.mean_cg_iterations
        )?;
    }
    Ok(())
}

struct PreparedQuery {
    sims: Vec<f64>,
    y: SparseVector,
}

/// Runs every configuration of `grid` over all queries of `eval`. The
/// eigenbasis of the largest requested rank is computed once; smaller
/// ranks use its leading columns.
pub fn benchmark(index: &RankingIndex, eval: &EvalSet, grid: &BenchGrid) -> Result<Vec<BenchRow>> {
    let max_rank = grid.max_rank();
    let full_basis = if index.basis().rank() >= max_rank && !index.basis().is_sparse() {
        index.basis().clone()
    } else {
        crate::spectral::top_eigenpairs(index.graph(), max_rank)?
    };
    if max_rank > full_basis.n() {
        return Err(invalid_param(format!("rank {max_rank} exceeds component size {}", full_basis.n())));
    }

    let prepared: Vec<PreparedQuery> = eval
        .queries
        .rows()
        .map(|q| {
            let sims = index.data().similarities(q)?;
            let y = observation_from_similarities(&sims, grid.base.observation_size, grid.base.exponent)?.vector;
            Ok(PreparedQuery { sims, y })
        })
        .collect::<Result<_>>()?;

    let graph_bytes = {
        let g = index.graph();
        g.offsets().len() * 8 + g.nnz() * (4 + 8)
    };

    let mut rows = Vec::new();
    for &mode in &grid.modes {
        let uses_basis = matches!(mode, RankingMode::Spectral | RankingMode::Hybrid);
        let uses_cg = matches!(mode, RankingMode::Temporal | RankingMode::TemporalTruncated | RankingMode::Hybrid);
        let ranks: &[usize] = if uses_basis { &grid.ranks } else { &[0] };
        let sparsities: &[f64] = if uses_basis { &grid.sparsity } else { &[0.0] };
        let iterations: &[usize] = if uses_cg { &grid.iterations } else { &[0] };
        let shortlists: &[usize] =
            if mode == RankingMode::TemporalTruncated { &grid.shortlists } else { &[grid.base.shortlist] };

        for &rank in ranks {
            let truncated = full_basis.truncated(rank)?;
            for &sparsity in sparsities {
                let basis = if sparsity > 0.0 { sparsify(&truncated, sparsity)? } else { truncated.clone() };
                for &iters in iterations {
                    for &shortlist in shortlists {
                        let settings = QuerySettings { mode, max_iters: iters, shortlist, ..grid.base.clone() };
                        let (results, elapsed) = run_queries(index, &basis, &prepared, &settings, grid.parallel)?;
                        let map = mean_average_precision(&results, eval, None)?;
                        let cg: Vec<usize> =
                            results.iter().filter_map(|r| r.report.as_ref().map(|rep| rep.iterations_run)).collect();
                        let mean_cg_iterations =
                            if cg.is_empty() { 0.0 } else { cg.iter().sum::<usize>() as f64 / cg.len() as f64 };
                        rows.push(BenchRow {
                            mode,
                            rank,
                            iterations: iters,
                            sparsity,
                            shortlist,
                            query_ms: elapsed * 1e3 / prepared.len().max(1) as f64,
                            memory_bytes: graph_bytes + if uses_basis { basis.memory_bytes() } else { 0 },
                            map,
                            mean_cg_iterations,
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn run_queries(
    index: &RankingIndex,
    basis: &SpectralBasis,
    prepared: &[PreparedQuery],
    settings: &QuerySettings,
    parallel: bool,
) -> Result<(Vec<RankingResult>, f64)> {
    let start = Instant::now();
    let results: Result<Vec<RankingResult>> = if parallel {
        prepared.par_iter().map(|q| index.rank_with_basis(basis, &q.sims, &q.y, settings)).collect()
    } else {
        prepared.iter().map(|q| index.rank_with_basis(basis, &q.sims, &q.y, settings)).collect()
    };
    let elapsed = start.elapsed().as_secs_f64();
    Ok((results?, elapsed))
}
