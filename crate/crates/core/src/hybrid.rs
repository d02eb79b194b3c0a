//! Query-time ranking: observation vectors and the four filtering modes.
//!
//! The hybrid ranking is `x = U₁ g_α(Λ₁) U₁ᵀ y + ℒ_α(𝒲 − U₁Λ₁U₁ᵀ)⁻¹ y`. With an
//! empty basis it reduces to temporal filtering, with a full basis to
//! spectral filtering.

use std::fmt;
use std::str::FromStr;

use crate::descriptors::{similarity_weight, top_k_indices, DescriptorSet, UNIT_NORM_TOLERANCE};
use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::graph::{
    build_knn_graph, largest_component, symmetric_normalize, truncate_and_renormalize, ComponentMap, SparseGraph,
};
use crate::spectral::{h_alpha, spectral_term, top_eigenpairs, FilterParams, SpectralBasis};
use crate::temporal::{conjugate_gradient, temporal_term, DeflatedOperator, CgReport, DEFAULT_MAX_ITERS, DEFAULT_REL_TOL};
use crate::vector::SparseVector;

/// Dataset neighbors of the query kept in the observation vector.
pub const DEFAULT_OBSERVATION_SIZE: usize = 5;

/// Sparse nonnegative observation `y` for one query.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationVector {
    pub vector: SparseVector,
}

impl ObservationVector {
    /// True when the query has no positive similarity to its neighbors.
    pub fn is_empty(&self) -> bool {
        self.vector.nnz() == 0
    }
}

/// Builds `y` from the query's top-`m` dataset neighbors with values
/// `max(v·q, 0)^exponent`. Ties at rank `m` go to the smaller index.
pub fn build_observation(query: &[f32], data: &DescriptorSet, m: usize, exponent: u32) -> Result<ObservationVector> {
    let norm = query.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(invalid_input(format!("query has norm {norm}, expected 1")));
    }
    let sims = data.similarities(query)?;
    observation_from_similarities(&sims, m, exponent)
}

pub fn observation_from_similarities(sims: &[f64], m: usize, exponent: u32) -> Result<ObservationVector> {
    if m == 0 || m > sims.len() {
        return Err(invalid_param(format!("observation size {m} must lie in [1, {}]", sims.len())));
    }
    let top = top_k_indices(sims, m, None);
    let vector = SparseVector::new(sims.len(), top.into_iter().map(|i| (i, similarity_weight(sims[i], exponent))))?;
    Ok(ObservationVector { vector })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RankingMode {
    Temporal,
    TemporalTruncated,
    Spectral,
    Hybrid,
    /// Raw similarity ordering without diffusion.
    NearestNeighbor,
}

impl RankingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RankingMode::Temporal => "temporal",
            RankingMode::TemporalTruncated => "truncated",
            RankingMode::Spectral => "spectral",
            RankingMode::Hybrid => "hybrid",
            RankingMode::NearestNeighbor => "nn",
        }
    }
}

impl fmt::Display for RankingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RankingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temporal" => Ok(RankingMode::Temporal),
            "truncated" | "temporal-truncated" => Ok(RankingMode::TemporalTruncated),
            "spectral" => Ok(RankingMode::Spectral),
            "hybrid" => Ok(RankingMode::Hybrid),
            "nn" => Ok(RankingMode::NearestNeighbor),
            other => Err(invalid_param(format!("unknown ranking mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankingResult {
    pub scores: Vec<f64>,
    /// Vertex indices by decreasing score; equal scores by ascending index.
    pub order: Vec<usize>,
    pub mode: RankingMode,
    pub report: Option<CgReport>,
}

impl RankingResult {
    pub fn from_scores(scores: Vec<f64>, mode: RankingMode, report: Option<CgReport>) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Self { scores, order, mode, report }
    }
}

/// Hybrid spectral-temporal ranking on a normalized graph.
pub fn hybrid_rank(
    g: &SparseGraph,
    basis: &SpectralBasis,
    y: &SparseVector,
    p: FilterParams,
    max_iters: usize,
    rel_tol: f64,
) -> Result<RankingResult> {
    hybrid_scores(g, basis, y, p, max_iters, rel_tol, RankingMode::Hybrid)
}

/// Pure temporal filtering; the hybrid ranking with an empty basis.
pub fn temporal_rank(
    g: &SparseGraph,
    y: &SparseVector,
    p: FilterParams,
    max_iters: usize,
    rel_tol: f64,
) -> Result<RankingResult> {
    hybrid_scores(g, &SpectralBasis::empty(g.n()), y, p, max_iters, rel_tol, RankingMode::Temporal)
}

fn hybrid_scores(
    g: &SparseGraph,
    basis: &SpectralBasis,
    y: &SparseVector,
    p: FilterParams,
    max_iters: usize,
    rel_tol: f64,
    mode: RankingMode,
) -> Result<RankingResult> {
    let spectral = spectral_term(basis, y, p)?;
    let (mut scores, report) = temporal_term(g, basis, y, p, max_iters, rel_tol)?;
    for (x, s) in scores.iter_mut().zip(spectral) {
        *x += s;
    }
    Ok(RankingResult::from_scores(scores, mode, Some(report)))
}

/// Low-rank spectral filtering `U₁ h_α(Λ₁) U₁ᵀ y` (FSR).
pub fn spectral_rank_fsr(basis: &SpectralBasis, y: &SparseVector, p: FilterParams) -> Result<RankingResult> {
    let scores = basis.apply_filter(y, |lambda| h_alpha(lambda, p))?;
    Ok(RankingResult::from_scores(scores, RankingMode::Spectral, None))
}

/// Ranking by raw similarity.
pub fn nearest_neighbor_rank(sims: &[f64]) -> RankingResult {
    RankingResult::from_scores(sims.to_vec(), RankingMode::NearestNeighbor, None)
}

/// Temporal filtering restricted to the `shortlist` vertices most similar
/// to the query, on the re-normalized raw adjacency of that shortlist.
///
/// Vertices outside the shortlist are scored below every shortlist vertex
/// and ordered among themselves by raw similarity.
pub fn temporal_rank_truncated(
    raw: &SparseGraph,
    sims: &[f64],
    shortlist: usize,
    y: &SparseVector,
    p: FilterParams,
    max_iters: usize,
    rel_tol: f64,
) -> Result<RankingResult> {
    let n = raw.n();
    if sims.len() != n || y.len() != n {
        return Err(invalid_input("similarity and observation lengths must match the graph"));
    }
    if shortlist == 0 || shortlist > n {
        return Err(invalid_param(format!("shortlist size {shortlist} must lie in [1, {n}]")));
    }
    let keep = top_k_indices(sims, shortlist, None);
    let (sub, members) = truncate_and_renormalize(raw, &keep)?;
    let mut local = vec![usize::MAX; n];
    for (l, &gi) in members.iter().enumerate() {
        local[gi] = l;
    }
    let y_local: Vec<f64> = {
        let mut v = vec![0.0; members.len()];
        for (i, val) in y.iter() {
            if local[i] != usize::MAX {
                v[local[i]] = val;
            }
        }
        v
    };
    let empty = SpectralBasis::empty(sub.n());
    let op = DeflatedOperator::new(&sub, &empty, p)?;
    let (x, report) = conjugate_gradient(&op, &y_local, max_iters, rel_tol)?;
    let scores = scatter_with_tail(&x, &members, sims);
    Ok(RankingResult::from_scores(scores, RankingMode::TemporalTruncated, Some(report)))
}

/// Places `local` scores at `members` and ranks all other vertices after
/// them by raw similarity.
fn scatter_with_tail(local: &[f64], members: &[usize], sims: &[f64]) -> Vec<f64> {
    let floor = local.iter().cloned().fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 0.0 };
    // sims lie in [-1, 1], so the tail stays strictly below `floor`
    let mut scores: Vec<f64> = sims.iter().map(|&s| floor - 2.0 + s.clamp(-1.0, 1.0)).collect();
    for (&gi, &x) in members.iter().zip(local) {
        scores[gi] = x;
    }
    scores
}

/// Per-query knobs.
#[derive(Clone, Debug, PartialEq)]
pub struct QuerySettings {
    pub mode: RankingMode,
    pub params: FilterParams,
    pub observation_size: usize,
    pub exponent: u32,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Shortlist size for the truncated mode.
    pub shortlist: usize,
}

impl Default for QuerySettings {
    fn default() -> Self {
        Self {
            mode: RankingMode::Hybrid,
            params: FilterParams::default(),
            observation_size: DEFAULT_OBSERVATION_SIZE,
            exponent: crate::graph::DEFAULT_EXPONENT,
            max_iters: DEFAULT_MAX_ITERS,
            rel_tol: DEFAULT_REL_TOL,
            shortlist: 1000,
        }
    }
}

/// Everything needed to answer queries against one dataset: descriptors,
/// the raw adjacency, its largest component and the normalized graph and
/// eigenbasis on that component.
#[derive(Clone, Debug)]
pub struct RankingIndex {
    data: DescriptorSet,
    raw: SparseGraph,
    components: ComponentMap,
    graph: SparseGraph,
    basis: SpectralBasis,
}

impl RankingIndex {
    /// Builds the graph from descriptors; the basis starts empty.
    pub fn build(data: DescriptorSet, k: usize, exponent: u32) -> Result<Self> {
        let raw = build_knn_graph(&data, k, exponent)?;
        Self::from_graph(data, raw)
    }

    pub fn from_graph(data: DescriptorSet, raw: SparseGraph) -> Result<Self> {
        if raw.is_normalized() {
            return Err(Error::InvalidState("index needs the raw adjacency".into()));
        }
        if raw.n() != data.len() {
            return Err(invalid_input(format!("graph has {} vertices, dataset {}", raw.n(), data.len())));
        }
        let components = largest_component(&raw);
        let graph = symmetric_normalize(&components.restrict(&raw))?;
        let basis = SpectralBasis::empty(graph.n());
        Ok(Self { data, raw, components, graph, basis })
    }

    pub fn with_basis(mut self, basis: SpectralBasis) -> Result<Self> {
        self.set_basis(basis)?;
        Ok(self)
    }

    pub fn set_basis(&mut self, basis: SpectralBasis) -> Result<()> {
        if basis.n() != self.graph.n() {
            return Err(invalid_input(format!(
                "basis has {} rows, largest component has {} vertices",
                basis.n(),
                self.graph.n()
            )));
        }
        self.basis = basis;
        Ok(())
    }

    /// Computes the top-`r` eigenbasis of the component graph.
    pub fn decompose(&mut self, r: usize) -> Result<()> {
        self.basis = top_eigenpairs(&self.graph, r)?;
        Ok(())
    }

    pub fn data(&self) -> &DescriptorSet {
        &self.data
    }

    pub fn raw_graph(&self) -> &SparseGraph {
        &self.raw
    }

    pub fn components(&self) -> &ComponentMap {
        &self.components
    }

    /// Normalized adjacency of the largest component.
    pub fn graph(&self) -> &SparseGraph {
        &self.graph
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    /// Graph plus basis storage in bytes (descriptors excluded).
    pub fn memory_bytes(&self) -> usize {
        let g = &self.graph;
        g.offsets().len() * 8 + g.nnz() * (4 + 8) + self.basis.memory_bytes()
    }

    /// Ranks the whole dataset for one query vector. Items outside the
    /// largest component follow all component items, ordered by raw
    /// similarity.
    pub fn rank(&self, query: &[f32], settings: &QuerySettings) -> Result<RankingResult> {
        let sims = self.data.similarities(query)?;
        let y = build_observation(query, &self.data, settings.observation_size, settings.exponent)?.vector;
        self.rank_observation(&sims, &y, settings)
    }

    /// Ranks given precomputed query similarities and observation vector.
    pub fn rank_observation(&self, sims: &[f64], y: &SparseVector, settings: &QuerySettings) -> Result<RankingResult> {
        self.rank_with_basis(&self.basis, sims, y, settings)
    }

    /// As [`rank_observation`](Self::rank_observation) with a substitute
    /// basis over the same component, e.g. a truncated or sparsified one.
    pub fn rank_with_basis(
        &self,
        basis: &SpectralBasis,
        sims: &[f64],
        y: &SparseVector,
        settings: &QuerySettings,
    ) -> Result<RankingResult> {
        if basis.n() != self.graph.n() {
            return Err(invalid_input("basis does not match the component graph"));
        }
        if sims.len() != self.data.len() || y.len() != self.data.len() {
            return Err(invalid_input("similarity and observation lengths must match the dataset"));
        }
        let p = settings.params;
        let (iters, tol) = (settings.max_iters, settings.rel_tol);
        match settings.mode {
            RankingMode::NearestNeighbor => return Ok(nearest_neighbor_rank(sims)),
            RankingMode::TemporalTruncated => {
                return temporal_rank_truncated(&self.raw, sims, settings.shortlist, y, p, iters, tol)
            }
            _ => {}
        }
        let whole = self.components.is_whole_graph();
        let y_local = if whole {
            y.clone()
        } else {
            SparseVector::new(
                self.graph.n(),
                y.iter().filter_map(|(i, v)| self.components.to_local(i).map(|l| (l, v))),
            )?
        };
        let local = match settings.mode {
            RankingMode::Temporal => temporal_rank(&self.graph, &y_local, p, iters, tol)?,
            RankingMode::Spectral => spectral_rank_fsr(basis, &y_local, p)?,
            RankingMode::Hybrid => hybrid_rank(&self.graph, basis, &y_local, p, iters, tol)?,
            RankingMode::NearestNeighbor | RankingMode::TemporalTruncated => unreachable!(),
        };
        if whole {
            return Ok(local);
        }
        let scores = scatter_with_tail(&local.scores, self.components.members(), sims);
        Ok(RankingResult::from_scores(scores, local.mode, local.report))
    }
}
