//! Hybrid spectral-temporal graph filtering for manifold ranking.
//!
//! Offline, a reciprocal kNN graph is built over unit-norm descriptors,
//! symmetrically normalized, and its top-`r` eigenpairs are computed. At
//! query time the ranking vector is the sum of a low-rank spectral term and
//! a conjugate gradient solve on the deflated regularized Laplacian:
//!
//! ```text
//! x = U₁ g_α(Λ₁) U₁ᵀ y  +  ℒ_α(𝒲 − U₁Λ₁U₁ᵀ)⁻¹ y
//! ```
//!
//! `r = 0` gives plain temporal filtering; `r = n` gives exact spectral
//! filtering. The [`analysis`] module quantifies how deflation improves CG
//! convergence.

pub mod analysis;
pub mod bench;
pub mod config;
pub mod descriptors;
pub mod error;
pub mod eval;
pub mod graph;
pub mod hybrid;
pub mod io;
pub mod lanczos;
pub mod operator;
pub mod oracle;
pub mod spectral;
pub mod synthetic;
pub mod temporal;
pub mod vector;

pub use descriptors::DescriptorSet;
pub use error::{Error, Result};
pub use graph::{
    build_knn_graph, largest_component, symmetric_normalize, truncate_and_renormalize, ComponentMap, SparseGraph,
};
pub use hybrid::{
    build_observation, hybrid_rank, spectral_rank_fsr, temporal_rank, temporal_rank_truncated, ObservationVector,
    QuerySettings, RankingIndex, RankingMode, RankingResult,
};
pub use operator::LinearOperator;
pub use spectral::{g_alpha, h_alpha, sparsify, spectral_term, top_eigenpairs, FilterParams, SpectralBasis};
pub use temporal::{conjugate_gradient, deflated_matvec, temporal_term, CgReport, DeflatedOperator};
pub use vector::SparseVector;
