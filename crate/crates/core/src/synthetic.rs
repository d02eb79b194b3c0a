//! Clustered unit-sphere datasets with known relevance, standing in for
//! image retrieval benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::descriptors::DescriptorSet;
use crate::error::{invalid_input, invalid_param, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub clusters: usize,
    pub points_per_cluster: usize,
    pub dim: usize,
    /// Scale of the isotropic Gaussian perturbation added to the cluster
    /// center before re-normalizing; roughly the tangent of the angular
    /// spread.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { clusters: 10, points_per_cluster: 100, dim: 32, noise: 1.2, seed: 0 }
    }
}

/// Queries and the dataset indices relevant to each.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalSet {
    pub queries: DescriptorSet,
    pub relevance: Vec<Vec<usize>>,
}

impl EvalSet {
    pub fn new(queries: DescriptorSet, relevance: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        if relevance.len() != queries.len() {
            return Err(invalid_input(format!(
                "{} relevance lists for {} queries",
                relevance.len(),
                queries.len()
            )));
        }
        if relevance.iter().flatten().any(|&i| i >= n) {
            return Err(invalid_input(format!("relevance index outside [0, {n})")));
        }
        Ok(Self { queries, relevance })
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Draws cluster centers uniformly on the sphere, then `points_per_cluster`
/// perturbed members per cluster (stored cluster by cluster) and one
/// perturbed query per cluster. A query's relevant items are its cluster.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(DescriptorSet, EvalSet)> {
    if spec.dim < 2 {
        return Err(invalid_param(format!("dimension {} must be at least 2", spec.dim)));
    }
    if spec.clusters == 0 || spec.points_per_cluster == 0 {
        return Err(invalid_param("cluster and point counts must be positive"));
    }
    if !(spec.noise >= 0.0) || !spec.noise.is_finite() {
        return Err(invalid_param(format!("noise {} must be finite and nonnegative", spec.noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim;
    let centers: Vec<Vec<f64>> = (0..spec.clusters).map(|_| unit_gaussian(&mut rng, d)).collect();
    let scale = spec.noise / (d as f64).sqrt();
    let mut perturb = |c: &[f64]| -> Vec<f64> {
        c.iter().map(|&x| x + scale * rng.sample::<f64, _>(StandardNormal)).collect()
    };

    let mut rows = Vec::with_capacity(spec.clusters * spec.points_per_cluster);
    for c in &centers {
        for _ in 0..spec.points_per_cluster {
            rows.push(perturb(c));
        }
    }
    let queries: Vec<Vec<f64>> = centers.iter().map(|c| perturb(c)).collect();

    let data = DescriptorSet::from_rows_normalized(&rows)?;
    let queries = DescriptorSet::from_rows_normalized(&queries)?;
    let relevance = (0..spec.clusters)
        .map(|c| (c * spec.points_per_cluster..(c + 1) * spec.points_per_cluster).collect())
        .collect();
    let eval = EvalSet::new(queries, relevance, data.len())?;
    Ok((data, eval))
}

fn unit_gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
