//! Outlier factors over a clustering and the dispersion-aware outlier threshold.
//!
//! Every object gets an outlier factor `OF` in `[0, 1]`: the mean of a size
//! term (`1 - |C| / n`, larger for small clusters) and a location term. The
//! location term is measured against the representative cluster (one that
//! holds more than half of all objects) when there is one, and otherwise
//! against every other cluster. Objects whose `OF` exceeds
//! `mu + (1 + 2 d^2) sigma` are outliers, where `d` is the expert-supplied
//! dispersion of the domain.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::Clustering;
use crate::matrix::SimilarityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Inherent dispersion of the domain, in `[0, 1]`.
    pub dispersion: f64,
}

impl DetectionConfig {
    pub fn new(dispersion: f64) -> Result<Self> {
        check_dispersion(dispersion)?;
        Ok(Self { dispersion })
    }
}

fn check_dispersion(d: f64) -> Result<()> {
    if (0.0..=1.0).contains(&d) {
        Ok(())
    } else {
        Err(Error::invalid(format!("dispersion {d} is outside [0, 1]")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierScore {
    pub object_id: String,
    pub of_neighbors: f64,
    pub of_location: f64,
    pub of: f64,
}

/// Per-cluster row of a detection report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub id: String,
    pub size: usize,
    pub outlier_count: usize,
    pub mean_of: f64,
    pub std_of: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    /// One score per object, in clustering source order.
    pub scores: Vec<OutlierScore>,
    pub mu_of: f64,
    pub sigma_of: f64,
    /// Outlier threshold.
    pub ot: f64,
    pub outliers: BTreeSet<String>,
    pub config: DetectionConfig,
    pub clusters: Vec<ClusterSummary>,
}

impl DetectionReport {
    pub fn is_outlier(&self, id: &str) -> bool {
        self.outliers.contains(id)
    }
}

/// Index of the cluster holding strictly more than half of all objects.
pub fn find_representative_cluster(clustering: &Clustering) -> Option<usize> {
    representative(&clustering.sizes(), clustering.len())
}

fn representative(sizes: &[usize], n: usize) -> Option<usize> {
    sizes.iter().position(|&s| 2 * s > n)
}

/// Size term: `1 - cluster_size / n`.
pub fn of_neighbors(cluster_size: usize, n: usize) -> f64 {
    1.0 - cluster_size as f64 / n as f64
}

/// Highest similarity between `obj` and any member of `cluster`.
pub fn object_cluster_similarity<S: AsRef<str>>(
    obj: &str,
    cluster: &[S],
    matrix: &SimilarityMatrix,
) -> Result<f64> {
    if cluster.is_empty() {
        return Err(Error::invalid("object-cluster similarity needs a non-empty cluster"));
    }
    let o = matrix.require_index(obj)?;
    let members = cluster
        .iter()
        .map(|m| matrix.require_index(m.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    Ok(max_similarity(matrix, o, &members))
}

fn max_similarity(matrix: &SimilarityMatrix, obj: usize, members: &[usize]) -> f64 {
    let row = matrix.row(obj);
    members.iter().map(|&m| row[m]).fold(0.0, f64::max)
}

/// Clustering resolved against a matrix: member positions per cluster and
/// the cluster of every object.
struct Resolved {
    members: Vec<Vec<usize>>,
    cluster_of: Vec<usize>,
    objects: Vec<usize>,
    representative: Option<usize>,
}

impl Resolved {
    fn new(clustering: &Clustering, matrix: &SimilarityMatrix) -> Result<Self> {
        let members = clustering
            .clusters()
            .iter()
            .map(|c| c.iter().map(|id| matrix.require_index(id)).collect())
            .collect::<Result<Vec<Vec<usize>>>>()?;
        let mut cluster_of = vec![usize::MAX; matrix.len()];
        for (c, ms) in members.iter().enumerate() {
            for &m in ms {
                cluster_of[m] = c;
            }
        }
        let objects = clustering
            .source_ids()
            .iter()
            .map(|id| matrix.require_index(id))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            representative: find_representative_cluster(clustering),
            members,
            cluster_of,
            objects,
        })
    }

    fn location(&self, matrix: &SimilarityMatrix, obj: usize) -> f64 {
        let own = self.cluster_of[obj];
        match self.representative {
            Some(r) if r == own => 0.0,
            Some(r) => 1.0 - max_similarity(matrix, obj, &self.members[r]),
            None => {
                let k = self.members.len();
                let sum: f64 = self
                    .members
                    .iter()
                    .enumerate()
                    .filter(|&(c, _)| c != own)
                    .map(|(_, ms)| max_similarity(matrix, obj, ms))
                    .sum();
                1.0 - sum / (k - 1) as f64
            }
        }
    }

    fn score(&self, matrix: &SimilarityMatrix, obj: usize) -> OutlierScore {
        let n = self.objects.len();
        let neighbors = of_neighbors(self.members[self.cluster_of[obj]].len(), n);
        let location = self.location(matrix, obj);
        OutlierScore {
            object_id: matrix.ids()[obj].clone(),
            of_neighbors: neighbors,
            of_location: location,
            of: (neighbors + location) / 2.0,
        }
    }
}

/// Location term for `obj`.
pub fn of_location(obj: &str, clustering: &Clustering, matrix: &SimilarityMatrix) -> Result<f64> {
    let resolved = Resolved::new(clustering, matrix)?;
    let o = matrix.require_index(obj)?;
    if resolved.cluster_of[o] == usize::MAX {
        return Err(Error::invalid(format!("object `{obj}` is not in the clustering")));
    }
    Ok(resolved.location(matrix, o))
}

/// Full score for one object.
pub fn outlier_factor(
    obj: &str,
    clustering: &Clustering,
    matrix: &SimilarityMatrix,
) -> Result<OutlierScore> {
    let resolved = Resolved::new(clustering, matrix)?;
    let o = matrix.require_index(obj)?;
    if resolved.cluster_of[o] == usize::MAX {
        return Err(Error::invalid(format!("object `{obj}` is not in the clustering")));
    }
    Ok(resolved.score(matrix, o))
}

/// `mu + (1 + 2 d^2) sigma`.
pub fn outlier_threshold(mu_of: f64, sigma_of: f64, dispersion: f64) -> Result<f64> {
    check_dispersion(dispersion)?;
    if sigma_of < 0.0 || !sigma_of.is_finite() {
        return Err(Error::invalid(format!(
            "standard deviation {sigma_of} must be finite and non-negative"
        )));
    }
    Ok(mu_of + (1.0 + 2.0 * dispersion * dispersion) * sigma_of)
}

fn population_moments(values: &[f64]) -> (f64, f64) {
    // Equal scores must give an exact zero spread, not summation noise.
    if values.windows(2).all(|w| w[0] == w[1]) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Score every object of `clustering` and flag those strictly above the outlier threshold.
pub fn detect_outliers(
    clustering: &Clustering,
    matrix: &SimilarityMatrix,
    config: DetectionConfig,
) -> Result<DetectionReport> {
    if clustering.is_empty() {
        return Err(Error::degenerate("no objects to score"));
    }
    let resolved = Resolved::new(clustering, matrix)?;
    let scores: Vec<OutlierScore> = resolved
        .objects
        .iter()
        .map(|&o| resolved.score(matrix, o))
        .collect();
    let ofs: Vec<f64> = scores.iter().map(|s| s.of).collect();
    let mut of_at = vec![0.0; matrix.len()];
    for (&o, &of) in resolved.objects.iter().zip(&ofs) {
        of_at[o] = of;
    }
    let (mu_of, sigma_of) = population_moments(&ofs);
    let ot = outlier_threshold(mu_of, sigma_of, config.dispersion)?;
    let outliers: BTreeSet<String> = scores
        .iter()
        .filter(|s| s.of > ot)
        .map(|s| s.object_id.clone())
        .collect();

    let clusters = clustering
        .clusters()
        .iter()
        .enumerate()
        .map(|(c, members)| {
            let member_ofs: Vec<f64> = resolved.members[c].iter().map(|&m| of_at[m]).collect();
            let (mean_of, std_of) = population_moments(&member_ofs);
            ClusterSummary {
                id: format!("C{}", c + 1),
                size: members.len(),
                outlier_count: members.iter().filter(|m| outliers.contains(*m)).count(),
                mean_of,
                std_of,
            }
        })
        .collect();

    Ok(DetectionReport {
        scores,
        mu_of,
        sigma_of,
        ot,
        outliers,
        config,
        clusters,
    })
}
