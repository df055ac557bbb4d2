//! Reference implementations: the cluster-size baseline, brute-force oracles
//! for clustering and detection, and a seeded block-structured matrix generator.
//!
//! The oracles share no code with [`crate::hierarchy`] or [`crate::detection`]
//! beyond reading matrix cells.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hierarchy::{Clustering, CutThreshold};
use crate::matrix::SimilarityMatrix;

/// Largest input the brute-force clustering oracle accepts.
pub const ORACLE_MAX_OBJECTS: usize = 15;

/// Size-threshold baseline: every member of a cluster with fewer than `t` objects.
pub fn torgo_size_threshold(clustering: &Clustering, t: usize) -> BTreeSet<String> {
    clustering
        .clusters()
        .iter()
        .filter(|c| c.len() < t)
        .flatten()
        .cloned()
        .collect()
}

/// Linkage, the two sorted member lists and the cluster positions of a merge candidate.
type Candidate<'a> = (f64, Vec<&'a str>, Vec<&'a str>, usize, usize);

/// Naive agglomeration that stops as soon as the best remaining merge falls below `t`.
///
/// Every step rescans all cluster pairs and recomputes linkage from the
/// original matrix. Ties go to the pair whose sorted member-id lists compare
/// smallest. The returned clustering carries `t` as an overridden threshold.
pub fn brute_force_clustering(matrix: &SimilarityMatrix, t: f64) -> Result<Clustering> {
    let n = matrix.len();
    if n > ORACLE_MAX_OBJECTS {
        return Err(Error::OracleScope(format!(
            "brute-force clustering handles at most {ORACLE_MAX_OBJECTS} objects, got {n}"
        )));
    }
    let ids = matrix.ids();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();

    let sorted_ids = |c: &Vec<usize>| {
        let mut v: Vec<&str> = c.iter().map(|&i| ids[i].as_str()).collect();
        v.sort();
        v
    };

    loop {
        let mut best: Option<Candidate> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let mut linkage = f64::INFINITY;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        if matrix.get(i, j) < linkage {
                            linkage = matrix.get(i, j);
                        }
                    }
                }
                let (ka, kb) = (sorted_ids(&clusters[a]), sorted_ids(&clusters[b]));
                let (lo, hi) = if ka <= kb { (ka, kb) } else { (kb, ka) };
                let better = match &best {
                    None => true,
                    Some((bv, blo, bhi, _, _)) => {
                        linkage > *bv || (linkage == *bv && (&lo, &hi) < (blo, bhi))
                    }
                };
                if better {
                    best = Some((linkage, lo, hi, a, b));
                }
            }
        }
        match best {
            Some((linkage, _, _, a, b)) if linkage >= t => {
                let moved = clusters.remove(b);
                clusters[a].extend(moved);
            }
            _ => break,
        }
    }

    let groups = clusters
        .into_iter()
        .map(|c| c.into_iter().map(|i| ids[i].clone()).collect())
        .collect();
    let threshold = CutThreshold {
        t,
        mu: f64::NAN,
        sigma: f64::NAN,
        overridden: true,
    };
    Clustering::new(ids.to_vec(), groups, threshold)
}

/// Literal evaluation of the outlier factor, threshold and outlier set.
pub fn brute_force_detection(
    objects: &[String],
    clusters: &[Vec<String>],
    matrix: &SimilarityMatrix,
    dispersion: f64,
) -> BTreeSet<String> {
    let n = objects.len();
    let k = clusters.len();
    let sim = |a: &str, b: &str| {
        matrix.get(
            matrix.index_of(a).expect("object in matrix"),
            matrix.index_of(b).expect("object in matrix"),
        )
    };

    let mut majority: Option<usize> = None;
    for (c, members) in clusters.iter().enumerate() {
        if members.len() as f64 > n as f64 / 2.0 {
            majority = Some(c);
        }
    }

    let mut of = Vec::with_capacity(n);
    for obj in objects {
        let own = clusters
            .iter()
            .position(|c| c.contains(obj))
            .expect("object belongs to a cluster");
        let size_term = 1.0 - clusters[own].len() as f64 / n as f64;

        let location_term = if let Some(r) = majority {
            let mut best = 0.0f64;
            for m in &clusters[r] {
                best = best.max(sim(obj, m));
            }
            1.0 - best
        } else {
            let mut total = 0.0;
            for (c, members) in clusters.iter().enumerate() {
                if c == own {
                    continue;
                }
                let mut best = 0.0f64;
                for m in members {
                    best = best.max(sim(obj, m));
                }
                total += best;
            }
            1.0 - total / (k as f64 - 1.0)
        };
        of.push((size_term + location_term) / 2.0);
    }

    let mean = of.iter().sum::<f64>() / n as f64;
    let mut var = 0.0;
    for v in &of {
        var += (v - mean) * (v - mean);
    }
    let std = (var / n as f64).sqrt();
    let threshold = mean + (1.0 + 2.0 * dispersion * dispersion) * std;

    objects
        .iter()
        .zip(&of)
        .filter(|(_, &v)| v > threshold)
        .map(|(id, _)| id.clone())
        .collect()
}

/// Parameters of a block-structured synthetic similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub block_sizes: Vec<usize>,
    pub intra_similarity: f64,
    pub cross_similarity: f64,
    /// Half-width of the uniform noise added to every off-diagonal entry.
    pub jitter: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.block_sizes.is_empty() || self.block_sizes.contains(&0) {
            return Err(Error::invalid("block sizes must be non-empty and positive"));
        }
        for (name, v) in [("intra", self.intra_similarity), ("cross", self.cross_similarity)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} similarity {v} is outside [0, 1]")));
            }
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::invalid("jitter must be finite and non-negative"));
        }
        if self.intra_similarity - self.jitter <= self.cross_similarity + self.jitter {
            return Err(Error::invalid(format!(
                "intra {} and cross {} bands overlap with jitter {}",
                self.intra_similarity, self.cross_similarity, self.jitter
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Object ids in generation order (`o001`, `o002`, ...).
    pub fn ids(&self) -> Vec<String> {
        let n = self.len();
        let width = n.to_string().len().max(3);
        (1..=n).map(|i| format!("o{i:0width$}")).collect()
    }

    /// Block index of every object, in generation order.
    pub fn labels(&self) -> Vec<usize> {
        self.block_sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
            .collect()
    }

    /// Ids of the members of each block.
    pub fn blocks(&self) -> Vec<Vec<String>> {
        let ids = self.ids();
        let mut start = 0;
        self.block_sizes
            .iter()
            .map(|&s| {
                let block = ids[start..start + s].to_vec();
                start += s;
                block
            })
            .collect()
    }
}

/// Seeded block matrix.
///
/// Uses ChaCha8 seeded through `seed_from_u64`. The upper triangle is filled
/// row by row; each entry is `base + jitter * (2u - 1)` with `u` uniform in
/// `[0, 1)`, clamped to `[0, 1]`.
pub fn generate_synthetic_matrix(spec: &SyntheticSpec) -> Result<SimilarityMatrix> {
    spec.validate()?;
    let labels = spec.labels();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    SimilarityMatrix::from_upper(spec.ids(), |i, j| {
        let base = if labels[i] == labels[j] {
            spec.intra_similarity
        } else {
            spec.cross_similarity
        };
        let u: f64 = rng.gen();
        (base + spec.jitter * (2.0 * u - 1.0)).clamp(0.0, 1.0)
    })
}
