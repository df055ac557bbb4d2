//! Outlier detection by cluster analysis.
//!
//! The crate turns a set of objects into a similarity matrix, clusters the
//! matrix agglomeratively, cuts the dendrogram at an automatically chosen
//! level and then scores every object by the size of its cluster and its
//! distance from the rest of the data. A single expert-supplied parameter,
//! the domain's inherent dispersion, controls how permissive the final
//! outlier threshold is.
//!
//! * [`similarity`] compares event-annotated time series.
//! * [`hierarchy`] builds and cuts the dendrogram.
//! * [`detection`] computes outlier factors and flags outliers.
//! * [`baselines`] holds the cluster-size baseline, brute-force oracles and
//!   a synthetic matrix generator.
//! * [`io`] and [`pipeline`] cover file formats and end-to-end runs.

pub mod baselines;
pub mod detection;
pub mod error;
pub mod hierarchy;
pub mod io;
pub mod matrix;
pub mod pipeline;
pub mod similarity;

pub use detection::{detect_outliers, DetectionConfig, DetectionReport, OutlierScore};
pub use error::{Error, Result};
pub use hierarchy::{build_dendrogram, cluster, cluster_with, Clustering, CutThreshold, Dendrogram};
pub use matrix::SimilarityMatrix;
pub use similarity::{build_similarity_matrix, series_similarity, Event, EventSeries};
