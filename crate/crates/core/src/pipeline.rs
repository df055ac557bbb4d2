//! End-to-end run: input → similarity matrix → clustering → detection → files.

use std::path::PathBuf;

use log::info;

use crate::detection::{detect_outliers, DetectionConfig, DetectionReport};
use crate::error::{Error, Result};
use crate::hierarchy::{cluster_full, Clustering, Dendrogram};
use crate::io;
use crate::matrix::SimilarityMatrix;
use crate::similarity::{build_similarity_matrix, EventSeries};

/// Smallest dataset the pipeline will score.
pub const MIN_PIPELINE_OBJECTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    EventsJsonl(PathBuf),
    MatrixCsv(PathBuf),
    /// Long-format raw series, turned into events by the experimental
    /// threshold-crossing detector.
    RawSeriesCsv {
        path: PathBuf,
        event_threshold: Option<f64>,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputPaths {
    pub report: Option<PathBuf>,
    pub dendrogram: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub clusters: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: InputSource,
    pub dispersion: f64,
    pub threshold_override: Option<f64>,
    pub outputs: OutputPaths,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        DetectionConfig::new(self.dispersion)?;
        if let Some(t) = self.threshold_override {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid(format!(
                    "threshold override {t} is outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Everything a pipeline run produced.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub matrix: SimilarityMatrix,
    pub dendrogram: Dendrogram,
    pub clustering: Clustering,
    pub report: DetectionReport,
}

/// Similarity matrix for any supported input.
pub fn load_matrix(input: &InputSource) -> Result<SimilarityMatrix> {
    match input {
        InputSource::MatrixCsv(path) => io::load_similarity_matrix(path),
        InputSource::EventsJsonl(path) => {
            let dataset = io::load_events(path)?;
            matrix_from_series(&dataset)
        }
        InputSource::RawSeriesCsv {
            path,
            event_threshold,
        } => {
            let dataset = io::load_raw_series(path)?
                .iter()
                .map(|s| io::detect_threshold_events(s, *event_threshold))
                .collect::<Result<Vec<_>>>()?;
            matrix_from_series(&dataset)
        }
    }
}

fn matrix_from_series(dataset: &[EventSeries]) -> Result<SimilarityMatrix> {
    if dataset.is_empty() {
        return Err(Error::degenerate("input contains no series"));
    }
    info!("computing similarities for {} series", dataset.len());
    build_similarity_matrix(dataset)
}

/// Run clustering and detection on an in-memory matrix.
pub fn analyze(
    matrix: SimilarityMatrix,
    dispersion: f64,
    threshold_override: Option<f64>,
) -> Result<PipelineOutcome> {
    let config = DetectionConfig::new(dispersion)?;
    if matrix.len() < MIN_PIPELINE_OBJECTS {
        return Err(Error::degenerate(format!(
            "outlier detection needs at least {MIN_PIPELINE_OBJECTS} objects, got {}",
            matrix.len()
        )));
    }
    let (dendrogram, clustering) = cluster_full(&matrix, threshold_override)?;
    info!(
        "cut at T = {:.6} produced {} cluster(s)",
        clustering.threshold().t,
        clustering.k()
    );
    let report = detect_outliers(&clustering, &matrix, config)?;
    Ok(PipelineOutcome {
        matrix,
        dendrogram,
        clustering,
        report,
    })
}

/// Load, analyze and write every requested output file.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let matrix = load_matrix(&config.input)?;
    let outcome = analyze(matrix, config.dispersion, config.threshold_override)?;
    let out = &config.outputs;
    if let Some(path) = &out.matrix {
        io::save_similarity_matrix(&outcome.matrix, path)?;
    }
    if let Some(path) = &out.dendrogram {
        io::write_json(&io::dendrogram_to_json(&outcome.dendrogram), path)?;
    }
    if let Some(path) = &out.clusters {
        io::write_json(&io::clustering_to_json(&outcome.clustering), path)?;
    }
    if let Some(path) = &out.report {
        io::write_json(&io::report_to_json(&outcome.report), path)?;
    }
    Ok(outcome)
}

/// Plain-text summary: one row per cluster, then the threshold and the outliers.
pub fn summary_table(report: &DetectionReport) -> String {
    let mut s = format!(
        "Inherent dispersion = {}\n{:<10} {:>8} {:>10} {:>8} {:>8}\n",
        report.config.dispersion, "cluster", "objects", "outliers", "mu_OF", "sigma_OF"
    );
    for c in &report.clusters {
        s.push_str(&format!(
            "{:<10} {:>8} {:>10} {:>8.3} {:>8.3}\n",
            c.id, c.size, c.outlier_count, c.mean_of, c.std_of
        ));
    }
    s.push_str(&format!(
        "{:<10} {:>8} {:>10} {:>8.3} {:>8.3}\n",
        "TOTAL",
        report.scores.len(),
        report.outliers.len(),
        report.mu_of,
        report.sigma_of
    ));
    s.push_str(&format!("OF threshold = {:.3}\n", report.ot));
    let ids: Vec<&str> = report.outliers.iter().map(String::as_str).collect();
    s.push_str(&format!("outliers: {}\n", if ids.is_empty() { "(none)".to_string() } else { ids.join(", ") }));
    s
}
