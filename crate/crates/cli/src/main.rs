use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use log::{info, LevelFilter};

use dendro_core::baselines::{generate_synthetic_matrix, torgo_size_threshold, SyntheticSpec};
use dendro_core::detection::{detect_outliers, DetectionConfig};
use dendro_core::hierarchy::cluster_full;
use dendro_core::io;
use dendro_core::pipeline::{self, InputSource, OutputPaths, PipelineConfig};
use dendro_core::{cluster_with, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "dendro", version, about = "Cluster-analysis based outlier detection")]
struct Cli {
    /// Log level; the DENDRO_LOG environment variable takes precedence.
    #[arg(long, value_enum, default_value_t = LogLevel::Warn, global = true)]
    log_level: LogLevel,

    /// Worker threads for similarity computation (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl From<LogLevel> for LevelFilter {
    fn from(l: LogLevel) -> Self {
        match l {
            LogLevel::Error => LevelFilter::Error,
            LogLevel::Warn => LevelFilter::Warn,
            LogLevel::Info => LevelFilter::Info,
            LogLevel::Debug => LevelFilter::Debug,
            LogLevel::Trace => LevelFilter::Trace,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the pairwise similarity matrix of event-annotated series.
    Similarity {
        #[command(flatten)]
        input: SeriesInput,
        /// Destination CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the dendrogram of a similarity matrix and cut it into clusters.
    Cluster {
        #[arg(long)]
        matrix: PathBuf,
        /// Cut level in [0, 1] replacing the automatic midpoint threshold.
        #[arg(long)]
        threshold_override: Option<f64>,
        #[arg(long)]
        dendrogram_out: Option<PathBuf>,
        #[arg(long)]
        clusters_out: Option<PathBuf>,
    },
    /// Score objects and flag outliers.
    Detect {
        #[arg(long)]
        matrix: PathBuf,
        /// Clusters JSON from `cluster`; recomputed from the matrix if absent.
        #[arg(long)]
        clusters: Option<PathBuf>,
        /// Inherent dispersion of the domain, in [0, 1].
        #[arg(long)]
        dispersion: f64,
        #[arg(long)]
        report_out: Option<PathBuf>,
    },
    /// Run the whole chain from events, raw series or a matrix to a report.
    Pipeline(PipelineArgs),
    /// Cluster-size baseline: print members of clusters smaller than the threshold.
    Baseline {
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long)]
        size_threshold: usize,
    },
    /// Write a seeded block-structured similarity matrix.
    Synth {
        /// Comma-separated block sizes, e.g. 62,34,5.
        #[arg(long, value_delimiter = ',', required = true)]
        blocks: Vec<usize>,
        #[arg(long)]
        intra: f64,
        #[arg(long)]
        cross: f64,
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("series").required(true).args(["events", "raw"])))]
struct SeriesInput {
    /// Events as JSON lines.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Raw long-format series CSV (experimental threshold-crossing event detector).
    #[arg(long)]
    raw: Option<PathBuf>,
    /// Level for the raw-series detector (default: per-series mean + one std).
    #[arg(long, requires = "raw")]
    event_threshold: Option<f64>,
}

impl SeriesInput {
    fn source(&self) -> InputSource {
        match (&self.events, &self.raw) {
            (Some(p), _) => InputSource::EventsJsonl(p.clone()),
            (None, Some(p)) => InputSource::RawSeriesCsv {
                path: p.clone(),
                event_threshold: self.event_threshold,
            },
            (None, None) => unreachable!("clap enforces one input"),
        }
    }
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("input").required(true).args(["events", "raw", "matrix"])))]
struct PipelineArgs {
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    raw: Option<PathBuf>,
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, requires = "raw")]
    event_threshold: Option<f64>,
    #[arg(long)]
    dispersion: f64,
    #[arg(long)]
    threshold_override: Option<f64>,
    #[arg(long)]
    report_out: Option<PathBuf>,
    #[arg(long)]
    dendrogram_out: Option<PathBuf>,
    #[arg(long)]
    matrix_out: Option<PathBuf>,
    #[arg(long)]
    clusters_out: Option<PathBuf>,
}

impl PipelineArgs {
    fn config(&self) -> PipelineConfig {
        let input = if let Some(p) = &self.matrix {
            InputSource::MatrixCsv(p.clone())
        } else {
            SeriesInput {
                events: self.events.clone(),
                raw: self.raw.clone(),
                event_threshold: self.event_threshold,
            }
            .source()
        };
        PipelineConfig {
            input,
            dispersion: self.dispersion,
            threshold_override: self.threshold_override,
            outputs: OutputPaths {
                report: self.report_out.clone(),
                dendrogram: self.dendrogram_out.clone(),
                matrix: self.matrix_out.clone(),
                clusters: self.clusters_out.clone(),
            },
        }
    }
}

fn init_logging(level: LogLevel) {
    let mut builder = env_logger::Builder::new();
    builder.filter_level(level.into());
    if let Ok(spec) = std::env::var("DENDRO_LOG") {
        builder.parse_filters(&spec);
    }
    builder.format_timestamp(None).init();
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Similarity { input, out } => {
            let matrix = pipeline::load_matrix(&input.source())?;
            io::save_similarity_matrix(&matrix, &out)?;
            info!("wrote {}x{} matrix to {}", matrix.len(), matrix.len(), out.display());
        }
        Command::Cluster {
            matrix,
            threshold_override,
            dendrogram_out,
            clusters_out,
        } => {
            let matrix = io::load_similarity_matrix(&matrix)?;
            let (dendrogram, clustering) = cluster_full(&matrix, threshold_override)?;
            if let Some(path) = dendrogram_out {
                io::write_json(&io::dendrogram_to_json(&dendrogram), path)?;
            }
            if let Some(path) = clusters_out {
                io::write_json(&io::clustering_to_json(&clustering), path)?;
            }
            let th = clustering.threshold();
            println!("T = {:.6} (mu = {:.6}, sigma = {:.6})", th.t, th.mu, th.sigma);
            for (i, members) in clustering.clusters().iter().enumerate() {
                println!("C{} ({}): {}", i + 1, members.len(), members.join(", "));
            }
        }
        Command::Detect {
            matrix,
            clusters,
            dispersion,
            report_out,
        } => {
            let config = DetectionConfig::new(dispersion)?;
            let matrix = io::load_similarity_matrix(&matrix)?;
            let clustering = match &clusters {
                Some(path) => {
                    let c = io::load_clustering(path)?;
                    let mut listed: Vec<&String> = c.source_ids().iter().collect();
                    let mut known: Vec<&String> = matrix.ids().iter().collect();
                    listed.sort();
                    known.sort();
                    if listed != known {
                        return Err(Error::Invariant {
                            path: Some(path.clone()),
                            message: "clusters do not cover exactly the matrix objects".into(),
                        });
                    }
                    c
                }
                None => cluster_with(&matrix, None)?,
            };
            let report = detect_outliers(&clustering, &matrix, config)?;
            if let Some(path) = report_out {
                io::write_json(&io::report_to_json(&report), path)?;
            }
            print!("{}", pipeline::summary_table(&report));
        }
        Command::Pipeline(args) => {
            let outcome = pipeline::run_pipeline(&args.config())?;
            print!("{}", pipeline::summary_table(&outcome.report));
        }
        Command::Baseline {
            clusters,
            size_threshold,
        } => {
            let clustering = io::load_clustering(&clusters)?;
            for id in torgo_size_threshold(&clustering, size_threshold) {
                println!("{id}");
            }
        }
        Command::Synth {
            blocks,
            intra,
            cross,
            jitter,
            seed,
            out,
        } => {
            let spec = SyntheticSpec {
                block_sizes: blocks,
                intra_similarity: intra,
                cross_similarity: cross,
                jitter,
                seed,
            };
            let matrix = generate_synthetic_matrix(&spec)?;
            io::save_similarity_matrix(&matrix, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.log_level);
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
        {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
