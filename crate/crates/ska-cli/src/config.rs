//! Run configuration: defaults, optional TOML config file, and command-line
//! flags, merged in that order (flags win).

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use ska::{BatchMode, NetworkConfig, PROBABILITY_CLAMP};

pub const DEFAULT_LAYERS: [usize; 5] = [16, 32, 24, 16, 10];
pub const DEFAULT_STEPS: usize = 50;
pub const DEFAULT_LEARNING_RATE: f64 = 1.0;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_CLASSES: usize = 10;
pub const DEFAULT_PER_CLASS: usize = 20;
pub const DEFAULT_DIMS: usize = 16;
pub const DEFAULT_SPREAD: f64 = 0.25;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML config file; flags override its values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Layer sizes, input dimension first, e.g. 16,32,24,16,10.
    #[arg(long, value_delimiter = ',', value_name = "CSV-INTS")]
    pub layers: Option<Vec<usize>>,
    /// Number of learning steps.
    #[arg(long, value_name = "K")]
    pub steps: Option<usize>,
    /// Learning rate.
    #[arg(long, value_name = "ETA")]
    pub lr: Option<f64>,
    /// Seed for initialization and data generation.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Data source kind.
    #[arg(long, value_enum, value_name = "KIND")]
    pub data: Option<DataKind>,
    /// IDX image file (with --data idx).
    #[arg(long, value_name = "PATH")]
    pub idx_images: Option<PathBuf>,
    /// IDX label file (with --data idx).
    #[arg(long, value_name = "PATH")]
    pub idx_labels: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Export formats, comma separated.
    #[arg(long, value_delimiter = ',', value_enum, value_name = "FMT")]
    pub format: Option<Vec<ExportFormat>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataKind {
    Idx,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

/// Fully resolved data source; exactly one is ever configured.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic {
        classes: usize,
        per_class: usize,
        dims: usize,
        spread: f64,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
}

/// The resolved configuration of one run; serialized into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub layers: Vec<usize>,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub batch_size: Option<usize>,
    pub batch_average: bool,
    pub clamp_eps: f64,
    pub update_bias: bool,
    pub data: DataSource,
    pub out_dir: PathBuf,
    pub formats: Vec<ExportFormat>,
}

impl RunConfig {
    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            layer_sizes: self.layers.clone(),
            steps: self.steps,
            learning_rate: self.learning_rate,
            seed: self.seed,
            batch_mode: match self.batch_size {
                Some(size) => BatchMode::Minibatch(size),
                None => BatchMode::Full,
            },
            clamp_eps: self.clamp_eps,
            batch_average: self.batch_average,
            update_bias: self.update_bias,
        }
    }

    pub fn wants(&self, format: ExportFormat) -> bool {
        self.formats.contains(&format)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    layers: Option<Vec<usize>>,
    steps: Option<usize>,
    learning_rate: Option<f64>,
    seed: Option<u64>,
    batch_size: Option<usize>,
    batch_average: Option<bool>,
    clamp_eps: Option<f64>,
    update_bias: Option<bool>,
    out_dir: Option<PathBuf>,
    formats: Option<Vec<ExportFormat>>,
    data: Option<FileData>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileData {
    source: Option<String>,
    classes: Option<usize>,
    per_class: Option<usize>,
    dims: Option<usize>,
    spread: Option<f64>,
    images: Option<PathBuf>,
    labels: Option<PathBuf>,
}

/// Merges defaults, config file, and flags into a [`RunConfig`].
/// Every error here is a usage or config problem (exit code 2).
pub fn resolve(args: &TrainArgs) -> Result<RunConfig, String> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
            toml::from_str::<FileConfig>(&text)
                .map_err(|e| format!("cannot parse config file {}: {e}", path.display()))?
        }
        None => FileConfig::default(),
    };
    let file_data = file.data.unwrap_or_default();

    let kind = match (&args.data, file_data.source.as_deref()) {
        (Some(kind), _) => *kind,
        (None, Some("idx")) => DataKind::Idx,
        (None, Some("synthetic")) | (None, None) => DataKind::Synthetic,
        (None, Some(other)) => {
            return Err(format!(
                "unknown data source {other:?} in config file (expected \"idx\" or \"synthetic\")"
            ))
        }
    };

    let data = match kind {
        DataKind::Synthetic => {
            if args.idx_images.is_some() || args.idx_labels.is_some() {
                return Err(
                    "IDX paths were given but the data source is synthetic; pass --data idx"
                        .into(),
                );
            }
            DataSource::Synthetic {
                classes: file_data.classes.unwrap_or(DEFAULT_CLASSES),
                per_class: file_data.per_class.unwrap_or(DEFAULT_PER_CLASS),
                dims: file_data.dims.unwrap_or(DEFAULT_DIMS),
                spread: file_data.spread.unwrap_or(DEFAULT_SPREAD),
            }
        }
        DataKind::Idx => {
            let images = args
                .idx_images
                .clone()
                .or(file_data.images)
                .ok_or("missing IDX image path: pass --idx-images PATH")?;
            let labels = args
                .idx_labels
                .clone()
                .or(file_data.labels)
                .ok_or("missing IDX label path: pass --idx-labels PATH")?;
            DataSource::Idx { images, labels }
        }
    };

    Ok(RunConfig {
        layers: args
            .layers
            .clone()
            .or(file.layers)
            .unwrap_or_else(|| DEFAULT_LAYERS.to_vec()),
        steps: args.steps.or(file.steps).unwrap_or(DEFAULT_STEPS),
        learning_rate: args
            .lr
            .or(file.learning_rate)
            .unwrap_or(DEFAULT_LEARNING_RATE),
        seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        batch_size: file.batch_size,
        batch_average: file.batch_average.unwrap_or(true),
        clamp_eps: file.clamp_eps.unwrap_or(PROBABILITY_CLAMP),
        update_bias: file.update_bias.unwrap_or(true),
        data,
        out_dir: args
            .out
            .clone()
            .or(file.out_dir)
            .unwrap_or_else(|| PathBuf::from("ska-run")),
        formats: args
            .format
            .clone()
            .or(file.formats)
            .unwrap_or_else(|| vec![ExportFormat::Csv]),
    })
}
