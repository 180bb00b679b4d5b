//! The `train` subcommand: resolve the run config, train, and export the
//! metric histories, the manifest, and the final checkpoint.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use ska::{
    entropy_vs_norm_series, load_idx, synthetic_blobs, train, Dataset, Network, TrainError,
    TrainingHistory,
};

use crate::config::{self, DataSource, ExportFormat, RunConfig, TrainArgs};
use crate::logging;

enum CmdError {
    /// Usage or configuration problem; exit 2.
    Config(String),
    /// Failure during training or export; exit 3.
    Runtime(String),
}

pub fn run(args: &TrainArgs) -> i32 {
    let run_config = match config::resolve(args) {
        Ok(config) => config,
        Err(msg) => {
            logging::error(msg);
            return 2;
        }
    };
    match execute(&run_config) {
        Ok(()) => 0,
        Err(CmdError::Config(msg)) => {
            logging::error(msg);
            2
        }
        Err(CmdError::Runtime(msg)) => {
            logging::error(msg);
            3
        }
    }
}

fn execute(config: &RunConfig) -> Result<(), CmdError> {
    let dataset = load_dataset(config)?;
    logging::info(format!(
        "dataset: {} samples, {} dims, {} classes",
        dataset.len(),
        dataset.dims(),
        dataset.n_classes
    ));

    if config.layers.first() != Some(&dataset.dims()) {
        return Err(CmdError::Config(format!(
            "first layer size {:?} must equal the data dimension {}",
            config.layers.first(),
            dataset.dims()
        )));
    }
    if config.layers.last() < Some(&dataset.n_classes) {
        return Err(CmdError::Config(format!(
            "last layer size {:?} must cover the {} classes",
            config.layers.last(),
            dataset.n_classes
        )));
    }

    let net_config = config.network_config();
    net_config
        .validate()
        .map_err(|e| CmdError::Config(e.to_string()))?;
    let mut net = Network::new(&net_config).map_err(|e| CmdError::Config(e.to_string()))?;

    let history = train(
        &mut net,
        &dataset.features,
        &dataset.labels,
        dataset.n_classes,
        &net_config,
    )
    .map_err(|e| match e {
        TrainError::InvalidConfig(msg) => CmdError::Config(msg),
        other => CmdError::Runtime(other.to_string()),
    })?;

    let final_entropy = history
        .steps()
        .last()
        .map_or(0.0, |s| s.network_entropy);
    logging::info(format!(
        "trained {} steps; final network entropy {final_entropy:.6} bits",
        history.steps().len()
    ));

    export(config, &net, &history)
}

fn load_dataset(config: &RunConfig) -> Result<Dataset, CmdError> {
    match &config.data {
        DataSource::Synthetic {
            classes,
            per_class,
            dims,
            spread,
        } => synthetic_blobs(*classes, *per_class, *dims, *spread, config.seed)
            .map_err(|e| CmdError::Config(e.to_string())),
        DataSource::Idx { images, labels } => {
            load_idx(images, labels).map_err(|e| CmdError::Config(e.to_string()))
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    config: &'a RunConfig,
}

fn export(config: &RunConfig, net: &Network, history: &TrainingHistory) -> Result<(), CmdError> {
    let out = &config.out_dir;
    fs::create_dir_all(out)
        .map_err(|e| CmdError::Runtime(format!("cannot create {}: {e}", out.display())))?;

    if config.wants(ExportFormat::Csv) {
        write_metrics_csv(&out.join("metrics.csv"), history)?;
        write_class_probs_csv(&out.join("class_probabilities.csv"), history)?;
        write_entropy_vs_norm_csv(&out.join("entropy_vs_norm.csv"), history)?;
    }
    if config.wants(ExportFormat::Json) {
        let json = serde_json::to_string_pretty(history)
            .map_err(|e| CmdError::Runtime(format!("cannot encode history: {e}")))?;
        write_text(&out.join("history.json"), &json)?;
    }

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CmdError::Runtime(format!("cannot encode manifest: {e}")))?;
    write_text(&out.join("manifest.json"), &manifest_json)?;

    net.save_checkpoint(&out.join("checkpoint.json"))
        .map_err(|e| CmdError::Runtime(e.to_string()))?;

    logging::info(format!("outputs written to {}", out.display()));
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CmdError> {
    fs::write(path, text)
        .map_err(|e| CmdError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CmdError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CmdError::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn finish(path: &Path, result: std::io::Result<()>) -> Result<(), CmdError> {
    result.map_err(|e| CmdError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    logging::debug(format!("wrote {}", path.display()));
    Ok(())
}

/// One row per (step, layer), in that order.
fn write_metrics_csv(path: &Path, history: &TrainingHistory) -> Result<(), CmdError> {
    let mut w = create(path)?;
    let result = (|| {
        writeln!(
            w,
            "step,layer,entropy_delta_bits,entropy_cum_bits,cos_alignment,frob_norm"
        )?;
        for step in history.steps() {
            for (layer, metrics) in step.layers.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    step.step,
                    layer,
                    metrics.entropy_delta,
                    metrics.entropy_cum,
                    metrics.cos_alignment,
                    metrics.frob_norm
                )?;
            }
        }
        w.flush()
    })();
    finish(path, result)
}

/// One row per (step, class); classes absent from a batch leave the field
/// empty.
fn write_class_probs_csv(path: &Path, history: &TrainingHistory) -> Result<(), CmdError> {
    let mut w = create(path)?;
    let result = (|| {
        writeln!(w, "step,class,mean_prob")?;
        for step in history.steps() {
            for (class, prob) in step.class_mean_probs.iter().enumerate() {
                match prob {
                    Some(p) => writeln!(w, "{},{},{}", step.step, class, p)?,
                    None => writeln!(w, "{},{},", step.step, class)?,
                }
            }
        }
        w.flush()
    })();
    finish(path, result)
}

/// Per-layer (frob_norm, entropy_cum) trajectories in long form.
fn write_entropy_vs_norm_csv(path: &Path, history: &TrainingHistory) -> Result<(), CmdError> {
    let mut w = create(path)?;
    let result = (|| {
        writeln!(w, "layer,step,frob_norm,entropy_cum_bits")?;
        for layer in 0..history.n_layers() {
            let series = entropy_vs_norm_series(history, layer)
                .expect("layer index is in range by construction");
            for (offset, (norm, entropy)) in series.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    layer,
                    history.steps()[offset].step,
                    norm,
                    entropy
                )?;
            }
        }
        w.flush()
    })();
    finish(path, result)
}
