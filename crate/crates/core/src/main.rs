use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use noisebench::augment::AugmentKind;
use noisebench::data::{synth_dataset, write_dataset};
use noisebench::exec::with_jobs;
use noisebench::experiment::{load_source, prepare, report, run_cell_with_model, run_grid, Cell, GridConfig, RunFile};
use noisebench::nn::{checkpoint, Preset};
use noisebench::noise::{preview, NoiseKind, NoiseSpec};
use noisebench::rng::derive_seed_u64;
use noisebench::Error;

/// Noise-robustness benchmark for small 1-D CNN classifiers.
#[derive(Debug, Parser)]
#[command(name = "noisebench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment configuration (TOML, or JSON / a previous run.json).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration's global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output directory (or file, for preview-noise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Writes the synthetic dataset as a manifest plus one CSV per record.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 50)]
        records_per_class: usize,
        #[arg(long, default_value_t = 1024)]
        length: usize,
    },
    /// Writes one record with every configured corruption as CSV columns.
    PreviewNoise {
        #[command(flatten)]
        common: Common,
        /// Record id; defaults to the first record of the dataset.
        #[arg(long)]
        record: Option<String>,
    },
    /// Trains and scores a single grid cell.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "cnn")]
        classifier: Preset,
        #[arg(long, default_value = "none")]
        augmentation: AugmentKind,
        #[arg(long, default_value = "none")]
        noise: NoiseKind,
        #[arg(long, default_value_t = 0.0)]
        strength: f64,
        /// Also save the trained model here.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Runs the full classifier x augmentation x noise grid and writes the report.
    Grid {
        #[command(flatten)]
        common: Common,
    },
    /// Re-renders table.csv and curves.csv from a run.json.
    Report {
        #[command(flatten)]
        common: Common,
        /// The run.json to render.
        #[arg(long)]
        run: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<GridConfig, Error> {
    let mut config = match &common.config {
        Some(path) => GridConfig::load(path)?,
        None => GridConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.global_seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(common: &Common, config: &GridConfig) -> PathBuf {
    common.out.clone().unwrap_or_else(|| config.output_dir.clone())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Error> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Returns the process exit code on success paths (0, or 1 when cells failed).
fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Synth {
            common,
            classes,
            records_per_class,
            length,
        } => {
            let seed = common.seed.unwrap_or(1);
            let dataset = synth_dataset(classes, records_per_class, length, seed)
                .map_err(|e| Error::Config(e.to_string()))?;
            let dir = common.out.unwrap_or_else(|| PathBuf::from("synth"));
            let manifest = write_dataset(&dataset, &dir)?;
            println!("{}", manifest.display());
            Ok(0)
        }
        Command::PreviewNoise { common, record } => {
            let config = load_config(&common)?;
            let dataset = load_source(&config.dataset)?;
            let rec = match &record {
                Some(id) => dataset
                    .records
                    .iter()
                    .find(|r| &r.id == id)
                    .ok_or_else(|| Error::Config(format!("no record with id {id:?}")))?,
                None => dataset.records.first().ok_or(Error::EmptyDataset)?,
            };
            let mut specs = Vec::new();
            for &a in config.noise.linear.iter().filter(|s| **s > 0.0) {
                let mut s = NoiseSpec::linear(a);
                s.x_scale = config.linear_noise.x_scale;
                specs.push(s);
            }
            for (i, &sigma) in config.noise.awgn.iter().filter(|s| **s > 0.0).enumerate() {
                specs.push(NoiseSpec::awgn(sigma, derive_seed_u64(config.global_seed, &[i as u64])));
            }
            let path = common.out.clone().unwrap_or_else(|| PathBuf::from("preview.csv"));
            preview(rec, &specs, &path)?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::Train {
            common,
            classifier,
            augmentation,
            noise,
            strength,
            checkpoint: ckpt,
        } => {
            let config = load_config(&common)?;
            let cell = Cell {
                classifier,
                augmentation,
                noise_kind: noise,
                strength,
            };
            let dir = out_dir(&common, &config);
            let (result, model) = with_jobs(common.jobs, |exec| {
                let prepared = prepare(&config)?;
                run_cell_with_model(&config, &prepared, cell, exec)
            })?;
            info!("{cell}: macro F1 {:.2}%", result.macro_f1);
            write_json(&dir.join("cell.json"), &result)?;
            if let Some(path) = ckpt {
                checkpoint::save(&model, &path)?;
            }
            println!("{:.2}", result.macro_f1);
            Ok(0)
        }
        Command::Grid { common } => {
            let config = load_config(&common)?;
            let dir = out_dir(&common, &config);
            let grid = with_jobs(common.jobs, |exec| run_grid(&config, exec))?;
            for failure in &grid.failures {
                warn!("cell {} failed: {}", failure.cell, failure.error);
            }
            let paths = report(&grid, &config, &dir)?;
            println!("{}", paths.table.display());
            Ok(u8::from(grid.any_failed()))
        }
        Command::Report { common, run } => {
            let file = RunFile::load(&run).map_err(|e| Error::Config(e.to_string()))?;
            let dir = common
                .out
                .clone()
                .or_else(|| run.parent().map(Path::to_path_buf))
                .unwrap_or_default();
            let paths = noisebench::experiment::write_run_file(&file, &dir)?;
            println!("{}", paths.table.display());
            Ok(u8::from(!file.failures.is_empty()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config(_)) { 2 } else { 1 })
        }
    }
}
