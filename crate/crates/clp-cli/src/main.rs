//! `clp`: dataset generation, scenario execution, threshold sweeps and
//! model inspection from a flat key-value configuration.

mod config;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use clp_core::data::{
    build_stream, ingest, write_binary, write_csv, DataError, FileFormat, Sample,
    StreamOrdering, StreamSpec,
};
use clp_core::metrics::curve_to_csv;
use clp_core::pool::{CapacityPolicy, PoolConfig, PoolError, PrototypePool};
use clp_core::scenarios::{
    kshot_unlabeled, run_openset_eval, run_semisupervised_fewshot, run_size_sweep,
    run_supervised_ocl, ScenarioError, ScenarioReport,
};
use clp_core::synthetic::{generate_synthetic, DriftSpec, SyntheticSpec};

use config::{Config, ConfigError};

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Parser)]
#[command(name = "clp", about = "prototype-based online continual learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic train/test dataset to the output directory.
    Generate(RunArgs),
    /// Execute one scenario and write its report, curves and model.
    Run(RunArgs),
    /// Run the semi-supervised protocol across a tau grid.
    Sweep(RunArgs),
    /// Summarize a saved model file.
    Inspect { model: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// Key-value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Repeatable override, e.g. --set pool.tau=0.65
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<Config, CliError> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(seed) = self.seed {
            cfg.set("seed", seed);
        }
        if let Some(out) = &self.out {
            cfg.set("out", out.display());
        }
        for pair in &self.set {
            cfg.set_pair(pair)?;
        }
        Ok(cfg)
    }
}

fn out_dir(cfg: &Config) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(cfg.get("out").unwrap_or("out"));
    fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    Ok(dir)
}

fn synthetic_spec(cfg: &Config) -> Result<SyntheticSpec, CliError> {
    let seed = cfg.parse_or("seed", 0u64)?;
    let mut spec = SyntheticSpec::new(
        cfg.parse_or("synthetic.classes", 10usize)?,
        1,
        cfg.parse_or("synthetic.dimension", 16usize)?,
    );
    spec.clusters_per_class = cfg.parse_list("synthetic.clusters_per_class", &[2usize])?;
    spec.samples_per_cluster = cfg.parse_or("synthetic.samples_per_cluster", 300usize)?;
    spec.concentration = cfg.parse_or("synthetic.concentration", 0.1)?;
    spec.seed = cfg.parse_or("synthetic.seed", seed)?;
    spec.max_mean_dot = cfg.parse_or("synthetic.max_mean_dot", 0.2)?;
    spec.same_class_dot = cfg.parse_opt("synthetic.same_class_dot")?;
    if let Some(velocity) = cfg.parse_opt::<f64>("synthetic.drift.angular_velocity")? {
        spec.drift = Some(DriftSpec {
            angular_velocity: velocity,
            target_clusters: cfg.parse_list("synthetic.drift.targets", &[0usize])?,
        });
    }
    Ok(spec)
}

struct Dataset {
    train: Vec<Sample>,
    test: Vec<Sample>,
}

fn load_dataset(cfg: &Config) -> Result<Dataset, CliError> {
    match cfg.get("data.source").unwrap_or("synthetic") {
        "synthetic" => {
            let data = generate_synthetic(&synthetic_spec(cfg)?)?;
            Ok(Dataset {
                train: data.train,
                test: data.test,
            })
        }
        source @ ("csv" | "binary") => {
            let format = if source == "csv" {
                FileFormat::Csv
            } else {
                FileFormat::Binary
            };
            Ok(Dataset {
                train: ingest(cfg.require("data.train")?, format)?.samples,
                test: ingest(cfg.require("data.test")?, format)?.samples,
            })
        }
        other => Err(CliError::Invalid(format!(
            "data.source must be synthetic, csv or binary, got {other:?}"
        ))),
    }
}

fn pool_config(cfg: &Config, dimension: usize) -> Result<PoolConfig, CliError> {
    let policy = match cfg.get("pool.capacity_policy").unwrap_or("skip") {
        "skip" => CapacityPolicy::Skip,
        "strict" => CapacityPolicy::Strict,
        other => {
            return Err(CliError::Invalid(format!(
                "pool.capacity_policy must be skip or strict, got {other:?}"
            )))
        }
    };
    let config = PoolConfig {
        dimension: cfg.parse_or("pool.dimension", dimension)?,
        capacity: cfg.parse_or("pool.capacity", 512usize)?,
        tau: cfg.parse_or("pool.tau", 0.7)?,
        cascade_width: cfg.parse_or("pool.cascade_width", 5usize)?,
        alpha_min: cfg.parse_or("pool.alpha_min", 0.01)?,
        capacity_policy: policy,
    };
    config.validate()?;
    Ok(config)
}

fn stream_spec(cfg: &Config) -> Result<StreamSpec, CliError> {
    let ordering = match cfg.get("stream.ordering").unwrap_or("instance") {
        "instance" => StreamOrdering::Instance,
        "low_shot" => StreamOrdering::LowShotInstance,
        "interleaved" => StreamOrdering::InterleavedRandom {
            seed: cfg.parse_or("stream.seed", cfg.parse_or("seed", 0u64)?)?,
        },
        other => {
            return Err(CliError::Invalid(format!(
                "stream.ordering must be instance, low_shot or interleaved, got {other:?}"
            )))
        }
    };
    Ok(StreamSpec {
        ordering,
        shots_per_class: cfg.parse_opt("stream.shots")?,
        label_visibility: clp_core::data::LabelVisibility::All,
    })
}

fn write_report(path: &Path, report: &ScenarioReport) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Invalid(format!("report serialization failed: {e}")))?;
    text.push('\n');
    write_file(path, text)
}

fn split_base(
    dataset: &Dataset,
    base_classes: i64,
) -> (Vec<Sample>, Vec<Sample>, Vec<Sample>, Vec<Sample>) {
    let part = |samples: &[Sample]| -> (Vec<Sample>, Vec<Sample>) {
        samples
            .iter()
            .cloned()
            .partition(|s| s.label.map_or(false, |l| l <= base_classes))
    };
    let (base_train, novel_train) = part(&dataset.train);
    let (base_test, novel_test) = part(&dataset.test);
    (base_train, novel_train, base_test, novel_test)
}

fn cmd_generate(cfg: &Config) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let data = generate_synthetic(&synthetic_spec(cfg)?)?;
    match cfg.get("data.format").unwrap_or("csv") {
        "csv" => {
            write_csv(dir.join("train.csv"), &data.train)?;
            write_csv(dir.join("test.csv"), &data.test)?;
        }
        "binary" => {
            write_binary(dir.join("train.bin"), &data.train)?;
            write_binary(dir.join("test.bin"), &data.test)?;
        }
        other => {
            return Err(CliError::Invalid(format!(
                "data.format must be csv or binary, got {other:?}"
            )))
        }
    }
    println!(
        "wrote {} train / {} test samples to {}",
        data.train.len(),
        data.test.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_run(cfg: &Config) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let dataset = load_dataset(cfg)?;
    let dimension = dataset
        .train
        .first()
        .map(|s| s.features.len())
        .ok_or_else(|| CliError::Invalid("empty training set".into()))?;
    let pool_cfg = pool_config(cfg, dimension)?;
    let echo = cfg.echo();

    let (report, pool) = match cfg.get("scenario").unwrap_or("supervised") {
        "supervised" => {
            let stream = build_stream(&dataset.train, &stream_spec(cfg)?)?;
            run_supervised_ocl(&stream, &dataset.test, &pool_cfg, echo)?
        }
        "openset" => {
            let base_classes = cfg.parse_or("scenario.base_classes", 5i64)?;
            let (base_train, _, _, _) = split_base(&dataset, base_classes);
            let stream = build_stream(&base_train, &stream_spec(cfg)?)?;
            let mixed: Vec<(Sample, bool)> = dataset
                .test
                .iter()
                .map(|s| (s.clone(), s.label.map_or(true, |l| l > base_classes)))
                .collect();
            run_openset_eval(&stream, &mixed, &pool_cfg, echo)?
        }
        "semisupervised" => {
            let base_classes = cfg.parse_or("scenario.base_classes", 5i64)?;
            let shots = cfg.parse_or("scenario.shots", 5usize)?;
            let (base_train, novel_train, base_test, novel_test) =
                split_base(&dataset, base_classes);
            let stream = build_stream(&base_train, &stream_spec(cfg)?)?;
            let (novel_stream, truth) = kshot_unlabeled(&novel_train, shots)?;
            run_semisupervised_fewshot(
                &stream,
                &base_test,
                &novel_stream,
                &truth,
                &novel_test,
                &pool_cfg,
                echo,
            )?
        }
        other => {
            return Err(CliError::Invalid(format!(
                "scenario must be supervised, openset or semisupervised, got {other:?}"
            )))
        }
    };

    write_report(&dir.join("report.json"), &report)?;
    if let Some(curves) = &report.curves {
        write_file(&dir.join("roc.csv"), curve_to_csv(&curves.roc))?;
        write_file(&dir.join("pr.csv"), curve_to_csv(&curves.pr))?;
    }
    pool.save(dir.join("model.clp")).map_err(|source| CliError::Io {
        path: dir.join("model.clp").display().to_string(),
        source,
    })?;
    println!("wrote report.json and model.clp to {}", dir.display());
    Ok(())
}

fn cmd_sweep(cfg: &Config) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let dataset = load_dataset(cfg)?;
    let dimension = dataset
        .train
        .first()
        .map(|s| s.features.len())
        .ok_or_else(|| CliError::Invalid("empty training set".into()))?;
    let pool_cfg = pool_config(cfg, dimension)?;
    let grid = cfg.parse_list("sweep.tau_grid", &[0.55, 0.60, 0.65, 0.70, 0.75])?;
    let base_classes = cfg.parse_or("scenario.base_classes", 5i64)?;
    let shots = cfg.parse_or("scenario.shots", 5usize)?;
    let (base_train, novel_train, base_test, novel_test) = split_base(&dataset, base_classes);
    let stream = build_stream(&base_train, &stream_spec(cfg)?)?;
    let (novel_stream, truth) = kshot_unlabeled(&novel_train, shots)?;
    let reports = run_size_sweep(
        &stream,
        &base_test,
        &novel_stream,
        &truth,
        &novel_test,
        &grid,
        &pool_cfg,
        cfg.echo(),
    )?;
    for (tau, report) in grid.iter().zip(&reports) {
        write_report(&dir.join(format!("report_tau_{tau}.json")), report)?;
    }
    println!("wrote {} sweep reports to {}", reports.len(), dir.display());
    Ok(())
}

fn cmd_inspect(model: &Path) -> Result<(), CliError> {
    let pool = PrototypePool::load(model)?;
    let c = pool.config();
    println!("{} allocated / {} capacity", pool.len(), c.capacity);
    println!(
        "dimension {}, tau {}, cascade width {}, alpha_min {}",
        c.dimension, c.tau, c.cascade_width, c.alpha_min
    );
    let labels: BTreeSet<i64> = pool.prototypes().iter().map(|p| p.label).collect();
    for label in labels {
        let count = pool.prototypes().iter().filter(|p| p.label == label).count();
        let kind = if label < 0 { "pseudo" } else { "class" };
        println!("  {kind} {label}: {count} prototype(s)");
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(args) => cmd_generate(&args.resolve()?),
        Command::Run(args) => cmd_run(&args.resolve()?),
        Command::Sweep(args) => cmd_sweep(&args.resolve()?),
        Command::Inspect { model } => cmd_inspect(model),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
