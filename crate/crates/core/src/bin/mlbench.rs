use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mlbench::datasets::{images_to_dataset, load_libsvm, synth_classification, synth_glyphs, write_libsvm};
use mlbench::experiment::{load_config, resolve_output_dir, run_experiment, AlgorithmSpec, ExperimentKind};
use mlbench::genetic::{run_simulation, Simulation, TrainingPair};
use mlbench::logreg::LogisticModel;
use mlbench::neuro_models::Shape;
use mlbench::parallel_sgd::{train, SgdConfig, SgdMode};
use mlbench::perf_energy::bundled_devices;
use mlbench::rng::{stream, Domain};

#[derive(Parser)]
#[command(name = "mlbench", version, about = "Parallel SGD and genetic neuroevolution benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory [default: config output_dir, then $MLBENCH_OUT, then ./mlbench-out]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train logistic regression once on a LIBSVM file.
    Sgd {
        #[arg(long, value_parser = parse_mode)]
        mode: SgdMode,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// LIBSVM dataset with binary labels.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one genetic simulation from a genetic experiment config.
    Genetic {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset.
    GenData {
        #[arg(long, value_enum)]
        kind: DataKind,
        /// Number of rows (glyphs: images, spread evenly over the ten digits).
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Feature count for classification data.
        #[arg(long, default_value_t = 10)]
        d: usize,
        #[arg(long, default_value_t = 2.0)]
        margin: f64,
        /// Side length of glyph images.
        #[arg(long, default_value_t = 28)]
        size: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, value_enum, default_value_t = DataFormat::Csv)]
        format: DataFormat,
        /// Output file [default: <kind>.<format> in the output directory]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the bundled device specifications.
    Devices {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    Glyphs,
    Classification,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum DataFormat {
    Csv,
    Libsvm,
}

/// Accepts `serial`, `sync-shared`, `AsyncShared`, `async_distributed`, ...
fn parse_mode(s: &str) -> Result<SgdMode, String> {
    let key: String = s.chars().filter(|c| *c != '-' && *c != '_').collect::<String>().to_lowercase();
    SgdMode::ALL.into_iter().find(|m| m.to_string().to_lowercase() == key).ok_or_else(|| {
        let names: Vec<String> = SgdMode::ALL.iter().map(ToString::to_string).collect();
        format!("unknown mode `{s}`; expected one of {}", names.join(", "))
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn finish(mut out: BufWriter<File>, path: &Path) -> Result<()> {
    out.flush().with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(config_path: &Path, out: Option<&Path>) -> Result<()> {
    let config = load_config(config_path)?;
    let out_dir = resolve_output_dir(out, config.output_dir.as_deref());
    let base = config_path.parent().unwrap_or(Path::new("."));
    let manifest = run_experiment(&config, &out_dir, base)
        .with_context(|| format!("experiment failed; partial outputs in {}", out_dir.display()))?;
    println!("wrote {} outputs and manifest.json to {}", manifest.outputs.len(), out_dir.display());
    Ok(())
}

fn sgd(config: SgdConfig, data: &Path, out: Option<&Path>) -> Result<()> {
    config.validate()?;
    let dataset = load_libsvm(data)?;
    let trace = train(&dataset, &config, &LogisticModel::zeros(dataset.n_dims()))?;
    let out_dir = resolve_output_dir(out, None);
    let stem = format!("sgd_{}_w{}", config.mode.to_string().to_lowercase(), config.workers);

    let path = out_dir.join(format!("{stem}_trace.csv"));
    let mut file = create(&path)?;
    trace.write_csv(&mut file)?;
    finish(file, &path)?;

    let path = out_dir.join(format!("{stem}_meta.json"));
    let mut file = create(&path)?;
    serde_json::to_writer_pretty(&mut file, &trace.metadata(&config))?;
    writeln!(file)?;
    finish(file, &path)?;

    if let Some(loss) = trace.final_loss() {
        println!("final loss {loss:.6} after {:.3}s", trace.total_time_s);
    }
    Ok(())
}

fn genetic(config_path: &Path, workers: usize, out: Option<&Path>) -> Result<()> {
    let config = load_config(config_path)?;
    let AlgorithmSpec::Genetic { config: genetic, model, generations } = &config.algorithm else {
        bail!("{} does not describe a genetic experiment", config_path.display());
    };
    if config.kind != ExperimentKind::Genetic {
        bail!("{}: expected kind `genetic`", config_path.display());
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    let images = config.dataset.load_images(base)?;
    let input = match (model.input_shape(), images.first()) {
        (Some(shape), _) => shape,
        (None, Some(im)) => Shape::Matrix(im.height, im.width),
        (None, None) => bail!("dataset holds no images"),
    };
    let pairs = TrainingPair::from_images(&images, input)?;
    let template = model.build(&mut stream(genetic.seed, Domain::ModelInit, 0, 0))?;
    let sim = Simulation { config: genetic.clone(), template, generations: *generations, workers };
    let result = run_simulation(&sim, &pairs)?;

    let out_dir = resolve_output_dir(out, config.output_dir.as_deref());
    let stem = format!("genetic_w{workers}");
    let path = out_dir.join(format!("{stem}_fitness.csv"));
    let mut file = create(&path)?;
    result.trace.write_csv(&mut file)?;
    finish(file, &path)?;

    let path = out_dir.join(format!("{stem}_timing.csv"));
    let mut file = create(&path)?;
    result.write_timing_csv(&mut file)?;
    finish(file, &path)?;

    let path = out_dir.join(format!("{stem}_best_model.json"));
    let mut file = create(&path)?;
    file.write_all(result.best_model.to_json()?.as_bytes())?;
    finish(file, &path)?;

    println!("best fitness {:.4}, {:.4}s per generation", result.best_fitness, result.mean_generation_time());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn gen_data(
    kind: DataKind,
    n: usize,
    seed: u64,
    d: usize,
    margin: f64,
    size: usize,
    noise: f64,
    format: DataFormat,
    out: Option<&Path>,
) -> Result<()> {
    let (name, data) = match kind {
        DataKind::Classification => ("classification", synth_classification(n, d, margin, seed)?),
        DataKind::Glyphs => {
            let mut images = synth_glyphs(n.div_ceil(10), size, noise, seed)?;
            images.truncate(n);
            ("glyphs", images_to_dataset(&images)?)
        }
    };
    let path = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let ext = if format == DataFormat::Csv { "csv" } else { "libsvm" };
            resolve_output_dir(None, None).join(format!("{name}.{ext}"))
        }
    };
    let mut file = create(&path)?;
    match format {
        DataFormat::Csv => data.write_csv(&mut file)?,
        DataFormat::Libsvm => write_libsvm(&data, &mut file)?,
    }
    finish(file, &path)
}

fn devices(json: bool) -> Result<()> {
    let devices = bundled_devices();
    if json {
        let map: serde_json::Map<String, serde_json::Value> = devices
            .into_iter()
            .map(|(id, spec)| Ok((id.to_string(), serde_json::to_value(spec)?)))
            .collect::<Result<_>>()?;
        println!("{}", serde_json::to_string_pretty(&map)?);
    } else {
        println!("{:<16} {:<24} {:>8} {:>6}", "id", "name", "tdp_w", "cores");
        for (id, spec) in devices {
            println!("{id:<16} {:<24} {:>8} {:>6}", spec.name, spec.tdp_watts, spec.physical_cores);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => run(&config, out.as_deref()),
        Command::Sgd { mode, workers, epochs, lr, batch, seed, data, out } => {
            let config = SgdConfig { epochs, learning_rate: lr, batch_size: batch, workers, mode, seed };
            sgd(config, &data, out.as_deref())
        }
        Command::Genetic { config, workers, out } => genetic(&config, workers, out.as_deref()),
        Command::GenData { kind, n, seed, d, margin, size, noise, format, out } => {
            gen_data(kind, n, seed, d, margin, size, noise, format, out.as_deref())
        }
        Command::Devices { json } => devices(json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
