use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{AlgorithmSpec, ExperimentConfig, ExperimentKind, SgdParams};
use crate::datasets::DenseDataset;
use crate::error::{Error, Result};
use crate::genetic::{run_simulation, GeneticConfig, Simulation, SimulationResult, TrainingPair};
use crate::logreg::LogisticModel;
use crate::neuro_models::{ModelSpec, Shape};
use crate::parallel_sgd::{train, TrainTrace};
use crate::perf_energy::{measure_reported, BenchRecord, DeviceSpec, EnergyModel};
use crate::rng::{stream, Domain};

/// Environment variable naming the output directory when neither the
/// command line nor the config does.
pub const OUTPUT_ENV: &str = "MLBENCH_OUT";
pub const DEFAULT_OUTPUT_DIR: &str = "mlbench-out";
const MANIFEST_FILE: &str = "manifest.json";

/// `--out` beats the config's `output_dir`, which beats `MLBENCH_OUT`.
pub fn resolve_output_dir(cli: Option<&Path>, config: Option<&Path>) -> PathBuf {
    cli.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_count: Option<usize>,
    /// Content depends on thread scheduling, so re-runs differ.
    pub nondeterministic: bool,
    /// Columns (CSV) or fields (JSON) holding wall-clock measurements.
    /// Everything else reproduces byte for byte unless `nondeterministic`.
    pub timing_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// The config as run, with `output_dir` resolved.
    pub config: ExperimentConfig,
    pub outputs: Vec<OutputEntry>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

struct Outputs<'a> {
    dir: &'a Path,
    entries: Vec<OutputEntry>,
}

impl Outputs<'_> {
    fn write(
        &mut self,
        name: String,
        workers: Option<usize>,
        image_count: Option<usize>,
        nondeterministic: bool,
        timing_columns: &[&str],
        body: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(&name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        body(&mut out)?;
        out.flush().map_err(|e| Error::io(&path, e))?;
        self.entries.push(OutputEntry {
            path: name,
            workers,
            image_count,
            nondeterministic,
            timing_columns: strings(timing_columns),
        });
        Ok(())
    }

    fn bench(&mut self, name: String, image_count: Option<usize>, records: &[BenchRecord]) -> Result<()> {
        self.write(name, None, image_count, false, &BenchRecord::CSV_HEADER[1..], |out| {
            BenchRecord::write_csv(records, out)
        })
    }
}

/// Runs every worker count of `config`, writing into `out_dir`. A manifest
/// is written even when a run fails, listing the outputs completed so far.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path, base_dir: &Path) -> Result<Manifest> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut outputs = Outputs { dir: out_dir, entries: Vec::new() };
    let result = run_workloads(config, base_dir, &mut outputs);

    let mut resolved = config.clone();
    resolved.output_dir = Some(out_dir.to_path_buf());
    let manifest = Manifest {
        schema_version: super::config::SCHEMA_VERSION,
        status: if result.is_ok() { RunStatus::Completed } else { RunStatus::Failed },
        error: result.as_ref().err().map(ToString::to_string),
        config: resolved,
        outputs: outputs.entries,
    };
    let path = out_dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))?;
    result.map(|()| manifest)
}

fn run_workloads(config: &ExperimentConfig, base_dir: &Path, outputs: &mut Outputs) -> Result<()> {
    let device = config.device.resolve()?;
    let energy = Energy { device: &device, model: config.energy_model };
    match (&config.kind, &config.algorithm) {
        (ExperimentKind::Sgd, AlgorithmSpec::Sgd(params)) => {
            let data = config.dataset.load_dense(base_dir)?;
            sgd_sweep(config, params, &data, energy, outputs)
        }
        (kind, AlgorithmSpec::Genetic { config: genetic, model, generations }) => {
            let images = config.dataset.load_images(base_dir)?;
            let first = images.first().ok_or_else(|| Error::Empty("image dataset".into()))?;
            let input = model.input_shape().unwrap_or(Shape::Matrix(first.height, first.width));
            let pairs = TrainingPair::from_images(&images, input)?;
            let run = GeneticRun { spec: model, config: genetic, generations: *generations };
            if *kind == ExperimentKind::ScalingSweep {
                let counts = config.image_counts.as_deref().unwrap_or_default();
                for &count in counts {
                    if count > pairs.len() {
                        return Err(Error::invalid(format!("image count {count} exceeds the {} loaded images", pairs.len())));
                    }
                    let prefix = format!("sweep_n{count}");
                    run.sweep(config, &pairs[..count], &prefix, Some(count), energy, outputs)?;
                }
                Ok(())
            } else {
                run.sweep(config, &pairs, "genetic", None, energy, outputs)
            }
        }
        _ => unreachable!("validated"),
    }
}

#[derive(Clone, Copy)]
struct Energy<'a> {
    device: &'a DeviceSpec,
    model: EnergyModel,
}

impl Energy<'_> {
    fn records(&self, timings: &[(usize, f64)]) -> Result<Vec<BenchRecord>> {
        // validation guarantees the sweep starts with the 1-worker run
        let &(_, t0) = timings.first().ok_or_else(|| Error::Empty("timings".into()))?;
        timings.iter().map(|&(w, t)| BenchRecord::new(w, t, t0, self.device, self.model)).collect()
    }
}

fn sgd_sweep(
    config: &ExperimentConfig,
    params: &SgdParams,
    data: &DenseDataset,
    energy: Energy,
    outputs: &mut Outputs,
) -> Result<()> {
    let initial = LogisticModel::zeros(data.n_dims());
    let nondeterministic = params.mode.is_async();
    let mut timings = Vec::new();
    for &workers in &config.worker_counts {
        let sgd = params.with_workers(workers);
        let mut last: Option<TrainTrace> = None;
        let elapsed = measure_reported(config.repetitions, || {
            let trace = train(data, &sgd, &initial)?;
            let t = trace.total_time_s;
            last = Some(trace);
            Ok::<_, Error>(t)
        })?;
        let trace = last.expect("at least one run");
        let stem = format!("sgd_w{workers}");
        outputs.write(format!("{stem}_trace.csv"), Some(workers), None, nondeterministic, &["elapsed_s"], |out| {
            trace.write_csv(out)
        })?;
        outputs.write(format!("{stem}_meta.json"), Some(workers), None, nondeterministic, &["total_time_s"], |out| {
            serde_json::to_writer_pretty(&mut *out, &trace.metadata(&sgd))?;
            writeln!(out).map_err(|e| Error::io("<metadata>", e))
        })?;
        timings.push((workers, elapsed));
    }
    outputs.bench("sgd_bench.csv".into(), None, &energy.records(&timings)?)
}

struct GeneticRun<'a> {
    spec: &'a ModelSpec,
    config: &'a GeneticConfig,
    generations: usize,
}

impl GeneticRun<'_> {
    fn sweep(
        &self,
        experiment: &ExperimentConfig,
        data: &[TrainingPair],
        prefix: &str,
        image_count: Option<usize>,
        energy: Energy,
        outputs: &mut Outputs,
    ) -> Result<()> {
        let mut rng = stream(self.config.seed, Domain::ModelInit, 0, 0);
        let template = self.spec.build(&mut rng)?;
        let mut timings = Vec::new();
        for &workers in &experiment.worker_counts {
            let sim = Simulation { config: self.config.clone(), template: template.clone(), generations: self.generations, workers };
            let mut last: Option<SimulationResult> = None;
            let elapsed = measure_reported(experiment.repetitions, || {
                let result = run_simulation(&sim, data)?;
                let t = result.mean_generation_time();
                last = Some(result);
                Ok::<_, Error>(t)
            })?;
            let result = last.expect("at least one run");
            let stem = format!("{prefix}_w{workers}");
            let (w, n) = (Some(workers), image_count);
            outputs.write(format!("{stem}_fitness.csv"), w, n, false, &[], |out| result.trace.write_csv(out))?;
            outputs.write(format!("{stem}_timing.csv"), w, n, false, &["elapsed_s"], |out| {
                result.write_timing_csv(out)
            })?;
            outputs.write(format!("{stem}_best_model.json"), w, n, false, &[], |out| {
                out.write_all(result.best_model.to_json()?.as_bytes()).map_err(|e| Error::io("<model>", e))
            })?;
            timings.push((workers, elapsed));
        }
        outputs.bench(format!("{prefix}_bench.csv"), image_count, &energy.records(&timings)?)
    }
}
