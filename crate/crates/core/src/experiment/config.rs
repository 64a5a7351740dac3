use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::{
    load_libsvm, read_idx_pair, scale_features, synth_classification, synth_glyphs, DenseDataset, ImageSample,
};
use crate::error::{Error, Result};
use crate::genetic::GeneticConfig;
use crate::neuro_models::ModelSpec;
use crate::parallel_sgd::{SgdConfig, SgdMode};
use crate::perf_energy::{bundled_device, DeviceSpec, EnergyModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sgd,
    Genetic,
    /// Genetic runs repeated over growing prefixes of the image set.
    ScalingSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    SynthClassification {
        n: usize,
        d: usize,
        margin: f64,
        seed: u64,
    },
    Libsvm {
        path: PathBuf,
        /// Min-max scale every feature to [0, 1].
        #[serde(default)]
        scale: bool,
    },
    Glyphs {
        n_per_class: usize,
        size: usize,
        #[serde(default)]
        noise: f64,
        seed: u64,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit: Option<usize>,
    },
}

impl DatasetSpec {
    fn holds_images(&self) -> bool {
        matches!(self, DatasetSpec::Glyphs { .. } | DatasetSpec::Idx { .. })
    }

    /// Relative paths are taken relative to `base`.
    pub fn load_dense(&self, base: &Path) -> Result<DenseDataset> {
        match self {
            DatasetSpec::SynthClassification { n, d, margin, seed } => synth_classification(*n, *d, *margin, *seed),
            DatasetSpec::Libsvm { path, scale } => {
                let data = load_libsvm(base.join(path))?;
                Ok(if *scale { scale_features(&data) } else { data })
            }
            _ => Err(Error::invalid("logistic regression needs a synth_classification or libsvm dataset")),
        }
    }

    pub fn load_images(&self, base: &Path) -> Result<Vec<ImageSample>> {
        match self {
            DatasetSpec::Glyphs { n_per_class, size, noise, seed } => synth_glyphs(*n_per_class, *size, *noise, *seed),
            DatasetSpec::Idx { images, labels, limit } => read_idx_pair(base.join(images), base.join(labels), *limit),
            _ => Err(Error::invalid("genetic runs need a glyphs or idx dataset")),
        }
    }
}

/// SGD settings shared by every worker count of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdParams {
    pub mode: SgdMode,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl SgdParams {
    pub fn with_workers(&self, workers: usize) -> SgdConfig {
        SgdConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            workers,
            mode: self.mode,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    Sgd(SgdParams),
    Genetic { config: GeneticConfig, model: ModelSpec, generations: usize },
}

/// A bundled device id or a full inline description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeviceRef {
    Bundled(String),
    Inline(DeviceSpec),
}

impl DeviceRef {
    pub fn resolve(&self) -> Result<DeviceSpec> {
        match self {
            DeviceRef::Bundled(id) => bundled_device(id).ok_or_else(|| Error::Config {
                path: "device".into(),
                message: format!("unknown device `{id}`; bundled devices are {}", bundled_ids()),
            }),
            DeviceRef::Inline(spec) => {
                spec.validate().map_err(|e| Error::Config { path: "device".into(), message: e.to_string() })?;
                Ok(spec.clone())
            }
        }
    }
}

fn bundled_ids() -> String {
    crate::perf_energy::bundled_devices().iter().map(|(id, _)| format!("`{id}`")).collect::<Vec<_>>().join(", ")
}

fn default_repetitions() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub dataset: DatasetSpec,
    pub algorithm: AlgorithmSpec,
    pub worker_counts: Vec<usize>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    pub device: DeviceRef,
    #[serde(default)]
    pub energy_model: EnergyModel,
    /// Dataset prefixes evaluated by a scaling sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_counts: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config { path, message: e.into_inner().to_string() }
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

fn check_ascending(path: &str, values: &[usize]) -> Result<()> {
    if values.is_empty() {
        return Err(config_err(path, "must not be empty"));
    }
    if values[0] == 0 {
        return Err(config_err(path, "counts must be at least 1"));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(config_err(path, format!("must be strictly ascending, got {values:?}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        check_ascending("worker_counts", &self.worker_counts)?;
        if self.worker_counts[0] != 1 {
            return Err(config_err("worker_counts", "must start at 1, the speedup baseline"));
        }
        if self.repetitions == 0 {
            return Err(config_err("repetitions", "must be at least 1"));
        }
        self.device.resolve()?;

        match (&self.kind, &self.algorithm) {
            (ExperimentKind::Sgd, AlgorithmSpec::Sgd(params)) => {
                if self.dataset.holds_images() {
                    return Err(config_err("dataset.type", "sgd runs need synth_classification or libsvm"));
                }
                for &w in &self.worker_counts {
                    params.with_workers(w).validate().map_err(|e| config_err("algorithm", e.to_string()))?;
                    if params.mode == SgdMode::SyncDistributed && !params.batch_size.is_multiple_of(w) {
                        return Err(config_err(
                            "algorithm.batch_size",
                            format!("SyncDistributed splits the batch evenly; {} is not divisible by {w}", params.batch_size),
                        ));
                    }
                }
            }
            (ExperimentKind::Genetic | ExperimentKind::ScalingSweep, AlgorithmSpec::Genetic { config, generations, .. }) => {
                if !self.dataset.holds_images() {
                    return Err(config_err("dataset.type", "genetic runs need glyphs or idx"));
                }
                config.validate().map_err(|e| config_err("algorithm.config", e.to_string()))?;
                if *generations == 0 {
                    return Err(config_err("algorithm.generations", "must be at least 1 to time a generation"));
                }
            }
            (kind, _) => {
                return Err(config_err("algorithm.type", format!("does not match experiment kind {kind:?}")));
            }
        }

        match (&self.kind, &self.image_counts) {
            (ExperimentKind::ScalingSweep, Some(counts)) => check_ascending("image_counts", counts),
            (ExperimentKind::ScalingSweep, None) => Err(config_err("image_counts", "required by scaling-sweep")),
            (_, Some(_)) => Err(config_err("image_counts", "only used by scaling-sweep")),
            (_, None) => Ok(()),
        }
    }

    /// Canonical JSON form.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "kind": "sgd",
        "dataset": {"type": "synth_classification", "n": 100, "d": 5, "margin": 2.0, "seed": 1},
        "algorithm": {"type": "sgd", "mode": "Serial", "epochs": 2, "learning_rate": 0.1, "batch_size": 8, "seed": 1},
        "worker_counts": [1],
        "device": "xeon-gold-6126"
    }"#;

    fn with(field: &str, value: serde_json::Value) -> String {
        let mut doc: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        doc[field] = value;
        doc.to_string()
    }

    #[test]
    fn minimal_config_round_trips() {
        let config = parse_config(MINIMAL).unwrap();
        assert_eq!(config.repetitions, 1);
        assert_eq!(config.energy_model, EnergyModel::PerCore);
        let again = parse_config(&config.to_json().unwrap()).unwrap();
        assert_eq!(again, config);
        assert_eq!(again.to_json().unwrap(), config.to_json().unwrap());
    }

    #[test]
    fn invalid_mode_lists_variants() {
        let text = MINIMAL.replace("\"Serial\"", "\"turbo\"");
        let msg = parse_config(&text).unwrap_err().to_string();
        for mode in SgdMode::ALL {
            assert!(msg.contains(&mode.to_string()), "{msg}");
        }
    }

    #[test]
    fn missing_field_names_path() {
        let text = MINIMAL.replace("\"margin\": 2.0, ", "");
        let err = parse_config(&text).unwrap_err();
        let Error::Config { path, message } = err else { panic!("{err}") };
        assert_eq!(path, "dataset");
        assert!(message.contains("margin"), "{message}");
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(parse_config(&with("colour", "red".into())).is_err());
        let text = MINIMAL.replace("\"epochs\": 2", "\"epochs\": 2, \"epoch\": 3");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn worker_counts_must_ascend() {
        for bad in [serde_json::json!([]), serde_json::json!([2, 1]), serde_json::json!([1, 1]), serde_json::json!([0]), serde_json::json!([2, 4])] {
            let err = parse_config(&with("worker_counts", bad)).unwrap_err();
            assert!(err.to_string().contains("worker_counts"), "{err}");
        }
        // Serial runs exactly one worker
        assert!(parse_config(&with("worker_counts", serde_json::json!([1, 2]))).is_err());
    }

    #[test]
    fn device_forms() {
        let inline = serde_json::json!({"name": "laptop", "tdp_watts": 28.0, "physical_cores": 4});
        let config = parse_config(&with("device", inline)).unwrap();
        assert_eq!(config.device.resolve().unwrap().tdp_watts, 28.0);
        assert!(parse_config(&with("device", "toaster".into())).unwrap_err().to_string().contains("xeon-gold-6126"));
        let zero = serde_json::json!({"name": "x", "tdp_watts": 0.0, "physical_cores": 4});
        assert!(parse_config(&with("device", zero)).is_err());
    }

    #[test]
    fn kind_and_algorithm_must_agree() {
        assert!(parse_config(&with("kind", "genetic".into())).is_err());
        assert!(parse_config(&with("image_counts", serde_json::json!([10]))).is_err());
        assert!(parse_config(&with("schema_version", 2.into())).is_err());
    }

    #[test]
    fn sync_distributed_needs_divisible_batch() {
        let text = MINIMAL.replace("\"Serial\"", "\"SyncDistributed\"").replace("[1]", "[1, 3]");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("batch_size"), "{err}");
    }

    #[test]
    fn genetic_config_reconstructs() {
        let text = r#"{
            "schema_version": 1,
            "kind": "scaling-sweep",
            "dataset": {"type": "glyphs", "n_per_class": 5, "size": 8, "seed": 2},
            "algorithm": {
                "type": "genetic",
                "config": {
                    "mutation_rate": 0.05, "mutation_size": 0.5, "generation_size": 10, "elitism": 0.1,
                    "offset_size": 0.5, "crossover_kind": "DoublePoint", "fitness_kind": "Accuracy", "seed": 4
                },
                "model": {"type": "neural", "layer_sizes": [64, 10]},
                "generations": 3
            },
            "worker_counts": [1, 2],
            "device": "a100",
            "energy_model": "whole_device",
            "image_counts": [10, 50]
        }"#;
        let config = parse_config(text).unwrap();
        let AlgorithmSpec::Genetic { config: genetic, .. } = &config.algorithm else { panic!() };
        assert_eq!(genetic.crossover_kind, crate::genetic::CrossoverKind::DoublePoint);
        assert_eq!(genetic.elitism, 0.1);
        assert_eq!(parse_config(&config.to_json().unwrap()).unwrap(), config);
    }
}
