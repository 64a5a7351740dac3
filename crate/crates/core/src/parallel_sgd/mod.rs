//! Mini-batch SGD for logistic regression under five execution strategies.
//!
//! | mode               | parallelism                                           |
//! |--------------------|-------------------------------------------------------|
//! | `Serial`           | none                                                  |
//! | `SyncShared`       | gradient of each batch split across a thread pool     |
//! | `AsyncShared`      | workers update one mutex-protected model in turn      |
//! | `SyncDistributed`  | parameter server, lockstep rounds over message queues |
//! | `AsyncDistributed` | parameter server, updates applied in arrival order    |
//!
//! Every mode applies exactly `epochs * ceil(n / batch_size)` updates.

mod serial;
mod server;
mod shared;

use std::fmt;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datasets::DenseDataset;
use crate::error::{Error, Result};
use crate::logreg::{full_loss, LogisticModel};

pub use serial::sgd_serial;
pub use server::{sgd_async_server, sgd_sync_server, GradientMessage, ModelMessage};
pub use shared::{sgd_async_shared, sgd_sync_shared};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SgdMode {
    Serial,
    SyncShared,
    AsyncShared,
    SyncDistributed,
    AsyncDistributed,
}

impl SgdMode {
    pub const ALL: [SgdMode; 5] = [
        SgdMode::Serial,
        SgdMode::SyncShared,
        SgdMode::AsyncShared,
        SgdMode::SyncDistributed,
        SgdMode::AsyncDistributed,
    ];

    /// Async modes interleave updates nondeterministically.
    pub fn is_async(self) -> bool {
        matches!(self, SgdMode::AsyncShared | SgdMode::AsyncDistributed)
    }
}

impl fmt::Display for SgdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub workers: usize,
    pub mode: SgdMode,
    pub seed: u64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be finite and >= 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("need at least one worker"));
        }
        if self.mode == SgdMode::Serial && self.workers != 1 {
            return Err(Error::invalid(format!("Serial mode runs one worker, got {}", self.workers)));
        }
        Ok(())
    }

    pub fn iterations_per_epoch(&self, n_rows: usize) -> usize {
        n_rows.div_ceil(self.batch_size)
    }

    pub fn total_iterations(&self, n_rows: usize) -> usize {
        self.epochs * self.iterations_per_epoch(n_rows)
    }

    fn expect_mode(&self, mode: SgdMode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::invalid(format!("config mode is {}, expected {mode}", self.mode)));
        }
        self.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub elapsed_s: f64,
}

/// Message accounting for the parameter-server modes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MessageStats {
    pub gradients_sent: u64,
    pub gradients_applied: u64,
    pub models_sent: u64,
    pub models_received: u64,
    /// Model versions each worker received, in order.
    pub observed_versions: Vec<Vec<u64>>,
}

#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub mode: SgdMode,
    pub workers: usize,
    pub records: Vec<EpochRecord>,
    pub model: LogisticModel,
    pub updates_applied: u64,
    /// Updates applied between a gradient's model read and its own application.
    /// Filled by the async modes only.
    pub staleness: Vec<u64>,
    pub messages: Option<MessageStats>,
    /// Training wall time; loss evaluation is excluded.
    pub total_time_s: f64,
}

impl TrainTrace {
    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    pub fn mean_staleness(&self) -> f64 {
        if self.staleness.is_empty() {
            0.0
        } else {
            self.staleness.iter().sum::<u64>() as f64 / self.staleness.len() as f64
        }
    }

    /// `epoch,loss,elapsed_s`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["epoch", "loss", "elapsed_s"])?;
        for r in &self.records {
            writer.write_record([r.epoch.to_string(), r.loss.to_string(), r.elapsed_s.to_string()])?;
        }
        writer.flush().map_err(|e| Error::io("<trace csv>", e))?;
        Ok(())
    }

    pub fn metadata(&self, config: &SgdConfig) -> RunMetadata {
        RunMetadata {
            mode: self.mode,
            workers: self.workers,
            epochs: config.epochs,
            lr: config.learning_rate,
            batch: config.batch_size,
            seed: config.seed,
            final_loss: self.final_loss(),
            total_time_s: self.total_time_s,
        }
    }
}

/// JSON sidecar written next to each trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub mode: SgdMode,
    pub workers: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
    pub final_loss: Option<f64>,
    pub total_time_s: f64,
}

/// Runs the strategy selected by `config.mode`.
pub fn train(data: &DenseDataset, config: &SgdConfig, initial: &LogisticModel) -> Result<TrainTrace> {
    match config.mode {
        SgdMode::Serial => sgd_serial(data, config, initial),
        SgdMode::SyncShared => sgd_sync_shared(data, config, initial),
        SgdMode::AsyncShared => sgd_async_shared(data, config, initial),
        SgdMode::SyncDistributed => sgd_sync_server(data, config, initial),
        SgdMode::AsyncDistributed => sgd_async_server(data, config, initial),
    }
}

fn check_inputs(data: &DenseDataset, config: &SgdConfig, initial: &LogisticModel) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Empty("training dataset".into()));
    }
    if initial.n_dims() != data.n_dims() {
        return Err(Error::DimensionMismatch { expected: data.n_dims(), found: initial.n_dims() });
    }
    if config.batch_size > data.n_rows() {
        return Err(Error::invalid(format!(
            "batch size {} exceeds the {} training rows",
            config.batch_size,
            data.n_rows()
        )));
    }
    Ok(())
}

/// Snapshots the model whenever an epoch's worth of updates has been applied.
/// Losses are computed from the snapshots after training, outside the timed region.
struct EpochRecorder {
    iterations_per_epoch: usize,
    start: Instant,
    snapshots: Vec<(usize, LogisticModel, f64)>,
}

impl EpochRecorder {
    fn new(iterations_per_epoch: usize) -> Self {
        EpochRecorder { iterations_per_epoch, start: Instant::now(), snapshots: Vec::new() }
    }

    fn restart(&mut self) {
        self.start = Instant::now();
    }

    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    /// `version` is the number of updates applied so far.
    fn on_update(&mut self, version: u64, model: &LogisticModel) {
        let version = version as usize;
        if version.is_multiple_of(self.iterations_per_epoch) {
            let elapsed = self.elapsed();
            self.snapshots.push((version / self.iterations_per_epoch, model.clone(), elapsed));
        }
    }

    fn into_records(self, data: &DenseDataset) -> Result<Vec<EpochRecord>> {
        self.snapshots
            .into_iter()
            .map(|(epoch, model, elapsed_s)| Ok(EpochRecord { epoch, loss: full_loss(&model, data)?, elapsed_s }))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(mode: SgdMode, workers: usize) -> SgdConfig {
        SgdConfig { epochs: 2, learning_rate: 0.1, batch_size: 4, workers, mode, seed: 0 }
    }

    #[test]
    fn epoch_arithmetic_rounds_up() {
        let c = config(SgdMode::Serial, 1);
        assert_eq!(c.iterations_per_epoch(10), 3);
        assert_eq!(c.total_iterations(10), 6);
        assert_eq!(c.iterations_per_epoch(8), 2);
    }

    #[test]
    fn validation() {
        assert!(config(SgdMode::Serial, 2).validate().is_err());
        assert!(config(SgdMode::AsyncShared, 0).validate().is_err());
        assert!(SgdConfig { learning_rate: -1.0, ..config(SgdMode::Serial, 1) }.validate().is_err());
        assert!(SgdConfig { learning_rate: f64::NAN, ..config(SgdMode::Serial, 1) }.validate().is_err());
        assert!(SgdConfig { batch_size: 0, ..config(SgdMode::Serial, 1) }.validate().is_err());
        assert!(config(SgdMode::SyncDistributed, 4).validate().is_ok());
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let data = crate::datasets::synth_classification(20, 2, 1.0, 0).unwrap();
        let err = sgd_serial(&data, &config(SgdMode::SyncShared, 1), &LogisticModel::zeros(2));
        assert!(err.is_err());
    }

    #[test]
    fn trace_csv_header() {
        let trace = TrainTrace {
            mode: SgdMode::Serial,
            workers: 1,
            records: vec![EpochRecord { epoch: 1, loss: 0.5, elapsed_s: 0.25 }],
            model: LogisticModel::zeros(1),
            updates_applied: 1,
            staleness: vec![],
            messages: None,
            total_time_s: 0.25,
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,loss,elapsed_s\n1,0.5,0.25\n");
    }
}
