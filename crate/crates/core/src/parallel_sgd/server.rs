//! Parameter-server strategies simulated with in-process actors.
//!
//! One server actor (the calling thread) owns the model. Each worker actor
//! owns a contiguous shard of the row indices and its own random stream. The
//! actors share nothing mutable: they talk only through reliable, ordered,
//! unbounded channels.

use std::ops::Range;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::Arc;

use super::{check_inputs, EpochRecorder, MessageStats, SgdConfig, SgdMode, TrainTrace};
use crate::datasets::{sample_from_range, DenseDataset};
use crate::error::{Error, Result};
use crate::logreg::{batch_gradient, Gradient, LogisticModel};
use crate::rng::worker_stream;

/// Gradient computed by one worker against model version `model_version`.
#[derive(Debug, Clone)]
pub struct GradientMessage {
    pub worker_id: usize,
    pub gradient: Gradient,
    pub model_version: u64,
}

/// Model snapshot sent by the server.
#[derive(Debug, Clone)]
pub struct ModelMessage {
    pub model: Arc<LogisticModel>,
    pub model_version: u64,
}

enum ToWorker {
    Model(ModelMessage),
    /// Final model; the worker records it and exits.
    Stop(ModelMessage),
}

enum ToServer {
    Gradient(GradientMessage),
    Failed { worker_id: usize, reason: String },
}

struct WorkerReport {
    observed_versions: Vec<u64>,
    gradients_sent: u64,
}

fn shard(n_rows: usize, workers: usize, w: usize) -> Range<usize> {
    w * n_rows / workers..(w + 1) * n_rows / workers
}

fn worker_loop(
    worker_id: usize,
    data: &DenseDataset,
    rows: Range<usize>,
    batch_size: usize,
    seed: u64,
    inbox: Receiver<ToWorker>,
    outbox: Sender<ToServer>,
) -> WorkerReport {
    let mut rng = worker_stream(seed, worker_id);
    let mut report = WorkerReport { observed_versions: Vec::new(), gradients_sent: 0 };
    for message in inbox {
        let snapshot = match message {
            ToWorker::Model(m) => m,
            ToWorker::Stop(m) => {
                report.observed_versions.push(m.model_version);
                break;
            }
        };
        report.observed_versions.push(snapshot.model_version);
        let result = sample_from_range(rows.start, rows.len(), batch_size, &mut rng)
            .and_then(|batch| batch_gradient(&snapshot.model, data, &batch));
        let reply = match result {
            Ok(gradient) => {
                report.gradients_sent += 1;
                ToServer::Gradient(GradientMessage { worker_id, gradient, model_version: snapshot.model_version })
            }
            Err(e) => ToServer::Failed { worker_id, reason: e.to_string() },
        };
        if outbox.send(reply).is_err() {
            break;
        }
    }
    report
}

struct Server {
    model: LogisticModel,
    version: u64,
    outboxes: Vec<Sender<ToWorker>>,
    inbox: Receiver<ToServer>,
    stats: MessageStats,
}

impl Server {
    fn snapshot(&self) -> ModelMessage {
        ModelMessage { model: Arc::new(self.model.clone()), model_version: self.version }
    }

    fn send(&mut self, worker: usize, message: ToWorker) -> Result<()> {
        self.outboxes[worker]
            .send(message)
            .map_err(|_| Error::WorkerFailed { worker, reason: "disconnected".into() })?;
        self.stats.models_sent += 1;
        Ok(())
    }

    fn broadcast(&mut self, stop: bool) -> Result<()> {
        let snapshot = self.snapshot();
        for w in 0..self.outboxes.len() {
            let message = if stop { ToWorker::Stop(snapshot.clone()) } else { ToWorker::Model(snapshot.clone()) };
            self.send(w, message)?;
        }
        Ok(())
    }

    fn receive(&mut self) -> Result<GradientMessage> {
        match self.inbox.recv() {
            Ok(ToServer::Gradient(g)) => Ok(g),
            Ok(ToServer::Failed { worker_id, reason }) => Err(Error::WorkerFailed { worker: worker_id, reason }),
            Err(_) => Err(Error::WorkerFailed { worker: usize::MAX, reason: "all workers disconnected".into() }),
        }
    }
}

/// Spawns the worker actors, runs `serve` on the calling thread, and gathers
/// the workers' message accounting once the server returns.
fn run_actors(
    data: &DenseDataset,
    config: &SgdConfig,
    initial: &LogisticModel,
    worker_batch: usize,
    serve: impl FnOnce(&mut Server) -> Result<()>,
) -> Result<(Server, f64)> {
    let workers = config.workers;
    let (to_server, inbox) = channel();
    let mut outboxes = Vec::with_capacity(workers);
    let mut inboxes = Vec::with_capacity(workers);
    for _ in 0..workers {
        let (tx, rx) = channel();
        outboxes.push(tx);
        inboxes.push(rx);
    }
    let mut server = Server {
        model: initial.clone(),
        version: 0,
        outboxes,
        inbox,
        stats: MessageStats::default(),
    };

    std::thread::scope(|scope| {
        let handles: Vec<_> = inboxes
            .into_iter()
            .enumerate()
            .map(|(w, rx)| {
                let tx = to_server.clone();
                let rows = shard(data.n_rows(), workers, w);
                scope.spawn(move || worker_loop(w, data, rows, worker_batch, config.seed, rx, tx))
            })
            .collect();
        drop(to_server);

        let start = std::time::Instant::now();
        let outcome = serve(&mut server);
        let elapsed = start.elapsed().as_secs_f64();
        // Closing the queues stops any worker still waiting for work.
        server.outboxes.clear();

        for (w, handle) in handles.into_iter().enumerate() {
            let report = handle.join().map_err(|_| Error::WorkerFailed { worker: w, reason: "panicked".into() })?;
            server.stats.models_received += report.observed_versions.len() as u64;
            server.stats.gradients_sent += report.gradients_sent;
            server.stats.observed_versions.push(report.observed_versions);
        }
        outcome?;
        Ok((server, elapsed))
    })
}

fn check_shards(data: &DenseDataset, workers: usize, per_worker: usize) -> Result<()> {
    let smallest = data.n_rows() / workers;
    if smallest < per_worker {
        return Err(Error::invalid(format!(
            "each of {workers} workers must draw {per_worker} rows but the smallest shard has {smallest}"
        )));
    }
    Ok(())
}

/// Synchronous parameter server.
///
/// Each round every worker draws `b / W` rows from its shard and sends one
/// gradient; the server waits for all `W`, averages them, applies one update
/// and broadcasts the new model.
pub fn sgd_sync_server(data: &DenseDataset, config: &SgdConfig, initial: &LogisticModel) -> Result<TrainTrace> {
    config.expect_mode(SgdMode::SyncDistributed)?;
    check_inputs(data, config, initial)?;
    let workers = config.workers;
    if !config.batch_size.is_multiple_of(workers) {
        return Err(Error::invalid(format!(
            "batch size {} is not divisible by {workers} workers",
            config.batch_size
        )));
    }
    let per_worker = config.batch_size / workers;
    check_shards(data, workers, per_worker)?;

    let total = config.total_iterations(data.n_rows());
    let mut recorder = EpochRecorder::new(config.iterations_per_epoch(data.n_rows()));

    let (server, total_time_s) = run_actors(data, config, initial, per_worker, |server| {
        recorder.restart();
        server.broadcast(total == 0)?;
        for round in 0..total {
            let mut slots: Vec<Option<Gradient>> = vec![None; workers];
            for _ in 0..workers {
                let message = server.receive()?;
                if message.model_version != server.version {
                    return Err(Error::WorkerFailed {
                        worker: message.worker_id,
                        reason: format!("gradient for version {} in round {round}", message.model_version),
                    });
                }
                slots[message.worker_id] = Some(message.gradient);
                server.stats.gradients_applied += 1;
            }
            let mut gradients = slots.into_iter().map(|g| g.expect("one gradient per worker"));
            let mut mean = gradients.next().expect("at least one worker");
            for g in gradients {
                mean.add_assign(&g);
            }
            mean.scale(1.0 / workers as f64);
            server.model.apply(&mean, config.learning_rate);
            server.version += 1;
            recorder.on_update(server.version, &server.model);
            server.broadcast(round + 1 == total)?;
        }
        Ok(())
    })?;

    finish(SgdMode::SyncDistributed, workers, server, recorder, Vec::new(), total_time_s, data)
}

/// Asynchronous parameter server.
///
/// Gradients are applied in arrival order and the fresh model goes back only
/// to the sender. The server hands out exactly `T * ceil(n / b)` work items,
/// then stops every worker.
pub fn sgd_async_server(data: &DenseDataset, config: &SgdConfig, initial: &LogisticModel) -> Result<TrainTrace> {
    config.expect_mode(SgdMode::AsyncDistributed)?;
    check_inputs(data, config, initial)?;
    let workers = config.workers;
    check_shards(data, workers, config.batch_size)?;

    let total = config.total_iterations(data.n_rows()) as u64;
    let mut recorder = EpochRecorder::new(config.iterations_per_epoch(data.n_rows()));
    let mut staleness = Vec::with_capacity(total as usize);

    let (server, total_time_s) = run_actors(data, config, initial, config.batch_size, |server| {
        recorder.restart();
        let mut issued = 0u64;
        let first = server.snapshot();
        for w in 0..workers {
            if issued == total {
                break;
            }
            server.send(w, ToWorker::Model(first.clone()))?;
            issued += 1;
        }
        while server.version < total {
            let message = server.receive()?;
            staleness.push(server.version - message.model_version);
            server.model.apply(&message.gradient, config.learning_rate);
            server.version += 1;
            server.stats.gradients_applied += 1;
            recorder.on_update(server.version, &server.model);
            if issued < total {
                let reply = server.snapshot();
                server.send(message.worker_id, ToWorker::Model(reply))?;
                issued += 1;
            }
        }
        server.broadcast(true)
    })?;

    finish(SgdMode::AsyncDistributed, workers, server, recorder, staleness, total_time_s, data)
}

fn finish(
    mode: SgdMode,
    workers: usize,
    server: Server,
    recorder: EpochRecorder,
    staleness: Vec<u64>,
    total_time_s: f64,
    data: &DenseDataset,
) -> Result<TrainTrace> {
    Ok(TrainTrace {
        mode,
        workers,
        records: recorder.into_records(data)?,
        model: server.model,
        updates_applied: server.version,
        staleness,
        messages: Some(server.stats),
        total_time_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shards_are_disjoint_and_cover() {
        let mut covered = Vec::new();
        for w in 0..3 {
            covered.extend(shard(10, 3, w));
        }
        assert_eq!(covered, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn indivisible_batch_rejected() {
        let data = crate::datasets::synth_classification(40, 2, 1.0, 0).unwrap();
        let config = SgdConfig { epochs: 1, learning_rate: 0.1, batch_size: 6, workers: 4, mode: SgdMode::SyncDistributed, seed: 0 };
        assert!(sgd_sync_server(&data, &config, &LogisticModel::zeros(2)).is_err());
    }

    #[test]
    fn undersized_shards_rejected() {
        let data = crate::datasets::synth_classification(40, 2, 1.0, 0).unwrap();
        let config = SgdConfig { epochs: 1, learning_rate: 0.1, batch_size: 16, workers: 4, mode: SgdMode::AsyncDistributed, seed: 0 };
        assert!(sgd_async_server(&data, &config, &LogisticModel::zeros(2)).is_err());
    }

    #[test]
    fn worker_failure_aborts_with_diagnostic() {
        // label 7 is not a binary target, so the worker owning row 0 fails
        let mut labels = vec![0, 1, 0, 1, 0, 1, 0, 1];
        labels[0] = 7;
        let data = DenseDataset::from_rows(vec![vec![1.0]; 8], labels).unwrap();
        for mode in [SgdMode::SyncDistributed, SgdMode::AsyncDistributed] {
            let config = SgdConfig { epochs: 5, learning_rate: 0.1, batch_size: 2, workers: 2, mode, seed: 0 };
            let err = super::super::train(&data, &config, &LogisticModel::zeros(1)).unwrap_err();
            assert!(matches!(err, Error::WorkerFailed { worker: 0, .. }), "{err}");
        }
    }
}
