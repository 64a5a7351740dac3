//! Shared-memory strategies: one model in process memory, `W` threads.

use std::sync::Mutex;

use rayon::prelude::*;

use super::{check_inputs, EpochRecorder, SgdConfig, SgdMode, TrainTrace};
use crate::datasets::{sample_minibatch, DenseDataset};
use crate::error::{Error, Result};
use crate::logreg::{batch_gradient, gradient_sum, Gradient, LogisticModel};
use crate::rng::worker_stream;

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .thread_name(|i| format!("sgd-worker-{i}"))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {workers} worker threads: {e}")))
}

/// Synchronous data-parallel SGD on a single model.
///
/// The batch sequence is the serial one. Each batch is split into `W`
/// contiguous chunks whose partial gradient sums are computed concurrently
/// and then added in ascending chunk order, so the only difference from the
/// serial run is the association of the sums.
pub fn sgd_sync_shared(data: &DenseDataset, config: &SgdConfig, initial: &LogisticModel) -> Result<TrainTrace> {
    config.expect_mode(SgdMode::SyncShared)?;
    check_inputs(data, config, initial)?;

    let workers = config.workers;
    let pool = thread_pool(workers)?;
    let total = config.total_iterations(data.n_rows());
    let b = config.batch_size;
    let mut rng = worker_stream(config.seed, 0);
    let mut model = initial.clone();
    let mut recorder = EpochRecorder::new(config.iterations_per_epoch(data.n_rows()));

    for it in 0..total {
        let batch = sample_minibatch(data, b, &mut rng)?;
        let rows = &batch.row_indices;
        let current = &model;
        let partials: Vec<Gradient> = pool.install(|| {
            (0..workers)
                .into_par_iter()
                .map(|c| gradient_sum(current, data, rows, c * b / workers..(c + 1) * b / workers))
                .collect::<Result<_>>()
        })?;
        let mut partials = partials.into_iter();
        let mut gradient = partials.next().expect("at least one worker");
        for partial in partials {
            gradient.add_assign(&partial);
        }
        gradient.scale(1.0 / b as f64);
        model.apply(&gradient, config.learning_rate);
        recorder.on_update(it as u64 + 1, &model);
    }
    let total_time_s = recorder.elapsed();

    Ok(TrainTrace {
        mode: SgdMode::SyncShared,
        workers,
        records: recorder.into_records(data)?,
        model,
        updates_applied: total as u64,
        staleness: Vec::new(),
        messages: None,
        total_time_s,
    })
}

struct SharedState {
    model: LogisticModel,
    version: u64,
    staleness: Vec<u64>,
    recorder: EpochRecorder,
}

/// Asynchronous SGD with the model behind one mutex.
///
/// Iterations are dealt round-robin to `W` workers. A worker copies the model
/// under the lock, computes its gradient unlocked from its own batch stream,
/// then takes the lock again to apply the update. Other workers' updates may
/// land in between, which is the staleness recorded in the trace.
pub fn sgd_async_shared(data: &DenseDataset, config: &SgdConfig, initial: &LogisticModel) -> Result<TrainTrace> {
    config.expect_mode(SgdMode::AsyncShared)?;
    check_inputs(data, config, initial)?;

    let workers = config.workers;
    let total = config.total_iterations(data.n_rows());
    let state = Mutex::new(SharedState {
        model: initial.clone(),
        version: 0,
        staleness: Vec::with_capacity(total),
        recorder: EpochRecorder::new(config.iterations_per_epoch(data.n_rows())),
    });

    let results: Vec<Result<()>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let state = &state;
                let share = total / workers + usize::from(w < total % workers);
                scope.spawn(move || -> Result<()> {
                    let mut rng = worker_stream(config.seed, w);
                    for _ in 0..share {
                        let (snapshot, read_version) = {
                            let guard = state.lock().expect("model lock poisoned");
                            (guard.model.clone(), guard.version)
                        };
                        // Let the other workers read before this update lands, as
                        // they would when running on separate cores.
                        std::thread::yield_now();
                        let batch = sample_minibatch(data, config.batch_size, &mut rng)?;
                        let gradient = batch_gradient(&snapshot, data, &batch)?;

                        let mut guard = state.lock().expect("model lock poisoned");
                        let guard = &mut *guard;
                        guard.staleness.push(guard.version - read_version);
                        guard.model.apply(&gradient, config.learning_rate);
                        guard.version += 1;
                        guard.recorder.on_update(guard.version, &guard.model);
                    }
                    Ok(())
                })
            })
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(worker, h)| {
                h.join().unwrap_or_else(|_| Err(Error::WorkerFailed { worker, reason: "panicked".into() }))
            })
            .collect()
    });
    for result in results {
        result?;
    }

    let state = state.into_inner().expect("model lock poisoned");
    let total_time_s = state.recorder.elapsed();
    Ok(TrainTrace {
        mode: SgdMode::AsyncShared,
        workers,
        records: state.recorder.into_records(data)?,
        model: state.model,
        updates_applied: state.version,
        staleness: state.staleness,
        messages: None,
        total_time_s,
    })
}
