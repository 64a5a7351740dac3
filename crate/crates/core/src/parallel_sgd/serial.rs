use super::{check_inputs, EpochRecorder, SgdConfig, SgdMode, TrainTrace};
use crate::datasets::{sample_minibatch, DenseDataset};
use crate::error::Result;
use crate::logreg::{batch_gradient, LogisticModel};
use crate::rng::worker_stream;

/// Plain mini-batch SGD: `x_t = x_{t-1} - lr * grad f(x_{t-1}; B_t)`.
pub fn sgd_serial(data: &DenseDataset, config: &SgdConfig, initial: &LogisticModel) -> Result<TrainTrace> {
    config.expect_mode(SgdMode::Serial)?;
    check_inputs(data, config, initial)?;

    let total = config.total_iterations(data.n_rows());
    let mut rng = worker_stream(config.seed, 0);
    let mut model = initial.clone();
    let mut recorder = EpochRecorder::new(config.iterations_per_epoch(data.n_rows()));

    for it in 0..total {
        let batch = sample_minibatch(data, config.batch_size, &mut rng)?;
        let gradient = batch_gradient(&model, data, &batch)?;
        model.apply(&gradient, config.learning_rate);
        recorder.on_update(it as u64 + 1, &model);
    }
    let total_time_s = recorder.elapsed();

    Ok(TrainTrace {
        mode: SgdMode::Serial,
        workers: 1,
        records: recorder.into_records(data)?,
        model,
        updates_applied: total as u64,
        staleness: Vec::new(),
        messages: None,
        total_time_s,
    })
}
