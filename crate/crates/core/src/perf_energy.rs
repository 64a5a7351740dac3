//! Wall-clock measurement, speedup and parallel efficiency, and energy
//! estimates derived from thermal design power (TDP).

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub name: String,
    /// Power drawn at theoretical maximum load.
    pub tdp_watts: f64,
    pub physical_cores: usize,
}

impl DeviceSpec {
    pub fn new(name: impl Into<String>, tdp_watts: f64, physical_cores: usize) -> Result<Self> {
        let device = DeviceSpec { name: name.into(), tdp_watts, physical_cores };
        device.validate()?;
        Ok(device)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tdp_watts > 0.0 && self.tdp_watts.is_finite()) {
            return Err(Error::invalid(format!("{}: TDP must be positive, got {}", self.name, self.tdp_watts)));
        }
        if self.physical_cores == 0 {
            return Err(Error::invalid(format!("{}: needs at least one core", self.name)));
        }
        Ok(())
    }
}

/// Devices shipped with the tool, keyed by a short id.
pub fn bundled_devices() -> Vec<(&'static str, DeviceSpec)> {
    let device = |name: &str, tdp_watts, physical_cores| DeviceSpec { name: name.into(), tdp_watts, physical_cores };
    vec![
        ("xeon-gold-6126", device("Intel Xeon Gold 6126", 125.0, 12)),
        ("xeon-gold-6342", device("Intel Xeon Gold 6342", 230.0, 24)),
        ("a100", device("NVIDIA A100", 400.0, 108)),
    ]
}

pub fn bundled_device(id: &str) -> Option<DeviceSpec> {
    bundled_devices().into_iter().find(|(key, _)| *key == id).map(|(_, d)| d)
}

/// How energy is attributed to a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyModel {
    /// The whole device draws its TDP for the duration of the run.
    WholeDevice,
    /// Each busy core draws an equal share of the TDP.
    #[default]
    PerCore,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[mid] } else { (values[mid - 1] + values[mid]) / 2.0 })
}

/// Median of `repetitions` timed runs after one untimed warm-up run.
pub fn measure<E>(repetitions: usize, mut run: impl FnMut() -> Result<(), E>) -> Result<f64, E>
where
    E: From<Error>,
{
    measure_reported(repetitions, || {
        let start = Instant::now();
        run()?;
        Ok(start.elapsed().as_secs_f64())
    })
}

/// Like [`measure`], for workloads that time themselves (for example to
/// leave evaluation out of the timed region). `run` returns seconds.
pub fn measure_reported<E>(repetitions: usize, mut run: impl FnMut() -> Result<f64, E>) -> Result<f64, E>
where
    E: From<Error>,
{
    if repetitions == 0 {
        return Err(Error::invalid("need at least one repetition").into());
    }
    run()?;
    let mut times = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        times.push(run()?);
    }
    Ok(median(&mut times).expect("at least one repetition"))
}

/// `(t1 / tN, t1 / (tN · N))`
pub fn speedup_efficiency(t1: f64, tn: f64, workers: usize) -> Result<(f64, f64)> {
    if !(t1 > 0.0 && tn > 0.0) {
        return Err(Error::invalid(format!("times must be positive, got t1={t1}, tN={tn}")));
    }
    if workers == 0 {
        return Err(Error::invalid("need at least one worker"));
    }
    let speedup = t1 / tn;
    Ok((speedup, speedup / workers as f64))
}

/// Joules drawn by the whole device running at TDP for `elapsed_s`.
pub fn device_energy(elapsed_s: f64, device: &DeviceSpec) -> f64 {
    elapsed_s * device.tdp_watts
}

/// Joules for `workers` busy cores, each drawing `tdp / physical_cores`.
pub fn per_core_energy(elapsed_s: f64, device: &DeviceSpec, workers: usize) -> f64 {
    elapsed_s * device.tdp_watts * workers as f64 / device.physical_cores as f64
}

/// Energy of an `N`-worker run relative to the 1-worker run under the
/// per-core model: `N · tN / t1`, i.e. `N / speedup`.
pub fn per_core_energy_ratio(t1: f64, tn: f64, workers: usize) -> Result<f64> {
    if !(t1 > 0.0 && tn > 0.0) {
        return Err(Error::invalid(format!("times must be positive, got t1={t1}, tN={tn}")));
    }
    Ok(workers as f64 * tn / t1)
}

pub fn energy(elapsed_s: f64, device: &DeviceSpec, workers: usize, model: EnergyModel) -> f64 {
    match model {
        EnergyModel::WholeDevice => device_energy(elapsed_s, device),
        EnergyModel::PerCore => per_core_energy(elapsed_s, device, workers),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub workers: usize,
    pub elapsed_s: f64,
    pub speedup: f64,
    pub efficiency: f64,
    pub energy_j: f64,
    pub energy_ratio: f64,
}

impl BenchRecord {
    /// Record for a run of `workers` taking `elapsed_s`, against a 1-worker baseline.
    pub fn new(
        workers: usize,
        elapsed_s: f64,
        baseline_s: f64,
        device: &DeviceSpec,
        model: EnergyModel,
    ) -> Result<Self> {
        let (speedup, efficiency) = speedup_efficiency(baseline_s, elapsed_s, workers)?;
        let energy_j = energy(elapsed_s, device, workers, model);
        let energy_ratio = energy_j / energy(baseline_s, device, 1, model);
        Ok(BenchRecord { workers, elapsed_s, speedup, efficiency, energy_j, energy_ratio })
    }

    pub const CSV_HEADER: [&'static str; 6] = ["workers", "elapsed_s", "speedup", "efficiency", "energy_j", "energy_ratio"];

    /// `workers,elapsed_s,speedup,efficiency,energy_j,energy_ratio`
    pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(Self::CSV_HEADER)?;
        for r in records {
            writer.write_record([
                r.workers.to_string(),
                r.elapsed_s.to_string(),
                r.speedup.to_string(),
                r.efficiency.to_string(),
                r.energy_j.to_string(),
                r.energy_ratio.to_string(),
            ])?;
        }
        writer.flush().map_err(|e| Error::io("<bench csv>", e))?;
        Ok(())
    }
}
