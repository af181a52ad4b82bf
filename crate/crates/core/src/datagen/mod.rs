//! Experiment inputs: seeded random scenarios, datasets of greedy-optimised
//! tasks, and speed samples from GPS trajectories.

mod trajectory;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use trajectory::{
    ingest_trajectory_csv, ingest_trajectory_reader, trajectory_speeds, ColumnMap, IngestReport, SkippedRow,
    SpeedSample, TrajectoryPoint, Trip, EARTH_RADIUS_M,
};

use crate::error::{Error, Result};
use crate::features::{Dataset, Feature};
use crate::greedy::{optimize, GreedyConfig};
use crate::model::{Channel, Device, OffloadRatio, Scenario, Task, DEFAULT_ENERGY_COEFF};
use crate::spectral::{CachedSpectralModel, SpectralConfig};

/// Closed interval `[lo, hi]`, written as a two-element array in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range(pub f64, pub f64);

impl Range {
    pub fn fixed(v: f64) -> Range {
        Range(v, v)
    }

    pub fn lo(&self) -> f64 {
        self.0
    }

    pub fn hi(&self) -> f64 {
        self.1
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        if self.0 == self.1 {
            self.0
        } else {
            self.0 + (self.1 - self.0) * u
        }
    }

    fn check(&self, name: &str, allow_zero: bool) -> Result<()> {
        let lo_ok = if allow_zero { self.0 >= 0.0 } else { self.0 > 0.0 };
        if !(self.0.is_finite() && self.1.is_finite() && lo_ok && self.0 <= self.1) {
            return Err(Error::invalid(format!(
                "range `{name}` = [{}, {}] must satisfy {} lo <= hi",
                self.0,
                self.1,
                if allow_zero { "0 <=" } else { "0 <" }
            )));
        }
        Ok(())
    }
}

/// Sampling ranges for a random scenario. Every draw is uniform.
///
/// The defaults straddle the break-even point between local and offloaded
/// cost per bit, so some tasks end fully offloaded and others stop part-way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n_devices: usize,
    pub tasks_per_device: usize,
    pub data_bits: Range,
    pub cycles_per_bit: Range,
    pub cpu_freq_hz: Range,
    pub energy_coeff: Range,
    pub speed_mps: Range,
    pub carrier_freq_hz: Range,
    pub bandwidth_hz: Range,
    pub noise_var_w: Range,
    pub gain: Range,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            n_devices: 5,
            tasks_per_device: 10,
            data_bits: Range(1e5, 2e6),
            cycles_per_bit: Range(200.0, 1500.0),
            cpu_freq_hz: Range::fixed(1e9),
            energy_coeff: Range::fixed(DEFAULT_ENERGY_COEFF),
            speed_mps: Range(100.0, 400.0),
            carrier_freq_hz: Range(5.9e9, 28e9),
            bandwidth_hz: Range::fixed(1e6),
            noise_var_w: Range::fixed(3e-3),
            gain: Range::fixed(1.0),
            seed: 0,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_devices == 0 || self.tasks_per_device == 0 {
            return Err(Error::invalid(
                "scenario needs at least one device and one task per device",
            ));
        }
        self.data_bits.check("data_bits", true)?;
        self.speed_mps.check("speed_mps", true)?;
        for (name, r) in [
            ("cycles_per_bit", &self.cycles_per_bit),
            ("cpu_freq_hz", &self.cpu_freq_hz),
            ("energy_coeff", &self.energy_coeff),
            ("carrier_freq_hz", &self.carrier_freq_hz),
            ("bandwidth_hz", &self.bandwidth_hz),
            ("noise_var_w", &self.noise_var_w),
            ("gain", &self.gain),
        ] {
            r.check(name, false)?;
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> ScenarioSpec {
        ScenarioSpec { seed, ..self.clone() }
    }
}

/// Draws a scenario from `spec`. Same spec and seed, same scenario.
pub fn generate_scenario(spec: &ScenarioSpec, spectral: &SpectralConfig) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut devices = Vec::with_capacity(spec.n_devices);
    let mut channels = Vec::with_capacity(spec.n_devices);
    let mut tasks = Vec::with_capacity(spec.n_devices * spec.tasks_per_device);
    for n in 0..spec.n_devices {
        devices.push(Device::new(
            n,
            spec.cpu_freq_hz.sample(&mut rng),
            spec.energy_coeff.sample(&mut rng),
        )?);
        let speed = spec.speed_mps.sample(&mut rng);
        let carrier = spec.carrier_freq_hz.sample(&mut rng);
        let bandwidth = spec.bandwidth_hz.sample(&mut rng);
        let noise = spec.noise_var_w.sample(&mut rng);
        let gain = spec.gain.sample(&mut rng);
        channels.push(Channel::new(bandwidth, gain, noise, speed, carrier)?);
        for k in 0..spec.tasks_per_device {
            let d = spec.data_bits.sample(&mut rng);
            let c = spec.cycles_per_bit.sample(&mut rng);
            tasks.push(Task::new(n, k, d, c, OffloadRatio::LOCAL)?);
        }
    }
    Scenario::new(devices, tasks, channels, spectral.clone())
}

/// Columns of every generated dataset, in order.
pub const DATASET_FEATURES: [Feature; 7] = Feature::ALL;

/// Optimises each scenario with the greedy search and emits one row per task:
/// its inputs, the chosen offloading ratio and the resulting energy.
pub fn build_dataset(specs: &[ScenarioSpec], greedy: &GreedyConfig, spectral: &SpectralConfig) -> Result<Dataset> {
    if specs.is_empty() {
        return Err(Error::invalid("no scenario specs given"));
    }
    let se = CachedSpectralModel::new(spectral.clone());
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for spec in specs {
        let scenario = generate_scenario(spec, spectral)?;
        let solution = optimize(&scenario, greedy, &se)?;
        for ((task, &ratio), &energy) in scenario
            .tasks()
            .iter()
            .zip(&solution.offload_ratios)
            .zip(&solution.per_task_energy)
        {
            let device = scenario.device_of(task);
            let channel = scenario.channel_of(task);
            rows.push(vec![
                task.data_bits,
                ratio,
                channel.speed_mps,
                channel.carrier_freq_hz,
                task.cycles_per_bit,
                device.cpu_freq_hz,
                channel.bandwidth_hz,
            ]);
            targets.push(energy);
        }
    }
    Dataset::new(DATASET_FEATURES.to_vec(), rows, targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::total_energy;
    use crate::spectral::calc_se;

    #[test]
    fn generation_is_seeded() {
        let spec = ScenarioSpec::default().with_seed(11);
        let cfg = SpectralConfig::default();
        assert_eq!(
            generate_scenario(&spec, &cfg).unwrap(),
            generate_scenario(&spec, &cfg).unwrap()
        );
        assert_ne!(
            generate_scenario(&spec, &cfg).unwrap(),
            generate_scenario(&spec.with_seed(12), &cfg).unwrap()
        );
    }

    #[test]
    fn pinned_ranges_pin_values() {
        let spec = ScenarioSpec {
            data_bits: Range::fixed(4e5),
            cycles_per_bit: Range::fixed(700.0),
            speed_mps: Range::fixed(0.0),
            ..ScenarioSpec::default()
        };
        let s = generate_scenario(&spec, &SpectralConfig::default()).unwrap();
        assert!(s
            .tasks()
            .iter()
            .all(|t| t.data_bits == 4e5 && t.cycles_per_bit == 700.0));
        assert!(s.channels().iter().all(|c| c.speed_mps == 0.0));
    }

    #[test]
    fn speeds_stay_in_range() {
        let spec = ScenarioSpec {
            n_devices: 40,
            speed_mps: Range(100.0, 400.0),
            ..ScenarioSpec::default()
        };
        let s = generate_scenario(&spec, &SpectralConfig::default()).unwrap();
        assert!(s.channels().iter().all(|c| (100.0..=400.0).contains(&c.speed_mps)));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let cfg = SpectralConfig::default();
        let bad = ScenarioSpec {
            cpu_freq_hz: Range(2e9, 1e9),
            ..ScenarioSpec::default()
        };
        assert!(generate_scenario(&bad, &cfg).is_err());
        let bad = ScenarioSpec {
            noise_var_w: Range(0.0, 1.0),
            ..ScenarioSpec::default()
        };
        assert!(generate_scenario(&bad, &cfg).is_err());
        let bad = ScenarioSpec {
            n_devices: 0,
            ..ScenarioSpec::default()
        };
        assert!(generate_scenario(&bad, &cfg).is_err());
    }

    #[test]
    fn dataset_rows_are_self_consistent() {
        let spec = ScenarioSpec {
            noise_var_w: Range(1e-4, 2e-2),
            seed: 5,
            ..ScenarioSpec::default()
        };
        let spectral = SpectralConfig::default();
        let greedy = GreedyConfig::default();
        let ds = build_dataset(std::slice::from_ref(&spec), &greedy, &spectral).unwrap();
        assert_eq!(ds.len(), spec.n_devices * spec.tasks_per_device);
        assert_eq!(ds.features(), &Feature::ALL);

        let scenario = generate_scenario(&spec, &spectral).unwrap();
        for ((row, &y), task) in ds.rows().iter().zip(ds.targets()).zip(scenario.tasks()) {
            assert!((0.5..=1.0).contains(&row[1]));
            let device = Device {
                cpu_freq_hz: row[5],
                ..scenario.device_of(task).clone()
            };
            let channel = Channel {
                speed_mps: row[2],
                carrier_freq_hz: row[3],
                bandwidth_hz: row[6],
                ..scenario.channel_of(task).clone()
            };
            let t = Task::new(
                task.device_id,
                task.task_id,
                row[0],
                row[4],
                OffloadRatio::new(row[1]).unwrap(),
            )
            .unwrap();
            let se = calc_se(row[2], row[3], &spectral).unwrap();
            let e = total_energy(&t, &device, &channel, se).unwrap();
            assert!((e - y).abs() <= 1e-9 * y.abs(), "{e} vs {y}");
        }
        assert!(build_dataset(&[], &greedy, &spectral).is_err());
    }
}
