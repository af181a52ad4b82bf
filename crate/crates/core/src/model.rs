//! Time and energy model for partial offloading over an uplink whose spectral
//! efficiency depends on device speed and carrier frequency.
//!
//! A task holds `D` input bits. A fraction `l` of them is transmitted to the
//! edge server and the rest is executed on the device. The edge server is
//! modelled with unbounded capacity, so it contributes neither time nor
//! energy; only the device side is accounted for.
//!
//! All quantities are SI: Hz, bits, seconds, joules, watts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{SeProvider, SpectralConfig};

/// Effective switched capacitance used when a scenario does not specify one.
pub const DEFAULT_ENERGY_COEFF: f64 = 1e-28;

/// Upper bound on spectral efficiency accepted before evaluating `2^se`.
pub const MAX_SPECTRAL_EFFICIENCY: f64 = 64.0;

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite and > 0, got {value}")))
    }
}

/// Fraction of a task's input bits sent to the edge server. Always in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct OffloadRatio(f64);

impl OffloadRatio {
    pub const LOCAL: OffloadRatio = OffloadRatio(0.0);
    pub const FULL: OffloadRatio = OffloadRatio(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(OffloadRatio(value))
        } else {
            Err(Error::domain(format!("offload ratio must lie in [0, 1], got {value}")))
        }
    }

    /// Clamps into `[0, 1]`. NaN maps to 0.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            OffloadRatio(0.0)
        } else {
            OffloadRatio(value.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for OffloadRatio {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        OffloadRatio::new(value)
    }
}

impl From<OffloadRatio> for f64 {
    fn from(r: OffloadRatio) -> f64 {
        r.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub id: usize,
    pub cpu_freq_hz: f64,
    /// Energy coefficient in J·s²/cycle.
    pub energy_coeff: f64,
}

impl Device {
    pub fn new(id: usize, cpu_freq_hz: f64, energy_coeff: f64) -> Result<Self> {
        let device = Device {
            id,
            cpu_freq_hz,
            energy_coeff,
        };
        device.validate()?;
        Ok(device)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("cpu_freq_hz", self.cpu_freq_hz)?;
        require_positive("energy_coeff", self.energy_coeff)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub device_id: usize,
    pub task_id: usize,
    pub data_bits: f64,
    pub cycles_per_bit: f64,
    pub offload_ratio: OffloadRatio,
}

impl Task {
    pub fn new(
        device_id: usize,
        task_id: usize,
        data_bits: f64,
        cycles_per_bit: f64,
        offload_ratio: OffloadRatio,
    ) -> Result<Self> {
        let task = Task {
            device_id,
            task_id,
            data_bits,
            cycles_per_bit,
            offload_ratio,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.data_bits.is_finite() && self.data_bits >= 0.0) {
            return Err(Error::domain(format!(
                "data_bits must be finite and >= 0, got {}",
                self.data_bits
            )));
        }
        require_positive("cycles_per_bit", self.cycles_per_bit)
    }

    pub fn with_ratio(&self, ratio: OffloadRatio) -> Task {
        Task {
            offload_ratio: ratio,
            ..self.clone()
        }
    }

    fn local_bits(&self) -> f64 {
        (1.0 - self.offload_ratio.get()) * self.data_bits
    }

    fn offloaded_bits(&self) -> f64 {
        self.offload_ratio.get() * self.data_bits
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub bandwidth_hz: f64,
    /// Channel gain, close to 1 on a path with little fading.
    pub gain: f64,
    pub noise_var_w: f64,
    pub speed_mps: f64,
    pub carrier_freq_hz: f64,
}

impl Channel {
    pub fn new(bandwidth_hz: f64, gain: f64, noise_var_w: f64, speed_mps: f64, carrier_freq_hz: f64) -> Result<Self> {
        let channel = Channel {
            bandwidth_hz,
            gain,
            noise_var_w,
            speed_mps,
            carrier_freq_hz,
        };
        channel.validate()?;
        Ok(channel)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("bandwidth_hz", self.bandwidth_hz)?;
        require_positive("gain", self.gain)?;
        require_positive("noise_var_w", self.noise_var_w)?;
        require_positive("carrier_freq_hz", self.carrier_freq_hz)?;
        if !(self.speed_mps.is_finite() && self.speed_mps >= 0.0) {
            return Err(Error::domain(format!(
                "speed_mps must be finite and >= 0, got {}",
                self.speed_mps
            )));
        }
        Ok(())
    }
}

/// N devices, each with one channel, and the tasks they hold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    devices: Vec<Device>,
    tasks: Vec<Task>,
    channels: Vec<Channel>,
    spectral: SpectralConfig,
}

impl Scenario {
    pub fn new(
        devices: Vec<Device>,
        tasks: Vec<Task>,
        channels: Vec<Channel>,
        spectral: SpectralConfig,
    ) -> Result<Self> {
        if devices.len() != channels.len() {
            return Err(Error::Shape(format!(
                "{} devices but {} channels",
                devices.len(),
                channels.len()
            )));
        }
        for d in &devices {
            d.validate()?;
        }
        for c in &channels {
            c.validate()?;
        }
        for t in &tasks {
            t.validate()?;
            if t.device_id >= devices.len() {
                return Err(Error::invalid(format!(
                    "task {} references device {} but only {} devices exist",
                    t.task_id,
                    t.device_id,
                    devices.len()
                )));
            }
        }
        spectral.validate()?;
        Ok(Scenario {
            devices,
            tasks,
            channels,
            spectral,
        })
    }

    pub fn devices(&self) -> &[Device] {
        &self.devices
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn spectral(&self) -> &SpectralConfig {
        &self.spectral
    }

    pub fn device_of(&self, task: &Task) -> &Device {
        &self.devices[task.device_id]
    }

    pub fn channel_of(&self, task: &Task) -> &Channel {
        &self.channels[task.device_id]
    }

    /// Copy with every task's ratio replaced. `ratios` must match the task count.
    pub fn with_ratios(&self, ratios: &[OffloadRatio]) -> Result<Scenario> {
        if ratios.len() != self.tasks.len() {
            return Err(Error::Shape(format!(
                "{} ratios for {} tasks",
                ratios.len(),
                self.tasks.len()
            )));
        }
        let mut out = self.clone();
        for (t, r) in out.tasks.iter_mut().zip(ratios) {
            t.offload_ratio = *r;
        }
        Ok(out)
    }

    /// Applies `f` to every channel and revalidates.
    pub fn map_channels(&self, f: impl Fn(&mut Channel)) -> Result<Scenario> {
        let mut out = self.clone();
        out.channels.iter_mut().for_each(f);
        Scenario::new(out.devices, out.tasks, out.channels, out.spectral)
    }

    /// Applies `f` to every task and revalidates.
    pub fn map_tasks(&self, f: impl Fn(&mut Task)) -> Result<Scenario> {
        let mut out = self.clone();
        out.tasks.iter_mut().for_each(f);
        Scenario::new(out.devices, out.tasks, out.channels, out.spectral)
    }
}

fn check_se(se: f64, payload_bits: f64) -> Result<()> {
    if se.is_nan() || se > MAX_SPECTRAL_EFFICIENCY {
        return Err(Error::domain(format!(
            "spectral efficiency {se} outside (0, {MAX_SPECTRAL_EFFICIENCY}]"
        )));
    }
    if payload_bits > 0.0 && se <= 0.0 {
        return Err(Error::domain(format!(
            "spectral efficiency must be > 0 when data is offloaded, got {se}"
        )));
    }
    Ok(())
}

/// Seconds spent executing the non-offloaded share on the device.
pub fn local_time(task: &Task, device: &Device) -> Result<f64> {
    require_positive("cpu_freq_hz", device.cpu_freq_hz)?;
    require_positive("cycles_per_bit", task.cycles_per_bit)?;
    Ok(task.cycles_per_bit * task.local_bits() / device.cpu_freq_hz)
}

/// Joules spent executing the non-offloaded share on the device.
pub fn local_energy(task: &Task, device: &Device) -> Result<f64> {
    require_positive("cpu_freq_hz", device.cpu_freq_hz)?;
    require_positive("energy_coeff", device.energy_coeff)?;
    require_positive("cycles_per_bit", task.cycles_per_bit)?;
    let f = device.cpu_freq_hz;
    Ok(device.energy_coeff * task.cycles_per_bit * f * f * task.local_bits())
}

/// Uplink rate in bits/s for the given spectral efficiency.
pub fn uplink_rate(channel: &Channel, se: f64) -> Result<f64> {
    check_se(se, 1.0)?;
    require_positive("bandwidth_hz", channel.bandwidth_hz)?;
    Ok(channel.bandwidth_hz * se)
}

/// Transmit power needed to sustain `se` on this channel: `(2^se - 1)·σ²/h`.
pub fn transmit_power(channel: &Channel, se: f64) -> Result<f64> {
    check_se(se, 0.0)?;
    require_positive("gain", channel.gain)?;
    Ok((se.exp2() - 1.0) * channel.noise_var_w / channel.gain)
}

pub fn offload_time(task: &Task, channel: &Channel, se: f64) -> Result<f64> {
    let bits = task.offloaded_bits();
    check_se(se, bits)?;
    if bits == 0.0 {
        return Ok(0.0);
    }
    Ok(bits / uplink_rate(channel, se)?)
}

pub fn offload_energy(task: &Task, channel: &Channel, se: f64) -> Result<f64> {
    let bits = task.offloaded_bits();
    check_se(se, bits)?;
    if bits == 0.0 {
        return Ok(0.0);
    }
    Ok(transmit_power(channel, se)? * offload_time(task, channel, se)?)
}

/// Transmission plus local execution time; the two phases are not overlapped.
pub fn total_time(task: &Task, device: &Device, channel: &Channel, se: f64) -> Result<f64> {
    Ok(offload_time(task, channel, se)? + local_time(task, device)?)
}

pub fn total_energy(task: &Task, device: &Device, channel: &Channel, se: f64) -> Result<f64> {
    Ok(offload_energy(task, channel, se)? + local_energy(task, device)?)
}

/// Sum of per-task energy over the whole scenario, i.e. the quantity the
/// offloading optimizer minimizes.
pub fn system_total_energy(scenario: &Scenario, se: &dyn SeProvider) -> Result<f64> {
    let per_device = device_spectral_efficiencies(scenario, se)?;
    scenario.tasks().iter().try_fold(0.0, |acc, task| {
        let e = total_energy(
            task,
            scenario.device_of(task),
            scenario.channel_of(task),
            per_device[task.device_id],
        )?;
        Ok(acc + e)
    })
}

/// One spectral efficiency per device, evaluated from its channel's speed and
/// carrier frequency.
pub fn device_spectral_efficiencies(scenario: &Scenario, se: &dyn SeProvider) -> Result<Vec<f64>> {
    scenario
        .channels()
        .iter()
        .map(|c| se.spectral_efficiency(c.speed_mps, c.carrier_freq_hz))
        .collect()
}
