//! Spectral efficiency of a velocity-modulated uplink as a function of device
//! speed and carrier frequency.
//!
//! The delay-Doppler receiver itself is not modelled. Instead the Doppler
//! shift `v·f_c/c₀` is normalised by the subcarrier spacing and degrades the
//! reference SNR:
//!
//! ```text
//! ν  = v·f_c / (c₀·Δf)
//! η  = 1 / (1 + ν²)
//! se = log2(1 + snr·η)
//! ```
//!
//! This keeps the behaviour the energy model relies on: `se` depends on both
//! speed and carrier frequency, equals `log2(1 + snr)` for a stationary device
//! and decreases strictly as speed grows. Any other model can be plugged in
//! through [`SeProvider`].

use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub bandwidth_hz: f64,
    pub num_users: u32,
    pub frame_time_s: f64,
    pub subcarrier_spacing_hz: f64,
    pub light_speed_mps: f64,
    /// Reference SNR `p·h/σ²` of a stationary link (linear, not dB).
    pub snr_linear: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            bandwidth_hz: 1e6,
            num_users: 5,
            frame_time_s: 10e-3,
            subcarrier_spacing_hz: 100e3,
            light_speed_mps: 3e8,
            snr_linear: 100.0,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("frame_time_s", self.frame_time_s),
            ("subcarrier_spacing_hz", self.subcarrier_spacing_hz),
            ("light_speed_mps", self.light_speed_mps),
            ("snr_linear", self.snr_linear),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("spectral.{name} must be > 0, got {v}")));
            }
        }
        if self.num_users == 0 {
            return Err(Error::domain("spectral.num_users must be > 0"));
        }
        Ok(())
    }
}

/// Source of spectral efficiency (bits/s/Hz) for a device moving at
/// `speed_mps` on carrier `carrier_freq_hz`.
pub trait SeProvider {
    fn spectral_efficiency(&self, speed_mps: f64, carrier_freq_hz: f64) -> Result<f64>;
}

impl<F> SeProvider for F
where
    F: Fn(f64, f64) -> Result<f64>,
{
    fn spectral_efficiency(&self, speed_mps: f64, carrier_freq_hz: f64) -> Result<f64> {
        self(speed_mps, carrier_freq_hz)
    }
}

/// Same spectral efficiency regardless of mobility. Handy for fixtures.
#[derive(Debug, Clone, Copy)]
pub struct ConstantSe(pub f64);

impl SeProvider for ConstantSe {
    fn spectral_efficiency(&self, _speed_mps: f64, _carrier_freq_hz: f64) -> Result<f64> {
        Ok(self.0)
    }
}

fn check_motion(speed_mps: f64, carrier_freq_hz: f64) -> Result<()> {
    if !(speed_mps.is_finite() && speed_mps >= 0.0) {
        return Err(Error::domain(format!("speed must be finite and >= 0, got {speed_mps}")));
    }
    if !(carrier_freq_hz.is_finite() && carrier_freq_hz > 0.0) {
        return Err(Error::domain(format!(
            "carrier frequency must be > 0, got {carrier_freq_hz}"
        )));
    }
    Ok(())
}

/// Doppler shift in Hz seen by a device moving at `speed_mps` toward the receiver.
pub fn doppler_shift(speed_mps: f64, carrier_freq_hz: f64, light_speed_mps: f64) -> Result<f64> {
    check_motion(speed_mps, carrier_freq_hz)?;
    if !(light_speed_mps.is_finite() && light_speed_mps > 0.0) {
        return Err(Error::domain("light speed must be > 0"));
    }
    Ok(speed_mps * carrier_freq_hz / light_speed_mps)
}

/// Uncached spectral efficiency in bits/s/Hz.
pub fn calc_se(speed_mps: f64, carrier_freq_hz: f64, config: &SpectralConfig) -> Result<f64> {
    let shift = doppler_shift(speed_mps, carrier_freq_hz, config.light_speed_mps)?;
    let nu = shift / config.subcarrier_spacing_hz;
    let degradation = 1.0 / (1.0 + nu * nu);
    Ok((1.0 + config.snr_linear * degradation).log2())
}

/// Key quantised to six significant digits beyond the leading one, so values
/// that agree to ~1e-6 relative share an entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Quantized {
    exponent: i32,
    mantissa: i64,
}

impl Quantized {
    const DIGITS: i32 = 6;

    fn of(x: f64) -> Quantized {
        if x == 0.0 {
            return Quantized {
                exponent: 0,
                mantissa: 0,
            };
        }
        let mut exponent = x.abs().log10().floor() as i32;
        let mut mantissa = (x / 10f64.powi(exponent - Self::DIGITS)).round() as i64;
        if mantissa.abs() >= 10i64.pow(Self::DIGITS as u32 + 1) {
            exponent += 1;
            mantissa = (x / 10f64.powi(exponent - Self::DIGITS)).round() as i64;
        }
        Quantized { exponent, mantissa }
    }
}

/// Memo of spectral-efficiency evaluations keyed on (speed, carrier frequency).
///
/// A cache is meant to serve a single [`SpectralConfig`]. Readers may run
/// concurrently; inserts take the write lock.
#[derive(Debug, Default)]
pub struct SeCache {
    entries: RwLock<HashMap<(Quantized, Quantized), f64>>,
}

impl SeCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("se cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.entries.write().expect("se cache poisoned").clear();
    }
}

/// [`calc_se`] behind `cache`: the first evaluation for a key is stored and
/// every later lookup returns exactly that value.
pub fn cached_calc_se(speed_mps: f64, carrier_freq_hz: f64, config: &SpectralConfig, cache: &SeCache) -> Result<f64> {
    check_motion(speed_mps, carrier_freq_hz)?;
    let key = (Quantized::of(speed_mps), Quantized::of(carrier_freq_hz));
    if let Some(&se) = cache.entries.read().expect("se cache poisoned").get(&key) {
        return Ok(se);
    }
    let se = calc_se(speed_mps, carrier_freq_hz, config)?;
    let mut entries = cache.entries.write().expect("se cache poisoned");
    Ok(*entries.entry(key).or_insert(se))
}

/// The surrogate model as an [`SeProvider`], without caching.
#[derive(Debug, Clone, Default)]
pub struct SpectralModel {
    pub config: SpectralConfig,
}

impl SpectralModel {
    pub fn new(config: SpectralConfig) -> Self {
        SpectralModel { config }
    }
}

impl SeProvider for SpectralModel {
    fn spectral_efficiency(&self, speed_mps: f64, carrier_freq_hz: f64) -> Result<f64> {
        calc_se(speed_mps, carrier_freq_hz, &self.config)
    }
}

/// The surrogate model with an owned cache.
#[derive(Debug, Default)]
pub struct CachedSpectralModel {
    config: SpectralConfig,
    cache: SeCache,
}

impl CachedSpectralModel {
    pub fn new(config: SpectralConfig) -> Self {
        CachedSpectralModel {
            config,
            cache: SeCache::new(),
        }
    }

    pub fn config(&self) -> &SpectralConfig {
        &self.config
    }

    pub fn cache(&self) -> &SeCache {
        &self.cache
    }
}

impl SeProvider for CachedSpectralModel {
    fn spectral_efficiency(&self, speed_mps: f64, carrier_freq_hz: f64) -> Result<f64> {
        cached_calc_se(speed_mps, carrier_freq_hz, &self.config, &self.cache)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn doppler_examples() {
        assert_eq!(doppler_shift(0.0, 28e9, 3e8).unwrap(), 0.0);
        assert!((doppler_shift(300.0, 3e8, 3e8).unwrap() - 300.0).abs() < 1e-9);
        assert!((doppler_shift(100.0, 3e9, 3e8).unwrap() - 1000.0).abs() < 1e-9);
        assert!(doppler_shift(-1.0, 3e9, 3e8).is_err());
    }

    #[test]
    fn stationary_device_gets_full_snr() {
        let cfg = SpectralConfig::default();
        for fc in [1e8, 2.4e9, 28e9] {
            assert_eq!(calc_se(0.0, fc, &cfg).unwrap(), 101f64.log2());
        }
        assert!((101f64.log2() - 6.6582).abs() < 1e-4);
    }

    #[test]
    fn unit_normalized_doppler_halves_snr() {
        let cfg = SpectralConfig::default();
        // ν = v·f_c/(c₀·Δf) = 1  ⇔  v = Δf·c₀/f_c
        let fc = 3e9;
        let v = cfg.subcarrier_spacing_hz * cfg.light_speed_mps / fc;
        let se = calc_se(v, fc, &cfg).unwrap();
        assert!((se - 51f64.log2()).abs() < 1e-12);
        assert!((se - 5.6724).abs() < 1e-4);
    }

    #[test]
    fn faster_devices_get_less_se() {
        let cfg = SpectralConfig::default();
        for fc in [1e8, 9e8, 2.4e9, 5.9e9, 28e9, 60e9] {
            assert!(calc_se(400.0, fc, &cfg).unwrap() < calc_se(100.0, fc, &cfg).unwrap());
        }
    }

    #[test]
    fn finite_difference_slope_is_negative() {
        let cfg = SpectralConfig::default();
        for fc in [9e8, 5.9e9, 28e9] {
            let mut v = 0.0;
            while v < 500.0 {
                let h = 1.0;
                let slope = (calc_se(v + h, fc, &cfg).unwrap() - calc_se(v, fc, &cfg).unwrap()) / h;
                assert!(slope < 0.0, "slope {slope} at v={v} fc={fc}");
                v += 5.0;
            }
        }
    }

    #[test]
    fn cache_examples() {
        let cfg = SpectralConfig::default();
        let cache = SeCache::new();
        assert!(cache.is_empty());
        let a = cached_calc_se(120.0, 28e9, &cfg, &cache).unwrap();
        assert_eq!(cache.len(), 1);
        let b = cached_calc_se(120.0, 28e9, &cfg, &cache).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(cache.len(), 1);
        let c = cached_calc_se(120.0, 5.9e9, &cfg, &cache).unwrap();
        assert_eq!(cache.len(), 2);
        assert_ne!(a, c);
        assert!(cached_calc_se(-5.0, 28e9, &cfg, &cache).is_err());
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn quantization_is_relative() {
        assert_eq!(Quantized::of(28e9), Quantized::of(28e9 * (1.0 + 1e-9)));
        assert_ne!(Quantized::of(28e9), Quantized::of(28e9 * (1.0 + 1e-5)));
        assert_eq!(Quantized::of(0.5e-3), Quantized::of(0.5e-3 * (1.0 + 1e-9)));
        assert_ne!(Quantized::of(100.0), Quantized::of(100.001));
        // mantissa rounding into the next decade
        assert_eq!(Quantized::of(9.99999999), Quantized::of(10.0));
    }

    #[test]
    fn cached_model_is_a_provider() {
        let m = CachedSpectralModel::new(SpectralConfig::default());
        let x = m.spectral_efficiency(250.0, 28e9).unwrap();
        assert_eq!(x, SpectralModel::default().spectral_efficiency(250.0, 28e9).unwrap());
        assert_eq!(m.cache().len(), 1);
    }

    proptest! {
        #[test]
        fn se_is_finite_and_positive(
            v in 0.0..1e5f64,
            fc in 1e6..1e11f64,
            snr in 1e-3..1e6f64,
        ) {
            let cfg = SpectralConfig { snr_linear: snr, ..SpectralConfig::default() };
            let se = calc_se(v, fc, &cfg).unwrap();
            prop_assert!(se.is_finite() && se > 0.0);
        }

        #[test]
        fn cache_is_transparent(
            pool in proptest::collection::vec((0.0..500.0f64, 1e8..6e10f64), 1..8),
            picks in proptest::collection::vec(0usize..8, 1..40),
        ) {
            let cfg = SpectralConfig::default();
            let cache = SeCache::new();
            for p in picks {
                let (v, fc) = pool[p % pool.len()];
                let cached = cached_calc_se(v, fc, &cfg, &cache).unwrap();
                let plain = calc_se(v, fc, &cfg).unwrap();
                prop_assert_eq!(cached.to_bits(), plain.to_bits());
            }
            prop_assert!(cache.len() <= pool.len());
        }
    }
}
