//! SNR-controlled additive noise: white, 1/f-shaped (pink) and EMG-band components,
//! all derived from one Gaussian draw per channel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use super::artifact::EMG_BAND_HZ;
use super::filter::SosFilter;
use super::{RawEeg, SignalError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseWeights {
    pub white: f64,
    pub pink: f64,
    pub emg: f64,
}

impl Default for NoiseWeights {
    fn default() -> Self {
        Self { white: 0.7, pink: 0.2, emg: 0.1 }
    }
}

impl NoiseWeights {
    pub const WHITE_ONLY: Self = Self { white: 1.0, pink: 0.0, emg: 0.0 };
    pub const NONE: Self = Self { white: 0.0, pink: 0.0, emg: 0.0 };

    fn is_zero(&self) -> bool {
        self.white == 0.0 && self.pink == 0.0 && self.emg == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub target_snr_db: f64,
    #[serde(default)]
    pub weights: NoiseWeights,
    pub rng_seed: u64,
}

impl NoiseSpec {
    pub fn new(target_snr_db: f64, rng_seed: u64) -> Self {
        Self { target_snr_db, weights: NoiseWeights::default(), rng_seed }
    }

    fn validate(&self) -> Result<(), SignalError> {
        if !self.target_snr_db.is_finite() {
            return Err(SignalError::InvalidConfig(format!("target SNR must be finite, got {}", self.target_snr_db)));
        }
        let w = self.weights;
        if [w.white, w.pink, w.emg].iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(SignalError::InvalidConfig(format!("noise weights must be finite and nonnegative, got {w:?}")));
        }
        Ok(())
    }
}

/// 1/f amplitude shaping in the frequency domain; the DC bin is zeroed.
fn pink_from(white: &[f64], sample_rate_hz: f64, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = white.len();
    let mut buf: Vec<Complex64> = white.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    for (k, c) in buf.iter_mut().enumerate().skip(1) {
        let bin = k.min(n - k) as f64;
        *c /= bin * sample_rate_hz / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Adds `w_white·n + w_pink·pink(n) + w_emg·bandpass(n)` to each channel, where `n` is
/// Gaussian with power `P_s / 10^(SNR/10)` and `P_s` is the mean square of the whole clean matrix.
pub fn inject_noise(clean: &RawEeg, spec: &NoiseSpec) -> Result<RawEeg, SignalError> {
    spec.validate()?;
    if spec.weights.is_zero() {
        return Ok(clean.clone());
    }
    let fs = clean.sample_rate_hz();
    let emg_filter = if spec.weights.emg > 0.0 { Some(SosFilter::butter_bandpass(4, EMG_BAND_HZ.0, EMG_BAND_HZ.1, fs)?) } else { None };

    let data = clean.as_slice();
    let p_signal = data.iter().map(|v| v * v).sum::<f64>() / data.len() as f64;
    let p_noise = p_signal / 10f64.powf(spec.target_snr_db / 10.0);
    let normal = Normal::new(0.0, p_noise.sqrt()).map_err(|e| SignalError::InvalidConfig(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut planner = FftPlanner::new();
    let w = spec.weights;

    let rows = clean
        .rows()
        .map(|row| {
            let n: Vec<f64> = (0..row.len()).map(|_| rng.sample(normal)).collect();
            let pink = (w.pink > 0.0).then(|| pink_from(&n, fs, &mut planner));
            let emg = emg_filter.as_ref().map(|f| f.filtfilt(&n));
            row.iter()
                .enumerate()
                .map(|(i, &x)| {
                    let mut y = x + w.white * n[i];
                    if let Some(p) = &pink {
                        y += w.pink * p[i];
                    }
                    if let Some(e) = &emg {
                        y += w.emg * e[i];
                    }
                    y
                })
                .collect()
        })
        .collect();
    RawEeg::new(rows, fs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn clean(channels: usize, samples: usize) -> RawEeg {
        let rows =
            (0..channels).map(|c| (0..samples).map(|i| (2.0 * PI * (10.0 + c as f64) * i as f64 / 250.0).sin() * 20.0).collect()).collect();
        RawEeg::new(rows, 250.0).unwrap()
    }

    fn residual_power(a: &RawEeg, b: &RawEeg) -> f64 {
        let d: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).powi(2)).sum();
        d / a.as_slice().len() as f64
    }

    #[test]
    fn zero_weights_are_identity() {
        let x = clean(3, 500);
        let spec = NoiseSpec { target_snr_db: -5.0, weights: NoiseWeights::NONE, rng_seed: 1 };
        assert_eq!(inject_noise(&x, &spec).unwrap(), x);
    }

    #[test]
    fn white_noise_hits_target_snr() {
        let x = clean(4, 50_000);
        let spec = NoiseSpec { target_snr_db: 0.0, weights: NoiseWeights::WHITE_ONLY, rng_seed: 42 };
        let y = inject_noise(&x, &spec).unwrap();
        let ps = x.as_slice().iter().map(|v| v * v).sum::<f64>() / x.as_slice().len() as f64;
        let snr_db = 10.0 * (ps / residual_power(&x, &y)).log10();
        assert!(snr_db.abs() < 0.5, "{snr_db}");
    }

    #[test]
    fn lower_snr_adds_more_power() {
        let x = clean(2, 2000);
        let hi = inject_noise(&x, &NoiseSpec::new(20.0, 9)).unwrap();
        let lo = inject_noise(&x, &NoiseSpec::new(-5.0, 9)).unwrap();
        assert!(residual_power(&x, &lo) > residual_power(&x, &hi));
    }

    #[test]
    fn seeded_injection_is_bit_reproducible() {
        let x = clean(2, 1000);
        let a = inject_noise(&x, &NoiseSpec::new(5.0, 77)).unwrap();
        let b = inject_noise(&x, &NoiseSpec::new(5.0, 77)).unwrap();
        let c = inject_noise(&x, &NoiseSpec::new(5.0, 78)).unwrap();
        let bits = |r: &RawEeg| r.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn pink_component_has_no_dc_and_falls_with_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 4096;
        let white: Vec<f64> = (0..n).map(|_| rng.sample(Normal::new(0.0, 1.0).unwrap())).collect();
        let pink = pink_from(&white, 250.0, &mut FftPlanner::new());
        assert!(pink.iter().sum::<f64>().abs() < 1e-9);
        let mut buf: Vec<Complex64> = pink.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let band = |lo: usize, hi: usize| buf[lo..hi].iter().map(|c| c.norm_sqr()).sum::<f64>() / (hi - lo) as f64;
        assert!(band(10, 50) > 10.0 * band(500, 1000));
    }

    #[test]
    fn invalid_specs_rejected() {
        let x = clean(1, 100);
        assert!(inject_noise(&x, &NoiseSpec::new(f64::NAN, 0)).is_err());
        let neg = NoiseSpec { target_snr_db: 0.0, weights: NoiseWeights { white: -1.0, pink: 0.0, emg: 0.0 }, rng_seed: 0 };
        assert!(inject_noise(&x, &neg).is_err());
    }
}
