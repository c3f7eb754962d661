use serde::{Deserialize, Serialize};

use super::{filter::SosFilter, EegWindow, FilterMode, RawEeg, SignalError, VARIANCE_FLOOR};

/// Preprocessing parameters: band-pass, optional crop, CAR, per-window z-score, windowing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub band_hz: (f64, f64),
    pub filter_order: usize,
    pub filter_mode: FilterMode,
    /// Crop to `[start, end)` seconds after filtering, e.g. the motor-imagery period.
    pub crop_s: Option<(f64, f64)>,
    pub window_ms: f64,
    pub stride_ms: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            band_hz: (8.0, 30.0),
            filter_order: 4,
            filter_mode: FilterMode::ZeroPhase,
            crop_s: None,
            window_ms: 1000.0,
            stride_ms: 100.0,
        }
    }
}

impl PreprocessConfig {
    /// Trial layout of the four-class motor-imagery recordings: crop to the 2-6 s imagery period.
    pub fn motor_imagery_trial() -> Self {
        Self { crop_s: Some((2.0, 6.0)), ..Self::default() }
    }

    pub fn window_samples(&self, sample_rate_hz: f64) -> usize {
        (self.window_ms / 1000.0 * sample_rate_hz).round() as usize
    }

    pub fn stride_samples(&self, sample_rate_hz: f64) -> usize {
        (self.stride_ms / 1000.0 * sample_rate_hz).round() as usize
    }
}

/// Z-score each row in place with its own mean and (floored) standard deviation.
pub fn zscore_rows(rows: &mut [Vec<f64>]) {
    for row in rows.iter_mut() {
        let n = row.len() as f64;
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.max(VARIANCE_FLOOR).sqrt();
        for v in row.iter_mut() {
            *v = (*v - mean) / sd;
        }
    }
}

/// Band-pass, crop, common-average reference, then cut z-scored windows at the configured stride.
pub fn preprocess(raw: &RawEeg, cfg: &PreprocessConfig) -> Result<Vec<EegWindow>, SignalError> {
    let fs = raw.sample_rate_hz();
    let window = cfg.window_samples(fs);
    let stride = cfg.stride_samples(fs);
    if window == 0 || stride == 0 {
        return Err(SignalError::InvalidConfig(format!(
            "window ({} ms) and stride ({} ms) must each span at least one sample",
            cfg.window_ms, cfg.stride_ms
        )));
    }
    let (lo, hi) = cfg.band_hz;
    let filter = SosFilter::butter_bandpass(cfg.filter_order, lo, hi, fs)?;

    let (start, end) = match cfg.crop_s {
        Some((a, b)) => {
            let start = (a * fs).round().max(0.0) as usize;
            let end = (b * fs).round() as usize;
            // Negated so that NaN bounds are rejected too.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(a < b) || end > raw.samples() {
                return Err(SignalError::InsufficientSamples { needed: end.max(start + window), available: raw.samples() });
            }
            (start, end)
        }
        None => (0, raw.samples()),
    };
    let available = end - start;
    if available < window {
        return Err(SignalError::InsufficientSamples { needed: window, available });
    }

    let mut rows: Vec<Vec<f64>> = raw.rows().map(|r| filter.apply(r, cfg.filter_mode)[start..end].to_vec()).collect();

    let channels = rows.len() as f64;
    for t in 0..available {
        let mean = rows.iter().map(|r| r[t]).sum::<f64>() / channels;
        for r in rows.iter_mut() {
            r[t] -= mean;
        }
    }

    let count = (available - window) / stride + 1;
    let mut windows = Vec::with_capacity(count);
    for k in 0..count {
        let offset = k * stride;
        let mut seg: Vec<Vec<f64>> = rows.iter().map(|r| r[offset..offset + window].to_vec()).collect();
        zscore_rows(&mut seg);
        windows.push(EegWindow::new(seg, fs, k as u64)?);
    }
    Ok(windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, fs: f64, n: usize, amp: f64) -> Vec<f64> {
        (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / fs).sin()).collect()
    }

    #[test]
    fn four_seconds_give_thirty_one_windows() {
        let raw = RawEeg::new(vec![sine(10.0, 250.0, 1000, 1.0), sine(12.0, 250.0, 1000, 2.0)], 250.0).unwrap();
        let windows = preprocess(&raw, &PreprocessConfig::default()).unwrap();
        assert_eq!(windows.len(), 31);
        assert!(windows.iter().all(|w| w.samples() == 250 && w.channels() == 2));
        assert_eq!(windows.last().unwrap().t_index(), 30);
    }

    #[test]
    fn constant_signal_becomes_zeros() {
        let raw = RawEeg::new(vec![vec![5.0; 600]; 3], 250.0).unwrap();
        let windows = preprocess(&raw, &PreprocessConfig::default()).unwrap();
        for w in &windows {
            assert!(w.as_slice().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn short_signal_is_an_error() {
        let raw = RawEeg::new(vec![vec![0.0; 200]], 250.0).unwrap();
        assert_eq!(preprocess(&raw, &PreprocessConfig::default()), Err(SignalError::InsufficientSamples { needed: 250, available: 200 }));
    }

    #[test]
    fn crop_selects_imagery_period() {
        let raw = RawEeg::new(vec![sine(10.0, 250.0, 1875, 1.0), sine(20.0, 250.0, 1875, 1.0)], 250.0).unwrap();
        let windows = preprocess(&raw, &PreprocessConfig::motor_imagery_trial()).unwrap();
        assert_eq!(windows.len(), 31);
        let short = RawEeg::new(vec![vec![0.0; 1000]], 250.0).unwrap();
        assert!(preprocess(&short, &PreprocessConfig::motor_imagery_trial()).is_err());
    }

    #[test]
    fn windows_are_zscored_and_car_applied() {
        let n = 1000;
        let raw = RawEeg::new(vec![sine(10.0, 250.0, n, 3.0), sine(17.0, 250.0, n, 1.0), sine(23.0, 250.0, n, 0.5)], 250.0).unwrap();
        let windows = preprocess(&raw, &PreprocessConfig::default()).unwrap();
        for w in &windows {
            for row in w.rows() {
                let m = row.iter().sum::<f64>() / row.len() as f64;
                let v = row.iter().map(|x| (x - m).powi(2)).sum::<f64>() / row.len() as f64;
                assert!(m.abs() < 1e-9 && (v - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn passband_and_stopband_retention() {
        let fs = 250.0;
        let n = 2500;
        let filter = SosFilter::butter_bandpass(4, 8.0, 30.0, fs).unwrap();
        // Zero-phase retention equals the squared single-pass magnitude.
        let in_band = filter.magnitude(20.0, fs).powi(2);
        let out_band = filter.magnitude(2.0, fs).powi(2);
        assert!(in_band >= 0.9 && out_band <= 0.1);
        let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
        for (freq, expected) in [(20.0, in_band), (2.0, out_band)] {
            let x = sine(freq, fs, n, 1.0);
            let y = filter.filtfilt(&x);
            let ratio = rms(&y[500..2000]) / rms(&x[500..2000]);
            assert!((ratio - expected).abs() < 2e-3, "{freq} Hz: {ratio} vs {expected}");
        }
    }

    #[test]
    fn preprocessing_is_deterministic() {
        let raw = RawEeg::new(vec![sine(9.0, 250.0, 700, 1.0), sine(21.0, 250.0, 700, 1.5)], 250.0).unwrap();
        let a = preprocess(&raw, &PreprocessConfig::default()).unwrap();
        let b = preprocess(&raw, &PreprocessConfig::default()).unwrap();
        let bits = |w: &[EegWindow]| w.iter().flat_map(|x| x.as_slice().iter().map(|v| v.to_bits())).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
}
