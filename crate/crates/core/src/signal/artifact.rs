use serde::{Deserialize, Serialize};

use super::filter::{validate_band, SosFilter};
use super::{preprocess, EegWindow, PreprocessConfig, RawEeg, SignalError, VARIANCE_FLOOR};

/// The EMG-contaminated band whose energy drives the artifact score.
pub const EMG_BAND_HZ: (f64, f64) = (20.0, 45.0);

const BAND_ORDER: usize = 4;

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn rms_per_channel(window: &EegWindow, filter: &SosFilter) -> Vec<f64> {
    window.rows().map(|row| rms(&filter.filtfilt(row))).collect()
}

/// Per-channel RMS of the zero-phase band-filtered window.
pub fn band_rms(window: &EegWindow, band_lo_hz: f64, band_hi_hz: f64) -> Result<Vec<f64>, SignalError> {
    validate_band(band_lo_hz, band_hi_hz, window.sample_rate_hz())?;
    let filter = SosFilter::butter_bandpass(BAND_ORDER, band_lo_hz, band_hi_hz, window.sample_rate_hz())?;
    Ok(rms_per_channel(window, &filter))
}

/// Per-channel mean and standard deviation of EMG-band RMS over a calibration segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineStats {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl BaselineStats {
    /// Seconds of signal used by [`BaselineStats::from_session`].
    pub const DEFAULT_SEGMENT_S: f64 = 10.0;

    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self, SignalError> {
        if mean.is_empty() || mean.len() != std.len() {
            return Err(SignalError::ChannelMismatch { expected: mean.len(), actual: std.len() });
        }
        if mean.iter().chain(&std).any(|v| !v.is_finite()) {
            return Err(SignalError::InvalidConfig("baseline statistics must be finite".into()));
        }
        let floor = VARIANCE_FLOOR.sqrt();
        let std = std.into_iter().map(|s| s.max(floor)).collect();
        Ok(Self { mean, std })
    }

    /// Statistics of EMG-band RMS across the given windows (population variance, floored).
    pub fn from_windows(windows: &[EegWindow]) -> Result<Self, SignalError> {
        let first = windows.first().ok_or(SignalError::InsufficientSamples { needed: 1, available: 0 })?;
        let (lo, hi) = EMG_BAND_HZ;
        let filter = SosFilter::butter_bandpass(BAND_ORDER, lo, hi, first.sample_rate_hz())?;
        let channels = first.channels();
        let mut sum = vec![0.0; channels];
        let mut sum_sq = vec![0.0; channels];
        for w in windows {
            if w.channels() != channels {
                return Err(SignalError::ChannelMismatch { expected: channels, actual: w.channels() });
            }
            for (c, r) in rms_per_channel(w, &filter).into_iter().enumerate() {
                sum[c] += r;
                sum_sq[c] += r * r;
            }
        }
        let n = windows.len() as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sum_sq.iter().zip(&mean).map(|(sq, m)| (sq / n - m * m).max(VARIANCE_FLOOR).sqrt()).collect();
        Self::new(mean, std)
    }

    /// Baseline from the first ten seconds of a clean session, preprocessed with `cfg`.
    pub fn from_session(raw: &RawEeg, cfg: &PreprocessConfig) -> Result<Self, SignalError> {
        let end = ((Self::DEFAULT_SEGMENT_S * raw.sample_rate_hz()).round() as usize).min(raw.samples());
        let segment = raw.slice(0, end)?;
        let cfg = PreprocessConfig { crop_s: None, ..cfg.clone() };
        Self::from_windows(&preprocess(&segment, &cfg)?)
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    /// Baseline with channels reordered the same way as [`EegWindow::permuted`].
    pub fn permuted(&self, order: &[usize]) -> Result<Self, SignalError> {
        if order.len() != self.channels() {
            return Err(SignalError::ChannelMismatch { expected: self.channels(), actual: order.len() });
        }
        Self::new(order.iter().map(|&c| self.mean[c]).collect(), order.iter().map(|&c| self.std[c]).collect())
    }
}

fn aggregate(rms: &[f64], baseline: &BaselineStats) -> f64 {
    let total: f64 = rms.iter().zip(baseline.mean.iter().zip(&baseline.std)).map(|(r, (m, s))| (r - m) / s).sum();
    total / rms.len() as f64
}

/// Artifact score of one window: mean over channels of the baseline-z-scored EMG-band RMS.
pub fn artifact_score(window: &EegWindow, baseline: &BaselineStats) -> Result<f64, SignalError> {
    ArtifactScorer::new(baseline.clone(), window.sample_rate_hz())?.score(window)
}

/// Artifact scoring with the band filter designed once.
#[derive(Debug, Clone)]
pub struct ArtifactScorer {
    filter: SosFilter,
    baseline: BaselineStats,
    sample_rate_hz: f64,
}

impl ArtifactScorer {
    pub fn new(baseline: BaselineStats, sample_rate_hz: f64) -> Result<Self, SignalError> {
        let (lo, hi) = EMG_BAND_HZ;
        let filter = SosFilter::butter_bandpass(BAND_ORDER, lo, hi, sample_rate_hz)?;
        Ok(Self { filter, baseline, sample_rate_hz })
    }

    pub fn baseline(&self) -> &BaselineStats {
        &self.baseline
    }

    pub fn score(&self, window: &EegWindow) -> Result<f64, SignalError> {
        if window.channels() != self.baseline.channels() {
            return Err(SignalError::ChannelMismatch { expected: self.baseline.channels(), actual: window.channels() });
        }
        if window.sample_rate_hz() != self.sample_rate_hz {
            return Err(SignalError::InvalidConfig(format!(
                "window sampled at {} Hz, scorer designed for {} Hz",
                window.sample_rate_hz(),
                self.sample_rate_hz
            )));
        }
        Ok(aggregate(&rms_per_channel(window, &self.filter), &self.baseline))
    }
}
