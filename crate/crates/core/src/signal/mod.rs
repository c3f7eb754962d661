//! EEG representation, preprocessing, artifact scoring and noise injection.

mod artifact;
mod filter;
pub mod io;
mod noise;
mod preprocess;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use artifact::{artifact_score, band_rms, ArtifactScorer, BaselineStats, EMG_BAND_HZ};
pub use filter::{Biquad, FilterMode, SosFilter};
pub use noise::{inject_noise, NoiseSpec, NoiseWeights};
pub use preprocess::{preprocess, zscore_rows, PreprocessConfig};

/// Lower bound applied to variances before dividing by a standard deviation.
pub const VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("insufficient samples: need {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },
    #[error("invalid band [{low_hz}, {high_hz}] Hz (Nyquist {nyquist_hz} Hz)")]
    InvalidBand { low_hz: f64, high_hz: f64, nyquist_hz: f64 },
    #[error("channel count mismatch: expected {expected}, got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("non-finite sample at channel {channel}, index {index}")]
    NonFinite { channel: usize, index: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Channel-major sample matrix shared by raw recordings and windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Matrix {
    channels: usize,
    samples: usize,
    data: Vec<f64>,
}

impl Matrix {
    fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, SignalError> {
        let channels = rows.len();
        if channels == 0 {
            return Err(SignalError::InvalidShape("at least one channel required".into()));
        }
        let samples = rows[0].len();
        if samples == 0 {
            return Err(SignalError::InvalidShape("at least one sample required".into()));
        }
        let mut data = Vec::with_capacity(channels * samples);
        for (c, row) in rows.into_iter().enumerate() {
            if row.len() != samples {
                return Err(SignalError::InvalidShape(format!("channel {c} has {} samples, expected {samples}", row.len())));
            }
            if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                return Err(SignalError::NonFinite { channel: c, index: i });
            }
            data.extend(row);
        }
        Ok(Self { channels, samples, data })
    }

    fn row(&self, c: usize) -> &[f64] {
        &self.data[c * self.samples..(c + 1) * self.samples]
    }

    fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.samples)
    }
}

fn validate_rate(sample_rate_hz: f64) -> Result<(), SignalError> {
    if sample_rate_hz.is_finite() && sample_rate_hz > 0.0 {
        Ok(())
    } else {
        Err(SignalError::InvalidConfig(format!("sample rate must be positive, got {sample_rate_hz}")))
    }
}

/// A raw multichannel recording, microvolts, channels × samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEeg {
    matrix: Matrix,
    sample_rate_hz: f64,
}

impl RawEeg {
    pub fn new(rows: Vec<Vec<f64>>, sample_rate_hz: f64) -> Result<Self, SignalError> {
        validate_rate(sample_rate_hz)?;
        Ok(Self { matrix: Matrix::from_rows(rows)?, sample_rate_hz })
    }

    pub fn channels(&self) -> usize {
        self.matrix.channels
    }

    pub fn samples(&self) -> usize {
        self.matrix.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        self.matrix.row(c)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.matrix.rows()
    }

    /// Flat channel-major samples.
    pub fn as_slice(&self) -> &[f64] {
        &self.matrix.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Samples `[start, end)` of every channel.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self, SignalError> {
        if start >= end || end > self.samples() {
            return Err(SignalError::InsufficientSamples { needed: end, available: self.samples() });
        }
        let rows = self.rows().map(|r| r[start..end].to_vec()).collect();
        Self::new(rows, self.sample_rate_hz)
    }
}

/// One analysis window: channels × W samples, dimensionless after z-scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EegWindow {
    matrix: Matrix,
    sample_rate_hz: f64,
    t_index: u64,
}

impl EegWindow {
    pub fn new(rows: Vec<Vec<f64>>, sample_rate_hz: f64, t_index: u64) -> Result<Self, SignalError> {
        validate_rate(sample_rate_hz)?;
        Ok(Self { matrix: Matrix::from_rows(rows)?, sample_rate_hz, t_index })
    }

    pub fn channels(&self) -> usize {
        self.matrix.channels
    }

    pub fn samples(&self) -> usize {
        self.matrix.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn t_index(&self) -> u64 {
        self.t_index
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        self.matrix.row(c)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.matrix.rows()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.matrix.data
    }

    /// Same samples with channels reordered: output channel `i` is input channel `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self, SignalError> {
        if order.len() != self.channels() {
            return Err(SignalError::ChannelMismatch { expected: self.channels(), actual: order.len() });
        }
        let rows = order.iter().map(|&c| self.channel(c).to_vec()).collect();
        Self::new(rows, self.sample_rate_hz, self.t_index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_validates_shape_and_values() {
        assert!(RawEeg::new(vec![], 250.0).is_err());
        assert!(RawEeg::new(vec![vec![]], 250.0).is_err());
        assert!(RawEeg::new(vec![vec![1.0, 2.0], vec![1.0]], 250.0).is_err());
        assert!(matches!(RawEeg::new(vec![vec![1.0, f64::NAN]], 250.0), Err(SignalError::NonFinite { channel: 0, index: 1 })));
        assert!(RawEeg::new(vec![vec![1.0]], 0.0).is_err());
        let raw = RawEeg::new(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]], 250.0).unwrap();
        assert_eq!((raw.channels(), raw.samples()), (2, 3));
        assert_eq!(raw.channel(1), &[4.0, 5.0, 6.0]);
        assert_eq!(raw.slice(1, 3).unwrap().channel(0), &[2.0, 3.0]);
        assert!(raw.slice(2, 4).is_err());
    }
}
