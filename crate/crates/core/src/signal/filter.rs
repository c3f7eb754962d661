//! Butterworth band-pass design realized as a cascade of second-order sections.
//!
//! Sections use the transposed direct form II. Zero-phase application follows the
//! usual forward-backward scheme with odd-symmetric edge padding and steady-state
//! initial conditions, so a band-pass response is applied twice (squared magnitude,
//! zero phase).

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SignalError;

/// How a filter is applied to a finite signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Forward-backward application, no group delay.
    #[default]
    ZeroPhase,
    /// Single causal pass from rest, for the online path.
    Causal,
}

/// One second-order section, `a[0]` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z_inv2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z_inv2 * self.b[2];
        let den = self.a[0] + z_inv * self.a[1] + z_inv2 * self.a[2];
        num / den
    }

    fn dc_gain(&self) -> f64 {
        let den = self.a[0] + self.a[1] + self.a[2];
        (self.b[0] + self.b[1] + self.b[2]) / den
    }

    /// Filter state reached after a unit step settles.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[2] * g;
        [g - self.b[0], z2]
    }
}

/// A cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    sections: Vec<Biquad>,
}

impl SosFilter {
    pub fn from_sections(sections: Vec<Biquad>) -> Self {
        Self { sections }
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Digital Butterworth band-pass of the given prototype order (the cascade has
    /// `order` sections, i.e. `2 * order` poles), via bilinear transform with
    /// pre-warped band edges. Unit gain at the geometric center frequency.
    pub fn butter_bandpass(order: usize, low_hz: f64, high_hz: f64, sample_rate_hz: f64) -> Result<Self, SignalError> {
        validate_band(low_hz, high_hz, sample_rate_hz)?;
        if order == 0 {
            return Err(SignalError::InvalidConfig("filter order must be at least 1".into()));
        }
        let fs2 = 2.0 * sample_rate_hz;
        let w_lo = fs2 * (PI * low_hz / sample_rate_hz).tan();
        let w_hi = fs2 * (PI * high_hz / sample_rate_hz).tan();
        let bw = w_hi - w_lo;
        let w0_sq = w_lo * w_hi;

        let mut poles = Vec::with_capacity(2 * order);
        for k in 1..=order {
            let theta = PI * (2 * k + order - 1) as f64 / (2 * order) as f64;
            let proto = Complex64::from_polar(1.0, theta);
            let half = proto * (bw / 2.0);
            let disc = (half * half - w0_sq).sqrt();
            for s in [half + disc, half - disc] {
                poles.push((fs2 + s) / (fs2 - s));
            }
        }

        let scale = 1e-12;
        let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > scale).collect();
        let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= scale).map(|p| p.re).collect();
        complex.sort_by(|x, y| x.norm().total_cmp(&y.norm()).then(x.arg().total_cmp(&y.arg())));
        real.sort_by(f64::total_cmp);

        let mut sections = Vec::with_capacity(order);
        for p in complex {
            sections.push(Biquad { b: [1.0, 0.0, -1.0], a: [1.0, -2.0 * p.re, p.norm_sqr()] });
        }
        for pair in real.chunks(2) {
            let (p1, p2) = (pair[0], *pair.get(1).unwrap_or(&0.0));
            sections.push(Biquad { b: [1.0, 0.0, -1.0], a: [1.0, -(p1 + p2), p1 * p2] });
        }

        let mut filter = Self { sections };
        let center = 2.0 * (w0_sq.sqrt() / fs2).atan();
        let gain = filter.response_at(center).norm();
        for b in filter.sections[0].b.iter_mut() {
            *b /= gain;
        }
        Ok(filter)
    }

    fn response_at(&self, omega: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -omega);
        self.sections.iter().fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    /// Complex frequency response at `freq_hz`.
    pub fn frequency_response(&self, freq_hz: f64, sample_rate_hz: f64) -> Complex64 {
        self.response_at(2.0 * PI * freq_hz / sample_rate_hz)
    }

    /// Single-pass magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        self.frequency_response(freq_hz, sample_rate_hz).norm()
    }

    pub fn apply(&self, x: &[f64], mode: FilterMode) -> Vec<f64> {
        match mode {
            FilterMode::ZeroPhase => self.filtfilt(x),
            FilterMode::Causal => self.filter(x),
        }
    }

    /// Causal filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut state = vec![[0.0; 2]; self.sections.len()];
        let mut y = x.to_vec();
        self.run(&mut y, &mut state);
        y
    }

    fn run(&self, y: &mut [f64], state: &mut [[f64; 2]]) {
        for (s, z) in self.sections.iter().zip(state.iter_mut()) {
            let [b0, b1, b2] = s.b;
            let [_, a1, a2] = s.a;
            let (mut z1, mut z2) = (z[0], z[1]);
            for v in y.iter_mut() {
                let x = *v;
                let out = b0 * x + z1;
                z1 = b1 * x - a1 * out + z2;
                z2 = b2 * x - a2 * out;
                *v = out;
            }
            *z = [z1, z2];
        }
    }

    /// Steady-state section states for a unit step input, scaled through the cascade.
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let [z1, z2] = s.step_state();
                let out = [z1 * scale, z2 * scale];
                scale *= s.dc_gain();
                out
            })
            .collect()
    }

    fn pad_len(&self, n: usize) -> usize {
        let trailing_zero = |c: &Biquad, k: usize| c.b[k] == 0.0;
        let zb = self.sections.iter().filter(|s| trailing_zero(s, 2)).count();
        let za = self.sections.iter().filter(|s| s.a[2] == 0.0).count();
        let nominal = 3 * (2 * self.sections.len() + 1 - zb.min(za));
        nominal.min(n.saturating_sub(1))
    }

    /// Zero-phase forward-backward filtering.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = self.pad_len(n);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let zi = self.step_states();
        let seeded = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();

        let mut state = seeded(ext[0]);
        self.run(&mut ext, &mut state);
        ext.reverse();
        let mut state = seeded(ext[0]);
        self.run(&mut ext, &mut state);
        ext.reverse();
        ext.drain(..pad);
        ext.truncate(n);
        ext
    }
}

pub(crate) fn validate_band(low_hz: f64, high_hz: f64, sample_rate_hz: f64) -> Result<(), SignalError> {
    let nyquist = sample_rate_hz / 2.0;
    if !(low_hz.is_finite() && high_hz.is_finite() && sample_rate_hz.is_finite())
        || low_hz <= 0.0
        || low_hz >= high_hz
        || high_hz >= nyquist
    {
        return Err(SignalError::InvalidBand { low_hz, high_hz, nyquist_hz: nyquist });
    }
    Ok(())
}
