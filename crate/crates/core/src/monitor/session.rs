use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::decision::{Probs, Verdict};
use super::trace::{TraceError, TraceRecord};
use super::{FrameInput, Monitor, MonitorError};
use crate::intent::{argmax, Action};
use crate::metrics::SafetyLedger;

/// An input frame that could not be turned into a [`FrameInput`] (e.g. a malformed line).
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedFrame {
    pub frame: u64,
    pub raw: Option<Probs>,
    pub label: Option<Action>,
    pub reason: String,
}

/// Step latency distribution, microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: usize,
    pub mean_us: f64,
    pub p50_us: f64,
    pub p95_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
    /// Steps per second at the mean latency.
    pub decisions_per_sec: f64,
}

impl LatencyStats {
    /// Nearest-rank percentiles.
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let rank = |q: f64| s[((q * n as f64).ceil() as usize).clamp(1, n) - 1];
        let mean = s.iter().sum::<f64>() / n as f64;
        Self {
            count: n,
            mean_us: mean,
            p50_us: rank(0.50),
            p95_us: rank(0.95),
            p99_us: rank(0.99),
            max_us: s[n - 1],
            decisions_per_sec: if mean > 0.0 { 1e6 / mean } else { f64::INFINITY },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub frames: u64,
    pub rejected: u64,
    pub executed: u64,
    pub halted: u64,
    /// Labeled frames only: decoder correctness against the gate's intervention.
    pub ledger: SafetyLedger,
    /// Halt causes over all frames.
    pub frame_causes: BTreeMap<String, u64>,
    pub latency: LatencyStats,
    #[serde(skip)]
    pub latencies_us: Vec<f64>,
}

impl SessionSummary {
    pub fn intervention_rate(&self) -> f64 {
        let decided = self.executed + self.halted;
        if decided == 0 {
            0.0
        } else {
            self.halted as f64 / decided as f64
        }
    }
}

/// Drives the monitor over a frame stream in order, handing every trace record to `sink`.
/// Frames with bad input become rejected records; setup errors (e.g. a channel mismatch)
/// abort the session.
pub fn run_session<I, F>(monitor: &mut Monitor, frames: I, mut sink: F) -> Result<SessionSummary, MonitorError>
where
    I: IntoIterator<Item = Result<FrameInput, RejectedFrame>>,
    F: FnMut(TraceRecord) -> Result<(), TraceError>,
{
    let mut out = SessionSummary::default();
    for item in frames {
        out.frames += 1;
        let input = match item {
            Ok(input) => input,
            Err(r) => {
                out.rejected += 1;
                sink(TraceRecord::rejected(r.frame, r.raw, r.label, r.reason))?;
                continue;
            }
        };
        let (decision, record) = match monitor.step(&input) {
            Ok(v) => v,
            Err(e) if e.is_frame_error() => {
                out.rejected += 1;
                sink(TraceRecord::rejected(input.frame, Some(input.posterior), input.label, e.to_string()))?;
                continue;
            }
            Err(e) => return Err(e),
        };
        out.latencies_us.push(record.latency_us);
        let halted = decision.verdict == Verdict::Halt;
        if halted {
            out.halted += 1;
            *out.frame_causes.entry(decision.cause.to_string()).or_default() += 1;
        } else {
            out.executed += 1;
        }
        if let Some(truth) = input.label {
            let correct = Action::ALL[argmax(&input.posterior)] == truth;
            out.ledger.record(correct, halted);
            if halted {
                out.ledger.record_cause(decision.cause.as_str());
            }
        }
        sink(record)?;
    }
    out.latency = LatencyStats::from_samples(&out.latencies_us);
    Ok(out)
}
