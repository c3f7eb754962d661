use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::trace::{domain_digest, TraceHeader, TraceRecord};
use super::{ArtifactInput, FrameInput, Monitor, MonitorError};
use crate::planner::DomainDef;

/// First place where a re-run disagrees with the recording.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    /// Zero-based record position.
    pub index: usize,
    pub frame: u64,
    pub field: String,
    pub recorded: String,
    pub replayed: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub records: usize,
    pub replayed: usize,
    pub rejected: usize,
    pub divergence: Option<Divergence>,
}

impl ReplayReport {
    pub fn is_identical(&self) -> bool {
        self.divergence.is_none()
    }
}

/// Rebuilds the monitor from the header (checking the domain digest) and re-runs every decided
/// frame on its recorded inputs: raw posterior, recorded artifact score, context override.
/// Decision fields are compared on their serialized form; latency is not compared.
/// Rejected records are counted and skipped, since rejection never touches monitor state.
pub fn replay(header: &TraceHeader, records: &[TraceRecord]) -> Result<ReplayReport, MonitorError> {
    let digest = domain_digest(&header.domain);
    if digest != header.domain_sha256 {
        return Err(MonitorError::Config(format!("domain digest mismatch: header says {}, text hashes to {digest}", header.domain_sha256)));
    }
    let domain = DomainDef::parse(&header.domain)?.with_single_valued(header.single_valued.iter().cloned())?;
    let mut monitor = Monitor::new(
        header.config.clone(),
        Arc::new(domain),
        &header.objects,
        header.init.clone(),
        header.default_ctx.clone(),
        header.rules.clone(),
    )?;

    let mut report = ReplayReport { records: records.len(), replayed: 0, rejected: 0, divergence: None };
    for (index, rec) in records.iter().enumerate() {
        if rec.rejected.is_some() {
            report.rejected += 1;
            continue;
        }
        let diverge = |field: &str, recorded: String, replayed: String| Divergence {
            index,
            frame: rec.frame,
            field: field.into(),
            recorded,
            replayed,
        };
        let (Some(raw), Some(decision)) = (rec.raw, rec.decision.as_ref()) else {
            report.divergence = Some(diverge("decision", "missing".into(), "present".into()));
            return Ok(report);
        };
        let input = FrameInput {
            frame: rec.frame,
            posterior: raw,
            artifact: decision.measurements.artifact.map_or(ArtifactInput::Absent, ArtifactInput::Score),
            ctx: rec.ctx.clone(),
            label: rec.label,
        };
        let (_, again) = match monitor.step(&input) {
            Ok(v) => v,
            Err(e) => {
                report.divergence = Some(diverge("decision", "decided".into(), format!("error: {e}")));
                return Ok(report);
            }
        };
        report.replayed += 1;
        let json = |v: &dyn erased::Json| v.to_json();
        let fields: [(&str, String, String); 4] = [
            ("timestamp_ms", rec.timestamp_ms.to_string(), again.timestamp_ms.to_string()),
            ("calibrated", json(&rec.calibrated), json(&again.calibrated)),
            ("decision", json(&rec.decision), json(&again.decision)),
            ("plan", json(&rec.plan), json(&again.plan)),
        ];
        if let Some((field, a, b)) = fields.into_iter().find(|(_, a, b)| a != b) {
            report.divergence = Some(diverge(field, a, b));
            return Ok(report);
        }
    }
    Ok(report)
}

mod erased {
    pub trait Json {
        fn to_json(&self) -> String;
    }

    impl<T: serde::Serialize> Json for T {
        fn to_json(&self) -> String {
            serde_json::to_string(self).expect("trace fields serialize")
        }
    }
}
