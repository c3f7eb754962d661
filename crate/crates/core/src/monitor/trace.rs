//! JSON-lines traces: one header line, then one record per frame.

use std::io::{self, BufRead, BufWriter, Write};
use std::sync::mpsc::{sync_channel, SyncSender};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::decision::{MonitorDecision, Probs};
use super::{Monitor, MonitorConfig};
use crate::intent::Action;
use crate::planner::{LogicalRules, Plan, TaskContext, TypedName, WorldState};

pub const TRACE_FORMAT: &str = "intentgate-trace";
pub const TRACE_VERSION: u32 = 1;

/// Frames buffered between the session and the writer thread before the session blocks.
const QUEUE_DEPTH: usize = 1024;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace I/O: {0}")]
    Io(#[from] io::Error),
    #[error("trace line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("trace writer stopped before all records were written")]
    WriterClosed,
}

/// Hex SHA-256 of the domain text.
pub fn domain_digest(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything needed to rebuild the monitor that produced a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub config: MonitorConfig,
    /// Domain in canonical PDDL form.
    pub domain: String,
    pub domain_sha256: String,
    pub single_valued: Vec<String>,
    pub rules: LogicalRules,
    pub objects: Vec<TypedName>,
    pub init: WorldState,
    pub default_ctx: TaskContext,
}

impl TraceHeader {
    pub fn new(m: &Monitor) -> Self {
        let domain = m.domain().to_string();
        Self {
            format: TRACE_FORMAT.into(),
            version: TRACE_VERSION,
            config: m.config().clone(),
            domain_sha256: domain_digest(&domain),
            domain,
            single_valued: m.domain().single_valued.iter().cloned().collect(),
            rules: m.rules().clone(),
            objects: m.objects().to_vec(),
            init: m.initial_state().clone(),
            default_ctx: m.default_ctx().clone(),
        }
    }
}

/// One frame. Rejected frames carry the reason and no decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub frame: u64,
    pub timestamp_ms: u64,
    /// Posterior as received; absent when the input line could not be parsed.
    pub raw: Option<Probs>,
    pub calibrated: Option<Probs>,
    pub decision: Option<MonitorDecision>,
    /// Plan synthesized this frame, if planning ran and succeeded.
    pub plan: Option<Plan>,
    /// Wall-clock time of the step, microseconds.
    pub latency_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Action>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ctx: Option<TaskContext>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
}

impl TraceRecord {
    pub fn rejected(frame: u64, raw: Option<Probs>, label: Option<crate::intent::Action>, reason: String) -> Self {
        Self {
            frame,
            timestamp_ms: frame * super::FRAME_PERIOD_MS,
            raw,
            calibrated: None,
            decision: None,
            plan: None,
            latency_us: 0.0,
            label,
            ctx: None,
            rejected: Some(reason),
        }
    }
}

/// Serializes records on the caller's thread and writes them on a dedicated thread through a
/// bounded queue: a slow sink stalls the session rather than dropping or reordering lines.
pub struct TraceWriter {
    tx: Option<SyncSender<String>>,
    handle: Option<JoinHandle<io::Result<u64>>>,
}

impl TraceWriter {
    pub fn spawn<W: Write + Send + 'static>(sink: W, header: &TraceHeader) -> Result<Self, TraceError> {
        let first = serde_json::to_string(header).map_err(|e| TraceError::Format { line: 1, message: e.to_string() })?;
        let (tx, rx) = sync_channel::<String>(QUEUE_DEPTH);
        let handle = std::thread::Builder::new().name("trace-writer".into()).spawn(move || {
            let mut w = BufWriter::new(sink);
            writeln!(w, "{first}")?;
            let mut n = 0u64;
            for line in rx {
                writeln!(w, "{line}")?;
                n += 1;
            }
            w.flush()?;
            Ok(n)
        })?;
        Ok(Self { tx: Some(tx), handle: Some(handle) })
    }

    pub fn write(&self, record: &TraceRecord) -> Result<(), TraceError> {
        let line = serde_json::to_string(record).map_err(|e| TraceError::Format { line: 0, message: e.to_string() })?;
        self.tx.as_ref().expect("open until finish").send(line).map_err(|_| TraceError::WriterClosed)
    }

    /// Flushes and joins the writer; returns the number of records written.
    pub fn finish(mut self) -> Result<u64, TraceError> {
        self.close()
    }

    fn close(&mut self) -> Result<u64, TraceError> {
        drop(self.tx.take());
        match self.handle.take() {
            Some(h) => h.join().map_err(|_| TraceError::WriterClosed)?.map_err(TraceError::from),
            None => Ok(0),
        }
    }
}

impl Drop for TraceWriter {
    fn drop(&mut self) {
        // Flush whatever was queued, e.g. when a session aborts midway.
        let _ = self.close();
    }
}

/// Parses a whole trace.
pub fn read_trace<R: BufRead>(reader: R) -> Result<(TraceHeader, Vec<TraceRecord>), TraceError> {
    let mut header = None;
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fmt_err = |e: serde_json::Error| TraceError::Format { line: n, message: e.to_string() };
        if header.is_none() {
            let h: TraceHeader = serde_json::from_str(&line).map_err(fmt_err)?;
            if h.format != TRACE_FORMAT || h.version != TRACE_VERSION {
                return Err(TraceError::Format { line: n, message: format!("unsupported trace format {} v{}", h.format, h.version) });
            }
            header = Some(h);
        } else {
            records.push(serde_json::from_str(&line).map_err(fmt_err)?);
        }
    }
    let header = header.ok_or(TraceError::Format { line: 1, message: "missing header line".into() })?;
    Ok((header, records))
}

#[cfg(test)]
mod tests {
    use std::sync::{Arc, Mutex};

    use super::*;
    use crate::monitor::FrameInput;
    use crate::planner::assets;

    #[derive(Clone, Default)]
    struct Shared(Arc<Mutex<Vec<u8>>>);

    impl Write for Shared {
        fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
            self.0.lock().unwrap().extend_from_slice(buf);
            Ok(buf.len())
        }
        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(domain_digest("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn writer_round_trip() {
        let mut m = Monitor::for_problem(MonitorConfig::default(), Arc::new(assets::domain()), &assets::problem()).unwrap();
        let header = m.trace_header();
        let sink = Shared::default();
        let w = TraceWriter::spawn(sink.clone(), &header).unwrap();
        let mut written = Vec::new();
        for i in 0..2000u64 {
            let (_, rec) = m.step(&FrameInput::posterior_only(i, [0.7, 0.1, 0.1, 0.1])).unwrap();
            w.write(&rec).unwrap();
            written.push(rec);
        }
        w.write(&TraceRecord::rejected(2000, None, None, "bad line".into())).unwrap();
        assert_eq!(w.finish().unwrap(), 2001);
        let bytes = sink.0.lock().unwrap().clone();
        let (h, recs) = read_trace(bytes.as_slice()).unwrap();
        assert_eq!(h, header);
        assert_eq!(recs.len(), 2001);
        assert_eq!(&recs[..2000], &written[..]);
        assert_eq!(recs[2000].rejected.as_deref(), Some("bad line"));
    }

    #[test]
    fn read_errors_name_the_line() {
        assert!(matches!(read_trace("".as_bytes()), Err(TraceError::Format { line: 1, .. })));
        let m = Monitor::for_problem(MonitorConfig::default(), Arc::new(assets::domain()), &assets::problem()).unwrap();
        let text = format!("{}\n{{\"frame\":\n", serde_json::to_string(&m.trace_header()).unwrap());
        assert!(matches!(read_trace(text.as_bytes()), Err(TraceError::Format { line: 2, .. })));
    }
}
