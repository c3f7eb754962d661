//! Raw signal files.
//!
//! CSV: a header line `# channels=C samples=T sample_rate_hz=FS`, then one comma-separated
//! row of T decimal samples per channel.
//!
//! Binary: magic `RAWEEG1\0`, `u32` channel count, `u64` sample count, `f64` sample rate,
//! then C×T little-endian `f64` samples, channel-major.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{RawEeg, SignalError};

pub const BINARY_MAGIC: &[u8; 8] = b"RAWEEG1\0";

#[derive(Debug, Error)]
pub enum SignalIoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

fn format_err(line: usize, message: impl Into<String>) -> SignalIoError {
    SignalIoError::Format { line, message: message.into() }
}

fn parse_header(line: &str) -> Result<(usize, usize, f64), SignalIoError> {
    let body = line.trim().strip_prefix('#').ok_or_else(|| format_err(1, "expected header `# channels=C samples=T sample_rate_hz=FS`"))?;
    let (mut c, mut t, mut fs) = (None, None, None);
    for field in body.split_whitespace() {
        let (key, value) = field.split_once('=').ok_or_else(|| format_err(1, format!("malformed header field `{field}`")))?;
        let bad = |_| format_err(1, format!("invalid value for `{key}`: `{value}`"));
        match key {
            "channels" => c = Some(value.parse::<usize>().map_err(bad)?),
            "samples" => t = Some(value.parse::<usize>().map_err(bad)?),
            "sample_rate_hz" => fs = Some(value.parse::<f64>().map_err(|_| format_err(1, format!("invalid sample rate `{value}`")))?),
            other => return Err(format_err(1, format!("unknown header field `{other}`"))),
        }
    }
    match (c, t, fs) {
        (Some(c), Some(t), Some(fs)) => Ok((c, t, fs)),
        _ => Err(format_err(1, "header must define channels, samples and sample_rate_hz")),
    }
}

pub fn read_csv<R: BufRead>(reader: R) -> Result<RawEeg, SignalIoError> {
    let mut lines = reader.lines().enumerate();
    let io = |e| SignalIoError::Io { path: "<csv>".into(), source: e };
    let header = match lines.next() {
        Some((_, l)) => l.map_err(io)?,
        None => return Err(format_err(1, "empty file")),
    };
    let (channels, samples, fs) = parse_header(&header)?;
    let mut rows = Vec::with_capacity(channels);
    for (idx, line) in lines {
        let line = line.map_err(io)?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(col, v)| {
                v.trim().parse::<f64>().map_err(|_| format_err(lineno, format!("column {}: invalid number `{}`", col + 1, v.trim())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != samples {
            return Err(format_err(lineno, format!("expected {samples} samples, found {}", row.len())));
        }
        rows.push(row);
    }
    if rows.len() != channels {
        return Err(format_err(channels + 1, format!("expected {channels} channel rows, found {}", rows.len())));
    }
    Ok(RawEeg::new(rows, fs)?)
}

pub fn write_csv<W: Write>(raw: &RawEeg, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# channels={} samples={} sample_rate_hz={}", raw.channels(), raw.samples(), raw.sample_rate_hz())?;
    for row in raw.rows() {
        let text: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", text.join(","))?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut reader: R) -> Result<RawEeg, SignalIoError> {
    let io = |e| SignalIoError::Io { path: "<binary>".into(), source: e };
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic).map_err(io)?;
    if &magic != BINARY_MAGIC {
        return Err(format_err(0, "not a raw EEG binary file (bad magic)"));
    }
    let mut u32b = [0u8; 4];
    let mut u64b = [0u8; 8];
    reader.read_exact(&mut u32b).map_err(io)?;
    let channels = u32::from_le_bytes(u32b) as usize;
    reader.read_exact(&mut u64b).map_err(io)?;
    let samples = usize::try_from(u64::from_le_bytes(u64b)).map_err(|_| format_err(0, "sample count overflows"))?;
    reader.read_exact(&mut u64b).map_err(io)?;
    let fs = f64::from_le_bytes(u64b);
    let total = channels.checked_mul(samples).and_then(|n| n.checked_mul(8)).ok_or_else(|| format_err(0, "matrix size overflows"))?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes).map_err(io)?;
    if bytes.len() != total {
        return Err(format_err(0, format!("expected {total} data bytes, found {}", bytes.len())));
    }
    let values: Vec<f64> = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    let rows = if samples == 0 { vec![Vec::new(); channels] } else { values.chunks(samples).map(<[f64]>::to_vec).collect() };
    Ok(RawEeg::new(rows, fs)?)
}

pub fn write_binary<W: Write>(raw: &RawEeg, mut w: W) -> std::io::Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(raw.channels() as u32).to_le_bytes())?;
    w.write_all(&(raw.samples() as u64).to_le_bytes())?;
    w.write_all(&raw.sample_rate_hz().to_le_bytes())?;
    for v in raw.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a raw signal, choosing the format from the leading magic bytes.
pub fn read_path(path: &Path) -> Result<RawEeg, SignalIoError> {
    let bytes = std::fs::read(path).map_err(|e| SignalIoError::Io { path: path.display().to_string(), source: e })?;
    if bytes.starts_with(BINARY_MAGIC) {
        read_binary(bytes.as_slice())
    } else {
        read_csv(bytes.as_slice())
    }
}
