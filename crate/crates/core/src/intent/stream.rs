//! Posterior stream files.
//!
//! One record per line: `frame,grasp,release,move_to,rotate[,label]`. Lines starting with
//! `#`, blank lines and a header line beginning with `frame` are skipped. The label is an
//! action name (`GRASP`, `RELEASE`, `MOVE_TO`, `ROTATE`), an index `0..4`, or empty.
//!
//! Syntax errors are reported with line numbers. Probabilities are kept as written so that
//! a monitor can record non-simplex rows as rejected frames rather than abort a session.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Action, NUM_ACTIONS};

pub const HEADER: &str = "frame,grasp,release,move_to,rotate,label";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRecord {
    pub frame: u64,
    pub probs: [f64; NUM_ACTIONS],
    pub label: Option<Action>,
}

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Io { line: usize, source: std::io::Error },
}

fn parse_line(text: &str, line: usize) -> Result<PosteriorRecord, StreamError> {
    let err = |message: String| StreamError::Syntax { line, message };
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    if !(5..=6).contains(&fields.len()) {
        return Err(err(format!("expected 5 or 6 comma-separated fields, found {}", fields.len())));
    }
    let frame = fields[0].parse::<u64>().map_err(|_| err(format!("invalid frame index `{}`", fields[0])))?;
    let mut probs = [0.0; NUM_ACTIONS];
    for (k, slot) in probs.iter_mut().enumerate() {
        let raw = fields[k + 1];
        *slot = raw.parse::<f64>().map_err(|_| err(format!("column {}: invalid probability `{raw}`", k + 2)))?;
    }
    let label = match fields.get(5) {
        None | Some(&"") => None,
        Some(l) => Some(l.parse::<Action>().map_err(|_| err(format!("column 6: unknown label `{l}`")))?),
    };
    Ok(PosteriorRecord { frame, probs, label })
}

/// Streaming reader yielding one record per data line.
pub struct PosteriorReader<R> {
    lines: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> PosteriorReader<R> {
    pub fn new(reader: R) -> Self {
        Self { lines: reader.lines(), line: 0 }
    }
}

impl<R: BufRead> Iterator for PosteriorReader<R> {
    type Item = Result<PosteriorRecord, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let text = self.lines.next()?;
            self.line += 1;
            let text = match text {
                Ok(t) => t,
                Err(source) => return Some(Err(StreamError::Io { line: self.line, source })),
            };
            let t = text.trim();
            if t.is_empty() || t.starts_with('#') || t.to_ascii_lowercase().starts_with("frame") {
                continue;
            }
            return Some(parse_line(t, self.line));
        }
    }
}

pub fn read_all<R: BufRead>(reader: R) -> Result<Vec<PosteriorRecord>, StreamError> {
    PosteriorReader::new(reader).collect()
}

pub fn write_all<W: Write>(records: &[PosteriorRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{HEADER}")?;
    for r in records {
        let [a, b, c, d] = r.probs;
        let label = r.label.map(Action::as_str).unwrap_or("");
        writeln!(w, "{},{a:?},{b:?},{c:?},{d:?},{label}", r.frame)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits() {
        let records = vec![
            PosteriorRecord { frame: 0, probs: [0.1, 0.2, 0.3, 0.4], label: Some(Action::Rotate) },
            PosteriorRecord { frame: 1, probs: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], label: None },
        ];
        let mut buf = Vec::new();
        write_all(&records, &mut buf).unwrap();
        assert_eq!(read_all(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn comments_and_optional_labels() {
        let text = "# session\nframe,grasp,release,move_to,rotate,label\n\n3,0.7,0.1,0.1,0.1\n4,0.7,0.1,0.1,0.1,2\n5,0.7,0.1,0.1,0.1,\n";
        let r = read_all(text.as_bytes()).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!((r[0].frame, r[0].label), (3, None));
        assert_eq!(r[1].label, Some(Action::MoveTo));
        assert_eq!(r[2].label, None);
    }

    #[test]
    fn errors_name_the_line() {
        let text = "frame,grasp,release,move_to,rotate,label\n0,0.25,0.25,0.25,0.25,GRASP\n1,0.25,abc,0.25,0.25,GRASP\n";
        let e = read_all(text.as_bytes()).unwrap_err();
        assert!(matches!(e, StreamError::Syntax { line: 3, .. }), "{e}");
        assert!(e.to_string().contains("column 3"));
        let e = read_all("0,1,0,0\n".as_bytes()).unwrap_err();
        assert!(matches!(e, StreamError::Syntax { line: 1, .. }));
        let e = read_all("0,1,0,0,0,JUMP\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("JUMP"));
    }

    #[test]
    fn non_simplex_rows_are_preserved_for_the_monitor() {
        let r = read_all("0,0.9,0.9,0.0,0.0,GRASP\n".as_bytes()).unwrap();
        assert_eq!(r[0].probs, [0.9, 0.9, 0.0, 0.0]);
    }
}
