//! Reference label files: one `record_id,code` pair per line, code -1 for
//! Normal and +1 for Abnormal, an optional header line tolerated.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::signal_io::Label;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelFileError {
    Io(String),
    /// A code outside {-1, 1} or an unparseable line.
    LabelError { line: usize, token: String },
    DuplicateRecord(String),
}

impl fmt::Display for LabelFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelFileError::Io(msg) => write!(f, "label file i/o error: {msg}"),
            LabelFileError::LabelError { line, token } => {
                write!(f, "label file line {line}: code {token:?} is not -1 or 1")
            }
            LabelFileError::DuplicateRecord(id) => write!(f, "label file repeats record {id}"),
        }
    }
}

impl std::error::Error for LabelFileError {}

pub fn read_labels(path: &Path) -> Result<BTreeMap<String, Label>, LabelFileError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabelFileError::Io(format!("{}: {e}", path.display())))?;
    parse_labels(&text)
}

pub fn parse_labels(text: &str) -> Result<BTreeMap<String, Label>, LabelFileError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let id = parts.next().unwrap_or_default().trim().to_string();
        let code = parts.next().map(str::trim);
        let label = match code.and_then(|c| c.parse::<i32>().ok()) {
            Some(-1) => Label::Normal,
            Some(1) => Label::Abnormal,
            _ => {
                // A non-numeric second field on the first line is a header.
                if i == 0 && code.is_some_and(|c| c.parse::<i32>().is_err()) {
                    continue;
                }
                return Err(LabelFileError::LabelError {
                    line: i + 1,
                    token: code.unwrap_or("<missing>").to_string(),
                });
            }
        };
        if map.insert(id.clone(), label).is_some() {
            return Err(LabelFileError::DuplicateRecord(id));
        }
    }
    Ok(map)
}
