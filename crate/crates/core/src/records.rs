//! Line-oriented JSON record streams shared by the profile, callgraph, label
//! and coverage-manifest formats.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Parses one JSON value per non-blank line, handing each to `f` with its
/// 1-based line number.
pub(crate) fn for_each_record<R, T, F>(source: R, mut f: F) -> Result<()>
where
    R: BufRead,
    T: DeserializeOwned,
    F: FnMut(usize, T) -> Result<()>,
{
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(trimmed).map_err(|e| Error::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        f(line_no, record)?;
    }
    Ok(())
}

pub(crate) fn write_records<W, T, I>(mut out: W, records: I) -> Result<()>
where
    W: Write,
    T: Serialize,
    I: IntoIterator<Item = T>,
{
    for record in records {
        let line = serde_json::to_string(&record)
            .map_err(|e| Error::Invariant(format!("record serialization: {e}")))?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
