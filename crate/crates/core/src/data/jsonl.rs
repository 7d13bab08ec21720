use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, TrainingExample, TrainingSet};

/// Writes one `{"short", "modifiers", "source", "d_aes", "d_clip"}` object
/// per line.
pub fn write_jsonl(path: impl AsRef<Path>, set: &TrainingSet) -> Result<(), DataError> {
    let mut out = BufWriter::new(File::create(path)?);
    for e in &set.examples {
        serde_json::to_writer(&mut out, e).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<TrainingSet, DataError> {
    read_lines::<TrainingExample>(path).map(TrainingSet::new)
}

/// One raw prompt-log line: `{"prompt": "...", "source": "..."}`; `source`
/// defaults to `line:<n>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogEntry {
    pub prompt: String,
    #[serde(default)]
    pub source: Option<String>,
}

pub fn read_prompt_log(path: impl AsRef<Path>) -> Result<Vec<(String, String)>, DataError> {
    let entries = read_lines::<LogEntry>(path)?;
    Ok(entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| (e.source.unwrap_or_else(|| format!("line:{}", i + 1)), e.prompt))
        .collect())
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<T>, DataError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| DataError::Schema { line: i + 1, message: e.to_string() })?;
        out.push(item);
    }
    Ok(out)
}
