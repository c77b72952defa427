//! JSONL and JSON file helpers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Lazily parses one JSON value per non-blank line.
pub fn jsonl_iter<T, R>(reader: R) -> impl Iterator<Item = Result<T, JsonlError>>
where
    T: DeserializeOwned,
    R: BufRead,
{
    reader.lines().enumerate().filter_map(|(idx, line)| match line {
        Err(e) => Some(Err(JsonlError::Io(e))),
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(serde_json::from_str(&l).map_err(|source| JsonlError::Parse { line: idx + 1, source })),
    })
}

pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>, JsonlError> {
    jsonl_iter(reader).collect()
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, JsonlError> {
    read_jsonl(open(path.as_ref())?)
}

pub fn write_jsonl<'a, T, I>(mut writer: impl Write, items: I) -> Result<(), JsonlError>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_jsonl_file<'a, T, I>(path: impl AsRef<Path>, items: I) -> Result<(), JsonlError>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    write_jsonl(create(path.as_ref())?, items)
}

pub fn read_json_file<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T, JsonlError> {
    Ok(serde_json::from_reader(open(path.as_ref())?)?)
}

pub fn write_json_file<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<(), JsonlError> {
    let mut w = create(path.as_ref())?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn open(path: &Path) -> Result<BufReader<File>, JsonlError> {
    File::open(path).map(BufReader::new).map_err(|source| JsonlError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn create(path: &Path) -> Result<BufWriter<File>, JsonlError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| JsonlError::File {
            path: path.display().to_string(),
            source,
        })
}
