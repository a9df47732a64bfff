//! File loading with categorized errors, atomic writes and CSV rendering.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use wcd_core::parzen::SampleSet;
use wcd_core::{checkpoint, Dataset, Rbm, TestSet};

use crate::error::{CliError, CliResult};

fn open(what: &'static str, path: &Path) -> CliResult<BufReader<fs::File>> {
    match fs::File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(CliError::NotFound {
            what,
            path: path.to_path_buf(),
        }),
        Err(e) => Err(CliError::io(path, e)),
    }
}

fn bad(what: &'static str, path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::BadFile {
        what,
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    Dataset::read_from(open("dataset", path)?).map_err(|e| bad("dataset", path, e))
}

pub fn read_test_set(path: &Path) -> CliResult<TestSet> {
    TestSet::read_from(open("test set", path)?).map_err(|e| bad("test set", path, e))
}

pub fn read_model(path: &Path) -> CliResult<Rbm> {
    checkpoint::load(open("model", path)?).map_err(|e| bad("model", path, e))
}

pub fn read_samples(path: &Path) -> CliResult<SampleSet<f64>> {
    SampleSet::read_from(open("sample set", path)?).map_err(|e| bad("sample set", path, e))
}

pub fn read_text(what: &'static str, path: &Path) -> CliResult<String> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(CliError::NotFound {
            what,
            path: path.to_path_buf(),
        }),
        Err(e) => Err(CliError::io(path, e)),
    }
}

pub fn parse_toml<T: serde::de::DeserializeOwned>(what: &'static str, path: &Path, text: &str) -> CliResult<T> {
    toml::from_str(text).map_err(|e| bad(what, path, e))
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s.into_bytes()
}

/// CSV document from a header and stringly rows.
pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Full-precision float rendering (shortest round-trip form).
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Files written by a command, staged so nothing lands on disk until every
/// output has been produced.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    pub fn commit(self) -> CliResult<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (path, bytes) in self.files {
            write_atomic(&path, &bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}
