//! Artifact writing, digests and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use fatiq::io::fmt_f64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

pub fn sha256_hex(data: &[u8]) -> String {
    format!("{:x}", Sha256::digest(data))
}

/// Files of one run, written in full and hashed as they are produced.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }

    pub fn write(&mut self, name: &str, data: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), data)?;
        self.files.push(OutputFile { file: name.to_owned(), bytes: data.len(), sha256: sha256_hex(data) });
        Ok(())
    }

    pub fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        let data = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        self.write(name, &data)
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut data = serde_json::to_vec_pretty(value)?;
        data.push(b'\n');
        self.write(name, &data)
    }
}

/// Formats a row of floats with [`fmt_f64`].
pub fn row(values: &[f64]) -> Vec<String> {
    values.iter().map(|&v| fmt_f64(v)).collect()
}

/// Outcome of the assertions of `--check`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct CheckReport {
    pub lines: Vec<CheckLine>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckReport {
    pub fn record(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        let line = CheckLine { name: name.to_owned(), passed, detail: detail.into() };
        println!("{} {}: {}", if passed { "PASS" } else { "FAIL" }, line.name, line.detail);
        self.lines.push(line);
    }

    pub fn failures(&self) -> usize {
        self.lines.iter().filter(|l| !l.passed).count()
    }
}

#[derive(Serialize)]
pub struct RunManifest<'a> {
    pub subcommand: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    pub config: &'a RunConfig,
    pub outputs: &'a [OutputFile],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<&'a CheckReport>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_input() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn csv_rows_are_hashed_as_written() {
        let dir = std::env::temp_dir().join(format!("fatiq-output-{}", std::process::id()));
        let mut a = Artifacts::create(&dir).unwrap();
        a.csv("t.csv", &["x", "y"], vec![row(&[1.0, f64::INFINITY])]).unwrap();
        let bytes = fs::read(dir.join("t.csv")).unwrap();
        assert_eq!(bytes, b"x,y\n1.0000000000000000e0,inf\n");
        assert_eq!(a.files()[0].sha256, sha256_hex(&bytes));
        fs::remove_dir_all(dir).unwrap();
    }
}
