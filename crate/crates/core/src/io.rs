//! Text formats shared by the library and the command line.

use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::error::Result;
use crate::specimen::{Block, SeveritySequence};

/// Shortest-roundtrip-independent float format: 17 significant digits in
/// scientific notation, so equal values always print equal bytes.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_owned()
    } else if x > 0.0 {
        "inf".to_owned()
    } else {
        "-inf".to_owned()
    }
}

#[derive(Deserialize)]
struct SeverityRecord {
    severity_mpa: f64,
    count: u64,
}

/// Reads a severity sequence from CSV with header `severity_mpa,count`.
pub fn read_severity_csv<R: Read>(input: R) -> Result<SeveritySequence> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut blocks = Vec::new();
    for rec in r.deserialize::<SeverityRecord>() {
        let rec = rec?;
        blocks.push(Block { severity: rec.severity_mpa, count: rec.count });
    }
    SeveritySequence::new(blocks)
}

pub fn load_severity_csv(path: &Path) -> Result<SeveritySequence> {
    read_severity_csv(std::fs::File::open(path)?)
}
