//! CSV results and the JSON run manifest.
//!
//! [`OutputFiles::create`] opens both files before any solver runs, so an unwritable
//! destination fails immediately.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{MisError, Result};
use crate::experiment::Row;
use crate::scenario::Scenario;

pub const HEADER: [&str; 11] = [
    "scheme",
    "sweep_axis",
    "sweep_value",
    "seed",
    "objective_bits_hz",
    "min_rate",
    "throughput",
    "iters",
    "wall_ms",
    "converged",
    "notes",
];

pub const CSV_NAME: &str = "results.csv";
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seeds: &'a [u64],
    config: &'a Scenario,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MisError + '_ {
    move |source| MisError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Opened result files of one run.
#[derive(Debug)]
pub struct OutputFiles {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    csv: File,
    manifest: File,
}

impl OutputFiles {
    /// Create `dir` if needed and truncate both output files.
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let csv_path = dir.join(CSV_NAME);
        let manifest_path = dir.join(MANIFEST_NAME);
        let csv = File::create(&csv_path).map_err(io_err(&csv_path))?;
        let manifest = File::create(&manifest_path).map_err(io_err(&manifest_path))?;
        Ok(OutputFiles {
            csv_path,
            manifest_path,
            csv,
            manifest,
        })
    }

    /// Write the manifest: resolved configuration, library version and seeds.
    pub fn write_manifest(&mut self, command: &str, scenario: &Scenario) -> Result<()> {
        let m = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seeds: &scenario.seeds,
            config: scenario,
        };
        let mut w = BufWriter::new(&self.manifest);
        serde_json::to_writer_pretty(&mut w, &m).map_err(|e| MisError::Io {
            path: self.manifest_path.display().to_string(),
            source: e.into(),
        })?;
        w.write_all(b"\n").map_err(io_err(&self.manifest_path))?;
        w.flush().map_err(io_err(&self.manifest_path))
    }

    pub fn write_rows(&mut self, rows: &[Row]) -> Result<()> {
        write_csv(&self.csv, rows).map_err(|e| MisError::Io {
            path: self.csv_path.display().to_string(),
            source: e,
        })
    }
}

/// Header line followed by one line per row; a header-only file for an empty table.
pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}

pub fn csv_string(rows: &[Row]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}
