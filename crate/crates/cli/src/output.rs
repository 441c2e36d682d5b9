//! CSV tables (17 significant digits, LF line endings) and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_owned())
    }
}

/// Scientific notation with 17 significant digits; round-trips every f64.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        // Drop the sign of negative zero.
        return format!("{:.16e}", 0.0);
    }
    format!("{x:.16e}")
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Real(x) => format_real(*x),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, header: &[&'static str]) -> Self {
        Table { name, header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(err)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.into_error()))
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(self.name);
        fs::write(&path, self.to_csv()?)?;
        Ok(path)
    }
}

/// Tables produced by one experiment and, if it stopped early, the error.
#[derive(Debug)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub failure: Option<CliError>,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub experiment: String,
    pub engine_version: &'static str,
    pub status: &'static str,
    pub error: Option<String>,
    pub units: Units<'a>,
    pub config: &'a C,
    pub outputs: Vec<String>,
    pub workers: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Serialize)]
pub struct Units<'a> {
    pub energy: &'a str,
    pub temperature: &'a str,
    pub currents: &'static str,
    pub sign_convention: &'static str,
}

impl<'a> Units<'a> {
    pub fn new(energy: &'a str) -> Self {
        Units {
            energy,
            temperature: energy,
            currents: "particle 1/h, energy and free energy energy/h, entropy kB/h",
            sign_convention: "positive from the reservoir into the device; bond currents positive from site_i to site_j",
        }
    }
}

/// Writes all tables and `manifest.json` into `out`, or into
/// `out/quarantine` when the run failed. Returns the directory used.
pub fn emit<C: Serialize>(
    out: &Path,
    experiment: &str,
    energy_unit: &str,
    config: &C,
    run: &RunOutput,
    workers: usize,
    wall: Duration,
) -> Result<PathBuf> {
    let dir = if run.failure.is_some() { out.join("quarantine") } else { out.to_path_buf() };
    fs::create_dir_all(&dir)?;
    let mut outputs = Vec::new();
    for t in &run.tables {
        t.write(&dir)?;
        outputs.push(t.name.to_owned());
    }
    let manifest = Manifest {
        experiment: experiment.to_owned(),
        engine_version: env!("CARGO_PKG_VERSION"),
        status: if run.failure.is_some() { "failed" } else { "ok" },
        error: run.failure.as_ref().map(|e| e.to_string()),
        units: Units::new(energy_unit),
        config,
        outputs,
        workers,
        wall_time_s: wall.as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 1e-300, f64::MIN_POSITIVE, 2.0f64.sqrt()] {
            let s = format_real(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_real(-0.0), format_real(0.0));
        assert_eq!(format_real(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new("x.csv", &["N", "ratio", "pass"]);
        t.push(vec![3usize.into(), 0.25.into(), true.into()]);
        let s = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(s, "N,ratio,pass\n3,2.5000000000000000e-1,true\n");
    }
}
