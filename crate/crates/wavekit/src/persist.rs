//! Deterministic CSV/JSON output.
//!
//! Every CSV has a header row and is written with `{}` float formatting
//! (shortest round-trip representation), so identical inputs produce
//! byte-identical files on every platform. Each CSV gets a JSON sidecar
//! (`<name>.json` next to `<name>.csv`) carrying provenance: pipeline stage,
//! crate version, configuration hash, generator name, and seed. Sidecar maps
//! are ordered (`BTreeMap`), keeping the JSON byte-deterministic too.

use crate::correlation::{ConvergenceRow, CorrelationEstimate};
use crate::energy::DecayReport;
use crate::error::{Result, WavekitError};
use crate::reconstruction::{ImpulseResponse, ReconstructionReport};
use crate::solver::Trace;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

/// Provenance sidecar written next to every CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Sidecar {
    /// Pipeline stage that produced the file.
    pub stage: String,
    /// Crate version.
    pub version: String,
    /// Hash of the run configuration (hex).
    pub config_hash: String,
    /// Noise generator name, when noise was involved.
    pub generator: Option<String>,
    /// Seed, when noise was involved.
    pub seed: Option<u64>,
    /// Stage-specific scalars (ordered for determinism).
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Sidecar {
    /// A sidecar for a deterministic (noise-free) stage.
    pub fn deterministic(stage: &str, config_hash: &str) -> Self {
        Sidecar {
            stage: stage.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.to_string(),
            generator: None,
            seed: None,
            extra: BTreeMap::new(),
        }
    }

    /// A sidecar for a noise-driven stage.
    pub fn seeded(stage: &str, config_hash: &str, seed: u64) -> Self {
        Sidecar {
            generator: Some(crate::noise::GENERATOR_NAME.to_string()),
            seed: Some(seed),
            ..Sidecar::deterministic(stage, config_hash)
        }
    }

    /// Attach a numeric provenance scalar.
    pub fn with(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.extra.insert(key.to_string(), value.into());
        self
    }
}

fn io_err(e: impl std::fmt::Display) -> WavekitError {
    WavekitError::Validation(format!("output error: {e}"))
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Write the sidecar JSON for `csv_path` (same stem, `.json` extension).
pub fn write_sidecar(csv_path: &Path, sidecar: &Sidecar) -> Result<()> {
    let path = csv_path.with_extension("json");
    let body = serde_json::to_string_pretty(sidecar).map_err(io_err)?;
    std::fs::write(path, body + "\n").map_err(io_err)?;
    Ok(())
}

/// `t,value` rows of a time series.
pub fn write_trace_csv(path: &Path, trace: &Trace) -> Result<()> {
    let rows: Vec<Vec<String>> = trace
        .samples
        .iter()
        .enumerate()
        .map(|(n, &v)| vec![fmt(trace.t0 + n as f64 * trace.dt), fmt(v)])
        .collect();
    write_rows(path, &["t", "value"], &rows)
}

/// `lag,value,variance` rows of a kernel estimate.
pub fn write_correlation_csv(path: &Path, est: &CorrelationEstimate) -> Result<()> {
    let rows: Vec<Vec<String>> = est
        .values
        .iter()
        .zip(&est.variance)
        .enumerate()
        .map(|(i, (&v, &var))| vec![fmt(est.lag_time(i)), fmt(v), fmt(var)])
        .collect();
    write_rows(path, &["lag", "value", "variance"], &rows)
}

/// `T,mean_error,std_error` rows of a convergence study.
pub fn write_study_csv(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let out: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![fmt(r.t_horizon), fmt(r.mean_error), fmt(r.std_error)])
        .collect();
    write_rows(path, &["T", "mean_error", "std_error"], &out)
}

/// `t,energy,boundary_gap,bound` rows of a decay certificate.
pub fn write_energy_csv(path: &Path, report: &DecayReport) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| vec![fmt(r.t), fmt(r.energy), fmt(r.boundary_gap), fmt(r.bound)])
        .collect();
    write_rows(path, &["t", "energy", "boundary_gap", "bound"], &rows)
}

/// `t,h` rows of an impulse response.
pub fn write_impulse_csv(path: &Path, ir: &ImpulseResponse) -> Result<()> {
    let rows: Vec<Vec<String>> = ir
        .h
        .iter()
        .enumerate()
        .map(|(n, &v)| vec![fmt(n as f64 * ir.dt), fmt(v)])
        .collect();
    write_rows(path, &["t", "h"], &rows)
}

/// `a,Phi,A_rec,condition,error_rel` rows of a reconstruction sweep.
pub fn write_reconstruction_csv(path: &Path, report: &ReconstructionReport) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt(r.a),
                fmt(r.phi),
                fmt(r.a_rec),
                fmt(r.condition),
                fmt(r.error_rel),
            ]
        })
        .collect();
    write_rows(path, &["a", "Phi", "A_rec", "condition", "error_rel"], &rows)
}

// --- Tests ------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_csv_is_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let t = Trace {
            t0: 0.0,
            dt: 0.1,
            samples: vec![0.0, -0.527182, 1.0 / 3.0, 2e-17],
        };
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        write_trace_csv(&p1, &t).unwrap();
        write_trace_csv(&p2, &t).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert_eq!(b1, b2);
        let text = String::from_utf8(b1).unwrap();
        assert!(text.starts_with("t,value\n"), "{text}");
        // shortest-roundtrip floats survive a parse round trip
        for line in text.lines().skip(1) {
            let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!(t.samples.contains(&v));
        }
    }

    #[test]
    fn sidecar_is_ordered_and_complete() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("out.csv");
        let sc = Sidecar::seeded("correlate", "deadbeef", 42)
            .with("t_horizon", 250.0)
            .with("anchor_lags", 8);
        write_sidecar(&csv, &sc).unwrap();
        let body = std::fs::read_to_string(dir.path().join("out.json")).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(parsed["stage"], "correlate");
        assert_eq!(parsed["config_hash"], "deadbeef");
        assert_eq!(parsed["seed"], 42);
        assert_eq!(parsed["generator"], "ChaCha8");
        assert_eq!(parsed["extra"]["t_horizon"], 250.0);
        // byte determinism of the sidecar too
        let csv2 = dir.path().join("out2.csv");
        write_sidecar(&csv2, &sc).unwrap();
        assert_eq!(
            body,
            std::fs::read_to_string(dir.path().join("out2.json")).unwrap()
        );
    }
}
