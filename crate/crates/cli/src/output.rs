//! CSV tables and the JSON metadata sidecar.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use casimir_grating::casimir::EnergyPoint;
use serde::Serialize;

use crate::config::{Resolved, RunConfig};
use crate::diagnostics::{ChannelRecord, Summary};
use crate::energy::{CheckReport, EnergyOutcome, FailedNode};
use crate::error::CliError;

pub const SIDECAR_SCHEMA: &str = "casimir-grating/energy";
pub const SIDECAR_VERSION: u32 = 1;

pub const ENERGY_COLUMNS: [&str; 6] = [
    "delta_z",
    "delta_x",
    "energy",
    "slab_energy",
    "ratio",
    "est_error",
];

fn sci(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(sci).unwrap_or_default()
}

/// Opens `path` for writing with a leading `# config_hash=...` comment line.
fn csv_writer(path: &Path, hash: &str) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "# config_hash={hash}")?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_energy_csv(path: &Path, hash: &str, points: &[EnergyPoint]) -> Result<(), CliError> {
    let mut w = csv_writer(path, hash)?;
    w.write_record(ENERGY_COLUMNS)?;
    for p in points {
        w.write_record([
            p.delta_z.to_string(),
            p.delta_x.to_string(),
            sci(p.energy),
            sci(p.slab_energy),
            sci(p.ratio),
            sci(p.est_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_slab_csv(path: &Path, hash: &str, rows: &[(f64, f64)]) -> Result<(), CliError> {
    let mut w = csv_writer(path, hash)?;
    w.write_record(["delta_z", "slab_energy"])?;
    for (dz, e) in rows {
        w.write_record([dz.to_string(), sci(*e)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_diagnostics_csv(
    path: &Path,
    hash: &str,
    records: &[ChannelRecord],
) -> Result<(), CliError> {
    let mut w = csv_writer(path, hash)?;
    w.write_record([
        "axis",
        "k",
        "kx0",
        "ky0",
        "propagating",
        "unitarity_defect",
        "commutator_defect",
        "wronskian_drift",
        "condition",
        "error",
    ])?;
    for r in records {
        let axis = match r.axis {
            crate::diagnostics::AxisChoice::Real => "real",
            crate::diagnostics::AxisChoice::Imaginary => "imaginary",
        };
        w.write_record([
            axis.to_string(),
            r.k.to_string(),
            r.kx0.to_string(),
            r.ky0.to_string(),
            r.propagating.to_string(),
            opt(r.unitarity_defect),
            opt(r.commutator_defect),
            opt(r.wronskian_drift),
            opt(r.condition),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct EnergySidecar<'a> {
    pub schema: &'static str,
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub config_hash: &'a str,
    pub config: &'a RunConfig,
    pub delta_z: &'a [f64],
    pub delta_x: &'a [f64],
    pub n_trunc: usize,
    pub slab_permittivity: f64,
    pub node_count: usize,
    pub coarse_node_count: usize,
    pub integrand_evaluations: usize,
    pub computed_nodes: usize,
    pub cached_nodes: usize,
    pub max_condition: f64,
    pub max_integrand: f64,
    pub max_imag_ratio: f64,
    pub converged: Option<bool>,
    pub warnings: &'a [String],
    pub failed_nodes: &'a [FailedNode],
    pub checks: &'a [CheckReport],
}

impl<'a> EnergySidecar<'a> {
    pub fn new(run: &'a Resolved, o: &'a EnergyOutcome) -> Self {
        let finite = |x: f64| if x.is_finite() { x } else { 0.0 };
        EnergySidecar {
            schema: SIDECAR_SCHEMA,
            schema_version: SIDECAR_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            config_hash: &run.hash,
            config: &run.config,
            delta_z: &run.delta_z,
            delta_x: &run.delta_x,
            n_trunc: run.n_trunc,
            slab_permittivity: run.slab.permittivity,
            node_count: o.node_count,
            coarse_node_count: o.coarse_node_count,
            integrand_evaluations: o.node_count + o.coarse_node_count,
            computed_nodes: o.computed,
            cached_nodes: o.cached,
            max_condition: o.max_condition,
            max_integrand: finite(o.max_integrand),
            max_imag_ratio: o.max_imag_ratio,
            converged: o.converged,
            warnings: &run.warnings,
            failed_nodes: &o.failed,
            checks: &o.checks,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct DiagnosticsSummary<'a> {
    pub schema: &'static str,
    pub schema_version: u32,
    pub config_hash: &'a str,
    #[serde(flatten)]
    pub summary: Summary,
}
