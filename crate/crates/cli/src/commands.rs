//! The four subcommands. Each returns the process outcome; hard errors
//! surface as `CliError`.

use std::path::Path;

use casimir_grating::casimir::slab_energy;
use casimir_grating::CheckResult;
use rayon::prelude::*;

use crate::config::{Format, Overrides, ProfileConfig, Resolved, RunConfig};
use crate::diagnostics::{run_diagnostics, sample_channels, summarize, AxisChoice, SampleSpec};
use crate::energy::{run_energy, thread_pool};
use crate::error::{CliError, Outcome};
use crate::output::{
    write_diagnostics_csv, write_energy_csv, write_json, write_slab_csv, DiagnosticsSummary,
    EnergySidecar, SIDECAR_VERSION,
};

pub fn load(path: &Path, overrides: &Overrides) -> Result<Resolved, CliError> {
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(overrides);
    let run = cfg.resolve()?;
    for w in &run.warnings {
        log::warn!("{w}");
    }
    Ok(run)
}

fn report(c: &CheckResult) {
    let tag = if c.passed { "PASS" } else { "FAIL" };
    println!(
        "{tag} {:<28} worst={:.3e} limit={:.3e}",
        c.name, c.worst, c.limit
    );
}

pub fn validate(path: &Path, overrides: &Overrides) -> Result<Outcome, CliError> {
    let run = load(path, overrides)?;
    let mut checks = run.profile.invariant_checks();
    if let ProfileConfig::FermiStep(_) = run.config.profile {
        let lo = run.profile.min_total();
        checks.push(CheckResult {
            name: "total_at_least_vacuum".into(),
            passed: lo >= 1.0 - 1e-12,
            worst: 1.0 - lo,
            limit: 1e-12,
        });
    }
    for c in &checks {
        report(c);
    }
    println!("config_hash={}", run.hash);
    println!(
        "n_trunc={} slab_permittivity={} geometries={} nodes={}",
        run.n_trunc,
        run.slab.permittivity,
        run.geometries.len(),
        run.quadrature().nodes(run.profile.period())?.len()
    );
    Ok(if checks.iter().all(|c| c.passed) {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    })
}

pub fn diagnostics(
    path: &Path,
    overrides: &Overrides,
    axis: AxisChoice,
    spec: &SampleSpec,
) -> Result<Outcome, CliError> {
    let run = load(path, overrides)?;
    let channels = sample_channels(axis, spec, run.profile.period(), run.n_trunc);
    if channels.len() < spec.count {
        log::warn!(
            "only {} of {} channels could be sampled",
            channels.len(),
            spec.count
        );
    }
    let pool = thread_pool(run.config.parallelism.workers)?;
    let records = run_diagnostics(&run.profile, &channels, run.n_trunc, &run.channel, &pool);
    let summary = summarize(&records);
    let csv_path = run.output_path(&run.config.output.diagnostics_csv);
    write_diagnostics_csv(&csv_path, &run.hash, &records)?;
    if run.writes(Format::Json) {
        write_json(
            &csv_path.with_extension("json"),
            &DiagnosticsSummary {
                schema: "casimir-grating/diagnostics",
                schema_version: SIDECAR_VERSION,
                config_hash: &run.hash,
                summary,
            },
        )?;
    }
    println!(
        "channels={} failed={} errors={} max_unitarity={} max_commutator={:.3e} max_drift={:.3e} max_condition={:.3e}",
        summary.channels,
        summary.failed,
        summary.errors,
        summary
            .max_unitarity_defect
            .map_or("n/a".to_string(), |d| format!("{d:.3e}")),
        summary.max_commutator_defect,
        summary.max_wronskian_drift,
        summary.max_condition,
    );
    Ok(if summary.errors > 0 {
        Outcome::Failed
    } else if summary.failed > 0 {
        Outcome::CheckFailed
    } else {
        Outcome::Ok
    })
}

pub fn energy(path: &Path, overrides: &Overrides, use_cache: bool) -> Result<Outcome, CliError> {
    let run = load(path, overrides)?;
    let outcome = run_energy(&run, use_cache)?;
    if run.writes(Format::Json) {
        write_json(
            &run.output_path(&run.config.output.energy_json),
            &EnergySidecar::new(&run, &outcome),
        )?;
    }
    if let Some(first) = outcome.failed.first() {
        for f in &outcome.failed {
            eprintln!(
                "failed node {:?} #{} (kappa={}, kx0={}, ky0={}): {}",
                f.pass, f.index, f.kappa, f.kx0, f.ky0, f.error
            );
        }
        return Err(CliError::FailedNodes {
            count: outcome.failed.len(),
            first: first.error.clone(),
        });
    }
    if run.writes(Format::Csv) {
        write_energy_csv(
            &run.output_path(&run.config.output.energy_csv),
            &run.hash,
            &outcome.points,
        )?;
    }
    for c in &outcome.checks {
        let tag = if c.enforced { "" } else { " (informational)" };
        let state = if c.result.passed { "PASS" } else { "FAIL" };
        println!(
            "{state} {}{tag} worst={:.3e}",
            c.result.name, c.result.worst
        );
    }
    println!(
        "nodes={} coarse_nodes={} computed={} cached={} n_trunc={}",
        outcome.node_count,
        outcome.coarse_node_count,
        outcome.computed,
        outcome.cached,
        run.n_trunc
    );
    let ok = outcome
        .checks
        .iter()
        .filter(|c| c.enforced)
        .all(|c| c.result.passed);
    Ok(if ok {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    })
}

pub fn slab_baseline(path: &Path, overrides: &Overrides) -> Result<Outcome, CliError> {
    let run = load(path, overrides)?;
    let pool = thread_pool(run.config.parallelism.workers)?;
    let period = run.profile.period();
    let rows: Vec<(f64, f64)> = pool.install(|| {
        run.delta_z
            .par_iter()
            .map(|dz| {
                slab_energy(&run.slab, period, run.n_trunc, *dz, run.quadrature()).map(|e| (*dz, e))
            })
            .collect::<Result<_, _>>()
    })?;
    write_slab_csv(
        &run.output_path(&run.config.output.slab_csv),
        &run.hash,
        &rows,
    )?;
    for (dz, e) in &rows {
        println!("delta_z={dz} slab_energy={e:e}");
    }
    Ok(Outcome::Ok)
}
