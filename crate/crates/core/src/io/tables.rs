//! CSV emitters.
//!
//! All files use `,` separators, a header row, `\n` line endings and no
//! quoting beyond what the csv format requires. Numbers are written in
//! Rust's shortest round-trip form (`0.25`, `1315.05`, `3`); a missing value
//! (a mean of no observations, a deviation of fewer than two, no sweep) is
//! an empty field.

use std::io::Write;

use crate::dynamics::DynamicsTrace;
use crate::error::{Error, Result};
use crate::experiments::{ExperimentResult, Summary};
use crate::market::Role;

pub const SERIES_COLUMNS: [&str; 3] = ["iteration", "satisfied_proportion", "unsatisfied_count"];
pub const SWEEP_COLUMNS: [&str; 4] = ["sweep_value", "mean_iterations", "std_iterations", "converged_fraction"];
pub const WELFARE_COLUMNS: [&str; 4] = ["sweep_value", "class", "mean_utility", "std_utility"];
pub const SHOCK_COLUMNS: [&str; 6] = [
    "shock_size",
    "shocked_proportion",
    "propagation_mean",
    "propagation_std",
    "reconv_norm_mean",
    "reconv_norm_std",
];

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Domain(format!("csv: {other:?}")),
    }
}

fn num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// One row per recorded satisfied proportion; iteration 0 is the start.
pub fn write_series<W: Write>(out: W, trace: &DynamicsTrace, agents: usize) -> Result<()> {
    let mut w = writer(out);
    w.write_record(SERIES_COLUMNS).map_err(csv_err)?;
    for (i, p) in trace.satisfied_series.iter().enumerate() {
        let unsatisfied = ((1.0 - p) * agents as f64).round() as usize;
        w.write_record([i.to_string(), p.to_string(), unsatisfied.to_string()])
            .map_err(csv_err)?;
    }
    finish(w)
}

/// One row per cell.
pub fn write_sweep<W: Write>(out: W, result: Option<&ExperimentResult>) -> Result<()> {
    let mut w = writer(out);
    w.write_record(SWEEP_COLUMNS).map_err(csv_err)?;
    for cell in result.iter().flat_map(|r| &r.cells) {
        let a = &cell.aggregate;
        w.write_record([
            num(cell.sweep_value),
            num(a.iterations.mean),
            num(a.iterations.std),
            a.converged_fraction.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// One row per cell and agent class that occurs in the cell.
pub fn write_welfare<W: Write>(out: W, result: Option<&ExperimentResult>) -> Result<()> {
    let mut w = writer(out);
    w.write_record(WELFARE_COLUMNS).map_err(csv_err)?;
    for cell in result.iter().flat_map(|r| &r.cells) {
        for role in [Role::Buyer, Role::Seller, Role::Intermediary] {
            let s: &Summary = cell.aggregate.welfare.get(role).expect("class role");
            if s.n == 0 {
                continue;
            }
            w.write_record([num(cell.sweep_value), role.to_string(), num(s.mean), num(s.std)])
                .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// One row per cell of a shock experiment.
pub fn write_shocks<W: Write>(out: W, result: Option<&ExperimentResult>) -> Result<()> {
    let mut w = writer(out);
    w.write_record(SHOCK_COLUMNS).map_err(csv_err)?;
    for cell in result.iter().flat_map(|r| &r.cells) {
        let Some(spec) = cell.shock else { continue };
        let a = &cell.aggregate;
        w.write_record([
            spec.size.to_string(),
            spec.shocked_proportion.to_string(),
            num(a.propagation.mean),
            num(a.propagation.std),
            num(a.reconvergence.mean),
            num(a.reconvergence.std),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}
