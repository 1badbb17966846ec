//! Result bundles: the set of files one command writes into its output
//! directory, assembled in memory so identical runs give identical bytes.
//!
//! Bundles hold no timestamps or host details. `summary.json` always carries
//! the artifact version and enough of the inputs (seed, step size, budget,
//! the canonical market or the experiment config) to repeat the run.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::plot::{Chart, Line};
use super::tables::{write_series, write_shocks, write_sweep, write_welfare};
use crate::dynamics::DynamicsTrace;
use crate::error::{Error, Result};
use crate::experiments::{CellAggregate, ExperimentConfig, ExperimentResult, ShockSpec};
use crate::topology::TopologyKind;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// File name to contents.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ResultBundle {
    pub files: BTreeMap<String, Vec<u8>>,
}

impl ResultBundle {
    pub fn insert(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.insert(name.into(), bytes.into());
    }

    pub fn insert_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Domain(format!("json: {e}")))?;
        text.push('\n');
        self.insert(name, text);
        Ok(())
    }

    pub fn insert_series(&mut self, name: &str, trace: &DynamicsTrace, agents: usize) -> Result<()> {
        let mut buf = Vec::new();
        write_series(&mut buf, trace, agents)?;
        self.insert(name, buf);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }

    /// Writes every file into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct CellSummary<'a> {
    sweep_value: Option<f64>,
    topology: &'a TopologyKind,
    shock: Option<ShockSpec>,
    aggregate: &'a CellAggregate,
}

#[derive(Serialize)]
struct ExperimentSummary<'a> {
    artifact_version: &'static str,
    command: &'static str,
    config: &'a ExperimentConfig,
    cells: Vec<CellSummary<'a>>,
}

/// `summary.json`, `runs.json`, `config.toml` and the sweep, welfare and
/// shock CSVs of one experiment.
pub fn experiment_bundle(result: &ExperimentResult) -> Result<ResultBundle> {
    let mut b = ResultBundle::default();
    b.insert_json(
        "summary.json",
        &ExperimentSummary {
            artifact_version: ARTIFACT_VERSION,
            command: "sweep",
            config: &result.config,
            cells: result
                .cells
                .iter()
                .map(|c| CellSummary {
                    sweep_value: c.sweep_value,
                    topology: &c.topology,
                    shock: c.shock,
                    aggregate: &c.aggregate,
                })
                .collect(),
        },
    )?;
    let runs: Vec<_> = result.cells.iter().map(|c| &c.runs).collect();
    b.insert_json("runs.json", &runs)?;
    b.insert(
        "config.toml",
        toml::to_string(&result.config).map_err(|e| Error::Domain(format!("toml: {e}")))?,
    );
    let mut buf = Vec::new();
    write_sweep(&mut buf, Some(result))?;
    b.insert("sweep.csv", std::mem::take(&mut buf));
    write_welfare(&mut buf, Some(result))?;
    b.insert("welfare.csv", std::mem::take(&mut buf));
    write_shocks(&mut buf, Some(result))?;
    b.insert("shocks.csv", buf);
    Ok(b)
}

type Table = (Vec<String>, Vec<Vec<String>>);

fn read_table(bytes: &[u8]) -> Result<Table> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r
        .headers()
        .map_err(|e| Error::Parse {
            line: Some(1),
            message: e.to_string(),
        })?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: Some(i + 2),
            message: e.to_string(),
        })?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

fn column(t: &Table, name: &str) -> Result<usize> {
    t.0.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
        line: Some(1),
        message: format!("missing column {name}"),
    })
}

fn number(s: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Parse {
        line: Some(line),
        message: format!("{s:?} is not a number"),
    })
}

/// Points `(x, mean)` with deviations, skipping rows without a mean. Rows
/// without a sweep value are placed at their row index.
fn band(t: &Table, x: &str, mean: &str, std: &str, filter: Option<(&str, &str)>) -> Result<Line> {
    let (xi, mi, si) = (column(t, x)?, column(t, mean)?, column(t, std)?);
    let fi = filter.map(|(c, _)| column(t, c)).transpose()?;
    let mut points = Vec::new();
    let mut spread = Vec::new();
    for (i, row) in t.1.iter().enumerate() {
        if let (Some(fi), Some((_, want))) = (fi, filter) {
            if row[fi] != want {
                continue;
            }
        }
        let line = i + 2;
        let Some(m) = number(&row[mi], line)? else { continue };
        let xv = number(&row[xi], line)?.unwrap_or(i as f64);
        points.push((xv, m));
        spread.push(number(&row[si], line)?.unwrap_or(0.0));
    }
    Ok(Line::new(filter.map_or(mean, |f| f.1), points).with_spread(spread))
}

/// Charts for every recognised CSV in a bundle, keyed by SVG file name.
pub fn plot_bundle(bundle: &ResultBundle) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for series in ["series.csv", "series_after.csv"] {
        let Some(bytes) = bundle.get(series) else { continue };
        let t = read_table(bytes)?;
        let (xi, yi) = (column(&t, "iteration")?, column(&t, "satisfied_proportion")?);
        let mut points = Vec::new();
        for (i, row) in t.1.iter().enumerate() {
            if let (Some(x), Some(y)) = (number(&row[xi], i + 2)?, number(&row[yi], i + 2)?) {
                points.push((x, y));
            }
        }
        let chart = Chart {
            title: "Proportion of satisfied agents".into(),
            x_label: "iterations (best responses)".into(),
            y_label: "satisfied proportion".into(),
            lines: vec![Line::new("satisfied", points)],
        };
        out.insert(series.replace(".csv", ".svg"), chart.to_svg());
    }
    if let Some(bytes) = bundle.get("sweep.csv") {
        let t = read_table(bytes)?;
        if !t.1.is_empty() {
            let chart = Chart {
                title: "Best responses to convergence (mean ± std)".into(),
                x_label: "sweep value".into(),
                y_label: "iterations".into(),
                lines: vec![band(&t, "sweep_value", "mean_iterations", "std_iterations", None)?],
            };
            out.insert("sweep.svg".into(), chart.to_svg());
        }
    }
    if let Some(bytes) = bundle.get("welfare.csv") {
        let t = read_table(bytes)?;
        if !t.1.is_empty() {
            let ci = column(&t, "class")?;
            let mut classes: Vec<String> = t.1.iter().map(|r| r[ci].clone()).collect();
            classes.dedup();
            classes.sort();
            classes.dedup();
            let lines = classes
                .iter()
                .map(|c| band(&t, "sweep_value", "mean_utility", "std_utility", Some(("class", c))))
                .collect::<Result<_>>()?;
            let chart = Chart {
                title: "Mean utility by agent class (mean ± std)".into(),
                x_label: "sweep value".into(),
                y_label: "mean utility".into(),
                lines,
            };
            out.insert("welfare.svg".into(), chart.to_svg());
        }
    }
    if let Some(bytes) = bundle.get("shocks.csv") {
        let t = read_table(bytes)?;
        if !t.1.is_empty() {
            let chart = Chart {
                title: "Shock propagation and reconvergence (mean ± std)".into(),
                x_label: "shock size".into(),
                y_label: "proportion".into(),
                lines: vec![
                    band(&t, "shock_size", "propagation_mean", "propagation_std", None)?,
                    band(&t, "shock_size", "reconv_norm_mean", "reconv_norm_std", None)?,
                ],
            };
            out.insert("shocks.svg".into(), chart.to_svg());
        }
    }
    Ok(out)
}

/// Loads every `.csv` file of a bundle directory.
pub fn read_bundle_dir(dir: &Path) -> Result<ResultBundle> {
    let mut b = ResultBundle::default();
    let mut names: Vec<_> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    names.sort();
    for p in names {
        if p.extension().is_some_and(|e| e == "csv") {
            let name = p.file_name().expect("file").to_string_lossy().into_owned();
            b.insert(name, fs::read(&p)?);
        }
    }
    Ok(b)
}
