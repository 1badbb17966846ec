//! File formats: market files, experiment configs, CSV series, SVG charts and
//! the result bundles that tie them together.

mod bundle;
mod market_file;
mod plot;
mod tables;

pub use bundle::{experiment_bundle, plot_bundle, read_bundle_dir, ResultBundle, ARTIFACT_VERSION};
pub use market_file::{parse_market, serialize_market, MarketFile, SCHEMA_VERSION};
pub use plot::{Chart, Line};
pub use tables::{
    write_series, write_shocks, write_sweep, write_welfare, SERIES_COLUMNS, SHOCK_COLUMNS, SWEEP_COLUMNS,
    WELFARE_COLUMNS,
};

use crate::error::{Error, Result};
use crate::experiments::ExperimentConfig;

/// Parses and validates an experiment config (TOML, see
/// [`ExperimentConfig`] for the fields).
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map(|s| text[..s.start].matches('\n').count() + 1),
        message: e.message().trim().to_string(),
    })?;
    config.validate()?;
    Ok(config)
}
