//! Reproducible experiments: configuration, scenario pipelines and CSV output.

mod config;
mod scenarios;
mod table;
pub mod units;

pub use config::{ScenarioConfig, ScenarioId, SerSetting};
pub use table::{emit_csv, format_number, ResultTable, SIGNIFICANT_DIGITS};
pub use units::{db_to_linear, deg_to_rad, linear_to_db, rad_to_deg};

use crate::error::Result;

/// Environment variable read for the reproducibility timestamp.
pub const SOURCE_DATE_EPOCH: &str = "SOURCE_DATE_EPOCH";

/// Run a validated scenario and attach its metadata.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ResultTable> {
    config.validate()?;
    let mut table = scenarios::run(config)?;
    let timestamp = std::env::var(SOURCE_DATE_EPOCH).unwrap_or_else(|_| "unset".into());
    table.prepend_meta(vec![
        ("scenario".into(), config.scenario.name().into()),
        ("seed".into(), config.seed.to_string()),
        ("trials".into(), config.trials.to_string()),
        ("version".into(), concat!("ciprecode ", env!("CARGO_PKG_VERSION")).into()),
        ("timestamp".into(), timestamp),
        ("config".into(), serde_json::to_string(config).expect("config serialises")),
    ]);
    Ok(table)
}
