//! Experiment runner: named suites driven by TOML configurations, with CSV,
//! JSON and SVG reports.
//!
//! ```toml
//! suite = "fredholm-index"
//! seed = 7
//! cutoffs = [32, 64]
//! symbols = [{ family = "winding", w = 1 }]
//! ```
//!
//! Every field except `suite` has a per-suite default; `refsob describe
//! <suite>` lists them.

mod config;
mod report;
mod suites;

use std::path::{Path, PathBuf};

pub use config::{Experiment, ExperimentConfig, IndexConfig, SpaceConfig, Suite};
pub use report::{Report, ReportRow, RowVerdict, Summary, CSV_HEADER, SCHEMA_VERSION};

use crate::bundle::{BundleModel, GlobalSection};
use crate::error::{Error, Result};

/// Environment variable naming the directory under which reports are
/// written.
pub const OUTPUT_ROOT_ENV: &str = "HSPHI_OUTPUT_ROOT";
const DEFAULT_OUTPUT_ROOT: &str = "hsphi-output";

/// Output root from the environment, or `hsphi-output` in the working
/// directory.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

/// Parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<Experiment> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<Experiment> {
    let raw: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    raw.resolve()
}

/// Runs a suite across its cutoffs and returns the report without writing
/// anything.
pub fn run_suite(experiment: &Experiment) -> Result<Report> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(experiment.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let rows = pool.install(|| suites::run(experiment))?;
    Ok(Report::new(experiment, rows))
}

/// Runs a suite and writes `rows.csv`, `report.json` and `trend.svg` under
/// `root`. Returns the report and the directory written.
pub fn run_and_write(experiment: &Experiment, root: &Path) -> Result<(Report, PathBuf)> {
    let report = run_suite(experiment)?;
    let dir = root.join(experiment.output_dir());
    report.write_all(&dir)?;
    Ok((report, dir))
}

/// Seeded band-limited sections with `|c_{r,k}| = ⟨k⟩^{−decay}` and uniform
/// phases on `model`.
pub fn generate_sections(seed: u64, band: usize, count: usize, model: &BundleModel, decay: f64) -> Result<Vec<GlobalSection>> {
    if band > model.resolution() {
        return Err(Error::Parameter(format!(
            "band {band} exceeds the model resolution {}",
            model.resolution()
        )));
    }
    Ok((0..count as u64)
        .map(|i| GlobalSection::random(seed, i, model.rank(), band, decay))
        .collect())
}
