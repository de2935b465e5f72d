//! End-to-end commands: simulate a project into triad files, analyze one
//! observed status into a [`ControlReport`], and draw the control charts.

mod analyze;
mod cache;
mod chart;
mod config;
mod report;
mod svg;

use std::path::Path;

use crate::dataset::{read_level, read_manifest, write_dataset_dir, Manifest};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::project::ProjectSpec;
use crate::simulation::run_ensemble_with;

pub use analyze::{analyze, Analysis, PredictionGrid, PREDICTION_GRID_HEADER};
pub use cache::{CacheKey, CachedModels};
pub use chart::{cmd_chart, render_charts, Annotation, ChartFiles, ChartTwin};
pub use config::{ModelGrids, RunConfig, SelectionConfig, DEFAULT_EV_LEVELS};
pub use report::*;

pub const RUN_CONFIG_FILE: &str = "run_config.json";

/// Simulates `config.runs` realizations and writes one triad CSV per EV
/// level, `manifest.json` and the run configuration into `out`.
pub fn cmd_simulate(
    config: &RunConfig,
    spec: &ProjectSpec,
    out: &Path,
    exec: Execution,
) -> Result<Manifest> {
    config.validate()?;
    let dataset = run_ensemble_with(exec, spec, config.runs, config.seed, &config.ev_levels)?;
    let manifest = write_dataset_dir(&dataset, out)?;
    let path = out.join(RUN_CONFIG_FILE);
    let text = serde_json::to_string_pretty(config)?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Analyzes the status `(at, ac, ev)`.
///
/// Triads come from `data` when it holds the level `ev / BAC`; a data
/// directory without that level is extended on demand with its own seed and
/// run count, and without `data` the ensemble is simulated from `config`.
/// Results are written to `config.output_dir` when set.
pub fn cmd_analyze(
    config: &RunConfig,
    spec: &ProjectSpec,
    at: f64,
    ac: f64,
    ev: f64,
    data: Option<&Path>,
    exec: Execution,
) -> Result<Analysis> {
    let bac = spec.bac();
    if !(ev.is_finite() && ev > 0.0 && ev < bac) {
        return Err(Error::Validation(format!("EV must lie strictly between 0 and BAC = {bac}, got {ev}")));
    }
    let status = spec.evm_status(at, ac, ev)?;
    let level = ev / bac;
    let mut config = config.clone();
    let rows = match data {
        Some(dir) => {
            let manifest = read_manifest(dir)?;
            if manifest.fingerprint != spec.fingerprint() {
                return Err(Error::Validation(format!(
                    "data in {} was simulated from a different project (fingerprint {} vs {})",
                    dir.display(),
                    manifest.fingerprint,
                    spec.fingerprint()
                )));
            }
            config.runs = manifest.n_runs;
            config.seed = manifest.seed;
            config.ev_levels = manifest.levels.iter().map(|l| l.ev_level).collect();
            match read_level(dir, level)? {
                Some((_, rows)) => rows,
                None => {
                    log::info!("level {level} not in {}; simulating it", dir.display());
                    config.ev_levels.push(level);
                    run_ensemble_with(exec, spec, config.runs, config.seed, &[level])?.rows
                }
            }
        }
        None => {
            config.ev_levels = vec![level];
            run_ensemble_with(exec, spec, config.runs, config.seed, &[level])?.rows
        }
    };
    let cache_dir = data
        .map(|d| d.join("cache"))
        .or_else(|| config.output_dir.as_ref().map(|o| Path::new(o).join("cache")));
    let analysis = analyze(spec, &rows, status, &config, cache_dir.as_deref(), exec)?;
    if let Some(out) = &config.output_dir {
        analysis.write(Path::new(out))?;
    }
    Ok(analysis)
}
