use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::fmt_sig9;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{level_set, GridSpec, GridValues, Polyline};
use crate::linalg::Point;
use crate::stats::quantile_sorted;

use super::bandwidth::{scv_bandwidth_with, BandwidthMatrix, BandwidthSelection, ScvOptions};
use super::density::KernelDensity;

/// Anomaly levels drawn as contours on charts.
pub const CONTOUR_LEVELS: [f64; 3] = [0.5, 0.75, 0.95];

pub const DENSITY_GRID_HEADER: [&str; 4] = ["t", "c", "density", "anomaly_score"];

#[derive(Debug, Clone, Copy)]
pub struct DensityConfig {
    /// Cap on the fitting half of the sample.
    pub max_fit: usize,
    /// Cap on the reference half.
    pub max_reference: usize,
    pub scv: ScvOptions,
    /// Nodes per axis of the chart grid.
    pub grid_nodes: usize,
    /// Chart grid padding around the data, in bandwidth standard deviations.
    pub grid_pad: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            max_fit: 20_000,
            max_reference: 20_000,
            scv: ScvOptions::default(),
            grid_nodes: 200,
            grid_pad: 3.0,
        }
    }
}

/// Fitted density plus the sorted densities of held-out reference points,
/// which calibrate the anomaly score.
#[derive(Debug, Clone)]
pub struct DensityModel {
    kde: KernelDensity,
    reference: Vec<f64>,
    selection: Option<BandwidthSelection>,
}

impl DensityModel {
    /// Splits `points` by parity of position: even positions fit the density
    /// (bandwidth by SCV), odd positions become the reference sample.
    pub fn fit(points: &[Point], cfg: &DensityConfig, exec: Execution) -> Result<Self> {
        let (fit, _) = Self::split(points, cfg)?;
        let selection = scv_bandwidth_with(&fit, &cfg.scv, exec)?;
        Self::fit_with_selection(points, cfg, selection, exec)
    }

    /// Same split as [`DensityModel::fit`] but with a bandwidth chosen
    /// earlier, for instance one read back from a cache.
    pub fn fit_with_selection(
        points: &[Point],
        cfg: &DensityConfig,
        selection: BandwidthSelection,
        exec: Execution,
    ) -> Result<Self> {
        let (fit, reference) = Self::split(points, cfg)?;
        let kde = KernelDensity::new(fit, selection.h)?;
        let mut model = Self::with_reference(kde, &reference, exec)?;
        model.selection = Some(selection);
        Ok(model)
    }

    fn split(points: &[Point], cfg: &DensityConfig) -> Result<(Vec<Point>, Vec<Point>)> {
        if points.len() < 6 {
            return Err(Error::InvalidInput(format!(
                "anomaly model needs at least 6 points, got {}",
                points.len()
            )));
        }
        let fit = points.iter().step_by(2).take(cfg.max_fit).copied().collect();
        let reference = points
            .iter()
            .skip(1)
            .step_by(2)
            .take(cfg.max_reference)
            .copied()
            .collect();
        Ok((fit, reference))
    }

    pub fn with_reference(kde: KernelDensity, reference: &[Point], exec: Execution) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::InvalidInput("reference sample is empty".into()));
        }
        let mut densities = kde.density_many(reference, exec);
        densities.sort_by(f64::total_cmp);
        Ok(Self {
            kde,
            reference: densities,
            selection: None,
        })
    }

    pub fn kde(&self) -> &KernelDensity {
        &self.kde
    }

    pub fn bandwidth(&self) -> BandwidthMatrix {
        self.kde.bandwidth()
    }

    pub fn selection(&self) -> Option<&BandwidthSelection> {
        self.selection.as_ref()
    }

    pub fn reference_densities(&self) -> &[f64] {
        &self.reference
    }

    pub fn density(&self, x: Point) -> f64 {
        self.kde.density(x)
    }

    /// Fraction of reference densities strictly above `f̂(x)`.
    pub fn anomaly_probability(&self, x: Point) -> f64 {
        self.anomaly_of_density(self.kde.density(x))
    }

    pub fn anomaly_of_density(&self, f: f64) -> f64 {
        let not_above = self.reference.partition_point(|&r| r <= f);
        (self.reference.len() - not_above) as f64 / self.reference.len() as f64
    }

    pub fn anomaly_many(&self, xs: &[Point], exec: Execution) -> Vec<f64> {
        exec.map(xs.len(), |i| self.anomaly_probability(xs[i]))
    }

    /// Density value whose superlevel set carries anomaly scores below `a`.
    pub fn density_threshold(&self, a: f64) -> f64 {
        quantile_sorted(&self.reference, 1.0 - a)
    }

    /// Bounding box of the fitted points padded by `cfg.grid_pad` bandwidth
    /// standard deviations per axis.
    pub fn chart_grid(&self, cfg: &DensityConfig) -> GridSpec {
        let (sx, sy) = self.bandwidth().axis_sd();
        GridSpec::around(
            self.kde.points(),
            cfg.grid_pad * sx,
            cfg.grid_pad * sy,
            cfg.grid_nodes,
            cfg.grid_nodes,
        )
    }

    pub fn density_grid(&self, grid: &GridSpec, exec: Execution) -> GridValues {
        self.kde.density_grid(grid, exec)
    }

    pub fn contours(&self, densities: &GridValues, levels: &[f64]) -> Vec<Contour> {
        levels
            .iter()
            .map(|&a| {
                let density = self.density_threshold(a);
                Contour {
                    anomaly: a,
                    density,
                    lines: level_set(densities, density),
                }
            })
            .collect()
    }
}

/// Level set `{ A = anomaly }` of a density grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub anomaly: f64,
    pub density: f64,
    pub lines: Vec<Polyline>,
}

/// Writes the `t,c,density,anomaly_score` grid export.
pub fn write_density_grid<W: Write>(
    model: &DensityModel,
    densities: &GridValues,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DENSITY_GRID_HEADER)?;
    let spec = &densities.spec;
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let f = densities.at(i, j);
            w.write_record([
                fmt_sig9(spec.x(i)),
                fmt_sig9(spec.y(j)),
                fmt_sig9(f),
                fmt_sig9(model.anomaly_of_density(f)),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<density grid>", e))?;
    Ok(())
}

/// Axis-aligned box of marginal percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRectangle {
    pub level: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub c_lo: f64,
    pub c_hi: f64,
}

impl ConfidenceRectangle {
    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.t_lo && p[0] <= self.t_hi && p[1] >= self.c_lo && p[1] <= self.c_hi
    }
}

/// Marginal empirical percentiles at `(1 ∓ level)/2` for each coordinate.
pub fn percentile_rectangle(points: &[Point], level: f64) -> Result<ConfidenceRectangle> {
    if points.len() < 2 {
        return Err(Error::InvalidInput(
            "percentile rectangle needs at least 2 points".into(),
        ));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!(
            "rectangle level must lie in (0, 1), got {level}"
        )));
    }
    let mut ts: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let mut cs: Vec<f64> = points.iter().map(|p| p[1]).collect();
    ts.sort_by(f64::total_cmp);
    cs.sort_by(f64::total_cmp);
    let (lo, hi) = ((1.0 - level) / 2.0, (1.0 + level) / 2.0);
    Ok(ConfidenceRectangle {
        level,
        t_lo: quantile_sorted(&ts, lo),
        t_hi: quantile_sorted(&ts, hi),
        c_lo: quantile_sorted(&cs, lo),
        c_hi: quantile_sorted(&cs, hi),
    })
}
