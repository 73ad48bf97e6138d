//! Parameter sweeps over squeezing, channel and herald settings.

use std::path::{Path, PathBuf};

use anyhow::Result;
use cvsteer::fock::{populations_from_radial_wigner, DensityMatrix};
use cvsteer::metrology::metrological_power;
use cvsteer::wigner::{negativity_closed_form, negativity_numeric, NegativityQuadrature};
use cvsteer::{format_value, ChannelParams, SubtractedStateParams, TwoModeCovariance};
use rayon::prelude::*;

use crate::config::{GridPoint, RunConfig};
use crate::output::{csv_cell, Manifest};

pub const SWEEP_HEADER: &str = "v_plus,v_minus,eta_a,eta_b,xi,steerability,n_closed,n_numeric,mu_a,mu_b,mu_ab,metrological_power,status";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Largest allowed gap between the closed form and the numeric oracle.
pub const ROUTE_TOL: f64 = 1e-6;
/// Values at or below this count as zero in the consistency checks.
pub const ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowValues {
    pub steerability: f64,
    pub n_closed: f64,
    pub n_numeric: f64,
    pub mu_a: f64,
    pub mu_b: f64,
    pub mu_ab: f64,
    pub metrological_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: GridPoint,
    pub outcome: std::result::Result<RowValues, String>,
}

impl SweepRow {
    /// `ok`, or a description of what is wrong with the row.
    pub fn status(&self) -> String {
        match &self.outcome {
            Ok(values) => {
                let problems = row_problems(self.point.xi, values);
                if problems.is_empty() {
                    "ok".to_string()
                } else {
                    format!("inconsistent: {}", problems.join("; "))
                }
            }
            Err(e) => format!("error: {e}"),
        }
    }

    pub fn to_csv(&self) -> String {
        let p = &self.point;
        let mut cells = vec![
            format_value(p.spec.v_plus()),
            format_value(p.spec.v_minus()),
            format_value(p.eta_a),
            format_value(p.eta_b),
            format_value(p.xi),
        ];
        match &self.outcome {
            Ok(v) => cells.extend(
                [
                    v.steerability,
                    v.n_closed,
                    v.n_numeric,
                    v.mu_a,
                    v.mu_b,
                    v.mu_ab,
                    v.metrological_power,
                ]
                .map(format_value),
            ),
            Err(_) => cells.extend(std::iter::repeat_n("nan".to_string(), 7)),
        }
        cells.push(csv_cell(&self.status()));
        cells.join(",")
    }
}

/// Cross-column checks every row must satisfy.
pub fn row_problems(xi: f64, v: &RowValues) -> Vec<String> {
    let mut problems = Vec::new();
    if (v.n_closed - v.n_numeric).abs() > ROUTE_TOL {
        problems.push(format!(
            "negativity routes differ by {:e}",
            (v.n_closed - v.n_numeric).abs()
        ));
    }
    if xi == 1.0 && v.n_closed > ZERO_TOL && v.steerability <= 0.0 {
        problems.push("negative without steering".to_string());
    }
    if v.metrological_power < 0.0 {
        problems.push("negative metrological power".to_string());
    }
    problems
}

pub fn evaluate_point(point: &GridPoint, n_max: usize) -> Result<RowValues> {
    let cm = TwoModeCovariance::from_squeezing(
        point.spec,
        ChannelParams::new(point.eta_a, point.eta_b)?,
    )?;
    let params = SubtractedStateParams::new(cm, point.xi)?;
    let closed = negativity_closed_form(&params)?;
    let numeric = negativity_numeric(&params, &NegativityQuadrature::default())?;
    let purities = cm.purities();
    let rho = DensityMatrix::from_populations(&populations_from_radial_wigner(&params, n_max)?)?;
    Ok(RowValues {
        steerability: cm.steerability_b_to_a(),
        n_closed: closed.value,
        n_numeric: numeric.value,
        mu_a: purities.mu_a,
        mu_b: purities.mu_b,
        mu_ab: purities.mu_ab,
        metrological_power: metrological_power(&rho)?.metrological_power,
    })
}

/// Evaluates every grid point. Points run in parallel; rows keep grid order.
pub fn sweep_rows(config: &RunConfig) -> Result<Vec<SweepRow>> {
    let n_max = config.tomography.n_max;
    Ok(config
        .points()?
        .par_iter()
        .map(|point| SweepRow {
            point: *point,
            outcome: evaluate_point(point, n_max).map_err(|e| format!("{e:#}")),
        })
        .collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 200);
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
}

impl SweepOutcome {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.status() != "ok").count()
    }
}

/// Writes `sweep.csv`, the resolved `config.toml` and `manifest.toml` into
/// `out_dir`. Failed rows are written and flagged rather than aborting.
pub fn run_sweep(config: &RunConfig, out_dir: &Path) -> Result<SweepOutcome> {
    let config_text = config.to_toml();
    let rows = sweep_rows(config)?;
    let mut manifest = Manifest::new("sweep", &config_text, config.sampling.seeds.clone());
    manifest.emit(out_dir, "config.toml", &config_text)?;
    let csv_path = manifest.emit(out_dir, SWEEP_FILE, &sweep_csv(&rows))?;
    manifest.rows = rows.len();
    manifest.failed_rows = rows.iter().filter(|r| r.status() != "ok").count();
    let manifest_path = manifest.write(out_dir)?;
    Ok(SweepOutcome {
        rows,
        csv_path,
        manifest_path,
    })
}
