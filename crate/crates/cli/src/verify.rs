//! Post-hoc checks of written sweep and pipeline tables.

use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::pipeline::PIPELINE_HEADER;
use crate::sweep::{row_problems, RowValues, SWEEP_HEADER};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub rows: usize,
    /// `(line number, reason)` for every failing row.
    pub failures: Vec<(usize, String)>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn parse(cell: &str) -> Result<f64> {
    cell.parse::<f64>()
        .with_context(|| format!("not a number: {cell:?}"))
}

fn check_sweep_row(cells: &[&str]) -> Result<()> {
    let status = cells[12];
    if status != "ok" {
        bail!("status {status:?}");
    }
    let num: Vec<f64> = cells[..12].iter().map(|c| parse(c)).collect::<Result<_>>()?;
    let values = RowValues {
        steerability: num[5],
        n_closed: num[6],
        n_numeric: num[7],
        mu_a: num[8],
        mu_b: num[9],
        mu_ab: num[10],
        metrological_power: num[11],
    };
    let problems = row_problems(num[4], &values);
    if !problems.is_empty() {
        bail!("{}", problems.join("; "));
    }
    if let Some(mu) = [values.mu_a, values.mu_b, values.mu_ab]
        .iter()
        .find(|mu| !(**mu > 0.0 && **mu <= 1.0 + 1e-9))
    {
        bail!("purity {mu} outside (0, 1]");
    }
    Ok(())
}

fn check_pipeline_row(cells: &[&str]) -> Result<()> {
    let fidelity = parse(cells[7])?;
    if !(0.0..=1.0 + 1e-9).contains(&fidelity) {
        bail!("fidelity {fidelity} outside [0, 1]");
    }
    for (name, idx) in [("n_reconstructed", 9), ("metrological_power", 10)] {
        if parse(cells[idx])? < 0.0 {
            bail!("{name} is negative");
        }
    }
    Ok(())
}

/// Checks every row of a sweep or pipeline CSV.
pub fn verify_text(text: &str) -> Result<VerifyReport> {
    let mut lines = text.lines();
    let header = lines.next().context("empty file")?;
    let (columns, check): (usize, fn(&[&str]) -> Result<()>) = if header == SWEEP_HEADER {
        (SWEEP_HEADER.split(',').count(), check_sweep_row)
    } else if header == PIPELINE_HEADER {
        (PIPELINE_HEADER.split(',').count(), check_pipeline_row)
    } else {
        bail!("unrecognized header {header:?}");
    };
    let mut report = VerifyReport::default();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        report.rows += 1;
        let cells: Vec<&str> = line.split(',').collect();
        let outcome = if cells.len() != columns {
            Err(anyhow::anyhow!("expected {columns} columns, got {}", cells.len()))
        } else {
            check(&cells)
        };
        if let Err(e) = outcome {
            report.failures.push((line_no, format!("{e:#}")));
        }
    }
    Ok(report)
}

pub fn verify_file(path: &Path) -> Result<VerifyReport> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    verify_text(&text)
}
