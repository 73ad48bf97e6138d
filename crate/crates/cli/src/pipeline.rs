//! Simulated experiment: heralded homodyne data, reconstruction and figures
//! of merit for every grid point and seed.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use cvsteer::fock::{
    density_negativity, fidelity, populations_from_radial_wigner, wigner_from_density,
    DensityMatrix,
};
use cvsteer::metrology::metrological_power;
use cvsteer::quadrature::SquareGrid;
use cvsteer::sampling::{
    equally_spaced_phases, records_to_csv, sample_homodyne_subtracted, DatasetMetadata,
};
use cvsteer::tomography::mle_reconstruct;
use cvsteer::wigner::{negativity_closed_form, wigner_grid_csv, NegativityQuadrature};
use cvsteer::{
    format_value, ChannelParams, PhaseSpacePoint, SubtractedStateParams, TwoModeCovariance,
};

use crate::config::{GridPoint, RunConfig};
use crate::output::Manifest;

pub const PIPELINE_HEADER: &str = "point,seed,v_plus,v_minus,eta_a,eta_b,xi,fidelity,n_theory,n_reconstructed,metrological_power,iterations,converged,log_likelihood";
pub const PIPELINE_FILE: &str = "pipeline.csv";

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub point: GridPoint,
    pub seed: u64,
    pub fidelity: f64,
    pub n_theory: f64,
    pub n_reconstructed: f64,
    pub metrological_power: f64,
    pub iterations: usize,
    pub converged: bool,
    pub log_likelihood: f64,
    pub rho: DensityMatrix,
    /// Wall time of this run; reported on stdout only, never written to files.
    pub elapsed: Duration,
}

impl PipelineRun {
    pub fn to_csv(&self) -> String {
        let p = &self.point;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.index,
            self.seed,
            format_value(p.spec.v_plus()),
            format_value(p.spec.v_minus()),
            format_value(p.eta_a),
            format_value(p.eta_b),
            format_value(p.xi),
            format_value(self.fidelity),
            format_value(self.n_theory),
            format_value(self.n_reconstructed),
            format_value(self.metrological_power),
            self.iterations,
            self.converged,
            format_value(self.log_likelihood),
        )
    }

    /// `key = value` summary of one run, without the reconstruction details.
    pub fn report(&self) -> String {
        let p = &self.point;
        format!(
            "v_plus = {}\nv_minus = {}\neta_a = {}\neta_b = {}\nxi = {}\nseed = {}\nfidelity = {}\nn_theory = {}\nn_reconstructed = {}\nmetrological_power = {}\n",
            format_value(p.spec.v_plus()),
            format_value(p.spec.v_minus()),
            format_value(p.eta_a),
            format_value(p.eta_b),
            format_value(p.xi),
            self.seed,
            format_value(self.fidelity),
            format_value(self.n_theory),
            format_value(self.n_reconstructed),
            format_value(self.metrological_power),
        )
    }
}

pub fn point_params(point: &GridPoint) -> Result<SubtractedStateParams> {
    let cm = TwoModeCovariance::from_squeezing(
        point.spec,
        ChannelParams::new(point.eta_a, point.eta_b)?,
    )?;
    Ok(SubtractedStateParams::new(cm, point.xi)?)
}

/// Files produced by one run, relative to the output directory.
pub struct RunFiles {
    pub records: String,
    pub metadata: String,
    pub rho: String,
    pub wigner: String,
    pub report: String,
}

/// Sample, reconstruct and score one grid point with one seed. Returns the
/// run and the text of its files.
pub fn run_single(
    config: &RunConfig,
    point: &GridPoint,
    seed: u64,
) -> Result<(PipelineRun, RunFiles)> {
    let start = Instant::now();
    let params = point_params(point)?;
    let phases = equally_spaced_phases(config.sampling.phases);
    let records = sample_homodyne_subtracted(&params, &phases, config.sampling.samples, seed)
        .context("sampling homodyne records")?;
    let metadata =
        DatasetMetadata::new(&params, seed, config.sampling.samples, phases.len()).to_text();
    let opts = config.tomography.mle_options();
    let mle = mle_reconstruct(&records, &opts).context("maximum-likelihood reconstruction")?;
    let theory =
        DensityMatrix::from_populations(&populations_from_radial_wigner(&params, opts.n_max)?)?;
    let fid = fidelity(&mle.rho, &theory)?;
    let n_reconstructed = density_negativity(&mle.rho, &NegativityQuadrature::default())
        .context("negativity of the reconstruction")?
        .value;
    let grid = SquareGrid {
        half_width: config.tomography.grid_half_width,
        points: config.tomography.grid_points,
    };
    let wigner = wigner_grid_csv(
        |x, p| wigner_from_density(&mle.rho, PhaseSpacePoint::new(x, p)),
        &grid,
    );
    let run = PipelineRun {
        point: *point,
        seed,
        fidelity: fid,
        n_theory: negativity_closed_form(&params)?.value,
        n_reconstructed,
        metrological_power: metrological_power(&mle.rho)?.metrological_power,
        iterations: mle.iterations,
        converged: mle.converged,
        log_likelihood: mle.log_likelihood,
        rho: mle.rho.clone(),
        elapsed: start.elapsed(),
    };
    let files = RunFiles {
        records: records_to_csv(&records),
        metadata,
        rho: mle.rho.to_text(),
        wigner,
        report: format!("{}{}", run.report(), mle.report(&opts)),
    };
    Ok((run, files))
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub runs: Vec<PipelineRun>,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
}

/// Runs every grid point with every seed, in order. Each run gets its own
/// directory `p<index>_s<seed>`; `pipeline.csv` collects one row per run.
pub fn run_experiment_pipeline(config: &RunConfig, out_dir: &Path) -> Result<PipelineOutcome> {
    let config_text = config.to_toml();
    let mut manifest = Manifest::new("pipeline", &config_text, config.sampling.seeds.clone());
    manifest.emit(out_dir, "config.toml", &config_text)?;
    let mut runs = Vec::new();
    let mut csv = format!("{PIPELINE_HEADER}\n");
    for point in config.points()? {
        for &seed in &config.sampling.seeds {
            let (run, files) = run_single(config, &point, seed)
                .with_context(|| format!("grid point {} seed {seed}", point.index))?;
            let dir = format!("p{:03}_s{seed}", point.index);
            manifest.emit(out_dir, &format!("{dir}/records.csv"), &files.records)?;
            manifest.emit(out_dir, &format!("{dir}/dataset.meta"), &files.metadata)?;
            manifest.emit(out_dir, &format!("{dir}/rho.txt"), &files.rho)?;
            manifest.emit(out_dir, &format!("{dir}/wigner.csv"), &files.wigner)?;
            manifest.emit(out_dir, &format!("{dir}/report.txt"), &files.report)?;
            csv.push_str(&run.to_csv());
            csv.push('\n');
            runs.push(run);
        }
    }
    let csv_path = manifest.emit(out_dir, PIPELINE_FILE, &csv)?;
    manifest.rows = runs.len();
    let manifest_path = manifest.write(out_dir)?;
    Ok(PipelineOutcome {
        runs,
        csv_path,
        manifest_path,
    })
}
