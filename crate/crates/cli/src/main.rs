use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cvsteer::fock::{populations_from_radial_wigner, DensityMatrix, DEFAULT_N_MAX};
use cvsteer::metrology::metrological_power;
use cvsteer::quadrature::SquareGrid;
use cvsteer::sampling::{
    equally_spaced_phases, records_from_csv, records_to_csv, sample_homodyne_subtracted,
    DatasetMetadata, DEFAULT_PHASE_COUNT,
};
use cvsteer::tomography::{mle_reconstruct, MleOptions};
use cvsteer::wigner::{
    wigner_grid_csv, wigner_subtracted, xi_from_rates, NegativityQuadrature, NegativitySummary,
};
use cvsteer::{
    format_value, steering_threshold_eta_b, ChannelParams, PhaseSpacePoint, SqueezingSpec,
    SubtractedStateParams, TwoModeCovariance,
};
use cvsteer_cli::output::write_atomic;
use cvsteer_cli::{run_experiment_pipeline, run_sweep, verify_file, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "cvsteer", version, about = "Remote Wigner negativity from Gaussian EPR steering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Covariance matrix, symplectic spectrum and purities.
    State(StateArgs),
    /// Steerability and the steering threshold in eta_b.
    Steer(StateArgs),
    /// Wigner negativity of the heralded state by both routes.
    Negativity(StateArgs),
    /// Heralded-state Wigner function on a square grid, as CSV.
    WignerGrid {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, default_value_t = 5.0)]
        half_width: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Homodyne records of the heralded state.
    Sample {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, default_value_t = 30_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_PHASE_COUNT)]
        phases: usize,
        /// Output CSV; a `.meta` file is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Maximum-likelihood reconstruction from a records CSV.
    Tomo {
        records: PathBuf,
        #[arg(long, default_value_t = DEFAULT_N_MAX)]
        n_max: usize,
        #[arg(long)]
        detection_efficiency: Option<f64>,
        /// Destination of the density matrix; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quantum Fisher information and metrological power.
    Qfi {
        /// Density matrix file; the heralded state of the state flags otherwise.
        #[arg(long)]
        rho: Option<PathBuf>,
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, default_value_t = DEFAULT_N_MAX)]
        n_max: usize,
    },
    /// Grid sweep from a config file.
    Sweep(RunArgs),
    /// Simulated experiment from a config file.
    Pipeline(RunArgs),
    /// Checks a sweep or pipeline CSV; exits non-zero on any failing row.
    Verify { csv: PathBuf },
}

#[derive(Args, Clone)]
struct StateArgs {
    #[arg(long, allow_hyphen_values = true)]
    v_plus: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    v_minus: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    db_plus: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    db_minus: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    eta_a: f64,
    #[arg(long, default_value_t = 1.0)]
    eta_b: f64,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long, requires = "total_rate")]
    dark_rate: Option<f64>,
    #[arg(long, requires = "dark_rate")]
    total_rate: Option<f64>,
}

impl StateArgs {
    fn spec(&self) -> Result<SqueezingSpec> {
        Ok(match (self.v_plus, self.v_minus, self.db_plus, self.db_minus) {
            (Some(vp), Some(vm), None, None) => SqueezingSpec::new(vp, vm)?,
            (None, None, Some(dp), Some(dm)) => SqueezingSpec::from_db(dp, dm)?,
            _ => bail!("give --v-plus/--v-minus or --db-plus/--db-minus"),
        })
    }

    fn cm(&self) -> Result<TwoModeCovariance> {
        let ch = ChannelParams::new(self.eta_a, self.eta_b)?;
        Ok(TwoModeCovariance::from_squeezing(self.spec()?, ch)?)
    }

    fn xi(&self) -> Result<f64> {
        match (self.xi, self.dark_rate, self.total_rate) {
            (Some(_), Some(_), _) => bail!("give either --xi or the count rates"),
            (Some(xi), _, _) => Ok(xi),
            (None, Some(d), Some(t)) => Ok(xi_from_rates(d, t)?),
            _ => Ok(1.0),
        }
    }

    fn params(&self) -> Result<SubtractedStateParams> {
        Ok(SubtractedStateParams::new(self.cm()?, self.xi()?)?)
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    eta_b: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory; falls back to the config, then $CVSTEER_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut config = RunConfig::load(&self.config)?;
        config.apply(&Overrides {
            eta_b: self.eta_b,
            seed: self.seed,
            samples: self.samples,
            out: self.out.clone(),
        })?;
        Ok(config)
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn report_verify(csv: &std::path::Path) -> Result<bool> {
    let report = verify_file(csv)?;
    for (line, reason) in &report.failures {
        eprintln!("{}:{line}: {reason}", csv.display());
    }
    println!(
        "verified {} rows, {} failing",
        report.rows,
        report.failures.len()
    );
    Ok(report.passed())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::State(args) => {
            let cm = args.cm()?;
            let (lo, hi) = cm.symplectic_eigenvalues();
            let p = cm.purities();
            print!("{}", cm.to_text());
            println!("nu_minus = {}", format_value(lo));
            println!("nu_plus = {}", format_value(hi));
            println!("mu_a = {}", format_value(p.mu_a));
            println!("mu_b = {}", format_value(p.mu_b));
            println!("mu_ab = {}", format_value(p.mu_ab));
        }
        Command::Steer(args) => {
            let cm = args.cm()?;
            println!("steerability_b_to_a = {}", format_value(cm.steerability_b_to_a()));
            match steering_threshold_eta_b(args.spec()?, args.xi()?) {
                Ok(eta) => println!("threshold_eta_b = {}", format_value(eta)),
                Err(e) => println!("threshold_eta_b = none ({e})"),
            }
        }
        Command::Negativity(args) => {
            let summary =
                NegativitySummary::compute(&args.params()?, &NegativityQuadrature::default())?;
            println!("{summary}");
        }
        Command::WignerGrid {
            state,
            half_width,
            points,
            out,
        } => {
            if points < 2 || !half_width.is_finite() || half_width <= 0.0 {
                bail!("grid needs >= 2 points and a positive half width");
            }
            let params = state.params()?;
            let grid = SquareGrid { half_width, points };
            let csv = wigner_grid_csv(
                |x, p| wigner_subtracted(&params, PhaseSpacePoint::new(x, p)),
                &grid,
            );
            emit(out.as_ref(), &csv)?;
        }
        Command::Sample {
            state,
            samples,
            seed,
            phases,
            out,
        } => {
            let params = state.params()?;
            let phase_list = equally_spaced_phases(phases);
            let records = sample_homodyne_subtracted(&params, &phase_list, samples, seed)?;
            write_atomic(&out, &records_to_csv(&records))?;
            let meta = DatasetMetadata::new(&params, seed, samples, phases).to_text();
            write_atomic(&out.with_extension("meta"), &meta)?;
            eprintln!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Tomo {
            records,
            n_max,
            detection_efficiency,
            out,
        } => {
            let text = std::fs::read_to_string(&records)
                .with_context(|| format!("reading {}", records.display()))?;
            let data = records_from_csv(&text)?;
            let opts = MleOptions {
                n_max,
                detection_efficiency,
                ..Default::default()
            };
            let result = mle_reconstruct(&data, &opts)?;
            eprint!("{}", result.report(&opts));
            emit(out.as_ref(), &result.rho.to_text())?;
        }
        Command::Qfi { rho, state, n_max } => {
            let rho = match rho {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    DensityMatrix::from_text(&text)?
                }
                None => DensityMatrix::from_populations(&populations_from_radial_wigner(
                    &state.params()?,
                    n_max,
                )?)?,
            };
            print!("{}", metrological_power(&rho)?.to_text());
        }
        Command::Sweep(args) => {
            let config = args.load()?;
            let outcome = run_sweep(&config, &config.out_dir())?;
            println!(
                "wrote {} rows to {}",
                outcome.rows.len(),
                outcome.csv_path.display()
            );
            return report_verify(&outcome.csv_path);
        }
        Command::Pipeline(args) => {
            let config = args.load()?;
            let outcome = run_experiment_pipeline(&config, &config.out_dir())?;
            for r in &outcome.runs {
                println!(
                    "point {} seed {}: fidelity {} negativity {} ({:.1} s)",
                    r.point.index,
                    r.seed,
                    format_value(r.fidelity),
                    format_value(r.n_reconstructed),
                    r.elapsed.as_secs_f64()
                );
            }
            return report_verify(&outcome.csv_path);
        }
        Command::Verify { csv } => return report_verify(&csv),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
