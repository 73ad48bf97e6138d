//! Run configuration, read from a TOML file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cvsteer::fock::DEFAULT_N_MAX;
use cvsteer::sampling::DEFAULT_PHASE_COUNT;
use cvsteer::tomography::MleOptions;
use cvsteer::wigner::xi_from_rates;
use cvsteer::SqueezingSpec;
use serde::{Deserialize, Serialize};

/// Environment variable naming the output directory when neither the config
/// nor `--out` sets one.
pub const OUT_DIR_ENV: &str = "CVSTEER_OUT";
pub const DEFAULT_OUT_DIR: &str = "cvsteer-out";
pub const DEFAULT_SAMPLES: usize = 30_000;

/// A scalar, an explicit list, or an inclusive `{ start, stop, step }` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Scalar(f64),
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Grid::Scalar(v) => Ok(vec![*v]),
            Grid::List(v) => Ok(v.clone()),
            Grid::Range { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    bail!("range needs step > 0 and stop >= start");
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                Ok((0..count).map(|i| start + i as f64 * step).collect())
            }
        }
    }
}

/// One resource state, as variances or in dB. `xi` overrides the herald
/// section for this entry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqueezingEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_plus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_minus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub db_plus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub db_minus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<Grid>,
}

impl SqueezingEntry {
    pub fn spec(&self) -> Result<SqueezingSpec> {
        let spec = match (self.v_plus, self.v_minus, self.db_plus, self.db_minus) {
            (Some(vp), Some(vm), None, None) => SqueezingSpec::new(vp, vm)?,
            (None, None, Some(dp), Some(dm)) => SqueezingSpec::from_db(dp, dm)?,
            _ => bail!("squeezing entry needs either v_plus/v_minus or db_plus/db_minus"),
        };
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub eta_a: Grid,
    pub eta_b: Grid,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeraldSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dark_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_rate: Option<f64>,
}

impl HeraldSection {
    fn values(&self) -> Result<Vec<f64>> {
        match (&self.xi, self.dark_rate, self.total_rate) {
            (Some(grid), None, None) => grid.values(),
            (None, Some(dark), Some(total)) => Ok(vec![xi_from_rates(dark, total)?]),
            (None, None, None) => Ok(vec![1.0]),
            _ => bail!("herald takes either xi or dark_rate/total_rate"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSection {
    pub samples: usize,
    pub seeds: Vec<u64>,
    pub phases: usize,
}

impl Default for SamplingSection {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seeds: vec![1],
            phases: DEFAULT_PHASE_COUNT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographySection {
    pub n_max: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection_efficiency: Option<f64>,
    /// Points per axis of the exported Wigner grid.
    pub grid_points: usize,
    pub grid_half_width: f64,
}

impl Default for TomographySection {
    fn default() -> Self {
        let mle = MleOptions::default();
        Self {
            n_max: DEFAULT_N_MAX,
            max_iterations: mle.max_iterations,
            tolerance: mle.tolerance,
            detection_efficiency: None,
            grid_points: 81,
            grid_half_width: 5.0,
        }
    }
}

impl TomographySection {
    pub fn mle_options(&self) -> MleOptions {
        MleOptions {
            n_max: self.n_max,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            detection_efficiency: self.detection_efficiency,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub squeezing: Vec<SqueezingEntry>,
    pub channel: ChannelSection,
    #[serde(default)]
    pub herald: HeraldSection,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub tomography: TomographySection,
    #[serde(default)]
    pub output: OutputSection,
}

/// One fully resolved grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub spec: SqueezingSpec,
    pub eta_a: f64,
    pub eta_b: f64,
    pub xi: f64,
}

/// Command-line values that replace config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub eta_b: Option<f64>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
}

fn check_unit(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        bail!("{name} grid is empty");
    }
    if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
        bail!("{name} value {bad} outside (0, 1]");
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).context("parsing run config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn apply(&mut self, overrides: &Overrides) -> Result<()> {
        if let Some(eta_b) = overrides.eta_b {
            self.channel.eta_b = Grid::Scalar(eta_b);
        }
        if let Some(seed) = overrides.seed {
            self.sampling.seeds = vec![seed];
        }
        if let Some(samples) = overrides.samples {
            self.sampling.samples = samples;
        }
        if let Some(out) = &overrides.out {
            self.output.dir = Some(out.clone());
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.squeezing.is_empty() {
            bail!("at least one [[squeezing]] entry is required");
        }
        for (i, entry) in self.squeezing.iter().enumerate() {
            entry.spec().with_context(|| format!("squeezing entry {i}"))?;
            if let Some(xi) = &entry.xi {
                check_unit("xi", &xi.values()?)?;
            }
        }
        check_unit("eta_a", &self.channel.eta_a.values()?)?;
        check_unit("eta_b", &self.channel.eta_b.values()?)?;
        check_unit("xi", &self.herald.values()?)?;
        if self.sampling.samples == 0 {
            bail!("samples must be >= 1");
        }
        if self.sampling.seeds.is_empty() {
            bail!("at least one seed is required");
        }
        if self.sampling.phases == 0 {
            bail!("phases must be >= 1");
        }
        self.tomography.mle_options().validate()?;
        if self.tomography.grid_points < 2 || !(self.tomography.grid_half_width > 0.0) {
            bail!("wigner grid needs >= 2 points and a positive half width");
        }
        Ok(())
    }

    /// Grid points in row order: squeezing entry, then `eta_a`, `eta_b`, `xi`.
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        let eta_a = self.channel.eta_a.values()?;
        let eta_b = self.channel.eta_b.values()?;
        let shared_xi = self.herald.values()?;
        let mut points = Vec::new();
        for entry in &self.squeezing {
            let spec = entry.spec()?;
            let xis = match &entry.xi {
                Some(grid) => grid.values()?,
                None => shared_xi.clone(),
            };
            for &a in &eta_a {
                for &b in &eta_b {
                    for &xi in &xis {
                        points.push(GridPoint {
                            index: points.len(),
                            spec,
                            eta_a: a,
                            eta_b: b,
                            xi,
                        });
                    }
                }
            }
        }
        Ok(points)
    }

    /// Config value, then `CVSTEER_OUT`, then `cvsteer-out`.
    pub fn out_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}
