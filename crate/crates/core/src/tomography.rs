//! State recovery from quadrature data.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fock::{apply_loss_fock, loss_adjoint, DensityMatrix, C64, DEFAULT_N_MAX};
use crate::gaussian::TwoModeCovariance;
use crate::sampling::{QuadratureRecord, TwoModeSample};

/// Fewer samples than this are rejected by [`estimate_cm`].
pub const MIN_CM_SAMPLES: usize = 100;
const CM_BATCHES: usize = 20;

/// Per-element covariance estimate with batch standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct CmEstimate {
    /// Block-structured matrix with `n`, `m` averaged over x and p.
    pub cm: TwoModeCovariance,
    /// `[Var x_A, Var p_A, Var x_B, Var p_B, Cov(x_A,x_B), Cov(p_A,p_B)]`.
    pub elements: [f64; 6],
    pub std_errors: [f64; 6],
}

fn variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (count, sum) = values.clone().fold((0usize, 0.0), |(c, s), v| (c + 1, s + v));
    let mean = sum / count as f64;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count as f64 - 1.0)
}

fn cm_elements(samples: &[TwoModeSample]) -> [f64; 6] {
    let var_xa = variance(samples.iter().map(|s| s.x_a));
    let var_pa = variance(samples.iter().map(|s| s.p_a));
    let var_xb = variance(samples.iter().map(|s| s.x_b));
    let var_pb = variance(samples.iter().map(|s| s.p_b));
    let var_dx = variance(samples.iter().map(|s| s.x_a - s.x_b));
    let var_dp = variance(samples.iter().map(|s| s.p_a - s.p_b));
    [
        var_xa,
        var_pa,
        var_xb,
        var_pb,
        0.5 * (var_xa + var_xb - var_dx),
        0.5 * (var_pa + var_pb - var_dp),
    ]
}

/// Covariance matrix from simultaneous quadrature records.
///
/// Diagonal entries are sample variances; the cross terms use
/// `Cov(a, b) = [Var a + Var b - Var(a - b)] / 2`. Standard errors come from
/// the spread of the same estimator over 20 contiguous batches.
pub fn estimate_cm(samples: &[TwoModeSample]) -> Result<CmEstimate> {
    if samples.len() < MIN_CM_SAMPLES {
        return Err(Error::InsufficientData {
            got: samples.len(),
            need: MIN_CM_SAMPLES,
        });
    }
    let elements = cm_elements(samples);
    let batch_len = samples.len() / CM_BATCHES;
    let batches: Vec<[f64; 6]> = samples
        .chunks_exact(batch_len)
        .take(CM_BATCHES)
        .map(cm_elements)
        .collect();
    let mut std_errors = [0.0; 6];
    for (i, se) in std_errors.iter_mut().enumerate() {
        let spread = variance(batches.iter().map(|b| b[i]));
        *se = (spread / CM_BATCHES as f64).sqrt();
    }
    let n = 0.5 * (elements[0] + elements[1]);
    let m = 0.5 * (elements[2] + elements[3]);
    let cm = TwoModeCovariance::new(n, m, elements[4], elements[5])?;
    Ok(CmEstimate {
        cm,
        elements,
        std_errors,
    })
}

/// Knobs of the maximum-likelihood reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub n_max: usize,
    pub max_iterations: usize,
    /// Stop once `|dL| <= tolerance * |L|` between iterations.
    pub tolerance: f64,
    /// Homodyne efficiency folded into the measurement operators.
    pub detection_efficiency: Option<f64>,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            n_max: DEFAULT_N_MAX,
            max_iterations: 2000,
            tolerance: 1e-9,
            detection_efficiency: None,
        }
    }
}

impl MleOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_max < 1 {
            return Err(invalid("n_max", "must be >= 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance", format!("must be > 0, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations", "must be >= 1"));
        }
        if let Some(eta) = self.detection_efficiency {
            crate::gaussian::check_efficiency("detection_efficiency", eta)?;
        }
        Ok(())
    }
}

/// Number-state wavefunctions `<x|k>`, `k = 0..=n_max`, for `x = a + a†`.
///
/// Uses `psi_0 = (2 pi)^{-1/4} e^{-x^2/4}` and the normalized three-term
/// recursion `psi_{k+1} = (x psi_k - sqrt(k) psi_{k-1}) / sqrt(k+1)`, which
/// stays bounded for every order and needs no rescaling.
pub fn quadrature_wavefunctions(x: f64, n_max: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(n_max + 1);
    psi.push((2.0 * PI).powf(-0.25) * (-x * x / 4.0).exp());
    if n_max >= 1 {
        psi.push(x * psi[0]);
    }
    for k in 1..n_max {
        let next = (x * psi[k] - (k as f64).sqrt() * psi[k - 1]) / ((k + 1) as f64).sqrt();
        psi.push(next);
    }
    psi
}

/// `\int x^2 |<x|0>|^2 dx`; must equal 1 in this convention.
fn vacuum_variance_check() -> f64 {
    let h = 0.01;
    (-2400..=2400)
        .map(|i| {
            let x = i as f64 * h;
            let psi = quadrature_wavefunctions(x, 0)[0];
            x * x * psi * psi * h
        })
        .sum()
}

#[derive(Debug, Clone)]
pub struct MleResult {
    pub rho: DensityMatrix,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub converged: bool,
    /// Log-likelihood after each accepted iteration, starting with the
    /// maximally mixed state.
    pub history: Vec<f64>,
}

impl MleResult {
    pub fn trace_deficit(&self) -> f64 {
        self.rho.trace_deficit()
    }

    /// `key = value` run report.
    pub fn report(&self, opts: &MleOptions) -> String {
        format!(
            "n_max = {}\nmax_iterations = {}\ntolerance = {:e}\ndetection_efficiency = {}\niterations = {}\nconverged = {}\nlog_likelihood = {:?}\ntrace_deficit = {:e}\n",
            opts.n_max,
            opts.max_iterations,
            opts.tolerance,
            opts.detection_efficiency.map_or("none".to_string(), |e| format!("{e:?}")),
            self.iterations,
            self.converged,
            self.log_likelihood,
            self.trace_deficit(),
        )
    }
}

/// Records sharing one local-oscillator phase, with wavefunctions cached
/// row-major (`dim` values per record).
struct PhaseGroup {
    phase: f64,
    psi: Vec<f64>,
}

const CHUNK: usize = 1024;

struct Likelihood {
    groups: Vec<PhaseGroup>,
    dim: usize,
    efficiency: Option<f64>,
}

impl Likelihood {
    fn new(records: &[QuadratureRecord], opts: &MleOptions) -> Self {
        let dim = opts.n_max + 1;
        let mut by_phase: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for r in records {
            by_phase
                .entry(r.phase.to_bits())
                .or_default()
                .extend(quadrature_wavefunctions(r.value, opts.n_max));
        }
        let groups = by_phase
            .into_iter()
            .map(|(bits, psi)| PhaseGroup {
                phase: f64::from_bits(bits),
                psi,
            })
            .collect();
        Self {
            groups,
            dim,
            efficiency: opts.detection_efficiency,
        }
    }

    /// Log-likelihood of `rho` and the iteration operator
    /// `R = sum_i Pi_i / Tr(Pi_i rho)`.
    fn evaluate(&self, rho: &DMatrix<C64>) -> Result<(f64, DMatrix<C64>)> {
        let dim = self.dim;
        // Outcome probabilities see the state after detector loss.
        let seen = match self.efficiency {
            Some(eta) if eta < 1.0 => {
                apply_loss_fock(&DensityMatrix::new(rho.clone())?, eta)?.matrix().clone()
            }
            _ => rho.clone(),
        };
        let mut log_l = 0.0;
        let mut r = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
        for group in &self.groups {
            // <x,theta| rho |x,theta> = psi^T Re(S) psi with
            // S_jk = rho_jk e^{i(k-j) theta}.
            let rotation: Vec<C64> = (0..dim)
                .map(|k| C64::from_polar(1.0, k as f64 * group.phase))
                .collect();
            let rotated: Vec<f64> = (0..dim * dim)
                .map(|idx| {
                    let (j, k) = (idx / dim, idx % dim);
                    (seen[(j, k)] * rotation[k] * rotation[j].conj()).re
                })
                .collect();
            let partials: Vec<(f64, Vec<f64>)> = group
                .psi
                .par_chunks(CHUNK * dim)
                .map(|chunk| {
                    let mut ll = 0.0;
                    let mut acc = vec![0.0; dim * dim];
                    let mut tmp = vec![0.0; dim];
                    for psi in chunk.chunks_exact(dim) {
                        for j in 0..dim {
                            let row = &rotated[j * dim..(j + 1) * dim];
                            tmp[j] = row.iter().zip(psi).map(|(a, b)| a * b).sum();
                        }
                        let prob: f64 = tmp.iter().zip(psi).map(|(a, b)| a * b).sum();
                        ll += prob.ln();
                        let w = 1.0 / prob;
                        for j in 0..dim {
                            let pj = w * psi[j];
                            for k in j..dim {
                                acc[j * dim + k] += pj * psi[k];
                            }
                        }
                    }
                    (ll, acc)
                })
                .collect();
            let mut acc = vec![0.0; dim * dim];
            for (ll, part) in &partials {
                log_l += ll;
                for (a, b) in acc.iter_mut().zip(part) {
                    *a += b;
                }
            }
            // |x,theta><x,theta|_jk = psi_j psi_k e^{i(j-k) theta}
            for j in 0..dim {
                for k in j..dim {
                    let value = rotation[j] * rotation[k].conj() * acc[j * dim + k];
                    r[(j, k)] += value;
                    if k != j {
                        r[(k, j)] += value.conj();
                    }
                }
            }
        }
        if !log_l.is_finite() {
            return Err(Error::InvalidDensityMatrix(
                "state assigns zero probability to a record".into(),
            ));
        }
        let r = match self.efficiency {
            Some(eta) if eta < 1.0 => loss_adjoint(&r, eta),
            _ => r,
        };
        Ok((log_l, r))
    }
}

fn normalized_sandwich(left: &DMatrix<C64>, rho: &DMatrix<C64>) -> DMatrix<C64> {
    let out = left * rho * left.adjoint();
    let out = (&out + out.adjoint()).scale(0.5);
    let trace = out.trace().re;
    out.unscale(trace)
}

/// Iterative maximum-likelihood reconstruction from homodyne records.
///
/// Each step applies `rho -> R rho R / Tr(...)`. If that step would lower
/// the likelihood, the diluted update `(I + eps R) rho (I + eps R)` is used
/// with `eps` halved until the likelihood does not decrease, so the recorded
/// history is monotone. The loop ends when the relative change drops below
/// `opts.tolerance`, or after `opts.max_iterations` (then `converged` is
/// false and the last state is still returned).
pub fn mle_reconstruct(records: &[QuadratureRecord], opts: &MleOptions) -> Result<MleResult> {
    opts.validate()?;
    if records.is_empty() {
        return Err(Error::InsufficientData { got: 0, need: 1 });
    }
    let vac = vacuum_variance_check();
    if (vac - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDensityMatrix(format!(
            "quadrature convention check failed: vacuum variance {vac}"
        )));
    }
    let likelihood = Likelihood::new(records, opts);
    let dim = likelihood.dim;
    let identity = DMatrix::<C64>::identity(dim, dim);
    let mut rho = identity.unscale(dim as f64);
    let (mut log_l, mut r) = likelihood.evaluate(&rho)?;
    let mut history = vec![log_l];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let mut candidate = normalized_sandwich(&r, &rho);
        let (mut cand_l, mut cand_r) = likelihood.evaluate(&candidate)?;
        let mut eps = 1.0;
        while cand_l < log_l && eps > 1e-8 {
            let left = &identity + r.scale(eps);
            candidate = normalized_sandwich(&left, &rho);
            (cand_l, cand_r) = likelihood.evaluate(&candidate)?;
            eps *= 0.5;
        }
        if cand_l < log_l {
            // No ascent direction left at this precision.
            converged = true;
            break;
        }
        let change = cand_l - log_l;
        rho = candidate;
        log_l = cand_l;
        r = cand_r;
        history.push(log_l);
        if change <= opts.tolerance * log_l.abs() {
            converged = true;
            break;
        }
    }
    Ok(MleResult {
        rho: DensityMatrix::new(rho)?,
        iterations,
        log_likelihood: log_l,
        converged,
        history,
    })
}
