//! Seeded Monte-Carlo quadrature data.
//!
//! # Generator
//!
//! Every stream is `chacha20-le64/boxmuller/v1`:
//!
//! - ChaCha20 (20 rounds, 64-bit block counter starting at 0, zero nonce)
//!   keyed with the 64-bit seed in little-endian order in bytes 0..8 and
//!   zeros elsewhere. Output words are read as consecutive little-endian
//!   `u64`s of the keystream.
//! - Uniforms: `(w >> 11) * 2^-53` in `[0, 1)`.
//! - Normals: Box-Muller on two uniforms `u1, u2`, with
//!   `r = sqrt(-2 ln(1 - u1))`, yielding `r cos(2 pi u2)` then
//!   `r sin(2 pi u2)`.
//!
//! A port that follows these three rules reproduces every dataset bit for bit
//! (modulo libm differences in `ln`, `cos`, `sin`).

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{Cholesky, Vector4};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{invalid, Error, Result};
use crate::gaussian::TwoModeCovariance;
use crate::wigner::{MarginalDensity, SubtractedStateParams};

pub const GENERATOR_ID: &str = "chacha20-le64/boxmuller/v1";

/// Default envelope variance relative to the state's variance `m`.
pub const ENVELOPE_FACTOR: f64 = 1.2;

/// Default number of equally spaced homodyne phases in `[0, pi)`.
pub const DEFAULT_PHASE_COUNT: usize = 12;

/// Deterministic random stream; see the module docs for the exact algorithm.
pub struct SeededStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Self {
            rng: ChaCha20Rng::from_seed(key),
            spare: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

/// One homodyne outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureRecord {
    /// Local-oscillator phase in `[0, pi)`.
    pub phase: f64,
    pub value: f64,
}

/// Simultaneous quadratures of both modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeSample {
    pub x_a: f64,
    pub p_a: f64,
    pub x_b: f64,
    pub p_b: f64,
}

/// `count` equally spaced phases `k pi / count`.
pub fn equally_spaced_phases(count: usize) -> Vec<f64> {
    (0..count).map(|k| k as f64 * PI / count as f64).collect()
}

/// Zero-mean Gaussian draws with covariance `cm`, via its Cholesky factor.
pub fn sample_gaussian_two_mode(
    cm: &TwoModeCovariance,
    count: usize,
    seed: u64,
) -> Result<Vec<TwoModeSample>> {
    if count == 0 {
        return Err(invalid("count", "must be >= 1"));
    }
    // Re-validate in case the value was built through a path that skipped it.
    let cm = TwoModeCovariance::new(cm.n(), cm.m(), cm.c1(), cm.c2())?;
    let chol = Cholesky::new(cm.matrix()).ok_or(Error::NonPhysical(f64::NAN))?;
    let l = chol.l();
    let mut stream = SeededStream::new(seed);
    Ok((0..count)
        .map(|_| {
            let z = Vector4::from_fn(|_, _| stream.standard_normal());
            let s = l * z;
            TwoModeSample {
                x_a: s[0],
                p_a: s[1],
                x_b: s[2],
                p_b: s[3],
            }
        })
        .collect())
}

/// Rejection sampler for the homodyne marginal of the heralded state under a
/// zero-mean Gaussian envelope.
///
/// With `P(x) = e^{-x^2/2m}(A x^2 + B)` and envelope `g = N(0, v)`, `v > m`,
/// the ratio `P/g` depends on `t = x^2` through `e^{-kt}(At + B)` with
/// `k = 1/2m - 1/2v`. Its maximum sits at `t* = max(0, 1/k - B/A)`, which
/// gives the acceptance bound in closed form.
#[derive(Debug, Clone, Copy)]
pub struct HomodyneSampler {
    marginal: MarginalDensity,
    envelope_variance: f64,
    bound: f64,
}

impl HomodyneSampler {
    pub fn new(params: &SubtractedStateParams, envelope_factor: f64) -> Result<Self> {
        if !(envelope_factor > 1.0 && envelope_factor.is_finite()) {
            return Err(invalid(
                "envelope_factor",
                format!("must be finite and > 1, got {envelope_factor}"),
            ));
        }
        let marginal = MarginalDensity::new(params)?;
        let m = marginal.variance;
        let v = envelope_factor * m;
        let k = 0.5 / m - 0.5 / v;
        let (a, b) = (marginal.quadratic, marginal.constant);
        let t_star = if a > 0.0 { (1.0 / k - b / a).max(0.0) } else { 0.0 };
        let bound = (2.0 * PI * v).sqrt() * (-k * t_star).exp() * (a * t_star + b);
        let sampler = Self {
            marginal,
            envelope_variance: v,
            bound,
        };
        // Soundness check of the analytic bound on a dense grid.
        let half = 12.0 * v.sqrt();
        for i in 0..=4000 {
            let x = -half + 2.0 * half * i as f64 / 4000.0;
            sampler.check(x)?;
        }
        Ok(sampler)
    }

    fn envelope_pdf(&self, x: f64) -> f64 {
        (-x * x / (2.0 * self.envelope_variance)).exp()
            / (2.0 * PI * self.envelope_variance).sqrt()
    }

    fn check(&self, x: f64) -> Result<f64> {
        let ratio = self.marginal.pdf(x) / self.envelope_pdf(x);
        if ratio > self.bound * (1.0 + 1e-9) || ratio < 0.0 {
            return Err(Error::EnvelopeViolation {
                x,
                ratio,
                bound: self.bound,
            });
        }
        Ok(ratio)
    }

    /// `sup P/g`; the expected acceptance rate is its inverse.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn acceptance_rate(&self) -> f64 {
        1.0 / self.bound
    }

    pub fn envelope_variance(&self) -> f64 {
        self.envelope_variance
    }

    pub fn marginal(&self) -> &MarginalDensity {
        &self.marginal
    }

    /// Draws one value; returns it with the number of candidates consumed.
    pub fn draw(&self, stream: &mut SeededStream) -> Result<(f64, usize)> {
        let sd = self.envelope_variance.sqrt();
        let mut tries = 0;
        loop {
            tries += 1;
            let x = sd * stream.standard_normal();
            let u = stream.uniform();
            let ratio = self.check(x)?;
            if u * self.bound < ratio {
                return Ok((x, tries));
            }
        }
    }
}

/// Homodyne records of the heralded state. The marginal does not depend on
/// the phase, so phases are assigned round-robin from `phases`.
pub fn sample_homodyne_subtracted(
    params: &SubtractedStateParams,
    phases: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<QuadratureRecord>> {
    sample_homodyne_with(
        &HomodyneSampler::new(params, ENVELOPE_FACTOR)?,
        phases,
        count,
        seed,
    )
}

pub fn sample_homodyne_with(
    sampler: &HomodyneSampler,
    phases: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<QuadratureRecord>> {
    if phases.is_empty() {
        return Err(invalid("phases", "need at least one phase"));
    }
    if let Some(bad) = phases.iter().find(|p| !(**p >= 0.0 && **p < PI)) {
        return Err(invalid("phases", format!("phase {bad} outside [0, pi)")));
    }
    let mut stream = SeededStream::new(seed);
    (0..count)
        .map(|i| {
            let (value, _) = sampler.draw(&mut stream)?;
            Ok(QuadratureRecord {
                phase: phases[i % phases.len()],
                value,
            })
        })
        .collect()
}

/// Dataset CSV with header `phase,value`. Values are written in shortest
/// round-trip form so a reload reproduces the records exactly.
pub fn records_to_csv(records: &[QuadratureRecord]) -> String {
    let mut out = String::from("phase,value\n");
    for r in records {
        let _ = writeln!(out, "{:?},{:?}", r.phase, r.value);
    }
    out
}

pub fn records_from_csv(text: &str) -> Result<Vec<QuadratureRecord>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some(h) if h.trim() == "phase,value" => {}
        other => return Err(Error::Parse(format!("expected `phase,value` header, got {other:?}"))),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let mut parts = line.split(',');
            let mut field = |name: &str| -> Result<f64> {
                parts
                    .next()
                    .ok_or_else(|| Error::Parse(format!("row {}: missing {name}", i + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: bad {name}: {e}", i + 1)))
            };
            let phase = field("phase")?;
            let value = field("value")?;
            if !(0.0..PI).contains(&phase) || !value.is_finite() {
                return Err(Error::Parse(format!("row {}: invalid record", i + 1)));
            }
            Ok(QuadratureRecord { phase, value })
        })
        .collect()
}

/// Sidecar metadata for a generated dataset, as `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMetadata {
    pub n: f64,
    pub m: f64,
    pub c1: f64,
    pub c2: f64,
    pub xi: f64,
    pub seed: u64,
    pub count: usize,
    pub phase_count: usize,
}

impl DatasetMetadata {
    pub fn new(params: &SubtractedStateParams, seed: u64, count: usize, phase_count: usize) -> Self {
        let cm = params.cm();
        Self {
            n: cm.n(),
            m: cm.m(),
            c1: cm.c1(),
            c2: cm.c2(),
            xi: params.xi(),
            seed,
            count,
            phase_count,
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "generator = \"{GENERATOR_ID}\"\nenvelope_factor = {:?}\nn = {:?}\nm = {:?}\nc1 = {:?}\nc2 = {:?}\nxi = {:?}\nseed = {}\ncount = {}\nphase_count = {}\n",
            ENVELOPE_FACTOR, self.n, self.m, self.c1, self.c2, self.xi, self.seed, self.count, self.phase_count
        )
    }
}
