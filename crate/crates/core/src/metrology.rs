//! Quantum Fisher information for quadrature displacements and the
//! metrological power built from it.
//!
//! The generator is `g_phi = x_phi / sqrt(2)` with
//! `x_phi = a e^{-i phi} + a† e^{i phi}`, so the vacuum has generator
//! variance 1/2 and QFI 2. Since `2 |<j|g|k>|^2 = |<j|x_phi|k>|^2`, the sum is
//! evaluated directly with `x_phi` matrix elements.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::Result;
use crate::fock::{DensityMatrix, C64};

/// Eigenvalue pairs with `lambda_j + lambda_k` at or below this are skipped.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;
/// QFI of the vacuum: the standard quantum limit.
pub const VACUUM_QFI: f64 = 2.0;
pub const PHASE_GRID: usize = 64;
const DIAGONAL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfiReport {
    pub f_max: f64,
    pub optimal_phase: f64,
    pub metrological_power: f64,
    /// Set for number-diagonal states, whose QFI does not depend on phase.
    pub phase_independent: bool,
}

impl QfiReport {
    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        format!(
            "f_max = {}\noptimal_phase = {}\nmetrological_power = {}\nphase_independent = {}\n",
            crate::format_value(self.f_max),
            crate::format_value(self.optimal_phase),
            crate::format_value(self.metrological_power),
            self.phase_independent
        )
    }
}

pub fn metrological_power_from_qfi(f: f64) -> f64 {
    (f - VACUUM_QFI).max(0.0) / 4.0
}

/// `rho` in its eigenbasis together with the annihilation operator expressed
/// in that basis. One empty level is appended so that `a†` acting on the top
/// populated level is not truncated.
struct Spectral {
    lambda: Vec<f64>,
    a: DMatrix<C64>,
}

impl Spectral {
    fn new(rho: &DensityMatrix) -> Result<Self> {
        let padded = rho.embed(rho.dim() + 1)?;
        let dim = padded.dim();
        let mut a = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
        for k in 1..dim {
            a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
        }
        if padded.is_diagonal(DIAGONAL_TOL) {
            return Ok(Self {
                lambda: padded.populations(),
                a,
            });
        }
        let eig = padded.eigen();
        let v = &eig.eigenvectors;
        Ok(Self {
            lambda: eig.eigenvalues.iter().map(|l| l.max(0.0)).collect(),
            a: v.adjoint() * a * v,
        })
    }

    fn qfi(&self, phase: f64) -> f64 {
        let rot = C64::from_polar(1.0, -phase);
        let dim = self.lambda.len();
        let mut f = 0.0;
        for j in 0..dim {
            for k in 0..dim {
                let sum = self.lambda[j] + self.lambda[k];
                if sum <= EIGENVALUE_FLOOR {
                    continue;
                }
                let diff = self.lambda[j] - self.lambda[k];
                let x = rot * self.a[(j, k)] + rot.conj() * self.a[(k, j)].conj();
                f += diff * diff / sum * x.norm_sqr();
            }
        }
        f
    }
}

/// QFI for estimating a displacement along the quadrature at `phase`.
pub fn qfi_quadrature(rho: &DensityMatrix, phase: f64) -> Result<f64> {
    Ok(Spectral::new(rho)?.qfi(phase))
}

/// Maximizes the QFI over `phase in [0, pi)`: a 64-point grid, then
/// golden-section refinement around the best grid point. Ties go to the
/// smaller phase.
pub fn metrological_power(rho: &DensityMatrix) -> Result<QfiReport> {
    let spectral = Spectral::new(rho)?;
    let phase_independent = rho.is_diagonal(DIAGONAL_TOL);
    if phase_independent {
        let f = spectral.qfi(0.0);
        return Ok(QfiReport {
            f_max: f,
            optimal_phase: 0.0,
            metrological_power: metrological_power_from_qfi(f),
            phase_independent,
        });
    }
    let step = PI / PHASE_GRID as f64;
    let values: Vec<f64> = (0..PHASE_GRID)
        .into_par_iter()
        .map(|i| spectral.qfi(i as f64 * step))
        .collect();
    let (best_idx, best) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let (phase, refined) = golden_max(
        |t| spectral.qfi(t),
        (best_idx as f64 - 1.0) * step,
        (best_idx as f64 + 1.0) * step,
    );
    let (f_max, optimal_phase) = if refined > best {
        (refined, phase.rem_euclid(PI))
    } else {
        (best, best_idx as f64 * step)
    };
    Ok(QfiReport {
        f_max,
        optimal_phase,
        metrological_power: metrological_power_from_qfi(f_max),
        phase_independent,
    })
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > 1e-10 {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let t = 0.5 * (lo + hi);
    (t, f(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_is_the_reference() {
        let vac = DensityMatrix::vacuum(6).unwrap();
        for i in 0..20 {
            let f = qfi_quadrature(&vac, i as f64 * 0.37).unwrap();
            assert!((f - 2.0).abs() < 1e-12);
        }
        let report = metrological_power(&vac).unwrap();
        assert_eq!(report.metrological_power, 0.0);
        assert!(report.phase_independent);
    }

    #[test]
    fn single_photon() {
        let one = DensityMatrix::fock_state(4, 1).unwrap();
        let report = metrological_power(&one).unwrap();
        assert!((report.f_max - 6.0).abs() < 1e-12);
        assert!((report.metrological_power - 1.0).abs() < 1e-12);
    }

    #[test]
    fn thermal_below_limit() {
        let th = DensityMatrix::thermal(40, 1.5).unwrap();
        let f = qfi_quadrature(&th, 0.3).unwrap();
        // 2 / (2 nbar + 1) with 2 nbar + 1 = variance
        assert!((f - 2.0 / 1.5).abs() < 1e-6, "{f}");
        assert_eq!(metrological_power(&th).unwrap().metrological_power, 0.0);
    }

    #[test]
    fn pure_superposition_matches_variance() {
        // (|0> + |2>)/sqrt(2): QFI = 2 Var(x_phi), phase dependent.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let amps = [C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)];
        let rho = DensityMatrix::pure(&amps).unwrap();
        for &phi in &[0.0f64, 0.4, 1.2] {
            // <x^2> = 1 + 2<a†a> + 2 Re(e^{-2i phi} <a^2>), <x> = 0
            let a2 = 2f64.sqrt() * 0.5;
            let var = 1.0 + 2.0 + 2.0 * a2 * (2.0 * phi).cos();
            let f = qfi_quadrature(&rho, phi).unwrap();
            assert!((f - 2.0 * var).abs() < 1e-10, "{phi}: {f} vs {}", 2.0 * var);
        }
        let report = metrological_power(&rho).unwrap();
        assert!(!report.phase_independent);
        assert!(report.optimal_phase.abs() < 1e-6 || (report.optimal_phase - PI).abs() < 1e-6);
        assert!((report.f_max - 2.0 * (3.0 + 2f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn text_form() {
        let report = metrological_power(&DensityMatrix::vacuum(3).unwrap()).unwrap();
        let text = report.to_text();
        assert!(text.contains("metrological_power = 0.00000000000e0"));
        assert!(text.contains("phase_independent = true"));
    }
}
