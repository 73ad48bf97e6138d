//! Truncated number-basis states of mode B.
//!
//! In the unit-vacuum-variance convention the Wigner function of the
//! operator `|j><k|` (`j >= k`) is
//!
//! ```text
//! W_jk(x, p) = (-1)^k / (2 pi) * sqrt(k!/j!) * (x - i p)^(j-k) * e^{-u/2} * L_k^(j-k)(u)
//! ```
//!
//! with `u = x^2 + p^2`, and `W_kj = conj(W_jk)`. Rescaling `x -> x/sqrt(2)`
//! from the `hbar = 1` convention halves each Wigner function and doubles the
//! area element, so the phase-space overlap reads `Tr(rho sigma) =
//! 4 pi \int W_rho W_sigma dx dp`. The vacuum self-test in this module pins
//! that constant.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{Complex, DMatrix, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, SquareGrid};
use crate::wigner::{
    wigner_subtracted, IntegrationMethod, NegativityQuadrature, NumericNegativity,
    PhaseSpacePoint, SubtractedStateParams, NORMALIZATION_TOL,
};

pub type C64 = Complex<f64>;

/// Default truncation: photon number `0..=15`.
pub const DEFAULT_N_MAX: usize = 15;

const HERMITIAN_TOL: f64 = 1e-12;
const EIGEN_CLIP: f64 = 1e-10;

/// Fock-basis density matrix. Hermitian, positive semidefinite, trace in
/// `(0, 1]`; the missing weight is the truncation deficit.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: DMatrix<C64>,
}

fn hermitize(mat: &DMatrix<C64>) -> DMatrix<C64> {
    (mat + mat.adjoint()).scale(0.5)
}

fn rebuild(eigen: &SymmetricEigen<C64, nalgebra::Dyn>, values: &[f64]) -> DMatrix<C64> {
    let v = &eigen.eigenvectors;
    let mut scaled = v.clone();
    for (j, &lam) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(lam);
    }
    hermitize(&(scaled * v.adjoint()))
}

impl DensityMatrix {
    /// Validates `mat`. Eigenvalues in `[-1e-10, 0)` are clipped to zero and
    /// the trace restored; anything more negative is rejected.
    pub fn new(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::InvalidDensityMatrix(format!(
                "need a non-empty square matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidDensityMatrix("non-finite entry".into()));
        }
        let skew = (&mat - mat.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if skew > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (max |rho - rho^dagger| = {skew:e})"
            )));
        }
        let mat = hermitize(&mat);
        let trace = mat.trace().re;
        if !(trace > 0.0 && trace <= 1.0 + 1e-9) {
            return Err(Error::InvalidDensityMatrix(format!("trace {trace} outside (0, 1]")));
        }
        let eigen = SymmetricEigen::new(mat.clone());
        let min = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -EIGEN_CLIP {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min:e}")));
        }
        if min >= 0.0 {
            return Ok(Self { mat });
        }
        let clipped: Vec<f64> = eigen.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        let sum: f64 = clipped.iter().sum();
        let restored: Vec<f64> = clipped.iter().map(|l| l * trace / sum).collect();
        Ok(Self {
            mat: rebuild(&eigen, &restored),
        })
    }

    /// Nearest state with all eigenvalues clipped at zero and unit trace.
    pub fn project_physical(mat: &DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::InvalidDensityMatrix("need a non-empty square matrix".into()));
        }
        let eigen = SymmetricEigen::new(hermitize(mat));
        let clipped: Vec<f64> = eigen.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        let sum: f64 = clipped.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidDensityMatrix("no positive spectrum".into()));
        }
        let normalized: Vec<f64> = clipped.iter().map(|l| l / sum).collect();
        Self::new(rebuild(&eigen, &normalized))
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let n = probs.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(probs[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn from_populations(pops: &FockPopulations) -> Result<Self> {
        Self::diagonal(pops.probs())
    }

    pub fn fock_state(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(invalid("k", format!("level {k} outside dimension {dim}")));
        }
        let mut probs = vec![0.0; dim];
        probs[k] = 1.0;
        Self::diagonal(&probs)
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::fock_state(dim, 0)
    }

    /// Thermal state with quadrature variance `variance >= 1`, truncated.
    pub fn thermal(dim: usize, variance: f64) -> Result<Self> {
        Self::diagonal(&thermal_populations(dim, variance)?)
    }

    /// Pure state `|psi><psi|` from number-basis amplitudes.
    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        let n = amplitudes.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| amplitudes[i] * amplitudes[j].conj()))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn trace_deficit(&self) -> f64 {
        1.0 - self.trace()
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.mat[(k, k)].re).collect()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.populations()
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }

    /// Largest off-diagonal magnitude.
    pub fn max_coherence(&self) -> f64 {
        let n = self.dim();
        let mut max: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    max = max.max(self.mat[(i, j)].norm());
                }
            }
        }
        max
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        self.max_coherence() <= tol
    }

    /// Eigenvalues (ascending order not guaranteed) and eigenvectors.
    pub fn eigen(&self) -> SymmetricEigen<C64, nalgebra::Dyn> {
        SymmetricEigen::new(self.mat.clone())
    }

    /// Same state padded with empty levels up to `dim`.
    pub fn embed(&self, dim: usize) -> Result<Self> {
        if dim < self.dim() {
            return Err(Error::DimensionMismatch(dim, self.dim()));
        }
        let mut mat = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
        mat.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.mat);
        Ok(Self { mat })
    }

    /// Text form: a `dim N` header, then one row per line as `re im` pairs.
    pub fn to_text(&self) -> String {
        let n = self.dim();
        let mut out = format!("dim {n}\n");
        for i in 0..n {
            let row: Vec<String> = (0..n)
                .map(|j| format!("{} {}", self.mat[(i, j)].re, self.mat[(i, j)].im))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty density-matrix text".into()))?;
        let dim: usize = header
            .strip_prefix("dim")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad header `{header}`")))?;
        let values = lines
            .flat_map(|l| l.split_whitespace())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad number `{t}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != 2 * dim * dim {
            return Err(Error::Parse(format!(
                "expected {} numbers for dim {dim}, got {}",
                2 * dim * dim,
                values.len()
            )));
        }
        Self::new(DMatrix::from_fn(dim, dim, |i, j| {
            let at = 2 * (i * dim + j);
            C64::new(values[at], values[at + 1])
        }))
    }
}

pub fn thermal_populations(dim: usize, variance: f64) -> Result<Vec<f64>> {
    if !(variance >= 1.0) {
        return Err(invalid("variance", format!("thermal variance must be >= 1, got {variance}")));
    }
    let ratio = (variance - 1.0) / (variance + 1.0);
    let p0 = 2.0 / (variance + 1.0);
    Ok((0..dim).map(|k| p0 * ratio.powi(k as i32)).collect())
}

/// Diagonal of a phase-invariant state.
#[derive(Debug, Clone, PartialEq)]
pub struct FockPopulations {
    probs: Vec<f64>,
}

/// Below this total weight a population vector is flagged as truncated.
pub const TRUNCATION_FLAG: f64 = 0.99;

impl FockPopulations {
    /// Values in `[-1e-10, 0)` are clipped to zero; lower values are rejected.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        for (k, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() || *p < -EIGEN_CLIP {
                return Err(Error::InvalidDensityMatrix(format!("population p_{k} = {p}")));
            }
            *p = p.max(0.0);
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + 1e-9 {
            return Err(Error::InvalidDensityMatrix(format!("populations sum to {total} > 1")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn truncation_error(&self) -> f64 {
        1.0 - self.total()
    }

    pub fn is_truncated(&self) -> bool {
        self.total() < TRUNCATION_FLAG
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    /// `<x^2> = sum_k p_k (2k + 1)`.
    pub fn quadrature_second_moment(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| (2 * k + 1) as f64 * p)
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,p\n");
        for (k, p) in self.probs.iter().enumerate() {
            let _ = writeln!(out, "{k},{}", crate::format_value(*p));
        }
        out
    }
}

/// Associated Laguerre polynomials `L_k^(alpha)(u)` for `k = 0..count`.
fn laguerre_series(alpha: usize, u: f64, count: usize) -> Vec<f64> {
    let a = alpha as f64;
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(1.0);
    if count == 1 {
        return out;
    }
    out.push(1.0 + a - u);
    for k in 1..count - 1 {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - u) * out[k] - (kf + a) * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Wigner function of `|k><k|`.
pub fn number_state_wigner(k: usize, u: f64) -> f64 {
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign / (2.0 * PI) * (-u / 2.0).exp() * laguerre_series(0, u, k + 1)[k]
}

/// `W(x, p) = sum_jk rho_jk W_{|j><k|}(x, p)`.
pub fn wigner_from_density(rho: &DensityMatrix, pt: PhaseSpacePoint) -> f64 {
    let dim = rho.dim();
    let u = pt.x * pt.x + pt.p * pt.p;
    let gauss = (-u / 2.0).exp() / (2.0 * PI);
    let conj_point = C64::new(pt.x, -pt.p);
    let mut total = 0.0;
    // power = (x - i p)^d, with sqrt(k!/(k+d)!) folded in per term.
    let mut power = C64::new(1.0, 0.0);
    for d in 0..dim {
        let lag = laguerre_series(d, u, dim - d);
        // sqrt(k!/(k+d)!) for k = 0, updated multiplicatively.
        let mut norm = 1.0;
        for i in 1..=d {
            norm /= (i as f64).sqrt();
        }
        for k in 0..dim - d {
            if k > 0 {
                norm *= (k as f64 / (k + d) as f64).sqrt();
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let kernel = power * (sign * norm * lag[k] * gauss);
            let rho_jk = rho.mat[(k + d, k)];
            if d == 0 {
                total += rho_jk.re * kernel.re;
            } else {
                total += 2.0 * (rho_jk * kernel).re;
            }
        }
        power *= conj_point;
    }
    total
}

/// Number-state populations of the radial heralded state,
/// `p_k = 4 pi \int W W_kk dx dp = 2 pi (-1)^k \int_0^inf W(u) e^{-u/2} L_k(u) du`.
pub fn populations_from_radial_wigner(
    params: &SubtractedStateParams,
    n_max: usize,
) -> Result<FockPopulations> {
    if !params.cm().is_radial() {
        return Err(Error::NonRadial);
    }
    let m = params.cm().m();
    let decay = 0.5 + 0.5 / m;
    let probs = (0..=n_max)
        .map(|k| {
            let u_max = (60.0 + 4.0 * k as f64) / decay;
            let integrand = |u: f64| {
                let w = wigner_subtracted(params, PhaseSpacePoint::new(u.sqrt(), 0.0));
                w * (-u / 2.0).exp() * laguerre_series(0, u, k + 1)[k]
            };
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            2.0 * PI * sign * integrate(integrand, 0.0, u_max, 1e-16, 1e-12).value
        })
        .collect();
    FockPopulations::new(probs)
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), sigma.dim()));
    }
    let eigen = rho.eigen();
    let roots: Vec<f64> = eigen.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    let sqrt_rho = rebuild(&eigen, &roots);
    let inner = hermitize(&(&sqrt_rho * &sigma.mat * &sqrt_rho));
    let trace: f64 = SymmetricEigen::new(inner)
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    Ok((trace * trace).clamp(0.0, 1.0))
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Amplitude of `rho_{a+l, b+l} -> rho_{a, b}` under loss `eta`.
fn loss_weight(a: usize, b: usize, l: usize, eta: f64) -> f64 {
    (binomial(a + l, l) * binomial(b + l, l)).sqrt()
        * eta.powf(0.5 * (a + b) as f64)
        * (1.0 - eta).powi(l as i32)
}

/// Pure-loss channel with transmission `eta`:
/// `rho'_{ab} = sum_l sqrt(C(a+l,l) C(b+l,l)) eta^{(a+b)/2} (1-eta)^l rho_{a+l,b+l}`.
pub fn apply_loss_fock(rho: &DensityMatrix, eta: f64) -> Result<DensityMatrix> {
    crate::gaussian::check_efficiency("eta", eta)?;
    if eta == 1.0 {
        return Ok(rho.clone());
    }
    let dim = rho.dim();
    let out = DMatrix::from_fn(dim, dim, |a, b| {
        (0..dim - a.max(b)).fold(C64::new(0.0, 0.0), |acc, l| {
            acc + rho.mat[(a + l, b + l)] * loss_weight(a, b, l, eta)
        })
    });
    DensityMatrix::new(hermitize(&out))
}

/// Heisenberg-picture adjoint of [`apply_loss_fock`], used to build
/// loss-adjusted measurement operators.
pub fn loss_adjoint(op: &DMatrix<C64>, eta: f64) -> DMatrix<C64> {
    if eta == 1.0 {
        return op.clone();
    }
    let dim = op.nrows();
    DMatrix::from_fn(dim, dim, |a, b| {
        (0..=a.min(b)).fold(C64::new(0.0, 0.0), |acc, l| {
            acc + op[(a - l, b - l)] * loss_weight(a - l, b - l, l, eta)
        })
    })
}

/// Undoes a known loss on a reconstructed state by back-substitution, then
/// projects the result onto the physical states. Statistical noise is
/// amplified by roughly `eta^{-N}` in the top levels.
pub fn invert_loss_fock(rho: &DensityMatrix, eta: f64) -> Result<DensityMatrix> {
    crate::gaussian::check_efficiency("eta", eta)?;
    if eta == 1.0 {
        return Ok(rho.clone());
    }
    let dim = rho.dim();
    let mut out = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    for a in (0..dim).rev() {
        for b in (0..dim).rev() {
            let mut acc = rho.mat[(a, b)];
            for l in 1..dim - a.max(b) {
                acc -= out[(a + l, b + l)] * loss_weight(a, b, l, eta);
            }
            out[(a, b)] = acc / loss_weight(a, b, 0, eta);
        }
    }
    DensityMatrix::project_physical(&out)
}

/// Negativity `\int |W| - \int W` of the Wigner function of `rho`.
/// Number-diagonal states use the radial rule, others the square grid.
pub fn density_negativity(
    rho: &DensityMatrix,
    opts: &NegativityQuadrature,
) -> Result<NumericNegativity> {
    let u_max = 80.0 + 4.0 * rho.dim() as f64;
    let (total, total_abs, method) = if rho.is_diagonal(1e-12) && !opts.force_grid {
        let w = |u: f64| wigner_from_density(rho, PhaseSpacePoint::new(u.sqrt(), 0.0));
        let signed = integrate(w, 0.0, u_max, 1e-14, opts.rel_tol);
        let abs = integrate(|u| w(u).abs(), 0.0, u_max, 1e-14, opts.rel_tol);
        (PI * signed.value, PI * abs.value, IntegrationMethod::Radial)
    } else {
        let grid = SquareGrid {
            half_width: u_max.sqrt(),
            points: opts.grid_points,
        };
        let (s, s_abs) =
            grid.integrate_with_abs(|x, p| wigner_from_density(rho, PhaseSpacePoint::new(x, p)));
        (s, s_abs, IntegrationMethod::Grid)
    };
    // A truncated state integrates to its trace, not to 1.
    if (total - rho.trace()).abs() > NORMALIZATION_TOL {
        return Err(Error::Discretization {
            normalization: total,
        });
    }
    Ok(NumericNegativity {
        value: (total_abs - total).max(0.0),
        normalization: total,
        method,
    })
}
