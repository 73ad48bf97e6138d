//! Conditional Wigner function of mode B after a photon is subtracted from
//! mode A, and its negativity.
//!
//! For the block-diagonal covariance matrices of [`crate::gaussian`], with
//! `sigma_B = m I` and `gamma_AB = diag(c1, c2)`, the subtracted-state Wigner
//! function is
//!
//! ```text
//! W-(b) = exp(-|b|^2 / 2m) / (2 pi m (Tr sigma_A - 2))
//!         * [ |gamma sigma_B^-1 b|^2 + Tr V_{A|B} - 2 ]
//! ```
//!
//! with the Schur complement `V_{A|B} = sigma_A - gamma sigma_B^-1 gamma^T`.
//! False heralds mix in the unconditioned Gaussian: `W = xi W- + (1 - xi) W_B`.
//!
//! When `|c1| = |c2| = c` the function is radial, `W(u) = e^{-u/2m}(a u + b)`
//! with `u = x^2 + p^2`, and the bracket of the mixture reads
//! `xi c^2 u - 2 xi c^2 m + 2 m^2 (n - 1)`. It is negative exactly on the disc
//! `u < 2m(1 - r)` where `r = m(n-1)/(xi c^2)`, so a negative region exists
//! iff `r < 1`. Integrating the negative part over that disc gives the
//! negativity `N = (2/r) e^{r-1} - 2`. For `r >= 1` the same expression is
//! positive but there is nothing negative to integrate, so the result is
//! clamped to zero.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::Vector2;

use crate::error::{invalid, Error, Result};
use crate::gaussian::{PurityTriple, TwoModeCovariance};
use crate::quadrature::{integrate, SquareGrid};

/// Derives the true-count ratio `xi = 1 - R_dark / R_total` from detector rates.
pub fn xi_from_rates(dark_rate: f64, total_rate: f64) -> Result<f64> {
    if !(dark_rate.is_finite() && dark_rate >= 0.0) {
        return Err(invalid("dark_rate", format!("must be finite and >= 0, got {dark_rate}")));
    }
    if !(total_rate.is_finite() && total_rate > 0.0) {
        return Err(invalid("total_rate", format!("must be finite and > 0, got {total_rate}")));
    }
    let xi = 1.0 - dark_rate / total_rate;
    if xi > 0.0 && xi <= 1.0 {
        Ok(xi)
    } else {
        Err(invalid("xi", format!("1 - R_dark/R_total = {xi} is outside (0, 1]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpacePoint {
    pub x: f64,
    pub p: f64,
}

impl PhaseSpacePoint {
    pub fn new(x: f64, p: f64) -> Self {
        Self { x, p }
    }
}

/// Covariance matrix of the shared state plus the heralding purity `xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubtractedStateParams {
    cm: TwoModeCovariance,
    xi: f64,
}

impl SubtractedStateParams {
    /// `xi = 0` is accepted and describes the unconditioned Gaussian state of
    /// mode B. A photon cannot be subtracted from a vacuum mode A, so `xi > 0`
    /// requires `n > 1`.
    pub fn new(cm: TwoModeCovariance, xi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&xi) {
            return Err(invalid("xi", format!("must lie in [0, 1], got {xi}")));
        }
        if xi > 0.0 && !(cm.n() > 1.0) {
            return Err(invalid(
                "n",
                "photon subtraction needs mode A above vacuum (n > 1)",
            ));
        }
        Ok(Self { cm, xi })
    }

    pub fn cm(&self) -> &TwoModeCovariance {
        &self.cm
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// `r = m(n-1) / (xi c^2)`; infinite when there is no correlation or no
    /// true herald.
    pub fn ratio(&self) -> f64 {
        let c_sq = self.cm.correlation_sq();
        if c_sq == 0.0 || self.xi == 0.0 {
            return f64::INFINITY;
        }
        self.cm.m() * (self.cm.n() - 1.0) / (self.xi * c_sq)
    }

    pub fn radial_profile(&self) -> Result<RadialProfile> {
        if !self.cm.is_radial() {
            return Err(Error::NonRadial);
        }
        let (n, m) = (self.cm.n(), self.cm.m());
        let gauss = 1.0 / (2.0 * PI * m);
        if self.xi == 0.0 {
            return Ok(RadialProfile {
                u_coefficient: 0.0,
                constant: gauss,
                variance: m,
            });
        }
        let k = self.xi * self.cm.correlation_sq() / (n - 1.0);
        Ok(RadialProfile {
            u_coefficient: k / (4.0 * PI * m * m * m),
            constant: gauss - k / (2.0 * PI * m * m),
            variance: m,
        })
    }

    /// Radius of the disc where `W < 0`, if there is one.
    pub fn negative_disc_radius(&self) -> Option<f64> {
        if !self.cm.is_radial() {
            return None;
        }
        let r = self.ratio();
        (r < 1.0).then(|| (2.0 * self.cm.m() * (1.0 - r)).sqrt())
    }
}

/// `W(u) = exp(-u / (2 variance)) * (u_coefficient * u + constant)` with `u = x^2 + p^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialProfile {
    pub u_coefficient: f64,
    pub constant: f64,
    pub variance: f64,
}

impl RadialProfile {
    pub fn eval(&self, u: f64) -> f64 {
        (-u / (2.0 * self.variance)).exp() * (self.u_coefficient * u + self.constant)
    }

    /// Closed-form `\int W dx dp`.
    pub fn normalization(&self) -> f64 {
        let two_m = 2.0 * self.variance;
        PI * (self.u_coefficient * two_m * two_m + self.constant * two_m)
    }
}

/// Evaluates the heralded Wigner function of mode B at `pt` through the full
/// matrix form (no radial shortcut).
pub fn wigner_subtracted(params: &SubtractedStateParams, pt: PhaseSpacePoint) -> f64 {
    let cm = &params.cm;
    let beta = Vector2::new(pt.x, pt.p);
    let sigma_b_inv = cm
        .sigma_b()
        .try_inverse()
        .expect("physical sigma_B is invertible");
    let det_b = cm.det_sigma_b();
    let quad = beta.dot(&(sigma_b_inv * beta));
    let gaussian = (-0.5 * quad).exp() / (2.0 * PI * det_b.sqrt());
    if params.xi == 0.0 {
        return gaussian;
    }
    let gamma = cm.gamma_ab();
    let steered = gamma * sigma_b_inv * beta;
    let schur = cm.sigma_a() - gamma * sigma_b_inv * gamma.transpose();
    let bracket = steered.norm_squared() + schur.trace() - 2.0;
    let subtracted = gaussian * bracket / (cm.sigma_a().trace() - 2.0);
    params.xi * subtracted + (1.0 - params.xi) * gaussian
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativityStatus {
    /// `r < 1`: W has a negative disc.
    Negative,
    /// `r >= 1`: W is non-negative everywhere.
    NonNegative,
    /// No correlation (or no true herald): nothing to transfer.
    Uncorrelated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormNegativity {
    pub value: f64,
    pub ratio: f64,
    pub status: NegativityStatus,
}

fn negativity_from_ratio(ratio: f64) -> ClosedFormNegativity {
    if ratio.is_infinite() {
        ClosedFormNegativity {
            value: 0.0,
            ratio,
            status: NegativityStatus::Uncorrelated,
        }
    } else if ratio >= 1.0 {
        ClosedFormNegativity {
            value: 0.0,
            ratio,
            status: NegativityStatus::NonNegative,
        }
    } else {
        ClosedFormNegativity {
            value: 2.0 / ratio * (ratio - 1.0).exp() - 2.0,
            ratio,
            status: NegativityStatus::Negative,
        }
    }
}

/// `N = 2 xi c^2 e^{m(n-1)/(xi c^2) - 1} / (m(n-1)) - 2`, clamped to 0 when
/// `m(n-1) >= xi c^2`.
pub fn negativity_closed_form(params: &SubtractedStateParams) -> Result<ClosedFormNegativity> {
    if !params.cm.is_radial() {
        return Err(Error::NonRadial);
    }
    Ok(negativity_from_ratio(params.ratio()))
}

/// The same negativity written in terms of the purities of the shared
/// Gaussian state.
pub fn negativity_from_purities(purities: PurityTriple, xi: f64) -> Result<ClosedFormNegativity> {
    let PurityTriple { mu_a, mu_b, mu_ab } = purities;
    for (name, mu) in [("mu_a", mu_a), ("mu_b", mu_b), ("mu_ab", mu_ab)] {
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(invalid(name, format!("purity must lie in (0, 1], got {mu}")));
        }
    }
    if !(0.0..=1.0).contains(&xi) {
        return Err(invalid("xi", format!("must lie in [0, 1], got {xi}")));
    }
    // mu_AB - mu_A mu_B = c^2 / (nm (nm - c^2)) for the resource family.
    let correlation = mu_ab - mu_a * mu_b;
    if correlation.abs() <= 1e-14 || xi == 0.0 {
        return Ok(negativity_from_ratio(f64::INFINITY));
    }
    if correlation < 0.0 {
        return Err(Error::InconsistentPurities(format!(
            "mu_AB = {mu_ab} < mu_A mu_B = {}",
            mu_a * mu_b
        )));
    }
    if mu_a >= 1.0 {
        return Err(Error::InconsistentPurities(
            "mu_A = 1 leaves nothing to subtract but the state is correlated".into(),
        ));
    }
    let ratio = (mu_ab - mu_a * mu_ab) / (mu_ab * xi - mu_a * mu_b * xi);
    let mut out = negativity_from_ratio(ratio);
    if out.status == NegativityStatus::Negative {
        out.value = 2.0 * xi * (mu_a * mu_b - mu_ab) * (ratio - 1.0).exp()
            / ((mu_a - 1.0) * mu_ab)
            - 2.0;
    }
    Ok(out)
}

/// Settings for the numerical negativity integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativityQuadrature {
    /// Relative tolerance of the adaptive radial rule.
    pub rel_tol: f64,
    /// Radial cut-off `u_max = u_max_factor * m`.
    pub u_max_factor: f64,
    /// Nodes per axis of the 2-D fallback grid.
    pub grid_points: usize,
    /// Half-width of the fallback grid in units of `sqrt(m)`.
    pub grid_half_width: f64,
    /// Use the 2-D grid even for radial states.
    pub force_grid: bool,
}

impl Default for NegativityQuadrature {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            u_max_factor: 80.0,
            grid_points: 601,
            grid_half_width: 6.0,
            force_grid: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationMethod {
    Radial,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericNegativity {
    pub value: f64,
    pub normalization: f64,
    pub method: IntegrationMethod,
}

/// Tolerance on `|\int W - 1|` before an integration is rejected.
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// `N = \int |W| - \int W`, integrated directly from [`wigner_subtracted`].
pub fn negativity_numeric(
    params: &SubtractedStateParams,
    opts: &NegativityQuadrature,
) -> Result<NumericNegativity> {
    let m = params.cm.m();
    let (total, total_abs, method) = if params.cm.is_radial() && !opts.force_grid {
        let u_max = opts.u_max_factor * m;
        let w = |u: f64| wigner_subtracted(params, PhaseSpacePoint::new(u.sqrt(), 0.0));
        // Log-spaced panels resolve negative regions far smaller than m.
        let mut edges = vec![0.0];
        let mut edge = m * 2f64.powi(-30);
        while edge < u_max {
            edges.push(edge);
            edge *= 2.0;
        }
        edges.push(u_max);
        let (mut signed, mut abs) = (0.0, 0.0);
        for panel in edges.windows(2) {
            signed += integrate(w, panel[0], panel[1], 1e-16, opts.rel_tol).value;
            abs += integrate(|u| w(u).abs(), panel[0], panel[1], 1e-16, opts.rel_tol).value;
        }
        (PI * signed, PI * abs, IntegrationMethod::Radial)
    } else {
        let grid = SquareGrid {
            half_width: opts.grid_half_width * m.sqrt(),
            points: opts.grid_points,
        };
        let (s, s_abs) =
            grid.integrate_with_abs(|x, p| wigner_subtracted(params, PhaseSpacePoint::new(x, p)));
        (s, s_abs, IntegrationMethod::Grid)
    };
    if (total - 1.0).abs() > NORMALIZATION_TOL {
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

/// Homodyne marginal `P(x) = exp(-x^2 / 2m) (A x^2 + B)` of the radial
/// heralded state; the same for every homodyne phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalDensity {
    pub quadratic: f64,
    pub constant: f64,
    pub variance: f64,
}

impl MarginalDensity {
    pub fn new(params: &SubtractedStateParams) -> Result<Self> {
        let profile = params.radial_profile()?;
        let m = profile.variance;
        let scale = (2.0 * PI * m).sqrt();
        Ok(Self {
            quadratic: scale * profile.u_coefficient,
            constant: scale * (profile.u_coefficient * m + profile.constant),
            variance: m,
        })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        (-x * x / (2.0 * self.variance)).exp() * (self.quadratic * x * x + self.constant)
    }

    /// `\int x^2 P(x) dx`.
    pub fn second_moment(&self) -> f64 {
        let m = self.variance;
        (2.0 * PI * m).sqrt() * m * (3.0 * m * self.quadratic + self.constant)
    }
}

pub fn marginal_pdf(params: &SubtractedStateParams, x: f64) -> Result<f64> {
    Ok(MarginalDensity::new(params)?.pdf(x))
}

/// Renders `f` sampled on `grid` as CSV with columns `x,p,w`.
pub fn wigner_grid_csv<F: Fn(f64, f64) -> f64>(f: F, grid: &SquareGrid) -> String {
    let mut out = format!(
        "# wigner grid half_width={} points={} step={}\nx,p,w\n",
        crate::format_value(grid.half_width),
        grid.points,
        crate::format_value(grid.step())
    );
    for i in 0..grid.points {
        let x = grid.coord(i);
        for j in 0..grid.points {
            let p = grid.coord(j);
            out.push_str(&format!(
                "{},{},{}\n",
                crate::format_value(x),
                crate::format_value(p),
                crate::format_value(f(x, p))
            ));
        }
    }
    out
}

/// Key-value record comparing the two negativity routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativitySummary {
    pub ratio: f64,
    pub closed_form: f64,
    pub numeric: f64,
    pub negative_disc_radius: Option<f64>,
}

impl NegativitySummary {
    pub fn compute(params: &SubtractedStateParams, opts: &NegativityQuadrature) -> Result<Self> {
        let closed = negativity_closed_form(params)?;
        let numeric = negativity_numeric(params, opts)?;
        Ok(Self {
            ratio: closed.ratio,
            closed_form: closed.value,
            numeric: numeric.value,
            negative_disc_radius: params.negative_disc_radius(),
        })
    }
}

impl fmt::Display for NegativitySummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num = |v: f64| {
            if v.is_finite() {
                crate::format_value(v)
            } else {
                "null".to_string()
            }
        };
        write!(
            f,
            "{{\"r\": {}, \"N_closed\": {}, \"N_numeric\": {}, \"negative_disc_radius\": {}}}",
            num(self.ratio),
            num(self.closed_form),
            num(self.numeric),
            self.negative_disc_radius.map_or("null".to_string(), num)
        )
    }
}
