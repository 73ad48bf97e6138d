//! Lossy two-mode Gaussian EPR states.
//!
//! Quadratures are normalized as `x = a + a†`, `p = i(a† - a)`, so the vacuum
//! has unit variance. The covariance matrix has the block structure
//!
//! ```text
//!     | n   0   c1  0  |
//!     | 0   n   0   c2 |
//!     | c1  0   m   0  |
//!     | 0   c2  0   m  |
//! ```
//!
//! which is all that loss on a two-mode squeezed resource can produce. The
//! resource family has `c1 = -c2`, but every operation here also accepts
//! `c1 != -c2` and uses the product `c1 * c2` where the symmetric `-c^2` would
//! otherwise appear.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix4};

use crate::error::{invalid, Error, Result};

/// Convention tag written into every serialized covariance matrix.
pub const CONVENTION: &str = "vacuum-variance=1";

/// Symplectic eigenvalues may fall this far below 1 and still count as physical.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Converts a squeezing/antisqueezing level in dB to a variance relative to vacuum.
pub fn db_to_variance(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn variance_to_db(variance: f64) -> f64 {
    10.0 * variance.log10()
}

/// Correlated variances of the source, before any channel loss.
///
/// `v_plus` is the variance of `(x_A + x_B)/sqrt(2)` (equivalently of
/// `(p_A - p_B)/sqrt(2)`), `v_minus` the variance of the anti-correlated
/// combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingSpec {
    v_plus: f64,
    v_minus: f64,
}

impl SqueezingSpec {
    pub fn new(v_plus: f64, v_minus: f64) -> Result<Self> {
        if !(v_plus.is_finite() && v_plus > 0.0) {
            return Err(invalid("v_plus", format!("must be finite and > 0, got {v_plus}")));
        }
        if !(v_minus.is_finite() && v_minus > 0.0) {
            return Err(invalid("v_minus", format!("must be finite and > 0, got {v_minus}")));
        }
        if v_plus * v_minus < 1.0 - PHYSICALITY_TOL {
            return Err(invalid(
                "v_plus * v_minus",
                format!("uncertainty bound violated: {}", v_plus * v_minus),
            ));
        }
        Ok(Self { v_plus, v_minus })
    }

    /// Builds the spec from the squeezing (negative) and antisqueezing
    /// (positive) levels in dB, e.g. `(-1.302, 1.407)`.
    pub fn from_db(db_plus: f64, db_minus: f64) -> Result<Self> {
        Self::new(db_to_variance(db_plus), db_to_variance(db_minus))
    }

    pub fn v_plus(&self) -> f64 {
        self.v_plus
    }

    pub fn v_minus(&self) -> f64 {
        self.v_minus
    }

    /// True when `v_plus < 1 < v_minus`.
    pub fn is_entangled(&self) -> bool {
        self.v_plus < 1.0 && self.v_minus > 1.0
    }

    /// `(V+ + V-)/2`, the local variance of each mode before loss.
    fn mean(&self) -> f64 {
        0.5 * (self.v_plus + self.v_minus)
    }

    /// `(V- - V+)/2`, the correlation strength before loss.
    fn half_difference(&self) -> f64 {
        0.5 * (self.v_minus - self.v_plus)
    }
}

/// Transmission efficiencies of Alice's and Bob's channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    eta_a: f64,
    eta_b: f64,
}

impl ChannelParams {
    pub fn new(eta_a: f64, eta_b: f64) -> Result<Self> {
        check_efficiency("eta_a", eta_a)?;
        check_efficiency("eta_b", eta_b)?;
        Ok(Self { eta_a, eta_b })
    }

    pub fn eta_a(&self) -> f64 {
        self.eta_a
    }

    pub fn eta_b(&self) -> f64 {
        self.eta_b
    }
}

pub(crate) fn check_efficiency(name: &'static str, eta: f64) -> Result<()> {
    if eta.is_finite() && eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must lie in (0, 1], got {eta}")))
    }
}

/// Local and global purities of a two-mode Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurityTriple {
    pub mu_a: f64,
    pub mu_b: f64,
    pub mu_ab: f64,
}

/// Covariance matrix of a zero-mean two-mode Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeCovariance {
    n: f64,
    m: f64,
    c1: f64,
    c2: f64,
}

impl TwoModeCovariance {
    /// Validates physicality: positive definite and both symplectic
    /// eigenvalues at least `1 - PHYSICALITY_TOL`.
    pub fn new(n: f64, m: f64, c1: f64, c2: f64) -> Result<Self> {
        for (name, v) in [("n", n), ("m", m), ("c1", c1), ("c2", c2)] {
            if !v.is_finite() {
                return Err(invalid(name, format!("must be finite, got {v}")));
            }
        }
        let cm = Self { n, m, c1, c2 };
        let positive = n > 0.0 && m > 0.0 && n * m > c1 * c1 && n * m > c2 * c2;
        let (nu_minus, _) = cm.symplectic_eigenvalues();
        if !positive || !(nu_minus >= 1.0 - PHYSICALITY_TOL) {
            return Err(Error::NonPhysical(if positive { nu_minus } else { f64::NAN }));
        }
        Ok(cm)
    }

    /// The resource family `c1 = c`, `c2 = -c`.
    pub fn symmetric(n: f64, m: f64, c: f64) -> Result<Self> {
        Self::new(n, m, c, -c)
    }

    pub fn vacuum() -> Self {
        Self {
            n: 1.0,
            m: 1.0,
            c1: 0.0,
            c2: 0.0,
        }
    }

    /// Covariance matrix after sending a squeezed resource through two lossy
    /// channels: `n = eta_A (V+ + V-)/2 + 1 - eta_A`, likewise `m` with
    /// `eta_B`, and `c1 = -c2 = -sqrt(eta_A eta_B)(V- - V+)/2`.
    pub fn from_squeezing(spec: SqueezingSpec, ch: ChannelParams) -> Result<Self> {
        let s = spec.mean();
        let n = ch.eta_a * s + (1.0 - ch.eta_a);
        let m = ch.eta_b * s + (1.0 - ch.eta_b);
        let c = -(ch.eta_a * ch.eta_b).sqrt() * spec.half_difference();
        Self::new(n, m, c, -c)
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// Whether `|c1| == |c2|` (to relative 1e-12), i.e. the conditional
    /// Wigner function of mode B is rotationally symmetric.
    pub fn is_radial(&self) -> bool {
        let scale = self.c1.abs().max(self.c2.abs()).max(1.0);
        (self.c1.abs() - self.c2.abs()).abs() <= 1e-12 * scale
    }

    /// Squared correlation `|c1 c2|`, the `c^2` of the symmetric family.
    pub fn correlation_sq(&self) -> f64 {
        (self.c1 * self.c2).abs()
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        let (n, m, c1, c2) = (self.n, self.m, self.c1, self.c2);
        #[rustfmt::skip]
        let mat = Matrix4::new(
            n,   0.0, c1,  0.0,
            0.0, n,   0.0, c2,
            c1,  0.0, m,   0.0,
            0.0, c2,  0.0, m,
        );
        mat
    }

    pub fn sigma_a(&self) -> Matrix2<f64> {
        Matrix2::new(self.n, 0.0, 0.0, self.n)
    }

    pub fn sigma_b(&self) -> Matrix2<f64> {
        Matrix2::new(self.m, 0.0, 0.0, self.m)
    }

    /// Cross-correlation block, rows indexed by mode A.
    pub fn gamma_ab(&self) -> Matrix2<f64> {
        Matrix2::new(self.c1, 0.0, 0.0, self.c2)
    }

    pub fn det_sigma_a(&self) -> f64 {
        self.n * self.n
    }

    pub fn det_sigma_b(&self) -> f64 {
        self.m * self.m
    }

    pub fn det_sigma_ab(&self) -> f64 {
        let nm = self.n * self.m;
        (nm - self.c1 * self.c1) * (nm - self.c2 * self.c2)
    }

    /// Symplectic eigenvalues `(nu_minus, nu_plus)` from the seralian
    /// `Delta = det A + det B + 2 det C`.
    pub fn symplectic_eigenvalues(&self) -> (f64, f64) {
        let delta = self.det_sigma_a() + self.det_sigma_b() + 2.0 * self.c1 * self.c2;
        let det = self.det_sigma_ab();
        let disc = (delta * delta - 4.0 * det).max(0.0).sqrt();
        let minus = (0.5 * (delta - disc)).max(0.0).sqrt();
        let plus = (0.5 * (delta + disc)).max(0.0).sqrt();
        (minus, plus)
    }

    /// `mu_X = 1/sqrt(det sigma_X)`.
    pub fn purities(&self) -> PurityTriple {
        PurityTriple {
            mu_a: 1.0 / self.det_sigma_a().sqrt(),
            mu_b: 1.0 / self.det_sigma_b().sqrt(),
            mu_ab: 1.0 / self.det_sigma_ab().sqrt(),
        }
    }

    /// Unclamped `1/2 ln(det sigma_B / det sigma_AB)`; negative when B cannot
    /// steer A.
    pub fn steerability_raw(&self) -> f64 {
        0.5 * (self.det_sigma_b() / self.det_sigma_ab()).ln()
    }

    /// Gaussian steerability `G^{B->A} = max{0, 1/2 ln(det sigma_B / det sigma_AB)}`.
    pub fn steerability_b_to_a(&self) -> f64 {
        self.steerability_raw().max(0.0)
    }

    /// Serializes as a header line followed by the 4x4 matrix, row-major.
    pub fn to_text(&self) -> String {
        let mut out = format!("# covariance {CONVENTION}\n");
        let mat = self.matrix();
        for i in 0..4 {
            let row: Vec<String> = (0..4).map(|j| format!("{}", mat[(i, j)])).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for TwoModeCovariance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for TwoModeCovariance {
    type Err = Error;

    /// Parses the text format written by [`TwoModeCovariance::to_text`].
    ///
    /// Measured matrices may differ slightly between the x and p diagonal
    /// entries or between mirrored entries; those are averaged. Entries
    /// outside the block structure must vanish (|v| <= 1e-9).
    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty covariance text".into()))?;
        if !header.trim_start().starts_with('#') || !header.contains(CONVENTION) {
            return Err(Error::Parse(format!(
                "missing `{CONVENTION}` header, got `{header}`"
            )));
        }
        let values = lines
            .flat_map(|l| l.split_whitespace())
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad number `{tok}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != 16 {
            return Err(Error::Parse(format!("expected 16 entries, got {}", values.len())));
        }
        let at = |i: usize, j: usize| values[4 * i + j];
        for (i, j) in [(0, 1), (0, 3), (1, 2), (2, 3)] {
            if at(i, j).abs() > 1e-9 || at(j, i).abs() > 1e-9 {
                return Err(Error::Parse(format!(
                    "entry ({i},{j}) outside the block structure is nonzero"
                )));
            }
        }
        let n = 0.5 * (at(0, 0) + at(1, 1));
        let m = 0.5 * (at(2, 2) + at(3, 3));
        let c1 = 0.5 * (at(0, 2) + at(2, 0));
        let c2 = 0.5 * (at(1, 3) + at(3, 1));
        Self::new(n, m, c1, c2)
    }
}

/// Critical Bob efficiency where `m(n-1) = xi c^2`.
///
/// With `xi = 1` this is the onset of Gaussian steering from B to A; with
/// `xi < 1` it is the onset of Wigner negativity after a photon subtraction
/// heralded with true-count ratio `xi`. Solving the loss model gives
/// `eta_B* = (s-1) / (xi q^2 - (s-1)^2)` with `s = (V+ + V-)/2` and
/// `q = (V- - V+)/2`; Alice's efficiency cancels.
pub fn steering_threshold_eta_b(spec: SqueezingSpec, xi: f64) -> Result<f64> {
    if !spec.is_entangled() {
        return Err(invalid(
            "spec",
            format!(
                "need v_plus < 1 < v_minus, got ({}, {})",
                spec.v_plus, spec.v_minus
            ),
        ));
    }
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(invalid("xi", format!("must lie in (0, 1], got {xi}")));
    }
    let excess = spec.mean() - 1.0;
    let q = spec.half_difference();
    let denom = xi * q * q - excess * excess;
    if denom <= 0.0 {
        return Err(Error::NoThreshold);
    }
    let eta = excess / denom;
    if eta > 1.0 {
        return Err(Error::NoThreshold);
    }
    Ok(eta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cm_from_low_squeezing_resource() {
        let spec = SqueezingSpec::new(0.74, 1.38).unwrap();
        let ch = ChannelParams::new(0.9, 0.9).unwrap();
        let cm = TwoModeCovariance::from_squeezing(spec, ch).unwrap();
        assert!(close(cm.n(), 1.054, 1e-12));
        assert!(close(cm.m(), 1.054, 1e-12));
        assert!(close(cm.c1(), -0.288, 1e-12));
        assert!(close(cm.c2(), 0.288, 1e-12));
    }

    #[test]
    fn cm_from_high_squeezing_resource() {
        let spec = SqueezingSpec::new(0.67, 1.61).unwrap();
        let ch = ChannelParams::new(0.9, 0.9).unwrap();
        let cm = TwoModeCovariance::from_squeezing(spec, ch).unwrap();
        assert!(close(cm.n(), 1.126, 1e-12));
        assert!(close(cm.c1(), -0.423, 1e-12));
    }

    #[test]
    fn unsqueezed_input_gives_vacuum() {
        let spec = SqueezingSpec::new(1.0, 1.0).unwrap();
        for eta in [0.1, 0.5, 1.0] {
            let cm = TwoModeCovariance::from_squeezing(spec, ChannelParams::new(eta, 0.3).unwrap())
                .unwrap();
            assert_eq!(cm.matrix(), Matrix4::identity());
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(SqueezingSpec::new(0.0, 1.0).is_err());
        assert!(SqueezingSpec::new(-0.5, 2.0).is_err());
        assert!(SqueezingSpec::new(0.5, 1.5).is_err());
        assert!(ChannelParams::new(0.0, 0.5).is_err());
        assert!(ChannelParams::new(0.5, 1.01).is_err());
        assert!(ChannelParams::new(f64::NAN, 0.5).is_err());
        assert!(matches!(
            TwoModeCovariance::symmetric(1.0, 1.0, 0.3),
            Err(Error::NonPhysical(_))
        ));
        assert!(TwoModeCovariance::new(-1.0, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn db_conversion() {
        assert!(close(db_to_variance(-1.302), 0.741, 5e-4));
        assert_eq!(db_to_variance(0.0), 1.0);
        assert!(close(db_to_variance(2.08), 1.614, 5e-4));
        for (db, v) in [(-1.302, 0.74), (1.407, 1.38), (-1.74, 0.67), (2.08, 1.61)] {
            assert!(close(db_to_variance(db), v, 0.005), "{db} dB");
        }
        for db in [-10.0, -1.302, 0.0, 0.5, 7.3] {
            assert!(close(variance_to_db(db_to_variance(db)), db, 1e-12));
        }
    }

    #[test]
    fn purity_examples() {
        assert_eq!(
            TwoModeCovariance::vacuum().purities(),
            PurityTriple {
                mu_a: 1.0,
                mu_b: 1.0,
                mu_ab: 1.0
            }
        );
        let spec = SqueezingSpec::new(0.74, 1.38).unwrap();
        let cm = TwoModeCovariance::from_squeezing(spec, ChannelParams::new(0.9, 0.9).unwrap())
            .unwrap();
        assert!(close(cm.purities().mu_b, 2.0 / (2.0 + 0.12 * 0.9), 1e-12));
        assert!(close(cm.purities().mu_b, 0.949, 5e-4));

        let measured = TwoModeCovariance::symmetric(1.056, 1.056, -0.287).unwrap();
        assert!(close(measured.purities().mu_ab, 1.0 / (1.056 * 1.056 - 0.287 * 0.287), 1e-12));
        assert!(close(measured.purities().mu_ab, 0.968, 5e-4));
    }

    #[test]
    fn purities_match_loss_closed_form() {
        for &(vp, vm) in &[(0.74, 1.38), (0.67, 1.61), (0.5, 2.5)] {
            for &(ea, eb) in &[(0.9, 0.9), (0.3, 0.8), (1.0, 0.55)] {
                let spec = SqueezingSpec::new(vp, vm).unwrap();
                let cm = TwoModeCovariance::from_squeezing(spec, ChannelParams::new(ea, eb).unwrap())
                    .unwrap();
                let p = cm.purities();
                let t = vm + vp - 2.0;
                assert!(close(p.mu_a, 2.0 / (2.0 + t * ea), 1e-12));
                assert!(close(p.mu_b, 2.0 / (2.0 + t * eb), 1e-12));
                let mu_ab =
                    2.0 / (2.0 * ea * eb * (vm - 1.0) * (vp - 1.0) + ea * t + eb * t + 2.0);
                assert!(close(p.mu_ab, mu_ab, 1e-12));
            }
        }
    }

    #[test]
    fn steerability_examples() {
        let measured = TwoModeCovariance::symmetric(1.056, 1.056, -0.287).unwrap();
        let expected = (1.056f64 / (1.056 * 1.056 - 0.287 * 0.287)).ln();
        assert!(close(measured.steerability_b_to_a(), expected, 1e-12));
        assert!(close(measured.steerability_b_to_a(), 0.0223, 1e-4));
        assert_eq!(TwoModeCovariance::vacuum().steerability_b_to_a(), 0.0);

        let spec = SqueezingSpec::new(0.67, 1.61).unwrap();
        let cm = TwoModeCovariance::from_squeezing(spec, ChannelParams::new(0.9, 0.5).unwrap())
            .unwrap();
        assert!(cm.steerability_raw() < 0.0);
        assert_eq!(cm.steerability_b_to_a(), 0.0);
    }

    #[test]
    fn steerability_matches_efficiency_closed_form() {
        let (vp, vm) = (0.67f64, 1.61f64);
        let spec = SqueezingSpec::new(vp, vm).unwrap();
        for &(ea, eb) in &[(0.9, 0.95), (0.5, 0.99), (1.0, 1.0)] {
            let cm = TwoModeCovariance::from_squeezing(spec, ChannelParams::new(ea, eb).unwrap())
                .unwrap();
            let inner = ((vm + vp + 2.0 * (vm - 1.0) * (vp - 1.0) * eb - 2.0) * ea)
                / ((vm + vp - 2.0) * eb + 2.0)
                + 1.0;
            let expected = (-inner.abs().ln()).max(0.0);
            assert!(close(cm.steerability_b_to_a(), expected, 1e-12));
        }
    }

    #[test]
    fn threshold_examples() {
        let high = SqueezingSpec::new(0.67, 1.61).unwrap();
        let low = SqueezingSpec::new(0.74, 1.38).unwrap();
        assert!(close(steering_threshold_eta_b(high, 1.0).unwrap(), 0.696, 1e-3));
        assert!(close(steering_threshold_eta_b(low, 1.0).unwrap(), 0.607, 1e-3));
        assert!(close(steering_threshold_eta_b(high, 0.99).unwrap(), 0.703, 1e-3));
    }

    #[test]
    fn threshold_errors() {
        let weak = SqueezingSpec::new(0.99, 1.2).unwrap();
        assert_eq!(steering_threshold_eta_b(weak, 1.0), Err(Error::NoThreshold));
        let not_entangled = SqueezingSpec::new(1.1, 1.2).unwrap();
        assert!(steering_threshold_eta_b(not_entangled, 1.0).is_err());
        let spec = SqueezingSpec::new(0.67, 1.61).unwrap();
        assert!(steering_threshold_eta_b(spec, 0.0).is_err());
        assert!(steering_threshold_eta_b(spec, 1.5).is_err());
    }

    #[test]
    fn threshold_is_zero_crossing_of_raw_steerability() {
        let spec = SqueezingSpec::new(0.67, 1.61).unwrap();
        let eta = steering_threshold_eta_b(spec, 1.0).unwrap();
        for ea in [0.2, 0.6, 1.0] {
            let at = |eb: f64| {
                TwoModeCovariance::from_squeezing(spec, ChannelParams::new(ea, eb).unwrap())
                    .unwrap()
                    .steerability_raw()
            };
            assert!(at(eta - 1e-6) < 0.0);
            assert!(at(eta + 1e-6) > 0.0);
            assert!(at(eta).abs() < 1e-10);
        }
    }

    #[test]
    fn text_round_trip_and_measured_matrix() {
        let measured = TwoModeCovariance::symmetric(1.056, 1.056, -0.287).unwrap();
        let back: TwoModeCovariance = measured.to_text().parse().unwrap();
        assert_eq!(back, measured);

        let measured = "# covariance vacuum-variance=1\n\
            1.056 0 -0.287 0\n\
            0 1.055 0 0.287\n\
            -0.287 0 1.056 0\n\
            0 0.287 0 1.056\n";
        let cm: TwoModeCovariance = measured.parse().unwrap();
        assert!(close(cm.n(), 1.0555, 1e-12));
        assert!(close(cm.m(), 1.056, 1e-12));

        assert!("1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1".parse::<TwoModeCovariance>().is_err());
        assert!("# covariance vacuum-variance=1\n1 0.1 0 0\n0.1 1 0 0\n0 0 1 0\n0 0 0 1"
            .parse::<TwoModeCovariance>()
            .is_err());
    }

    #[test]
    fn vacuum_symplectic_spectrum() {
        let (lo, hi) = TwoModeCovariance::vacuum().symplectic_eigenvalues();
        assert_eq!((lo, hi), (1.0, 1.0));
    }
}
