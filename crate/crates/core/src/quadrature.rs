//! Numerical integration used by the negativity oracle and the Fock projections.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive 7/15-point Gauss-Kronrod integration of `f` on `[a, b]`.
///
/// Bisects the segment with the largest error estimate until the summed error
/// is below `max(abs_tol, rel_tol * |I|)` or the segment budget is spent.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Integral {
    let (value, error) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let (mut total, mut total_err) = (value, error);
    while total_err > abs_tol.max(rel_tol * total.abs()) && heap.len() < MAX_INTERVALS {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (lv, le) = gk15(&f, worst.a, mid);
        let (rv, re) = gk15(&f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Segment { a: mid, b: worst.b, value: rv, error: re });
    }
    // Re-sum in position order so the result does not depend on the running
    // update order.
    let mut segments = heap.into_vec();
    segments.sort_by(|l, r| l.a.total_cmp(&r.a));
    let value = segments.iter().map(|s| s.value).sum();
    let error = segments.iter().map(|s| s.error).sum();
    Integral { value, error }
}

/// Uniform square grid over `[-half_width, half_width]^2` with `points` nodes
/// per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareGrid {
    pub half_width: f64,
    pub points: usize,
}

impl SquareGrid {
    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.step()
    }

    /// Composite trapezoid sums of `f` and `|f|` over the grid. Rows are
    /// summed in parallel and reduced in row order.
    pub fn integrate_with_abs<F>(&self, f: F) -> (f64, f64)
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let h = self.step();
        let last = self.points - 1;
        let weight = |i: usize| if i == 0 || i == last { 0.5 } else { 1.0 };
        let rows: Vec<(f64, f64)> = (0..self.points)
            .into_par_iter()
            .map(|i| {
                let x = self.coord(i);
                let mut s = 0.0;
                let mut s_abs = 0.0;
                for j in 0..self.points {
                    let w = weight(j) * f(x, self.coord(j));
                    s += w;
                    s_abs += w.abs();
                }
                (weight(i) * s, weight(i) * s_abs)
            })
            .collect();
        let (s, s_abs) = rows
            .iter()
            .fold((0.0, 0.0), |acc, r| (acc.0 + r.0, acc.1 + r.1));
        (s * h * h, s_abs * h * h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x.powi(5) - 2.0 * x * x, 0.0, 2.0, 1e-14, 0.0);
        assert!((r.value - (64.0 / 6.0 - 16.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn kinked_integrand() {
        let r = integrate(|x: f64| (x - 0.3).abs() * (-x).exp(), 0.0, 40.0, 1e-13, 1e-12);
        // \int_0^0.3 (0.3-x)e^{-x} + \int_0.3^inf (x-0.3)e^{-x}
        let exact = (0.3 - 1.0 + (-0.3f64).exp()) + (-0.3f64).exp();
        assert!((r.value - exact).abs() < 1e-11, "{} vs {}", r.value, exact);
    }

    #[test]
    fn gaussian_on_grid() {
        let grid = SquareGrid { half_width: 8.0, points: 401 };
        let (s, s_abs) = grid.integrate_with_abs(|x, p| {
            (-(x * x + p * p) / 2.0).exp() / (2.0 * std::f64::consts::PI)
        });
        assert!((s - 1.0).abs() < 1e-10);
        assert_eq!(s, s_abs);
    }
}
