//! One-dimensional Gauss rules, adaptive Gauss–Kronrod integration and
//! product rules on spheres.

use crate::error::{invalid, Result};
use crate::geom::half_integer_gamma;
use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;

/// Gauss rule for the weight `(1 - t²)^a` on `[-1, 1]`, built with the
/// Golub–Welsch eigenvalue method. Nodes are returned in increasing order.
pub fn gauss_gegenbauer(points: usize, a: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(points >= 1 && a > -1.0);
    let mut jacobi = DMatrix::<f64>::zeros(points, points);
    for k in 1..points {
        let kf = k as f64;
        let b = kf * (kf + 2.0 * a) / (4.0 * (kf + a) * (kf + a) - 1.0);
        jacobi[(k, k - 1)] = b.sqrt();
        jacobi[(k - 1, k)] = b.sqrt();
    }
    // ∫(1-t²)^a dt = √π Γ(a+1)/Γ(a+3/2)
    let mu0 = PI.sqrt() * gamma(a + 1.0) / gamma(a + 1.5);
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    // symmetrise to remove eigen-solver noise
    let n = pairs.len();
    for i in 0..n / 2 {
        let (l, r) = (pairs[i], pairs[n - 1 - i]);
        let t = 0.5 * (r.0 - l.0);
        let w = 0.5 * (l.1 + r.1);
        pairs[i] = (-t, w);
        pairs[n - 1 - i] = (t, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    pairs.into_iter().unzip()
}

/// Γ at positive half-integers.
fn gamma(x: f64) -> f64 {
    let k = (2.0 * x).round();
    debug_assert!((2.0 * x - k).abs() < 1e-12);
    half_integer_gamma(k as usize)
}

const GK15_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK15_WEIGHTS[7] * fc;
    let mut gauss = G7_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = h * GK15_NODES[i];
        let s = f(c - x) + f(c + x);
        kronrod += GK15_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += G7_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Result of [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`
/// to absolute error `abs_tol` or relative error `rel_tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Integral {
    let mut intervals = vec![{
        let (v, e) = gk15(&f, a, b);
        (a, b, v, e)
    }];
    let mut evaluations = 15;
    loop {
        let value: f64 = intervals.iter().map(|i| i.2).sum();
        let error: f64 = intervals.iter().map(|i| i.3).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) || evaluations > 200_000 {
            return Integral { value, error, evaluations };
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
        evaluations += 30;
    }
}

/// Product quadrature on the unit sphere `S^{n-1}` in hyperspherical
/// coordinates: Gauss rules in the cosines of the polar angles and the
/// trapezoid rule in the azimuth.
#[derive(Debug, Clone)]
pub struct SphereRule {
    n: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl SphereRule {
    /// `polar` nodes per polar angle and `2·polar` azimuthal nodes.
    pub fn new(n: usize, polar: usize) -> Result<Self> {
        if n < 2 {
            return invalid("sphere rules need n >= 2");
        }
        if polar < 1 {
            return invalid("need at least one polar node");
        }
        let azimuth = 2 * polar;
        let mut points = Vec::with_capacity(azimuth * 2);
        let mut weights = Vec::with_capacity(azimuth);
        for j in 0..azimuth {
            let phi = 2.0 * PI * j as f64 / azimuth as f64;
            points.extend_from_slice(&[phi.cos(), phi.sin()]);
            weights.push(2.0 * PI / azimuth as f64);
        }
        // lift S^{d-2} to S^{d-1} via x = (t, √(1-t²) y), dA = (1-t²)^{(d-3)/2} dt dA'
        for d in 3..=n {
            let (ts, ws) = gauss_gegenbauer(polar, (d as f64 - 3.0) / 2.0);
            let prev = d - 1;
            let mut next_points = Vec::with_capacity(points.len() / prev * d * polar);
            let mut next_weights = Vec::with_capacity(weights.len() * polar);
            for (t, wt) in ts.iter().zip(&ws) {
                let s = (1.0 - t * t).sqrt();
                for (k, w) in weights.iter().enumerate() {
                    next_points.push(*t);
                    next_points.extend(points[k * prev..(k + 1) * prev].iter().map(|y| s * y));
                    next_weights.push(wt * w);
                }
            }
            points = next_points;
            weights = next_weights;
        }
        Ok(Self { n, points, weights })
    }

    /// 64×128 on `S²`, fewer polar nodes per angle in higher dimensions.
    pub fn default_for(n: usize) -> Result<Self> {
        let polar = match n {
            3 => 64,
            4 => 24,
            5 => 12,
            6 => 8,
            7 => 6,
            _ => 4,
        };
        Self::new(n, polar)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.n..(i + 1) * self.n]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// `∫_{S^{n-1}} f dA` for the unit sphere.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        (0..self.len()).map(|i| self.weights[i] * f(self.point(i))).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::sphere_area;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (t, w) = gauss_gegenbauer(5, 0.0);
        for p in 0..10 {
            let q: f64 = t.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "p={p}: {q}");
        }
    }

    #[test]
    fn gegenbauer_weights_sum_to_moment() {
        // ∫(1-t²)^{1/2} dt = π/2, ∫(1-t²) dt = 4/3
        let (_, w) = gauss_gegenbauer(7, 0.5);
        assert!((w.iter().sum::<f64>() - PI / 2.0).abs() < 1e-14);
        let (t, w) = gauss_gegenbauer(3, 1.0);
        assert!((w.iter().sum::<f64>() - 4.0 / 3.0).abs() < 1e-14);
        // ∫ t²(1-t²) dt = 4/15
        let m2: f64 = t.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((m2 - 4.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_rule_reproduces_area_and_moments() {
        for n in 3..=7 {
            let rule = SphereRule::default_for(n).unwrap();
            let area = rule.integrate(|_| 1.0);
            let exact = sphere_area(n).unwrap();
            assert!((area / exact - 1.0).abs() < 1e-13, "n={n}");
            // ∫ x_i² = ω/n on the unit sphere
            for i in 0..n {
                let m = rule.integrate(|x| x[i] * x[i]);
                assert!((m * n as f64 / exact - 1.0).abs() < 1e-12, "n={n} i={i}");
            }
            for k in 0..rule.len() {
                let norm: f64 = rule.point(k).iter().map(|v| v * v).sum();
                assert!((norm - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn adaptive_integration_handles_endpoint_singularity() {
        let r = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-12, 1e-12);
        assert!((r.value - 2.0).abs() < 1e-9, "{r:?}");
        let r = integrate(|x| x.exp(), 0.0, 1.0, 1e-14, 1e-14);
        assert!((r.value - (1f64.exp() - 1.0)).abs() < 1e-14);
    }
}
