//! ADM mass: the flux integral of a general metric, its reduction for
//! conformally flat metrics, and extrapolation in the radius.

use crate::error::{invalid, Error, Result};
use crate::geom::{ConformalFactor, Dimension};
use crate::quadrature::SphereRule;
use serde::Serialize;

/// Relative finite-difference step used for metric derivatives.
pub const DERIVATIVE_STEP: f64 = 1e-2;

/// A Riemannian metric on (part of) `ℝⁿ` in Cartesian coordinates.
pub trait Metric: Sync {
    fn dim(&self) -> usize;

    /// `g_ij(x)`, row-major.
    fn components(&self, x: &[f64]) -> Vec<f64>;

    /// Radius inside which the metric may be singular.
    fn singular_radius(&self) -> f64 {
        0.0
    }

    /// `∂_k g_ij(x)` by fourth-order central differences.
    fn derivative(&self, x: &[f64], k: usize, step: f64) -> Vec<f64> {
        let shifted = |t: f64| {
            let mut y = x.to_vec();
            y[k] += t;
            self.components(&y)
        };
        let (p1, m1, p2, m2) = (shifted(step), shifted(-step), shifted(2.0 * step), shifted(-2.0 * step));
        (0..p1.len()).map(|i| (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * step)).collect()
    }
}

/// The Euclidean metric.
#[derive(Debug, Clone, Copy)]
pub struct FlatMetric(pub usize);

impl Metric for FlatMetric {
    fn dim(&self) -> usize {
        self.0
    }

    fn components(&self, _: &[f64]) -> Vec<f64> {
        identity(self.0, 1.0)
    }
}

/// `u^{4/(n-2)} δ`.
#[derive(Debug, Clone)]
pub struct ConformalMetric(pub ConformalFactor);

impl Metric for ConformalMetric {
    fn dim(&self) -> usize {
        self.0.dim().n()
    }

    fn components(&self, x: &[f64]) -> Vec<f64> {
        let dim = self.0.dim();
        identity(dim.n(), self.0.value(x).powf(4.0 / dim.nm2()))
    }

    fn singular_radius(&self) -> f64 {
        self.0.singular_radius()
    }
}

/// A metric given by a closure returning row-major components.
pub struct FnMetric<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> FnMetric<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> Metric for FnMetric<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn components(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
}

fn identity(n: usize, scale: f64) -> Vec<f64> {
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        g[i * n + i] = scale;
    }
    g
}

/// `1/(2(n-1)ω) ∮_{S_r} (g_ij,i − g_ii,j) ν_j dA` on the coordinate sphere
/// of radius `r` about the origin.
pub fn adm_flux_general(metric: &dyn Metric, r: f64) -> Result<f64> {
    let dim = Dimension::new(metric.dim())?;
    if !(r > metric.singular_radius()) || !r.is_finite() {
        return invalid(format!("radius {r} is not outside the singular radius {}", metric.singular_radius()));
    }
    let n = dim.n();
    let rule = SphereRule::default_for(n)?;
    let step = DERIVATIVE_STEP * r;
    let mut x = vec![0.0; n];
    let flux = rule.integrate(|nu| {
        for (xi, v) in x.iter_mut().zip(nu) {
            *xi = r * v;
        }
        let d: Vec<Vec<f64>> = (0..n).map(|k| metric.derivative(&x, k, step)).collect();
        let mut s = 0.0;
        for j in 0..n {
            let div: f64 = (0..n).map(|i| d[i][i * n + j]).sum();
            let trace: f64 = (0..n).map(|i| d[j][i * n + i]).sum();
            s += (div - trace) * nu[j];
        }
        s
    });
    Ok(flux * r.powi(n as i32 - 1) / (2.0 * (n as f64 - 1.0) * dim.omega()))
}

/// The flux integral for `g = u^{4/(n-2)} δ`:
/// `−2/((n−2)ω) ∮_{S_r} u^{(6−n)/(n−2)} ∂_ν u dA`.
pub fn adm_conformal(u: &ConformalFactor, r: f64) -> Result<f64> {
    let dim = u.dim();
    if !(r > u.singular_radius()) || !r.is_finite() {
        return invalid(format!("radius {r} is not outside the singular radius {}", u.singular_radius()));
    }
    let n = dim.n();
    let power = (6.0 - n as f64) / dim.nm2();
    let rule = SphereRule::default_for(n)?;
    let mut x = vec![0.0; n];
    let mut bad = None;
    let flux = rule.integrate(|nu| {
        for (xi, v) in x.iter_mut().zip(nu) {
            *xi = r * v;
        }
        let value = u.value(&x);
        if !(value > 0.0) && bad.is_none() {
            bad = Some((value, x.clone()));
        }
        let dnu: f64 = u.gradient(&x).iter().zip(nu).map(|(g, v)| g * v).sum();
        value.powf(power) * dnu
    });
    if let Some((value, point)) = bad {
        return Err(Error::NonPositiveFactor { value, point });
    }
    let m = -2.0 / (dim.nm2() * dim.omega()) * flux * r.powi(n as i32 - 1);
    // no negative zero for flat data
    Ok(m + 0.0)
}

/// `2 Σ c_i`, the mass of `1 + Σ c_i |x − p_i|^{2−n}`.
pub fn mass_of_multipole(charges: &[f64]) -> Result<f64> {
    if let Some(c) = charges.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
        return invalid(format!("charges must be positive, got {c}"));
    }
    Ok(2.0 * charges.iter().sum::<f64>())
}

/// Parameters of `m(r) = m_∞ + a r^{−s}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassFit {
    pub m_inf: f64,
    pub amplitude: f64,
    pub exponent: f64,
}

/// Flux samples and their extrapolation to infinite radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassEstimate {
    /// `m_∞` when the fit succeeded, otherwise the flux at the largest
    /// radius.
    pub value: f64,
    /// `(r_k, m(r_k))`, radii increasing.
    pub samples: Vec<(f64, f64)>,
    pub fit: Option<MassFit>,
    /// Misfit of the model at the fourth-largest radius, when there is one.
    pub residual: Option<f64>,
    /// The three largest samples do not approach a limit monotonically.
    pub non_monotone: bool,
}

impl MassEstimate {
    /// Uncertainty of `value`: the last correction plus the residual.
    pub fn error_estimate(&self) -> f64 {
        let k = self.samples.len();
        let last = (self.samples[k - 1].1 - self.value).abs();
        last + self.residual.unwrap_or(0.0).abs()
    }
}

/// What to take the flux of.
#[derive(Clone, Copy)]
pub enum MassSource<'a> {
    Conformal(&'a ConformalFactor),
    General(&'a dyn Metric),
}

impl MassSource<'_> {
    pub fn flux(&self, r: f64) -> Result<f64> {
        match self {
            Self::Conformal(u) => adm_conformal(u, r),
            Self::General(g) => adm_flux_general(*g, r),
        }
    }
}

/// Differences below this fraction of the mass scale count as zero.
const NOISE_FLOOR: f64 = 1e-13;

/// Samples the flux at geometric `radii` (ratio ≥ 2, at least three, all
/// beyond `4·inner_radius`) and fits `m_∞ + a r^{−s}` through the three
/// largest samples.
pub fn adm_extrapolate(source: MassSource<'_>, radii: &[f64], inner_radius: f64) -> Result<MassEstimate> {
    if radii.len() < 3 {
        return invalid("need at least three radii");
    }
    let ratio = radii[1] / radii[0];
    if !(ratio >= 2.0) || radii.windows(2).any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-9) {
        return invalid("radii must form a geometric sequence with ratio >= 2");
    }
    if !(radii[0] >= 4.0 * inner_radius) {
        return invalid(format!("radius {} is inside 4x the domain radius {inner_radius}", radii[0]));
    }
    let samples = radii.iter().map(|&r| source.flux(r).map(|m| (r, m))).collect::<Result<Vec<_>>>()?;
    Ok(fit_samples(samples, ratio))
}

fn fit_samples(samples: Vec<(f64, f64)>, ratio: f64) -> MassEstimate {
    let k = samples.len();
    let (m1, m2, m3) = (samples[k - 3].1, samples[k - 2].1, samples[k - 1].1);
    let (d1, d2) = (m2 - m1, m3 - m2);
    let floor = NOISE_FLOOR * m3.abs().max(1.0);
    let model = |fit: &MassFit, r: f64| fit.m_inf + fit.amplitude * r.powf(-fit.exponent);
    let fit = if d1.abs() <= floor && d2.abs() <= floor {
        Some(MassFit { m_inf: m3, amplitude: 0.0, exponent: 0.0 })
    } else {
        let q = d2 / d1;
        if q > 0.0 && q < 1.0 {
            let m_inf = m3 + d2 * q / (1.0 - q);
            let exponent = -q.ln() / ratio.ln();
            let r3 = samples[k - 1].0;
            Some(MassFit { m_inf, amplitude: (m3 - m_inf) * r3.powf(exponent), exponent })
        } else {
            None
        }
    };
    let residual = match (&fit, k) {
        (Some(f), 4..) => Some(samples[k - 4].1 - model(f, samples[k - 4].0)),
        _ => None,
    };
    MassEstimate {
        value: fit.map_or(m3, |f| f.m_inf),
        non_monotone: fit.is_none(),
        samples,
        fit,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Pole;

    #[test]
    fn flat_metric_has_zero_mass() {
        assert_eq!(adm_flux_general(&FlatMetric(3), 10.0).unwrap(), 0.0);
        let u = ConformalFactor::flat(4).unwrap();
        assert_eq!(adm_conformal(&u, 10.0).unwrap().to_bits(), 0.0f64.to_bits());
        let est = adm_extrapolate(MassSource::Conformal(&u), &[10.0, 20.0, 40.0], 1.0).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.fit.unwrap().amplitude, 0.0);
    }

    /// For `u = 1 + c r^{2-n}`: `∂_r u = −(n−2) c r^{1−n}` is constant on
    /// the sphere, so the flux is `2c u^{(6−n)/(n−2)}`.
    fn monopole_flux(n: usize, c: f64, r: f64) -> f64 {
        let nm2 = n as f64 - 2.0;
        2.0 * c * (1.0 + c * r.powf(-nm2)).powf((6.0 - n as f64) / nm2)
    }

    #[test]
    fn conformal_flux_of_monopole() {
        for n in 3..=7 {
            for c in [0.25, 1.0, 3.5] {
                let u = ConformalFactor::multipole(n, vec![Pole::new(vec![0.0; n], c)]).unwrap();
                for r in [2.0, 50.0, 1e3] {
                    let m = adm_conformal(&u, r).unwrap();
                    assert!((m / monopole_flux(n, c, r) - 1.0).abs() < 1e-12, "n={n} c={c} r={r}: {m}");
                }
            }
        }
        let u = ConformalFactor::multipole(3, vec![Pole::new(vec![0.0; 3], 0.25)]).unwrap();
        assert!((adm_conformal(&u, 1e3).unwrap() / 0.5 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn schwarzschild_mass_parameter() {
        let u = ConformalFactor::schwarzschild(3, 2.0).unwrap();
        // 2c(1 + c/r)³ with c = 1 at r = 50
        let m50 = adm_flux_general(&ConformalMetric(u.clone()), 50.0).unwrap();
        assert!((m50 - 2.0 * 1.02f64.powi(3)).abs() < 1e-7, "{m50}");
        let est = adm_extrapolate(MassSource::Conformal(&u), &[16.0, 32.0, 64.0], 1.0).unwrap();
        assert!((est.value / 2.0 - 1.0).abs() < 5e-3, "{est:?}");
        assert!(!est.non_monotone);
    }

    #[test]
    fn general_flux_of_areal_schwarzschild() {
        // g = δ + f x̂x̂ with f = 1/(1 − 2m r^{2−n}) − 1; the flux is r^{n−2} f / 2
        for n in [3usize, 4, 5] {
            let m = 1.5;
            let metric = FnMetric::new(n, move |x: &[f64]| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let f = 1.0 / (1.0 - 2.0 * m * r2.powf(-(n as f64 - 2.0) / 2.0)) - 1.0;
                let mut g = identity(n, 1.0);
                for i in 0..n {
                    for j in 0..n {
                        g[i * n + j] += f * x[i] * x[j] / r2;
                    }
                }
                g
            });
            for r in [20.0f64, 100.0] {
                let rn = r.powi(n as i32 - 2);
                let exact = rn * (1.0 / (1.0 - 2.0 * m / rn) - 1.0) / 2.0;
                let got = adm_flux_general(&metric, r).unwrap();
                assert!((got / exact - 1.0).abs() < 1e-6, "n={n} r={r}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn reduction_matches_general_flux() {
        let u = ConformalFactor::multipole(
            3,
            vec![Pole::new(vec![0.5, -0.2, 0.1], 0.5), Pole::new(vec![-0.3, 0.4, 0.0], 0.25)],
        )
        .unwrap();
        for r in [10.0, 100.0] {
            let a = adm_conformal(&u, r).unwrap();
            let b = adm_flux_general(&ConformalMetric(u.clone()), r).unwrap();
            assert!((a / b - 1.0).abs() < 1e-7, "r={r}: {a} vs {b}");
        }
        let m100 = adm_conformal(&u, 100.0).unwrap();
        assert!((m100 / 1.5 - 1.0).abs() < 0.025, "{m100}");
    }

    #[test]
    fn extrapolation_of_two_poles() {
        let u = ConformalFactor::multipole(
            3,
            vec![Pole::new(vec![0.0; 3], 0.5), Pole::new(vec![1.0, 0.0, 0.0], 0.5)],
        )
        .unwrap();
        let radii = [8.0, 16.0, 32.0, 64.0, 128.0];
        let est = adm_extrapolate(MassSource::Conformal(&u), &radii, 1.0).unwrap();
        assert!((est.value / 2.0 - 1.0).abs() < 5e-3, "{est:?}");
        assert!(est.residual.unwrap().abs() < 0.05);
        let errors: Vec<f64> = est.samples.iter().map(|s| (s.1 - est.value).abs()).collect();
        assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    }

    #[test]
    fn mass_of_charges() {
        assert_eq!(mass_of_multipole(&[1.0]).unwrap(), 2.0);
        assert_eq!(mass_of_multipole(&[0.5, 0.25]).unwrap(), 1.5);
        assert_eq!(mass_of_multipole(&[]).unwrap(), 0.0);
        assert!(mass_of_multipole(&[1.0, -0.5]).is_err());
    }

    #[test]
    fn bad_radii_rejected() {
        let u = ConformalFactor::schwarzschild(3, 1.0).unwrap();
        let src = MassSource::Conformal(&u);
        assert!(adm_extrapolate(src, &[10.0, 20.0], 1.0).is_err());
        assert!(adm_extrapolate(src, &[10.0, 15.0, 22.5], 1.0).is_err());
        assert!(adm_extrapolate(src, &[2.0, 4.0, 8.0], 1.0).is_err());
        let m = ConformalFactor::multipole(3, vec![Pole::new(vec![3.0, 0.0, 0.0], 1.0)]).unwrap();
        assert!(adm_conformal(&m, 2.0).is_err());
    }

    #[test]
    fn oscillating_tail_is_flagged() {
        let est = fit_samples(vec![(1.0, 1.0), (2.0, 1.2), (4.0, 1.1)], 2.0);
        assert!(est.non_monotone && est.fit.is_none());
        assert_eq!(est.value, 1.1);
    }
}
