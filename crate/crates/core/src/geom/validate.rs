//! Checks of the hypotheses placed on the conformal factor and on ∂Ω.

use super::{minimality_integrand, ConformalFactor};
use crate::error::{invalid, Result};
use crate::fields::{DomainSpec, Grid3};
use serde::Serialize;

/// Superharmonicity violations below `SUPERHARMONIC_SAFETY · h² · scale`
/// count as zero.
pub const SUPERHARMONIC_SAFETY: f64 = 10.0;

/// Outcome of a pointwise hypothesis check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub ok: bool,
    /// The extreme sampled value of the checked quantity.
    pub worst: f64,
    pub worst_at: Option<Vec<f64>>,
    pub tolerance: f64,
    pub samples: usize,
}

/// `∂_ν u + (n-2)/2 · h0 · u` on boundary samples.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryResidual {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl BoundaryResidual {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Residual of the minimality condition of ∂Ω in `g`.
pub fn minimality_residual(u: &ConformalFactor, domain: &DomainSpec, h: f64) -> Result<BoundaryResidual> {
    check_dims(u, domain)?;
    let mut points = Vec::new();
    let mut values = Vec::new();
    for s in domain.boundary_samples(h)? {
        values.push(minimality_integrand(u, &s.point, &s.normal, s.h0));
        points.push(s.point);
    }
    Ok(BoundaryResidual { points, values })
}

fn check_dims(u: &ConformalFactor, domain: &DomainSpec) -> Result<()> {
    if u.dim().n() != domain.dim() {
        return invalid(format!(
            "factor is {}-dimensional but the domain is {}-dimensional",
            u.dim().n(),
            domain.dim()
        ));
    }
    Ok(())
}

/// Points of `ℝⁿ \ Ω` out to three circumradii (plus a few cells): cell
/// centres of a uniform grid in three dimensions, rays along the boundary
/// sample directions otherwise. Boundary samples themselves are included.
pub fn exterior_samples(domain: &DomainSpec, h: f64) -> Result<Vec<Vec<f64>>> {
    let n = domain.dim();
    let c = domain.center();
    let rho = domain.circumradius();
    let reach = 3.0 * rho + 4.0 * h;
    let mut out: Vec<Vec<f64>> = domain.boundary_samples(h)?.into_iter().map(|s| s.point).collect();
    if n == 3 {
        let spacing = h.max(reach / 48.0);
        let grid = Grid3::uniform([c[0], c[1], c[2]], reach, spacing);
        for idx in 0..grid.len() {
            let x = grid.center(idx);
            if !domain.contains(&x) {
                out.push(x.to_vec());
            }
        }
    } else {
        let dirs: Vec<Vec<f64>> =
            out.iter().map(|p| p.iter().zip(&c).map(|(a, b)| (a - b) / rho).collect()).collect();
        let steps = 32;
        for d in &dirs {
            for k in 1..=steps {
                let r = rho * (reach / rho).powf(k as f64 / steps as f64);
                out.push(c.iter().zip(d).map(|(ci, di)| ci + r * di).collect());
            }
        }
    }
    Ok(out)
}

/// `−Δ₀u ≥ −tol` at every exterior sample, `tol = 10 h² · scale`. `worst`
/// is the largest sampled `Δ₀u`.
pub fn check_superharmonic(u: &ConformalFactor, domain: &DomainSpec, h: f64, scale: f64) -> Result<HypothesisCheck> {
    check_dims(u, domain)?;
    let tolerance = SUPERHARMONIC_SAFETY * h * h * scale;
    let samples = exterior_samples(domain, h)?;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = None;
    for x in &samples {
        let lap = u.laplacian(x);
        if lap > worst {
            worst = lap;
            worst_at = Some(x.clone());
        }
    }
    Ok(HypothesisCheck {
        ok: worst <= tolerance,
        worst,
        worst_at,
        tolerance,
        samples: samples.len(),
    })
}

/// `u ≥ 1 − tol` at every exterior sample. Closed-form factors use a
/// round-off tolerance, sampled ones `h²`. `worst` is the sampled minimum.
pub fn check_u_ge_one(u: &ConformalFactor, domain: &DomainSpec, h: f64) -> Result<HypothesisCheck> {
    check_dims(u, domain)?;
    let tolerance = if u.is_analytic() { 1e-12 } else { h * h };
    let samples = exterior_samples(domain, h)?;
    let mut worst = f64::INFINITY;
    let mut worst_at = None;
    for x in &samples {
        let v = u.value(x);
        if v < worst {
            worst = v;
            worst_at = Some(x.clone());
        }
    }
    Ok(HypothesisCheck {
        ok: worst >= 1.0 - tolerance,
        worst,
        worst_at,
        tolerance,
        samples: samples.len(),
    })
}

/// `h0 > 0` at every boundary sample and ∂Ω smooth. `worst` is the smallest
/// sampled `h0`.
pub fn check_mean_convex(domain: &DomainSpec, h: f64) -> Result<HypothesisCheck> {
    let samples = domain.boundary_samples(h)?;
    let mut worst = f64::INFINITY;
    let mut worst_at = None;
    for s in &samples {
        if s.h0 < worst {
            worst = s.h0;
            worst_at = Some(s.point.clone());
        }
    }
    Ok(HypothesisCheck {
        ok: worst > 0.0 && domain.is_smooth(),
        worst,
        worst_at,
        tolerance: 0.0,
        samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Pole;

    fn unit_ball() -> DomainSpec {
        DomainSpec::ball(vec![0.0; 3], 1.0).unwrap()
    }

    #[test]
    fn horizon_residual_vanishes_and_converges() {
        let u = ConformalFactor::schwarzschild(3, 2.0).unwrap();
        let mut sups = Vec::new();
        for h in [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0] {
            let res = minimality_residual(&u, &unit_ball(), h).unwrap();
            assert!(res.sup_norm() <= 5.0 * h);
            sups.push(res.sup_norm());
        }
        assert!(sups[1] < sups[0] / 2.0 && sups[2] < sups[1] / 2.0, "{sups:?}");
    }

    #[test]
    fn residual_of_larger_sphere() {
        let u = ConformalFactor::schwarzschild(3, 2.0).unwrap();
        let d = DomainSpec::ball(vec![0.0; 3], 2.0).unwrap();
        let res = minimality_residual(&u, &d, 1.0 / 16.0).unwrap();
        for v in &res.values {
            assert!((v - 0.125).abs() < 2e-3, "{v}");
        }
        let flat = ConformalFactor::flat(3).unwrap();
        let res = minimality_residual(&flat, &unit_ball(), 1.0 / 16.0).unwrap();
        assert!(res.values.iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn gaussian_bump_is_not_superharmonic() {
        let h = 1.0 / 8.0;
        let grid = Grid3::uniform([0.0; 3], 4.0, h);
        let u = ConformalFactor::sampled_from_fn(grid, |x| 1.0 + (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
        let check = check_superharmonic(&u, &unit_ball(), h, 1.0).unwrap();
        assert!(!check.ok);
        let at = check.worst_at.unwrap();
        let r = at.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(r > 1.5f64.sqrt(), "worst violation at r = {r}");
        // Δu = e^{-r²}(4r² - 6) peaks at r² = 5/2
        let peak = (-2.5f64).exp() * 4.0;
        assert!((check.worst - peak).abs() < 0.05 * peak, "{} vs {peak}", check.worst);
    }

    #[test]
    fn harmonic_factors_pass() {
        let s = ConformalFactor::schwarzschild(3, 2.0).unwrap();
        let c = check_superharmonic(&s, &unit_ball(), 0.1, 1.0).unwrap();
        assert!(c.ok && c.worst.abs() < 1e-12);
        let g = check_u_ge_one(&s, &unit_ball(), 0.1).unwrap();
        assert!(g.ok && g.worst > 1.0);
        let m = ConformalFactor::multipole(
            3,
            vec![Pole::new(vec![0.3, 0.0, 0.0], 0.2), Pole::new(vec![-0.3, 0.1, 0.0], 0.4)],
        )
        .unwrap();
        assert!(check_u_ge_one(&m, &unit_ball(), 0.1).unwrap().ok);
        assert!(check_superharmonic(&m, &unit_ball(), 0.1, 1.0).unwrap().ok);
        let flat = ConformalFactor::flat(3).unwrap();
        assert!(check_superharmonic(&flat, &unit_ball(), 0.1, 1.0).unwrap().ok);
    }

    #[test]
    fn constructed_violation_is_caught() {
        let h = 1.0 / 16.0;
        let grid = Grid3::uniform([0.0; 3], 4.0, h);
        let u = ConformalFactor::sampled_from_fn(grid, |x| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt().max(0.5);
            1.0 - 0.1 / r
        });
        let c = check_u_ge_one(&u, &unit_ball(), h).unwrap();
        assert!(!c.ok);
        assert!((c.worst - 0.9).abs() < 1e-3, "{}", c.worst);
    }

    #[test]
    fn mean_convexity() {
        assert!(check_mean_convex(&unit_ball(), 0.1).unwrap().ok);
        let overlap =
            DomainSpec::union_of_balls(vec![(vec![-0.5, 0.0, 0.0], 1.0), (vec![0.5, 0.0, 0.0], 1.0)]).unwrap();
        assert!(!check_mean_convex(&overlap, 0.1).unwrap().ok);
    }

    #[test]
    fn higher_dimensional_samples() {
        let d = DomainSpec::ball(vec![0.0; 5], 1.0).unwrap();
        let u = ConformalFactor::schwarzschild(5, 2.0).unwrap();
        let res = minimality_residual(&u, &d, 0.1).unwrap();
        assert!(res.sup_norm() < 1e-12);
        assert!(check_u_ge_one(&u, &d, 0.1).unwrap().ok);
        assert!(check_superharmonic(&u, &d, 0.1, 1.0).unwrap().ok);
    }
}
