use super::{domain_mask, CellTag, DomainSpec, Grid3, GridField};
use crate::error::{invalid, Error, Result};
use crate::geom::ConformalFactor;
use crate::quadrature::SphereRule;
use serde::Serialize;
use std::sync::Arc;

/// A measured quantity with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Euclidean volume of Ω by counting cell centres on uniform grids of
/// spacing `h` and `h/2`, combined by one Richardson step. The two-level
/// difference is the error estimate.
///
/// Only three dimensions are supported, plus balls in any dimension (whose
/// volume is returned in closed form).
pub fn euclidean_volume(domain: &DomainSpec, h: f64) -> Result<Estimate> {
    if !(h > 0.0) {
        return invalid("resolution must be positive");
    }
    if domain.dim() != 3 {
        return match domain {
            DomainSpec::Ball { .. } => Ok(Estimate { value: domain.analytic_volume().unwrap(), error: 0.0 }),
            _ => invalid(format!("volume of a {} only in three dimensions", domain.kind())),
        };
    }
    let coarse = count_volume(domain, h);
    let fine = count_volume(domain, 0.5 * h);
    // staircase volume error is second order on average for smooth boundaries
    let value = fine + (fine - coarse) / 3.0;
    Ok(Estimate { value, error: (fine - coarse).abs() })
}

fn count_volume(domain: &DomainSpec, h: f64) -> f64 {
    let c = domain.center();
    let grid = Grid3::uniform([c[0], c[1], c[2]], domain.circumradius() + 2.0 * h, h);
    let inside = domain_mask(&grid, domain).iter().filter(|&&t| t == CellTag::Interior).count();
    inside as f64 * h * h * h
}

/// Derivative at `x0` of the quadratic through `(x0, f0)`, `(x1, f1)`,
/// `(x2, f2)`.
fn three_point_derivative(x0: f64, f0: f64, x1: f64, f1: f64, x2: f64, f2: f64) -> f64 {
    let (d1, d2) = (x1 - x0, x2 - x0);
    let c1 = d2 / (d1 * (d2 - d1));
    let c2 = -d1 / (d2 * (d2 - d1));
    c1 * (f1 - f0) + c2 * (f2 - f0)
}

/// Cell-centred gradient. Central (three-point, non-uniform) differences
/// between cells of the same tag; one-sided three-point stencils where a
/// neighbour carries a different tag or lies off the grid.
pub fn gradient(field: &GridField) -> Vec<[f64; 3]> {
    let grid = field.grid();
    let dims = grid.dims();
    let values = field.values();
    let mask = field.mask();
    let mut out = vec![[0.0; 3]; field.len()];
    for (idx, g) in out.iter_mut().enumerate() {
        let ijk = grid.ijk(idx);
        let tag = mask[idx];
        for a in 0..3 {
            let axis = grid.axis(a);
            let stride = grid.stride(a);
            let i = ijk[a];
            let same = |k: isize| -> Option<usize> {
                let j = i as isize + k;
                if j < 0 || j >= dims[a] as isize {
                    return None;
                }
                let nidx = (idx as isize + k * stride as isize) as usize;
                (mask[nidx] == tag).then_some(nidx)
            };
            let x0 = axis.center(i);
            let f0 = values[idx];
            let at = |k: isize, nidx: usize| (axis.center((i as isize + k) as usize), values[nidx]);
            g[a] = match (same(-1), same(1)) {
                (Some(m), Some(p)) => {
                    let ((xm, fm), (xp, fp)) = (at(-1, m), at(1, p));
                    three_point_derivative(x0, f0, xm, fm, xp, fp)
                }
                (None, Some(p)) => match same(2) {
                    Some(pp) => {
                        let ((x1, f1), (x2, f2)) = (at(1, p), at(2, pp));
                        three_point_derivative(x0, f0, x1, f1, x2, f2)
                    }
                    None => (values[p] - f0) / (axis.center(i + 1) - x0),
                },
                (Some(m), None) => match same(-2) {
                    Some(mm) => {
                        let ((x1, f1), (x2, f2)) = (at(-1, m), at(-2, mm));
                        three_point_derivative(x0, f0, x1, f1, x2, f2)
                    }
                    None => (f0 - values[m]) / (x0 - axis.center(i - 1)),
                },
                (None, None) => 0.0,
            };
        }
    }
    out
}

/// Midpoint-rule `∫ w |∇f|² dV` over the exterior cells of `field`.
pub fn dirichlet_energy(field: &GridField, weight: Option<&GridField>) -> Result<f64> {
    let grid = field.grid();
    if let Some(w) = weight {
        if w.len() != field.len() {
            return invalid("weight and field live on different grids");
        }
    }
    let grad = gradient(field);
    let mut acc = 0.0;
    for idx in 0..field.len() {
        if field.mask()[idx] != CellTag::Exterior {
            continue;
        }
        let w = match weight {
            Some(w) => {
                let v = w.values()[idx];
                if v < 0.0 {
                    return Err(Error::NegativeWeight { value: v, point: grid.center(idx).to_vec() });
                }
                v
            }
            None => 1.0,
        };
        let g = grad[idx];
        acc += w * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]) * grid.cell_volume(idx);
    }
    Ok(acc)
}

/// Euclidean mean curvature (average of principal curvatures) of ∂Ω at `x`.
pub fn boundary_mean_curvature(domain: &DomainSpec, x: &[f64], h: f64) -> Result<f64> {
    Ok(domain.surface_geometry(x, h)?.1)
}

/// Area of ∂Ω in `g = u^{4/(n-2)} δ`, i.e. `∮ u^{2(n-1)/(n-2)} dA₀`.
///
/// Balls use the product sphere rule. Other three-dimensional domains sum
/// `h² |ν_a| u^4` over the grid-edge crossings of [`DomainSpec::boundary_samples`],
/// which is a Crofton-type estimate of the surface integral.
pub fn boundary_area_in_g(domain: &DomainSpec, u: &ConformalFactor, h: f64) -> Result<f64> {
    let n = domain.dim();
    if u.dim().n() != n {
        return invalid("factor and domain dimensions differ");
    }
    let p = 2.0 * (n as f64 - 1.0) / (n as f64 - 2.0);
    let weight = |x: &[f64]| -> Result<f64> {
        let v = u.value(x);
        if v <= 0.0 {
            return Err(Error::NonPositiveFactor { value: v, point: x.to_vec() });
        }
        Ok(v.powf(p))
    };
    if let DomainSpec::Ball { center, radius } = domain {
        let rule = SphereRule::default_for(n)?;
        let mut acc = 0.0;
        let mut x = vec![0.0; n];
        for i in 0..rule.len() {
            for (k, d) in rule.point(i).iter().enumerate() {
                x[k] = center[k] + radius * d;
            }
            acc += rule.weight(i) * weight(&x)?;
        }
        return Ok(acc * radius.powi(n as i32 - 1));
    }
    if n != 3 {
        return invalid(format!("boundary area of a {} only in three dimensions", domain.kind()));
    }
    let mut acc = 0.0;
    for s in domain.boundary_samples(h)? {
        let a = s.axis.expect("grid samples carry an axis");
        acc += h * h * s.normal[a].abs() * weight(&s.point)?;
    }
    Ok(acc)
}

/// Uniform grid around Ω with spacing `h` and a margin of `margin` beyond
/// its circumradius.
pub fn grid_around(domain: &DomainSpec, h: f64, margin: f64) -> Result<Arc<Grid3>> {
    if domain.dim() != 3 {
        return invalid("Cartesian grids are three-dimensional");
    }
    let c = domain.center();
    Ok(Arc::new(Grid3::uniform([c[0], c[1], c[2]], domain.circumradius() + margin, h)))
}
