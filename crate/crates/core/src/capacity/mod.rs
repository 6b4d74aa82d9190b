//! Flat and weighted variational capacity: closed forms, the radial
//! reduction, and a three-dimensional grid solver.

mod grid;

pub use grid::{solve, solve_on_grid, Operator, OuterCondition, Preconditioner, SolverStats};

use crate::error::{invalid, Error, Result};
use crate::fields::{CellTag, DomainSpec, Grid3, GridField, RadialProfile};
use crate::geom::{ConformalFactor, Dimension};
use crate::quadrature::integrate;
use crate::symmetrize;
use serde::Serialize;
use std::sync::Arc;

/// Coefficient `w` of the energy `∫ w |∇₀φ|² dV₀`.
#[derive(Debug, Clone)]
pub enum Weight {
    Unit,
    /// `w = u²`, which turns the flat energy into the energy in
    /// `g = u^{4/(n-2)} δ`.
    FactorSquared(ConformalFactor),
}

impl Weight {
    pub fn at(&self, x: &[f64]) -> f64 {
        match self {
            Self::Unit => 1.0,
            Self::FactorSquared(u) => {
                let v = u.value(x);
                v * v
            }
        }
    }
}

/// The minimising potential of a capacity computation.
#[derive(Debug, Clone)]
pub enum Potential {
    Radial(RadialProfile),
    Grid(GridField),
}

#[derive(Debug, Clone)]
pub struct CapacityResult {
    /// `energy / ((n-2) ω_{n-1})`.
    pub value: f64,
    pub energy: f64,
    pub potential: Potential,
    pub error_estimate: f64,
    pub stats: SolverStats,
}

/// Capacity of the round sphere of radius `radius` in flat space,
/// `R^{n-2}`.
pub fn flat_capacity_sphere(n: usize, radius: f64) -> Result<f64> {
    Dimension::new(n)?;
    if !(radius > 0.0) {
        return invalid(format!("radius must be positive, got {radius}"));
    }
    Ok(radius.powi(n as i32 - 2))
}

/// Capacity of the sphere `|x| = r_h` for the weight `u(|x|)²`:
/// `1/((n-2) I)` with `I = ∫_{r_h}^∞ dr/(u² r^{n-1})`.
///
/// In the variable `s = r^{2-n}` the integral becomes
/// `(n-2)^{-1} ∫_0^{s_h} ds/u²`. The part beyond `r_tail = 10³ r_h` is
/// integrated in closed form after fitting `u ≈ 1 + c s` from two samples.
pub fn radial_capacity_fn(n: usize, r_h: f64, u: impl Fn(f64) -> f64) -> Result<CapacityResult> {
    let dim = Dimension::new(n)?;
    if !(r_h > 0.0) {
        return invalid(format!("inner radius must be positive, got {r_h}"));
    }
    let nm2 = dim.nm2();
    let r_of = |s: f64| s.powf(-1.0 / nm2);
    let integrand = |s: f64| -> f64 {
        let v = u(r_of(s));
        1.0 / (v * v)
    };
    let s_h = r_h.powf(-nm2);
    let r_tail = 1e3 * r_h;
    let s_t = r_tail.powf(-nm2);
    let s_2 = (2.0 * r_tail).powf(-nm2);
    let (u_t, u_2) = (u(r_tail), u(2.0 * r_tail));
    for (r, v) in [(r_h, u(r_h)), (r_tail, u_t), (2.0 * r_tail, u_2)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositiveFactor { value: v, point: vec![r] });
        }
    }
    let (c1, c2) = ((u_t - 1.0) / s_t, (u_2 - 1.0) / s_2);
    let c = (c2 * s_t - c1 * s_2) / (s_t - s_2);
    let tail = s_t / (1.0 + c * s_t);
    let body = integrate(&integrand, s_t, s_h, 0.0, 1e-14);
    if !body.value.is_finite() {
        return Err(Error::NonPositiveFactor { value: 0.0, point: vec![r_h] });
    }
    let total = body.value + tail;
    let integral = total / nm2;
    let energy = dim.omega() / integral;
    let value = energy / dim.capacity_normalisation();

    // potential φ(r) = I(r)/I(r_h), accumulated from the inside out
    let radii = RadialProfile::geometric_mesh(r_h, 1e4 * r_h, 2048)?;
    let mut values = Vec::with_capacity(radii.len());
    let mut acc = total;
    values.push(1.0);
    for w in radii.windows(2) {
        let (sa, sb) = (w[1].powf(-nm2), w[0].powf(-nm2));
        acc -= integrate(&integrand, sa, sb, 0.0, 1e-13).value;
        values.push((acc / total).max(0.0));
    }
    Ok(CapacityResult {
        value,
        energy,
        potential: Potential::Radial(RadialProfile::new(radii, values)?),
        error_estimate: value * (body.error / total).max(f64::EPSILON),
        stats: SolverStats { iterations: body.evaluations, residual: body.error / total, unknowns: 0, cells: 0 },
    })
}

/// [`radial_capacity_fn`] for a factor that is radial about the origin.
pub fn radial_weighted_capacity(u: &ConformalFactor, r_h: f64) -> Result<CapacityResult> {
    let dim = u.dim();
    let n = dim.n();
    if u.monopole_coefficient().is_none() {
        return invalid(format!("a {} factor is not radial about the origin", u.family()));
    }
    radial_capacity_fn(n, r_h, |r| {
        let mut x = vec![0.0; n];
        x[0] = r;
        u.value(&x)
    })
}

/// Numerical parameters of [`grid_capacity`].
#[derive(Debug, Clone, Serialize)]
pub struct GridParams {
    /// Spacing of the uniform core around Ω.
    pub h: f64,
    /// Half-width of the outer cube.
    pub r_out: f64,
    /// Cells grow by `1 + growth·h/core` per cell outside the core.
    pub growth: f64,
    pub outer: OuterCondition,
    pub preconditioner: Preconditioner,
    pub tol: f64,
    /// Also solve at `2h` and at `2h` with `2 R_out` to estimate the error.
    pub estimate_error: bool,
}

impl GridParams {
    pub fn new(h: f64, r_out: f64) -> Self {
        Self {
            h,
            r_out,
            growth: 12.0,
            outer: OuterCondition::Robin,
            preconditioner: Preconditioner::Mic,
            tol: 1e-10,
            estimate_error: true,
        }
    }

    /// Default resolution `circumradius/24` and `R_out = 16·circumradius`.
    pub fn default_for(domain: &DomainSpec) -> Self {
        let rho = domain.circumradius();
        Self::new(rho / 24.0, 16.0 * rho)
    }

    /// The graded grid these parameters describe around `domain`.
    pub fn grid(&self, domain: &DomainSpec) -> Result<Arc<Grid3>> {
        grid_for(domain, self.h, self.r_out, self.growth)
    }
}

fn grid_for(domain: &DomainSpec, h: f64, r_out: f64, growth: f64) -> Result<Arc<Grid3>> {
    if domain.dim() != 3 {
        return invalid("grid capacity needs n = 3");
    }
    if !(h > 0.0) {
        return invalid("grid spacing must be positive");
    }
    let c = domain.center();
    let core = domain.circumradius() + 4.0 * h;
    if r_out <= core + 2.0 * h {
        return invalid(format!("R_out = {r_out} does not enclose the domain with a margin"));
    }
    Ok(Arc::new(Grid3::graded([c[0], c[1], c[2]], core, h, r_out, growth)?))
}

/// Weighted capacity of ∂Ω in three dimensions by the finite-volume grid
/// solver. The capacity is the discrete energy of the solved potential
/// divided by `4π`. With `estimate_error`, the error estimate is
/// `|C_h - C_{2h}| + |C_{2h}(2R_out) - C_{2h}(R_out)|` and the `2h` solution
/// seeds the fine solve.
pub fn grid_capacity(domain: &DomainSpec, weight: &Weight, params: &GridParams) -> Result<CapacityResult> {
    let dim = Dimension::new(3)?;
    let norm = dim.capacity_normalisation();
    let run = |h: f64, r_out: f64, initial: Option<&GridField>| {
        solve_on_grid(
            grid_for(domain, h, r_out, params.growth)?,
            domain,
            weight,
            params.outer,
            params.tol,
            params.preconditioner,
            initial,
        )
    };
    let (field, energy, stats, error_estimate) = if params.estimate_error {
        let (coarse, e_coarse, _) = run(2.0 * params.h, params.r_out, None)?;
        let (_, e_far, _) = run(2.0 * params.h, 2.0 * params.r_out, Some(&coarse))?;
        let (field, energy, stats) = run(params.h, params.r_out, Some(&coarse))?;
        let err = ((energy - e_coarse).abs() + (e_far - e_coarse).abs()) / norm;
        (field, energy, stats, err)
    } else {
        let (field, energy, stats) = run(params.h, params.r_out, None)?;
        (field, energy, stats, f64::NAN)
    };
    Ok(CapacityResult {
        value: energy / norm,
        energy,
        potential: Potential::Grid(field),
        error_estimate,
        stats,
    })
}

/// `E/((n-2) ω)` with `E` the discrete weighted energy of `phi` (Ω cells
/// taken as 1) in the finite-volume form used by [`grid_capacity`].
pub fn capacity_energy(phi: &GridField, weight: &Weight, domain: &DomainSpec, outer: OuterCondition) -> Result<f64> {
    for (cell, (v, t)) in phi.values().iter().zip(phi.mask()).enumerate() {
        if *t == CellTag::Exterior && !(-1e-9..=1.0 + 1e-9).contains(v) {
            return Err(Error::OutOfRange { value: *v, cell });
        }
    }
    let op = Operator::assemble(phi.grid().clone(), domain, weight, outer)?;
    if op.mask() != phi.mask() {
        return invalid("field mask does not match the domain");
    }
    Ok(op.energy(phi.values()) / Dimension::new(3)?.capacity_normalisation())
}

/// Lower bound for the flat energy of a potential from its rearrangement.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetrizedBound {
    /// `energy / 4π`.
    pub value: f64,
    pub energy: f64,
    /// `R = (V/β)^{1/3}` from the cell volume `V` of Ω.
    pub radius: f64,
    pub volume: f64,
    /// Energy of the harmonic continuation beyond the rearranged region.
    pub tail_energy: f64,
    /// The rearranged potential stays above 1/2 at the truncation radius, so
    /// the bound says nothing about the decay at infinity.
    pub non_decaying: bool,
}

/// Builds `φ̃`, rearranges it, restricts to `r ≥ R` and returns a lower
/// bound for the radial energy of `φ*`. Only the superlevel set above
/// `t_c`, the largest value outside the sphere covered by cells of width
/// `h`, enters the radial quadrature: graded cells misplace volume in the
/// sorted order. Below `t_c` the bound uses the capacity of the ball holding
/// `{φ* > t_c}`, which is the least energy of any extension.
pub fn symmetrized_lower_bound(phi: &GridField, domain: &DomainSpec) -> Result<SymmetrizedBound> {
    let dim = Dimension::new(3)?;
    if domain.dim() != 3 {
        return invalid("symmetrized bound needs n = 3");
    }
    let ext = symmetrize::extend_into_omega(phi, symmetrize::DEFAULT_BOUNDARY_TOL)?;
    let c = domain.center();
    let c = [c[0], c[1], c[2]];
    let grid = ext.grid().clone();
    let ext = ext.truncate_outside(&c, grid.inner_half_width(&c));
    let core = grid.uniform_half_width(&c);
    let cutoff = (0..ext.len())
        .filter(|&i| {
            let x = grid.center(i);
            ext.mask()[i] != CellTag::OuterGhost && (0..3).map(|a| (x[a] - c[a]).powi(2)).sum::<f64>() > core * core
        })
        .map(|i| ext.values()[i])
        .fold(0.0, f64::max);
    let volume = symmetrize::exact_sum(
        ext.mask().iter().enumerate().filter(|(_, t)| **t == CellTag::Interior).map(|(i, _)| grid.cell_volume(i)),
    );
    if volume == 0.0 {
        return Err(Error::Precondition("no grid cell centre lies inside the domain".into()));
    }
    let result = symmetrize::rearrange(&ext, Some((0.0, 1.0)))?;
    let star = symmetrize::restrict_star_above(&result, volume, cutoff)?;
    let body = star.dirichlet_energy(&dim);
    let tail_energy = star.monopole_tail_energy(&dim);
    let energy = body + tail_energy;
    Ok(SymmetrizedBound {
        value: energy / dim.capacity_normalisation(),
        energy,
        radius: star.r_min(),
        volume,
        tail_energy,
        non_decaying: outer_layer_max(phi) > 0.5,
    })
}

fn outer_layer_max(phi: &GridField) -> f64 {
    let grid = phi.grid();
    let dims = grid.dims();
    (0..phi.len())
        .filter(|&i| {
            let ijk = grid.ijk(i);
            (0..3).any(|a| ijk[a] == 0 || ijk[a] + 1 == dims[a]) && phi.mask()[i] == CellTag::Exterior
        })
        .map(|i| phi.values()[i])
        .fold(f64::NEG_INFINITY, f64::max)
}
