//! Dimensional constants, the Schwarzschild family and the conformal
//! transformation laws for metrics `g = u^{4/(n-2)} δ`.

mod factor;
mod validate;

pub use factor::{ConformalFactor, Pole, SampledFactor};
pub use validate::{
    check_mean_convex, check_superharmonic, check_u_ge_one, exterior_samples, minimality_residual, BoundaryResidual,
    HypothesisCheck, SUPERHARMONIC_SAFETY,
};

use crate::error::{invalid, Error, Result};
use serde::Serialize;
use std::f64::consts::PI;

/// `Γ(k/2)` for a positive integer `k`, by the recurrence `Γ(x + 1) = x Γ(x)`
/// from `Γ(1/2) = √π` and `Γ(1) = 1`.
pub fn half_integer_gamma(k: usize) -> f64 {
    assert!(k >= 1, "Γ(k/2) requires k >= 1");
    let (mut value, mut twice_x) = if k % 2 == 0 { (1.0, 2) } else { (PI.sqrt(), 1) };
    while twice_x < k {
        value *= twice_x as f64 / 2.0;
        twice_x += 2;
    }
    value
}

/// `π^{n/2}` without going through `powf`.
fn pi_half_power(n: usize) -> f64 {
    let base = PI.powi((n / 2) as i32);
    if n % 2 == 1 {
        base * PI.sqrt()
    } else {
        base
    }
}

/// Area ω_{n-1} of the unit (n-1)-sphere in ℝⁿ.
pub fn sphere_area(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Dimension(n));
    }
    Ok(2.0 * pi_half_power(n) / half_integer_gamma(n))
}

/// Volume β_n of the unit n-ball.
pub fn ball_volume(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Dimension(n));
    }
    Ok(pi_half_power(n) / half_integer_gamma(n + 2))
}

/// Ambient dimension together with its sphere and ball constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dimension {
    n: usize,
    omega: f64,
    beta: f64,
}

impl Dimension {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self {
            n,
            omega: sphere_area(n)?,
            beta: ball_volume(n)?,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Area of the unit (n-1)-sphere.
    #[inline]
    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Volume of the unit n-ball.
    #[inline]
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `n - 2` as a float; appears in every exponent below.
    #[inline]
    pub fn nm2(&self) -> f64 {
        (self.n - 2) as f64
    }

    /// Radius of the ball of volume `volume`.
    pub fn ball_radius(&self, volume: f64) -> f64 {
        (volume / self.beta).powf(1.0 / self.n as f64)
    }

    /// Normalisation `(n-2) ω_{n-1}` converting Dirichlet energy into capacity.
    pub fn capacity_normalisation(&self) -> f64 {
        self.nm2() * self.omega
    }
}

/// Scalar curvature of `g = u^{4/(n-2)} δ` at `x`:
/// `R_g = 4(n-1)/(n-2) · u^{-(n+2)/(n-2)} · (-Δ₀u)`.
pub fn scalar_curvature(u: &ConformalFactor, x: &[f64]) -> Result<f64> {
    let dim = u.dim();
    let value = u.value(x);
    if value <= 0.0 {
        return Err(Error::NonPositiveFactor {
            value,
            point: x.to_vec(),
        });
    }
    let n = dim.n() as f64;
    let prefactor = 4.0 * (n - 1.0) / (n - 2.0);
    Ok(prefactor * value.powf(-(n + 2.0) / (n - 2.0)) * (-u.laplacian(x)))
}

/// Mean curvature of a boundary point in `g`, given the Euclidean mean
/// curvature `h0` (average of principal curvatures) with respect to the
/// outward normal `nu` of Ω:
/// `h_g = 2/(n-2) · u^{-n/(n-2)} · (∂_ν u + (n-2)/2 · h0 · u)`.
pub fn mean_curvature_conformal(
    u: &ConformalFactor,
    x: &[f64],
    nu: &[f64],
    h0: f64,
) -> Result<f64> {
    let dim = u.dim();
    let value = u.value(x);
    if value <= 0.0 {
        return Err(Error::NonPositiveFactor {
            value,
            point: x.to_vec(),
        });
    }
    let norm = nu.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return invalid(format!("normal must be a unit vector, |nu| = {norm}"));
    }
    let n = dim.n() as f64;
    let residual = minimality_integrand(u, x, nu, h0);
    Ok(2.0 / (n - 2.0) * value.powf(-n / (n - 2.0)) * residual)
}

/// `∂_ν u + (n-2)/2 · h0 · u`, which vanishes exactly when the boundary is
/// minimal in `g`.
pub(crate) fn minimality_integrand(u: &ConformalFactor, x: &[f64], nu: &[f64], h0: f64) -> f64 {
    let grad = u.gradient(x);
    let dnu: f64 = grad.iter().zip(nu).map(|(g, v)| g * v).sum();
    dnu + 0.5 * u.dim().nm2() * h0 * u.value(x)
}

/// `(V/β_n)^{(n-2)/n}`, the volumetric lower bound for the mass.
pub fn rhs_volumetric(dim: &Dimension, volume: f64) -> Result<f64> {
    if !(volume > 0.0) {
        return invalid(format!("volume must be positive, got {volume}"));
    }
    Ok((volume / dim.beta()).powf(dim.nm2() / dim.n() as f64))
}

/// `½ (A/ω_{n-1})^{(n-2)/(n-1)}`, the Penrose bound for a horizon of area `A`.
pub fn rhs_rpi(dim: &Dimension, area: f64) -> Result<f64> {
    if !(area > 0.0) {
        return invalid(format!("area must be positive, got {area}"));
    }
    let n = dim.n() as f64;
    Ok(0.5 * (area / dim.omega()).powf((n - 2.0) / (n - 1.0)))
}

/// The conformal factor `1 + m/(2|x|^{n-2})`.
pub fn schwarzschild_factor(n: usize, mass: f64) -> Result<ConformalFactor> {
    ConformalFactor::schwarzschild(n, mass)
}

/// Closed-form quantities of a Schwarzschild manifold cut at its horizon.
#[derive(Debug, Clone, Serialize)]
pub struct SchwarzschildData {
    pub n: usize,
    pub m: f64,
    /// Coordinate radius of the horizon, `(m/2)^{1/(n-2)}`.
    pub r_h: f64,
    /// Area of the horizon measured in `g`.
    pub horizon_area: f64,
    /// Euclidean volume of the excised ball.
    pub volume: f64,
    pub rhs_rpi: f64,
    pub rhs_vol: f64,
    /// Flat capacity of the excised ball, `r_h^{n-2}`.
    pub flat_capacity: f64,
}

impl SchwarzschildData {
    pub fn new(n: usize, m: f64) -> Result<Self> {
        let dim = Dimension::new(n)?;
        if !(m > 0.0) {
            return invalid(format!("mass must be positive, got {m}"));
        }
        let r_h = horizon_radius(n, m);
        let u_h: f64 = 2.0;
        let area = dim.omega()
            * r_h.powi(n as i32 - 1)
            * u_h.powf(2.0 * (n as f64 - 1.0) / dim.nm2());
        let volume = dim.beta() * r_h.powi(n as i32);
        Ok(Self {
            n,
            m,
            r_h,
            horizon_area: area,
            volume,
            rhs_rpi: rhs_rpi(&dim, area)?,
            rhs_vol: rhs_volumetric(&dim, volume)?,
            flat_capacity: r_h.powi(n as i32 - 2),
        })
    }
}

/// `(m/2)^{1/(n-2)}`.
pub fn horizon_radius(n: usize, m: f64) -> f64 {
    (0.5 * m).powf(1.0 / (n as f64 - 2.0))
}
