use super::Dimension;
use crate::error::{invalid, Result};
use crate::fields::Grid3;
use std::sync::Arc;

/// A point charge of a multipole conformal factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Pole {
    pub center: Vec<f64>,
    pub charge: f64,
}

impl Pole {
    pub fn new(center: Vec<f64>, charge: f64) -> Self {
        Self { center, charge }
    }
}

/// Positive conformal factor `u` of a metric `u^{4/(n-2)} δ` on an exterior
/// domain, normalised so that `u → 1` at infinity.
#[derive(Debug, Clone)]
pub enum ConformalFactor {
    /// `1 + m/(2|x|^{n-2})`.
    Schwarzschild { dim: Dimension, mass: f64 },
    /// `1 + Σ c_i |x - p_i|^{2-n}`; the empty list is the flat factor.
    Multipole { dim: Dimension, poles: Vec<Pole> },
    /// Values on a uniform three-dimensional grid.
    Sampled(Arc<SampledFactor>),
}

impl ConformalFactor {
    pub fn schwarzschild(n: usize, mass: f64) -> Result<Self> {
        let dim = Dimension::new(n)?;
        if !(mass > 0.0) || !mass.is_finite() {
            return invalid(format!("Schwarzschild mass must be positive, got {mass}"));
        }
        Ok(Self::Schwarzschild { dim, mass })
    }

    pub fn multipole(n: usize, poles: Vec<Pole>) -> Result<Self> {
        let dim = Dimension::new(n)?;
        for (i, pole) in poles.iter().enumerate() {
            if pole.center.len() != n {
                return invalid(format!(
                    "pole {i} has {} coordinates, expected {n}",
                    pole.center.len()
                ));
            }
            if !(pole.charge > 0.0) || !pole.charge.is_finite() {
                return invalid(format!("pole {i} charge must be positive, got {}", pole.charge));
            }
        }
        Ok(Self::Multipole { dim, poles })
    }

    /// `u ≡ 1`.
    pub fn flat(n: usize) -> Result<Self> {
        Self::multipole(n, Vec::new())
    }

    /// Samples `f` at the cell centres of a uniform grid.
    pub fn sampled_from_fn(grid: Grid3, f: impl Fn(&[f64; 3]) -> f64) -> Self {
        Self::Sampled(Arc::new(SampledFactor::from_fn(grid, f)))
    }

    pub fn dim(&self) -> Dimension {
        match self {
            Self::Schwarzschild { dim, .. } | Self::Multipole { dim, .. } => *dim,
            Self::Sampled(_) => Dimension::new(3).expect("n = 3 is valid"),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::Schwarzschild { .. } => "schwarzschild",
            Self::Multipole { poles, .. } if poles.is_empty() => "flat",
            Self::Multipole { .. } => "multipole",
            Self::Sampled(_) => "sampled",
        }
    }

    /// Closed-form families carry exact derivatives.
    pub fn is_analytic(&self) -> bool {
        !matches!(self, Self::Sampled(_))
    }

    /// If `u = 1 + c |x|^{2-n}` exactly, returns `c`.
    pub fn monopole_coefficient(&self) -> Option<f64> {
        match self {
            Self::Schwarzschild { mass, .. } => Some(0.5 * mass),
            Self::Multipole { poles, .. } => poles
                .iter()
                .all(|p| p.center.iter().all(|&c| c == 0.0))
                .then(|| poles.iter().map(|p| p.charge).sum()),
            Self::Sampled(_) => None,
        }
    }

    /// Sum of the charges, i.e. the coefficient of the leading `|x|^{2-n}`
    /// term at infinity.
    pub fn total_charge(&self) -> f64 {
        match self {
            Self::Schwarzschild { mass, .. } => 0.5 * mass,
            Self::Multipole { poles, .. } => poles.iter().map(|p| p.charge).sum(),
            Self::Sampled(s) => s.far_coefficient,
        }
    }

    /// Radius outside of which the factor is smooth.
    pub fn singular_radius(&self) -> f64 {
        match self {
            Self::Schwarzschild { .. } | Self::Sampled(_) => 0.0,
            Self::Multipole { poles, .. } => poles
                .iter()
                .map(|p| p.center.iter().map(|c| c * c).sum::<f64>().sqrt())
                .fold(0.0, f64::max),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Schwarzschild { dim, mass } => 1.0 + 0.5 * mass * radial_power(dim, x, None),
            Self::Multipole { dim, poles } => {
                1.0 + poles
                    .iter()
                    .map(|p| p.charge * radial_power(dim, x, Some(&p.center)))
                    .sum::<f64>()
            }
            Self::Sampled(s) => s.value(as3(x)),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Schwarzschild { dim, mass } => {
                let mut g = vec![0.0; dim.n()];
                add_monopole_gradient(dim, x, None, 0.5 * mass, &mut g);
                g
            }
            Self::Multipole { dim, poles } => {
                let mut g = vec![0.0; dim.n()];
                for p in poles {
                    add_monopole_gradient(dim, x, Some(&p.center), p.charge, &mut g);
                }
                g
            }
            Self::Sampled(s) => s.gradient(as3(x)).to_vec(),
        }
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        match self {
            Self::Schwarzschild { dim, mass } => 0.5 * mass * monopole_laplacian(dim, x, None),
            Self::Multipole { dim, poles } => poles
                .iter()
                .map(|p| p.charge * monopole_laplacian(dim, x, Some(&p.center)))
                .sum(),
            Self::Sampled(s) => s.laplacian(as3(x)),
        }
    }
}

fn as3(x: &[f64]) -> &[f64; 3] {
    x.try_into().expect("sampled conformal factors are three-dimensional")
}

fn distance(x: &[f64], center: Option<&[f64]>) -> f64 {
    match center {
        None => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        Some(c) => x
            .iter()
            .zip(c)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
    }
}

fn radial_power(dim: &Dimension, x: &[f64], center: Option<&Vec<f64>>) -> f64 {
    distance(x, center.map(|c| c.as_slice())).powf(-dim.nm2())
}

fn add_monopole_gradient(
    dim: &Dimension,
    x: &[f64],
    center: Option<&Vec<f64>>,
    charge: f64,
    out: &mut [f64],
) {
    let r = distance(x, center.map(|c| c.as_slice()));
    // d/dr (c r^{2-n}) = (2-n) c r^{1-n}, times (x - p)/r
    let scale = -dim.nm2() * charge * r.powf(-(dim.n() as f64));
    for (i, o) in out.iter_mut().enumerate() {
        let offset = center.map_or(0.0, |c| c[i]);
        *o += scale * (x[i] - offset);
    }
}

/// `f'' + (n-1)/r f'` for `f = r^{2-n}`.
fn monopole_laplacian(dim: &Dimension, x: &[f64], center: Option<&Vec<f64>>) -> f64 {
    let n = dim.n() as f64;
    let r = distance(x, center.map(|c| c.as_slice()));
    let d1 = (2.0 - n) * r.powf(1.0 - n);
    let d2 = (2.0 - n) * (1.0 - n) * r.powf(-n);
    d2 + (n - 1.0) / r * d1
}

/// Conformal factor sampled at the cell centres of a uniform grid.
///
/// Values, central-difference gradients and seven-point Laplacians are stored
/// per node and trilinearly interpolated. Outside the sampled box the factor
/// continues as the monopole `1 + c/|x|` with `c` the mean of `(u - 1)|x|`
/// over the outermost layer of nodes.
#[derive(Debug)]
pub struct SampledFactor {
    grid: Grid3,
    values: Vec<f64>,
    gradient: Vec<[f64; 3]>,
    laplacian: Vec<f64>,
    far_coefficient: f64,
}

impl SampledFactor {
    pub fn from_fn(grid: Grid3, f: impl Fn(&[f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.center(i))).collect();
        Self::from_values(grid, values)
    }

    pub fn from_values(grid: Grid3, values: Vec<f64>) -> Self {
        assert_eq!(grid.len(), values.len());
        let h = grid.spacing();
        assert!(grid.is_uniform(), "sampled factors need a uniform grid");
        let dims = grid.dims();
        assert!(dims.iter().all(|&d| d >= 3), "need at least three nodes per axis");
        let mut gradient = vec![[0.0; 3]; values.len()];
        let mut laplacian = vec![0.0; values.len()];
        let clamp = |i: usize, d: usize| i.clamp(1, d - 2);
        for idx in 0..values.len() {
            let ijk = grid.ijk(idx);
            // boundary nodes reuse the stencil of their nearest interior node
            let c = [clamp(ijk[0], dims[0]), clamp(ijk[1], dims[1]), clamp(ijk[2], dims[2])];
            let center = values[grid.index(c)];
            let mut lap = 0.0;
            for axis in 0..3 {
                let mut lo = c;
                let mut hi = c;
                lo[axis] -= 1;
                hi[axis] += 1;
                let (fl, fh) = (values[grid.index(lo)], values[grid.index(hi)]);
                gradient[idx][axis] = (fh - fl) / (2.0 * h);
                lap += (fh - 2.0 * center + fl) / (h * h);
            }
            laplacian[idx] = lap;
        }
        let mut acc = 0.0;
        let mut count = 0usize;
        for idx in 0..values.len() {
            let ijk = grid.ijk(idx);
            if (0..3).any(|a| ijk[a] == 0 || ijk[a] == dims[a] - 1) {
                let x = grid.center(idx);
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                acc += (values[idx] - 1.0) * r;
                count += 1;
            }
        }
        Self {
            grid,
            values,
            gradient,
            laplacian,
            far_coefficient: acc / count as f64,
        }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn far_coefficient(&self) -> f64 {
        self.far_coefficient
    }

    fn interpolate<T: Copy>(
        &self,
        x: &[f64; 3],
        data: &[T],
        zero: T,
        accumulate: impl Fn(&mut T, T, f64),
    ) -> Option<T> {
        let mut loc = [(0usize, 0.0f64); 3];
        for a in 0..3 {
            loc[a] = self.grid.axis(a).locate_center(x[a])?;
        }
        let mut out = zero;
        for corner in 0..8usize {
            let mut ijk = [0usize; 3];
            let mut w = 1.0;
            for a in 0..3 {
                let bit = (corner >> a) & 1;
                ijk[a] = loc[a].0 + bit;
                w *= if bit == 1 { loc[a].1 } else { 1.0 - loc[a].1 };
            }
            accumulate(&mut out, data[self.grid.index(ijk)], w);
        }
        Some(out)
    }

    pub fn value(&self, x: &[f64; 3]) -> f64 {
        self.interpolate(x, &self.values, 0.0, |acc, v, w| *acc += w * v)
            .unwrap_or_else(|| 1.0 + self.far_coefficient / norm3(x))
    }

    pub fn gradient(&self, x: &[f64; 3]) -> [f64; 3] {
        self.interpolate(x, &self.gradient, [0.0; 3], |acc, v, w| {
            for a in 0..3 {
                acc[a] += w * v[a];
            }
        })
        .unwrap_or_else(|| {
            let r = norm3(x);
            let s = -self.far_coefficient / (r * r * r);
            [s * x[0], s * x[1], s * x[2]]
        })
    }

    pub fn laplacian(&self, x: &[f64; 3]) -> f64 {
        self.interpolate(x, &self.laplacian, 0.0, |acc, v, w| *acc += w * v)
            .unwrap_or(0.0)
    }
}

fn norm3(x: &[f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}
