use super::{Grid3, GridField};
use crate::error::{invalid, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;

type LevelFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Region `{φ < 0}` of a user-supplied level-set function.
#[derive(Clone)]
pub struct LevelSetDomain {
    dim: usize,
    func: Arc<LevelFn>,
    center: Vec<f64>,
    bound: f64,
}

impl LevelSetDomain {
    /// `bound` must be a radius about `center` enclosing the whole region.
    pub fn new(
        center: Vec<f64>,
        bound: f64,
        func: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(bound > 0.0) {
            return invalid("level-set bound must be positive");
        }
        Ok(Self {
            dim: center.len(),
            func: Arc::new(func),
            center,
            bound,
        })
    }
}

impl fmt::Debug for LevelSetDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevelSetDomain")
            .field("dim", &self.dim)
            .field("center", &self.center)
            .field("bound", &self.bound)
            .finish_non_exhaustive()
    }
}

/// The excised region Ω.
#[derive(Debug, Clone)]
pub enum DomainSpec {
    Ball { center: Vec<f64>, radius: f64 },
    /// Axis-aligned ellipsoid.
    Ellipsoid { center: Vec<f64>, semi_axes: Vec<f64> },
    UnionOfBalls(Vec<(Vec<f64>, f64)>),
    LevelSet(LevelSetDomain),
}

/// A point on ∂Ω with its outward normal and Euclidean mean curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySample {
    pub point: Vec<f64>,
    /// Grid axis along which the crossing was found; `None` for samples not
    /// taken from a grid.
    pub axis: Option<usize>,
    pub normal: Vec<f64>,
    /// Average of the principal curvatures.
    pub h0: f64,
}

impl DomainSpec {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return invalid(format!("ball radius must be positive, got {radius}"));
        }
        Ok(Self::Ball { center, radius })
    }

    pub fn ellipsoid(center: Vec<f64>, semi_axes: Vec<f64>) -> Result<Self> {
        if center.len() != semi_axes.len() {
            return invalid("ellipsoid centre and semi-axes differ in length");
        }
        if semi_axes.iter().any(|&a| !(a > 0.0)) {
            return invalid("ellipsoid semi-axes must be positive");
        }
        Ok(Self::Ellipsoid { center, semi_axes })
    }

    pub fn union_of_balls(balls: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if balls.is_empty() {
            return invalid("union of balls needs at least one ball");
        }
        let n = balls[0].0.len();
        for (c, r) in &balls {
            if c.len() != n {
                return invalid("union of balls mixes dimensions");
            }
            if !(*r > 0.0) {
                return invalid(format!("ball radius must be positive, got {r}"));
            }
        }
        Ok(Self::UnionOfBalls(balls))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Ball { center, .. } | Self::Ellipsoid { center, .. } => center.len(),
            Self::UnionOfBalls(b) => b[0].0.len(),
            Self::LevelSet(l) => l.dim,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Ball { .. } => "ball",
            Self::Ellipsoid { .. } => "ellipsoid",
            Self::UnionOfBalls(_) => "union",
            Self::LevelSet(_) => "level_set",
        }
    }

    /// Negative inside Ω, positive outside. Signed distance for balls and
    /// their unions.
    pub fn level(&self, x: &[f64]) -> f64 {
        match self {
            Self::Ball { center, radius } => dist(x, center) - radius,
            Self::Ellipsoid { center, semi_axes } => {
                x.iter()
                    .zip(center)
                    .zip(semi_axes)
                    .map(|((xi, ci), ai)| ((xi - ci) / ai).powi(2))
                    .sum::<f64>()
                    - 1.0
            }
            Self::UnionOfBalls(balls) => balls
                .iter()
                .map(|(c, r)| dist(x, c) - r)
                .fold(f64::INFINITY, f64::min),
            Self::LevelSet(l) => (l.func)(x),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.level(x) < 0.0
    }

    /// Reference centre used for grids and radial quantities.
    pub fn center(&self) -> Vec<f64> {
        match self {
            Self::Ball { center, .. } | Self::Ellipsoid { center, .. } => center.clone(),
            Self::UnionOfBalls(balls) => {
                let n = balls[0].0.len();
                (0..n)
                    .map(|a| {
                        let lo = balls.iter().map(|(c, r)| c[a] - r).fold(f64::INFINITY, f64::min);
                        let hi = balls.iter().map(|(c, r)| c[a] + r).fold(f64::NEG_INFINITY, f64::max);
                        0.5 * (lo + hi)
                    })
                    .collect()
            }
            Self::LevelSet(l) => l.center.clone(),
        }
    }

    /// Radius about [`center`](Self::center) enclosing Ω.
    pub fn circumradius(&self) -> f64 {
        match self {
            Self::Ball { radius, .. } => *radius,
            Self::Ellipsoid { semi_axes, .. } => semi_axes.iter().cloned().fold(0.0, f64::max),
            Self::UnionOfBalls(balls) => {
                let c = self.center();
                balls.iter().map(|(p, r)| dist(p, &c) + r).fold(0.0, f64::max)
            }
            Self::LevelSet(l) => l.bound,
        }
    }

    /// Closed-form Euclidean volume where one exists.
    pub fn analytic_volume(&self) -> Option<f64> {
        let beta = crate::geom::ball_volume(self.dim()).ok()?;
        match self {
            Self::Ball { radius, .. } => Some(beta * radius.powi(self.dim() as i32)),
            Self::Ellipsoid { semi_axes, .. } => Some(beta * semi_axes.iter().product::<f64>()),
            Self::UnionOfBalls(balls) => self
                .balls_disjoint()
                .then(|| balls.iter().map(|(_, r)| beta * r.powi(self.dim() as i32)).sum()),
            Self::LevelSet(_) => None,
        }
    }

    fn balls_disjoint(&self) -> bool {
        match self {
            Self::UnionOfBalls(balls) => balls.iter().enumerate().all(|(i, (ci, ri))| {
                balls[i + 1..].iter().all(|(cj, rj)| dist(ci, cj) > ri + rj)
            }),
            _ => true,
        }
    }

    /// Whether ∂Ω is smooth; unions of overlapping balls have creases.
    pub fn is_smooth(&self) -> bool {
        self.balls_disjoint()
    }

    /// Whether Ω is a ball centred at the origin.
    pub fn is_origin_ball(&self) -> bool {
        matches!(self, Self::Ball { center, .. } if center.iter().all(|&c| c == 0.0))
    }

    /// Outward unit normal and mean curvature (average of principal
    /// curvatures) at a boundary point. Level-set domains use central
    /// differences of step `h`.
    pub fn surface_geometry(&self, x: &[f64], h: f64) -> Result<(Vec<f64>, f64)> {
        let n = x.len();
        match self {
            Self::Ball { center, radius } => sphere_geometry(x, center, *radius),
            Self::UnionOfBalls(balls) => {
                let (c, r) = balls
                    .iter()
                    .min_by(|a, b| {
                        let la = (dist(x, &a.0) - a.1).abs();
                        let lb = (dist(x, &b.0) - b.1).abs();
                        la.total_cmp(&lb)
                    })
                    .expect("non-empty union");
                sphere_geometry(x, c, *r)
            }
            Self::Ellipsoid { center, semi_axes } => {
                let grad: Vec<f64> = (0..n)
                    .map(|i| 2.0 * (x[i] - center[i]) / semi_axes[i].powi(2))
                    .collect();
                let mut hess = vec![0.0; n * n];
                for i in 0..n {
                    hess[i * n + i] = 2.0 / semi_axes[i].powi(2);
                }
                level_set_geometry(x, &grad, &hess)
            }
            Self::LevelSet(l) => {
                let f = |p: &[f64]| (l.func)(p);
                let (grad, hess) = finite_difference_derivatives(&f, x, h);
                level_set_geometry(x, &grad, &hess)
            }
        }
    }

    /// Points of ∂Ω with normals and mean curvatures.
    ///
    /// In three dimensions the boundary is located by linear interpolation
    /// of the level function along the edges of a uniform grid of spacing
    /// `h`. Other dimensions only support balls, sampled along the
    /// coordinate axes and 64 fixed pseudo-random directions.
    pub fn boundary_samples(&self, h: f64) -> Result<Vec<BoundarySample>> {
        if !(h > 0.0) {
            return invalid("resolution must be positive");
        }
        let n = self.dim();
        if n == 3 {
            return self.grid_boundary_samples(h);
        }
        let Self::Ball { center, radius } = self else {
            return invalid(format!("only balls are supported in dimension {n}"));
        };
        let mut dirs = Vec::new();
        for a in 0..n {
            for s in [1.0, -1.0] {
                let mut d = vec![0.0; n];
                d[a] = s;
                dirs.push(d);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        while dirs.len() < 2 * n + 64 {
            let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.1 && norm <= 1.0 {
                dirs.push(d.iter().map(|v| v / norm).collect());
            }
        }
        dirs.into_iter()
            .map(|d| {
                let point: Vec<f64> = center.iter().zip(&d).map(|(c, v)| c + radius * v).collect();
                let (normal, h0) = self.surface_geometry(&point, h)?;
                Ok(BoundarySample { point, axis: None, normal, h0 })
            })
            .collect()
    }

    fn grid_boundary_samples(&self, h: f64) -> Result<Vec<BoundarySample>> {
        let c = self.center();
        let grid = Arc::new(Grid3::uniform([c[0], c[1], c[2]], self.circumradius() + 2.0 * h, h));
        let field = GridField::from_fn(grid.clone(), |x| self.level(x));
        let levels = field.values();
        let dims = grid.dims();
        let mut out = Vec::new();
        for idx in 0..grid.len() {
            let ijk = grid.ijk(idx);
            for axis in 0..3 {
                if ijk[axis] + 1 >= dims[axis] {
                    continue;
                }
                let next = idx + grid.stride(axis);
                let (l0, l1) = (levels[idx], levels[next]);
                if (l0 < 0.0) == (l1 < 0.0) {
                    continue;
                }
                let t = l0 / (l0 - l1);
                let (x0, x1) = (grid.center(idx), grid.center(next));
                let point: Vec<f64> = (0..3).map(|a| x0[a] + t * (x1[a] - x0[a])).collect();
                let (normal, h0) = self.surface_geometry(&point, h)?;
                out.push(BoundarySample { point, axis: Some(axis), normal, h0 });
            }
        }
        Ok(out)
    }
}

fn dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn sphere_geometry(x: &[f64], center: &[f64], radius: f64) -> Result<(Vec<f64>, f64)> {
    let r = dist(x, center);
    if r < 1e-12 * radius {
        return Err(Error::DegenerateLevelSet { point: x.to_vec(), norm: r });
    }
    let normal = x.iter().zip(center).map(|(a, b)| (a - b) / r).collect();
    Ok((normal, 1.0 / radius))
}

/// Normal `∇φ/|∇φ|` and `h0 = div(∇φ/|∇φ|)/(n-1)` from the gradient and
/// row-major Hessian of a level function.
pub(crate) fn level_set_geometry(x: &[f64], grad: &[f64], hess: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = grad.len();
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if !(norm > 1e-10) {
        return Err(Error::DegenerateLevelSet { point: x.to_vec(), norm });
    }
    let trace: f64 = (0..n).map(|i| hess[i * n + i]).sum();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += grad[i] * hess[i * n + j] * grad[j];
        }
    }
    let div = trace / norm - quad / (norm * norm * norm);
    let normal = grad.iter().map(|g| g / norm).collect();
    Ok((normal, div / (n as f64 - 1.0)))
}

fn finite_difference_derivatives(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let f0 = f(x);
    let shifted = |moves: &[(usize, f64)]| {
        let mut p = x.to_vec();
        for &(a, s) in moves {
            p[a] += s * h;
        }
        f(&p)
    };
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    for i in 0..n {
        let fp = shifted(&[(i, 1.0)]);
        let fm = shifted(&[(i, -1.0)]);
        grad[i] = (fp - fm) / (2.0 * h);
        hess[i * n + i] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in i + 1..n {
            let v = (shifted(&[(i, 1.0), (j, 1.0)]) - shifted(&[(i, 1.0), (j, -1.0)])
                - shifted(&[(i, -1.0), (j, 1.0)])
                + shifted(&[(i, -1.0), (j, -1.0)]))
                / (4.0 * h * h);
            hess[i * n + j] = v;
            hess[j * n + i] = v;
        }
    }
    (grad, hess)
}
