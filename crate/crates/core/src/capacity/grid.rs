//! Finite-volume solver for `div(w ∇φ) = 0` outside Ω in three dimensions.
//!
//! Cells are those of a rectilinear [`Grid3`]. Neighbouring exterior cells
//! are coupled by two-point fluxes `w A / d`. A link from an exterior cell
//! into Ω ends at the boundary crossing, located on the segment between the
//! two centres, where `φ = 1`. On the faces of the outer cube either a Robin
//! condition matching the decay `r^{2-n}` or `φ = 0` is imposed. The
//! discrete system is the minimiser of the discrete energy
//!
//! ```text
//! E(φ) = Σ_links k (φ_i - φ_j)² + Σ_Ω-links k (φ_i - 1)² + Σ_outer β φ_i²
//! ```
//!
//! which is symmetric, positive definite and an M-matrix.

use super::Weight;
use crate::error::{Error, Result};
use crate::fields::{domain_mask, CellTag, DomainSpec, Grid3, GridField};
use serde::Serialize;
use std::sync::Arc;

/// Condition imposed on the faces of the outer cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterCondition {
    /// `∂_ν φ + (n-2)(x·ν)/|x|² φ = 0`, exact for `φ ∝ |x|^{2-n}`.
    Robin,
    /// `φ = 0`.
    Dirichlet,
}

/// Preconditioner for conjugate gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    /// Modified incomplete Cholesky with zero fill.
    Mic,
    Jacobi,
}

/// Smallest fraction of a centre-to-centre distance at which a boundary
/// crossing is placed.
const MIN_CUT_FRACTION: f64 = 1e-2;

/// Assembled discrete operator.
#[derive(Debug, Clone)]
pub struct Operator {
    grid: Arc<Grid3>,
    mask: Vec<CellTag>,
    /// Coupling of a cell with its successor along each axis.
    links: [Vec<f64>; 3],
    diag: Vec<f64>,
    /// Total conductance of the links into Ω; also the right-hand side.
    omega: Vec<f64>,
    outer: Vec<f64>,
}

impl Operator {
    pub fn assemble(
        grid: Arc<Grid3>,
        domain: &DomainSpec,
        weight: &Weight,
        outer_condition: OuterCondition,
    ) -> Result<Self> {
        if domain.dim() != 3 {
            return Err(Error::InvalidArgument("grid capacity needs n = 3".into()));
        }
        let mask = domain_mask(&grid, domain);
        Self::assemble_with_mask(grid, mask, domain, weight, outer_condition)
    }

    fn assemble_with_mask(
        grid: Arc<Grid3>,
        mask: Vec<CellTag>,
        domain: &DomainSpec,
        weight: &Weight,
        outer_condition: OuterCondition,
    ) -> Result<Self> {
        let len = grid.len();
        let dims = grid.dims();
        let center = domain.center();
        let center = [center[0], center[1], center[2]];
        let mut links = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        let mut diag = vec![0.0; len];
        let mut omega = vec![0.0; len];
        let mut outer = vec![0.0; len];
        let w_at = |x: &[f64; 3]| -> Result<f64> {
            let w = weight.at(x);
            if !(w > 0.0) {
                return Err(Error::NegativeWeight { value: w, point: x.to_vec() });
            }
            Ok(w)
        };
        for idx in 0..len {
            let ijk = grid.ijk(idx);
            let x = grid.center(idx);
            let widths = grid.widths(idx);
            let inside = mask[idx] == CellTag::Interior;
            for a in 0..3 {
                let area = widths[(a + 1) % 3] * widths[(a + 2) % 3];
                let edge_face = |lo: bool| {
                    let mut xf = x;
                    xf[a] += if lo { -0.5 } else { 0.5 } * widths[a];
                    xf
                };
                if !inside && (ijk[a] == 0 || ijk[a] + 1 == dims[a]) {
                    for lo in [true, false] {
                        if (lo && ijk[a] != 0) || (!lo && ijk[a] + 1 != dims[a]) {
                            continue;
                        }
                        let xf = edge_face(lo);
                        let half = 0.5 * widths[a];
                        let w = w_at(&xf)?;
                        let beta = match outer_condition {
                            OuterCondition::Dirichlet => w * area / half,
                            OuterCondition::Robin => {
                                let rel: [f64; 3] = [xf[0] - center[0], xf[1] - center[1], xf[2] - center[2]];
                                let r2 = rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2];
                                let kappa = (if lo { -rel[a] } else { rel[a] }) / r2;
                                w * area * kappa / (1.0 + kappa * half)
                            }
                        };
                        diag[idx] += beta;
                        outer[idx] += beta;
                    }
                }
                if ijk[a] + 1 == dims[a] {
                    continue;
                }
                let next = idx + grid.stride(a);
                let next_inside = mask[next] == CellTag::Interior;
                if inside && next_inside {
                    continue;
                }
                let xn = grid.center(next);
                let d = xn[a] - x[a];
                if !inside && !next_inside {
                    let k = w_at(&edge_face(false))? * area / d;
                    links[a][idx] = k;
                    diag[idx] += k;
                    diag[next] += k;
                } else {
                    let (ext, xe, xi) = if inside { (next, xn, x) } else { (idx, x, xn) };
                    let theta = cut_fraction(domain, &xe, &xi).max(MIN_CUT_FRACTION);
                    let mut xm = xe;
                    for c in 0..3 {
                        xm[c] += 0.5 * theta * (xi[c] - xe[c]);
                    }
                    let k = w_at(&xm)? * area / (theta * d);
                    diag[ext] += k;
                    omega[ext] += k;
                }
            }
        }
        for idx in 0..len {
            if mask[idx] == CellTag::Interior {
                diag[idx] = 1.0;
            }
        }
        Ok(Self { grid, mask, links, diag, omega, outer })
    }

    pub fn grid(&self) -> &Arc<Grid3> {
        &self.grid
    }

    pub fn mask(&self) -> &[CellTag] {
        &self.mask
    }

    /// Number of exterior unknowns.
    pub fn unknowns(&self) -> usize {
        self.mask.iter().filter(|&&t| t != CellTag::Interior).count()
    }

    /// Discrete energy of `phi`, with Ω cells taken as 1.
    pub fn energy(&self, phi: &[f64]) -> f64 {
        let dims = self.grid.dims();
        let strides = [dims[1] * dims[2], dims[2], 1];
        let value = |i: usize| if self.mask[i] == CellTag::Interior { 1.0 } else { phi[i] };
        let mut acc = 0.0;
        for idx in 0..phi.len() {
            if self.mask[idx] == CellTag::Interior {
                continue;
            }
            let v = phi[idx];
            for a in 0..3 {
                let k = self.links[a][idx];
                if k != 0.0 {
                    let dv = v - value(idx + strides[a]);
                    acc += k * dv * dv;
                }
            }
            acc += self.omega[idx] * (v - 1.0) * (v - 1.0) + self.outer[idx] * v * v;
        }
        acc
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let [nx, ny, nz] = self.grid.dims();
        let [lx, ly, lz] = &self.links;
        let sx = ny * nz;
        for i in 0..nx {
            for j in 0..ny {
                let base = (i * ny + j) * nz;
                for k in 0..nz {
                    let idx = base + k;
                    let mut s = self.diag[idx] * x[idx];
                    if k + 1 < nz {
                        s -= lz[idx] * x[idx + 1];
                    }
                    if k > 0 {
                        s -= lz[idx - 1] * x[idx - 1];
                    }
                    if j + 1 < ny {
                        s -= ly[idx] * x[idx + nz];
                    }
                    if j > 0 {
                        s -= ly[idx - nz] * x[idx - nz];
                    }
                    if i + 1 < nx {
                        s -= lx[idx] * x[idx + sx];
                    }
                    if i > 0 {
                        s -= lx[idx - sx] * x[idx - sx];
                    }
                    y[idx] = s;
                }
            }
        }
    }

    /// Right-hand side: the Ω-link conductances, and 1 on Ω rows.
    fn rhs(&self) -> Vec<f64> {
        self.mask
            .iter()
            .zip(&self.omega)
            .map(|(t, &w)| if *t == CellTag::Interior { 1.0 } else { w })
            .collect()
    }
}

/// Fraction along the segment from an exterior point to an interior one at
/// which the level function of Ω changes sign, by bisection.
fn cut_fraction(domain: &DomainSpec, outside: &[f64; 3], inside: &[f64; 3]) -> f64 {
    let at = |t: f64| {
        let p: Vec<f64> = (0..3).map(|c| outside[c] + t * (inside[c] - outside[c])).collect();
        domain.level(&p)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if at(mid) < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

trait Precondition {
    fn apply(&self, op: &Operator, r: &[f64], z: &mut [f64]);
}

struct JacobiPrecond(Vec<f64>);

impl JacobiPrecond {
    fn new(op: &Operator) -> Self {
        Self(op.diag.iter().map(|d| 1.0 / d).collect())
    }
}

impl Precondition for JacobiPrecond {
    fn apply(&self, _: &Operator, r: &[f64], z: &mut [f64]) {
        for ((z, r), d) in z.iter_mut().zip(r).zip(&self.0) {
            *z = r * d;
        }
    }
}

/// MIC(0) with the usual safeguards (`τ = 0.97`, `σ = 0.25`).
struct MicPrecond(Vec<f64>);

impl MicPrecond {
    const TAU: f64 = 0.97;
    const SIGMA: f64 = 0.25;

    fn new(op: &Operator) -> Self {
        let [nx, ny, nz] = op.grid.dims();
        let sx = ny * nz;
        let [lx, ly, lz] = &op.links;
        let mut p = vec![0.0; op.diag.len()];
        for i in 0..nx {
            for j in 0..ny {
                let base = (i * ny + j) * nz;
                for k in 0..nz {
                    let idx = base + k;
                    let a = op.diag[idx];
                    let mut e = a;
                    if i > 0 {
                        let q = idx - sx;
                        let t = lx[q] * p[q];
                        e -= t * t + Self::TAU * lx[q] * (ly[q] + lz[q]) * p[q] * p[q];
                    }
                    if j > 0 {
                        let q = idx - nz;
                        let t = ly[q] * p[q];
                        e -= t * t + Self::TAU * ly[q] * (lx[q] + lz[q]) * p[q] * p[q];
                    }
                    if k > 0 {
                        let q = idx - 1;
                        let t = lz[q] * p[q];
                        e -= t * t + Self::TAU * lz[q] * (lx[q] + ly[q]) * p[q] * p[q];
                    }
                    if e < Self::SIGMA * a {
                        e = a;
                    }
                    p[idx] = 1.0 / e.sqrt();
                }
            }
        }
        Self(p)
    }
}

impl Precondition for MicPrecond {
    fn apply(&self, op: &Operator, r: &[f64], z: &mut [f64]) {
        let [nx, ny, nz] = op.grid.dims();
        let sx = ny * nz;
        let [lx, ly, lz] = &op.links;
        let p = &self.0;
        for i in 0..nx {
            for j in 0..ny {
                let base = (i * ny + j) * nz;
                for k in 0..nz {
                    let idx = base + k;
                    let mut t = r[idx];
                    if i > 0 {
                        let q = idx - sx;
                        t += lx[q] * p[q] * z[q];
                    }
                    if j > 0 {
                        let q = idx - nz;
                        t += ly[q] * p[q] * z[q];
                    }
                    if k > 0 {
                        let q = idx - 1;
                        t += lz[q] * p[q] * z[q];
                    }
                    z[idx] = t * p[idx];
                }
            }
        }
        for i in (0..nx).rev() {
            for j in (0..ny).rev() {
                let base = (i * ny + j) * nz;
                for k in (0..nz).rev() {
                    let idx = base + k;
                    let mut t = z[idx];
                    if i + 1 < nx {
                        t += lx[idx] * p[idx] * z[idx + sx];
                    }
                    if j + 1 < ny {
                        t += ly[idx] * p[idx] * z[idx + nz];
                    }
                    if k + 1 < nz {
                        t += lz[idx] * p[idx] * z[idx + 1];
                    }
                    z[idx] = t * p[idx];
                }
            }
        }
    }
}

/// Iteration count and final relative residual of a linear solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverStats {
    pub iterations: usize,
    pub residual: f64,
    pub unknowns: usize,
    pub cells: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients from the initial guess `phi`.
/// Converged when the relative residual over exterior rows drops below
/// `tol`; fails after `max_iter` iterations.
pub fn solve(
    op: &Operator,
    phi: &mut [f64],
    tol: f64,
    max_iter: usize,
    preconditioner: Preconditioner,
) -> Result<SolverStats> {
    let len = phi.len();
    for (v, t) in phi.iter_mut().zip(&op.mask) {
        if *t == CellTag::Interior {
            *v = 1.0;
        }
    }
    let b = op.rhs();
    let b_norm = op
        .mask
        .iter()
        .zip(&b)
        .filter(|(t, _)| **t != CellTag::Interior)
        .map(|(_, v)| v * v)
        .sum::<f64>()
        .sqrt();
    let stats = |iterations, residual| SolverStats {
        iterations,
        residual,
        unknowns: op.unknowns(),
        cells: len,
    };
    if b_norm == 0.0 {
        phi.iter_mut().zip(&op.mask).for_each(|(v, t)| {
            if *t != CellTag::Interior {
                *v = 0.0
            }
        });
        return Ok(stats(0, 0.0));
    }
    let precond: Box<dyn Precondition> = match preconditioner {
        Preconditioner::Mic => Box::new(MicPrecond::new(op)),
        Preconditioner::Jacobi => Box::new(JacobiPrecond::new(op)),
    };
    let mut r = vec![0.0; len];
    op.apply(phi, &mut r);
    for i in 0..len {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; len];
    precond.apply(op, &r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; len];
    let mut rz = dot(&r, &z);
    let mut rel = dot(&r, &r).sqrt() / b_norm;
    let mut it = 0;
    while rel >= tol {
        if it >= max_iter {
            return Err(Error::NoConvergence { iterations: it, residual: rel });
        }
        op.apply(&p, &mut q);
        let alpha = rz / dot(&p, &q);
        for i in 0..len {
            phi[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        it += 1;
        if rel < tol {
            break;
        }
        precond.apply(op, &r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..len {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(stats(it, rel))
}

/// Assembles and solves on `grid`, optionally starting from the trilinear
/// interpolant of `initial`. Returns the potential, its discrete energy and
/// the solver statistics.
pub fn solve_on_grid(
    grid: Arc<Grid3>,
    domain: &DomainSpec,
    weight: &Weight,
    outer: OuterCondition,
    tol: f64,
    preconditioner: Preconditioner,
    initial: Option<&GridField>,
) -> Result<(GridField, f64, SolverStats)> {
    let op = Operator::assemble(grid.clone(), domain, weight, outer)?;
    let mut phi: Vec<f64> = match initial {
        Some(f) => (0..grid.len()).map(|i| f.sample(&grid.center(i))).collect(),
        None => vec![0.0; grid.len()],
    };
    let dims = grid.dims();
    let max_iter = 20 * dims.iter().copied().max().unwrap_or(1);
    let stats = solve(&op, &mut phi, tol, max_iter, preconditioner)?;
    let energy = op.energy(&phi);
    let field = GridField::new(grid, phi, op.mask.clone())?;
    Ok((field, energy, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball_grid(h: f64, r_out: f64) -> (DomainSpec, Arc<Grid3>) {
        let d = DomainSpec::ball(vec![0.0; 3], 1.0).unwrap();
        let g = Arc::new(Grid3::graded([0.0; 3], 1.0 + 4.0 * h, h, r_out, 8.0).unwrap());
        (d, g)
    }

    #[test]
    fn operator_is_symmetric_positive() {
        let (d, g) = ball_grid(0.25, 4.0);
        let op = Operator::assemble(g.clone(), &d, &Weight::Unit, OuterCondition::Robin).unwrap();
        // x·Ay = y·Ax for two arbitrary vectors on exterior rows
        let n = g.len();
        let x: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
        let y: Vec<f64> = (0..n).map(|i| ((i * 104729) % 97) as f64 / 97.0).collect();
        let mut ax = vec![0.0; n];
        let mut ay = vec![0.0; n];
        op.apply(&x, &mut ax);
        op.apply(&y, &mut ay);
        assert!((dot(&x, &ay) - dot(&y, &ax)).abs() < 1e-9 * dot(&x, &ay).abs());
        assert!(dot(&x, &ax) > 0.0);
    }

    #[test]
    fn jacobi_and_mic_agree() {
        let (d, g) = ball_grid(0.125, 4.0);
        let (a, ea, sa) =
            solve_on_grid(g.clone(), &d, &Weight::Unit, OuterCondition::Robin, 1e-11, Preconditioner::Mic, None)
                .unwrap();
        let (b, eb, sb) =
            solve_on_grid(g, &d, &Weight::Unit, OuterCondition::Robin, 1e-11, Preconditioner::Jacobi, None).unwrap();
        assert!((ea - eb).abs() < 1e-8 * ea);
        assert!(sa.iterations < sb.iterations);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-7);
        }
    }

    #[test]
    fn energy_at_solution_matches_rhs_identity() {
        // at the minimiser E = Σ_Ω-links k (1 - φ_i)
        let (d, g) = ball_grid(0.125, 4.0);
        let op = Operator::assemble(g.clone(), &d, &Weight::Unit, OuterCondition::Robin).unwrap();
        let mut phi = vec![0.0; g.len()];
        solve(&op, &mut phi, 1e-13, 10_000, Preconditioner::Mic).unwrap();
        let e = op.energy(&phi);
        let alt: f64 = (0..g.len())
            .filter(|&i| op.mask[i] != CellTag::Interior)
            .map(|i| op.omega[i] * (1.0 - phi[i]))
            .sum();
        assert!((e - alt).abs() < 1e-9 * e, "{e} vs {alt}");
    }
}
