//! Spherical decreasing rearrangement of grid functions, the extension of a
//! capacity potential into Ω and its restriction after rearrangement, and
//! the Pólya–Szegő comparison.
//!
//! The rearrangement is a permutation of cell values: sorting cells by
//! value and stacking their volumes in shells about the origin. Norms and
//! super-level volumes are therefore preserved cell by cell, and are summed
//! with correctly rounded summation so that the preservation is exact in
//! floating point as well.

use crate::error::{invalid, Error, Result};
use crate::fields::{dirichlet_energy, CellTag, GridField, RadialProfile};
use crate::geom::Dimension;
use serde::Serialize;
use std::io::Write;

/// Correctly rounded sum (Shewchuk's algorithm), independent of the order
/// of the terms.
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    // round the expansion, carrying the half-way correction
    let Some(mut hi) = partials.pop() else { return 0.0 };
    let mut lo = 0.0;
    while let Some(y) = partials.pop() {
        let x = hi;
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if !partials.is_empty() && ((lo < 0.0 && partials[partials.len() - 1] < 0.0) || (lo > 0.0 && partials[partials.len() - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

/// Super-level volume of one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelEntry {
    pub level: f64,
    /// `μ{f ≥ K}` summed over the original cells.
    pub volume: f64,
    pub cells: usize,
    /// The same quantity for the rearrangement.
    pub volume_star: f64,
    pub cells_star: usize,
}

/// `‖f‖_p^p` before and after rearrangement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormCheck {
    pub p: i32,
    pub original: f64,
    pub rearranged: f64,
}

#[derive(Debug, Clone)]
pub struct RearrangementResult {
    /// `u*` through the points `((v_k/β)^{1/n}, f_k)`.
    pub profile: RadialProfile,
    /// Volume of each rearranged cell, in rearranged order.
    pub volumes: Vec<f64>,
    pub level_map: Vec<LevelEntry>,
    pub norms: Vec<NormCheck>,
    /// Largest value on cells at the edge of the rearranged region minus the
    /// minimum; should be small when the support is covered.
    pub edge_excess: f64,
}

/// Node spacing of [`RearrangementResult::coarse_profile`] in local cell
/// widths.
pub const SHELL_CELLS: f64 = 2.0;

/// Number of levels recorded in the level map.
pub const LEVELS: usize = 64;

/// Rearranges the cells of `f` not tagged as outer ghosts. With `clip`,
/// values are first clamped to the interval.
pub fn rearrange(f: &GridField, clip: Option<(f64, f64)>) -> Result<RearrangementResult> {
    let grid = f.grid();
    let dims = grid.dims();
    let mask = f.mask();
    let clamp = |v: f64| match clip {
        Some((lo, hi)) => v.clamp(lo, hi),
        None => v,
    };
    let cells: Vec<usize> = (0..f.len()).filter(|&i| mask[i] != CellTag::OuterGhost).collect();
    if cells.len() < 2 {
        return invalid("need at least two cells to rearrange");
    }
    let value = |i: usize| clamp(f.values()[i]);
    let mut order = cells.clone();
    // stable: equal values keep increasing cell index
    order.sort_by(|&a, &b| value(b).total_cmp(&value(a)));
    let beta = Dimension::new(3)?.beta();
    let sorted: Vec<f64> = order.iter().map(|&i| value(i)).collect();
    let volumes: Vec<f64> = order.iter().map(|&i| grid.cell_volume(i)).collect();
    let mut radii = Vec::with_capacity(order.len());
    let mut acc = 0.0;
    for v in &volumes {
        acc += v;
        radii.push((acc / beta).cbrt());
    }
    let profile = RadialProfile::new(radii, sorted.clone())?;

    let (top, bottom) = (sorted[0], *sorted.last().unwrap());
    let mut level_map = Vec::with_capacity(LEVELS);
    for j in 0..LEVELS {
        let level = bottom + (top - bottom) * (j as f64 + 0.5) / LEVELS as f64;
        let members: Vec<usize> = cells.iter().copied().filter(|&i| value(i) >= level).collect();
        let k = sorted.partition_point(|&v| v >= level);
        level_map.push(LevelEntry {
            level,
            volume: exact_sum(members.iter().map(|&i| grid.cell_volume(i))),
            cells: members.len(),
            volume_star: exact_sum(volumes[..k].iter().copied()),
            cells_star: k,
        });
    }
    let norms = [1, 2, 4]
        .into_iter()
        .map(|p| NormCheck {
            p,
            original: exact_sum(cells.iter().map(|&i| value(i).abs().powi(p) * grid.cell_volume(i))),
            rearranged: exact_sum(sorted.iter().zip(&volumes).map(|(v, w)| v.abs().powi(p) * w)),
        })
        .collect();

    let mut edge_max = f64::NEG_INFINITY;
    for &i in &cells {
        let ijk = grid.ijk(i);
        let on_edge = (0..3).any(|a| {
            if ijk[a] == 0 || ijk[a] + 1 == dims[a] {
                return true;
            }
            let s = grid.stride(a);
            mask[i - s] == CellTag::OuterGhost || mask[i + s] == CellTag::OuterGhost
        });
        if on_edge {
            edge_max = edge_max.max(value(i));
        }
    }
    Ok(RearrangementResult { profile, volumes, level_map, norms, edge_excess: edge_max - bottom })
}

impl RearrangementResult {
    /// Radius of the ball holding all rearranged cells.
    pub fn outer_radius(&self) -> f64 {
        self.profile.r_max()
    }

    /// Volume of `{u* ≥ level}`.
    pub fn superlevel_volume(&self, level: f64) -> f64 {
        let k = self.profile.values().partition_point(|&v| v >= level);
        exact_sum(self.volumes[..k].iter().copied())
    }

    /// `u*` on `[r0, outer radius]` sampled at nodes spaced
    /// [`SHELL_CELLS`] local cell widths apart. Between nodes the profile is
    /// linear, so lattice noise in the cumulative volumes does not enter the
    /// slopes. Each cell value is placed at the radius enclosing half of it.
    pub fn coarse_profile(&self, r0: f64) -> Result<RadialProfile> {
        self.coarse_profile_between(r0, self.outer_radius())
    }

    /// [`coarse_profile`](Self::coarse_profile) on `[r0, r1]`.
    pub fn coarse_profile_between(&self, r0: f64, r_end: f64) -> Result<RadialProfile> {
        if !(r0 > 0.0 && r0 < r_end && r_end <= self.outer_radius()) {
            return invalid(format!("radii {r0}, {r_end} outside (0, {}]", self.outer_radius()));
        }
        let beta = Dimension::new(3)?.beta();
        let values = self.profile.values();
        let mut mid = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        for v in &self.volumes {
            mid.push(((acc + 0.5 * v) / beta).cbrt());
            acc += v;
        }
        let at = |r: f64| -> f64 {
            let k = mid.partition_point(|&m| m <= r);
            if k == 0 {
                values[0]
            } else if k == mid.len() {
                values[k - 1]
            } else {
                let t = (r - mid[k - 1]) / (mid[k] - mid[k - 1]);
                values[k - 1] + t * (values[k] - values[k - 1])
            }
        };
        let mut nodes = vec![r0];
        let mut node_values = vec![self.profile.eval(r0)];
        let last = mid.last().unwrap().min(r_end);
        let mut r = r0;
        loop {
            let k = mid.partition_point(|&m| m <= r).min(mid.len() - 1);
            let step = SHELL_CELLS * self.volumes[k].cbrt();
            if r + 1.5 * step > last {
                break;
            }
            r += step;
            nodes.push(r);
            node_values.push(at(r));
        }
        if r_end > r {
            nodes.push(r_end);
            node_values.push(self.profile.eval(r_end));
        }
        RadialProfile::new(nodes, node_values)
    }

    /// Two CSV tables: the profile `r,value` and the level map
    /// `level,volume`.
    pub fn write_csv<W: Write, L: Write>(&self, profile_out: W, levels_out: L) -> Result<()> {
        self.profile.write_csv(profile_out)?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(levels_out);
        w.write_record(["level", "volume"])?;
        for e in &self.level_map {
            w.write_record([format!("{:e}", e.level), format!("{:e}", e.volume)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Boundary-adjacent exterior cells must carry at least `1 - tol`.
pub const DEFAULT_BOUNDARY_TOL: f64 = 0.25;

/// `φ̃`: the potential with Ω cells set to 1. Exterior values must lie in
/// `[0, 1]`, and cells next to Ω within `boundary_tol` of 1.
pub fn extend_into_omega(phi: &GridField, boundary_tol: f64) -> Result<GridField> {
    let grid = phi.grid();
    let dims = grid.dims();
    let mask = phi.mask();
    let mut values = phi.values().to_vec();
    for idx in 0..values.len() {
        match mask[idx] {
            CellTag::Interior => values[idx] = 1.0,
            CellTag::Exterior => {
                let v = values[idx];
                if !(-1e-9..=1.0 + 1e-9).contains(&v) {
                    return Err(Error::OutOfRange { value: v, cell: idx });
                }
                let ijk = grid.ijk(idx);
                let touches = (0..3).any(|a| {
                    let s = grid.stride(a);
                    (ijk[a] > 0 && mask[idx - s] == CellTag::Interior)
                        || (ijk[a] + 1 < dims[a] && mask[idx + s] == CellTag::Interior)
                });
                if touches && v < 1.0 - boundary_tol {
                    return Err(Error::Precondition(format!(
                        "potential {v} next to the boundary at {:?} is not close to 1",
                        grid.center(idx)
                    )));
                }
            }
            CellTag::OuterGhost => {}
        }
    }
    GridField::new(grid.clone(), values, mask.to_vec())
}

/// `(φ̃)*` restricted to `r ≥ R = (V/β)^{1/3}`, on the coarse mesh of
/// [`RearrangementResult::coarse_profile`], with `φ*(R) = 1`.
pub fn restrict_star(result: &RearrangementResult, volume: f64) -> Result<RadialProfile> {
    restrict_star_above(result, volume, f64::NEG_INFINITY)
}

/// [`restrict_star`] cut at the radius enclosing `{φ* > level}`.
pub fn restrict_star_above(result: &RearrangementResult, volume: f64, level: f64) -> Result<RadialProfile> {
    if !(volume > 0.0) {
        return invalid("volume must be positive");
    }
    let available = result.superlevel_volume(1.0);
    if available < volume * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "{{φ̃ ≥ 1}} has volume {available}, less than V = {volume}"
        )));
    }
    let beta = Dimension::new(3)?.beta();
    let radius = (volume / beta).cbrt();
    let k = result.profile.values().partition_point(|&v| v > level);
    let r_end = (exact_sum(result.volumes[..k].iter().copied()) / beta).cbrt();
    if r_end <= radius {
        return Err(Error::Precondition(format!("{{φ* > {level}}} lies inside the radius {radius}")));
    }
    let p = result.coarse_profile_between(radius, r_end)?;
    let mut values = p.values().to_vec();
    values[0] = 1.0;
    RadialProfile::new(p.radii().to_vec(), values)
}

/// Dirichlet energies of `f` and of its rearrangement, and norm checks.
#[derive(Debug, Clone, Serialize)]
pub struct PolyaSzego {
    pub energy: f64,
    pub energy_star: f64,
    /// `E(f*) - E(f)`.
    pub defect: f64,
    pub norms: Vec<NormCheck>,
    pub level_map: Vec<LevelEntry>,
    pub edge_excess: f64,
}

/// Compares `E(f) = ∫|∇f|²` over the exterior cells, by central
/// differences, with the radial energy of `f*`.
pub fn polya_szego_check(f: &GridField) -> Result<PolyaSzego> {
    let dim = Dimension::new(3)?;
    let result = rearrange(f, None)?;
    let energy = dirichlet_energy(f, None)?;
    let star = result.coarse_profile(result.profile.r_min())?;
    let energy_star = star.dirichlet_energy(&dim);
    Ok(PolyaSzego {
        energy,
        energy_star,
        defect: energy_star - energy,
        norms: result.norms,
        level_map: result.level_map,
        edge_excess: result.edge_excess,
    })
}
