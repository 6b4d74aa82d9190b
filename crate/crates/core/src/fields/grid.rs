use super::DomainSpec;
use crate::error::{invalid, Result};
use std::sync::Arc;

/// Cell edges along one coordinate axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    edges: Vec<f64>,
    centers: Vec<f64>,
}

impl Axis {
    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return invalid("an axis needs at least one cell");
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("axis edges must be strictly increasing");
        }
        let centers = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Self { edges, centers })
    }

    pub fn uniform(lo: f64, h: f64, cells: usize) -> Self {
        let edges = (0..=cells).map(|i| lo + i as f64 * h).collect();
        Self::from_edges(edges).expect("uniform axis is valid")
    }

    /// Uniform spacing `h` on `[c - core, c + core]` (rounded up to whole
    /// cells), then cells growing geometrically by `q = 1 + growth·h/core`
    /// out to `c ± outer`.
    pub fn graded(center: f64, core: f64, h: f64, outer: f64, growth: f64) -> Result<Self> {
        let half_cells = (core / h - 1e-9).ceil().max(1.0) as usize;
        let core = half_cells as f64 * h;
        if outer <= core {
            return invalid(format!("outer half-width {outer} must exceed the core {core}"));
        }
        let q = 1.0 + growth * h / core;
        let mut right = vec![0.0];
        for i in 1..=half_cells {
            right.push(i as f64 * h);
        }
        let mut width = h;
        loop {
            width *= q;
            let last = *right.last().unwrap();
            if last + width >= outer {
                if outer - last >= 0.5 * width {
                    right.push(outer);
                } else {
                    *right.last_mut().unwrap() = outer;
                }
                break;
            }
            right.push(last + width);
        }
        let mut edges: Vec<f64> = right.iter().rev().map(|e| center - e).collect();
        edges.extend(right.iter().skip(1).map(|e| center + e));
        Self::from_edges(edges)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.centers[i]
    }

    #[inline]
    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn lo(&self) -> f64 {
        self.edges[0]
    }

    pub fn hi(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    /// Index `i` and fraction `t` with `x = (1-t) c_i + t c_{i+1}`, or `None`
    /// outside the hull of the cell centres.
    pub fn locate_center(&self, x: f64) -> Option<(usize, f64)> {
        let n = self.centers.len();
        if n < 2 || !(x >= self.centers[0] && x <= self.centers[n - 1]) {
            return None;
        }
        let i = self.centers.partition_point(|&c| c <= x).saturating_sub(1).min(n - 2);
        let t = (x - self.centers[i]) / (self.centers[i + 1] - self.centers[i]);
        Some((i, t))
    }

    fn is_uniform(&self) -> bool {
        let h = self.width(0);
        (0..self.len()).all(|i| (self.width(i) - h).abs() <= 1e-9 * h)
    }
}

/// Rectilinear three-dimensional grid of cells, stored row-major
/// (`z` fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3 {
    axes: [Axis; 3],
    spacing: f64,
}

impl Grid3 {
    pub fn new(axes: [Axis; 3], spacing: f64) -> Self {
        Self { axes, spacing }
    }

    /// Cube of half-width at least `half_width` around `center`, with an even
    /// number of cells of size `h` per axis.
    pub fn uniform(center: [f64; 3], half_width: f64, h: f64) -> Self {
        let half_cells = (half_width / h - 1e-9).ceil().max(1.0) as usize;
        let axes = center.map(|c| Axis::uniform(c - half_cells as f64 * h, h, 2 * half_cells));
        Self { axes, spacing: h }
    }

    /// Uniform core of spacing `h` and half-width `core`, geometrically graded
    /// out to a cube of half-width `outer`.
    pub fn graded(center: [f64; 3], core: f64, h: f64, outer: f64, growth: f64) -> Result<Self> {
        let axes = [
            Axis::graded(center[0], core, h, outer, growth)?,
            Axis::graded(center[1], core, h, outer, growth)?,
            Axis::graded(center[2], core, h, outer, growth)?,
        ];
        Ok(Self { axes, spacing: h })
    }

    #[inline]
    pub fn axis(&self, a: usize) -> &Axis {
        &self.axes[a]
    }

    /// Core spacing.
    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn is_uniform(&self) -> bool {
        self.axes.iter().all(|a| a.is_uniform())
            && (self.axes[0].width(0) - self.axes[1].width(0)).abs() < 1e-12
            && (self.axes[0].width(0) - self.axes[2].width(0)).abs() < 1e-12
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        [self.axes[0].len(), self.axes[1].len(), self.axes[2].len()]
    }

    #[inline]
    pub fn len(&self) -> usize {
        let d = self.dims();
        d[0] * d[1] * d[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ijk: [usize; 3]) -> usize {
        let d = self.dims();
        (ijk[0] * d[1] + ijk[1]) * d[2] + ijk[2]
    }

    #[inline]
    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let d = self.dims();
        [idx / (d[1] * d[2]), (idx / d[2]) % d[1], idx % d[2]]
    }

    /// Flat index offset of a unit step along `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        let d = self.dims();
        match axis {
            0 => d[1] * d[2],
            1 => d[2],
            _ => 1,
        }
    }

    #[inline]
    pub fn center(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.ijk(idx);
        [self.axes[0].center(i), self.axes[1].center(j), self.axes[2].center(k)]
    }

    #[inline]
    pub fn widths(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.ijk(idx);
        [self.axes[0].width(i), self.axes[1].width(j), self.axes[2].width(k)]
    }

    #[inline]
    pub fn cell_volume(&self, idx: usize) -> f64 {
        let w = self.widths(idx);
        w[0] * w[1] * w[2]
    }

    /// Half-width of the largest cube about `center` inside the grid.
    pub fn inner_half_width(&self, center: &[f64; 3]) -> f64 {
        (0..3)
            .map(|a| (center[a] - self.axes[a].lo()).min(self.axes[a].hi() - center[a]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Half-width of the largest cube about `center` covered by cells of
    /// width `spacing`.
    pub fn uniform_half_width(&self, center: &[f64; 3]) -> f64 {
        let limit = self.spacing * (1.0 + 1e-9);
        (0..3)
            .map(|a| {
                let axis = &self.axes[a];
                let edges = axis.edges();
                let (mut lo, mut hi) = (center[a], center[a]);
                // walk outwards from the cell holding the centre
                let start = edges.partition_point(|&e| e <= center[a]).saturating_sub(1).min(axis.len() - 1);
                for i in (0..=start).rev() {
                    if axis.width(i) > limit {
                        break;
                    }
                    lo = edges[i];
                }
                for i in start..axis.len() {
                    if axis.width(i) > limit {
                        break;
                    }
                    hi = edges[i + 1];
                }
                (center[a] - lo).min(hi - center[a])
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Role of a cell relative to the excised region Ω.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum CellTag {
    /// Centre inside Ω.
    Interior = 0,
    /// Centre in the exterior domain `ℝ³ \ Ω`.
    Exterior = 1,
    /// Outside the truncation region.
    OuterGhost = 2,
}

impl CellTag {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Self::Interior),
            1 => Some(Self::Exterior),
            2 => Some(Self::OuterGhost),
            _ => None,
        }
    }
}

/// Scalar values on the cells of a [`Grid3`], tagged against Ω.
#[derive(Debug, Clone)]
pub struct GridField {
    grid: Arc<Grid3>,
    values: Vec<f64>,
    mask: Vec<CellTag>,
}

impl GridField {
    pub fn new(grid: Arc<Grid3>, values: Vec<f64>, mask: Vec<CellTag>) -> Result<Self> {
        if values.len() != grid.len() || mask.len() != grid.len() {
            return invalid(format!(
                "field has {} values and {} tags for {} cells",
                values.len(),
                mask.len(),
                grid.len()
            ));
        }
        Ok(Self { grid, values, mask })
    }

    /// Samples `f` on every cell; all cells exterior.
    pub fn from_fn(grid: Arc<Grid3>, f: impl Fn(&[f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.center(i))).collect();
        let mask = vec![CellTag::Exterior; grid.len()];
        Self { grid, values, mask }
    }

    /// Samples `f` and tags cells whose centre lies in Ω as interior.
    pub fn with_domain(grid: Arc<Grid3>, domain: &DomainSpec, f: impl Fn(&[f64; 3]) -> f64) -> Self {
        let mask = domain_mask(&grid, domain);
        let values = (0..grid.len()).map(|i| f(&grid.center(i))).collect();
        Self { grid, values, mask }
    }

    /// Tags every cell whose centre lies farther than `radius` from `center`
    /// as an outer ghost.
    pub fn truncate_outside(mut self, center: &[f64; 3], radius: f64) -> Self {
        for idx in 0..self.values.len() {
            let x = self.grid.center(idx);
            let r2: f64 = (0..3).map(|a| (x[a] - center[a]).powi(2)).sum();
            if r2 > radius * radius {
                self.mask[idx] = CellTag::OuterGhost;
            }
        }
        self
    }

    pub fn grid(&self) -> &Arc<Grid3> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn mask(&self) -> &[CellTag] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            mask: self.mask.clone(),
        }
    }

    /// Trilinear interpolation between cell centres, clamped to the grid.
    pub fn sample(&self, x: &[f64; 3]) -> f64 {
        let mut loc = [(0usize, 0.0f64); 3];
        for a in 0..3 {
            let axis = self.grid.axis(a);
            let xc = x[a].clamp(axis.center(0), axis.center(axis.len() - 1));
            loc[a] = axis.locate_center(xc).unwrap_or((0, 0.0));
        }
        let mut acc = 0.0;
        for corner in 0..8usize {
            let mut ijk = [0usize; 3];
            let mut w = 1.0;
            for a in 0..3 {
                let bit = (corner >> a) & 1;
                ijk[a] = (loc[a].0 + bit).min(self.grid.dims()[a] - 1);
                w *= if bit == 1 { loc[a].1 } else { 1.0 - loc[a].1 };
            }
            if w != 0.0 {
                acc += w * self.values[self.grid.index(ijk)];
            }
        }
        acc
    }
}

pub(crate) fn domain_mask(grid: &Grid3, domain: &DomainSpec) -> Vec<CellTag> {
    (0..grid.len())
        .map(|i| {
            if domain.contains(&grid.center(i)) {
                CellTag::Interior
            } else {
                CellTag::Exterior
            }
        })
        .collect()
}
