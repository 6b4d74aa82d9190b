use crate::error::{invalid, Result};
use crate::geom::Dimension;
use std::io::Write;

/// Piecewise-linear function of the radius.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    r: Vec<f64>,
    values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(r: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if r.len() != values.len() || r.len() < 2 {
            return invalid(format!(
                "profile needs two equal-length arrays of length >= 2, got {} and {}",
                r.len(),
                values.len()
            ));
        }
        if !(r[0] > 0.0) {
            return invalid("profile radii must start above zero");
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("profile radii must be strictly increasing");
        }
        Ok(Self { r, values })
    }

    /// `points` radii in geometric progression from `r_min` to `r_max`.
    pub fn geometric_mesh(r_min: f64, r_max: f64, points: usize) -> Result<Vec<f64>> {
        if !(r_min > 0.0 && r_max > r_min) || points < 2 {
            return invalid("geometric mesh needs 0 < r_min < r_max and two points");
        }
        let ratio = (r_max / r_min).powf(1.0 / (points - 1) as f64);
        let mut out: Vec<f64> = (0..points).map(|i| r_min * ratio.powi(i as i32)).collect();
        out[points - 1] = r_max;
        Ok(out)
    }

    /// Samples `f` on a geometric mesh.
    pub fn from_fn(r_min: f64, r_max: f64, points: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let r = Self::geometric_mesh(r_min, r_max, points)?;
        let values = r.iter().map(|&x| f(x)).collect();
        Self::new(r, values)
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn r_min(&self) -> f64 {
        self.r[0]
    }

    pub fn r_max(&self) -> f64 {
        *self.r.last().unwrap()
    }

    /// Linear interpolation, constant beyond the ends.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.r.len();
        if x <= self.r[0] {
            return self.values[0];
        }
        if x >= self.r[n - 1] {
            return self.values[n - 1];
        }
        let i = self.r.partition_point(|&v| v <= x) - 1;
        let t = (x - self.r[i]) / (self.r[i + 1] - self.r[i]);
        (1.0 - t) * self.values[i] + t * self.values[i + 1]
    }

    pub fn is_non_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }

    /// `∫ |φ'|² ω r^{n-1} dr` over the mesh, exact for the piecewise-linear
    /// interpolant.
    pub fn dirichlet_energy(&self, dim: &Dimension) -> f64 {
        let n = dim.n() as i32;
        let mut acc = 0.0;
        for i in 0..self.r.len() - 1 {
            let slope = (self.values[i + 1] - self.values[i]) / (self.r[i + 1] - self.r[i]);
            acc += slope * slope * (self.r[i + 1].powi(n) - self.r[i].powi(n));
        }
        acc * dim.omega() / n as f64
    }

    /// Energy of the harmonic continuation `v_end (r_end/r)^{n-2}` beyond the
    /// last mesh radius: `(n-2) ω v_end² r_end^{n-2}`.
    pub fn monopole_tail_energy(&self, dim: &Dimension) -> f64 {
        let v = *self.values.last().unwrap();
        dim.nm2() * dim.omega() * v * v * self.r_max().powi(dim.n() as i32 - 2)
    }

    /// Restriction to `[r0, r_max]`, inserting an interpolated node at `r0`.
    pub fn restrict_from(&self, r0: f64) -> Result<Self> {
        if !(r0 < self.r_max()) || !(r0 > 0.0) {
            return invalid(format!("cannot restrict profile on [{}, {}] to r >= {r0}", self.r_min(), self.r_max()));
        }
        let start = self.r.partition_point(|&v| v <= r0);
        let mut r = vec![r0];
        let mut values = vec![self.eval(r0)];
        r.extend_from_slice(&self.r[start..]);
        values.extend_from_slice(&self.values[start..]);
        Self::new(r, values)
    }

    /// Two-column CSV `r,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["r", "value"])?;
        for (r, v) in self.r.iter().zip(&self.values) {
            w.write_record([format!("{r:e}"), format!("{v:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}
