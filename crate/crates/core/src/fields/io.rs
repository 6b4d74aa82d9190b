//! Flat binary and CSV serialisation of grid fields.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! magic     8 bytes  "PGRIDF01"
//! n         u64      always 3
//! dims      3 × u64  cells per axis
//! spacing   f64      core spacing
//! edges     Σ(dims+1) × f64, axis by axis
//! values    Π dims × f64, row-major (z fastest)
//! mask      Π dims × u8 (0 interior, 1 exterior, 2 outer ghost)
//! ```

use super::{Axis, CellTag, Grid3, GridField};
use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::sync::Arc;

const MAGIC: &[u8; 8] = b"PGRIDF01";

/// Grids above this many cells are refused by [`write_csv`].
pub const CSV_CELL_LIMIT: usize = 1 << 20;

pub fn write_binary<W: Write>(field: &GridField, mut out: W) -> Result<()> {
    let grid = field.grid();
    out.write_all(MAGIC)?;
    out.write_all(&3u64.to_le_bytes())?;
    for d in grid.dims() {
        out.write_all(&(d as u64).to_le_bytes())?;
    }
    out.write_all(&grid.spacing().to_le_bytes())?;
    for a in 0..3 {
        for e in grid.axis(a).edges() {
            out.write_all(&e.to_le_bytes())?;
        }
    }
    let mut buf = Vec::with_capacity(field.len() * 9);
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend(field.mask().iter().map(|&t| t as u8));
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

fn read_u64(input: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(input: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(read_u64(input)?))
}

pub fn read_binary<R: Read>(mut input: R) -> Result<GridField> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let n = read_u64(&mut input)?;
    if n != 3 {
        return Err(Error::Format(format!("dimension {n}, only 3 is supported")));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = read_u64(&mut input)? as usize;
        if *d == 0 || *d > 1 << 16 {
            return Err(Error::Format(format!("implausible axis length {d}")));
        }
    }
    let spacing = read_f64(&mut input)?;
    let mut axes = Vec::with_capacity(3);
    for d in dims {
        let edges = (0..=d).map(|_| read_f64(&mut input)).collect::<Result<Vec<_>>>()?;
        axes.push(Axis::from_edges(edges).map_err(|e| Error::Format(e.to_string()))?);
    }
    let axes: [Axis; 3] = axes.try_into().expect("three axes");
    let grid = Arc::new(Grid3::new(axes, spacing));
    let len = grid.len();
    let mut raw = vec![0u8; len * 8];
    input.read_exact(&mut raw)?;
    let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let mut raw = vec![0u8; len];
    input.read_exact(&mut raw)?;
    let mask = raw
        .iter()
        .map(|&b| CellTag::from_u8(b).ok_or_else(|| Error::Format(format!("bad cell tag {b}"))))
        .collect::<Result<Vec<_>>>()?;
    GridField::new(grid, values, mask)
}

/// CSV with columns `x,y,z,value,tag`, one row per cell.
pub fn write_csv<W: Write>(field: &GridField, out: W) -> Result<()> {
    if field.len() > CSV_CELL_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "{} cells is too many for CSV export (limit {CSV_CELL_LIMIT})",
            field.len()
        )));
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["x", "y", "z", "value", "tag"])?;
    let grid = field.grid();
    for idx in 0..field.len() {
        let x = grid.center(idx);
        w.write_record([
            format!("{:e}", x[0]),
            format!("{:e}", x[1]),
            format!("{:e}", x[2]),
            format!("{:e}", field.values()[idx]),
            (field.mask()[idx] as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
