//! Binary field snapshots. Little-endian: magic `GFLX`, version `u32`, dim
//! `u32`, cells per axis `u32`, extents `f64`, then the cell values as `f64`
//! in storage order (x fastest).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

pub const MAGIC: &[u8; 4] = b"GFLX";
pub const VERSION: u32 = 1;

pub fn encode_snapshot(z: &ScalarField) -> Vec<u8> {
    let g = z.grid();
    let mut out = Vec::with_capacity(12 + 12 * g.dim() + 8 * g.n_cells());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    for &c in g.cells() {
        out.extend_from_slice(&(c as u32).to_le_bytes());
    }
    for &e in g.extents() {
        out.extend_from_slice(&e.to_le_bytes());
    }
    for &v in z.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.0.len() < N {
            return Err(Error::Snapshot("truncated file".into()));
        }
        let (a, b) = self.0.split_at(N);
        self.0 = b;
        Ok(a.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<ScalarField> {
    let mut r = Reader(bytes);
    if &r.take::<4>()? != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let dim = r.u32()? as usize;
    if !(1..=2).contains(&dim) {
        return Err(Error::Snapshot(format!("unsupported dimension {dim}")));
    }
    let cells = (0..dim)
        .map(|_| r.u32().map(|c| c as usize))
        .collect::<Result<Vec<_>>>()?;
    let extents = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let grid = Grid::new(dim, &extents, &cells)?;
    let n = grid.n_cells();
    if r.0.len() != 8 * n {
        return Err(Error::Snapshot(format!(
            "expected {} value bytes, found {}",
            8 * n,
            r.0.len()
        )));
    }
    let values = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    ScalarField::new(grid, values)
}

pub fn write_snapshot(path: &Path, z: &ScalarField) -> Result<()> {
    fs::write(path, encode_snapshot(z)).map_err(Error::io(path))
}

pub fn read_snapshot(path: &Path) -> Result<ScalarField> {
    decode_snapshot(&fs::read(path).map_err(Error::io(path))?)
}
