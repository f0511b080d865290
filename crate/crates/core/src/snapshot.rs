//! KRDF binary snapshots of multi-species grid fields.
//!
//! Layout (all integers and floats little-endian):
//!
//! | bytes        | content                                  |
//! |--------------|------------------------------------------|
//! | 4            | magic `KRDF`                             |
//! | 4            | format version (`u32`, currently 1)      |
//! | 4            | `d` (`u32`)                              |
//! | 4            | species count `l` (`u32`)                |
//! | 4            | points per axis `n` (`u32`)              |
//! | `l * n^d * 8`| species blocks of `f64` grid values, row-major, axis 0 slowest |

use std::io::{Read, Write};

use crate::error::{KrdError, Result};
use crate::torus_field::{GridField, TorusGrid};

pub const MAGIC: &[u8; 4] = b"KRDF";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(mut out: W, fields: &[GridField]) -> Result<()> {
    let Some(first) = fields.first() else {
        return Err(KrdError::Snapshot("no species to write".into()));
    };
    let grid = first.grid();
    if fields.iter().any(|f| f.grid() != grid) {
        return Err(KrdError::GridMismatch("species fields on different grids".into()));
    }
    out.write_all(MAGIC)?;
    for word in [FORMAT_VERSION, grid.dim() as u32, fields.len() as u32, grid.n() as u32] {
        out.write_all(&word.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(grid.len() * 8);
    for f in fields {
        buf.clear();
        for v in f.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<Vec<GridField>> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(KrdError::Snapshot(format!("bad magic {magic:?}")));
    }
    let mut word = || -> Result<u32> {
        let mut b = [0u8; 4];
        input.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    };
    let version = word()?;
    if version != FORMAT_VERSION {
        return Err(KrdError::Snapshot(format!("unsupported version {version}")));
    }
    let d = word()? as usize;
    let species = word()? as usize;
    let n = word()? as usize;
    let grid = TorusGrid::new(d, n).map_err(|e| KrdError::Snapshot(e.to_string()))?;
    let mut fields = Vec::with_capacity(species);
    let mut bytes = vec![0u8; grid.len() * 8];
    for _ in 0..species {
        input.read_exact(&mut bytes)?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        fields.push(GridField::new(grid, values)?);
    }
    Ok(fields)
}
