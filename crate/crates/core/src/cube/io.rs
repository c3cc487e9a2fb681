//! `SFCB` cube files and catalog CSVs.
//!
//! Cube layout: magic `SFCB`, one version byte, `nx ny nz` as u32 LE, then
//! `nx*ny*nz` f64 LE values in z-fastest order. No checksum.

use std::path::Path;

use super::{Cube, SourceRecord};
use crate::binio::write_atomic;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SFCB";
const VERSION: u8 = 1;
pub const CATALOG_HEADER: [&str; 9] = ["id", "x", "y", "z", "flux", "size", "pa", "incl", "w20"];

impl Cube {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(17 + self.data.len() * 8);
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        for d in [self.nx, self.ny, self.nz] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 17 || &bytes[..4] != MAGIC {
            return Err(Error::format("cube", "missing SFCB header"));
        }
        if bytes[4] != VERSION {
            return Err(Error::format("cube", format!("unsupported version {}", bytes[4])));
        }
        let dim = |k: usize| u32::from_le_bytes(bytes[5 + 4 * k..9 + 4 * k].try_into().unwrap()) as usize;
        let (nx, ny, nz) = (dim(0), dim(1), dim(2));
        let n = nx
            .checked_mul(ny)
            .and_then(|v| v.checked_mul(nz))
            .ok_or_else(|| Error::format("cube", "dims overflow"))?;
        let body = &bytes[17..];
        if body.len() != n * 8 {
            return Err(Error::format(
                "cube",
                format!("expected {} data bytes, found {}", n * 8, body.len()),
            ));
        }
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect::<Vec<_>>();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::format("cube", "non-finite voxel"));
        }
        Ok(Cube { nx, ny, nz, data })
    }
}

pub fn write_cube(path: &Path, cube: &Cube) -> Result<()> {
    write_atomic(path, &cube.to_bytes())
}

pub fn read_cube(path: &Path) -> Result<Cube> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Cube::from_bytes(&bytes)
}

pub fn catalog_to_csv(records: &[SourceRecord]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CATALOG_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::format("catalog", e.to_string()))
}

pub fn write_catalog(path: &Path, records: &[SourceRecord]) -> Result<()> {
    write_atomic(path, &catalog_to_csv(records)?)
}

/// Read a truth catalog. Extra columns (as in detection catalogs) are ignored.
pub fn read_catalog(path: &Path) -> Result<Vec<SourceRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format("catalog", format!("{other:?}")),
    })?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_bytes_layout() {
        let mut c = Cube::zeros(2, 1, 3);
        c.set(1, 0, 2, 1.5);
        let b = c.to_bytes();
        assert_eq!(&b[..5], b"SFCB\x01");
        assert_eq!(&b[5..9], &2u32.to_le_bytes());
        assert_eq!(&b[13..17], &3u32.to_le_bytes());
        // z-fastest: (1,0,2) is the last voxel.
        assert_eq!(&b[b.len() - 8..], &1.5f64.to_le_bytes());
        assert_eq!(Cube::from_bytes(&b).unwrap(), c);
        assert!(Cube::from_bytes(&b[..b.len() - 1]).is_err());
    }

    #[test]
    fn empty_catalog_is_header_only() {
        let csv = catalog_to_csv(&[]).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "id,x,y,z,flux,size,pa,incl,w20\n");
    }

    #[test]
    fn catalog_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let recs = vec![SourceRecord {
            id: 3,
            x: 1.25,
            y: 2.0,
            z: 0.1 + 0.2,
            flux: 10.0,
            size: 3.3,
            pa: 179.9,
            incl: 45.0,
            w20: 7.0,
        }];
        write_catalog(&p, &recs).unwrap();
        assert_eq!(read_catalog(&p).unwrap(), recs);
    }
}
