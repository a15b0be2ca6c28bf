//! Field snapshot files and the plain-text trajectory index.
//!
//! Snapshot format: one ASCII header line `BMHD1 <n_points> <field_kind>`
//! followed by row-major 64-bit IEEE-754 little-endian values — `n_points²`
//! per scalar component, components concatenated x then y for vectors.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField2};
use crate::grid::TorusGrid;

const MAGIC: &str = "BMHD1";

fn write_header(w: &mut impl Write, n: usize, kind: &str) -> Result<()> {
    writeln!(w, "{MAGIC} {n} {kind}")?;
    Ok(())
}

fn write_values(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_scalar(path: impl AsRef<Path>, f: &ScalarField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, f.grid().n_points(), "scalar")?;
    write_values(&mut w, f.values())?;
    w.flush()?;
    Ok(())
}

pub fn write_vector(path: impl AsRef<Path>, v: &VectorField2) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, v.grid().n_points(), "vector")?;
    write_values(&mut w, v.x.values())?;
    write_values(&mut w, v.y.values())?;
    w.flush()?;
    Ok(())
}

fn read_header(r: &mut impl BufRead) -> Result<(usize, String)> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != MAGIC {
        return Err(Error::SnapshotFormat(format!(
            "bad header line {line:?}; expected `{MAGIC} <n_points> <field_kind>`"
        )));
    }
    let n: usize = parts[1]
        .parse()
        .map_err(|e| Error::SnapshotFormat(format!("bad n_points: {e}")))?;
    Ok((n, parts[2].to_string()))
}

fn read_values(r: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf)
        .map_err(|e| Error::SnapshotFormat(format!("truncated payload: {e}")))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk size 8")))
        .collect())
}

pub fn read_scalar(path: impl AsRef<Path>) -> Result<ScalarField> {
    let mut r = BufReader::new(File::open(path)?);
    let (n, kind) = read_header(&mut r)?;
    if kind != "scalar" {
        return Err(Error::SnapshotFormat(format!(
            "expected a scalar snapshot, found kind {kind:?}"
        )));
    }
    let grid = TorusGrid::new(n)?;
    let values = read_values(&mut r, n * n)?;
    ScalarField::from_values(&grid, values)
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<VectorField2> {
    let mut r = BufReader::new(File::open(path)?);
    let (n, kind) = read_header(&mut r)?;
    if kind != "vector" {
        return Err(Error::SnapshotFormat(format!(
            "expected a vector snapshot, found kind {kind:?}"
        )));
    }
    let grid = TorusGrid::new(n)?;
    let x = ScalarField::from_values(&grid, read_values(&mut r, n * n)?)?;
    let y = ScalarField::from_values(&grid, read_values(&mut r, n * n)?)?;
    VectorField2::new(x, y)
}

/// Plain-text snapshot index: one `<time> <u_file> <b_file>` line per stored
/// state.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryIndex {
    pub entries: Vec<(f64, String, String)>,
}

impl TrajectoryIndex {
    pub fn push(&mut self, t: f64, u_file: impl Into<String>, b_file: impl Into<String>) {
        self.entries.push((t, u_file.into(), b_file.into()));
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for (t, u, b) in &self.entries {
            writeln!(w, "{t:.16e} {u} {b}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let r = BufReader::new(File::open(path)?);
        let mut entries = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::SnapshotFormat(format!(
                    "bad index line {line:?}; expected `<time> <u_file> <b_file>`"
                )));
            }
            let t: f64 = parts[0]
                .parse()
                .map_err(|e| Error::SnapshotFormat(format!("bad time: {e}")))?;
            entries.push((t, parts[1].to_string(), parts[2].to_string()));
        }
        Ok(Self { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn grid(n: usize) -> Arc<TorusGrid> {
        TorusGrid::new(n).unwrap()
    }

    #[test]
    fn scalar_snapshots_round_trip_bit_exactly() {
        let g = grid(16);
        let f = ScalarField::from_fn(&g, |x1, x2| (3.0 * x1).sin() + 0.25 * x2.cos());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.bmhd");
        write_scalar(&path, &f).unwrap();
        let back = read_scalar(&path).unwrap();
        assert_eq!(f.values(), back.values());
    }

    #[test]
    fn vector_snapshots_round_trip_bit_exactly() {
        let g = grid(16);
        let v = VectorField2::new(
            ScalarField::from_fn(&g, |_, x2| x2.sin()),
            ScalarField::from_fn(&g, |x1, _| x1.sin()),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.bmhd");
        write_vector(&path, &v).unwrap();
        let back = read_vector(&path).unwrap();
        assert_eq!(v.x.values(), back.x.values());
        assert_eq!(v.y.values(), back.y.values());
        // Kind mismatch is rejected.
        assert!(read_scalar(&path).is_err());
    }

    #[test]
    fn index_round_trips() {
        let mut idx = TrajectoryIndex::default();
        idx.push(0.0, "u_000.bmhd", "b_000.bmhd");
        idx.push(0.125, "u_001.bmhd", "b_001.bmhd");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.txt");
        idx.write(&path).unwrap();
        let back = TrajectoryIndex::read(&path).unwrap();
        assert_eq!(back.entries.len(), 2);
        assert_eq!(back.entries[1].0, 0.125);
        assert_eq!(back.entries[1].1, "u_001.bmhd");
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bmhd");
        std::fs::write(&path, b"BMHD9 16 scalar\n").unwrap();
        assert!(matches!(read_scalar(&path), Err(Error::SnapshotFormat(_))));
    }
}
