//! Field serialization: a little-endian binary snapshot and a plain CSV
//! form. Both are f64 regardless of the in-memory scalar.
//!
//! Snapshot layout: magic "CEL1", n as u32, half-width L as f64, then n^2
//! f64 samples row-major in x1.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Grid2D, ScalarField};
use crate::{Error, Real, Result};

const MAGIC: &[u8; 4] = b"CEL1";

pub fn write_snapshot<T: Real>(field: &ScalarField<T>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(field.grid().n() as u32).to_le_bytes())?;
    w.write_all(&field.grid().half_width().as_f64().to_le_bytes())?;
    for v in field.values() {
        w.write_all(&v.as_f64().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<ScalarField<f64>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:02x?}, expected \"CEL1\"",
            magic
        )));
    }
    let mut nb = [0u8; 4];
    read_exact(&mut r, &mut nb, "grid size")?;
    let n = u32::from_le_bytes(nb) as usize;
    let mut lb = [0u8; 8];
    read_exact(&mut r, &mut lb, "half-width")?;
    let l = f64::from_le_bytes(lb);
    let grid = Grid2D::new(n, l)?;
    let mut values = Vec::with_capacity(grid.node_count());
    let mut vb = [0u8; 8];
    for _ in 0..grid.node_count() {
        read_exact(&mut r, &mut vb, "samples")?;
        values.push(f64::from_le_bytes(vb));
    }
    ScalarField::from_values(grid, values)
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format(format!("truncated snapshot while reading {what}"))
        } else {
            Error::Io(e)
        }
    })
}

/// CSV export, columns `x1,x2,value`, one row per node in row-major order.
/// Floats print in shortest round-trip form, so output is byte-stable.
pub fn write_field_csv<T: Real>(field: &ScalarField<T>, out: &mut impl Write) -> Result<()> {
    writeln!(out, "x1,x2,value")?;
    let grid = field.grid();
    let n = grid.n();
    for i in 0..n {
        for j in 0..n {
            let [x1, x2] = grid.node(i, j);
            writeln!(
                out,
                "{},{},{}",
                x1.as_f64(),
                x2.as_f64(),
                field.get(i, j).as_f64()
            )?;
        }
    }
    Ok(())
}

/// CSV import; expects exactly the export layout and re-derives the grid
/// from the coordinates.
pub fn read_field_csv(input: &str) -> Result<ScalarField<f64>> {
    let mut lines = input.lines();
    match lines.next() {
        Some(h) if h.trim() == "x1,x2,value" => {}
        other => {
            return Err(Error::Format(format!(
                "expected header \"x1,x2,value\", got {other:?}"
            )))
        }
    }
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut next = |what: &str| -> Result<f64> {
            parts
                .next()
                .ok_or_else(|| Error::Format(format!("row {}: missing {what}", lineno + 2)))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("row {}: {what}: {e}", lineno + 2)))
        };
        rows.push((next("x1")?, next("x2")?, next("value")?));
    }
    let count = rows.len();
    let n = (count as f64).sqrt().round() as usize;
    if n * n != count {
        return Err(Error::Format(format!(
            "{count} data rows do not form a square grid"
        )));
    }
    let l = -rows[0].0;
    let grid = Grid2D::new(n, l)?;
    let tol = 1e-9 * l.max(1.0);
    let mut values = Vec::with_capacity(count);
    for (idx, &(x1, x2, v)) in rows.iter().enumerate() {
        let (i, j) = (idx / n, idx % n);
        let [ex1, ex2] = grid.node(i, j);
        if (x1 - ex1).abs() > tol || (x2 - ex2).abs() > tol {
            return Err(Error::Format(format!(
                "row {}: coordinates ({x1}, {x2}) do not match the uniform grid node ({ex1}, {ex2})",
                idx + 2
            )));
        }
        values.push(v);
    }
    ScalarField::from_values(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip_is_bitwise() {
        let g = Grid2D::new(16, 1.25_f64).unwrap();
        let f = ScalarField::from_fn(g, |[x, y]| (3.0 * x).sin() * (y + 0.1));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.cel");
        write_snapshot(&f, &path).unwrap();
        let back = read_snapshot(&path).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn snapshot_rejects_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cel");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(read_snapshot(&path), Err(Error::Format(_))));

        let g = Grid2D::new(16, 1.0_f64).unwrap();
        let f = ScalarField::zeros(g);
        let path2 = dir.path().join("trunc.cel");
        write_snapshot(&f, &path2).unwrap();
        let bytes = std::fs::read(&path2).unwrap();
        std::fs::write(&path2, &bytes[..bytes.len() - 9]).unwrap();
        match read_snapshot(&path2) {
            Err(Error::Format(msg)) => assert!(msg.contains("truncated")),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid2D::new(16, 2.0_f64).unwrap();
        let f = ScalarField::from_fn(g, |[x, y]| x * y + 0.5);
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back = read_field_csv(&text).unwrap();
        assert_eq!(back.grid(), f.grid());
        for (a, b) in back.values().iter().zip(f.values()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(read_field_csv("nope\n1,2,3\n").is_err());
        assert!(read_field_csv("x1,x2,value\n1,2\n").is_err());
        assert!(read_field_csv("x1,x2,value\n1,2,abc\n").is_err());
        // Three well-formed rows cannot be a square power-of-two grid.
        assert!(read_field_csv("x1,x2,value\n0,0,1\n0,1,1\n1,0,1\n").is_err());
    }
}
