//! File formats: raw CSV field dumps (bit-exact round trip) and binary
//! PGM images. Both are deliberately dependency-free and trivial to
//! parse from any language.

use crate::grid::{CellField, GridGeometry};
use crate::{Error, Result};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Writes one value per line, row-major (first index outermost), in
/// scientific notation with 17 significant digits so the values reload
/// bit-identically.
pub fn write_field_csv(field: &CellField, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for v in field.values() {
        writeln!(out, "{v:.16e}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a field written by [`write_field_csv`]; the grid size is the
/// square root of the line count.
pub fn read_field_csv(path: &Path) -> Result<CellField> {
    let reader = BufReader::new(File::open(path)?);
    let mut values = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let v: f64 = trimmed.parse().map_err(|_| {
            Error::Parse(format!("{}:{}: not a number: '{trimmed}'", path.display(), lineno + 1))
        })?;
        values.push(v);
    }
    let m = (values.len() as f64).sqrt().round() as usize;
    if m * m != values.len() || m < 2 {
        return Err(Error::Parse(format!(
            "{}: {} values do not form a square grid",
            path.display(),
            values.len()
        )));
    }
    Ok(CellField::from_values(GridGeometry::new(m), values))
}

/// Binary PGM (`P5`, maxval 255), `M x M`, storage order: the field's
/// first index runs over image rows top to bottom. Values map linearly
/// from `[min, max]` to `[0, 255]`; a constant field maps to 0.
pub fn write_pgm(field: &CellField, path: &Path) -> Result<()> {
    let m = field.geometry().m();
    let lo = field.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = field.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;

    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{m} {m}\n255\n")?;
    let mut pixels = Vec::with_capacity(m * m);
    for &v in field.values() {
        let p = if span > 0.0 {
            (255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8
        } else {
            0
        };
        pixels.push(p);
    }
    out.write_all(&pixels)?;
    out.flush()?;
    Ok(())
}

/// Reorients a field for display: image rows sweep y from +1 down to -1,
/// columns sweep x from -1 to 1.
pub fn display_oriented(field: &CellField) -> CellField {
    let geom = field.geometry();
    let m = geom.m();
    let mut out = CellField::zeros(geom);
    for row in 0..m {
        let j = m - 1 - row;
        for col in 0..m {
            out.set(row, col, field.get(col, j));
        }
    }
    out
}
