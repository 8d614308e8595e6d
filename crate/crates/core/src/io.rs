//! Point patterns as `x,y` CSV and covariate rasters as Esri ASCII grids.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::geom::{Point, PointPattern, Window};
use crate::raster::{GridGeometry, ScalarField};
use crate::scalar::Scalar;

/// Reads a CSV with a header containing columns `x` and `y` (other columns
/// are ignored).
pub fn read_points_csv<F: Scalar, R: Read>(reader: R, window: &Window<F>) -> Result<PointPattern<F>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse(format!("point CSV has no '{name}' column")))
    };
    let (cx, cy) = (col("x")?, col("y")?);
    let mut points = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let num = |c: usize| -> Result<f64> {
            let s = rec.get(c).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse(format!("row {}: '{s}' is not a finite number", line + 2)))
        };
        points.push(Point::new(F::lit(num(cx)?), F::lit(num(cy)?)));
    }
    PointPattern::new(points, window.clone())
}

pub fn write_points_csv<F: Scalar, W: Write>(pattern: &PointPattern<F>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["x", "y"]).map_err(io)?;
    for p in pattern.points() {
        w.write_record([p.x.as_f64().to_string(), p.y.as_f64().to_string()]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Raw content of an ASCII grid: geometry and row-major values from the
/// bottom row up, with NODATA cells as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct AsciiGrid<F> {
    pub geom: GridGeometry<F>,
    pub values: Vec<F>,
}

impl<F: Scalar> AsciiGrid<F> {
    /// The field on `window`; the grid must cover it and hold data in every
    /// cell whose centre lies inside.
    pub fn into_field(self, window: Window<F>) -> Result<ScalarField<F>> {
        if !self.geom.covers(&window) {
            return Err(Error::GridMismatch("grid does not cover the window".into()));
        }
        ScalarField::new(self.geom, window, self.values)
    }
}

pub fn read_ascii_grid<F: Scalar, R: Read>(reader: R) -> Result<AsciiGrid<F>> {
    let mut lines = BufReader::new(reader).lines();
    let mut header = std::collections::HashMap::new();
    let mut first_data = None;
    for line in lines.by_ref() {
        let line = line?;
        let mut it = line.split_whitespace();
        let Some(key) = it.next() else { continue };
        if key.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
            let v = it.next().ok_or_else(|| Error::Parse(format!("header '{key}' has no value")))?;
            let v: f64 = v.parse().map_err(|_| Error::Parse(format!("header '{key}': bad number '{v}'")))?;
            header.insert(key.to_ascii_lowercase(), v);
        } else {
            first_data = Some(line);
            break;
        }
    }
    let get = |k: &str| header.get(k).copied().ok_or_else(|| Error::Parse(format!("ASCII grid header lacks '{k}'")));
    let ncols = get("ncols")?;
    let nrows = get("nrows")?;
    if ncols < 1.0 || nrows < 1.0 || ncols.fract() != 0.0 || nrows.fract() != 0.0 {
        return Err(Error::Parse("ncols and nrows must be positive integers".into()));
    }
    let (ncols, nrows) = (ncols as usize, nrows as usize);
    let cell = get("cellsize")?;
    let x0 = match (header.get("xllcorner"), header.get("xllcenter")) {
        (Some(&v), _) => v,
        (None, Some(&v)) => v - cell / 2.0,
        _ => return Err(Error::Parse("ASCII grid header lacks 'xllcorner'".into())),
    };
    let y0 = match (header.get("yllcorner"), header.get("yllcenter")) {
        (Some(&v), _) => v,
        (None, Some(&v)) => v - cell / 2.0,
        _ => return Err(Error::Parse("ASCII grid header lacks 'yllcorner'".into())),
    };
    let nodata = header.get("nodata_value").copied();
    let geom = GridGeometry::new(F::lit(x0), F::lit(y0), F::lit(cell), ncols, nrows)?;

    let mut raw = Vec::with_capacity(ncols * nrows);
    let mut push = |line: &str| -> Result<()> {
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse(format!("bad grid value '{tok}'")))?;
            raw.push(if Some(v) == nodata { f64::NAN } else { v });
        }
        Ok(())
    };
    if let Some(l) = first_data {
        push(&l)?;
    }
    for line in lines {
        push(&line?)?;
    }
    if raw.len() != ncols * nrows {
        return Err(Error::Parse(format!("expected {} grid values, found {}", ncols * nrows, raw.len())));
    }
    // file rows run from the top down
    let mut values = vec![F::nan(); ncols * nrows];
    for r in 0..nrows {
        for c in 0..ncols {
            values[geom.index(c, nrows - 1 - r)] = F::lit(raw[r * ncols + c]);
        }
    }
    Ok(AsciiGrid { geom, values })
}

pub const NODATA: f64 = -9999.0;

/// Writes the field, with cells outside its window as NODATA.
pub fn write_ascii_grid<F: Scalar, W: Write>(field: &ScalarField<F>, mut w: W) -> Result<()> {
    let g = field.geom();
    writeln!(w, "ncols {}", g.ncols)?;
    writeln!(w, "nrows {}", g.nrows)?;
    writeln!(w, "xllcorner {}", g.x0.as_f64())?;
    writeln!(w, "yllcorner {}", g.y0.as_f64())?;
    writeln!(w, "cellsize {}", g.cell.as_f64())?;
    writeln!(w, "NODATA_value {NODATA}")?;
    let mask = field.mask();
    for r in (0..g.nrows).rev() {
        let row: Vec<String> = (0..g.ncols)
            .map(|c| {
                let i = g.index(c, r);
                let v = field.values()[i].as_f64();
                if mask[i] && v.is_finite() { v.to_string() } else { NODATA.to_string() }
            })
            .collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}
