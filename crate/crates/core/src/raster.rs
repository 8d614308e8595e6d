//! Pixel-grid scalar fields: covariates, intensities and every smoothed or
//! estimated surface in the crate.
//!
//! Cells are square and indexed row-major with row 0 at the bottom
//! (smallest `y`). A cell belongs to the window when its centre does; all
//! integrals are midpoint sums over those cells.

use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::geom::{euclid_shift_intersection, Point, Rect, ShiftVector, Window};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry<F> {
    pub x0: F,
    pub y0: F,
    pub cell: F,
    pub ncols: usize,
    pub nrows: usize,
}

impl<F: Scalar> GridGeometry<F> {
    pub fn new(x0: F, y0: F, cell: F, ncols: usize, nrows: usize) -> Result<Self> {
        if !(cell > F::zero()) || !cell.is_finite() || ncols == 0 || nrows == 0 {
            return Err(Error::InvalidParameter("grid needs a positive cell size and at least one cell".into()));
        }
        Ok(Self { x0, y0, cell, ncols, nrows })
    }

    /// Grid of `ncols` columns that tiles `rect` exactly with square cells.
    pub fn tiling(rect: &Rect<F>, ncols: usize) -> Result<Self> {
        if ncols == 0 {
            return Err(Error::InvalidParameter("grid needs at least one column".into()));
        }
        let cell = rect.width() / F::from_usize_lossy(ncols);
        let rows = (rect.height() / cell).round();
        let nrows = rows.to_usize().unwrap_or(0).max(1);
        let g = Self::new(rect.x0, rect.y0, cell, ncols, nrows)?;
        if !g.tiles(rect) {
            return Err(Error::GridMismatch(format!(
                "a {ncols}-column grid of square cells cannot tile a {} x {} rectangle",
                rect.width(),
                rect.height()
            )));
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> F {
        self.cell * self.cell
    }

    pub fn bounds(&self) -> Rect<F> {
        Rect {
            x0: self.x0,
            y0: self.y0,
            x1: self.x0 + self.cell * F::from_usize_lossy(self.ncols),
            y1: self.y0 + self.cell * F::from_usize_lossy(self.nrows),
        }
    }

    fn tol(&self) -> F {
        self.cell * F::lit(1e-9)
    }

    /// True when the grid rectangle coincides with `rect` up to round-off.
    pub fn tiles(&self, rect: &Rect<F>) -> bool {
        let b = self.bounds();
        let t = self.tol();
        (b.x0 - rect.x0).abs() <= t
            && (b.y0 - rect.y0).abs() <= t
            && (b.x1 - rect.x1).abs() <= t
            && (b.y1 - rect.y1).abs() <= t
    }

    pub fn covers(&self, window: &Window<F>) -> bool {
        let b = self.bounds();
        let w = window.bbox();
        let t = self.tol();
        w.x0 >= b.x0 - t && w.y0 >= b.y0 - t && w.x1 <= b.x1 + t && w.y1 <= b.y1 + t
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.ncols + col
    }

    pub fn center(&self, col: usize, row: usize) -> Point<F> {
        let half = F::lit(0.5);
        Point::new(
            self.x0 + (F::from_usize_lossy(col) + half) * self.cell,
            self.y0 + (F::from_usize_lossy(row) + half) * self.cell,
        )
    }

    pub fn center_of(&self, idx: usize) -> Point<F> {
        self.center(idx % self.ncols, idx / self.ncols)
    }

    fn axis_index(&self, v: F, origin: F, n: usize) -> Option<usize> {
        let t = (v - origin) / self.cell;
        if t < -F::lit(1e-9) {
            return None;
        }
        let i = t.floor().max(F::zero()).to_usize()?;
        if i < n {
            Some(i)
        } else if t <= F::from_usize_lossy(n) + F::lit(1e-9) {
            Some(n - 1)
        } else {
            None
        }
    }

    /// `(col, row)` of the cell containing `p`; the upper grid edges belong to
    /// the last column/row.
    pub fn cell_of(&self, p: Point<F>) -> Option<(usize, usize)> {
        Some((self.axis_index(p.x, self.x0, self.ncols)?, self.axis_index(p.y, self.y0, self.nrows)?))
    }

    pub fn index_of(&self, p: Point<F>) -> Option<usize> {
        self.cell_of(p).map(|(c, r)| self.index(c, r))
    }

    /// Rounds a shift to whole cells: returns the cell offsets and the
    /// snapped vector.
    pub fn snap(&self, v: ShiftVector<F>) -> (i64, i64, ShiftVector<F>) {
        let kx = (v.dx / self.cell).round().to_i64().unwrap_or(0);
        let ky = (v.dy / self.cell).round().to_i64().unwrap_or(0);
        let snapped = ShiftVector { dx: F::from_i64(kx).unwrap() * self.cell, dy: F::from_i64(ky).unwrap() * self.cell };
        (kx, ky, snapped)
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.ncols == other.ncols
            && self.nrows == other.nrows
            && (self.cell - other.cell).abs() <= self.tol()
            && (self.x0 - other.x0).abs() <= self.tol()
            && (self.y0 - other.y0).abs() <= self.tol()
    }

    /// Cells whose centres lie in `window`.
    pub fn mask(&self, window: &Window<F>) -> Vec<bool> {
        (0..self.len()).map(|i| window.contains(self.center_of(i))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMode {
    Torus,
    Euclid,
}

/// Scalar raster over an observation window.
#[derive(Debug, Clone)]
pub struct ScalarField<F: Scalar> {
    geom: GridGeometry<F>,
    window: Window<F>,
    values: Vec<F>,
    mask: Arc<[bool]>,
}

impl<F: Scalar> ScalarField<F> {
    /// Builds a field; values outside the window mask may be NaN, values
    /// inside must be finite.
    pub fn new(geom: GridGeometry<F>, window: Window<F>, values: Vec<F>) -> Result<Self> {
        if values.len() != geom.len() {
            return Err(Error::LengthMismatch(values.len(), geom.len()));
        }
        if !geom.covers(&window) {
            return Err(Error::GridMismatch("grid does not cover the window".into()));
        }
        let mask: Arc<[bool]> = geom.mask(&window).into();
        if let Some(i) = (0..values.len()).find(|&i| mask[i] && !values[i].is_finite()) {
            let c = geom.center_of(i);
            return Err(Error::InvalidParameter(format!(
                "non-finite field value at ({}, {}) inside the window",
                c.x, c.y
            )));
        }
        Ok(Self { geom, window, values, mask })
    }

    pub fn from_fn(geom: GridGeometry<F>, window: Window<F>, f: impl Fn(Point<F>) -> F) -> Result<Self> {
        let values = (0..geom.len()).map(|i| f(geom.center_of(i))).collect();
        Self::new(geom, window, values)
    }

    pub fn constant(geom: GridGeometry<F>, window: Window<F>, c: F) -> Result<Self> {
        Self::new(geom, window, vec![c; geom.len()])
    }

    /// Field on the same grid and window with new values (crate-internal,
    /// skips validation).
    pub(crate) fn with_values(&self, values: Vec<F>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self { geom: self.geom, window: self.window.clone(), values, mask: self.mask.clone() }
    }

    pub fn geom(&self) -> &GridGeometry<F> {
        &self.geom
    }

    pub fn window(&self) -> &Window<F> {
        &self.window
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn into_values(self) -> Vec<F> {
        self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, col: usize, row: usize) -> F {
        self.values[self.geom.index(col, row)]
    }

    /// Nearest-cell value at a location inside the window.
    pub fn lookup(&self, p: Point<F>) -> Result<F> {
        if !self.window.contains(p) {
            return Err(Error::OutOfDomain { x: p.x.as_f64(), y: p.y.as_f64() });
        }
        self.cell_value(p).ok_or(Error::OutOfDomain { x: p.x.as_f64(), y: p.y.as_f64() })
    }

    /// Value of the grid cell containing `p`, without the window check.
    pub(crate) fn cell_value(&self, p: Point<F>) -> Option<F> {
        self.geom.index_of(p).map(|i| self.values[i])
    }

    /// Midpoint-rule integral over the field's own window.
    pub fn integral(&self) -> F {
        let a = self.geom.cell_area();
        self.values.iter().zip(self.mask.iter()).filter(|(_, &m)| m).map(|(&v, _)| v).sum::<F>() * a
    }

    /// Midpoint-rule integral over the cells whose centres lie in `over`.
    pub fn integrate(&self, over: &Window<F>) -> F {
        if *over == self.window {
            return self.integral();
        }
        let a = self.geom.cell_area();
        let b = over.bbox();
        let mut sum = F::zero();
        for (i, &v) in self.values.iter().enumerate() {
            let c = self.geom.center_of(i);
            if c.x < b.x0 || c.x > b.x1 || c.y < b.y0 || c.y > b.y1 {
                continue;
            }
            if over.contains(c) {
                sum = sum + v;
            }
        }
        sum * a
    }

    /// Mean value over the window cells.
    pub fn mean(&self) -> F {
        let (s, n) = self
            .values
            .iter()
            .zip(self.mask.iter())
            .filter(|(_, &m)| m)
            .fold((F::zero(), 0usize), |(s, n), (&v, _)| (s + v, n + 1));
        s / F::from_usize_lossy(n.max(1))
    }

    pub fn min_max(&self) -> (F, F) {
        self.window_values().fold((F::infinity(), F::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    /// Values of the cells inside the window.
    pub fn window_values(&self) -> impl Iterator<Item = F> + '_ {
        self.values.iter().zip(self.mask.iter()).filter(|(_, &m)| m).map(|(&v, _)| v)
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(F, F) -> F) -> Result<Self> {
        if !self.geom.same_as(&other.geom) {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(self.with_values(self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect()))
    }

    /// Values with everything outside the window set to zero.
    pub fn masked_values(&self) -> Vec<F> {
        self.values.iter().zip(self.mask.iter()).map(|(&v, &m)| if m { v } else { F::zero() }).collect()
    }

    /// Sample variance of the window cells.
    pub fn variance(&self) -> F {
        let m = self.mean();
        let (s, n) = self.window_values().fold((F::zero(), 0usize), |(s, n), v| (s + (v - m) * (v - m), n + 1));
        s / F::from_usize_lossy(n.max(2) - 1)
    }

    /// Replaces the window (same grid); used to restrict a field to a
    /// sub-window.
    pub fn restrict(&self, window: Window<F>) -> Result<Self> {
        Self::new(self.geom, window, self.values.clone())
    }

    /// `(Ψ + v)(u) = Ψ(u − v)` with `v` snapped to whole cells.
    pub fn shift(&self, v: ShiftVector<F>, mode: ShiftMode) -> Result<Self> {
        let (kx, ky, snapped) = self.geom.snap(v);
        let (nx, ny) = (self.geom.ncols as i64, self.geom.nrows as i64);
        match mode {
            ShiftMode::Torus => {
                let rect = self.window.as_rect().ok_or_else(|| {
                    Error::UnsupportedGeometry("torus shifts need a rectangular window".into())
                })?;
                if !self.geom.tiles(rect) {
                    return Err(Error::GridMismatch("torus shifts need a grid that tiles the window".into()));
                }
                let mut out = vec![F::zero(); self.values.len()];
                for r in 0..ny {
                    let sr = (r - ky).rem_euclid(ny) as usize;
                    for c in 0..nx {
                        let sc = (c - kx).rem_euclid(nx) as usize;
                        out[self.geom.index(c as usize, r as usize)] = self.values[self.geom.index(sc, sr)];
                    }
                }
                Ok(self.with_values(out))
            }
            ShiftMode::Euclid => {
                let wi = euclid_shift_intersection(&self.window, snapped)?;
                let mask = self.geom.mask(&wi);
                let mut out = vec![F::nan(); self.values.len()];
                for r in 0..ny {
                    for c in 0..nx {
                        let i = self.geom.index(c as usize, r as usize);
                        let (sc, sr) = (c - kx, r - ky);
                        if mask[i] && (0..nx).contains(&sc) && (0..ny).contains(&sr) {
                            out[i] = self.values[self.geom.index(sc as usize, sr as usize)];
                        }
                    }
                }
                Ok(Self { geom: self.geom, window: wi, values: out, mask: mask.into() })
            }
        }
    }
}

pub fn lookup<F: Scalar>(field: &ScalarField<F>, location: Point<F>) -> Result<F> {
    field.lookup(location)
}

pub fn integrate<F: Scalar>(field: &ScalarField<F>, over: &Window<F>) -> F {
    field.integrate(over)
}

pub fn shift_field<F: Scalar>(field: &ScalarField<F>, v: ShiftVector<F>, mode: ShiftMode) -> Result<ScalarField<F>> {
    field.shift(v, mode)
}

/// `Σ_u a(u)·b(u − k)` for every whole-cell shift `k`, with values outside
/// the window (and, in Euclidean mode, outside the grid) taken as zero.
#[derive(Debug, Clone)]
pub struct ShiftCorrelation<F> {
    mode: ShiftMode,
    nx: usize,
    ny: usize,
    table: Vec<F>,
}

impl<F: Scalar> ShiftCorrelation<F> {
    pub fn new(a: &ScalarField<F>, b: &ScalarField<F>, mode: ShiftMode) -> Result<Self> {
        if !a.geom.same_as(&b.geom) {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        let (gx, gy) = (a.geom.ncols, a.geom.nrows);
        let (nx, ny) = match mode {
            ShiftMode::Torus => (gx, gy),
            ShiftMode::Euclid => (2 * gx, 2 * gy),
        };
        let fft = Fft2::new(nx, ny);
        let embed = |vals: Vec<F>| {
            let mut buf = vec![Complex::new(F::zero(), F::zero()); nx * ny];
            for r in 0..gy {
                for c in 0..gx {
                    buf[r * nx + c].re = vals[r * gx + c];
                }
            }
            buf
        };
        let mut fa = embed(a.masked_values());
        let mut fb = embed(b.masked_values());
        fft.forward(&mut fa);
        fft.forward(&mut fb);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x = *x * y.conj();
        }
        fft.inverse(&mut fa);
        Ok(Self { mode, nx, ny, table: fa.into_iter().map(|z| z.re).collect() })
    }

    pub fn get(&self, kx: i64, ky: i64) -> F {
        let c = kx.rem_euclid(self.nx as i64) as usize;
        let r = ky.rem_euclid(self.ny as i64) as usize;
        self.table[r * self.nx + c]
    }

    pub fn mode(&self) -> ShiftMode {
        self.mode
    }
}
