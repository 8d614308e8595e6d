//! Two-dimensional complex FFT on row-major grids, built from rustfft's 1-D
//! transforms.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Scalar;

pub(crate) struct Fft2<F: Scalar> {
    nx: usize,
    ny: usize,
    row_fwd: Arc<dyn Fft<F>>,
    row_inv: Arc<dyn Fft<F>>,
    col_fwd: Arc<dyn Fft<F>>,
    col_inv: Arc<dyn Fft<F>>,
}

impl<F: Scalar> std::fmt::Debug for Fft2<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.nx, self.ny)
    }
}

impl<F: Scalar> Fft2<F> {
    /// Transform for `ny` rows of `nx` columns.
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            ny,
            row_fwd: planner.plan_fft_forward(nx),
            row_inv: planner.plan_fft_inverse(nx),
            col_fwd: planner.plan_fft_forward(ny),
            col_inv: planner.plan_fft_inverse(ny),
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn forward(&self, data: &mut [Complex<F>]) {
        self.run(data, false);
    }

    /// Inverse transform including the `1/(nx·ny)` normalisation.
    pub fn inverse(&self, data: &mut [Complex<F>]) {
        self.run(data, true);
        let scale = F::one() / F::from_usize_lossy(self.len());
        for z in data.iter_mut() {
            *z = *z * scale;
        }
    }

    fn run(&self, data: &mut [Complex<F>], inverse: bool) {
        assert_eq!(data.len(), self.len());
        let (row, col) = if inverse { (&self.row_inv, &self.col_inv) } else { (&self.row_fwd, &self.col_fwd) };
        row.process(data);
        let mut t = vec![Complex::new(F::zero(), F::zero()); self.len()];
        transpose(data, &mut t, self.nx, self.ny);
        col.process(&mut t);
        transpose(&t, data, self.ny, self.nx);
    }
}

/// `src` has `rows` rows of `cols` entries; `dst` receives `cols` rows of `rows`.
fn transpose<T: Copy>(src: &[T], dst: &mut [T], cols: usize, rows: usize) {
    const B: usize = 16;
    for rb in (0..rows).step_by(B) {
        for cb in (0..cols).step_by(B) {
            for r in rb..(rb + B).min(rows) {
                for c in cb..(cb + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}
