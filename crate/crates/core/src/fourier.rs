//! Two-dimensional FFTs over `ndarray` matrices, built on row/column passes
//! of `rustfft`.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Zip};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Planned 2-D transform for a fixed `height × width` grid.
#[derive(Clone)]
pub struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "empty FFT grid");
        Fft2 {
            width,
            height,
            row_fwd: plan(width, false),
            row_inv: plan(width, true),
            col_fwd: plan(height, false),
            col_inv: plan(height, true),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn run(&self, data: &mut Array2<Complex64>, row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.dim(), (self.height, self.width), "FFT grid mismatch");
        let (w, h) = (self.width, self.height);
        if !data.is_standard_layout() {
            *data = data.as_standard_layout().into_owned();
        }
        let buf = data.as_slice_mut().expect("standard layout");
        let scratch_len = row.get_inplace_scratch_len().max(col.get_inplace_scratch_len());
        let mut scratch = vec![Complex64::default(); scratch_len];
        row.process_with_scratch(buf, &mut scratch);
        // transpose to column-major, transform columns, transpose back
        let mut t = vec![Complex64::default(); buf.len()];
        for y in 0..h {
            for x in 0..w {
                t[x * h + y] = buf[y * w + x];
            }
        }
        col.process_with_scratch(&mut t, &mut scratch);
        for x in 0..w {
            for y in 0..h {
                buf[y * w + x] = t[x * h + y];
            }
        }
    }

    pub fn forward(&self, data: &mut Array2<Complex64>) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    /// Inverse transform, normalized by `1/N`.
    pub fn inverse(&self, data: &mut Array2<Complex64>) {
        self.run(data, &self.row_inv, &self.col_inv);
        let n = (self.width * self.height) as f64;
        data.mapv_inplace(|v| v / n);
    }

    pub fn forward_real(&self, data: ArrayView2<f64>) -> Array2<Complex64> {
        let mut c = data.mapv(|v| Complex64::new(v, 0.0));
        self.forward(&mut c);
        c
    }

    /// Spectra of two real grids from a single complex transform of
    /// `a + i·b`, using the conjugate symmetry of real-input spectra.
    pub fn forward_real_pair(&self, a: ArrayView2<f64>, b: ArrayView2<f64>) -> (Array2<Complex64>, Array2<Complex64>) {
        let (h, w) = (self.height, self.width);
        let mut z = Array2::<Complex64>::zeros((h, w));
        Zip::from(&mut z).and(a).and(b).for_each(|z, a, b| *z = Complex64::new(*a, *b));
        self.forward(&mut z);
        let zs = z.as_slice().expect("standard layout");
        let mut fa = vec![Complex64::default(); h * w];
        let mut fb = vec![Complex64::default(); h * w];
        let half = Complex64::new(0.0, -0.5);
        for y in 0..h {
            let my = if y == 0 { 0 } else { h - y };
            for x in 0..w {
                let mx = if x == 0 { 0 } else { w - x };
                let v = zs[y * w + x];
                let m = zs[my * w + mx].conj();
                fa[y * w + x] = (v + m) * 0.5;
                fb[y * w + x] = (v - m) * half;
            }
        }
        let shape = (h, w);
        (
            Array2::from_shape_vec(shape, fa).expect("sized"),
            Array2::from_shape_vec(shape, fb).expect("sized"),
        )
    }

    /// Inverse transform keeping the real part. Also returns the largest
    /// discarded imaginary magnitude.
    pub fn inverse_real(&self, mut data: Array2<Complex64>) -> (Array2<f64>, f64) {
        self.inverse(&mut data);
        let residue = data.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
        (data.mapv(|v| v.re), residue)
    }
}
