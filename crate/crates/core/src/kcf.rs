//! Single-object kernelized correlation filter with a Gaussian kernel.
//!
//! The filter is a kernel ridge regression trained on every cyclic shift of
//! one windowed feature patch. Because the kernel matrix over cyclic shifts
//! is circulant, training and detection reduce to elementwise operations in
//! the Fourier domain.

use image::RgbImage;
use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{self, ColorNamesTable, FeatureError, FeaturePatch};
use crate::fourier::Fft2;
use crate::geometry::{BoundingBox, GeometryError};

const MIN_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum KcfError {
    #[error("feature shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
    #[error("tracker lost: {0}")]
    Lost(#[from] FeatureError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KcfParams {
    /// Gaussian kernel bandwidth.
    pub sigma_kernel: f64,
    /// Ridge regularizer.
    pub lambda: f64,
    /// Model interpolation factor for online updates.
    pub learning_rate: f64,
    /// Regression target width relative to the object size.
    pub output_sigma_factor: f64,
    /// Search window inflation: the window is `(1 + padding)` times the target.
    pub padding: f64,
    /// Feature cell size in pixels.
    pub cell: u32,
}

impl Default for KcfParams {
    fn default() -> Self {
        KcfParams {
            sigma_kernel: 0.5,
            lambda: 1e-4,
            learning_rate: 0.02,
            output_sigma_factor: 0.1,
            padding: 1.0,
            cell: 1,
        }
    }
}

impl KcfParams {
    pub fn validate(&self) -> Result<(), KcfError> {
        let bad = |m: &str| Err(KcfError::InvalidParams(m.to_string()));
        if !(self.sigma_kernel > 0.0) {
            return bad("sigma_kernel must be > 0");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return bad("learning_rate must lie in [0, 1]");
        }
        if !(self.output_sigma_factor > 0.0) {
            return bad("output_sigma_factor must be > 0");
        }
        if !(self.padding >= 0.0) || !self.padding.is_finite() {
            return bad("padding must be >= 0");
        }
        if self.cell == 0 {
            return bad("cell must be >= 1");
        }
        Ok(())
    }
}

/// Detection output.
#[derive(Debug, Clone)]
pub struct Response {
    pub map: Array2<f64>,
    pub peak_value: f64,
    /// Peak displacement in pixels, relative to the window center.
    pub peak_offset: (f64, f64),
    /// Largest imaginary magnitude dropped when taking the real response.
    pub imag_residue: f64,
}

/// Per-channel spectra of a feature patch together with its squared norm.
#[derive(Debug, Clone)]
struct Spectrum {
    channels: Vec<Array2<Complex64>>,
    energy: f64,
}

impl Spectrum {
    fn of(fft: &Fft2, patch: &FeaturePatch) -> Self {
        Spectrum {
            channels: real_spectra(fft, patch),
            energy: patch.data.iter().map(|v| v * v).sum(),
        }
    }
}

/// Per-channel spectra, two channels per complex transform.
fn real_spectra(fft: &Fft2, patch: &FeaturePatch) -> Vec<Array2<Complex64>> {
    let chans: Vec<_> = patch.data.outer_iter().collect();
    let mut out = Vec::with_capacity(chans.len());
    for pair in chans.chunks(2) {
        match pair {
            [a, b] => {
                let (fa, fb) = fft.forward_real_pair(a.view(), b.view());
                out.push(fa);
                out.push(fb);
            }
            [a] => out.push(fft.forward_real(a.view())),
            _ => unreachable!(),
        }
    }
    out
}

/// Gaussian kernel between `x` and every cyclic shift of `z`, from spectra.
fn kernel_from_spectra(fft: &Fft2, x: &Spectrum, z: &Spectrum, sigma: f64, numel: usize) -> Array2<f64> {
    let mut cross = Array2::<Complex64>::zeros((fft.height(), fft.width()));
    for (xc, zc) in x.channels.iter().zip(&z.channels) {
        Zip::from(&mut cross)
            .and(xc)
            .and(zc)
            .for_each(|acc, a, b| *acc += a.conj() * b);
    }
    let (cross, _) = fft.inverse_real(cross);
    let scale = 1.0 / (sigma * sigma * numel as f64);
    cross.mapv(|c| (-((x.energy + z.energy - 2.0 * c).max(0.0)) * scale).exp())
}

fn check_shape(expected: &FeaturePatch, got: &FeaturePatch) -> Result<(), KcfError> {
    if expected.shape() != got.shape() {
        return Err(KcfError::ShapeMismatch {
            expected: expected.shape(),
            got: got.shape(),
        });
    }
    Ok(())
}

/// Gaussian kernel correlation of `x` with all cyclic shifts of `z`:
/// entry `s` is `exp(-‖x - shift_s(z)‖² / (σ² N))` where `N` is the number
/// of feature elements and `shift_s(z)[p] = z[p + s]`.
pub fn gaussian_correlation(x: &FeaturePatch, z: &FeaturePatch, sigma: f64) -> Result<Array2<f64>, KcfError> {
    check_shape(x, z)?;
    let fft = Fft2::new(x.width(), x.height());
    Ok(kernel_from_spectra(
        &fft,
        &Spectrum::of(&fft, x),
        &Spectrum::of(&fft, z),
        sigma,
        x.data.len(),
    ))
}

/// Regression target: unit-peak Gaussian at shift (0, 0), wrapped cyclically.
pub fn gaussian_target(width: usize, height: usize, sigma: f64) -> Array2<f64> {
    let wrap = |i: usize, n: usize| -> f64 {
        if i <= n / 2 {
            i as f64
        } else {
            i as f64 - n as f64
        }
    };
    Array2::from_shape_fn((height, width), |(y, x)| {
        let (dy, dx) = (wrap(y, height), wrap(x, width));
        (-0.5 * (dx * dx + dy * dy) / (sigma * sigma)).exp()
    })
}

#[derive(Debug, Clone)]
pub struct KcfModel {
    /// Dual coefficients in the Fourier domain.
    pub alphaf: Array2<Complex64>,
    /// Learned appearance.
    pub template: FeaturePatch,
    /// Search window size in pixels.
    pub window_size: (u32, u32),
    /// Tracked object size in pixels.
    pub target_size: (u32, u32),
    pub params: KcfParams,
    template_spectrum: Spectrum,
    target_f: Array2<Complex64>,
    fft: Fft2,
}

/// Window size for a target: inflated by the padding and rounded to whole cells.
pub fn window_size_for(target_w: u32, target_h: u32, params: &KcfParams) -> (u32, u32) {
    let (w, h) = features::padded_size(target_w as i32, target_h as i32, params.padding);
    let cell = params.cell as f64;
    let snap = |n: i32| ((n as f64 / cell).round().max(1.0) * cell) as u32;
    (snap(w), snap(h))
}

/// Closed-form ridge regression over all cyclic shifts of `patch`.
fn solve(fft: &Fft2, spectrum: &Spectrum, numel: usize, target_f: &Array2<Complex64>, params: &KcfParams) -> Array2<Complex64> {
    let k = kernel_from_spectra(fft, spectrum, spectrum, params.sigma_kernel, numel);
    let kf = fft.forward_real(k.view());
    Zip::from(target_f).and(&kf).map_collect(|y, k| {
        let mut den = k + params.lambda;
        if den.norm() < MIN_DENOMINATOR {
            den = Complex64::new(MIN_DENOMINATOR, 0.0);
        }
        y / den
    })
}

/// Train a fresh model on a windowed feature patch.
pub fn train(patch: &FeaturePatch, target_size: (u32, u32), params: &KcfParams) -> KcfModel {
    let (cw, ch) = (patch.width(), patch.height());
    let fft = Fft2::new(cw, ch);
    let cell = params.cell as f64;
    let sigma = params.output_sigma_factor * ((target_size.0 as f64) * (target_size.1 as f64)).sqrt() / cell;
    let target_f = fft.forward_real(gaussian_target(cw, ch, sigma).view());
    let spectrum = Spectrum::of(&fft, patch);
    let alphaf = solve(&fft, &spectrum, patch.data.len(), &target_f, params);
    KcfModel {
        alphaf,
        template: patch.clone(),
        window_size: (cw as u32 * params.cell, ch as u32 * params.cell),
        target_size,
        params: *params,
        template_spectrum: spectrum,
        target_f,
        fft,
    }
}

impl KcfModel {
    /// Train on the window around `bbox` in `frame`.
    pub fn initialize(frame: &RgbImage, bbox: BoundingBox, table: &ColorNamesTable, params: &KcfParams) -> Result<Self, KcfError> {
        params.validate()?;
        let target = (bbox.w() as u32, bbox.h() as u32);
        let (ww, wh) = window_size_for(target.0, target.1, params);
        let region = bbox.resized_about_center(ww as i32, wh as i32)?;
        let patch = features::extract_region(frame, region)?;
        let feats = features::featurize(&patch, table, params.cell)?;
        Ok(train(&feats, target, params))
    }

    pub fn detect(&self, patch: &FeaturePatch) -> Result<Response, KcfError> {
        check_shape(&self.template, patch)?;
        let zs = Spectrum::of(&self.fft, patch);
        let k = kernel_from_spectra(
            &self.fft,
            &self.template_spectrum,
            &zs,
            self.params.sigma_kernel,
            patch.data.len(),
        );
        let mut kf = self.fft.forward_real(k.view());
        Zip::from(&mut kf).and(&self.alphaf).for_each(|k, a| *k *= a);
        let (map, imag_residue) = self.fft.inverse_real(kf);

        let (h, w) = map.dim();
        let (mut best, mut arg) = (f64::NEG_INFINITY, (0, 0));
        for ((y, x), &v) in map.indexed_iter() {
            if v > best {
                best = v;
                arg = (y, x);
            }
        }
        let wrap = |i: usize, n: usize| if i > n / 2 { i as f64 - n as f64 } else { i as f64 };
        let cell = self.params.cell as f64;
        Ok(Response {
            peak_value: best,
            peak_offset: (wrap(arg.1, w) * cell, wrap(arg.0, h) * cell),
            imag_residue,
            map,
        })
    }

    /// Blend the model toward one trained on `patch` by the learning rate.
    pub fn update(&self, patch: &FeaturePatch) -> Result<KcfModel, KcfError> {
        check_shape(&self.template, patch)?;
        let rate = self.params.learning_rate;
        let keep = 1.0 - rate;
        let fresh = Spectrum::of(&self.fft, patch);
        let fresh_alphaf = solve(&self.fft, &fresh, patch.data.len(), &self.target_f, &self.params);

        let alphaf = Zip::from(&self.alphaf)
            .and(&fresh_alphaf)
            .map_collect(|o, n| o * keep + n * rate);
        let data = Zip::from(&self.template.data)
            .and(&patch.data)
            .map_collect(|o, n| keep * o + rate * n);
        let channels = self
            .template_spectrum
            .channels
            .iter()
            .zip(&fresh.channels)
            .map(|(o, n)| Zip::from(o).and(n).map_collect(|o, n| o * keep + n * rate))
            .collect();
        let template = FeaturePatch { data };
        let energy = template.data.iter().map(|v| v * v).sum();
        Ok(KcfModel {
            alphaf,
            template,
            template_spectrum: Spectrum { channels, energy },
            ..self.clone()
        })
    }

    /// Search the window around `prev_box` and return the target-size box
    /// moved to the response peak. The model is not changed.
    pub fn locate(&self, frame: &RgbImage, prev_box: BoundingBox, table: &ColorNamesTable) -> Result<(BoundingBox, Response), KcfError> {
        let (ww, wh) = (self.window_size.0 as i32, self.window_size.1 as i32);
        let (tw, th) = (self.target_size.0 as i32, self.target_size.1 as i32);
        let window = prev_box.resized_about_center(ww, wh)?;
        let z = features::featurize(&features::extract_region(frame, window)?, table, self.params.cell)?;
        let response = self.detect(&z)?;
        let (dx, dy) = response.peak_offset;
        let moved = prev_box
            .resized_about_center(tw, th)?
            .translate(dx.round() as i32, dy.round() as i32);
        Ok((moved, response))
    }

    /// Blend in the appearance of the window centered on `bbox`.
    pub fn update_at(&self, frame: &RgbImage, bbox: BoundingBox, table: &ColorNamesTable) -> Result<KcfModel, KcfError> {
        let window = bbox.resized_about_center(self.window_size.0 as i32, self.window_size.1 as i32)?;
        let x = features::featurize(&features::extract_region(frame, window)?, table, self.params.cell)?;
        self.update(&x)
    }

    /// Track one frame: [`locate`](Self::locate), then update the model at
    /// the new location. The returned box always has the model's target size.
    pub fn step(
        &self,
        frame: &RgbImage,
        prev_box: BoundingBox,
        table: &ColorNamesTable,
    ) -> Result<(BoundingBox, Response, KcfModel), KcfError> {
        let (moved, response) = self.locate(frame, prev_box, table)?;
        let model = self.update_at(frame, moved, table)?;
        Ok((moved, response, model))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_patch(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeaturePatch {
        FeaturePatch {
            data: Array3::from_shape_fn((c, h, w), |_| rng.random_range(-0.5..0.5)),
        }
    }

    fn shifted(p: &FeaturePatch, sy: usize, sx: usize) -> FeaturePatch {
        let (_, h, w) = p.shape();
        FeaturePatch {
            data: Array3::from_shape_fn(p.shape(), |(c, y, x)| p.data[[c, (y + sy) % h, (x + sx) % w]]),
        }
    }

    #[test]
    fn kernel_self_correlation_peaks_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_patch(&mut rng, 3, 6, 5);
        let k = gaussian_correlation(&x, &x, 0.5).unwrap();
        assert!((k[[0, 0]] - 1.0).abs() < 1e-12);
        assert!(k.iter().all(|v| *v > 0.0 && *v <= 1.0 + 1e-12));
    }

    #[test]
    fn kernel_is_shift_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_patch(&mut rng, 2, 5, 7);
        let z = shifted(&x, 0, 1);
        let kxx = gaussian_correlation(&x, &x, 0.7).unwrap();
        let kxz = gaussian_correlation(&x, &z, 0.7).unwrap();
        let (h, w) = kxx.dim();
        for y in 0..h {
            for xx in 0..w {
                // z = shift by one column, so the kernel map moves back by one
                assert!((kxz[[y, xx]] - kxx[[y, (xx + 1) % w]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_patch(&mut rng, 1, 4, 4);
        let z = random_patch(&mut rng, 1, 4, 5);
        assert!(matches!(gaussian_correlation(&x, &z, 0.5), Err(KcfError::ShapeMismatch { .. })));
        let m = train(&x, (2, 2), &KcfParams::default());
        assert!(m.detect(&z).is_err());
        assert!(m.update(&z).is_err());
    }

    #[test]
    fn training_sample_interpolated_without_regularization() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_patch(&mut rng, 11, 12, 10);
        let params = KcfParams { lambda: 0.0, ..Default::default() };
        let m = train(&x, (5, 6), &params);
        let r = m.detect(&x).unwrap();
        assert_eq!(r.peak_offset, (0.0, 0.0));
        assert!((r.peak_value - 1.0).abs() < 1e-6);
        assert!(r.imag_residue < 1e-6);
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_patch(&mut rng, 4, 8, 8);
        let a = train(&x, (4, 4), &KcfParams::default());
        let b = train(&x, (4, 4), &KcfParams::default());
        assert_eq!(a.alphaf, b.alphaf);
    }

    #[test]
    fn detect_recovers_circular_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_patch(&mut rng, 3, 16, 20);
        let m = train(&x, (10, 8), &KcfParams::default());
        // content moved right by 3 => z[p] = x[p - 3]
        let z = shifted(&x, 0, 20 - 3);
        let r = m.detect(&z).unwrap();
        assert_eq!(r.peak_offset, (3.0, 0.0));
        let z = shifted(&x, 2, 0);
        assert_eq!(m.detect(&z).unwrap().peak_offset, (0.0, -2.0));
    }

    #[test]
    fn noise_response_is_weaker_than_training_peak() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_patch(&mut rng, 11, 16, 16);
        let noise = random_patch(&mut rng, 11, 16, 16);
        let m = train(&x, (8, 8), &KcfParams::default());
        let own = m.detect(&x).unwrap().peak_value;
        let other = m.detect(&noise).unwrap().peak_value;
        assert!(other < 0.5 * own, "noise {other} vs own {own}");
    }

    #[test]
    fn update_rate_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_patch(&mut rng, 2, 8, 8);
        let y = random_patch(&mut rng, 2, 8, 8);
        let frozen = KcfParams { learning_rate: 0.0, ..Default::default() };
        let m = train(&x, (4, 4), &frozen);
        let u = m.update(&y).unwrap();
        assert_eq!(u.alphaf, m.alphaf);
        assert_eq!(u.template, m.template);

        let replace = KcfParams { learning_rate: 1.0, ..Default::default() };
        let m = train(&x, (4, 4), &replace);
        let u = m.update(&y).unwrap();
        let fresh = train(&y, (4, 4), &replace);
        assert_eq!(u.alphaf, fresh.alphaf);
        assert_eq!(u.template, fresh.template);
        assert_eq!(u.window_size, m.window_size);
        assert_eq!(u.target_size, m.target_size);
    }

    #[test]
    fn repeated_updates_converge_monotonically() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_patch(&mut rng, 3, 8, 8);
        let y = random_patch(&mut rng, 3, 8, 8);
        let mut m = train(&x, (4, 4), &KcfParams::default());
        let dist = |m: &KcfModel| (&m.template.data - &y.data).mapv(|v| v * v).sum().sqrt();
        let d0 = dist(&m);
        let mut prev = d0;
        for _ in 0..50 {
            m = m.update(&y).unwrap();
            let d = dist(&m);
            assert!(d < prev);
            prev = d;
        }
        // geometric decay: (1 - 0.02)^50
        assert!((prev - d0 * 0.98f64.powi(50)).abs() < 1e-9);
    }

    fn scene(w: u32, h: u32, obj: BoundingBox) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            let (x, y) = (x as i32, y as i32);
            if x >= obj.x() && x < obj.right() && y >= obj.y() && y < obj.bottom() {
                // textured object so the gray channel carries structure
                Rgb([200, ((x - obj.x()) * 9 % 90) as u8 + 40, 30])
            } else {
                Rgb([90, 90, 90])
            }
        })
    }

    #[test]
    fn step_on_identical_frame_keeps_box() {
        let table = ColorNamesTable::fallback();
        let obj = BoundingBox::new(40, 30, 24, 16).unwrap();
        let frame = scene(128, 96, obj);
        let m = KcfModel::initialize(&frame, obj, &table, &KcfParams::default()).unwrap();
        assert_eq!(m.window_size, (48, 32));
        let mut model = m;
        for _ in 0..10 {
            let (b, _, next) = model.step(&frame, obj, &table).unwrap();
            assert_eq!(b, obj);
            model = next;
        }
    }

    #[test]
    fn step_follows_horizontal_motion() {
        let table = ColorNamesTable::fallback();
        let start = BoundingBox::new(20, 30, 24, 16).unwrap();
        let mut model = KcfModel::initialize(&scene(160, 96, start), start, &table, &KcfParams::default()).unwrap();
        let mut tracked = start;
        for t in 1..15 {
            let truth = start.translate(2 * t, 0);
            let (b, _, next) = model.step(&scene(160, 96, truth), tracked, &table).unwrap();
            assert!((b.x() - tracked.x() - 2).abs() <= 1, "frame {t}: {b:?} from {tracked:?}");
            assert_eq!((b.w(), b.h()), (24, 16));
            tracked = b;
            model = next;
        }
    }

    #[test]
    fn step_outside_frame_reports_lost() {
        let table = ColorNamesTable::fallback();
        let obj = BoundingBox::new(10, 10, 8, 8).unwrap();
        let frame = scene(64, 64, obj);
        let m = KcfModel::initialize(&frame, obj, &table, &KcfParams::default()).unwrap();
        let far = BoundingBox::new(500, 500, 8, 8).unwrap();
        assert!(matches!(m.step(&frame, far, &table), Err(KcfError::Lost(_))));
    }

    #[test]
    fn params_validation() {
        assert!(KcfParams::default().validate().is_ok());
        assert!(KcfParams { learning_rate: 1.5, ..Default::default() }.validate().is_err());
        assert!(KcfParams { cell: 0, ..Default::default() }.validate().is_err());
        assert!(KcfParams { sigma_kernel: 0.0, ..Default::default() }.validate().is_err());
    }
}
