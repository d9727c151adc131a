//! Appearance features for the correlation filter: a centered grayscale
//! channel followed by ten color-name probability channels, pooled per cell
//! and tapered by a Hann window.

use std::fs;
use std::path::Path;

use image::{imageops, Rgb, RgbImage};
use ndarray::{Array2, Array3};
use thiserror::Error;

use crate::geometry::BoundingBox;

/// Number of color-name categories (white is folded into the grayscale channel).
pub const COLOR_NAMES: usize = 10;
pub const BINS_PER_CHANNEL: usize = 16;
const TABLE_ROWS: usize = BINS_PER_CHANNEL * BINS_PER_CHANNEL * BINS_PER_CHANNEL;

/// Grayscale plus the color-name channels.
pub const FEATURE_CHANNELS: usize = 1 + COLOR_NAMES;

pub const COLOR_NAME_LABELS: [&str; COLOR_NAMES] = [
    "black", "blue", "brown", "gray", "green", "orange", "pink", "purple", "red", "yellow",
];

const REFERENCE_COLORS: [[f64; 3]; COLOR_NAMES] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.0, 255.0],
    [136.0, 84.0, 24.0],
    [128.0, 128.0, 128.0],
    [0.0, 160.0, 0.0],
    [255.0, 140.0, 0.0],
    [255.0, 160.0, 200.0],
    [128.0, 0.0, 160.0],
    [255.0, 0.0, 0.0],
    [255.0, 255.0, 0.0],
];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("window {0:?} lies entirely outside the {1}x{2} frame")]
    OutsideFrame(BoundingBox, u32, u32),
    #[error("padding must be finite and non-negative, got {0}")]
    BadPadding(f64),
    #[error("cell size must be at least 1")]
    BadCell,
    #[error("color-names table: {0}")]
    Table(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lookup from quantized RGB to color-name probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorNamesTable {
    entries: Vec<[f64; COLOR_NAMES]>,
}

impl ColorNamesTable {
    /// One-hot table assigning each RGB bin to the nearest reference color.
    pub fn fallback() -> Self {
        let center = |b: usize| (b * 256 / BINS_PER_CHANNEL + 128 / BINS_PER_CHANNEL) as f64;
        let entries = (0..TABLE_ROWS)
            .map(|i| {
                let (r, g, b) = Self::unpack(i);
                let rgb = [center(r), center(g), center(b)];
                let nearest = REFERENCE_COLORS
                    .iter()
                    .map(|c| {
                        (0..3)
                            .map(|k| (c[k] - rgb[k]) * (c[k] - rgb[k]))
                            .sum::<f64>()
                    })
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(k, _)| k)
                    .unwrap();
                let mut row = [0.0; COLOR_NAMES];
                row[nearest] = 1.0;
                row
            })
            .collect();
        ColorNamesTable { entries }
    }

    /// Parse the CSV form: one row per bin in `(r, g, b)` row-major order,
    /// ten probabilities per row.
    pub fn from_csv(text: &str) -> Result<Self, FeatureError> {
        let mut entries = Vec::with_capacity(TABLE_ROWS);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let values: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| FeatureError::Table(format!("line {}: {e}", lineno + 1)))?;
            if values.len() != COLOR_NAMES {
                return Err(FeatureError::Table(format!(
                    "line {}: expected {COLOR_NAMES} values, found {}",
                    lineno + 1,
                    values.len()
                )));
            }
            let sum: f64 = values.iter().sum();
            if values.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > 1e-6 {
                return Err(FeatureError::Table(format!(
                    "line {}: row is not a probability vector (sum {sum})",
                    lineno + 1
                )));
            }
            let mut row = [0.0; COLOR_NAMES];
            row.copy_from_slice(&values);
            entries.push(row);
        }
        if entries.len() != TABLE_ROWS {
            return Err(FeatureError::Table(format!(
                "expected {TABLE_ROWS} rows, found {}",
                entries.len()
            )));
        }
        Ok(ColorNamesTable { entries })
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        Self::from_csv(&fs::read_to_string(path)?)
    }

    /// Load `path` when it exists, otherwise fall back to the one-hot table.
    pub fn load_or_fallback(path: Option<&Path>) -> Result<Self, FeatureError> {
        match path {
            Some(p) if p.exists() => Self::load(p),
            _ => Ok(Self::fallback()),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.entries {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn unpack(i: usize) -> (usize, usize, usize) {
        let n = BINS_PER_CHANNEL;
        (i / (n * n), (i / n) % n, i % n)
    }

    pub fn lookup(&self, px: Rgb<u8>) -> &[f64; COLOR_NAMES] {
        let shift = 8 - BINS_PER_CHANNEL.trailing_zeros();
        let [r, g, b] = px.0.map(|c| (c >> shift) as usize);
        &self.entries[(r * BINS_PER_CHANNEL + g) * BINS_PER_CHANNEL + b]
    }
}

/// Feature tensor stored channel-major as `[channel, row, column]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePatch {
    pub data: Array3<f64>,
}

impl FeaturePatch {
    pub fn channels(&self) -> usize {
        self.data.dim().0
    }
    pub fn height(&self) -> usize {
        self.data.dim().1
    }
    pub fn width(&self) -> usize {
        self.data.dim().2
    }
    pub fn shape(&self) -> (usize, usize, usize) {
        self.data.dim()
    }
}

/// 1-D Hann window of length `n`; a single sample is the endpoint value 0.
pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

pub fn hann2d(w: usize, h: usize) -> Array2<f64> {
    let hx = hann(w);
    let hy = hann(h);
    Array2::from_shape_fn((h, w), |(y, x)| hy[y] * hx[x])
}

/// Crop `region` out of `frame`, replicating edge pixels outside the frame.
pub fn extract_region(frame: &RgbImage, region: BoundingBox) -> Result<RgbImage, FeatureError> {
    let (fw, fh) = frame.dimensions();
    if region.clip(fw, fh).is_none() {
        return Err(FeatureError::OutsideFrame(region, fw, fh));
    }
    let mut out = RgbImage::new(region.w() as u32, region.h() as u32);
    for (ox, oy, px) in out.enumerate_pixels_mut() {
        let sx = (region.x() + ox as i32).clamp(0, fw as i32 - 1) as u32;
        let sy = (region.y() + oy as i32).clamp(0, fh as i32 - 1) as u32;
        *px = *frame.get_pixel(sx, sy);
    }
    Ok(out)
}

/// Size of `(w, h)` inflated by `(1 + padding)`.
pub fn padded_size(w: i32, h: i32, padding: f64) -> (i32, i32) {
    let scale = 1.0 + padding;
    (
        ((w as f64 * scale).round() as i32).max(1),
        ((h as f64 * scale).round() as i32).max(1),
    )
}

/// The search window: `bbox` inflated by `(1 + padding)` about its center.
pub fn extract_patch(frame: &RgbImage, bbox: BoundingBox, padding: f64) -> Result<RgbImage, FeatureError> {
    if !padding.is_finite() || padding < 0.0 {
        return Err(FeatureError::BadPadding(padding));
    }
    let (w, h) = padded_size(bbox.w(), bbox.h(), padding);
    let region = bbox
        .resized_about_center(w, h)
        .expect("padded size is positive");
    extract_region(frame, region)
}

fn round_to_cell(n: u32, cell: u32) -> u32 {
    (((n as f64 / cell as f64).round() as u32).max(1)) * cell
}

/// Build the windowed feature tensor for an RGB patch. Patches whose size is
/// not a multiple of `cell` are bilinearly resized to the nearest multiple.
pub fn featurize(patch: &RgbImage, table: &ColorNamesTable, cell: u32) -> Result<FeaturePatch, FeatureError> {
    if cell == 0 {
        return Err(FeatureError::BadCell);
    }
    let (pw, ph) = patch.dimensions();
    let (tw, th) = (round_to_cell(pw, cell), round_to_cell(ph, cell));
    let resized;
    let patch = if (tw, th) != (pw, ph) {
        resized = imageops::resize(patch, tw, th, imageops::FilterType::Triangle);
        &resized
    } else {
        patch
    };
    let cell = cell as usize;
    let (cw, ch) = (tw as usize / cell, th as usize / cell);
    let mut data = Array3::<f64>::zeros((FEATURE_CHANNELS, ch, cw));
    for (x, y, px) in patch.enumerate_pixels() {
        let (cx, cy) = (x as usize / cell, y as usize / cell);
        let [r, g, b] = px.0.map(f64::from);
        // ITU-R BT.601 luma, centered
        let gray = (0.299 * r + 0.587 * g + 0.114 * b) / 255.0 - 0.5;
        data[[0, cy, cx]] += gray;
        for (k, p) in table.lookup(*px).iter().enumerate() {
            data[[k + 1, cy, cx]] += p;
        }
    }
    let norm = 1.0 / (cell * cell) as f64;
    let window = hann2d(cw, ch);
    for mut chan in data.outer_iter_mut() {
        chan.zip_mut_with(&window, |v, w| *v *= norm * w);
    }
    Ok(FeaturePatch { data })
}
