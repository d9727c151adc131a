//! Blob analysis: clean binary foreground masks, label connected components
//! and turn them into candidate object regions.

use std::collections::VecDeque;
use std::path::Path;

use image::{GrayImage, Luma, RgbImage};
use serde::{Deserialize, Serialize};

use crate::geometry::{BoundingBox, Point};

/// Binary foreground mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Mask {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let bits = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Mask { width, height, bits }
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    fn idx(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[self.idx(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let i = self.idx(x, y);
        self.bits[i] = v;
    }

    /// Set every pixel of `b` that lies inside the mask.
    pub fn fill_box(&mut self, b: BoundingBox, v: bool) {
        if let Some(c) = b.clip(self.width, self.height) {
            for y in c.y()..c.bottom() {
                for x in c.x()..c.right() {
                    self.set(x as u32, y as u32, v);
                }
            }
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        Mask {
            width: img.width(),
            height: img.height(),
            bits: img.pixels().map(|p| p.0[0] != 0).collect(),
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([if self.get(x, y) { 255 } else { 0 }])
        })
    }

    /// Load an 8-bit mask image (PNG, PGM); nonzero pixels are foreground.
    pub fn load(path: &Path) -> Result<Self, image::ImageError> {
        Ok(Self::from_gray(&image::open(path)?.to_luma8()))
    }

    pub fn save(&self, path: &Path) -> Result<(), image::ImageError> {
        self.to_gray().save(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobParams {
    /// Minimum region area in pixels.
    #[serde(rename = "T_r")]
    pub t_r: u64,
    /// Centroid distance below which regions are merged, in pixels.
    #[serde(rename = "T_c")]
    pub t_c: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub median_radius: u32,
    pub close_radius: u32,
}

impl Default for BlobParams {
    fn default() -> Self {
        BlobParams {
            t_r: 23,
            t_c: 44.0,
            ratio_min: 0.15,
            ratio_max: 8.0,
            median_radius: 1,
            close_radius: 2,
        }
    }
}

impl BlobParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.t_c >= 0.0) {
            return Err("T_c must be >= 0".into());
        }
        if !(self.ratio_min > 0.0 && self.ratio_min < self.ratio_max) {
            return Err("ratio bounds must satisfy 0 < ratio_min < ratio_max".into());
        }
        Ok(())
    }
}

/// One foreground region after analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateRegion {
    /// Tight bounds of the region's pixels.
    pub bbox: BoundingBox,
    /// Foreground pixel count.
    pub area_px: u64,
    pub centroid: Point,
    /// Number of connected components merged into this region.
    pub parts: u32,
}

impl CandidateRegion {
    pub fn from_box(bbox: BoundingBox) -> Self {
        CandidateRegion {
            bbox,
            area_px: bbox.area() as u64,
            centroid: bbox.centroid(),
            parts: 1,
        }
    }

    fn merge(&self, other: &CandidateRegion) -> CandidateRegion {
        let (a, b) = (self.area_px as f64, other.area_px as f64);
        let total = a + b;
        CandidateRegion {
            bbox: self.bbox.union(&other.bbox),
            area_px: self.area_px + other.area_px,
            centroid: Point::new(
                (self.centroid.x * a + other.centroid.x * b) / total,
                (self.centroid.y * a + other.centroid.y * b) / total,
            ),
            parts: self.parts + other.parts,
        }
    }
}

/// Summed-area table with a zero border row and column.
fn integral(mask: &Mask) -> Vec<u32> {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let mut s = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0u32;
        for x in 0..w {
            row += mask.bits[y * w + x] as u32;
            s[(y + 1) * (w + 1) + x + 1] = s[y * (w + 1) + x + 1] + row;
        }
    }
    s
}

/// Binary median: a pixel is foreground when foreground pixels are the strict
/// majority of its in-frame `(2r+1)²` neighborhood.
pub fn median(mask: &Mask, radius: u32) -> Mask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width as usize, mask.height as usize);
    let s = integral(mask);
    let r = radius as usize;
    let mut bits = vec![false; w * h];
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        let (top, bottom) = (&s[y0 * (w + 1)..(y0 + 1) * (w + 1)], &s[y1 * (w + 1)..(y1 + 1) * (w + 1)]);
        let out = &mut bits[y * w..(y + 1) * w];
        for (x, o) in out.iter_mut().enumerate() {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
            let fg = bottom[x1] + top[x0] - bottom[x0] - top[x1];
            *o = 2 * fg as usize > (x1 - x0) * (y1 - y0);
        }
    }
    Mask {
        width: mask.width,
        height: mask.height,
        bits,
    }
}

/// Separable square-window max (dilate) or min (erode). Out-of-frame pixels
/// count as background for dilation and foreground for erosion.
fn square_filter(mask: &Mask, radius: u32, dilate: bool) -> Mask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width as usize, mask.height as usize);
    let r = radius as usize;
    // a window passes when it holds any (dilate) or only (erode) foreground
    let decide = |count: usize, lo: usize, hi: usize| if dilate { count > 0 } else { count == hi - lo };

    let mut rows = vec![false; w * h];
    for (src, out) in mask.bits.chunks_exact(w).zip(rows.chunks_exact_mut(w)) {
        let mut count: usize = src[..r.min(w)].iter().map(|b| *b as usize).sum();
        for i in 0..w {
            if i + r < w {
                count += src[i + r] as usize;
            }
            if i > r {
                count -= src[i - r - 1] as usize;
            }
            out[i] = decide(count, i.saturating_sub(r), (i + r + 1).min(w));
        }
    }

    // vertical pass as running per-column counts, one row at a time
    let mut bits = vec![false; w * h];
    let mut counts = vec![0usize; w];
    for row in rows.chunks_exact(w).take(r.min(h)) {
        for (c, b) in counts.iter_mut().zip(row) {
            *c += *b as usize;
        }
    }
    for y in 0..h {
        if y + r < h {
            for (c, b) in counts.iter_mut().zip(&rows[(y + r) * w..(y + r + 1) * w]) {
                *c += *b as usize;
            }
        }
        if y > r {
            for (c, b) in counts.iter_mut().zip(&rows[(y - r - 1) * w..(y - r) * w]) {
                *c -= *b as usize;
            }
        }
        let (lo, hi) = (y.saturating_sub(r), (y + r + 1).min(h));
        for (o, c) in bits[y * w..(y + 1) * w].iter_mut().zip(&counts) {
            *o = decide(*c, lo, hi);
        }
    }
    Mask {
        width: mask.width,
        height: mask.height,
        bits,
    }
}

pub fn dilate(mask: &Mask, radius: u32) -> Mask {
    square_filter(mask, radius, true)
}

pub fn erode(mask: &Mask, radius: u32) -> Mask {
    square_filter(mask, radius, false)
}

pub fn close(mask: &Mask, radius: u32) -> Mask {
    erode(&dilate(mask, radius), radius)
}

/// Background pixels not 4-connected to the frame border become foreground.
///
/// A 4-connected background hole is always enclosed by a single 8-connected
/// foreground component, so it suffices to flood each component's bounding
/// box from its edges.
pub fn fill_holes(mask: &Mask) -> Mask {
    let mut out = mask.clone();
    let w = mask.width as usize;
    let mut outside = Vec::new();
    let mut queue = VecDeque::new();
    for region in components(mask) {
        let b = region.bbox;
        let (bx, by, bw, bh) = (b.x() as usize, b.y() as usize, b.w() as usize, b.h() as usize);
        if bw < 3 || bh < 3 {
            continue;
        }
        let fg = |i: usize| mask.bits[(by + i / bw) * w + bx + i % bw];
        outside.clear();
        outside.resize(bw * bh, false);
        let seed = |i: usize, outside: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
            if !fg(i) && !outside[i] {
                outside[i] = true;
                queue.push_back(i);
            }
        };
        for x in 0..bw {
            seed(x, &mut outside, &mut queue);
            seed((bh - 1) * bw + x, &mut outside, &mut queue);
        }
        for y in 0..bh {
            seed(y * bw, &mut outside, &mut queue);
            seed(y * bw + bw - 1, &mut outside, &mut queue);
        }
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % bw, i / bw);
            if x > 0 {
                seed(i - 1, &mut outside, &mut queue);
            }
            if x + 1 < bw {
                seed(i + 1, &mut outside, &mut queue);
            }
            if y > 0 {
                seed(i - bw, &mut outside, &mut queue);
            }
            if y + 1 < bh {
                seed(i + bw, &mut outside, &mut queue);
            }
        }
        for (i, o) in outside.iter().enumerate() {
            if !o {
                out.bits[(by + i / bw) * w + bx + i % bw] = true;
            }
        }
    }
    out
}

/// Median filter, closing, then hole filling.
pub fn clean(mask: &Mask, p: &BlobParams) -> Mask {
    if mask.bits.is_empty() {
        return mask.clone();
    }
    fill_holes(&close(&median(mask, p.median_radius), p.close_radius))
}

/// 8-connected components in row-major order of their first pixel.
pub fn components(mask: &Mask) -> Vec<CandidateRegion> {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut seen = vec![false; mask.bits.len()];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.bits.len() {
        if !mask.bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
        let (mut n, mut sx, mut sy) = (0u64, 0f64, 0f64);
        while let Some(i) = stack.pop() {
            let (x, y) = (i as i64 % w, i as i64 / w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            n += 1;
            sx += x as f64 + 0.5;
            sy += y as f64 + 0.5;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let j = (ny * w + nx) as usize;
                    if mask.bits[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        regions.push(CandidateRegion {
            bbox: BoundingBox::from_corners(x0 as i32, y0 as i32, x1 as i32 + 1, y1 as i32 + 1)
                .expect("non-empty component"),
            area_px: n,
            centroid: Point::new(sx / n as f64, sy / n as f64),
            parts: 1,
        });
    }
    regions
}

/// Size filter, aspect-ratio filter, then closest-pair-first centroid merging.
/// Merged regions are not re-checked against the ratio bounds.
pub fn refine(regions: &[CandidateRegion], p: &BlobParams) -> Vec<CandidateRegion> {
    let mut kept: Vec<CandidateRegion> = regions
        .iter()
        .filter(|r| r.area_px >= p.t_r)
        .filter(|r| {
            if r.parts > 1 {
                return true;
            }
            let ratio = r.bbox.w() as f64 / r.bbox.h() as f64;
            ratio >= p.ratio_min && ratio <= p.ratio_max
        })
        .copied()
        .collect();

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..kept.len() {
            for j in i + 1..kept.len() {
                let d = kept[i].centroid.distance(&kept[j].centroid);
                if d < p.t_c && best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
        match best {
            Some((_, i, j)) => {
                let other = kept.remove(j);
                kept[i] = kept[i].merge(&other);
            }
            None => break,
        }
    }
    kept
}

/// Full blob analysis for one mask.
pub fn candidate_regions(mask: &Mask, p: &BlobParams) -> Vec<CandidateRegion> {
    refine(&components(&clean(mask, p)), p)
}

/// Running-average background model on grayscale intensities.
#[derive(Debug, Clone)]
pub struct BackgroundModel {
    width: u32,
    height: u32,
    mean: Vec<f32>,
}

impl BackgroundModel {
    pub const RATE: f32 = 0.01;
    pub const THRESHOLD: f32 = 25.0;

    fn gray(frame: &RgbImage) -> impl Iterator<Item = f32> + '_ {
        frame.pixels().map(|p| {
            let [r, g, b] = p.0.map(f32::from);
            0.299 * r + 0.587 * g + 0.114 * b
        })
    }

    pub fn new(first: &RgbImage) -> Self {
        BackgroundModel {
            width: first.width(),
            height: first.height(),
            mean: Self::gray(first).collect(),
        }
    }

    /// Threshold the difference against the background, then blend the frame in.
    pub fn subtract(&mut self, frame: &RgbImage) -> Mask {
        assert_eq!(
            (frame.width(), frame.height()),
            (self.width, self.height),
            "frame size changed"
        );
        let mut mask = Mask::new(self.width, self.height);
        for (i, g) in Self::gray(frame).enumerate() {
            let m = &mut self.mean[i];
            mask.bits[i] = (g - *m).abs() > Self::THRESHOLD;
            *m += Self::RATE * (g - *m);
        }
        mask
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;
    use proptest::prelude::*;

    fn bb(x: i32, y: i32, w: i32, h: i32) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn squares(w: u32, h: u32, boxes: &[BoundingBox]) -> Mask {
        let mut m = Mask::new(w, h);
        for b in boxes {
            m.fill_box(*b, true);
        }
        m
    }

    #[test]
    fn clean_empty_stays_empty() {
        let m = Mask::new(30, 20);
        assert_eq!(clean(&m, &BlobParams::default()).count(), 0);
    }

    #[test]
    fn clean_fills_interior_hole() {
        let mut m = squares(40, 40, &[bb(10, 10, 20, 20)]);
        m.fill_box(bb(19, 19, 2, 2), false);
        let p = BlobParams {
            median_radius: 0,
            close_radius: 0,
            ..Default::default()
        };
        let c = clean(&m, &p);
        assert_eq!(c, squares(40, 40, &[bb(10, 10, 20, 20)]));
    }

    #[test]
    fn median_removes_isolated_pixel() {
        let mut m = Mask::new(10, 10);
        m.set(5, 5, true);
        assert_eq!(median(&m, 1).count(), 0);
        assert_eq!(clean(&m, &BlobParams::default()).count(), 0);
    }

    #[test]
    fn closing_bridges_small_gap_and_preserves_square() {
        let m = squares(60, 30, &[bb(5, 5, 20, 20), bb(29, 5, 20, 20)]);
        let c = close(&m, 2);
        assert_eq!(components(&c).len(), 1);
        let single = squares(60, 30, &[bb(5, 5, 20, 20)]);
        assert_eq!(close(&single, 2), single);
        // squares touching the border are preserved by closing too
        let edge = squares(30, 30, &[bb(0, 0, 10, 10)]);
        assert_eq!(close(&edge, 2), edge);
    }

    #[test]
    fn dilate_erode_match_brute_force() {
        let m = Mask::from_fn(17, 13, |x, y| (x * 7 + y * 3) % 5 == 0 || (x + y) % 11 == 0);
        for r in 1..3u32 {
            let d = dilate(&m, r);
            let e = erode(&m, r);
            for y in 0..13i64 {
                for x in 0..17i64 {
                    let mut any = false;
                    let mut all = true;
                    for dy in -(r as i64)..=r as i64 {
                        for dx in -(r as i64)..=r as i64 {
                            let (nx, ny) = (x + dx, y + dy);
                            if nx < 0 || ny < 0 || nx >= 17 || ny >= 13 {
                                continue;
                            }
                            let v = m.get(nx as u32, ny as u32);
                            any |= v;
                            all &= v;
                        }
                    }
                    assert_eq!(d.get(x as u32, y as u32), any);
                    assert_eq!(e.get(x as u32, y as u32), all);
                }
            }
        }
    }

    fn arb_mask() -> impl Strategy<Value = Mask> {
        (1u32..24, 1u32..20, 0u32..100, any::<u64>()).prop_map(|(w, h, density, seed)| {
            // cheap deterministic hash noise; dense enough to form rings
            Mask::from_fn(w, h, |x, y| {
                let v = (x as u64 * 73856093) ^ (y as u64 * 19349663) ^ seed;
                (v.wrapping_mul(0x9E3779B97F4A7C15) >> 40) % 100 < density as u64
            })
        })
    }

    /// Reference: flood background from the whole frame border.
    fn fill_holes_oracle(m: &Mask) -> Mask {
        let (w, h) = (m.width() as i64, m.height() as i64);
        let mut outside = vec![false; (w * h) as usize];
        let mut stack: Vec<(i64, i64)> = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                    stack.push((x, y));
                }
            }
        }
        while let Some((x, y)) = stack.pop() {
            if x < 0 || y < 0 || x >= w || y >= h {
                continue;
            }
            let i = (y * w + x) as usize;
            if outside[i] || m.get(x as u32, y as u32) {
                continue;
            }
            outside[i] = true;
            stack.extend([(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]);
        }
        Mask::from_fn(m.width(), m.height(), |x, y| !outside[(y as i64 * w + x as i64) as usize])
    }

    fn median_oracle(m: &Mask, r: i64) -> Mask {
        let (w, h) = (m.width() as i64, m.height() as i64);
        Mask::from_fn(m.width(), m.height(), |x, y| {
            let (mut fg, mut n) = (0, 0);
            for ny in y as i64 - r..=y as i64 + r {
                for nx in x as i64 - r..=x as i64 + r {
                    if nx >= 0 && ny >= 0 && nx < w && ny < h {
                        n += 1;
                        fg += m.get(nx as u32, ny as u32) as i32;
                    }
                }
            }
            2 * fg > n
        })
    }

    proptest! {
        #[test]
        fn fill_holes_matches_border_flood(m in arb_mask()) {
            prop_assert_eq!(fill_holes(&m), fill_holes_oracle(&m));
        }

        #[test]
        fn median_matches_neighborhood_vote(m in arb_mask(), r in 1i64..3) {
            prop_assert_eq!(median(&m, r as u32), median_oracle(&m, r));
        }
    }

    #[test]
    fn nested_rings_fill_completely() {
        let mut m = squares(30, 30, &[bb(2, 2, 26, 26)]);
        m.fill_box(bb(4, 4, 22, 22), false);
        m.fill_box(bb(10, 10, 10, 10), true);
        m.fill_box(bb(12, 12, 6, 6), false);
        assert_eq!(fill_holes(&m), squares(30, 30, &[bb(2, 2, 26, 26)]));
    }

    #[test]
    fn components_examples() {
        let m = squares(30, 30, &[bb(5, 5, 10, 10)]);
        let c = components(&m);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].bbox, bb(5, 5, 10, 10));
        assert_eq!(c[0].area_px, 100);
        assert_eq!(c[0].centroid, Point::new(10.0, 10.0));

        let diag = squares(30, 30, &[bb(0, 0, 5, 5), bb(5, 5, 5, 5)]);
        assert_eq!(components(&diag).len(), 1);
        assert!(components(&Mask::new(8, 8)).is_empty());
    }

    #[test]
    fn components_are_row_major() {
        let m = squares(40, 40, &[bb(20, 2, 3, 3), bb(2, 10, 3, 3), bb(2, 2, 3, 3)]);
        let c = components(&m);
        let firsts: Vec<_> = c.iter().map(|r| (r.bbox.y(), r.bbox.x())).collect();
        assert_eq!(firsts, vec![(2, 2), (2, 20), (10, 2)]);
    }

    #[test]
    fn refine_size_threshold() {
        let p = BlobParams { t_r: 50, ..Default::default() };
        let small = CandidateRegion { area_px: 49, ..CandidateRegion::from_box(bb(0, 0, 7, 7)) };
        assert!(refine(&[small], &p).is_empty());
        let ok = CandidateRegion { area_px: 50, ..small };
        assert_eq!(refine(&[ok], &p).len(), 1);
    }

    #[test]
    fn refine_ratio_filter() {
        let p = BlobParams { t_r: 1, ..Default::default() };
        let thin = CandidateRegion::from_box(bb(0, 0, 2, 40));
        assert!(refine(&[thin], &p).is_empty());
        let flat = CandidateRegion::from_box(bb(0, 0, 90, 10));
        assert!(refine(&[flat], &p).is_empty());
    }

    #[test]
    fn refine_merges_close_regions() {
        let p = BlobParams { t_r: 1, t_c: 10.0, ..Default::default() };
        let a = CandidateRegion::from_box(bb(0, 0, 10, 10));
        let b = CandidateRegion::from_box(bb(5, 0, 10, 10));
        let out = refine(&[a, b], &p);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].bbox, bb(0, 0, 15, 10));
        assert_eq!(out[0].area_px, 200);
        assert_eq!(out[0].centroid, Point::new(7.5, 5.0));
        assert_eq!(out[0].parts, 2);
    }

    #[test]
    fn refine_does_not_merge_at_exact_threshold() {
        let p = BlobParams { t_r: 1, t_c: 10.0, ..Default::default() };
        let a = CandidateRegion::from_box(bb(0, 0, 10, 10));
        let b = CandidateRegion::from_box(bb(10, 0, 10, 10));
        assert_eq!(refine(&[a, b], &p).len(), 2);
    }

    #[test]
    fn refine_merges_closest_pair_first() {
        let p = BlobParams { t_r: 1, t_c: 12.0, ..Default::default() };
        // a-b are 11 apart, b-c are 9 apart: b merges with c first; the merged
        // centroid then sits beyond T_c from a
        let a = CandidateRegion::from_box(bb(0, 0, 4, 4));
        let b = CandidateRegion::from_box(bb(11, 0, 4, 4));
        let c = CandidateRegion::from_box(bb(20, 0, 4, 4));
        for order in [[a, b, c], [c, b, a], [b, a, c]] {
            let out = refine(&order, &p);
            assert_eq!(out.len(), 2, "{order:?}");
            assert!(out.iter().any(|r| r.bbox == bb(11, 0, 13, 4)));
        }
    }

    #[test]
    fn fallback_subtractor() {
        let bg = RgbImage::from_pixel(40, 30, Rgb([100, 100, 100]));
        let mut model = BackgroundModel::new(&bg);
        assert_eq!(model.subtract(&bg).count(), 0);

        let mut fg = bg.clone();
        for y in 10..20 {
            for x in 5..25 {
                fg.put_pixel(x, y, Rgb([250, 240, 20]));
            }
        }
        let m = model.subtract(&fg);
        assert_eq!(components(&m)[0].bbox, bb(5, 10, 20, 10));
        assert_eq!(m.count(), 200);
        let mut last = m;
        for _ in 0..400 {
            last = model.subtract(&fg);
        }
        assert_eq!(last.count(), 0);
    }

    fn arb_regions() -> impl Strategy<Value = Vec<CandidateRegion>> {
        prop::collection::vec((0i32..200, 0i32..200, 1i32..40, 1i32..40), 0..12).prop_map(|v| {
            v.into_iter()
                .map(|(x, y, w, h)| CandidateRegion::from_box(bb(x, y, w, h)))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn refine_is_idempotent(regions in arb_regions(), t_r in 0u64..400, t_c in 0.0f64..60.0) {
            let p = BlobParams { t_r, t_c, ..Default::default() };
            let once = refine(&regions, &p);
            prop_assert_eq!(refine(&once, &p), once.clone());
            for r in &once {
                prop_assert!(r.area_px >= t_r);
            }
        }

        #[test]
        fn separated_squares_survive_cleaning(n in 1usize..6, side in 6i32..14) {
            // squares on a grid with gaps well above 2 * close_radius
            let boxes: Vec<_> = (0..n).map(|i| bb(4 + i as i32 * (side + 8), 6, side, side)).collect();
            let m = squares(160, 30, &boxes);
            let regions = components(&clean(&m, &BlobParams::default()));
            prop_assert_eq!(regions.len(), n);
            for (r, b) in regions.iter().zip(&boxes) {
                prop_assert_eq!(r.bbox, *b);
            }
        }
    }
}
