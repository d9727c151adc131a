//! Annotated frames: a colored box per track, styled by state, with the id
//! printed in a small bitmap font.

use std::collections::BTreeMap;
use std::path::Path;

use image::{Rgb, RgbImage};
use serde::Deserialize;

use crate::geometry::BoundingBox;
use crate::tracking::TrackState;

/// One row of a trajectory file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackRow {
    pub frame: u64,
    pub id: u64,
    pub bbox: BoundingBox,
    pub state: Option<TrackState>,
}

#[derive(Deserialize)]
struct RawRow {
    frame: u64,
    id: u64,
    x: i32,
    y: i32,
    w: i32,
    h: i32,
    #[serde(default)]
    state: Option<String>,
}

/// Read `frame,id,x,y,w,h[,state]` rows; errors name the offending line.
pub fn read_rows(path: &Path) -> Result<Vec<TrackRow>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = rdr.headers().map_err(|e| format!("{}: {e}", path.display()))?.clone();
    let mut rec = csv::StringRecord::new();
    let mut rows = Vec::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(format!("{}: {e}", path.display())),
        }
        let line = rec.position().map_or(0, |p| p.line());
        let at = |e: &dyn std::fmt::Display| format!("{}: line {line}: {e}", path.display());
        let raw: RawRow = rec.deserialize(Some(&headers)).map_err(|e| at(&e))?;
        let bbox = BoundingBox::new(raw.x, raw.y, raw.w, raw.h).map_err(|e| at(&e))?;
        let state = match raw.state.as_deref() {
            None | Some("") => None,
            Some(s) => Some(s.parse::<TrackState>().map_err(|e| at(&e))?),
        };
        rows.push(TrackRow {
            frame: raw.frame,
            id: raw.id,
            bbox,
            state,
        });
    }
    Ok(rows)
}

pub fn by_frame(rows: &[TrackRow]) -> BTreeMap<u64, Vec<&TrackRow>> {
    let mut out: BTreeMap<u64, Vec<&TrackRow>> = BTreeMap::new();
    for r in rows {
        out.entry(r.frame).or_default().push(r);
    }
    out
}

/// A well-spread color per id (golden-angle hue steps).
pub fn id_color(id: u64) -> Rgb<u8> {
    let h = (id as f64 * 0.618_033_988_75).fract() * 6.0;
    let (s, v) = (0.85, 1.0);
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    Rgb([r, g, b].map(|u| ((u + m) * 255.0).round() as u8))
}

/// Line style per state: `(thickness, on, off)` along the outline.
/// Tracked boxes are solid, occluded ones dashed, invisible (interpolated)
/// ones dotted; new objects get a heavy solid outline.
fn style(state: Option<TrackState>) -> (i32, usize, usize) {
    match state {
        None | Some(TrackState::Tracked) => (2, 1, 0),
        Some(TrackState::NewObject) => (3, 1, 0),
        Some(TrackState::Occluded) => (2, 6, 4),
        Some(TrackState::Invisible) => (1, 2, 3),
    }
}

fn put(img: &mut RgbImage, x: i32, y: i32, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

pub fn draw_box(img: &mut RgbImage, b: &BoundingBox, state: Option<TrackState>, color: Rgb<u8>) {
    let (thick, on, off) = style(state);
    for t in 0..thick.min(b.w().min(b.h()) / 2).max(1) {
        let (x0, y0, x1, y1) = (b.x() + t, b.y() + t, b.right() - 1 - t, b.bottom() - 1 - t);
        // walk the outline clockwise so the dash pattern is continuous
        let mut outline = Vec::new();
        outline.extend((x0..=x1).map(|x| (x, y0)));
        outline.extend((y0 + 1..=y1).map(|y| (x1, y)));
        outline.extend((x0..x1).rev().map(|x| (x, y1)));
        outline.extend((y0 + 1..y1).rev().map(|y| (x0, y)));
        for (i, (x, y)) in outline.into_iter().enumerate() {
            if i % (on + off) < on {
                put(img, x, y, color);
            }
        }
    }
}

/// 3×5 glyphs for 0-9, one row per entry, high bit on the left.
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b010, 0b010, 0b010],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];
const SCALE: i32 = 2;

/// Print `id` on a dark plate whose top-left corner is at `(x, y)`.
pub fn draw_label(img: &mut RgbImage, x: i32, y: i32, id: u64, color: Rgb<u8>) {
    let text = id.to_string();
    let (w, h) = ((4 * text.len() as i32 + 1) * SCALE, 7 * SCALE);
    for yy in y..y + h {
        for xx in x..x + w {
            put(img, xx, yy, Rgb([0, 0, 0]));
        }
    }
    for (k, ch) in text.bytes().enumerate() {
        let glyph = DIGITS[(ch - b'0') as usize];
        let gx = x + (1 + 4 * k as i32) * SCALE;
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..3 {
                if bits & (0b100 >> col) != 0 {
                    for dy in 0..SCALE {
                        for dx in 0..SCALE {
                            put(img, gx + col * SCALE + dx, y + (1 + row as i32) * SCALE + dy, color);
                        }
                    }
                }
            }
        }
    }
}

/// Draw every row's box and id label onto `img`.
pub fn annotate(img: &mut RgbImage, rows: &[&TrackRow]) {
    for r in rows {
        let color = id_color(r.id);
        draw_box(img, &r.bbox, r.state, color);
        // label above the box when there is room, else just inside it
        let plate_h = 7 * SCALE;
        let y = if r.bbox.y() >= plate_h { r.bbox.y() - plate_h } else { r.bbox.y() };
        draw_label(img, r.bbox.x(), y, r.id, color);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn bb(x: i32, y: i32, w: i32, h: i32) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn outline_pixels(state: Option<TrackState>) -> usize {
        let mut img = RgbImage::new(100, 100);
        draw_box(&mut img, &bb(20, 20, 40, 30), state, Rgb([255, 255, 255]));
        img.pixels().filter(|p| p.0[0] == 255).count()
    }

    #[test]
    fn states_are_visually_distinct() {
        let counts: Vec<usize> = [
            TrackState::Tracked,
            TrackState::Occluded,
            TrackState::NewObject,
            TrackState::Invisible,
        ]
        .into_iter()
        .map(|s| outline_pixels(Some(s)))
        .collect();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(counts[i], counts[j]);
            }
        }
        // solid single-pixel ring of a 40x30 box has 136 pixels; two rings 264
        assert_eq!(counts[0], 136 + 128);
    }

    #[test]
    fn boxes_stay_on_their_outline_and_clip_at_edges() {
        let mut img = RgbImage::new(50, 40);
        let b = bb(-10, 30, 30, 30);
        draw_box(&mut img, &b, None, Rgb([9, 9, 9]));
        for (x, y, p) in img.enumerate_pixels() {
            if p.0 == [9, 9, 9] {
                let (x, y) = (x as i32, y as i32);
                let inner = x >= b.x() + 2 && x < b.right() - 2 && y >= b.y() + 2 && y < b.bottom() - 2;
                assert!(!inner);
            }
        }
    }

    #[test]
    fn label_renders_each_digit_differently() {
        let glyph_img = |d: u64| {
            let mut img = RgbImage::new(20, 20);
            draw_label(&mut img, 0, 0, d, Rgb([255, 0, 0]));
            img
        };
        let imgs: Vec<RgbImage> = (0..10).map(glyph_img).collect();
        for i in 0..10 {
            for j in i + 1..10 {
                assert_ne!(imgs[i], imgs[j], "{i} vs {j}");
            }
        }
    }

    #[test]
    fn id_colors_differ_for_neighbors() {
        for id in 1..50 {
            assert_ne!(id_color(id), id_color(id + 1));
        }
    }

    #[test]
    fn reads_rows_with_and_without_state() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "frame,id,x,y,w,h,state\n0,1,2,3,4,5,occluded\n1,1,2,3,4,5,").unwrap();
        let rows = read_rows(f.path()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].state, Some(TrackState::Occluded));
        assert_eq!(rows[1].state, None);

        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, "frame,id,x,y,w,h\n0,1,2,3,4,5\n1,1,2,3,0,5").unwrap();
        let err = read_rows(g.path()).unwrap_err();
        assert!(err.contains("line 3"), "{err}");

        let mut h = tempfile::NamedTempFile::new().unwrap();
        writeln!(h, "frame,id,x,y,w,h\n0,1,2,three,4,5").unwrap();
        let err = read_rows(h.path()).unwrap_err();
        assert!(err.contains("line 2"), "{err}");
    }
}
