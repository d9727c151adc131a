//! Axis-aligned bounding boxes in pixel coordinates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("degenerate box: width {w} and height {h} must both be positive")]
    Degenerate { w: i64, h: i64 },
}

/// Integer rectangle: top-left corner plus size. Width and height are always
/// strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    x: i32,
    y: i32,
    w: i32,
    h: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl BoundingBox {
    pub fn new(x: i32, y: i32, w: i32, h: i32) -> Result<Self, GeometryError> {
        if w <= 0 || h <= 0 {
            return Err(GeometryError::Degenerate {
                w: w as i64,
                h: h as i64,
            });
        }
        Ok(BoundingBox { x, y, w, h })
    }

    /// Box from inclusive-exclusive corner coordinates `[x0, x1) × [y0, y1)`.
    pub fn from_corners(x0: i32, y0: i32, x1: i32, y1: i32) -> Result<Self, GeometryError> {
        Self::new(x0, y0, x1 - x0, y1 - y0)
    }

    /// Box of the given size whose center matches `self`'s center as closely
    /// as integer coordinates allow.
    pub fn resized_about_center(&self, w: i32, h: i32) -> Result<Self, GeometryError> {
        let x = (2 * self.x as i64 + self.w as i64 - w as i64).div_euclid(2) as i32;
        let y = (2 * self.y as i64 + self.h as i64 - h as i64).div_euclid(2) as i32;
        Self::new(x, y, w, h)
    }

    pub fn x(&self) -> i32 {
        self.x
    }
    pub fn y(&self) -> i32 {
        self.y
    }
    pub fn w(&self) -> i32 {
        self.w
    }
    pub fn h(&self) -> i32 {
        self.h
    }
    pub fn right(&self) -> i32 {
        self.x + self.w
    }
    pub fn bottom(&self) -> i32 {
        self.y + self.h
    }

    pub fn area(&self) -> i64 {
        self.w as i64 * self.h as i64
    }

    pub fn centroid(&self) -> Point {
        Point::new(
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }

    pub fn translate(&self, dx: i32, dy: i32) -> Self {
        BoundingBox {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        BoundingBox::from_corners(x0, y0, x1, y1).ok()
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> i64 {
        self.intersection(other).map_or(0, |b| b.area())
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            x: self.x.min(other.x),
            y: self.y.min(other.y),
            w: self.right().max(other.right()) - self.x.min(other.x),
            h: self.bottom().max(other.bottom()) - self.y.min(other.y),
        }
    }

    /// Clip to `[0, width) × [0, height)`. `None` when nothing remains.
    pub fn clip(&self, width: u32, height: u32) -> Option<BoundingBox> {
        let frame = BoundingBox::new(0, 0, width as i32, height as i32).ok()?;
        self.intersection(&frame)
    }
}

pub fn area(a: &BoundingBox) -> i64 {
    a.area()
}

pub fn centroid(a: &BoundingBox) -> Point {
    a.centroid()
}

/// Intersection over union of two boxes.
pub fn overlap(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}
