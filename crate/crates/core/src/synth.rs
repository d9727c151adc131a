//! Deterministic synthetic scenes: flat background, solid colored rectangles,
//! exact foreground masks and ground truth.
//!
//! Actors follow piecewise-linear paths through top-left waypoints. A mask
//! can be made to lose an actor for a while (a `dropout`: the object is still
//! on screen, as when background subtraction misses it) or to fragment the
//! actor's silhouette. An actor can also leave the picture entirely for a
//! range of frames (`absent`).

use std::fs;
use std::ops::Range;
use std::path::Path;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::foreground::Mask;
use crate::geometry::BoundingBox;
use crate::metrics::{MetricsError, Record, TrajectorySet};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("unknown scenario {name:?}; available: {}", available.join(", "))]
    Unknown { name: String, available: Vec<String> },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Csv(#[from] MetricsError),
}

/// How a fragmentation event carves up an actor's silhouette in the mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPattern {
    /// Centered vertical strip removed: left and right halves.
    VerticalGap { width: u32 },
    /// Centered horizontal strip removed: top and bottom halves.
    HorizontalGap { height: u32 },
    /// Only the left `keep` fraction of the silhouette survives.
    Truncate { keep: f64 },
    /// A block of `block` (fractions of width, height) in the bottom-right
    /// corner, cut off from the remaining L shape by a `gap` pixel moat.
    Notch { block: (f64, f64), gap: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fragmentation {
    pub actor: u64,
    pub frames: Range<u64>,
    pub pattern: SplitPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actor {
    pub id: u64,
    pub class: String,
    pub color: [u8; 3],
    pub size: (u32, u32),
    /// `(frame, top-left x, top-left y)`, frames strictly increasing. The
    /// actor exists from the first to the last waypoint frame.
    pub path: Vec<(u64, f64, f64)>,
    /// Frames where the actor is neither drawn nor in the ground truth.
    #[serde(default)]
    pub absent: Vec<Range<u64>>,
    /// Frames where the actor is drawn but missing from the mask.
    #[serde(default)]
    pub dropouts: Vec<Range<u64>>,
}

impl Actor {
    pub fn new(id: u64, class: &str, color: [u8; 3], size: (u32, u32), path: Vec<(u64, f64, f64)>) -> Self {
        Actor {
            id,
            class: class.to_string(),
            color,
            size,
            path,
            absent: Vec::new(),
            dropouts: Vec::new(),
        }
    }

    pub fn absent(mut self, frames: Range<u64>) -> Self {
        self.absent.push(frames);
        self
    }

    pub fn dropout(mut self, frames: Range<u64>) -> Self {
        self.dropouts.push(frames);
        self
    }

    /// Unclipped box at frame `t`, if the actor is on stage.
    pub fn box_at(&self, t: u64) -> Option<BoundingBox> {
        let (first, last) = (self.path.first()?, self.path.last()?);
        if t < first.0 || t > last.0 || self.absent.iter().any(|r| r.contains(&t)) {
            return None;
        }
        let k = self.path.partition_point(|p| p.0 <= t);
        let (x, y) = if k == self.path.len() {
            (last.1, last.2)
        } else {
            let (a, b) = (self.path[k - 1], self.path[k]);
            let s = (t - a.0) as f64 / (b.0 - a.0) as f64;
            (a.1 + (b.1 - a.1) * s, a.2 + (b.2 - a.2) * s)
        };
        BoundingBox::new(x.round() as i32, y.round() as i32, self.size.0 as i32, self.size.1 as i32).ok()
    }

    fn in_mask(&self, t: u64) -> bool {
        !self.dropouts.iter().any(|r| r.contains(&t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub frames: u64,
    pub background: [u8; 3],
    pub actors: Vec<Actor>,
    #[serde(default)]
    pub fragmentations: Vec<Fragmentation>,
    /// Fraction of mask pixels turned on at random, to exercise cleaning.
    #[serde(default)]
    pub mask_noise: f64,
    pub seed: u64,
}

/// One rendered frame.
#[derive(Debug, Clone)]
pub struct SynthFrame {
    pub image: RgbImage,
    pub mask: Mask,
    pub truth: Vec<Record>,
}

/// A whole rendered sequence.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub frames: Vec<RgbImage>,
    pub masks: Vec<Mask>,
    pub truth: TrajectorySet,
}

impl Scenario {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.width == 0 || self.height == 0 {
            return bad("frame size must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.mask_noise) {
            return bad(format!("mask_noise {} outside [0, 1]", self.mask_noise));
        }
        let mut ids: Vec<u64> = self.actors.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("actor ids must be unique".into());
        }
        for a in &self.actors {
            if a.size.0 == 0 || a.size.1 == 0 {
                return bad(format!("actor {} has an empty size", a.id));
            }
            if a.path.is_empty() || a.path.windows(2).any(|w| w[0].0 >= w[1].0) {
                return bad(format!("actor {} needs waypoints with increasing frames", a.id));
            }
        }
        for f in &self.fragmentations {
            if !ids.contains(&f.actor) {
                return bad(format!("fragmentation refers to unknown actor {}", f.actor));
            }
            if let SplitPattern::Truncate { keep } = f.pattern {
                if !(0.0 < keep && keep <= 1.0) {
                    return bad(format!("truncate keep {keep} outside (0, 1]"));
                }
            }
        }
        Ok(())
    }

    /// Render frame `t`. Later actors are drawn over earlier ones.
    pub fn render_frame(&self, t: u64) -> SynthFrame {
        let mut image = RgbImage::from_pixel(self.width, self.height, Rgb(self.background));
        let mut mask = Mask::new(self.width, self.height);
        let mut truth = Vec::new();
        for actor in &self.actors {
            let Some(b) = actor.box_at(t) else { continue };
            let Some(visible) = b.clip(self.width, self.height) else { continue };
            for y in visible.y()..visible.bottom() {
                for x in visible.x()..visible.right() {
                    image.put_pixel(x as u32, y as u32, Rgb(actor.color));
                }
            }
            if actor.in_mask(t) {
                let pattern = self
                    .fragmentations
                    .iter()
                    .find(|f| f.actor == actor.id && f.frames.contains(&t))
                    .map(|f| f.pattern);
                for part in silhouette(b, pattern) {
                    mask.fill_box(part, true);
                }
            }
            truth.push(Record::new(t, actor.id, visible).with_class(actor.class.clone()));
        }
        self.sprinkle(&mut mask, t);
        SynthFrame { image, mask, truth }
    }

    fn sprinkle(&self, mask: &mut Mask, t: u64) {
        if self.mask_noise <= 0.0 {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t);
        let n = (self.mask_noise * (self.width as f64 * self.height as f64)).round() as usize;
        for _ in 0..n {
            let x = rng.random_range(0..self.width);
            let y = rng.random_range(0..self.height);
            mask.set(x, y, true);
        }
    }

    pub fn render(&self) -> Rendered {
        let mut out = Rendered {
            frames: Vec::with_capacity(self.frames as usize),
            masks: Vec::with_capacity(self.frames as usize),
            truth: TrajectorySet::new(),
        };
        for t in 0..self.frames {
            let f = self.render_frame(t);
            out.frames.push(f.image);
            out.masks.push(f.mask);
            for r in f.truth {
                out.truth.push(r).expect("actor ids are unique");
            }
        }
        out
    }

    /// Write `frames/NNNNNN.png`, `masks/NNNNNN.png` and `gt.csv` under `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), SynthError> {
        self.validate()?;
        let frames = dir.join("frames");
        let masks = dir.join("masks");
        fs::create_dir_all(&frames)?;
        fs::create_dir_all(&masks)?;
        let mut truth = TrajectorySet::new();
        for t in 0..self.frames {
            let f = self.render_frame(t);
            f.image.save(frames.join(format!("{t:06}.png")))?;
            f.mask.save(&masks.join(format!("{t:06}.png")))?;
            for r in f.truth {
                truth.push(r)?;
            }
        }
        truth.write_csv(fs::File::create(dir.join("gt.csv"))?)?;
        Ok(())
    }
}

/// Mask rectangles for an actor box under an optional split pattern.
fn silhouette(b: BoundingBox, pattern: Option<SplitPattern>) -> Vec<BoundingBox> {
    let rect = |x0: i32, y0: i32, x1: i32, y1: i32| BoundingBox::from_corners(x0, y0, x1, y1).ok();
    let (x0, y0, x1, y1) = (b.x(), b.y(), b.right(), b.bottom());
    let parts = match pattern {
        None => vec![Some(b)],
        Some(SplitPattern::VerticalGap { width }) => {
            let l = x0 + (b.w() - width as i32) / 2;
            vec![rect(x0, y0, l, y1), rect(l + width as i32, y0, x1, y1)]
        }
        Some(SplitPattern::HorizontalGap { height }) => {
            let t = y0 + (b.h() - height as i32) / 2;
            vec![rect(x0, y0, x1, t), rect(x0, t + height as i32, x1, y1)]
        }
        Some(SplitPattern::Truncate { keep }) => {
            let w = ((b.w() as f64 * keep).round() as i32).max(1);
            vec![rect(x0, y0, x0 + w, y1)]
        }
        Some(SplitPattern::Notch { block, gap }) => {
            let bw = (b.w() as f64 * block.0).round() as i32;
            let bh = (b.h() as f64 * block.1).round() as i32;
            let g = gap as i32;
            let (bx, by) = (x1 - bw, y1 - bh);
            vec![
                // L shape: full-height left column plus the top bar
                rect(x0, y0, bx - g, y1),
                rect(bx - g, y0, x1, by - g),
                rect(bx, by, x1, y1),
            ]
        }
    };
    parts.into_iter().flatten().collect()
}

const RED: [u8; 3] = [220, 40, 40];
const BLUE: [u8; 3] = [40, 70, 220];
const GREEN: [u8; 3] = [40, 190, 60];
const YELLOW: [u8; 3] = [235, 220, 40];
const ORANGE: [u8; 3] = [240, 140, 30];
const PURPLE: [u8; 3] = [150, 50, 170];
const BACKGROUND: [u8; 3] = [100, 100, 100];
const NOISE: f64 = 0.0005;

fn stage(name: &str, width: u32, height: u32, frames: u64, actors: Vec<Actor>) -> Scenario {
    Scenario {
        name: name.to_string(),
        width,
        height,
        frames,
        background: BACKGROUND,
        actors,
        fragmentations: Vec::new(),
        mask_noise: NOISE,
        seed: 0,
    }
}

/// Straight-line path from frame `t0` to `t1`.
fn line(t0: u64, from: (f64, f64), t1: u64, to: (f64, f64)) -> Vec<(u64, f64, f64)> {
    vec![(t0, from.0, from.1), (t1, to.0, to.1)]
}

pub const BUILTIN_NAMES: [&str; 8] = [
    "single",
    "crossing",
    "fragmentation",
    "stop-and-exit",
    "drift-split",
    "platoon",
    "lifecycle",
    "traffic",
];

/// Look up a built-in scenario by name.
pub fn builtin(name: &str, seed: u64) -> Result<Scenario, SynthError> {
    let s = match name {
        // one car, 2 px/frame
        "single" => stage(
            name,
            320,
            240,
            60,
            vec![Actor::new(1, "car", RED, (40, 24), line(0, (40.0, 100.0), 59, (158.0, 100.0)))],
        ),
        // head-on pass: silhouettes overlap on frames 21..=29 and the blobs
        // merge a frame or so either side
        "crossing" => stage(
            name,
            320,
            240,
            60,
            vec![
                Actor::new(1, "car", RED, (40, 24), line(0, (40.0, 100.0), 59, (276.0, 100.0))),
                Actor::new(2, "car", BLUE, (40, 24), line(0, (240.0, 112.0), 59, (4.0, 112.0))),
            ],
        ),
        // a split blob, then a partly lost one
        "fragmentation" => {
            let mut s = stage(
                name,
                320,
                240,
                60,
                vec![Actor::new(1, "truck", GREEN, (48, 28), line(0, (40.0, 100.0), 59, (158.0, 100.0)))],
            );
            s.fragmentations = vec![
                Fragmentation {
                    actor: 1,
                    frames: 15..22,
                    pattern: SplitPattern::VerticalGap { width: 8 },
                },
                Fragmentation {
                    actor: 1,
                    frames: 35..42,
                    pattern: SplitPattern::Truncate { keep: 0.65 },
                },
            ];
            s
        }
        // drive, wait, leave through the right edge
        "stop-and-exit" => stage(
            name,
            320,
            240,
            100,
            vec![Actor::new(
                1,
                "car",
                BLUE,
                (40, 24),
                vec![(0, 40.0, 120.0), (20, 100.0, 120.0), (40, 100.0, 120.0), (80, 340.0, 120.0)],
            )],
        ),
        // two identical-looking actors fully overlap mid-sequence
        "drift-split" => stage(
            name,
            320,
            240,
            60,
            vec![
                Actor::new(1, "pedestrian", ORANGE, (20, 40), line(0, (40.0, 100.0), 59, (276.0, 100.0))),
                Actor::new(2, "pedestrian", ORANGE, (20, 40), line(0, (260.0, 100.0), 59, (24.0, 100.0))),
            ],
        ),
        // the second actor pulls in alongside the first and both travel
        // together 4 px apart, sharing one blob
        "platoon" => stage(
            name,
            320,
            240,
            80,
            vec![
                Actor::new(1, "car", RED, (40, 24), line(0, (20.0, 100.0), 79, (257.0, 100.0))),
                Actor::new(2, "car", BLUE, (40, 24), vec![(0, 20.0, 180.0), (15, 65.0, 128.0), (79, 257.0, 128.0)]),
            ],
        ),
        // A: 3-frame mask dropout; B: gone 9 frames; C: 5-frame flicker;
        // D: 8-frame mask dropout
        "lifecycle" => stage(
            name,
            320,
            240,
            70,
            vec![
                Actor::new(1, "car", RED, (30, 20), line(0, (20.0, 30.0), 69, (158.0, 30.0))).dropout(20..23),
                Actor::new(2, "car", BLUE, (30, 20), line(0, (20.0, 110.0), 69, (158.0, 110.0))).absent(30..39),
                Actor::new(3, "cyclist", YELLOW, (20, 20), line(10, (250.0, 30.0), 14, (250.0, 30.0))),
                Actor::new(4, "pedestrian", GREEN, (16, 30), line(0, (260.0, 180.0), 69, (191.0, 180.0))).dropout(30..38),
            ],
        ),
        // 800x600, five vehicles in separate lanes
        "traffic" => stage(
            name,
            800,
            600,
            120,
            vec![
                Actor::new(1, "car", RED, (60, 36), line(0, (20.0, 60.0), 119, (614.0, 60.0))),
                Actor::new(2, "car", BLUE, (60, 36), line(0, (700.0, 170.0), 119, (104.0, 170.0))),
                Actor::new(3, "truck", GREEN, (90, 44), line(0, (60.0, 280.0), 119, (535.0, 280.0))),
                Actor::new(4, "bus", YELLOW, (100, 40), line(0, (650.0, 400.0), 119, (175.0, 400.0))),
                Actor::new(5, "cyclist", PURPLE, (24, 36), line(0, (200.0, 520.0), 119, (557.0, 520.0))),
            ],
        ),
        _ => {
            return Err(SynthError::Unknown {
                name: name.to_string(),
                available: BUILTIN_NAMES.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    Ok(s.with_seed(seed))
}

/// Every built-in scenario.
pub fn builtin_scenarios(seed: u64) -> Vec<Scenario> {
    BUILTIN_NAMES
        .iter()
        .map(|n| builtin(n, seed).expect("builtin names resolve"))
        .collect()
}
