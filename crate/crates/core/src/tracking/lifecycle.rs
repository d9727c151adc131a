//! Track termination and trajectory repair.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::geometry::BoundingBox;

use super::{ManagerParams, Track, TrackState};

/// What to do with a track that has just spent another frame invisible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvisibleOutcome {
    Keep,
    /// Emit the trajectory and retire the track.
    Finalize,
    /// Retire the track without output: it was too short-lived.
    Discard,
}

/// `invisible_count` consecutive invisible frames for a track with
/// `lifetime` recorded boxes.
pub fn invisible_outcome(invisible_count: u32, lifetime: usize, p: &ManagerParams) -> InvisibleOutcome {
    if invisible_count <= p.invisible_max {
        InvisibleOutcome::Keep
    } else if lifetime < p.min_lifetime as usize {
        InvisibleOutcome::Discard
    } else {
        InvisibleOutcome::Finalize
    }
}

/// Fill interior frame gaps by componentwise linear interpolation between
/// the nearest recorded neighbors. Nothing is extrapolated.
pub fn interpolate(boxes: &BTreeMap<u64, BoundingBox>) -> BTreeMap<u64, BoundingBox> {
    let mut out = boxes.clone();
    for ((&fa, a), (&fb, b)) in boxes.iter().zip(boxes.iter().skip(1)) {
        let span = (fb - fa) as f64;
        let lerp = |u: i32, v: i32, t: f64| (u as f64 + (v - u) as f64 * t).round() as i32;
        for f in fa + 1..fb {
            let t = (f - fa) as f64 / span;
            let bbox = BoundingBox::new(
                lerp(a.x(), b.x(), t),
                lerp(a.y(), b.y(), t),
                lerp(a.w(), b.w(), t).max(1),
                lerp(a.h(), b.h(), t).max(1),
            )
            .expect("interpolated size is positive");
            out.insert(f, bbox);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrajectoryPoint {
    pub bbox: BoundingBox,
    pub state: TrackState,
    /// Filled in by interpolation rather than observed.
    pub interpolated: bool,
}

/// A completed object trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trajectory {
    pub id: u64,
    pub birth_frame: u64,
    pub points: BTreeMap<u64, TrajectoryPoint>,
}

/// Build the output trajectory of a retired track: recorded boxes plus
/// interpolated interior gaps. Trailing invisible frames were never recorded
/// and so are excluded.
pub fn finalize(track: &Track) -> Trajectory {
    let points = interpolate(&track.boxes)
        .into_iter()
        .map(|(f, bbox)| {
            let recorded = track.boxes.contains_key(&f);
            let state = if recorded {
                track.states.get(&f).copied().unwrap_or(TrackState::Tracked)
            } else {
                TrackState::Invisible
            };
            (
                f,
                TrajectoryPoint {
                    bbox,
                    state,
                    interpolated: !recorded,
                },
            )
        })
        .collect();
    Trajectory {
        id: track.id,
        birth_frame: track.birth_frame,
        points,
    }
}
