//! Per-frame association between candidate regions and tracker outputs.

use crate::foreground::CandidateRegion;
use crate::geometry::{overlap, BoundingBox};

use super::TrackState;

/// Result of matching tracker outputs to candidate regions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Association {
    /// For each region, the indices of the tracker outputs assigned to it.
    pub members: Vec<Vec<usize>>,
    /// Tracker outputs overlapping no region.
    pub invisible: Vec<usize>,
}

impl Association {
    /// State implied for region `i`: one output means tracked, several mean
    /// occluded, none means a new object.
    pub fn region_state(&self, i: usize) -> TrackState {
        match self.members[i].len() {
            0 => TrackState::NewObject,
            1 => TrackState::Tracked,
            _ => TrackState::Occluded,
        }
    }

    /// Region the output `o` was assigned to, if any.
    pub fn region_of(&self, o: usize) -> Option<usize> {
        self.members.iter().position(|m| m.contains(&o))
    }
}

/// Assign every tracker output to the region it overlaps most (ties go to the
/// lower region index). Outputs overlapping nothing are invisible.
pub fn classify(regions: &[CandidateRegion], outputs: &[BoundingBox]) -> Association {
    let mut assoc = Association {
        members: vec![Vec::new(); regions.len()],
        invisible: Vec::new(),
    };
    for (o, out) in outputs.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in regions.iter().enumerate() {
            let ov = overlap(out, &r.bbox);
            if ov > 0.0 && best.is_none_or(|(_, b)| ov > b) {
                best = Some((i, ov));
            }
        }
        match best {
            Some((i, _)) => assoc.members[i].push(o),
            None => assoc.invisible.push(o),
        }
    }
    assoc
}

/// Which box extends a tracked object's trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxSource {
    /// Keep the correlation-filter box (the blob shrank from fragmentation).
    Tracker,
    /// Take the blob box and re-initialize the filter at its scale.
    Region,
}

/// The tracker box wins only when `T_ol ≤ A(tracker)/A(region) ≤ T_oh`.
pub fn choose_source(tracker: &BoundingBox, region: &BoundingBox, t_ol: f64, t_oh: f64) -> BoxSource {
    let rho = tracker.area() as f64 / region.area() as f64;
    if t_ol <= rho && rho <= t_oh {
        BoxSource::Tracker
    } else {
        BoxSource::Region
    }
}

/// Two trackers inside one region whose boxes together exceed the region's
/// area are likely on the same object.
pub fn redundant_pair(a: &BoundingBox, b: &BoundingBox, region: &BoundingBox) -> bool {
    a.area() + b.area() > region.area()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x: i32, y: i32, w: i32, h: i32) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn region(x: i32, y: i32, w: i32, h: i32) -> CandidateRegion {
        CandidateRegion::from_box(bb(x, y, w, h))
    }

    #[test]
    fn four_states() {
        let a = classify(&[region(0, 0, 10, 10)], &[bb(2, 0, 10, 10)]);
        assert_eq!(a.region_state(0), TrackState::Tracked);

        let a = classify(&[region(0, 0, 20, 10)], &[bb(0, 0, 10, 10), bb(10, 0, 10, 10)]);
        assert_eq!(a.region_state(0), TrackState::Occluded);
        assert_eq!(a.members[0], vec![0, 1]);

        let a = classify(&[region(0, 0, 10, 10)], &[]);
        assert_eq!(a.region_state(0), TrackState::NewObject);

        let a = classify(&[], &[bb(0, 0, 10, 10)]);
        assert_eq!(a.invisible, vec![0]);
    }

    #[test]
    fn output_goes_to_max_overlap_region() {
        let regions = [region(0, 0, 10, 10), region(12, 0, 10, 10)];
        let a = classify(&regions, &[bb(8, 0, 10, 10)]);
        assert_eq!(a.members, vec![vec![], vec![0]]);
        assert_eq!(a.region_of(0), Some(1));
        assert_eq!(a.region_state(0), TrackState::NewObject);
    }

    #[test]
    fn ties_go_to_lower_region_index() {
        let regions = [region(0, 0, 10, 10), region(20, 0, 10, 10)];
        let a = classify(&regions, &[bb(5, 0, 20, 10)]);
        assert_eq!(a.members, vec![vec![0], vec![]]);
    }

    #[test]
    fn box_source_examples() {
        let cor = bb(0, 0, 10, 10);
        assert_eq!(choose_source(&bb(0, 0, 15, 10), &cor, 1.4, 1.8), BoxSource::Tracker);
        assert_eq!(choose_source(&bb(0, 0, 10, 10), &cor, 1.4, 1.8), BoxSource::Region);
        assert_eq!(choose_source(&bb(0, 0, 20, 10), &cor, 1.4, 1.8), BoxSource::Region);
    }

    #[test]
    fn redundancy_area_examples() {
        let cor = bb(0, 0, 20, 10);
        assert!(!redundant_pair(&bb(0, 0, 5, 10), &bb(10, 0, 5, 10), &cor));
        let cor = bb(0, 0, 10, 10);
        assert!(redundant_pair(&bb(0, 0, 8, 10), &bb(2, 0, 8, 10), &cor));
    }
}
