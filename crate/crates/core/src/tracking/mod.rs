//! Multi-object manager combining per-object correlation filters with
//! background-subtraction regions.
//!
//! Every frame, each live filter is stepped to produce a tracker output. The
//! outputs are matched to the frame's candidate regions by overlap, and each
//! region falls into one of four cases:
//!
//! * one output: the object is isolated. The trajectory takes the region box
//!   and the filter is re-initialized on it, unless the region shrank by a
//!   factor within `[T_ol, T_oh]`, in which case the filter box is kept.
//! * several outputs: the objects are occluding each other. Each trajectory
//!   takes its own filter box, scale untouched, and the tracks are grouped.
//!   Pairs of filters whose boxes together exceed the region for
//!   `redundancy_frames` consecutive frames are treated as duplicates and
//!   the newer one is deleted.
//! * no output: a new object, unless a group member shows two filters piled
//!   on one region, in which case the weaker of them is moved to this region.
//! * outputs matching no region are invisible; after `invisible_max`
//!   consecutive invisible frames the track is retired.

pub mod association;
pub mod lifecycle;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::ColorNamesTable;
use crate::foreground::{self, BlobParams, CandidateRegion, Mask};
use crate::geometry::{overlap, BoundingBox};
use crate::kcf::{KcfModel, KcfParams, Response};

pub use association::{choose_source, classify, redundant_pair, Association, BoxSource};
pub use lifecycle::{interpolate, invisible_outcome, InvisibleOutcome, Trajectory, TrajectoryPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackState {
    Tracked,
    Occluded,
    #[serde(rename = "new")]
    NewObject,
    Invisible,
}

impl TrackState {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrackState::Tracked => "tracked",
            TrackState::Occluded => "occluded",
            TrackState::NewObject => "new",
            TrackState::Invisible => "invisible",
        }
    }
}

impl fmt::Display for TrackState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrackState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tracked" => Ok(TrackState::Tracked),
            "occluded" => Ok(TrackState::Occluded),
            "new" | "newobject" => Ok(TrackState::NewObject),
            "invisible" => Ok(TrackState::Invisible),
            other => Err(format!("unknown track state {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManagerParams {
    #[serde(rename = "T_ol")]
    pub t_ol: f64,
    #[serde(rename = "T_oh")]
    pub t_oh: f64,
    pub invisible_max: u32,
    pub min_lifetime: u32,
    pub redundancy_frames: u32,
    pub blob: BlobParams,
    pub kcf: KcfParams,
}

impl Default for ManagerParams {
    fn default() -> Self {
        ManagerParams {
            t_ol: 1.4,
            t_oh: 1.8,
            invisible_max: 8,
            min_lifetime: 6,
            redundancy_frames: 8,
            blob: BlobParams::default(),
            kcf: KcfParams::default(),
        }
    }
}

impl ManagerParams {
    pub fn validate(&self) -> Result<(), TrackError> {
        let bad = |m: String| Err(TrackError::InvalidParams(m));
        if !(1.0 < self.t_ol && self.t_ol < self.t_oh) {
            return bad(format!("need 1 < T_ol < T_oh, got {} and {}", self.t_ol, self.t_oh));
        }
        if self.invisible_max == 0 || self.min_lifetime == 0 || self.redundancy_frames == 0 {
            return bad("invisible_max, min_lifetime and redundancy_frames must be >= 1".into());
        }
        self.blob.validate().or_else(bad)?;
        self.kcf.validate().map_err(|e| TrackError::InvalidParams(e.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("frame {frame}: mask is {mask:?} but frame is {image:?}")]
    DimensionMismatch {
        frame: u64,
        mask: (u32, u32),
        image: (u32, u32),
    },
    #[error("frame {frame} arrived after frame {last}; frames must be strictly increasing")]
    OutOfOrder { frame: u64, last: u64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// One object's live tracking state.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    /// Recorded trajectory boxes by frame.
    pub boxes: BTreeMap<u64, BoundingBox>,
    /// State per processed frame, including invisible ones.
    pub states: BTreeMap<u64, TrackState>,
    pub model: KcfModel,
    pub group: Option<u64>,
    pub invisible_count: u32,
    /// Largest consecutive-frame redundancy count among this track's pairs.
    pub redundancy_count: u32,
    pub birth_frame: u64,
    /// Where the filter currently sits; searched around on the next frame.
    pub position: BoundingBox,
}

impl Track {
    /// Number of frames with a recorded box.
    pub fn lifetime(&self) -> usize {
        self.boxes.len()
    }

    fn record(&mut self, frame: u64, bbox: BoundingBox, state: TrackState) {
        self.boxes.insert(frame, bbox);
        self.states.insert(frame, state);
        self.invisible_count = 0;
    }

    /// "Newer" in the duplicate-tracker sense: later birth, then larger id.
    fn newer_than(&self, other: &Track) -> bool {
        (self.birth_frame, self.id) > (other.birth_frame, other.id)
    }
}

/// Bounding box a filter produced on the current frame.
#[derive(Debug, Clone)]
pub struct TrackerOutput {
    pub track_id: u64,
    pub bbox: BoundingBox,
    pub response: Response,
}

/// Online per-frame output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FrameRecord {
    pub frame: u64,
    pub track_id: u64,
    pub bbox: BoundingBox,
    pub state: TrackState,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub frames: u64,
    pub created: u64,
    pub finalized: u64,
    pub discarded: u64,
    pub redundant_deleted: u64,
    pub reassigned: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimings {
    pub foreground: Duration,
    pub kcf: Duration,
    pub association: Duration,
}

/// How a filter's model is brought up to date at the end of a frame.
#[derive(Debug, Clone, Copy)]
enum Refresh {
    /// Train from scratch on this box.
    Retrain(BoundingBox),
    /// Blend in the appearance at this box by the learning rate.
    Blend(BoundingBox),
}

#[derive(Debug, Clone)]
struct Group {
    members: BTreeSet<u64>,
    /// Region the group last shared.
    region: BoundingBox,
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Finalized trajectories ordered by id.
    pub trajectories: Vec<Trajectory>,
    pub stats: RunStats,
    pub timings: StageTimings,
}

impl RunOutput {
    /// All trajectory points as `(frame, id, point)`, ordered by frame then id.
    pub fn rows(&self) -> Vec<(u64, u64, TrajectoryPoint)> {
        let mut rows: Vec<_> = self
            .trajectories
            .iter()
            .flat_map(|t| t.points.iter().map(move |(f, p)| (*f, t.id, *p)))
            .collect();
        rows.sort_by_key(|(f, id, _)| (*f, *id));
        rows
    }
}

/// The online multi-object tracker.
pub struct Manager {
    params: ManagerParams,
    table: ColorNamesTable,
    tracks: Vec<Track>,
    groups: BTreeMap<u64, Group>,
    pair_counts: BTreeMap<(u64, u64), u32>,
    /// Model refreshes scheduled for the current frame, by track id.
    pending: BTreeMap<u64, Refresh>,
    next_id: u64,
    next_group: u64,
    last_frame: Option<u64>,
    finished: Vec<Trajectory>,
    stats: RunStats,
    timings: StageTimings,
}

impl Manager {
    pub fn new(params: ManagerParams, table: ColorNamesTable) -> Result<Self, TrackError> {
        params.validate()?;
        Ok(Manager {
            params,
            table,
            tracks: Vec::new(),
            groups: BTreeMap::new(),
            pair_counts: BTreeMap::new(),
            pending: BTreeMap::new(),
            next_id: 1,
            next_group: 1,
            last_frame: None,
            finished: Vec::new(),
            stats: RunStats::default(),
            timings: StageTimings::default(),
        })
    }

    pub fn params(&self) -> &ManagerParams {
        &self.params
    }

    /// Live tracks ordered by id.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    /// Trajectories retired so far.
    pub fn finished(&self) -> &[Trajectory] {
        &self.finished
    }

    /// Run blob analysis on `mask`, then track against the resulting regions.
    pub fn process_frame(&mut self, index: u64, frame: &RgbImage, mask: &Mask) -> Result<Vec<FrameRecord>, TrackError> {
        if (mask.width(), mask.height()) != frame.dimensions() {
            return Err(TrackError::DimensionMismatch {
                frame: index,
                mask: (mask.width(), mask.height()),
                image: frame.dimensions(),
            });
        }
        let start = Instant::now();
        let regions = foreground::candidate_regions(mask, &self.params.blob);
        self.timings.foreground += start.elapsed();
        self.process_regions(index, frame, &regions)
    }

    /// Track one frame given its candidate regions.
    pub fn process_regions(
        &mut self,
        index: u64,
        frame: &RgbImage,
        regions: &[CandidateRegion],
    ) -> Result<Vec<FrameRecord>, TrackError> {
        if let Some(last) = self.last_frame {
            if index <= last {
                return Err(TrackError::OutOfOrder { frame: index, last });
            }
        }
        self.last_frame = Some(index);
        self.stats.frames += 1;

        let start = Instant::now();
        let outputs = self.step_trackers(frame);
        self.timings.kcf += start.elapsed();

        let start = Instant::now();
        self.associate(index, frame, regions, outputs);
        self.timings.association += start.elapsed();

        let start = Instant::now();
        self.refresh_models(frame);
        self.timings.kcf += start.elapsed();

        Ok(self.current_records(index))
    }

    /// Locate every live filter on the frame; failures yield no output. Each
    /// located filter is scheduled to learn the appearance where it landed,
    /// which the handlers may replace by a retrain.
    fn step_trackers(&mut self, frame: &RgbImage) -> Vec<(usize, TrackerOutput)> {
        let table = &self.table;
        let located: Vec<_> = self
            .tracks
            .par_iter()
            .map(|t| t.model.locate(frame, t.position, table).ok())
            .collect();
        let mut outputs = Vec::new();
        for (ti, result) in located.into_iter().enumerate() {
            if let Some((bbox, response)) = result {
                let track = &self.tracks[ti];
                self.pending.insert(track.id, Refresh::Blend(bbox));
                outputs.push((
                    ti,
                    TrackerOutput {
                        track_id: track.id,
                        bbox,
                        response,
                    },
                ));
            }
        }
        outputs
    }

    /// Apply the scheduled model refreshes, in parallel.
    fn refresh_models(&mut self, frame: &RgbImage) {
        let pending = std::mem::take(&mut self.pending);
        let table = &self.table;
        self.tracks.par_iter_mut().for_each(|t| {
            let (model, bbox) = match pending.get(&t.id) {
                Some(Refresh::Retrain(b)) => (KcfModel::initialize(frame, *b, table, &t.model.params), *b),
                Some(Refresh::Blend(b)) => (t.model.update_at(frame, *b, table), *b),
                None => return,
            };
            if let Ok(model) = model {
                t.model = model;
            }
            t.position = bbox;
        });
    }

    fn current_records(&self, index: u64) -> Vec<FrameRecord> {
        self.tracks
            .iter()
            .filter_map(|t| {
                let state = *t.states.get(&index)?;
                let bbox = *t.boxes.get(&index)?;
                Some(FrameRecord {
                    frame: index,
                    track_id: t.id,
                    bbox,
                    state,
                })
            })
            .collect()
    }

    fn associate(&mut self, index: u64, frame: &RgbImage, regions: &[CandidateRegion], outputs: Vec<(usize, TrackerOutput)>) {
        let boxes: Vec<BoundingBox> = outputs.iter().map(|(_, o)| o.bbox).collect();
        let mut assoc = classify(regions, &boxes);

        // Orphan regions may be explained by a filter that drifted onto a
        // fellow group member during an occlusion.
        let mut reassigned: BTreeMap<usize, usize> = BTreeMap::new();
        for ri in 0..regions.len() {
            if !assoc.members[ri].is_empty() {
                continue;
            }
            if let Some(oi) = self.find_drifted(&regions[ri], regions, &assoc, &outputs) {
                for m in assoc.members.iter_mut() {
                    m.retain(|o| *o != oi);
                }
                reassigned.insert(ri, oi);
            }
        }

        let mut touched_pairs = BTreeSet::new();
        let mut deleted = BTreeSet::new();
        for (ri, members) in assoc.members.iter().enumerate() {
            match members.len() {
                0 => {}
                1 => {
                    let (ti, out) = &outputs[members[0]];
                    self.handle_tracked(*ti, &regions[ri], out.bbox, index);
                }
                _ => {
                    let group: Vec<(usize, BoundingBox)> =
                        members.iter().map(|o| (outputs[*o].0, outputs[*o].1.bbox)).collect();
                    self.handle_occluded(&group, &regions[ri], index, &mut touched_pairs, &mut deleted);
                }
            }
        }
        self.pair_counts.retain(|k, _| touched_pairs.contains(k));

        for (ri, oi) in &reassigned {
            let ti = outputs[*oi].0;
            let bbox = regions[*ri].bbox;
            self.leave_group(ti);
            let track = &mut self.tracks[ti];
            self.pending.insert(track.id, Refresh::Retrain(bbox));
            track.record(index, bbox, TrackState::Tracked);
            self.stats.reassigned += 1;
        }

        for (ri, region) in regions.iter().enumerate() {
            if assoc.members[ri].is_empty() && !reassigned.contains_key(&ri) {
                self.handle_new(region, index, frame);
            }
        }

        // Outputs matching no region, and filters that failed to step.
        let mut invisible: BTreeSet<usize> = assoc.invisible.iter().map(|o| outputs[*o].0).collect();
        let stepped: BTreeSet<usize> = outputs.iter().map(|(ti, _)| *ti).collect();
        invisible.extend((0..self.tracks.len()).filter(|ti| !stepped.contains(ti)));
        // skip anything that already recorded a box this frame (new or reassigned)
        invisible.retain(|ti| !self.tracks[*ti].boxes.contains_key(&index));

        let mut retire = BTreeMap::new();
        for ti in invisible {
            let track = &mut self.tracks[ti];
            track.invisible_count += 1;
            track.states.insert(index, TrackState::Invisible);
            match invisible_outcome(track.invisible_count, track.lifetime(), &self.params) {
                InvisibleOutcome::Keep => {}
                outcome => {
                    retire.insert(track.id, outcome);
                }
            }
        }
        for id in &deleted {
            retire.insert(*id, InvisibleOutcome::Discard);
        }
        self.retire(&retire);

        for track in &mut self.tracks {
            track.redundancy_count = self
                .pair_counts
                .iter()
                .filter(|((a, b), _)| *a == track.id || *b == track.id)
                .map(|(_, c)| *c)
                .max()
                .unwrap_or(0);
        }
    }

    fn handle_tracked(&mut self, ti: usize, region: &CandidateRegion, out: BoundingBox, index: u64) {
        self.leave_group(ti);
        let p = self.params;
        let track = &mut self.tracks[ti];
        match choose_source(&out, &region.bbox, p.t_ol, p.t_oh) {
            BoxSource::Tracker => track.record(index, out, TrackState::Tracked),
            BoxSource::Region => {
                self.pending.insert(track.id, Refresh::Retrain(region.bbox));
                track.record(index, region.bbox, TrackState::Tracked);
            }
        }
    }

    fn handle_occluded(
        &mut self,
        members: &[(usize, BoundingBox)],
        region: &CandidateRegion,
        index: u64,
        touched_pairs: &mut BTreeSet<(u64, u64)>,
        deleted: &mut BTreeSet<u64>,
    ) {
        for (ti, out) in members {
            self.tracks[*ti].record(index, *out, TrackState::Occluded);
        }
        self.join_group(members.iter().map(|(ti, _)| *ti), region.bbox);

        let mut expired = Vec::new();
        for (i, (ta, a)) in members.iter().enumerate() {
            for (tb, b) in &members[i + 1..] {
                let (ida, idb) = (self.tracks[*ta].id, self.tracks[*tb].id);
                let key = (ida.min(idb), ida.max(idb));
                touched_pairs.insert(key);
                if redundant_pair(a, b, &region.bbox) {
                    let count = self.pair_counts.entry(key).or_insert(0);
                    *count += 1;
                    if *count >= self.params.redundancy_frames {
                        expired.push((*ta, *tb));
                    }
                } else {
                    self.pair_counts.remove(&key);
                }
            }
        }
        for (ta, tb) in expired {
            let (a, b) = (&self.tracks[ta], &self.tracks[tb]);
            if deleted.contains(&a.id) || deleted.contains(&b.id) {
                continue;
            }
            let (survivor, newer) = if b.newer_than(a) { (ta, tb) } else { (tb, ta) };
            let newer_id = self.tracks[newer].id;
            deleted.insert(newer_id);
            self.pair_counts.retain(|(x, y), _| *x != newer_id && *y != newer_id);
            self.stats.redundant_deleted += 1;
            let track = &mut self.tracks[survivor];
            self.pending.insert(track.id, Refresh::Retrain(region.bbox));
            track.record(index, region.bbox, TrackState::Occluded);
        }
    }

    fn handle_new(&mut self, region: &CandidateRegion, index: u64, frame: &RgbImage) {
        let Ok(model) = KcfModel::initialize(frame, region.bbox, &self.table, &self.params.kcf) else {
            return;
        };
        let mut track = Track {
            id: self.next_id,
            boxes: BTreeMap::new(),
            states: BTreeMap::new(),
            model,
            group: None,
            invisible_count: 0,
            redundancy_count: 0,
            birth_frame: index,
            position: region.bbox,
        };
        track.record(index, region.bbox, TrackState::NewObject);
        self.next_id += 1;
        self.stats.created += 1;
        self.tracks.push(track);
    }

    /// Find a filter to move onto the orphan `region`: some group that last
    /// shared an area overlapping the orphan has two or more members' outputs
    /// inside one current region. The member matching that region least is
    /// chosen, newer tracks first on ties.
    fn find_drifted(
        &self,
        orphan: &CandidateRegion,
        regions: &[CandidateRegion],
        assoc: &Association,
        outputs: &[(usize, TrackerOutput)],
    ) -> Option<usize> {
        for group in self.groups.values() {
            if overlap(&orphan.bbox, &group.region) <= 0.0 {
                continue;
            }
            for (ri, members) in assoc.members.iter().enumerate() {
                let inside: Vec<usize> = members
                    .iter()
                    .copied()
                    .filter(|o| group.members.contains(&outputs[*o].1.track_id))
                    .collect();
                if inside.len() < 2 {
                    continue;
                }
                let score = |o: usize| overlap(&outputs[o].1.bbox, &regions[ri].bbox);
                return inside.into_iter().min_by(|a, b| {
                    score(*a)
                        .total_cmp(&score(*b))
                        .then(outputs[*b].1.track_id.cmp(&outputs[*a].1.track_id))
                });
            }
        }
        None
    }

    fn join_group(&mut self, members: impl Iterator<Item = usize>, region: BoundingBox) {
        let members: Vec<usize> = members.collect();
        let existing: BTreeSet<u64> = members.iter().filter_map(|ti| self.tracks[*ti].group).collect();
        let gid = match existing.first() {
            Some(g) => *g,
            None => {
                self.next_group += 1;
                self.next_group - 1
            }
        };
        let mut all: BTreeSet<u64> = members.iter().map(|ti| self.tracks[*ti].id).collect();
        for g in existing.iter().filter(|g| **g != gid) {
            if let Some(old) = self.groups.remove(g) {
                all.extend(old.members);
            }
        }
        let group = self.groups.entry(gid).or_insert_with(|| Group {
            members: BTreeSet::new(),
            region,
        });
        group.region = region;
        group.members.extend(all.iter().copied());
        for t in self.tracks.iter_mut().filter(|t| all.contains(&t.id)) {
            t.group = Some(gid);
        }
    }

    fn leave_group(&mut self, ti: usize) {
        let track = &mut self.tracks[ti];
        if let Some(gid) = track.group.take() {
            if let Some(g) = self.groups.get_mut(&gid) {
                g.members.remove(&track.id);
                if g.members.is_empty() {
                    self.groups.remove(&gid);
                }
            }
        }
    }

    fn retire(&mut self, outcomes: &BTreeMap<u64, InvisibleOutcome>) {
        if outcomes.is_empty() {
            return;
        }
        let (gone, live): (Vec<Track>, Vec<Track>) = std::mem::take(&mut self.tracks)
            .into_iter()
            .partition(|t| outcomes.contains_key(&t.id));
        self.tracks = live;
        for track in gone {
            for g in self.groups.values_mut() {
                g.members.remove(&track.id);
            }
            self.pair_counts.retain(|(a, b), _| *a != track.id && *b != track.id);
            match outcomes[&track.id] {
                InvisibleOutcome::Finalize => {
                    self.stats.finalized += 1;
                    self.finished.push(lifecycle::finalize(&track));
                }
                _ => self.stats.discarded += 1,
            }
        }
        self.groups.retain(|_, g| !g.members.is_empty());
    }

    /// End of sequence: retire every live track under the lifetime rule.
    pub fn finish(mut self) -> RunOutput {
        let min = self.params.min_lifetime as usize;
        let outcomes: BTreeMap<u64, InvisibleOutcome> = self
            .tracks
            .iter()
            .map(|t| {
                let o = if t.lifetime() < min {
                    InvisibleOutcome::Discard
                } else {
                    InvisibleOutcome::Finalize
                };
                (t.id, o)
            })
            .collect();
        self.retire(&outcomes);
        let mut trajectories = self.finished;
        trajectories.sort_by_key(|t| t.id);
        RunOutput {
            trajectories,
            stats: self.stats,
            timings: self.timings,
        }
    }
}
