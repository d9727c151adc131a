//! CLEAR MOT evaluation (MOTA, MOTP) over trajectory files.
//!
//! Objects and hypotheses are matched per frame by centroid distance.
//! Correspondences from the previous frame are kept while they stay under the
//! threshold; the rest are resolved by a minimum-cost assignment. A ground
//! truth object whose matched hypothesis id differs from its last match
//! counts as an identity switch.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use pathfinding::kuhn_munkres::kuhn_munkres_min;
use pathfinding::matrix::Matrix;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::BoundingBox;

pub const DEFAULT_MATCH_THRESHOLD: f64 = 50.0;

/// Class tags reported on their own rows; anything else is `other`.
pub const KNOWN_CLASSES: [&str; 5] = ["car", "pedestrian", "cyclist", "truck", "bus"];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("duplicate record for id {id} in frame {frame}")]
    Duplicate { frame: u64, id: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Record {
    pub frame: u64,
    pub id: u64,
    pub bbox: BoundingBox,
    pub class: Option<String>,
}

impl Record {
    pub fn new(frame: u64, id: u64, bbox: BoundingBox) -> Self {
        Record {
            frame,
            id,
            bbox,
            class: None,
        }
    }

    pub fn with_class(mut self, class: impl Into<String>) -> Self {
        self.class = Some(class.into());
        self
    }
}

/// Per-frame boxes keyed by object id; at most one record per `(frame, id)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrajectorySet {
    records: Vec<Record>,
    keys: HashSet<(u64, u64)>,
}

impl TrajectorySet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = Record>) -> Result<Self, MetricsError> {
        let mut set = Self::new();
        for r in records {
            set.push(r)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, r: Record) -> Result<(), MetricsError> {
        if !self.keys.insert((r.frame, r.id)) {
            return Err(MetricsError::Duplicate { frame: r.frame, id: r.id });
        }
        self.records.push(r);
        Ok(())
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.records.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn by_frame(&self) -> BTreeMap<u64, Vec<&Record>> {
        let mut frames: BTreeMap<u64, Vec<&Record>> = BTreeMap::new();
        for r in &self.records {
            frames.entry(r.frame).or_default().push(r);
        }
        for v in frames.values_mut() {
            v.sort_by_key(|r| r.id);
        }
        frames
    }

    fn filtered(&self, keep: impl Fn(&Record) -> bool) -> Self {
        let records: Vec<Record> = self.records.iter().filter(|r| keep(r)).cloned().collect();
        let keys = records.iter().map(|r| (r.frame, r.id)).collect();
        TrajectorySet { records, keys }
    }

    /// Parse `frame,id,x,y,w,h[,class]`. Extra columns (such as `state`) are
    /// ignored; the header decides which column is which.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, MetricsError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let mut cols = [0usize; 6];
        for (slot, name) in cols.iter_mut().zip(["frame", "id", "x", "y", "w", "h"]) {
            *slot = col(name).ok_or_else(|| MetricsError::Malformed {
                line: 1,
                message: format!("missing column {name:?}"),
            })?;
        }
        let class_col = col("class");

        let mut set = Self::new();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let bad = |message: String| MetricsError::Malformed { line, message };
            let field = |i: usize| row.get(i).ok_or_else(|| bad(format!("missing field {}", i + 1)));
            let int = |i: usize| -> Result<i64, MetricsError> {
                let s = field(i)?;
                s.parse::<i64>()
                    .or_else(|_| {
                        // accept integral floats such as "12.0"
                        s.parse::<f64>()
                            .ok()
                            .filter(|v| v.fract() == 0.0)
                            .map(|v| v as i64)
                            .ok_or(())
                    })
                    .map_err(|_| bad(format!("not an integer: {s:?}")))
            };
            let frame = int(cols[0])?;
            let id = int(cols[1])?;
            if frame < 0 || id < 0 {
                return Err(bad("frame and id must be non-negative".into()));
            }
            let bbox = BoundingBox::new(
                int(cols[2])? as i32,
                int(cols[3])? as i32,
                int(cols[4])? as i32,
                int(cols[5])? as i32,
            )
            .map_err(|e| bad(e.to_string()))?;
            let class = class_col
                .and_then(|c| row.get(c))
                .filter(|s| !s.is_empty())
                .map(str::to_string);
            set.push(Record {
                frame: frame as u64,
                id: id as u64,
                bbox,
                class,
            })
            .map_err(|e| bad(e.to_string()))?;
        }
        Ok(set)
    }

    pub fn read_csv(path: &Path) -> Result<Self, MetricsError> {
        Self::from_csv(File::open(path)?)
    }

    /// Write records ordered by frame then id, with a class column when any
    /// record carries one.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), MetricsError> {
        let with_class = self.records.iter().any(|r| r.class.is_some());
        let mut rows: Vec<&Record> = self.records.iter().collect();
        rows.sort_by_key(|r| (r.frame, r.id));
        let mut text = String::from("frame,id,x,y,w,h");
        if with_class {
            text.push_str(",class");
        }
        text.push('\n');
        for r in rows {
            let b = r.bbox;
            write!(text, "{},{},{},{},{},{}", r.frame, r.id, b.x(), b.y(), b.w(), b.h()).unwrap();
            if with_class {
                write!(text, ",{}", r.class.as_deref().unwrap_or("")).unwrap();
            }
            text.push('\n');
        }
        out.write_all(text.as_bytes())?;
        Ok(())
    }
}

/// Accumulated CLEAR MOT tallies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotScore {
    pub misses: u64,
    pub false_positives: u64,
    pub id_switches: u64,
    pub matches: u64,
    pub total_gt: u64,
    /// Sum of matched centroid distances in pixels.
    pub distance_sum: f64,
    /// `None` when there is no ground truth to score against.
    pub mota: Option<f64>,
    /// Mean matched distance in pixels; 0 without matches.
    pub motp: f64,
}

impl MotScore {
    fn from_tallies(misses: u64, false_positives: u64, id_switches: u64, matches: u64, total_gt: u64, distance_sum: f64) -> Self {
        let errors = (misses + false_positives + id_switches) as f64;
        MotScore {
            misses,
            false_positives,
            id_switches,
            matches,
            total_gt,
            distance_sum,
            mota: (total_gt > 0).then(|| 1.0 - errors / total_gt as f64),
            motp: if matches > 0 { distance_sum / matches as f64 } else { 0.0 },
        }
    }
}

/// One matched pair: `(frame, gt id, hypothesis id)`.
pub type Match = (u64, u64, u64);

const COST_SCALE: f64 = 1e6;
const FORBIDDEN: i64 = 1_000_000_000_000;

/// Minimum-total-distance assignment restricted to pairs under `threshold`.
fn assign(dist: &[Vec<f64>], threshold: f64) -> Vec<(usize, usize)> {
    let rows = dist.len();
    let cols = dist.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let n = rows.max(cols);
    let mut weights = Matrix::new(n, n, FORBIDDEN);
    for (i, row) in dist.iter().enumerate() {
        for (j, d) in row.iter().enumerate() {
            if *d < threshold {
                weights[(i, j)] = (d * COST_SCALE).round() as i64;
            }
        }
    }
    let (_, cols_for_row) = kuhn_munkres_min(&weights);
    cols_for_row
        .into_iter()
        .enumerate()
        .filter(|&(i, j)| i < rows && j < cols && dist[i][j] < threshold)
        .collect()
}

/// Score `hyp` against `gt`, also returning every matched pair.
pub fn evaluate_detailed(gt: &TrajectorySet, hyp: &TrajectorySet, threshold: f64) -> (MotScore, Vec<Match>) {
    let gt_frames = gt.by_frame();
    let hyp_frames = hyp.by_frame();
    let mut frames: Vec<u64> = gt_frames.keys().chain(hyp_frames.keys()).copied().collect();
    frames.sort_unstable();
    frames.dedup();

    let (mut misses, mut fps, mut switches, mut matches) = (0u64, 0u64, 0u64, 0u64);
    let mut distance_sum = 0.0;
    let mut current: HashMap<u64, u64> = HashMap::new();
    let mut last_match: HashMap<u64, u64> = HashMap::new();
    let mut pairs = Vec::new();
    let empty = Vec::new();

    for f in frames {
        let g = gt_frames.get(&f).unwrap_or(&empty);
        let h = hyp_frames.get(&f).unwrap_or(&empty);
        let dist: Vec<Vec<f64>> = g
            .iter()
            .map(|a| {
                let ca = a.bbox.centroid();
                h.iter().map(|b| ca.distance(&b.bbox.centroid())).collect()
            })
            .collect();

        let mut g_used = vec![false; g.len()];
        let mut h_used = vec![false; h.len()];
        let mut frame_matches: Vec<(usize, usize)> = Vec::new();

        // keep last frame's correspondences that are still valid
        for (i, a) in g.iter().enumerate() {
            if let Some(hid) = current.get(&a.id) {
                if let Some(j) = h.iter().position(|b| b.id == *hid) {
                    if !h_used[j] && dist[i][j] < threshold {
                        g_used[i] = true;
                        h_used[j] = true;
                        frame_matches.push((i, j));
                    }
                }
            }
        }

        let free_g: Vec<usize> = (0..g.len()).filter(|i| !g_used[*i]).collect();
        let free_h: Vec<usize> = (0..h.len()).filter(|j| !h_used[*j]).collect();
        let sub: Vec<Vec<f64>> = free_g
            .iter()
            .map(|i| free_h.iter().map(|j| dist[*i][*j]).collect())
            .collect();
        for (a, b) in assign(&sub, threshold) {
            let (i, j) = (free_g[a], free_h[b]);
            g_used[i] = true;
            h_used[j] = true;
            if let Some(prev) = last_match.get(&g[i].id) {
                if *prev != h[j].id {
                    switches += 1;
                }
            }
            frame_matches.push((i, j));
        }

        current.clear();
        for (i, j) in frame_matches {
            current.insert(g[i].id, h[j].id);
            last_match.insert(g[i].id, h[j].id);
            distance_sum += dist[i][j];
            matches += 1;
            pairs.push((f, g[i].id, h[j].id));
        }
        misses += g_used.iter().filter(|u| !**u).count() as u64;
        fps += h_used.iter().filter(|u| !**u).count() as u64;
    }

    let score = MotScore::from_tallies(misses, fps, switches, matches, gt.len() as u64, distance_sum);
    (score, pairs)
}

pub fn evaluate(gt: &TrajectorySet, hyp: &TrajectorySet, threshold: f64) -> MotScore {
    evaluate_detailed(gt, hyp, threshold).0
}

/// Map a raw class tag to its report row.
pub fn normalize_class(tag: Option<&str>) -> String {
    let tag = tag.map(|t| t.trim().to_ascii_lowercase()).unwrap_or_default();
    if KNOWN_CLASSES.contains(&tag.as_str()) {
        tag
    } else {
        "other".to_string()
    }
}

/// Scores per ground-truth class plus an `all` row. Hypotheses are not
/// class-filtered: a hypothesis record that the global evaluation matched to
/// an object of another class is left out of this class's evaluation rather
/// than counted as a false positive.
pub fn per_class(gt: &TrajectorySet, hyp: &TrajectorySet, threshold: f64) -> BTreeMap<String, MotScore> {
    let (all, pairs) = evaluate_detailed(gt, hyp, threshold);
    let class_of: HashMap<(u64, u64), String> = gt
        .records()
        .iter()
        .map(|r| ((r.frame, r.id), normalize_class(r.class.as_deref())))
        .collect();
    let matched_to: HashMap<(u64, u64), &String> = pairs
        .iter()
        .map(|(f, g, h)| ((*f, *h), &class_of[&(*f, *g)]))
        .collect();

    let mut classes: Vec<String> = class_of.values().cloned().collect();
    classes.sort();
    classes.dedup();

    let mut out = BTreeMap::new();
    for class in classes {
        let gt_c = gt.filtered(|r| normalize_class(r.class.as_deref()) == class);
        let hyp_c = hyp.filtered(|r| matched_to.get(&(r.frame, r.id)).is_none_or(|c| **c == class));
        out.insert(class, evaluate(&gt_c, &hyp_c, threshold));
    }
    out.insert("all".to_string(), all);
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub match_threshold: f64,
    pub classes: BTreeMap<String, MotScore>,
}

impl EvalReport {
    pub fn new(gt: &TrajectorySet, hyp: &TrajectorySet, threshold: f64) -> Self {
        EvalReport {
            match_threshold: threshold,
            classes: per_class(gt, hyp, threshold),
        }
    }

    /// Plain-text table, one row per class with `all` last.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{:<12} {:>8} {:>8} {:>7} {:>7} {:>7} {:>8} {:>8}",
            "class", "MOTA", "MOTP", "miss", "fp", "idsw", "matches", "gt"
        )
        .unwrap();
        let rows = self
            .classes
            .iter()
            .filter(|(k, _)| k.as_str() != "all")
            .chain(self.classes.get_key_value("all"));
        for (name, m) in rows {
            let mota = m.mota.map_or("n/a".to_string(), |v| format!("{v:.3}"));
            writeln!(
                s,
                "{:<12} {:>8} {:>8.2} {:>7} {:>7} {:>7} {:>8} {:>8}",
                name, mota, m.motp, m.misses, m.false_positives, m.id_switches, m.matches, m.total_gt
            )
            .unwrap();
        }
        if self.classes.get("all").is_some_and(|m| m.mota.is_none()) {
            s.push_str("no ground truth: MOTA is undefined\n");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x: i32, y: i32, w: i32, h: i32) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn walk(id: u64, frames: std::ops::Range<u64>) -> Vec<Record> {
        frames
            .map(|f| Record::new(f, id, bb(10 + 3 * f as i32, 20, 10, 10)))
            .collect()
    }

    fn set(records: Vec<Record>) -> TrajectorySet {
        TrajectorySet::from_records(records).unwrap()
    }

    #[test]
    fn perfect_tracker() {
        let gt = set(walk(1, 1..11));
        let m = evaluate(&gt, &gt.clone(), 50.0);
        assert_eq!((m.misses, m.false_positives, m.id_switches), (0, 0, 0));
        assert_eq!(m.mota, Some(1.0));
        assert_eq!(m.motp, 0.0);
    }

    #[test]
    fn one_missed_frame() {
        let gt = set(walk(1, 1..11));
        let hyp = set(walk(7, 1..11).into_iter().filter(|r| r.frame != 4).collect());
        let m = evaluate(&gt, &hyp, 50.0);
        assert_eq!(m.misses, 1);
        assert_eq!(m.total_gt, 10);
        assert!((m.mota.unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn split_identity_counts_one_switch() {
        let gt = set(walk(1, 1..11));
        let mut hyp = walk(100, 1..6);
        hyp.extend(walk(200, 6..11));
        let m = evaluate(&gt, &set(hyp), 50.0);
        assert_eq!(m.id_switches, 1);
        assert!((m.mota.unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(m.motp, 0.0);
    }

    #[test]
    fn mota_can_go_negative() {
        let gt = set(walk(1, 0..2));
        let far: Vec<Record> = (0..2)
            .flat_map(|f| (0..3).map(move |k| Record::new(f, 10 + k, bb(500 + 50 * k as i32, 500, 10, 10))))
            .collect();
        let m = evaluate(&gt, &set(far), 50.0);
        assert_eq!(m.false_positives, 6);
        assert_eq!(m.misses, 2);
        assert!((m.mota.unwrap() - (1.0 - 8.0 / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn empty_ground_truth_is_explicit() {
        let m = evaluate(&TrajectorySet::new(), &set(walk(1, 0..3)), 50.0);
        assert_eq!(m.mota, None);
        assert_eq!(m.false_positives, 3);
        let report = EvalReport::new(&TrajectorySet::new(), &TrajectorySet::new(), 50.0);
        assert!(report.to_table().contains("no ground truth"));
    }

    #[test]
    fn motp_averages_distances() {
        let gt = set(vec![Record::new(0, 1, bb(0, 0, 10, 10)), Record::new(1, 1, bb(0, 0, 10, 10))]);
        let hyp = set(vec![Record::new(0, 5, bb(3, 4, 10, 10)), Record::new(1, 5, bb(0, 1, 10, 10))]);
        let m = evaluate(&gt, &hyp, 50.0);
        assert!((m.motp - 3.0).abs() < 1e-12);
        assert_eq!(m.distance_sum, 6.0);
    }

    #[test]
    fn threshold_is_strict() {
        let gt = set(vec![Record::new(0, 1, bb(0, 0, 10, 10))]);
        let hyp = set(vec![Record::new(0, 2, bb(50, 0, 10, 10))]);
        let m = evaluate(&gt, &hyp, 50.0);
        assert_eq!((m.matches, m.misses, m.false_positives), (0, 1, 1));
    }

    #[test]
    fn assignment_minimizes_total_distance() {
        // greedy nearest-first would pair g0-h0 (d=1) and leave g1 unmatched
        let gt = set(vec![Record::new(0, 1, bb(0, 0, 10, 10)), Record::new(0, 2, bb(-8, 0, 10, 10))]);
        let hyp = set(vec![Record::new(0, 10, bb(-1, 0, 10, 10)), Record::new(0, 11, bb(9, 0, 10, 10))]);
        let m = evaluate(&gt, &hyp, 10.0);
        assert_eq!(m.matches, 2);
        assert_eq!(m.distance_sum, 16.0);
    }

    #[test]
    fn sticky_matches_survive_a_closer_rival() {
        let gt = set(walk(1, 0..3));
        let mut hyp = walk(5, 0..3)
            .into_iter()
            .map(|r| Record { bbox: r.bbox.translate(4, 0), ..r })
            .collect::<Vec<_>>();
        hyp.push(Record::new(1, 6, walk(1, 1..2)[0].bbox));
        let m = evaluate(&gt, &set(hyp), 50.0);
        assert_eq!(m.id_switches, 0);
        assert_eq!(m.false_positives, 1);
    }

    #[test]
    fn csv_parsing_and_errors() {
        let text = "frame,id,x,y,w,h,class\n0,1,5,6,10,12,car\n1,1,7,6,10,12,car\n";
        let s = TrajectorySet::from_csv(text.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.records()[0].class.as_deref(), Some("car"));
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);

        let with_state = "frame,id,x,y,w,h,state\n3,2,0,0,4,4,occluded\n";
        assert_eq!(TrajectorySet::from_csv(with_state.as_bytes()).unwrap().len(), 1);

        let bad = "frame,id,x,y,w,h\n0,1,5,6,10,12\n1,1,x,6,10,12\n";
        match TrajectorySet::from_csv(bad.as_bytes()) {
            Err(MetricsError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let degenerate = "frame,id,x,y,w,h\n0,1,5,6,0,12\n";
        assert!(matches!(
            TrajectorySet::from_csv(degenerate.as_bytes()),
            Err(MetricsError::Malformed { line: 2, .. })
        ));
        let dup = "frame,id,x,y,w,h\n0,1,5,6,3,12\n0,1,5,6,3,12\n";
        assert!(TrajectorySet::from_csv(dup.as_bytes()).is_err());
        assert!(TrajectorySet::from_csv("frame,id,x\n".as_bytes()).is_err());
    }

    #[test]
    fn per_class_single_class_matches_global() {
        let gt = set(walk(1, 0..10).into_iter().map(|r| r.with_class("car")).collect());
        let mut hyp = walk(3, 0..8);
        hyp.push(Record::new(4, 9, bb(400, 400, 10, 10)));
        let hyp = set(hyp);
        let rows = per_class(&gt, &hyp, 50.0);
        assert_eq!(rows["car"], evaluate(&gt, &hyp, 50.0));
        assert_eq!(rows["car"], rows["all"]);
    }

    #[test]
    fn per_class_disjoint_classes_are_independent() {
        let cars: Vec<Record> = walk(1, 0..10).into_iter().map(|r| r.with_class("car")).collect();
        let peds: Vec<Record> = (20..30)
            .map(|f| Record::new(f, 2, bb(300, 300, 6, 14)).with_class("pedestrian"))
            .collect();
        let hyp_cars = walk(11, 0..10);
        let hyp_peds: Vec<Record> = (20..28).map(|f| Record::new(f, 12, bb(301, 300, 6, 14))).collect();

        let gt = set(cars.iter().chain(&peds).cloned().collect());
        let hyp = set(hyp_cars.iter().chain(&hyp_peds).cloned().collect());
        let rows = per_class(&gt, &hyp, 50.0);

        let alone_cars = evaluate(&set(cars), &set(hyp_cars), 50.0);
        let alone_peds = evaluate(&set(peds), &set(hyp_peds), 50.0);
        assert_eq!(rows["car"], alone_cars);
        assert_eq!(rows["pedestrian"], alone_peds);
        let all = &rows["all"];
        assert_eq!(all.misses, alone_cars.misses + alone_peds.misses);
        assert_eq!(all.matches, alone_cars.matches + alone_peds.matches);
        assert_eq!(all.total_gt, 20);
    }

    #[test]
    fn unknown_classes_become_other() {
        assert_eq!(normalize_class(Some("Car")), "car");
        assert_eq!(normalize_class(Some("tractor")), "other");
        assert_eq!(normalize_class(None), "other");
    }

    fn arb_tracks() -> impl Strategy<Value = Vec<Record>> {
        prop::collection::vec((0i32..300, 0i32..300, 0u64..4), 1..6).prop_map(|starts| {
            starts
                .into_iter()
                .enumerate()
                .flat_map(|(k, (x, y, dx))| {
                    (0..8u64).map(move |f| Record::new(f, k as u64, bb(x + (dx * f) as i32, y, 12, 12)))
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn relabeling_hypotheses_changes_nothing(gt in arb_tracks(), hyp in arb_tracks(), offset in 1u64..1000) {
            let gt = set(gt);
            let a = evaluate(&gt, &set(hyp.clone()), 50.0);
            let relabeled: Vec<Record> = hyp.into_iter().map(|r| Record { id: r.id * 7 + offset, ..r }).collect();
            prop_assert_eq!(a, evaluate(&gt, &set(relabeled), 50.0));
        }

        #[test]
        fn far_hypothesis_adds_one_false_positive(gt in arb_tracks(), hyp in arb_tracks(), frame in 0u64..8) {
            let gt = set(gt);
            let base = evaluate(&gt, &set(hyp.clone()), 50.0);
            let mut more = hyp;
            more.push(Record::new(frame, 9999, bb(5000, 5000, 10, 10)));
            let m = evaluate(&gt, &set(more), 50.0);
            prop_assert_eq!(m.false_positives, base.false_positives + 1);
            prop_assert_eq!((m.misses, m.id_switches, m.matches), (base.misses, base.id_switches, base.matches));
            prop_assert_eq!(m.distance_sum, base.distance_sum);
            prop_assert!(m.mota.unwrap() <= 1.0);
        }
    }
}
