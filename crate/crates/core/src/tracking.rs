//! Linking per-frame face detections into face tracklets.
//!
//! Two passes: a greedy frame-to-frame association on position, size and
//! face/clothing color, then a gap-bridging pass that joins tracklets whose
//! motion, size and appearance continue each other.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::geom::{Point, Rect};
use crate::ingest::{derive_clothing_box, DetectionRecord, Frame, IngestError};
use crate::interval::FrameInterval;
use crate::raster::mean_rgb;
use crate::BBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssociationParams {
    pub iou_min: f64,
    pub size_ratio_max: f64,
    pub appearance_dist_max: f64,
    /// Largest number of missing frames a tracklet may bridge.
    pub max_gap: usize,
    pub motion_angle_max: f64,
    pub min_overlap_fraction: f64,
}

impl Default for AssociationParams {
    fn default() -> Self {
        Self { iou_min: 0.3, size_ratio_max: 1.5, appearance_dist_max: 60.0, max_gap: 10, motion_angle_max: 45.0, min_overlap_fraction: 0.2 }
    }
}

impl AssociationParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.iou_min > 0.0 && self.iou_min <= 1.0) {
            return Err(format!("iou_min {} must be in (0, 1]", self.iou_min));
        }
        if !(self.size_ratio_max >= 1.0) {
            return Err(format!("size_ratio_max {} must be >= 1", self.size_ratio_max));
        }
        if !(self.appearance_dist_max > 0.0) {
            return Err("appearance_dist_max must be positive".into());
        }
        if self.max_gap == 0 {
            return Err("max_gap must be positive".into());
        }
        if !(self.motion_angle_max > 0.0 && self.motion_angle_max <= 180.0) {
            return Err("motion_angle_max must be in (0, 180]".into());
        }
        if !(self.min_overlap_fraction > 0.0 && self.min_overlap_fraction <= 1.0) {
            return Err("min_overlap_fraction must be in (0, 1]".into());
        }
        Ok(())
    }
}

/// Mean colors of a detection's face box and, when it fits in the frame,
/// its clothing box.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Appearance {
    pub face: Option<[f64; 3]>,
    pub clothing: Option<[f64; 3]>,
}

impl Appearance {
    pub fn measure(frame: &Frame, face: &BBox) -> Self {
        Self { face: mean_rgb(frame, face), clothing: derive_clothing_box(face, frame.size).and_then(|c| mean_rgb(frame, &c)) }
    }

    /// Euclidean distance over face (and clothing, when both have it) colors.
    /// Missing face colors carry no evidence and compare as identical.
    pub fn distance(&self, other: &Self) -> f64 {
        let (Some(a), Some(b)) = (self.face, other.face) else {
            return 0.0;
        };
        let mut sq: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        if let (Some(a), Some(b)) = (self.clothing, other.clothing) {
            sq += a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        }
        sq.sqrt()
    }

    fn mean(items: &[Appearance]) -> Self {
        let avg = |pick: fn(&Appearance) -> Option<[f64; 3]>| {
            let vals: Vec<[f64; 3]> = items.iter().filter_map(pick).collect();
            (!vals.is_empty()).then(|| {
                let mut s = [0.0; 3];
                for v in &vals {
                    for c in 0..3 {
                        s[c] += v[c];
                    }
                }
                s.map(|x| x / vals.len() as f64)
            })
        };
        Self { face: avg(|a| a.face), clothing: avg(|a| a.clothing) }
    }
}

/// Face detections of one person over time.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub id: u32,
    /// Strictly increasing `frame_index`.
    pub records: Vec<DetectionRecord>,
    /// Parallel to `records`.
    pub appearances: Vec<Appearance>,
}

impl Tracklet {
    pub fn new(id: u32, records: Vec<DetectionRecord>) -> Self {
        let appearances = vec![Appearance::default(); records.len()];
        Self { id, records, appearances }
    }

    pub fn first_frame(&self) -> usize {
        self.records[0].frame_index
    }

    pub fn last_frame(&self) -> usize {
        self.records[self.records.len() - 1].frame_index
    }

    pub fn span(&self) -> FrameInterval {
        FrameInterval::new(self.first_frame(), self.last_frame())
    }

    /// Frames from first to last detection, inclusive.
    pub fn length(&self) -> usize {
        self.span().len()
    }

    pub fn appearance(&self) -> Appearance {
        Appearance::mean(&self.appearances)
    }

    pub fn centers(&self) -> Vec<Point<f64>> {
        self.records.iter().map(|r| r.face.center()).collect()
    }

    pub fn mean_face(&self) -> BBox {
        let n = self.records.len() as f64;
        let mut acc = Rect::new(0.0, 0.0, 0.0, 0.0);
        for r in &self.records {
            acc.x += r.face.x;
            acc.y += r.face.y;
            acc.w += r.face.w;
            acc.h += r.face.h;
        }
        Rect::new(acc.x / n, acc.y / n, acc.w / n, acc.h / n)
    }

    pub fn record_at(&self, frame: usize) -> Option<&DetectionRecord> {
        self.records.binary_search_by_key(&frame, |r| r.frame_index).ok().map(|i| &self.records[i])
    }

    /// The detection at `frame`, or the latest one before it.
    pub fn record_at_or_before(&self, frame: usize) -> Option<&DetectionRecord> {
        match self.records.binary_search_by_key(&frame, |r| r.frame_index) {
            Ok(i) => Some(&self.records[i]),
            Err(0) => None,
            Err(i) => Some(&self.records[i - 1]),
        }
    }

    /// Records inside `interval`, or `None` when there are none.
    pub fn crop(&self, interval: &FrameInterval) -> Option<Tracklet> {
        let lo = self.records.partition_point(|r| r.frame_index < interval.first);
        let hi = self.records.partition_point(|r| r.frame_index <= interval.last);
        (lo < hi).then(|| Tracklet { id: self.id, records: self.records[lo..hi].to_vec(), appearances: self.appearances[lo..hi].to_vec() })
    }

    /// Mean per-frame displacement over the last (or first) few records.
    fn velocity(&self, at_tail: bool) -> Point<f64> {
        let n = self.records.len();
        if n < 2 {
            return Point::origin();
        }
        let k = n.min(5);
        let (a, b) = if at_tail { (&self.records[n - k], &self.records[n - 1]) } else { (&self.records[0], &self.records[k - 1]) };
        let dt = (b.frame_index - a.frame_index) as f64;
        let (ca, cb) = (a.face.center(), b.face.center());
        Point::new((cb.x - ca.x) / dt, (cb.y - ca.y) / dt)
    }
}

fn size_ratio(a: &BBox, b: &BBox) -> f64 {
    let (sa, sb) = (a.area().sqrt(), b.area().sqrt());
    sa.max(sb) / sa.min(sb)
}

/// Total order used to make association independent of input order.
fn detection_order(a: &DetectionRecord, b: &DetectionRecord) -> std::cmp::Ordering {
    a.frame_index
        .cmp(&b.frame_index)
        .then(a.face.x.total_cmp(&b.face.x))
        .then(a.face.y.total_cmp(&b.face.y))
        .then(a.face.w.total_cmp(&b.face.w))
        .then(a.face.h.total_cmp(&b.face.h))
        .then(a.confidence.total_cmp(&b.confidence))
}

/// Measure the appearance of every detection; detections whose frame is not
/// in `frames` get an empty appearance.
pub fn measure_appearances(detections: &[DetectionRecord], frames: &[Frame]) -> Vec<Appearance> {
    detections.iter().map(|d| frames.get(d.frame_index).map_or_else(Appearance::default, |f| Appearance::measure(f, &d.face))).collect()
}

/// Frame-to-frame greedy association.
pub fn associate_low_level(detections: &[DetectionRecord], frames: &[Frame], params: &AssociationParams) -> Vec<Tracklet> {
    let appearances = measure_appearances(detections, frames);
    associate_with_appearances(detections, &appearances, params)
}

/// As [`associate_low_level`] with appearances already measured
/// (`appearances[i]` belongs to `detections[i]`).
pub fn associate_with_appearances(detections: &[DetectionRecord], appearances: &[Appearance], params: &AssociationParams) -> Vec<Tracklet> {
    assert_eq!(detections.len(), appearances.len());
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detection_order(&detections[a], &detections[b]));

    let mut tracklets: Vec<Tracklet> = Vec::new();
    // Indices into `tracklets` of those that ended on the previous frame.
    let mut open: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let frame = detections[order[i]].frame_index;
        let mut j = i;
        while j < order.len() && detections[order[j]].frame_index == frame {
            j += 1;
        }
        let batch = &order[i..j];

        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for &t in &open {
            let tr = &tracklets[t];
            if tr.last_frame() + 1 != frame {
                continue;
            }
            let last = tr.records.last().unwrap();
            let last_app = tr.appearances.last().unwrap();
            for (k, &d) in batch.iter().enumerate() {
                let det = &detections[d];
                let iou = last.face.iou(&det.face);
                if iou >= params.iou_min
                    && size_ratio(&last.face, &det.face) <= params.size_ratio_max
                    && last_app.distance(&appearances[d]) <= params.appearance_dist_max
                {
                    pairs.push((iou, k, t));
                }
            }
        }
        // Highest IoU first; ties go to the detection with lower x, then lower tracklet id.
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(tracklets[a.2].id.cmp(&tracklets[b.2].id)));

        let mut det_taken = vec![false; batch.len()];
        let mut trk_taken: Vec<usize> = Vec::new();
        let mut next_open = Vec::new();
        for (_, k, t) in pairs {
            if det_taken[k] || trk_taken.contains(&t) {
                continue;
            }
            det_taken[k] = true;
            trk_taken.push(t);
            let d = batch[k];
            tracklets[t].records.push(detections[d].clone());
            tracklets[t].appearances.push(appearances[d]);
            next_open.push(t);
        }
        for (k, &d) in batch.iter().enumerate() {
            if !det_taken[k] {
                let id = tracklets.len() as u32;
                tracklets.push(Tracklet { id, records: vec![detections[d].clone()], appearances: vec![appearances[d]] });
                next_open.push(tracklets.len() - 1);
            }
        }
        open = next_open;
        i = j;
    }
    tracklets
}

fn angle_between(a: Point<f64>, b: Point<f64>) -> f64 {
    let dot = a.x * b.x + a.y * b.y;
    let norm = a.x.hypot(a.y) * b.x.hypot(b.y);
    (dot / norm).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Below this speed (pixels per frame) a face counts as stationary and has
/// no heading to compare.
const MIN_HEADING_SPEED: f64 = 0.5;

/// Whether `b` plausibly continues `a` across a detection gap.
fn continues(a: &Tracklet, b: &Tracklet, params: &AssociationParams) -> Option<f64> {
    if b.first_frame() <= a.last_frame() || b.first_frame() - a.last_frame() - 1 > params.max_gap {
        return None;
    }
    let tail = a.records.last().unwrap();
    let head = &b.records[0];
    let va = a.velocity(true);
    let dt = (head.frame_index - tail.frame_index) as f64;
    let predicted = Rect::new(tail.face.x + va.x * dt, tail.face.y + va.y * dt, tail.face.w, tail.face.h);
    let iou = predicted.iou(&head.face);
    if iou < params.iou_min
        || size_ratio(&tail.face, &head.face) > params.size_ratio_max
        || a.appearance().distance(&b.appearance()) > params.appearance_dist_max
    {
        return None;
    }
    let vb = b.velocity(false);
    let moving = |v: Point<f64>| v.x.hypot(v.y) >= MIN_HEADING_SPEED;
    if moving(va) && moving(vb) && angle_between(va, vb) > params.motion_angle_max {
        return None;
    }
    Some(iou)
}

/// Repeatedly join tracklet pairs separated by a short gap until no pair
/// qualifies. Tracklets are visited earliest end first; a merged tracklet
/// keeps the id of the earlier part.
pub fn link_tracklets(mut tracklets: Vec<Tracklet>, params: &AssociationParams) -> Vec<Tracklet> {
    loop {
        tracklets.sort_by_key(|t| (t.last_frame(), t.id));
        let mut merge: Option<(usize, usize)> = None;
        'outer: for (ai, a) in tracklets.iter().enumerate() {
            let mut best: Option<(usize, f64, usize)> = None;
            for (bi, b) in tracklets.iter().enumerate() {
                if let Some(iou) = continues(a, b, params) {
                    let better = match best {
                        None => true,
                        Some((bf, biou, bj)) => {
                            let cur = &tracklets[bj];
                            (b.first_frame(), -iou, b.id) < (bf, -biou, cur.id)
                        }
                    };
                    if better {
                        best = Some((b.first_frame(), iou, bi));
                    }
                }
            }
            if let Some((_, _, bi)) = best {
                merge = Some((ai, bi));
                break 'outer;
            }
        }
        let Some((ai, bi)) = merge else { break };
        let b = tracklets.remove(bi);
        let ai = if bi < ai { ai - 1 } else { ai };
        tracklets[ai].records.extend(b.records);
        tracklets[ai].appearances.extend(b.appearances);
    }
    tracklets.sort_by_key(|t| t.id);
    tracklets
}

/// Tracklets overlapping `interval` by at least `min_overlap_fraction` of its
/// length, cropped to the interval.
pub fn tracklets_in_interval(tracklets: &[Tracklet], interval: &FrameInterval, min_overlap_fraction: f64) -> Vec<Tracklet> {
    tracklets.iter().filter(|t| t.span().overlap(interval) as f64 >= min_overlap_fraction * interval.len() as f64).filter_map(|t| t.crop(interval)).collect()
}

/// Full two-pass tracking.
pub fn track_faces(detections: &[DetectionRecord], frames: &[Frame], params: &AssociationParams) -> Vec<Tracklet> {
    link_tracklets(associate_low_level(detections, frames, params), params)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DumpLine {
    tracklet: u32,
    frames: Vec<usize>,
    boxes: Vec<[f64; 4]>,
}

/// One line per tracklet: `{"tracklet": id, "frames": [...], "boxes": [[x,y,w,h], ...]}`.
pub fn write_tracklet_dump<W: Write>(mut out: W, tracklets: &[Tracklet]) -> std::io::Result<()> {
    for t in tracklets {
        let line = DumpLine {
            tracklet: t.id,
            frames: t.records.iter().map(|r| r.frame_index).collect(),
            boxes: t.records.iter().map(|r| [r.face.x, r.face.y, r.face.w, r.face.h]).collect(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Read a tracklet dump. Landmarks and confidences are recovered from
/// `detections` where a record with the same frame and box exists.
pub fn read_tracklet_dump(text: &str, detections: &[DetectionRecord]) -> Result<Vec<Tracklet>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| IngestError::SchemaError { line: i + 1, message };
        let d: DumpLine = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
        if d.frames.is_empty() || d.frames.len() != d.boxes.len() {
            return Err(schema("frames and boxes must be non-empty and of equal length".into()));
        }
        if d.frames.windows(2).any(|w| w[0] >= w[1]) {
            return Err(schema("frames must be strictly increasing".into()));
        }
        let records = d
            .frames
            .iter()
            .zip(&d.boxes)
            .map(|(&f, b)| {
                let face = Rect::new(b[0], b[1], b[2], b[3]);
                detections.iter().find(|r| r.frame_index == f && r.face == face).cloned().unwrap_or_else(|| DetectionRecord::new(f, face))
            })
            .collect();
        out.push(Tracklet::new(d.tracklet, records));
    }
    Ok(out)
}

/// Ensure detections reference frames that exist.
pub fn check_frame_range(detections: &[DetectionRecord], frame_count: usize) -> Result<(), String> {
    match detections.iter().find(|d| d.frame_index >= frame_count) {
        Some(d) => Err(format!("detection references frame {} but only {frame_count} frames exist", d.frame_index)),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(frame: usize, x: f64, y: f64) -> DetectionRecord {
        DetectionRecord::new(frame, Rect::new(x, y, 40.0, 40.0))
    }

    fn no_frames(dets: &[DetectionRecord]) -> Vec<Tracklet> {
        associate_low_level(dets, &[], &AssociationParams::default())
    }

    #[test]
    fn static_box_is_one_tracklet() {
        let dets: Vec<_> = (0..10).map(|f| det(f, 100.0, 100.0)).collect();
        let t = no_frames(&dets);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].length(), 10);
    }

    #[test]
    fn distant_boxes_are_separate() {
        let dets: Vec<_> = (0..10).flat_map(|f| [det(f, 10.0, 100.0), det(f, 310.0, 100.0)]).collect();
        let t = no_frames(&dets);
        assert_eq!(t.len(), 2);
        assert!(t.iter().all(|t| t.records.len() == 10));
    }

    #[test]
    fn size_and_appearance_gates() {
        let dets = vec![det(0, 0.0, 0.0), DetectionRecord::new(1, Rect::new(0.0, 0.0, 80.0, 80.0))];
        assert_eq!(no_frames(&dets).len(), 2);

        let a = Appearance { face: Some([200.0, 0.0, 0.0]), clothing: None };
        let b = Appearance { face: Some([0.0, 0.0, 200.0]), clothing: None };
        let t = associate_with_appearances(&[det(0, 0.0, 0.0), det(1, 0.0, 0.0)], &[a, b], &AssociationParams::default());
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn appearance_distance_uses_clothing_when_both_have_it() {
        let a = Appearance { face: Some([0.0; 3]), clothing: Some([30.0, 0.0, 0.0]) };
        let b = Appearance { face: Some([40.0, 0.0, 0.0]), clothing: Some([0.0; 3]) };
        assert_eq!(a.distance(&b), 50.0);
        let c = Appearance { face: Some([40.0, 0.0, 0.0]), clothing: None };
        assert_eq!(a.distance(&c), 40.0);
    }

    #[test]
    fn dropout_is_bridged() {
        // Linear motion of 4 px/frame, frames 10 and 11 missing.
        let dets: Vec<_> = (0..20).filter(|f| !(10..12).contains(f)).map(|f| det(f, 50.0 + 4.0 * f as f64, 80.0)).collect();
        let low = no_frames(&dets);
        assert_eq!(low.len(), 2);
        let linked = link_tracklets(low, &AssociationParams::default());
        assert_eq!(linked.len(), 1);
        assert_eq!(linked[0].records.len(), 18);
        assert_eq!(linked[0].id, 0);
    }

    #[test]
    fn different_colors_are_not_bridged() {
        let red = Appearance { face: Some([220.0, 30.0, 30.0]), clothing: None };
        let blue = Appearance { face: Some([30.0, 30.0, 220.0]), clothing: None };
        let dets: Vec<_> = (0..20).filter(|f| !(10..13).contains(f)).map(|f| det(f, 100.0, 100.0)).collect();
        let apps: Vec<_> = dets.iter().map(|d| if d.frame_index < 10 { red } else { blue }).collect();
        let p = AssociationParams::default();
        let linked = link_tracklets(associate_with_appearances(&dets, &apps, &p), &p);
        assert_eq!(linked.len(), 2);
    }

    #[test]
    fn heading_reversal_is_not_bridged() {
        let p = AssociationParams { iou_min: 0.05, ..Default::default() };
        let mut dets: Vec<_> = (0..8).map(|f| det(f, 100.0 + 3.0 * f as f64, 100.0)).collect();
        // Reappears near the extrapolated position, then heads back left.
        dets.extend((10..18).map(|f| det(f, 130.0 - 3.0 * (f - 10) as f64, 100.0)));
        let linked = link_tracklets(associate_low_level(&dets, &[], &p), &p);
        assert_eq!(linked.len(), 2);
    }

    #[test]
    fn gap_longer_than_max_is_kept_apart() {
        let dets: Vec<_> = (0..30).filter(|f| !(5..20).contains(f)).map(|f| det(f, 100.0, 100.0)).collect();
        let linked = link_tracklets(no_frames(&dets), &AssociationParams::default());
        assert_eq!(linked.len(), 2);
    }

    #[test]
    fn empty_input() {
        assert!(link_tracklets(Vec::new(), &AssociationParams::default()).is_empty());
        assert!(no_frames(&[]).is_empty());
    }

    #[test]
    fn interval_selection() {
        let t = Tracklet::new(0, (20..40).map(|f| det(f, 0.0, 0.0)).collect());
        let inside = tracklets_in_interval(std::slice::from_ref(&t), &FrameInterval::new(15, 44), 0.2);
        assert_eq!(inside[0].records.len(), 20);
        assert!(tracklets_in_interval(std::slice::from_ref(&t), &FrameInterval::new(50, 60), 0.2).is_empty());
        // Overlap of 10 frames is 10% of a 100-frame interval.
        let short = Tracklet::new(1, (0..10).map(|f| det(f, 0.0, 0.0)).collect());
        assert!(tracklets_in_interval(std::slice::from_ref(&short), &FrameInterval::new(0, 99), 0.2).is_empty());
        let cropped = tracklets_in_interval(std::slice::from_ref(&t), &FrameInterval::new(30, 35), 0.2);
        assert_eq!(cropped[0].span(), FrameInterval::new(30, 35));
    }

    #[test]
    fn dump_round_trip() {
        let mut d = det(3, 1.0, 2.0);
        d.landmarks = Some(vec![Point::new(10.0, 30.0), Point::new(30.0, 30.0)]);
        let t = vec![Tracklet::new(7, vec![d.clone(), det(4, 1.0, 2.0)])];
        let mut buf = Vec::new();
        write_tracklet_dump(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), r#"{"tracklet":7,"frames":[3,4],"boxes":[[1.0,2.0,40.0,40.0],[1.0,2.0,40.0,40.0]]}"#);
        let back = read_tracklet_dump(&text, &[d]).unwrap();
        assert_eq!(back[0].records, t[0].records);
    }

    #[test]
    fn permuted_input_gives_same_tracklets() {
        let mut dets: Vec<_> = (0..6).flat_map(|f| [det(f, 10.0 + f as f64, 0.0), det(f, 30.0, 0.0), det(f, 200.0, 50.0)]).collect();
        let base = no_frames(&dets);
        dets.reverse();
        assert_eq!(no_frames(&dets), base);
    }
}
