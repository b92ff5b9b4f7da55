//! Per-tracklet speaker cues: lip motion, center contribution, length
//! consistency and audio-visual synchrony.
//!
//! The numeric kernels are generic over [`Scalar`]; the tracklet-level
//! wrappers pull pixel data out of frames and feed them.

use serde::Serialize;
use thiserror::Error;

use crate::geom::{FrameSize, Point, Rect};
use crate::ingest::{DetectionRecord, Frame};
use crate::num::Scalar;
use crate::raster::{gray_grid, gray_patch};
use crate::tracking::Tracklet;
use crate::BBox;

/// Mouth regions are resampled to this grid before differencing.
pub const MOUTH_GRID_COLS: usize = 16;
pub const MOUTH_GRID_ROWS: usize = 8;

/// Floor on `|L - L_std|` in the length-consistency denominator.
pub const LC_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("tracklet has {0} frame(s); lip motion needs at least 2")]
    TrackletTooShort(usize),
    #[error("window {t1}..={t2} is outside the available range")]
    WindowOutOfRange { t1: usize, t2: usize },
    #[error("frame {0} is not loaded")]
    MissingFrame(usize),
    #[error("corpus statistics need positive speaking time, frame rate and word count")]
    BadCorpusStats,
}

/// Image plane with origin at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGeometry<T> {
    pub width: T,
    pub height: T,
}

impl<T: Scalar> FrameGeometry<T> {
    pub fn new(width: T, height: T) -> Self {
        Self { width, height }
    }

    pub fn from_size(size: FrameSize) -> Self {
        Self::new(T::of(size.width as f64), T::of(size.height as f64))
    }

    pub fn origin(&self) -> Point<T> {
        Point::origin()
    }

    pub fn center(&self) -> Point<T> {
        Point::new(self.width * T::half(), self.height * T::half())
    }
}

/// Speaking-rate statistics of a whole video.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorpusStats<T> {
    pub total_words: usize,
    /// Total speaking time in seconds.
    pub total_time: T,
    pub frame_rate: T,
}

impl<T: Scalar> CorpusStats<T> {
    pub fn new(total_words: usize, total_time: T, frame_rate: T) -> Result<Self, FeatureError> {
        if total_words == 0 || !(total_time > T::zero()) || !(frame_rate > T::zero()) {
            return Err(FeatureError::BadCorpusStats);
        }
        Ok(Self { total_words, total_time, frame_rate })
    }

    /// Words per second.
    pub fn mean_speaking_speed(&self) -> T {
        T::of_usize(self.total_words) / self.total_time
    }

    /// Expected speaking length in frames for `words` words.
    pub fn expected_length(&self, words: usize) -> T {
        T::of_usize(words) * self.frame_rate / self.mean_speaking_speed()
    }
}

/// The four cascade cues of one candidate; later ones are filled on demand.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TrackletFeatures<T> {
    pub msd: T,
    pub cc: Option<T>,
    pub lc: Option<T>,
    pub av: Option<T>,
}

/// Inclusive frame window `t1..=t2` for synchrony scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncWindow {
    pub t1: usize,
    pub t2: usize,
}

impl SyncWindow {
    pub fn new(t1: usize, t2: usize) -> Self {
        assert!(t1 <= t2);
        Self { t1, t2 }
    }

    pub fn len(&self) -> usize {
        self.t2 - self.t1 + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

// ---------------------------------------------------------------------------
// Lip motion

/// Mouth rectangle from the two mouth corners: the corner span widened by 25%
/// on each side, 0.6 times as tall as it is wide, centered on the corners'
/// midpoint. Falls back to the lower third of the face when corners are
/// missing or coincide. Always kept inside the face box grown by 20%.
pub fn mouth_region(det: &DetectionRecord) -> BBox {
    let face = det.face;
    let lower_third = Rect::new(face.x, face.y + face.h * 2.0 / 3.0, face.w, face.h / 3.0);
    let Some((a, b)) = det.mouth_corners() else {
        return lower_third;
    };
    let span = (a.x - b.x).abs();
    if span < 1.0 {
        return lower_third;
    }
    let w = span * 1.5;
    let h = 0.6 * w;
    let mid = Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
    Rect::from_center(mid, w, h).intersection(&face.expand(0.2)).unwrap_or(lower_third)
}

/// Mean squared difference between two equally sized sample vectors.
pub fn mean_squared_difference<T: Scalar>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len(), "sample vectors differ in length");
    if a.is_empty() {
        return T::zero();
    }
    let sum: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    sum / T::of_usize(a.len())
}

/// Average of the consecutive-pair MSDs of a sequence of mouth grids.
pub fn average_msd<T: Scalar>(grids: &[Vec<T>]) -> Result<T, FeatureError> {
    if grids.len() < 2 {
        return Err(FeatureError::TrackletTooShort(grids.len()));
    }
    let total: T = grids.windows(2).map(|w| mean_squared_difference(&w[0], &w[1])).sum();
    Ok(total / T::of_usize(grids.len() - 1))
}

pub fn mouth_grid<T: Scalar>(frame: &Frame, det: &DetectionRecord) -> Vec<T> {
    gray_grid(frame, &mouth_region(det), MOUTH_GRID_COLS, MOUTH_GRID_ROWS)
}

fn frame_at(frames: &[Frame], index: usize) -> Result<&Frame, FeatureError> {
    frames.get(index).filter(|f| f.index == index).ok_or(FeatureError::MissingFrame(index))
}

/// Lip-motion feature of a tracklet.
pub fn lip_motion_msd<T: Scalar>(tracklet: &Tracklet, frames: &[Frame]) -> Result<T, FeatureError> {
    if tracklet.records.len() < 2 {
        return Err(FeatureError::TrackletTooShort(tracklet.records.len()));
    }
    let grids = tracklet.records.iter().map(|r| Ok(mouth_grid(frame_at(frames, r.frame_index)?, r))).collect::<Result<Vec<Vec<T>>, _>>()?;
    average_msd(&grids)
}

// ---------------------------------------------------------------------------
// Center contribution

/// Mean over frames of `100 * (1 - d(P_i, P_c) / d(O, P_c))`.
pub fn center_contribution_of<T: Scalar>(centers: &[Point<T>], geometry: &FrameGeometry<T>) -> T {
    if centers.is_empty() {
        return T::zero();
    }
    let pc = geometry.center();
    let reach = geometry.origin().distance(pc);
    let hundred = T::of(100.0);
    let sum: T = centers.iter().map(|&p| hundred * (T::one() - p.distance(pc) / reach)).sum();
    sum / T::of_usize(centers.len())
}

pub fn center_contribution<T: Scalar>(tracklet: &Tracklet, geometry: &FrameGeometry<T>) -> T {
    let centers: Vec<Point<T>> = tracklet.centers().into_iter().map(Point::cast).collect();
    center_contribution_of(&centers, geometry)
}

// ---------------------------------------------------------------------------
// Length consistency

/// `1 / |L - L_std|` with `L_std = words * F / V`, the denominator floored at
/// [`LC_EPSILON`].
pub fn length_consistency<T: Scalar>(tracklet_len: T, segment_words: usize, stats: &CorpusStats<T>) -> T {
    let deviation = (tracklet_len - stats.expected_length(segment_words)).abs();
    T::one() / deviation.max(T::of(LC_EPSILON))
}

// ---------------------------------------------------------------------------
// Audio-visual synchrony

/// Region used for visual motion: landmarks at or below the landmark
/// centroid, spanning from the centroid level down, grown by 15% of each
/// dimension (a zero dimension borrows 15% of the other) and clipped to the
/// frame. Without landmarks, the lower half of the face.
pub fn motion_region(det: &DetectionRecord, size: FrameSize) -> Option<BBox> {
    let face = det.face;
    let fallback = Rect::new(face.x, face.y + face.h / 2.0, face.w, face.h / 2.0);
    let (w, h) = (size.width as f64, size.height as f64);
    let points = match det.landmarks.as_deref() {
        Some(p) if !p.is_empty() => p,
        _ => return fallback.clip(w, h),
    };
    let cy = points.iter().map(|p| p.y).sum::<f64>() / points.len() as f64;
    let lower: Vec<_> = points.iter().filter(|p| p.y >= cy).collect();
    let x0 = lower.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let x1 = lower.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let y1 = lower.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let (bw, bh) = (x1 - x0, y1 - cy);
    if bw <= 0.0 && bh <= 0.0 {
        return fallback.clip(w, h);
    }
    let pad_w = 0.15 * if bw > 0.0 { bw } else { bh };
    let pad_h = 0.15 * if bh > 0.0 { bh } else { bw };
    Rect::new(x0 - pad_w / 2.0, cy - pad_h / 2.0, bw + pad_w, bh + pad_h).clip(w, h)
}

/// Mean squared luminance difference between two frames inside `rect`.
pub fn region_msd<T: Scalar>(current: &Frame, previous: &Frame, rect: &BBox) -> T {
    let a: Vec<T> = gray_patch(current, rect);
    let b: Vec<T> = gray_patch(previous, rect);
    mean_squared_difference(&a, &b)
}

/// Per-frame visual motion inside the tracklet's motion region over
/// `window`; the first entry is 0.
pub fn visual_motion_signal<T: Scalar>(tracklet: &Tracklet, frames: &[Frame], window: SyncWindow) -> Result<Vec<T>, FeatureError> {
    if !tracklet.span().contains(window.t1) || !tracklet.span().contains(window.t2) {
        return Err(FeatureError::WindowOutOfRange { t1: window.t1, t2: window.t2 });
    }
    let mut out = Vec::with_capacity(window.len());
    out.push(T::zero());
    for t in window.t1 + 1..=window.t2 {
        let det = tracklet.record_at_or_before(t).expect("window starts inside the tracklet");
        let cur = frame_at(frames, t)?;
        let prev = frame_at(frames, t - 1)?;
        out.push(motion_region(det, cur.size).map_or(T::zero(), |r| region_msd(cur, prev, &r)));
    }
    Ok(out)
}

/// Zero-mean, unit-variance copy; a constant signal maps to all zeros.
pub fn z_scores<T: Scalar>(v: &[T]) -> Vec<T> {
    let constant = v.windows(2).all(|w| w[0] == w[1]);
    if v.is_empty() || constant {
        return vec![T::zero(); v.len()];
    }
    let n = T::of_usize(v.len());
    let mean = v.iter().copied().sum::<T>() / n;
    let var = v.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    let sd = var.sqrt();
    v.iter().map(|&x| (x - mean) / sd).collect()
}

/// Scalar product of the z-scored signals divided by `sqrt(N)`, i.e. the
/// Pearson correlation scaled by `sqrt(N)`.
pub fn synchrony_score<T: Scalar>(audio: &[T], visual: &[T]) -> T {
    assert_eq!(audio.len(), visual.len(), "signals differ in length");
    if audio.len() < 2 {
        return T::zero();
    }
    let za = z_scores(audio);
    let zv = z_scores(visual);
    let dot: T = za.iter().zip(&zv).map(|(&a, &b)| a * b).sum();
    dot / T::of_usize(audio.len()).sqrt()
}

/// Synchrony of the audio series (indexed by frame) with a visual signal
/// covering `window`.
pub fn av_synchrony<T: Scalar>(audio: &[T], visual: &[T], window: SyncWindow) -> Result<T, FeatureError> {
    if window.t2 >= audio.len() || visual.len() != window.len() {
        return Err(FeatureError::WindowOutOfRange { t1: window.t1, t2: window.t2 });
    }
    Ok(synchrony_score(&audio[window.t1..=window.t2], visual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::FrameSize;
    use proptest::prelude::*;

    fn det_with_corners(a: (f64, f64), b: (f64, f64)) -> DetectionRecord {
        DetectionRecord {
            frame_index: 0,
            face: Rect::new(80.0, 140.0, 80.0, 80.0),
            landmarks: Some(vec![Point::new(a.0, a.1), Point::new(b.0, b.1)]),
            confidence: 1.0,
        }
    }

    #[test]
    fn mouth_from_corners() {
        let r = mouth_region(&det_with_corners((100.0, 200.0), (140.0, 200.0)));
        assert!((r.x - 90.0).abs() < 1e-12 && (r.right() - 150.0).abs() < 1e-12);
        assert!((r.h - 36.0).abs() < 1e-12);
        assert!((r.center().y - 200.0).abs() < 1e-12);
    }

    #[test]
    fn mouth_fallbacks() {
        let d = DetectionRecord::new(0, Rect::new(0.0, 0.0, 30.0, 90.0));
        assert_eq!(mouth_region(&d), Rect::new(0.0, 60.0, 30.0, 30.0));
        let c = det_with_corners((120.0, 200.0), (120.0, 200.0));
        assert_eq!(mouth_region(&c), Rect::new(80.0, 140.0 + 160.0 / 3.0, 80.0, 80.0 / 3.0));
    }

    #[test]
    fn msd_examples() {
        let same = vec![vec![5.0f64; 128]; 4];
        assert_eq!(average_msd(&same).unwrap(), 0.0);
        assert_eq!(average_msd(&[vec![0.0f64; 128], vec![10.0; 128]]).unwrap(), 100.0);
        // Pairwise MSDs 100 and 50.
        let g = vec![vec![0.0f64; 2], vec![10.0, 10.0], vec![0.0, 10.0]];
        assert_eq!(average_msd(&g).unwrap(), 75.0);
        assert_eq!(average_msd::<f64>(&[vec![1.0]]), Err(FeatureError::TrackletTooShort(1)));
    }

    #[test]
    fn msd_over_frames() {
        let size = FrameSize::new(64, 64);
        let frames: Vec<Frame> = (0..3).map(|i| Frame::from_gray(i, size, vec![(i * 10) as u8; 64 * 64])).collect();
        let t = Tracklet::new(0, (0..3).map(|i| DetectionRecord::new(i, Rect::new(10.0, 10.0, 30.0, 30.0))).collect());
        assert_eq!(lip_motion_msd::<f64>(&t, &frames).unwrap(), 100.0);
        let short = Tracklet::new(0, vec![DetectionRecord::new(0, Rect::new(10.0, 10.0, 30.0, 30.0))]);
        assert_eq!(lip_motion_msd::<f64>(&short, &frames), Err(FeatureError::TrackletTooShort(1)));
    }

    #[test]
    fn cc_examples() {
        let g = FrameGeometry::new(640.0f64, 360.0);
        assert_eq!(center_contribution_of(&[Point::new(320.0, 180.0)], &g), 100.0);
        assert_eq!(center_contribution_of(&[Point::new(0.0, 0.0)], &g), 0.0);
        assert!((center_contribution_of(&[Point::new(160.0, 90.0)], &g) - 50.0).abs() < 1e-12);
        let g32 = FrameGeometry::new(640.0f32, 360.0);
        assert!((center_contribution_of(&[Point::new(160.0f32, 90.0)], &g32) - 50.0).abs() < 1e-4);
    }

    #[test]
    fn lc_examples() {
        let stats = CorpusStats::new(1000, 100.0f64, 25.0).unwrap();
        assert_eq!(stats.mean_speaking_speed(), 10.0);
        assert_eq!(stats.expected_length(5), 12.5);
        assert!((length_consistency(20.0, 5, &stats) - 1.0 / 7.5).abs() < 1e-15);
        assert!((length_consistency(12.5, 5, &stats) - 1e6).abs() < 1e-6);
        let a = length_consistency(16.5, 5, &stats);
        let b = length_consistency(20.5, 5, &stats);
        assert!((a / b - 2.0).abs() < 1e-12);
        assert_eq!(CorpusStats::new(0, 10.0, 25.0), Err(FeatureError::BadCorpusStats));
    }

    #[test]
    fn motion_region_rules() {
        let size = FrameSize::new(640, 480);
        let mut d = DetectionRecord::new(0, Rect::new(0.0, 0.0, 40.0, 40.0));
        d.landmarks = Some(vec![Point::new(10.0, 10.0), Point::new(20.0, 10.0), Point::new(10.0, 20.0), Point::new(20.0, 20.0)]);
        let r = motion_region(&d, size).unwrap();
        let expect = Rect::new(10.0 - 0.75, 15.0 - 0.375, 11.5, 5.75);
        assert!((r.x - expect.x).abs() < 1e-12 && (r.y - expect.y).abs() < 1e-12);
        assert!((r.w - expect.w).abs() < 1e-12 && (r.h - expect.h).abs() < 1e-12);

        d.landmarks = Some(vec![Point::new(10.0, 30.0), Point::new(30.0, 30.0)]);
        let flat = motion_region(&d, size).unwrap();
        assert!((flat.h - 3.0).abs() < 1e-12 && (flat.w - 23.0).abs() < 1e-12);

        d.landmarks = None;
        assert_eq!(motion_region(&d, size), Some(Rect::new(0.0, 20.0, 40.0, 20.0)));
    }

    #[test]
    fn visual_signal() {
        let size = FrameSize::new(32, 32);
        let t = Tracklet::new(0, (0..6).map(|i| DetectionRecord::new(i, Rect::new(4.0, 4.0, 16.0, 16.0))).collect());
        let still: Vec<Frame> = (0..6).map(|i| Frame::from_gray(i, size, vec![90; 1024])).collect();
        assert_eq!(visual_motion_signal::<f64>(&t, &still, SyncWindow::new(0, 5)).unwrap(), vec![0.0; 6]);

        let flicker: Vec<Frame> = (0..6).map(|i| Frame::from_gray(i, size, vec![if i % 2 == 0 { 0 } else { 255 }; 1024])).collect();
        let v = visual_motion_signal::<f64>(&t, &flicker, SyncWindow::new(1, 5)).unwrap();
        assert_eq!(v, vec![0.0, 65025.0, 65025.0, 65025.0, 65025.0]);
        assert_eq!(visual_motion_signal::<f64>(&t, &flicker, SyncWindow::new(3, 3)).unwrap(), vec![0.0]);
        assert!(visual_motion_signal::<f64>(&t, &flicker, SyncWindow::new(3, 9)).is_err());
    }

    #[test]
    fn synchrony_examples() {
        let a: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64).collect();
        assert!((synchrony_score(&a, &a) - 10.0).abs() < 1e-12);
        let b: Vec<f64> = a.iter().take(25).map(|x| -x).collect();
        assert!((synchrony_score(&a[..25], &b) + 5.0).abs() < 1e-12);
        assert_eq!(synchrony_score(&a, &[3.0; 100]), 0.0);
        assert_eq!(synchrony_score(&[0.1; 7], &a[..7]), 0.0);
        let w = SyncWindow::new(10, 19);
        assert!((av_synchrony(&a, &a[10..20], w).unwrap() - 10f64.sqrt()).abs() < 1e-12);
        assert!(av_synchrony(&a, &a[..5], w).is_err());
    }

    proptest! {
        #[test]
        fn msd_shift_invariant(a in prop::collection::vec(0.0..200.0f64, 1..64), c in -50.0..50.0f64, seed in 0.0..1.0f64) {
            let b: Vec<f64> = a.iter().map(|x| x * seed + 3.0).collect();
            let sa: Vec<f64> = a.iter().map(|x| x + c).collect();
            let sb: Vec<f64> = b.iter().map(|x| x + c).collect();
            let base = mean_squared_difference(&a, &b);
            prop_assert!((mean_squared_difference(&sa, &sb) - base).abs() <= 1e-9 * base.max(1.0));
        }

        #[test]
        fn cc_scale_invariant(x in 0.0..640.0f64, y in 0.0..360.0f64, k in 0.1..10.0f64) {
            let g = FrameGeometry::new(640.0f64, 360.0);
            let gk = FrameGeometry::new(640.0 * k, 360.0 * k);
            let a = center_contribution_of(&[Point::new(x, y)], &g);
            let b = center_contribution_of(&[Point::new(x * k, y * k)], &gk);
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!((0.0..=100.0).contains(&a));
        }

        #[test]
        fn av_affine_invariant_and_sign(a in prop::collection::vec(-100.0..100.0f64, 3..50), s in 0.1..10.0f64, o in -100.0..100.0f64) {
            let v: Vec<f64> = a.iter().enumerate().map(|(i, x)| x * 0.5 + (i as f64).sin() * 20.0).collect();
            let base = synchrony_score(&a, &v);
            let moved: Vec<f64> = v.iter().map(|x| x * s + o).collect();
            prop_assert!((synchrony_score(&a, &moved) - base).abs() < 1e-7);
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            prop_assert!((synchrony_score(&a, &neg) + base).abs() < 1e-9);
        }

        #[test]
        fn lc_decreases_with_deviation(d1 in 1e-5..100.0f64, extra in 1e-3..100.0f64) {
            let stats = CorpusStats::new(1000, 100.0f64, 25.0).unwrap();
            let l_std = stats.expected_length(5);
            prop_assert!(length_consistency(l_std + d1, 5, &stats) > length_consistency(l_std + d1 + extra, 5, &stats));
            prop_assert!(length_consistency(l_std - d1, 5, &stats) > 0.0);
        }
    }
}
