//! Inclusive frame ranges and their conversion from subtitle times.

use serde::{Deserialize, Serialize};

/// Frames `first..=last`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameInterval {
    pub first: usize,
    pub last: usize,
}

impl FrameInterval {
    pub fn new(first: usize, last: usize) -> Self {
        assert!(first <= last, "interval {first}..={last} is reversed");
        Self { first, last }
    }

    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.first..=self.last).contains(&frame)
    }

    pub fn contains_interval(&self, other: &Self) -> bool {
        self.first <= other.first && other.last <= self.last
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let first = self.first.max(other.first);
        let last = self.last.min(other.last);
        (first <= last).then_some(Self { first, last })
    }

    pub fn overlap(&self, other: &Self) -> usize {
        self.intersect(other).map_or(0, |i| i.len())
    }

    pub fn frames(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }

    /// Frames whose display time falls in `[start_ms, end_ms)`, clamped to
    /// `frame_count`. `None` when the span lies past the last frame.
    pub fn from_millis(start_ms: u64, end_ms: u64, frame_rate: f64, frame_count: usize) -> Option<Self> {
        if frame_count == 0 {
            return None;
        }
        let first = (start_ms as f64 * frame_rate / 1000.0 + 1e-9).floor() as usize;
        let end = (end_ms as f64 * frame_rate / 1000.0 - 1e-9).ceil() as usize;
        let last = end.saturating_sub(1).max(first).min(frame_count - 1);
        (first < frame_count).then_some(Self { first, last })
    }

    /// Start and end time in seconds for display, end exclusive.
    pub fn seconds(&self, frame_rate: f64) -> (f64, f64) {
        (self.first as f64 / frame_rate, (self.last + 1) as f64 / frame_rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn millis_to_frames() {
        assert_eq!(FrameInterval::from_millis(1000, 2000, 25.0, 1000), Some(FrameInterval::new(25, 49)));
        assert_eq!(FrameInterval::from_millis(1010, 1030, 25.0, 1000), Some(FrameInterval::new(25, 25)));
        assert_eq!(FrameInterval::from_millis(1000, 9000, 25.0, 100), Some(FrameInterval::new(25, 99)));
        assert_eq!(FrameInterval::from_millis(5000, 6000, 25.0, 100), None);
    }

    #[test]
    fn overlap_arithmetic() {
        let a = FrameInterval::new(10, 19);
        assert_eq!(a.overlap(&FrameInterval::new(15, 30)), 5);
        assert_eq!(a.overlap(&FrameInterval::new(20, 30)), 0);
        assert_eq!(a.intersect(&FrameInterval::new(0, 100)), Some(a));
    }
}
