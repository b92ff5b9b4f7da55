//! Points and axis-aligned rectangles in pixel space.

use serde::{Deserialize, Serialize};

use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero())
    }

    /// Euclidean distance.
    pub fn distance(self, other: Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn cast<U: Scalar>(self) -> Point<U> {
        Point::new(U::of(self.x.as_f64()), U::of(self.y.as_f64()))
    }
}

/// Axis-aligned rectangle given by its top-left corner and size.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rect<T> {
    pub x: T,
    pub y: T,
    pub w: T,
    pub h: T,
}

impl<T: Scalar> Rect<T> {
    pub fn new(x: T, y: T, w: T, h: T) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_center(c: Point<T>, w: T, h: T) -> Self {
        Self::new(c.x - w * T::half(), c.y - h * T::half(), w, h)
    }

    pub fn right(&self) -> T {
        self.x + self.w
    }

    pub fn bottom(&self) -> T {
        self.y + self.h
    }

    pub fn center(&self) -> Point<T> {
        Point::new(self.x + self.w * T::half(), self.y + self.h * T::half())
    }

    pub fn area(&self) -> T {
        self.w.max(T::zero()) * self.h.max(T::zero())
    }

    pub fn is_empty(&self) -> bool {
        !(self.w > T::zero() && self.h > T::zero())
    }

    pub fn intersection(&self, other: &Self) -> Option<Self> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        let r = Self::new(x0, y0, x1 - x0, y1 - y0);
        (!r.is_empty()).then_some(r)
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.intersection(other).is_some()
    }

    pub fn iou(&self, other: &Self) -> T {
        let inter = self.intersection(other).map_or(T::zero(), |r| r.area());
        let union = self.area() + other.area() - inter;
        if union > T::zero() {
            inter / union
        } else {
            T::zero()
        }
    }

    /// Grows each side by `fraction / 2` of the matching dimension, keeping the center.
    pub fn expand(&self, fraction: T) -> Self {
        let dw = self.w * fraction;
        let dh = self.h * fraction;
        Self::new(self.x - dw * T::half(), self.y - dh * T::half(), self.w + dw, self.h + dh)
    }

    /// Clip to `[0, width) x [0, height)`; `None` when nothing remains.
    pub fn clip(&self, width: T, height: T) -> Option<Self> {
        self.intersection(&Self::new(T::zero(), T::zero(), width, height))
    }

    pub fn contains_point(&self, p: Point<T>) -> bool {
        p.x >= self.x && p.x <= self.right() && p.y >= self.y && p.y <= self.bottom()
    }

    /// True when `self` lies entirely inside `outer` (edges may touch).
    pub fn within(&self, outer: &Self) -> bool {
        self.x >= outer.x && self.y >= outer.y && self.right() <= outer.right() && self.bottom() <= outer.bottom()
    }

    pub fn cast<U: Scalar>(&self) -> Rect<U> {
        Rect::new(U::of(self.x.as_f64()), U::of(self.y.as_f64()), U::of(self.w.as_f64()), U::of(self.h.as_f64()))
    }
}

/// Integer frame dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameSize {
    pub width: u32,
    pub height: u32,
}

impl FrameSize {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn pixels(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn rect<T: Scalar>(&self) -> Rect<T> {
        Rect::new(T::zero(), T::zero(), T::of(self.width as f64), T::of(self.height as f64))
    }
}
