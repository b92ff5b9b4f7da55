//! Pixel access helpers over decoded frames.

use crate::ingest::Frame;
use crate::num::Scalar;
use crate::BBox;

/// Pixel index ranges covered by `rect` after clipping to the frame.
pub(crate) fn pixel_span(frame: &Frame, rect: &BBox) -> Option<(std::ops::Range<usize>, std::ops::Range<usize>)> {
    let r = rect.clip(frame.width() as f64, frame.height() as f64)?;
    let x0 = r.x.floor().max(0.0) as usize;
    let y0 = r.y.floor().max(0.0) as usize;
    let x1 = (r.right().ceil() as usize).min(frame.width()).max(x0 + 1);
    let y1 = (r.bottom().ceil() as usize).min(frame.height()).max(y0 + 1);
    Some((x0..x1, y0..y1))
}

/// Mean RGB inside `rect`; `None` if it lies outside the frame.
pub fn mean_rgb(frame: &Frame, rect: &BBox) -> Option<[f64; 3]> {
    let (xs, ys) = pixel_span(frame, rect)?;
    let mut sum = [0.0f64; 3];
    let mut n = 0usize;
    for y in ys {
        for x in xs.clone() {
            let p = frame.rgb_at(x, y);
            for c in 0..3 {
                sum[c] += f64::from(p[c]);
            }
            n += 1;
        }
    }
    Some(sum.map(|s| s / n as f64))
}

/// Bilinear luminance sample at continuous pixel coordinates (pixel centers
/// at `i + 0.5`), clamped at the frame border.
pub fn sample_gray<T: Scalar>(frame: &Frame, x: f64, y: f64) -> T {
    let fx = (x - 0.5).clamp(0.0, (frame.width() - 1) as f64);
    let fy = (y - 0.5).clamp(0.0, (frame.height() - 1) as f64);
    let x0 = fx.floor() as usize;
    let y0 = fy.floor() as usize;
    let x1 = (x0 + 1).min(frame.width() - 1);
    let y1 = (y0 + 1).min(frame.height() - 1);
    let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
    let g = |x, y| f64::from(frame.gray_at(x, y));
    let top = g(x0, y0) * (1.0 - tx) + g(x1, y0) * tx;
    let bottom = g(x0, y1) * (1.0 - tx) + g(x1, y1) * tx;
    T::of(top * (1.0 - ty) + bottom * ty)
}

/// Resample `rect` to a `cols x rows` luminance grid, sampling cell centers.
pub fn gray_grid<T: Scalar>(frame: &Frame, rect: &BBox, cols: usize, rows: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        let y = rect.y + rect.h * (r as f64 + 0.5) / rows as f64;
        for c in 0..cols {
            let x = rect.x + rect.w * (c as f64 + 0.5) / cols as f64;
            out.push(sample_gray(frame, x, y));
        }
    }
    out
}

/// Raw luminance values of the pixels covered by `rect`, row-major.
pub fn gray_patch<T: Scalar>(frame: &Frame, rect: &BBox) -> Vec<T> {
    let Some((xs, ys)) = pixel_span(frame, rect) else {
        return Vec::new();
    };
    ys.flat_map(|y| xs.clone().map(move |x| T::of(f64::from(frame.gray_at(x, y))))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{FrameSize, Rect};

    #[test]
    fn mean_and_grid() {
        let gray: Vec<u8> = (0..16).map(|i| (i * 10) as u8).collect();
        let f = Frame::from_gray(0, FrameSize::new(4, 4), gray);
        assert_eq!(mean_rgb(&f, &Rect::new(0.0, 0.0, 2.0, 1.0)), Some([5.0; 3]));
        assert_eq!(mean_rgb(&f, &Rect::new(10.0, 10.0, 2.0, 2.0)), None);
        let g: Vec<f64> = gray_grid(&f, &Rect::new(0.0, 0.0, 4.0, 4.0), 4, 4);
        assert_eq!(g, (0..16).map(|i| (i * 10) as f64).collect::<Vec<_>>());
        let p: Vec<f64> = gray_patch(&f, &Rect::new(1.0, 1.0, 2.0, 1.0));
        assert_eq!(p, vec![50.0, 60.0]);
    }
}
