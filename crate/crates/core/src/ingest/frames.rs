use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat};

use super::IngestError;
use crate::geom::FrameSize;

/// One decoded video frame with both its color and luminance planes.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub size: FrameSize,
    /// Row-major RGB, 3 bytes per pixel.
    pub rgb: Vec<u8>,
    /// Row-major luminance, 1 byte per pixel.
    pub gray: Vec<u8>,
}

/// Rec.601 luma, rounded to the nearest integer.
#[inline]
pub(crate) fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round().min(255.0) as u8
}

impl Frame {
    pub fn from_rgb(index: usize, size: FrameSize, rgb: Vec<u8>) -> Self {
        assert_eq!(rgb.len(), size.pixels() * 3, "rgb buffer does not match frame size");
        let gray = rgb.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect();
        Self { index, size, rgb, gray }
    }

    pub fn from_gray(index: usize, size: FrameSize, gray: Vec<u8>) -> Self {
        assert_eq!(gray.len(), size.pixels(), "gray buffer does not match frame size");
        let rgb = gray.iter().flat_map(|&v| [v, v, v]).collect();
        Self { index, size, rgb, gray }
    }

    pub fn width(&self) -> usize {
        self.size.width as usize
    }

    pub fn height(&self) -> usize {
        self.size.height as usize
    }

    #[inline]
    pub fn gray_at(&self, x: usize, y: usize) -> u8 {
        self.gray[y * self.width() + x]
    }

    #[inline]
    pub fn rgb_at(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width() + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    /// Decode a PNG or binary PGM/PPM file.
    pub fn load(index: usize, path: &Path) -> Result<Self, IngestError> {
        let img = image::open(path).map_err(|e| IngestError::Image { path: path.to_path_buf(), message: e.to_string() })?;
        let size = FrameSize::new(img.width(), img.height());
        Ok(if img.color().has_color() {
            Self::from_rgb(index, size, img.into_rgb8().into_raw())
        } else {
            Self::from_gray(index, size, img.into_luma8().into_raw())
        })
    }

    /// Write as PNG or PPM depending on the file extension.
    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        let format = ImageFormat::from_path(path).map_err(|e| IngestError::Image { path: path.to_path_buf(), message: e.to_string() })?;
        let img = image::RgbImage::from_raw(self.size.width, self.size.height, self.rgb.clone()).expect("buffer length checked at construction");
        DynamicImage::ImageRgb8(img).save_with_format(path, format).map_err(|e| IngestError::Image { path: path.to_path_buf(), message: e.to_string() })
    }
}

/// Numbered frame filename template, e.g. `frame_%06d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePattern {
    pub prefix: String,
    pub digits: usize,
}

impl Default for FramePattern {
    fn default() -> Self {
        Self { prefix: "frame_".into(), digits: 6 }
    }
}

impl FramePattern {
    pub fn file_name(&self, index: usize, ext: &str) -> String {
        format!("{}{:0width$}.{ext}", self.prefix, index, width = self.digits)
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        let (stem, ext) = name.rsplit_once('.')?;
        if !matches!(ext.to_ascii_lowercase().as_str(), "png" | "pgm" | "ppm") {
            return None;
        }
        let digits = stem.strip_prefix(&self.prefix)?;
        if digits.len() != self.digits || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        digits.parse().ok()
    }
}

/// Lazily decodes a contiguous numbered frame sequence in index order.
#[derive(Debug)]
pub struct FrameSource {
    paths: Vec<PathBuf>,
    next: usize,
    size: Option<FrameSize>,
}

impl FrameSource {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.paths
    }
}

impl Iterator for FrameSource {
    type Item = Result<Frame, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        let path = self.paths.get(self.next)?;
        let index = self.next;
        self.next += 1;
        Some(Frame::load(index, path).and_then(|frame| match self.size {
            Some(expected) if expected != frame.size => Err(IngestError::DimensionMismatch { index, expected, found: frame.size }),
            _ => {
                self.size = Some(frame.size);
                Ok(frame)
            }
        }))
    }
}

/// Index the numbered frames in `dir`. Numbering must start at 0 and be gap-free.
pub fn open_frame_sequence(dir: &Path, pattern: &FramePattern) -> Result<FrameSource, IngestError> {
    let io = |source| IngestError::Io { path: dir.to_path_buf(), source };
    let mut found = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let entry = entry.map_err(io)?;
        let name = entry.file_name();
        let Some(index) = name.to_str().and_then(|n| pattern.index_of(n)) else {
            continue;
        };
        if found.insert(index, entry.path()).is_some() {
            return Err(IngestError::DuplicateFrame(index));
        }
    }
    if found.is_empty() {
        return Err(IngestError::NoFrames(dir.to_path_buf()));
    }
    let mut paths = Vec::with_capacity(found.len());
    for (expected, (index, path)) in found.into_iter().enumerate() {
        if index != expected {
            return Err(IngestError::MissingFrame(expected));
        }
        paths.push(path);
    }
    Ok(FrameSource { paths, next: 0, size: None })
}

/// Decode the whole sequence into memory.
pub fn load_frames(dir: &Path, pattern: &FramePattern) -> Result<Vec<Frame>, IngestError> {
    open_frame_sequence(dir, pattern)?.collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(index: usize, size: FrameSize, c: [u8; 3]) -> Frame {
        Frame::from_rgb(index, size, c.repeat(size.pixels()))
    }

    #[test]
    fn sequence_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let pat = FramePattern::default();
        let size = FrameSize::new(4, 3);
        for i in 0..3 {
            solid(i, size, [i as u8 * 10, 0, 0]).save(&dir.path().join(pat.file_name(i, "png"))).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let frames = load_frames(dir.path(), &pat).unwrap();
        assert_eq!(frames.iter().map(|f| f.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(frames[2].rgb_at(1, 1), [20, 0, 0]);
    }

    #[test]
    fn gap_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let pat = FramePattern::default();
        let size = FrameSize::new(2, 2);
        for i in [0, 2] {
            solid(i, size, [0; 3]).save(&dir.path().join(pat.file_name(i, "ppm"))).unwrap();
        }
        assert!(matches!(open_frame_sequence(dir.path(), &pat), Err(IngestError::MissingFrame(1))));
    }

    #[test]
    fn dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let pat = FramePattern::default();
        solid(0, FrameSize::new(2, 2), [0; 3]).save(&dir.path().join(pat.file_name(0, "png"))).unwrap();
        solid(1, FrameSize::new(3, 2), [0; 3]).save(&dir.path().join(pat.file_name(1, "png"))).unwrap();
        let res: Result<Vec<_>, _> = open_frame_sequence(dir.path(), &pat).unwrap().collect();
        assert!(matches!(res, Err(IngestError::DimensionMismatch { index: 1, .. })));
    }

    #[test]
    fn ppm_luma_matches_rec601() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frame_000000.ppm");
        let pixels: [[u8; 3]; 4] = [[255, 0, 0], [0, 255, 0], [0, 0, 255], [10, 200, 37]];
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend(pixels.iter().flatten());
        std::fs::write(&path, bytes).unwrap();
        let f = Frame::load(0, &path).unwrap();
        // 0.299*255 = 76.245, 0.587*255 = 149.685, 0.114*255 = 29.07, 2.99+117.4+4.218 = 124.608
        assert_eq!(f.gray, vec![76, 150, 29, 125]);
    }

    #[test]
    fn pgm_gray_source() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frame_000000.pgm");
        let mut bytes = b"P5\n2 1\n255\n".to_vec();
        bytes.extend([7u8, 200]);
        std::fs::write(&path, bytes).unwrap();
        let f = Frame::load(0, &path).unwrap();
        assert_eq!(f.gray, vec![7, 200]);
        assert_eq!(f.rgb, vec![7, 7, 7, 200, 200, 200]);
    }
}
