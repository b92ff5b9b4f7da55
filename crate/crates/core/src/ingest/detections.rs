use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::geom::{Point, Rect};
use crate::BBox;

/// One face detection from an external detector.
///
/// When landmarks are present, the first two points are the left and right
/// mouth corners; any further points (jaw line, chin, nose) are optional and
/// only used to shape the motion region.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub frame_index: usize,
    pub face: BBox,
    pub landmarks: Option<Vec<Point<f64>>>,
    pub confidence: f64,
}

impl DetectionRecord {
    pub fn new(frame_index: usize, face: BBox) -> Self {
        Self { frame_index, face, landmarks: None, confidence: 1.0 }
    }

    pub fn mouth_corners(&self) -> Option<(Point<f64>, Point<f64>)> {
        match self.landmarks.as_deref() {
            Some([a, b, ..]) => Some((*a, *b)),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), String> {
        let f = &self.face;
        if ![f.x, f.y, f.w, f.h].iter().all(|v| v.is_finite()) {
            return Err("face box has non-finite values".into());
        }
        if f.w <= 0.0 || f.h <= 0.0 {
            return Err("face box must have positive width and height".into());
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(format!("confidence {} outside [0, 1]", self.confidence));
        }
        if let Some(points) = &self.landmarks {
            if points.len() < 2 {
                return Err("landmarks must start with two mouth corners".into());
            }
            if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
                return Err("landmark has non-finite coordinates".into());
            }
            let allowed = f.expand(0.2);
            let (a, b) = (points[0], points[1]);
            if !allowed.contains_point(a) || !allowed.contains_point(b) {
                return Err("mouth corner lies outside the face box".into());
            }
        }
        Ok(())
    }

    fn sort_key_cmp(&self, other: &Self) -> Ordering {
        self.frame_index
            .cmp(&other.frame_index)
            .then(self.face.x.total_cmp(&other.face.x))
            .then(self.face.y.total_cmp(&other.face.y))
            .then(self.face.w.total_cmp(&other.face.w))
            .then(self.face.h.total_cmp(&other.face.h))
            .then(self.confidence.total_cmp(&other.confidence))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Wire {
    frame: usize,
    face: [f64; 4],
    landmarks: Option<Vec<[f64; 2]>>,
    confidence: f64,
}

impl From<&DetectionRecord> for Wire {
    fn from(d: &DetectionRecord) -> Self {
        Wire {
            frame: d.frame_index,
            face: [d.face.x, d.face.y, d.face.w, d.face.h],
            landmarks: d.landmarks.as_ref().map(|l| l.iter().map(|p| [p.x, p.y]).collect()),
            confidence: d.confidence,
        }
    }
}

impl From<Wire> for DetectionRecord {
    fn from(w: Wire) -> Self {
        DetectionRecord {
            frame_index: w.frame,
            face: Rect::new(w.face[0], w.face[1], w.face[2], w.face[3]),
            landmarks: w.landmarks.map(|l| l.into_iter().map(|[x, y]| Point::new(x, y)).collect()),
            confidence: w.confidence,
        }
    }
}

/// Parse newline-delimited detection records, sorted by frame then x.
pub fn parse_detections(text: &str) -> Result<Vec<DetectionRecord>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| IngestError::SchemaError { line: i + 1, message };
        let wire: Wire = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
        let record = DetectionRecord::from(wire);
        record.validate().map_err(schema)?;
        out.push(record);
    }
    out.sort_by(DetectionRecord::sort_key_cmp);
    Ok(out)
}

pub fn read_detections(path: &Path) -> Result<Vec<DetectionRecord>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    parse_detections(&text)
}

pub fn write_detections<W: Write>(mut out: W, records: &[DetectionRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, &Wire::from(r))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_empty_list() {
        assert!(parse_detections("").unwrap().is_empty());
        assert!(parse_detections("\n\n").unwrap().is_empty());
    }

    #[test]
    fn single_record() {
        let recs = parse_detections(r#"{"frame": 3, "face": [10, 20, 30, 40], "landmarks": [[18, 52], [32, 52], [25, 60]], "confidence": 0.9}"#).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].frame_index, 3);
        assert_eq!(recs[0].face, Rect::new(10.0, 20.0, 30.0, 40.0));
        assert_eq!(recs[0].mouth_corners(), Some((Point::new(18.0, 52.0), Point::new(32.0, 52.0))));
    }

    #[test]
    fn sorted_by_frame_then_x() {
        let text = "{\"frame\":1,\"face\":[50,0,5,5],\"landmarks\":null,\"confidence\":1}\n\
                    {\"frame\":0,\"face\":[9,0,5,5],\"landmarks\":null,\"confidence\":1}\n\
                    {\"frame\":1,\"face\":[2,0,5,5],\"landmarks\":null,\"confidence\":1}\n";
        let recs = parse_detections(text).unwrap();
        let keys: Vec<_> = recs.iter().map(|r| (r.frame_index, r.face.x)).collect();
        assert_eq!(keys, vec![(0, 9.0), (1, 2.0), (1, 50.0)]);
    }

    #[test]
    fn schema_errors_carry_line_numbers() {
        let good = r#"{"frame":0,"face":[0,0,5,5],"landmarks":null,"confidence":1}"#;
        let cases = [
            r#"{"frame":0,"face":[0,0,5],"landmarks":null,"confidence":1}"#,
            r#"{"frame":0,"face":[0,0,0,5],"landmarks":null,"confidence":1}"#,
            r#"{"frame":0,"face":[0,0,5,5],"landmarks":null,"confidence":1.5}"#,
            r#"{"frame":0,"face":[0,0,5,5],"landmarks":[[1,1]],"confidence":1}"#,
            r#"{"frame":0,"face":[0,0,5,5],"landmarks":[[100,1],[2,2]],"confidence":1}"#,
            r#"{"frame":-1,"face":[0,0,5,5],"landmarks":null,"confidence":1}"#,
            r#"{"frame":0,"face":[0,0,5,5],"landmarks":null,"confidence":1,"extra":2}"#,
            "not json",
        ];
        for bad in cases {
            let text = format!("{good}\n\n{bad}\n");
            match parse_detections(&text) {
                Err(IngestError::SchemaError { line, .. }) => assert_eq!(line, 3, "{bad}"),
                other => panic!("{bad}: {other:?}"),
            }
        }
    }

    #[test]
    fn write_then_parse() {
        let recs = vec![
            DetectionRecord {
                frame_index: 0,
                face: Rect::new(1.5, 2.0, 30.0, 31.0),
                landmarks: Some(vec![Point::new(8.0, 25.0), Point::new(24.0, 25.5), Point::new(16.0, 33.0)]),
                confidence: 0.75,
            },
            DetectionRecord::new(4, Rect::new(100.0, 5.0, 20.0, 20.0)),
        ];
        let mut buf = Vec::new();
        write_detections(&mut buf, &recs).unwrap();
        assert_eq!(parse_detections(std::str::from_utf8(&buf).unwrap()).unwrap(), recs);
    }
}
