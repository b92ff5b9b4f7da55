//! SRT parsing, serialization, and per-speaker turn splitting.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SrtError {
    #[error("subtitle document is empty")]
    EmptyFile,
    #[error("line {line}: malformed timecode line {text:?}")]
    MalformedTimecode { line: usize, text: String },
    #[error("line {line}: malformed segment index {text:?}")]
    MalformedIndex { line: usize, text: String },
    #[error("line {line}: segment {index} has no text")]
    MissingText { line: usize, index: u32 },
    #[error("line {line}: segment {index} ends before it starts")]
    EmptyInterval { line: usize, index: u32 },
    #[error("line {line}: index {index} does not follow {previous}")]
    NonMonotonicIndex { line: usize, index: u32, previous: u32 },
    #[error("line {line}: segment {index} overlaps segment {previous}")]
    OverlapError { line: usize, index: u32, previous: u32 },
    #[error("segment {index}: {reason}")]
    InvariantViolation { index: u32, reason: String },
}

/// Milliseconds since the start of the video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TimeCode(pub u64);

impl TimeCode {
    pub fn from_millis(ms: u64) -> Self {
        Self(ms)
    }

    pub fn millis(self) -> u64 {
        self.0
    }

    pub fn seconds(self) -> f64 {
        self.0 as f64 / 1000.0
    }
}

impl fmt::Display for TimeCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = self.0 % 1000;
        let s = (self.0 / 1000) % 60;
        let m = (self.0 / 60_000) % 60;
        let h = self.0 / 3_600_000;
        write!(f, "{h:02}:{m:02}:{s:02},{ms:03}")
    }
}

impl FromStr for TimeCode {
    type Err = ();

    /// Accepts `HH:MM:SS,mmm` (a `.` millisecond separator is tolerated).
    fn from_str(s: &str) -> Result<Self, ()> {
        let (hms, ms) = s.split_once([',', '.']).ok_or(())?;
        let mut parts = hms.split(':');
        let (h, m, sec) = (parts.next().ok_or(())?, parts.next().ok_or(())?, parts.next().ok_or(())?);
        if parts.next().is_some() || ms.len() != 3 || m.len() != 2 || sec.len() != 2 || h.is_empty() {
            return Err(());
        }
        let digits = |t: &str| -> Result<u64, ()> {
            if t.bytes().all(|b| b.is_ascii_digit()) {
                t.parse().map_err(|_| ())
            } else {
                Err(())
            }
        };
        let (h, m, sec, ms) = (digits(h)?, digits(m)?, digits(sec)?, digits(ms)?);
        if m >= 60 || sec >= 60 {
            return Err(());
        }
        Ok(Self(((h * 60 + m) * 60 + sec) * 1000 + ms))
    }
}

/// One numbered, timed block of subtitle text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtitleSegment {
    pub index: u32,
    pub start: TimeCode,
    pub end: TimeCode,
    pub lines: Vec<String>,
}

impl SubtitleSegment {
    pub fn new(index: u32, start_ms: u64, end_ms: u64, lines: &[&str]) -> Self {
        Self { index, start: TimeCode(start_ms), end: TimeCode(end_ms), lines: lines.iter().map(|s| s.to_string()).collect() }
    }

    pub fn duration_secs(&self) -> f64 {
        (self.end.0.saturating_sub(self.start.0)) as f64 / 1000.0
    }

    /// Whitespace-separated words, ignoring line-initial turn markers.
    pub fn word_count(&self) -> usize {
        split_speaker_turns(self).iter().map(SpeakerTurn::word_count).sum()
    }

    fn check(&self) -> Result<(), SrtError> {
        let bad = |reason: &str| SrtError::InvariantViolation { index: self.index, reason: reason.into() };
        if self.index == 0 {
            return Err(bad("index must be positive"));
        }
        if self.start >= self.end {
            return Err(bad("start must precede end"));
        }
        if self.lines.is_empty() {
            return Err(bad("no text lines"));
        }
        for line in &self.lines {
            if line.trim().is_empty() {
                return Err(bad("blank text line"));
            }
            if line.contains(['\n', '\r']) {
                return Err(bad("text line contains a line break"));
            }
        }
        Ok(())
    }
}

/// Parse an SRT document. Blocks are separated by whitespace-only lines.
pub fn parse_srt(text: &str) -> Result<Vec<SubtitleSegment>, SrtError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let lines: Vec<&str> = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();

    let mut segments: Vec<SubtitleSegment> = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let block_line = i + 1;
        let index_text = lines[i].trim();
        let index: u32 = index_text.parse().ok().filter(|&n| n > 0).ok_or_else(|| SrtError::MalformedIndex { line: block_line, text: index_text.into() })?;
        i += 1;

        let timing = lines.get(i).copied().unwrap_or("");
        let (start, end) = parse_timing(timing).ok_or_else(|| SrtError::MalformedTimecode { line: i + 1, text: timing.into() })?;
        i += 1;

        let mut body = Vec::new();
        while i < lines.len() && !lines[i].trim().is_empty() {
            body.push(lines[i].to_string());
            i += 1;
        }
        if body.is_empty() {
            return Err(SrtError::MissingText { line: block_line, index });
        }
        if start >= end {
            return Err(SrtError::EmptyInterval { line: block_line, index });
        }
        if let Some(prev) = segments.last() {
            if index <= prev.index {
                return Err(SrtError::NonMonotonicIndex { line: block_line, index, previous: prev.index });
            }
            if start < prev.end {
                return Err(SrtError::OverlapError { line: block_line, index, previous: prev.index });
            }
        }
        segments.push(SubtitleSegment { index, start, end, lines: body });
    }

    if segments.is_empty() {
        return Err(SrtError::EmptyFile);
    }
    Ok(segments)
}

fn parse_timing(line: &str) -> Option<(TimeCode, TimeCode)> {
    let (a, b) = line.split_once("-->")?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

/// Serialize segments with LF line endings; each block ends with a blank line.
pub fn serialize_srt(segments: &[SubtitleSegment]) -> Result<String, SrtError> {
    if segments.is_empty() {
        return Err(SrtError::InvariantViolation { index: 0, reason: "no segments to serialize".into() });
    }
    let mut out = String::new();
    let mut prev: Option<&SubtitleSegment> = None;
    for seg in segments {
        seg.check()?;
        if let Some(p) = prev {
            if seg.index <= p.index || seg.start < p.end {
                return Err(SrtError::InvariantViolation { index: seg.index, reason: format!("out of order with segment {}", p.index) });
            }
        }
        out.push_str(&format!("{}\n{} --> {}\n", seg.index, seg.start, seg.end));
        for line in &seg.lines {
            out.push_str(line);
            out.push('\n');
        }
        out.push('\n');
        prev = Some(seg);
    }
    Ok(out)
}

/// Lines spoken by one speaker inside a segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeakerTurn {
    pub turn_index: usize,
    pub lines: Vec<String>,
    /// Exact prefix removed from the first line (leading whitespace, `-`, one space).
    pub marker: Option<String>,
}

impl SpeakerTurn {
    pub fn word_count(&self) -> usize {
        self.lines.iter().map(|l| l.split_whitespace().count()).sum()
    }

    /// The original segment lines this turn was cut from.
    pub fn restore(&self) -> Vec<String> {
        let mut out = self.lines.clone();
        if let (Some(m), Some(first)) = (&self.marker, out.first_mut()) {
            first.insert_str(0, m);
        }
        out
    }
}

/// A new turn begins at every line whose first non-whitespace character is `-`.
pub fn split_speaker_turns(segment: &SubtitleSegment) -> Vec<SpeakerTurn> {
    let mut turns: Vec<SpeakerTurn> = Vec::new();
    for line in &segment.lines {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix('-') {
            let rest = rest.strip_prefix(' ').unwrap_or(rest);
            let marker = line[..line.len() - rest.len()].to_string();
            turns.push(SpeakerTurn { turn_index: turns.len(), lines: vec![rest.to_string()], marker: Some(marker) });
        } else if let Some(cur) = turns.last_mut() {
            cur.lines.push(line.clone());
        } else {
            turns.push(SpeakerTurn { turn_index: 0, lines: vec![line.clone()], marker: None });
        }
    }
    turns
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_document() {
        let segs = parse_srt("1\n00:00:01,000 --> 00:00:02,500\nHello\n").unwrap();
        assert_eq!(segs, vec![SubtitleSegment::new(1, 1000, 2500, &["Hello"])]);
    }

    #[test]
    fn empty_document() {
        assert_eq!(parse_srt(""), Err(SrtError::EmptyFile));
        assert_eq!(parse_srt("\n \r\n"), Err(SrtError::EmptyFile));
    }

    #[test]
    fn bom_and_crlf() {
        let doc = "\u{feff}1\r\n00:00:01,000 --> 00:00:02,000\r\nA\r\nB\r\n\r\n2\r\n00:00:03,000 --> 00:00:04,000\r\nC\r\n";
        let segs = parse_srt(doc).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].lines, vec!["A", "B"]);
    }

    #[test]
    fn whitespace_line_ends_block() {
        let doc = "1\n00:00:01,000 --> 00:00:02,000\nA\n   \n2\n00:00:03,000 --> 00:00:04,000\nB\n";
        assert_eq!(parse_srt(doc).unwrap().len(), 2);
    }

    #[test]
    fn error_kinds() {
        let bad_tc = "1\n00:00:01,000 -> 00:00:02,000\nA\n";
        assert!(matches!(parse_srt(bad_tc), Err(SrtError::MalformedTimecode { line: 2, .. })));
        let bad_ms = "1\n00:00:01,00 --> 00:00:02,000\nA\n";
        assert!(matches!(parse_srt(bad_ms), Err(SrtError::MalformedTimecode { .. })));
        let non_mono = "2\n00:00:01,000 --> 00:00:02,000\nA\n\n1\n00:00:03,000 --> 00:00:04,000\nB\n";
        assert!(matches!(parse_srt(non_mono), Err(SrtError::NonMonotonicIndex { line: 5, .. })));
        let overlap = "1\n00:00:01,000 --> 00:00:02,000\nA\n\n2\n00:00:01,500 --> 00:00:04,000\nB\n";
        assert!(matches!(parse_srt(overlap), Err(SrtError::OverlapError { .. })));
        let no_text = "1\n00:00:01,000 --> 00:00:02,000\n\n";
        assert!(matches!(parse_srt(no_text), Err(SrtError::MissingText { .. })));
    }

    #[test]
    fn serialized_block_shape() {
        let out = serialize_srt(&[SubtitleSegment::new(1, 1000, 2500, &["Hello"])]).unwrap();
        assert_eq!(out, "1\n00:00:01,000 --> 00:00:02,500\nHello\n\n");
        assert_eq!(out.split_terminator('\n').count(), 4);
        assert!(matches!(serialize_srt(&[]), Err(SrtError::InvariantViolation { .. })));
        assert!(serialize_srt(&[SubtitleSegment::new(1, 5, 5, &["x"])]).is_err());
    }

    #[test]
    fn long_timecode() {
        let tc = TimeCode(((27 * 60 + 3) * 60 + 9) * 1000 + 7);
        assert_eq!(tc.to_string(), "27:03:09,007");
        assert_eq!("27:03:09,007".parse::<TimeCode>(), Ok(tc));
    }

    #[test]
    fn turn_examples() {
        let two = split_speaker_turns(&SubtitleSegment::new(1, 0, 1, &["- Hi.", "- Hello."]));
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].lines, vec!["Hi."]);
        assert_eq!(two[1].lines, vec!["Hello."]);

        let one = split_speaker_turns(&SubtitleSegment::new(1, 0, 1, &["Just one line"]));
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].marker, None);

        let cont = split_speaker_turns(&SubtitleSegment::new(1, 0, 1, &["- A", "and more", "- B"]));
        let lines: Vec<_> = cont.iter().map(|t| t.lines.clone()).collect();
        assert_eq!(lines, vec![vec!["A", "and more"], vec!["B"]]);

        let mid = split_speaker_turns(&SubtitleSegment::new(1, 0, 1, &["well - maybe"]));
        assert_eq!(mid.len(), 1);
    }

    fn text_line() -> impl Strategy<Value = String> {
        prop::collection::vec("[A-Za-z']{1,8}", 1..6).prop_map(|w| w.join(" "))
    }

    fn line_with_marker() -> impl Strategy<Value = String> {
        (any::<bool>(), text_line()).prop_map(|(m, l)| if m { format!("- {l}") } else { l })
    }

    fn segments() -> impl Strategy<Value = Vec<SubtitleSegment>> {
        prop::collection::vec((1u32..5, 0u64..3000, 1u64..5000, prop::collection::vec(line_with_marker(), 1..4)), 1..50).prop_map(|raw| {
            let (mut idx, mut t) = (0u32, 0u64);
            raw.into_iter()
                .map(|(di, gap, dur, lines)| {
                    idx += di;
                    let start = t + gap;
                    t = start + dur;
                    SubtitleSegment { index: idx, start: TimeCode(start), end: TimeCode(t), lines }
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn round_trip(segs in segments()) {
            let text = serialize_srt(&segs).unwrap();
            prop_assert_eq!(parse_srt(&text).unwrap(), segs.clone());
            prop_assert_eq!(parse_srt(&text), parse_srt(&text));
        }

        #[test]
        fn turns_preserve_lines_and_words(lines in prop::collection::vec(line_with_marker(), 1..6)) {
            let seg = SubtitleSegment { index: 1, start: TimeCode(0), end: TimeCode(1), lines: lines.clone() };
            let turns = split_speaker_turns(&seg);
            let restored: Vec<String> = turns.iter().flat_map(|t| t.restore()).collect();
            prop_assert_eq!(&restored, &lines);
            let markers = lines.iter().filter(|l| l.starts_with("- ")).count();
            let raw_words: usize = lines.iter().map(|l| l.split_whitespace().count()).sum();
            prop_assert_eq!(turns.iter().map(SpeakerTurn::word_count).sum::<usize>(), raw_words - markers);
        }
    }
}
