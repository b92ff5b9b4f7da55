use std::collections::BTreeSet;
use std::fmt::Write;

use super::RenderedSegment;
use crate::geom::{FrameSize, Point, Rect};

/// Height and base width of the arrow triangle, in pixels.
pub const ARROW_SIZE: f64 = 12.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AssStyle {
    pub font: String,
    pub font_size: f64,
    /// Padding between text and box edge; drawn as the opaque box border.
    pub box_pad: f64,
    pub frame_rate: f64,
}

const STYLE_FORMAT: &str = "Name, Fontname, Fontsize, PrimaryColour, SecondaryColour, OutlineColour, BackColour, Bold, Italic, Underline, StrikeOut, ScaleX, ScaleY, Spacing, Angle, BorderStyle, Outline, Shadow, Alignment, MarginL, MarginR, MarginV, Encoding";
const EVENT_FORMAT: &str = "Layer, Start, End, Style, Name, MarginL, MarginR, MarginV, Effect, Text";

fn num(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    format!("{}", if r == 0.0 { 0.0 } else { r })
}

/// Centiseconds for the start of `frame`, rounding halves up.
fn centis(frame: usize, frame_rate: f64) -> u64 {
    (frame as f64 * 100.0 / frame_rate + 0.5).floor() as u64
}

fn ass_time(cs: u64) -> String {
    format!("{}:{:02}:{:02}.{:02}", cs / 360_000, cs / 6000 % 60, cs / 100 % 60, cs % 100)
}

fn escape_text(lines: &[String]) -> String {
    lines.iter().map(|l| l.replace('{', "(").replace('}', ")").replace('\\', "\u{ff3c}")).collect::<Vec<_>>().join("\\N")
}

/// Triangle on the edge of `rect` nearest to `target`, pointing at it.
pub fn arrow_triangle(rect: &Rect<f64>, target: Point<f64>) -> [Point<f64>; 3] {
    let s = ARROW_SIZE;
    let half = s / 2.0;
    let clamp_along = |v: f64, lo: f64, hi: f64| if hi - lo < s { (lo + hi) / 2.0 } else { v.clamp(lo + half, hi - half) };
    let (x0, y0, x1, y1) = (rect.x, rect.y, rect.right(), rect.bottom());
    let cx = target.x.clamp(x0, x1);
    let cy = target.y.clamp(y0, y1);
    // Distances from the target to the top, bottom, left and right edges.
    let d =
        [Point::new(cx, y0).distance(target), Point::new(cx, y1).distance(target), Point::new(x0, cy).distance(target), Point::new(x1, cy).distance(target)];
    let mut edge = 0;
    for i in 1..4 {
        if d[i] < d[edge] {
            edge = i;
        }
    }
    match edge {
        0 | 1 => {
            let cx = clamp_along(target.x, x0, x1);
            let (y, dir) = if edge == 0 { (y0, -1.0) } else { (y1, 1.0) };
            [Point::new(cx - half, y), Point::new(cx + half, y), Point::new(cx, y + dir * s)]
        }
        _ => {
            let cy = clamp_along(target.y, y0, y1);
            let (x, dir) = if edge == 2 { (x0, -1.0) } else { (x1, 1.0) };
            [Point::new(x, cy - half), Point::new(x, cy + half), Point::new(x + dir * s, cy)]
        }
    }
}

/// ASS document with one dialogue per segment and an arrow drawing for
/// every optimized placement.
pub fn emit_ass(segments: &[RenderedSegment], screen: FrameSize, style: &AssStyle) -> String {
    let (w, h) = (screen.width, screen.height);
    let mut out = String::new();
    out.push_str("[Script Info]\nScriptType: v4.00+\n");
    let _ = writeln!(out, "PlayResX: {w}\nPlayResY: {h}");
    out.push_str("WrapStyle: 2\nScaledBorderAndShadow: yes\n\n");

    out.push_str("[V4+ Styles]\n");
    let _ = writeln!(out, "Format: {STYLE_FORMAT}");
    let fs = num(style.font_size);
    let pad = num(style.box_pad);
    let _ = writeln!(out, "Style: Default,{},{fs},&H00FFFFFF,&H000000FF,&H00000000,&H80000000,0,0,0,0,100,100,0,0,1,2,0,2,0,0,0,1", style.font);
    let _ = writeln!(out, "Style: Placed,{},{fs},&H00FFFFFF,&H000000FF,&H60000000,&H60000000,0,0,0,0,100,100,0,0,3,{pad},0,7,0,0,0,1", style.font);
    let _ = writeln!(out, "Style: Arrow,{},{fs},&H6000FFFF,&H000000FF,&H00000000,&H00000000,0,0,0,0,100,100,0,0,1,0,0,7,0,0,0,1", style.font);
    out.push('\n');

    out.push_str("[Events]\n");
    let _ = writeln!(out, "Format: {EVENT_FORMAT}");
    for s in segments {
        let iv = s.segment.refined_interval;
        let start = ass_time(centis(iv.first, style.frame_rate));
        let end = ass_time(centis(iv.last + 1, style.frame_rate));
        let text = escape_text(&s.segment.lines);
        let rect = s.placement.rect();
        if s.placement.is_default() {
            let x = rect.center().x;
            let y = rect.bottom() - style.box_pad;
            let _ = writeln!(out, "Dialogue: 0,{start},{end},Default,,0,0,0,,{{\\an2\\pos({},{})}}{text}", num(x), num(y));
            continue;
        }
        let x = rect.x + style.box_pad;
        let y = rect.y + style.box_pad;
        let _ = writeln!(out, "Dialogue: 0,{start},{end},Placed,,0,0,0,,{{\\an7\\pos({},{})}}{text}", num(x), num(y));
        if let Some(target) = s.placement.arrow_target {
            let tri = arrow_triangle(&rect, target).map(|p| Point::new(p.x.clamp(0.0, w as f64), p.y.clamp(0.0, h as f64)));
            let _ = writeln!(
                out,
                "Dialogue: 1,{start},{end},Arrow,,0,0,0,,{{\\an7\\pos(0,0)\\p1}}m {} {} l {} {} {} {}{{\\p0}}",
                num(tri[0].x),
                num(tri[0].y),
                num(tri[1].x),
                num(tri[1].y),
                num(tri[2].x),
                num(tri[2].y)
            );
        }
    }
    out
}

/// What a successful validation found.
#[derive(Debug, Clone, PartialEq)]
pub struct AssSummary {
    pub play_res: (u32, u32),
    pub dialogues: usize,
    pub drawings: usize,
    /// Every `\pos` in event order.
    pub positions: Vec<(f64, f64)>,
}

fn parse_ass_time(s: &str) -> Result<u64, String> {
    let bad = || format!("bad time {s:?}");
    let (hms, cs) = s.split_once('.').ok_or_else(bad)?;
    let parts: Vec<&str> = hms.split(':').collect();
    if parts.len() != 3 || cs.len() != 2 || parts[1].len() != 2 || parts[2].len() != 2 || parts[0].is_empty() {
        return Err(bad());
    }
    let field = |p: &str| p.parse::<u64>().map_err(|_| bad());
    let (h, m, sec, c) = (field(parts[0])?, field(parts[1])?, field(parts[2])?, field(cs)?);
    if m >= 60 || sec >= 60 {
        return Err(bad());
    }
    Ok(((h * 60 + m) * 60 + sec) * 100 + c)
}

fn check_drawing(body: &str) -> Result<(), String> {
    let mut tokens = body.split_whitespace().peekable();
    let mut count = 0;
    while let Some(t) = tokens.next() {
        match t {
            "m" | "l" | "n" => {
                let mut coords = 0;
                while let Some(v) = tokens.peek() {
                    if v.parse::<f64>().is_err() {
                        break;
                    }
                    tokens.next();
                    coords += 1;
                }
                if coords == 0 || coords % 2 != 0 {
                    return Err(format!("drawing command {t} has {coords} coordinates"));
                }
                count += 1;
            }
            other => return Err(format!("unknown drawing command {other:?}")),
        }
    }
    if count == 0 {
        return Err("empty drawing".into());
    }
    Ok(())
}

/// Strict structural check of an ASS document.
///
/// Requires the three sections in order, matching field counts, known
/// styles, well-formed times with start <= end, balanced override blocks,
/// valid drawings and every `\pos` inside the play resolution.
pub fn validate_ass(text: &str) -> Result<AssSummary, String> {
    let mut section = "";
    let mut seen = Vec::new();
    let (mut rx, mut ry) = (None, None);
    let mut style_fields = 0;
    let mut event_fields = 0;
    let mut styles = BTreeSet::new();
    let mut summary = AssSummary { play_res: (0, 0), dialogues: 0, drawings: 0, positions: Vec::new() };
    for (n, line) in text.lines().enumerate() {
        let ln = n + 1;
        let err = |m: String| format!("line {ln}: {m}");
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with('[') {
            section = match line {
                "[Script Info]" | "[V4+ Styles]" | "[Events]" => line,
                _ => return Err(err(format!("unknown section {line}"))),
            };
            seen.push(section);
            continue;
        }
        let (key, value) = line.split_once(':').ok_or_else(|| err("expected `Key: value`".into()))?;
        let value = value.trim_start();
        match (section, key) {
            ("[Script Info]", "PlayResX") => rx = Some(value.parse::<u32>().map_err(|_| err("bad PlayResX".into()))?),
            ("[Script Info]", "PlayResY") => ry = Some(value.parse::<u32>().map_err(|_| err("bad PlayResY".into()))?),
            ("[Script Info]", _) => {}
            ("[V4+ Styles]", "Format") => style_fields = value.split(',').count(),
            ("[V4+ Styles]", "Style") => {
                let f: Vec<&str> = value.split(',').collect();
                if style_fields == 0 || f.len() != style_fields {
                    return Err(err(format!("style has {} fields, format has {style_fields}", f.len())));
                }
                styles.insert(f[0].trim().to_string());
            }
            ("[Events]", "Format") => event_fields = value.split(',').count(),
            ("[Events]", "Dialogue") => {
                if event_fields == 0 {
                    return Err(err("dialogue before format".into()));
                }
                let f: Vec<&str> = value.splitn(event_fields, ',').collect();
                if f.len() != event_fields {
                    return Err(err("dialogue has too few fields".into()));
                }
                let start = parse_ass_time(f[1]).map_err(err)?;
                let end = parse_ass_time(f[2]).map_err(err)?;
                if start > end {
                    return Err(err("event ends before it starts".into()));
                }
                if !styles.contains(f[3]) {
                    return Err(err(format!("unknown style {:?}", f[3])));
                }
                let (w, h) = (rx.ok_or_else(|| err("PlayResX missing".into()))?, ry.ok_or_else(|| err("PlayResY missing".into()))?);
                check_event_text(f[event_fields - 1], w, h, &mut summary).map_err(err)?;
                summary.dialogues += 1;
            }
            (s, k) => return Err(err(format!("unexpected {k:?} in {s:?}"))),
        }
    }
    if seen != ["[Script Info]", "[V4+ Styles]", "[Events]"] {
        return Err(format!("sections out of order: {seen:?}"));
    }
    summary.play_res = (rx.ok_or("PlayResX missing")?, ry.ok_or("PlayResY missing")?);
    Ok(summary)
}

fn check_event_text(text: &str, w: u32, h: u32, summary: &mut AssSummary) -> Result<(), String> {
    let mut rest = text;
    let mut drawing = false;
    while !rest.is_empty() {
        if let Some(after) = rest.strip_prefix('{') {
            let close = after.find('}').ok_or("unclosed override block")?;
            let block = &after[..close];
            if block.contains('{') {
                return Err("nested override block".into());
            }
            for tag in block.split('\\').skip(1) {
                if let Some(args) = tag.strip_prefix("pos(") {
                    let args = args.strip_suffix(')').ok_or("unterminated \\pos")?;
                    let (x, y) = args.split_once(',').ok_or("\\pos needs two arguments")?;
                    let x: f64 = x.trim().parse().map_err(|_| "bad \\pos x")?;
                    let y: f64 = y.trim().parse().map_err(|_| "bad \\pos y")?;
                    if !(0.0..=w as f64).contains(&x) || !(0.0..=h as f64).contains(&y) {
                        return Err(format!("\\pos({x},{y}) outside {w}x{h}"));
                    }
                    summary.positions.push((x, y));
                } else if let Some(level) = tag.strip_prefix('p') {
                    if let Ok(l) = level.parse::<u32>() {
                        drawing = l > 0;
                    }
                }
            }
            rest = &after[close + 1..];
        } else {
            if rest.starts_with('}') {
                return Err("stray `}`".into());
            }
            let end = rest.find(['{', '}']).unwrap_or(rest.len());
            if drawing {
                check_drawing(&rest[..end])?;
                summary.drawings += 1;
            }
            rest = &rest[end..];
        }
    }
    Ok(())
}
