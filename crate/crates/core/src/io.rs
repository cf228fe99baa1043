//! MOTChallenge text formats, embedding sidecars, correspondences and the
//! occlusion event log.
//!
//! Detection / ground-truth rows:
//! `frame,id,bb_left,bb_top,bb_width,bb_height,conf[,class|x[,visibility|y[,z]]]`.
//!
//! Tracking output rows: `frame,id,bb_left,bb_top,bb_width,bb_height,conf,court_x,court_y`.
//!
//! Embedding sidecar, whitespace separated: `frame det_index v1 ... vD`,
//! where `det_index` is the 0-based position of the detection among the
//! rows of that frame in file order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use thiserror::Error;

use crate::appearance::Embedding;
use crate::geometry::{BBox, CourtPoint, Correspondence, Homography, ImagePoint};
use crate::occlusion::OcclusionEvent;
use crate::tracker::TrackRow;
use crate::{Frame, TrackId};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{location}:{line}: {message}")]
    Parse {
        location: String,
        line: usize,
        message: String,
    },
}

impl IoError {
    fn parse(location: &str, line: usize, message: impl Into<String>) -> Self {
        Self::Parse {
            location: location.to_string(),
            line,
            message: message.into(),
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| IoError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// One MOTChallenge detection or ground-truth row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRow {
    pub frame: Frame,
    /// `-1` for detections.
    pub id: i64,
    pub bbox: BBox<f64>,
    pub confidence: f64,
    /// Ground-truth class column; `-1` when absent.
    pub class: i32,
    pub visibility: f64,
}

fn field<T: std::str::FromStr>(fields: &[&str], k: usize, name: &str, loc: &str, line: usize) -> Result<T, IoError> {
    let raw = fields
        .get(k)
        .ok_or_else(|| IoError::parse(loc, line, format!("missing {name} column")))?;
    raw.trim()
        .parse()
        .map_err(|_| IoError::parse(loc, line, format!("invalid {name} {:?}", raw.trim())))
}

/// Parses MOTChallenge rows and sorts them by frame (stable, so rows of
/// one frame keep their file order). Blank lines and `#` comments are
/// skipped. Confidences above 1 are clamped.
pub fn parse_mot(text: &str, location: &str) -> Result<Vec<MotRow>, IoError> {
    let mut rows = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = s.split(',').collect();
        if f.len() < 6 {
            return Err(IoError::parse(location, line, format!("expected at least 6 columns, got {}", f.len())));
        }
        let frame_raw: f64 = field(&f, 0, "frame", location, line)?;
        if frame_raw < 0.0 || frame_raw.fract() != 0.0 || frame_raw > Frame::MAX as f64 {
            return Err(IoError::parse(location, line, format!("invalid frame {frame_raw}")));
        }
        let id_raw: f64 = field(&f, 1, "id", location, line)?;
        let bbox = BBox::<f64>::new(
            field(&f, 2, "bb_left", location, line)?,
            field(&f, 3, "bb_top", location, line)?,
            field(&f, 4, "bb_width", location, line)?,
            field(&f, 5, "bb_height", location, line)?,
        );
        let mut confidence: f64 = if f.len() > 6 { field(&f, 6, "conf", location, line)? } else { 1.0 };
        if !(bbox.x.is_finite() && bbox.y.is_finite() && bbox.w.is_finite() && bbox.h.is_finite()) || confidence.is_nan() {
            return Err(IoError::parse(location, line, "non-finite value"));
        }
        if confidence > 1.0 {
            warn!("{location}:{line}: confidence {confidence} clamped to 1");
            confidence = 1.0;
        }
        let class = if f.len() > 7 {
            field::<f64>(&f, 7, "class", location, line)? as i32
        } else {
            -1
        };
        let visibility = if f.len() > 8 { field(&f, 8, "visibility", location, line)? } else { -1.0 };
        rows.push(MotRow {
            frame: frame_raw as Frame,
            id: id_raw as i64,
            bbox,
            confidence,
            class,
            visibility,
        });
    }
    rows.sort_by_key(|r| r.frame);
    Ok(rows)
}

pub fn read_mot(path: &Path) -> Result<Vec<MotRow>, IoError> {
    parse_mot(&read_text(path)?, &path.display().to_string())
}

pub fn format_detection_rows(rows: &[MotRow]) -> String {
    let mut s = String::new();
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},-1,-1,-1",
            r.frame, r.id, r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h, r.confidence
        );
    }
    s
}

pub fn format_gt_rows(rows: &[MotRow]) -> String {
    let mut s = String::new();
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.frame, r.id, r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h, r.confidence, r.class, r.visibility
        );
    }
    s
}

/// Embeddings keyed by `(frame, index within frame)`.
pub type EmbeddingTable = HashMap<(Frame, usize), Embedding<f64>>;

pub fn parse_embeddings(text: &str, location: &str) -> Result<EmbeddingTable, IoError> {
    let mut table = HashMap::new();
    let mut dim = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = s.split_whitespace().collect();
        if f.len() < 3 {
            return Err(IoError::parse(location, line, "expected frame, index and at least one component"));
        }
        let frame: Frame = field(&f, 0, "frame", location, line)?;
        let index: usize = field(&f, 1, "det_index", location, line)?;
        let v = f[2..]
            .iter()
            .map(|x| x.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| IoError::parse(location, line, "invalid embedding component"))?;
        match dim {
            None => dim = Some(v.len()),
            Some(d) if d != v.len() => {
                return Err(IoError::parse(
                    location,
                    line,
                    format!("embedding dimension {} differs from {d}", v.len()),
                ))
            }
            _ => {}
        }
        if table.insert((frame, index), Embedding::new(v)).is_some() {
            return Err(IoError::parse(location, line, format!("duplicate embedding for frame {frame} index {index}")));
        }
    }
    Ok(table)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable, IoError> {
    parse_embeddings(&read_text(path)?, &path.display().to_string())
}

/// Rows are `(frame, det_index, embedding)`.
pub fn format_embeddings(rows: &[(Frame, usize, &Embedding<f64>)]) -> String {
    let mut s = String::new();
    for (frame, index, e) in rows {
        let _ = write!(s, "{frame} {index}");
        for v in e.as_slice() {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    s
}

/// `image_x image_y court_x court_y` per line.
pub fn parse_correspondences(text: &str, location: &str) -> Result<Vec<Correspondence<f64>>, IoError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        let f: Vec<&str> = s.split(|c: char| c.is_whitespace() || c == ',').filter(|x| !x.is_empty()).collect();
        if f.len() != 4 {
            return Err(IoError::parse(location, line, format!("expected 4 values, got {}", f.len())));
        }
        let v: Vec<f64> = (0..4)
            .map(|i| field(&f, i, "coordinate", location, line))
            .collect::<Result<_, _>>()?;
        out.push(Correspondence::new(ImagePoint::new(v[0], v[1]), CourtPoint::new(v[2], v[3])));
    }
    Ok(out)
}

pub fn format_correspondences(pairs: &[Correspondence<f64>]) -> String {
    let mut s = String::from("# image_x image_y court_x court_y\n");
    for c in pairs {
        let _ = writeln!(s, "{} {} {} {}", c.image.x, c.image.y, c.court.x, c.court.y);
    }
    s
}

/// Nine numbers, row major, image to court.
pub fn parse_homography(text: &str, location: &str) -> Result<Homography<f64>, IoError> {
    let body: String = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join(" ");
    let v = body
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| IoError::parse(location, 1, format!("invalid homography entry: {e}")))?;
    if v.len() != 9 {
        return Err(IoError::parse(location, 1, format!("expected 9 homography entries, got {}", v.len())));
    }
    let m = [[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]];
    Homography::new(m).map_err(|e| IoError::parse(location, 1, e.to_string()))
}

pub fn format_homography(h: &Homography<f64>) -> String {
    let m = h.matrix();
    m.iter()
        .map(|r| format!("{} {} {}\n", r[0], r[1], r[2]))
        .collect()
}

/// Writes tracking rows; `f64` display round-trips exactly.
pub fn format_tracks(rows: &[TrackRow<f64>]) -> String {
    let mut s = String::new();
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.frame, r.id, r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h, r.confidence, r.court.x, r.court.y
        );
    }
    s
}

pub fn parse_tracks(text: &str, location: &str) -> Result<Vec<TrackRow<f64>>, IoError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = s.split(',').collect();
        if f.len() < 7 {
            return Err(IoError::parse(location, line, format!("expected at least 7 columns, got {}", f.len())));
        }
        let id: i64 = field::<f64>(&f, 1, "id", location, line)? as i64;
        if id < 0 {
            return Err(IoError::parse(location, line, "negative track id"));
        }
        let court = if f.len() >= 9 {
            CourtPoint::new(field(&f, 7, "court_x", location, line)?, field(&f, 8, "court_y", location, line)?)
        } else {
            CourtPoint::new(f64::NAN, f64::NAN)
        };
        out.push(TrackRow {
            frame: field(&f, 0, "frame", location, line)?,
            id: id as TrackId,
            bbox: BBox::<f64>::new(
                field(&f, 2, "bb_left", location, line)?,
                field(&f, 3, "bb_top", location, line)?,
                field(&f, 4, "bb_width", location, line)?,
                field(&f, 5, "bb_height", location, line)?,
            ),
            confidence: field(&f, 6, "conf", location, line)?,
            court,
        });
    }
    out.sort_by_key(|r| (r.frame, r.id));
    Ok(out)
}

pub fn read_tracks(path: &Path) -> Result<Vec<TrackRow<f64>>, IoError> {
    parse_tracks(&read_text(path)?, &path.display().to_string())
}

/// `onset occlusion resolution id_lost id_n1 id_n2 label swap_with`, `-1` for
/// missing values.
pub fn format_events(events: &[OcclusionEvent<f64>]) -> String {
    let opt = |v: Option<u64>| v.map_or("-1".to_string(), |x| x.to_string());
    let mut s = String::from("# onset occlusion resolution id_lost id_n1 id_n2 label swap_with\n");
    for e in events {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {}",
            e.onset_frame,
            e.occlusion_frame,
            opt(e.resolution_frame.map(u64::from)),
            e.lost_track_id,
            opt(e.neighbors.first().map(|n| n.id)),
            opt(e.neighbors.get(1).map(|n| n.id)),
            e.label.as_str(),
            opt(e.swap_applied),
        );
    }
    s
}
