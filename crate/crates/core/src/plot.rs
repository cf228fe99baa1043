//! Top-view SVG of the court with per-id trajectories.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::geometry::{court_template, COURT_LENGTH_CM, COURT_WIDTH_CM};
use crate::tracker::TrackRow;
use crate::{Frame, TrackId};

const MARGIN: f64 = 100.0;

/// A polyline is split where consecutive rows are more than this many
/// frames apart.
pub const MAX_FRAME_GAP: Frame = 30;

fn color(k: usize) -> String {
    // Golden-angle hue walk gives well separated colours.
    let hue = (k as f64 * 137.507_764) % 360.0;
    format!("hsl({hue:.1},70%,45%)")
}

/// Court positions per id within `[first, last]`, split into continuous
/// pieces.
pub fn trajectories(rows: &[TrackRow<f64>], first: Frame, last: Frame) -> BTreeMap<TrackId, Vec<Vec<(f64, f64)>>> {
    let mut by_id: BTreeMap<TrackId, Vec<(Frame, f64, f64)>> = BTreeMap::new();
    for r in rows {
        if r.frame < first || r.frame > last || !r.court.x.is_finite() || !r.court.y.is_finite() {
            continue;
        }
        by_id.entry(r.id).or_default().push((r.frame, r.court.x, r.court.y));
    }
    by_id
        .into_iter()
        .map(|(id, mut pts)| {
            pts.sort_by_key(|p| p.0);
            let mut pieces: Vec<Vec<(f64, f64)>> = Vec::new();
            let mut prev: Option<Frame> = None;
            for (f, x, y) in pts {
                if prev.is_none_or(|p| f - p > MAX_FRAME_GAP) {
                    pieces.push(Vec::new());
                }
                pieces.last_mut().expect("piece pushed").push((x, y));
                prev = Some(f);
            }
            (id, pieces)
        })
        .collect()
}

pub fn render_court(rows: &[TrackRow<f64>], first: Frame, last: Frame) -> String {
    let (w, h) = (COURT_LENGTH_CM + 2.0 * MARGIN, COURT_WIDTH_CM + 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {w} {h}" width="{}" height="{}">"#,
        -MARGIN,
        -MARGIN,
        w / 2.0,
        h / 2.0
    );
    let _ = writeln!(
        s,
        r##"<rect x="0" y="0" width="{COURT_LENGTH_CM}" height="{COURT_WIDTH_CM}" fill="#f3e2c7" stroke="#333" stroke-width="5"/>"##
    );
    let mid = COURT_LENGTH_CM / 2.0;
    let _ = writeln!(
        s,
        r##"<line x1="{mid}" y1="0" x2="{mid}" y2="{COURT_WIDTH_CM}" stroke="#333" stroke-width="4"/>"##
    );
    let _ = writeln!(
        s,
        r##"<circle cx="{mid}" cy="{}" r="180" fill="none" stroke="#333" stroke-width="4"/>"##,
        COURT_WIDTH_CM / 2.0
    );
    for (x0, x1) in [(0.0, 580.0), (2220.0, COURT_LENGTH_CM)] {
        let _ = writeln!(
            s,
            r##"<rect x="{x0}" y="455" width="{}" height="490" fill="none" stroke="#333" stroke-width="4"/>"##,
            x1 - x0
        );
    }
    s.push_str("<g id=\"keypoints\">\n");
    for p in court_template::<f64>() {
        let _ = writeln!(s, r##"<circle cx="{}" cy="{}" r="12" fill="#333"/>"##, p.x, p.y);
    }
    s.push_str("</g>\n<g id=\"tracks\" fill=\"none\" stroke-width=\"6\">\n");
    for (k, (id, pieces)) in trajectories(rows, first, last).into_iter().enumerate() {
        let c = color(k);
        for piece in pieces {
            let pts: Vec<String> = piece.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
            let _ = writeln!(s, r#"<polyline data-id="{id}" stroke="{c}" points="{}"/>"#, pts.join(" "));
        }
    }
    s.push_str("</g>\n</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BBox, CourtPoint};

    fn row(frame: Frame, id: TrackId, x: f64) -> TrackRow<f64> {
        TrackRow {
            frame,
            id,
            bbox: BBox::new(0.0, 0.0, 1.0, 1.0),
            confidence: 1.0,
            court: CourtPoint::new(x, 100.0),
        }
    }

    #[test]
    fn empty_input_draws_template_only() {
        let svg = render_court(&[], 1, 100);
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert_eq!(svg.matches("r=\"12\"").count(), 20);
    }

    #[test]
    fn one_polyline_per_id() {
        let rows: Vec<_> = (1..=10).flat_map(|id| (1..=5).map(move |f| row(f, id, f as f64 * 10.0))).collect();
        let svg = render_court(&rows, 1, 5);
        assert_eq!(svg.matches("<polyline").count(), 10);
    }

    #[test]
    fn gaps_split_polylines() {
        let rows = vec![row(1, 1, 0.0), row(2, 1, 1.0), row(100, 1, 2.0)];
        assert_eq!(trajectories(&rows, 1, 200)[&1].len(), 2);
    }
}
