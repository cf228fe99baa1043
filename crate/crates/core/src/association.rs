//! Per-frame track/detection matching on court coordinates.

use crate::appearance::Embedding;
use crate::assignment::{solve_assignment, CostMatrix};
use crate::geometry::{BBox, CourtPoint};
use crate::scalar::Real;
use crate::Frame;

/// A detector output already projected onto the court.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T> {
    pub frame: Frame,
    pub bbox: BBox<T>,
    pub confidence: T,
    pub court: CourtPoint<T>,
    pub embedding: Option<Embedding<T>>,
}

/// Thresholds for the two-stage cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationParams<T> {
    /// Maximum court distance, cm.
    pub gate: T,
    /// Detections at or above this confidence are matched first.
    pub high_conf: T,
    /// Detections below this confidence are dropped.
    pub low_conf: T,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssociationResult {
    /// `(track index, detection index)`.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    /// Unmatched detections with confidence at or above `low_conf`.
    pub unmatched_detections: Vec<usize>,
    /// Detections dropped for confidence below `low_conf`.
    pub discarded: Vec<usize>,
}

/// Euclidean court distance between every predicted track position and
/// every detection; entries beyond `gate` are infeasible.
pub fn build_cost_matrix<T: Real>(
    predicted: &[CourtPoint<T>],
    detections: &[CourtPoint<T>],
    gate: T,
) -> CostMatrix<T> {
    let mut c = CostMatrix::new(predicted.len(), detections.len());
    for (i, p) in predicted.iter().enumerate() {
        for (j, d) in detections.iter().enumerate() {
            let dist = p.distance(d);
            if dist <= gate {
                c.set(i, j, Some(dist));
            }
        }
    }
    c
}

/// High-confidence detections are matched against all tracks; tracks left
/// over are then matched against the low-confidence band.
pub fn associate_frame<T: Real>(
    predicted: &[CourtPoint<T>],
    detections: &[Detection<T>],
    params: &AssociationParams<T>,
) -> AssociationResult {
    let mut high = Vec::new();
    let mut low = Vec::new();
    let mut discarded = Vec::new();
    for (j, d) in detections.iter().enumerate() {
        if d.confidence >= params.high_conf {
            high.push(j);
        } else if d.confidence >= params.low_conf {
            low.push(j);
        } else {
            discarded.push(j);
        }
    }

    let mut matches = Vec::new();
    let all_tracks: Vec<usize> = (0..predicted.len()).collect();
    let (first, rest_tracks, rest_high) = match_subset(predicted, detections, &all_tracks, &high, params.gate);
    matches.extend(first);
    let (second, unmatched_tracks, rest_low) = match_subset(predicted, detections, &rest_tracks, &low, params.gate);
    matches.extend(second);
    matches.sort_unstable();

    let mut unmatched_detections: Vec<usize> = rest_high.into_iter().chain(rest_low).collect();
    unmatched_detections.sort_unstable();
    AssociationResult {
        matches,
        unmatched_tracks,
        unmatched_detections,
        discarded,
    }
}

type SubsetMatch = (Vec<(usize, usize)>, Vec<usize>, Vec<usize>);

fn match_subset<T: Real>(
    predicted: &[CourtPoint<T>],
    detections: &[Detection<T>],
    tracks: &[usize],
    dets: &[usize],
    gate: T,
) -> SubsetMatch {
    let rows: Vec<CourtPoint<T>> = tracks.iter().map(|&i| predicted[i]).collect();
    let cols: Vec<CourtPoint<T>> = dets.iter().map(|&j| detections[j].court).collect();
    let a = solve_assignment(&build_cost_matrix(&rows, &cols, gate));
    (
        a.pairs.iter().map(|&(i, j)| (tracks[i], dets[j])).collect(),
        a.unmatched_rows.iter().map(|&i| tracks[i]).collect(),
        a.unmatched_cols.iter().map(|&j| dets[j]).collect(),
    )
}
