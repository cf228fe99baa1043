//! Occlusion episodes and post-occlusion identity swap tests.
//!
//! When a track is lost its two nearest neighbours are recorded. Once the
//! lost track is re-acquired and an after-window has accumulated, each
//! (lost, neighbour) pair is labelled same-team (STO) or different-team
//! (DTO) from appearance, then tested for an identity swap: DTO pairs by
//! cross appearance similarity, STO pairs by speed and travel distance
//! around the occlusion point.

use serde::{Deserialize, Serialize};

use crate::appearance::{appearance_cost, Embedding};
use crate::geometry::CourtPoint;
use crate::scalar::Real;
use crate::tracker::TrackRow;
use crate::{Frame, TrackId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OcclusionLabel {
    /// Same-team occlusion.
    Sto,
    /// Different-team occlusion.
    Dto,
    /// Not enough appearance evidence.
    Unclassified,
}

impl OcclusionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Sto => "STO",
            Self::Dto => "DTO",
            Self::Unclassified => "UNCLASSIFIED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoSwapReason {
    /// Evidence available but the swap inequalities do not all hold.
    CriteriaNotMet,
    /// A required appearance window or position is missing.
    MissingEvidence,
    /// A velocity interval has zero length.
    UndefinedVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwapDecision {
    Swap,
    NoSwap(NoSwapReason),
}

impl SwapDecision {
    pub fn is_swap(&self) -> bool {
        matches!(self, Self::Swap)
    }
}

/// A neighbour recorded when the lost track disappeared.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSnapshot<T> {
    pub id: TrackId,
    /// Court distance to the lost track at the occlusion frame.
    pub distance: T,
    /// Observed court position at the occlusion frame, if the neighbour was detected.
    pub observed_at_occlusion: Option<CourtPoint<T>>,
}

/// One occlusion episode.
#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionEvent<T> {
    pub lost_track_id: TrackId,
    /// Up to two nearest tracks, nearest first.
    pub neighbors: Vec<NeighborSnapshot<T>>,
    /// Start of the before-window.
    pub onset_frame: Frame,
    /// First frame the lost track went unmatched.
    pub occlusion_frame: Frame,
    /// Frame the lost track was matched again; start of the after-window.
    pub resolution_frame: Option<Frame>,
    pub label: OcclusionLabel,
    /// Partner id if a swap correction was applied.
    pub swap_applied: Option<TrackId>,
    /// Frame at which the swap tests ran.
    pub checked_at: Option<Frame>,
}

impl<T: Real> OcclusionEvent<T> {
    /// Swap tests need two neighbours.
    pub fn is_degenerate(&self) -> bool {
        self.neighbors.len() < 2
    }
}

/// Candidate neighbour for [`open_event`]: id, current court position and
/// observed position at the occlusion frame.
#[derive(Debug, Clone, Copy)]
pub struct NeighborCandidate<T> {
    pub id: TrackId,
    pub position: CourtPoint<T>,
    pub observed: Option<CourtPoint<T>>,
}

/// Records the two candidates nearest to `lost_position` (ties by lower id).
pub fn open_event<T: Real>(
    lost_track_id: TrackId,
    lost_position: CourtPoint<T>,
    occlusion_frame: Frame,
    window_before: u32,
    candidates: &[NeighborCandidate<T>],
) -> OcclusionEvent<T> {
    let mut ranked: Vec<NeighborSnapshot<T>> = candidates
        .iter()
        .filter(|c| c.id != lost_track_id)
        .map(|c| NeighborSnapshot {
            id: c.id,
            distance: c.position.distance(&lost_position),
            observed_at_occlusion: c.observed,
        })
        .collect();
    ranked.sort_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.id.cmp(&b.id))
    });
    ranked.truncate(2);
    OcclusionEvent {
        lost_track_id,
        neighbors: ranked,
        onset_frame: occlusion_frame.saturating_sub(window_before),
        occlusion_frame,
        resolution_frame: None,
        label: OcclusionLabel::Unclassified,
        swap_applied: None,
        checked_at: None,
    }
}

/// Window-mean appearance of the two players before and after the occlusion.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairAppearance<'a, T> {
    pub before_a: Option<&'a Embedding<T>>,
    pub after_a: Option<&'a Embedding<T>>,
    pub before_b: Option<&'a Embedding<T>>,
    pub after_b: Option<&'a Embedding<T>>,
}

impl<T: Real> PairAppearance<'_, T> {
    /// The same evidence with the roles of the two players exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            before_a: self.before_b,
            after_a: self.after_b,
            before_b: self.before_a,
            after_b: self.after_a,
        }
    }
}

fn cost<T: Real>(a: Option<&Embedding<T>>, b: Option<&Embedding<T>>) -> Option<T> {
    appearance_cost(a?, b?).ok()
}

/// STO when either the before-pair or the after-pair is closer than `gamma`
/// in appearance, DTO otherwise. Unclassified if neither pair is comparable.
pub fn classify_event<T: Real>(w: &PairAppearance<'_, T>, gamma: T) -> OcclusionLabel {
    let before = cost(w.before_a, w.before_b);
    let after = cost(w.after_a, w.after_b);
    if before.is_none() && after.is_none() {
        return OcclusionLabel::Unclassified;
    }
    if before.is_some_and(|c| c < gamma) || after.is_some_and(|c| c < gamma) {
        OcclusionLabel::Sto
    } else {
        OcclusionLabel::Dto
    }
}

/// Swap iff each player's before-appearance matches the other's after-appearance.
pub fn dto_swap_check<T: Real>(w: &PairAppearance<'_, T>, delta: T) -> SwapDecision {
    let (Some(ab), Some(ba)) = (cost(w.before_a, w.after_b), cost(w.before_b, w.after_a)) else {
        return SwapDecision::NoSwap(NoSwapReason::MissingEvidence);
    };
    if ab < delta && ba < delta {
        SwapDecision::Swap
    } else {
        SwapDecision::NoSwap(NoSwapReason::CriteriaNotMet)
    }
}

/// Where one track was at the start of the before-window and at the end of
/// the after-window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionTrace<T> {
    pub start_frame: Frame,
    pub start: CourtPoint<T>,
    pub end_frame: Frame,
    pub end: CourtPoint<T>,
}

/// Speed and travel figures of one track around the occlusion point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoMeasures<T> {
    /// cm/frame from the window start to the occlusion point.
    pub speed_before: T,
    /// cm/frame from the occlusion point to the window end.
    pub speed_after: T,
    /// Distance travelled into the occlusion point minus distance out of it.
    pub travel_asymmetry: T,
}

pub fn sto_measures<T: Real>(
    trace: &MotionTrace<T>,
    occlusion_point: CourtPoint<T>,
    occlusion_frame: Frame,
) -> Option<StoMeasures<T>> {
    let into = occlusion_frame.abs_diff(trace.start_frame);
    let out = trace.end_frame.abs_diff(occlusion_frame);
    if into == 0 || out == 0 {
        return None;
    }
    let d_in = occlusion_point.distance(&trace.start);
    let d_out = trace.end.distance(&occlusion_point);
    Some(StoMeasures {
        speed_before: d_in / T::from_u32(into)?,
        speed_after: d_out / T::from_u32(out)?,
        travel_asymmetry: d_in - d_out,
    })
}

/// Swap iff both tracks change speed by more than `epsilon` and both travel
/// at least `zeta` further into the occlusion point than out of it.
pub fn sto_swap_check<T: Real>(
    a: &MotionTrace<T>,
    b: &MotionTrace<T>,
    occlusion_point: CourtPoint<T>,
    occlusion_frame: Frame,
    epsilon: T,
    zeta: T,
) -> SwapDecision {
    let (Some(ma), Some(mb)) = (
        sto_measures(a, occlusion_point, occlusion_frame),
        sto_measures(b, occlusion_point, occlusion_frame),
    ) else {
        return SwapDecision::NoSwap(NoSwapReason::UndefinedVelocity);
    };
    let holds = |m: &StoMeasures<T>| (m.speed_before - m.speed_after).abs() > epsilon && m.travel_asymmetry > zeta;
    if holds(&ma) && holds(&mb) {
        SwapDecision::Swap
    } else {
        SwapDecision::NoSwap(NoSwapReason::CriteriaNotMet)
    }
}

/// Exchanges ids `a` and `b` on every row at or after `from_frame`.
/// Returns the number of rows relabelled.
pub fn apply_swap<T: Real>(rows: &mut [TrackRow<T>], a: TrackId, b: TrackId, from_frame: Frame) -> usize {
    let mut changed = 0;
    for r in rows.iter_mut().filter(|r| r.frame >= from_frame) {
        if r.id == a {
            r.id = b;
            changed += 1;
        } else if r.id == b {
            r.id = a;
            changed += 1;
        }
    }
    changed
}
