//! Track lifecycle: association, the ten-player restriction, long-lost
//! re-acquisition and occlusion swap correction.
//!
//! ```text
//! Tentative --3 hits--> Active --miss--> Lost --> B frames --> LongLost
//!     |                   ^                |                      |
//!     +--miss--> deleted  +----rematch-----+<------re-acquire-----+
//! ```
//!
//! Without the player restriction a LongLost track is deleted instead.

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appearance::{appearance_cost, EmbeddingHistory, WindowDirection};
use crate::assignment::{solve_assignment, CostMatrix};
use crate::association::{associate_frame, AssociationParams, Detection};
use crate::geometry::{BBox, CourtPoint};
use crate::motion::{kf_init, kf_predict, kf_update, KalmanConfig, KinematicState};
use crate::occlusion::{
    apply_swap, classify_event, dto_swap_check, open_event, sto_swap_check, MotionTrace, NeighborCandidate,
    OcclusionEvent, OcclusionLabel, PairAppearance, SwapDecision,
};
use crate::scalar::Real;
use crate::{Frame, TrackId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrackerError {
    #[error("frame {got} is not after previous frame {previous}")]
    OutOfOrder { previous: Frame, got: Frame },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackState {
    Tentative,
    Active,
    Lost,
    LongLost,
}

/// How swap corrections reach already emitted rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectionMode {
    /// Rows already emitted stay as they were; corrections apply going forward.
    Streaming,
    /// Emitted rows are rewritten from the occlusion resolution frame.
    #[default]
    Batch,
}

/// Which stages of the pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Features {
    /// Freeze the ten longest tracks at `bgr_frame`.
    pub bgr: bool,
    /// Re-acquire long-lost tracks by appearance and distance.
    pub rlli: bool,
    /// Same-team (motion based) swap correction.
    pub sto: bool,
    /// Different-team (appearance based) swap correction.
    pub dto: bool,
}

impl Default for Features {
    fn default() -> Self {
        Self::full()
    }
}

impl Features {
    pub fn full() -> Self {
        Self {
            bgr: true,
            rlli: true,
            sto: true,
            dto: true,
        }
    }

    /// Plain court-plane association.
    pub fn projected_only() -> Self {
        Self {
            bgr: false,
            rlli: false,
            sto: false,
            dto: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct TrackerConfig<T> {
    /// Association gate, cm.
    pub gate: T,
    pub high_conf: T,
    pub low_conf: T,
    /// Frame at which the player set is frozen.
    pub bgr_frame: Frame,
    pub max_players: usize,
    /// Frames a track may stay lost before it becomes long-lost.
    pub long_lost_frames: u32,
    /// Appearance gate for re-acquisition (cosine cost).
    pub rlli_alpha: T,
    /// Distance gate for re-acquisition, cm.
    pub rlli_dist: T,
    /// Same-team appearance threshold.
    pub gamma: T,
    /// Different-team swap appearance threshold.
    pub delta: T,
    /// Same-team swap speed threshold, cm/frame.
    pub epsilon: T,
    /// Same-team swap travel threshold, cm.
    pub zeta: T,
    /// Appearance/motion window before an occlusion, frames.
    pub window_before: u32,
    /// Appearance/motion window after an occlusion, frames.
    pub window_after: u32,
    /// Consecutive matches needed to confirm a new track.
    pub confirm_hits: u32,
    pub sto_autocorrect: bool,
    pub mode: CorrectionMode,
    pub features: Features,
    pub kalman: KalmanConfig<T>,
}

impl<T: Real> Default for TrackerConfig<T> {
    fn default() -> Self {
        Self {
            gate: T::of(260.0),
            high_conf: T::of(0.6),
            low_conf: T::of(0.1),
            bgr_frame: 100,
            max_players: 10,
            long_lost_frames: 30,
            rlli_alpha: T::of(0.2),
            rlli_dist: T::of(250.0),
            gamma: T::of(0.2),
            delta: T::of(0.2),
            epsilon: T::of(3.0),
            zeta: T::of(3.0),
            window_before: 10,
            window_after: 10,
            confirm_hits: 3,
            sto_autocorrect: true,
            mode: CorrectionMode::Batch,
            features: Features::full(),
            kalman: KalmanConfig::default(),
        }
    }
}

impl<T: Real> TrackerConfig<T> {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("gate", self.gate),
            ("high_conf", self.high_conf),
            ("low_conf", self.low_conf),
            ("rlli_alpha", self.rlli_alpha),
            ("rlli_dist", self.rlli_dist),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("epsilon", self.epsilon),
            ("zeta", self.zeta),
            ("kalman.measurement_sigma", self.kalman.measurement_sigma),
            ("kalman.init_position_sigma", self.kalman.init_position_sigma),
            ("kalman.init_velocity_sigma", self.kalman.init_velocity_sigma),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.kalman.acceleration_sigma < T::zero() {
            return Err("kalman.acceleration_sigma must be non-negative".into());
        }
        if self.low_conf >= self.high_conf {
            return Err(format!(
                "low_conf ({}) must be below high_conf ({})",
                self.low_conf, self.high_conf
            ));
        }
        if self.max_players == 0 || self.window_before == 0 || self.window_after == 0 || self.confirm_hits == 0 {
            return Err("max_players, windows and confirm_hits must be at least 1".into());
        }
        Ok(())
    }

    fn association(&self) -> AssociationParams<T> {
        AssociationParams {
            gate: self.gate,
            high_conf: self.high_conf,
            low_conf: self.low_conf,
        }
    }
}

/// One emitted output row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRow<T> {
    pub frame: Frame,
    pub id: TrackId,
    pub bbox: BBox<T>,
    pub confidence: T,
    /// Filtered court position, cm.
    pub court: CourtPoint<T>,
}

#[derive(Debug, Clone)]
pub struct Track<T> {
    pub id: TrackId,
    pub state: TrackState,
    pub kinematics: KinematicState<T>,
    /// Last matched frame while the track is Lost or LongLost.
    pub lost_since: Option<Frame>,
    /// Observed court position at every matched frame.
    pub court_history: Vec<(Frame, CourtPoint<T>)>,
    pub embedding_history: EmbeddingHistory<T>,
    /// Number of matched frames.
    pub length: u32,
    pub created: Frame,
    hits: u32,
    last_matched: Frame,
}

impl<T: Real> Track<T> {
    fn new(id: TrackId, frame: Frame, det: &Detection<T>, cfg: &TrackerConfig<T>, state: TrackState) -> Self {
        let mut embedding_history = EmbeddingHistory::new();
        embedding_history.push(frame, det.embedding.clone());
        Self {
            id,
            state,
            kinematics: kf_init(det.court, &cfg.kalman),
            lost_since: None,
            court_history: vec![(frame, det.court)],
            embedding_history,
            length: 1,
            created: frame,
            hits: 1,
            last_matched: frame,
        }
    }

    pub fn last_matched(&self) -> Frame {
        self.last_matched
    }

    pub fn observed_at(&self, frame: Frame) -> Option<CourtPoint<T>> {
        self.court_history
            .binary_search_by_key(&frame, |(f, _)| *f)
            .ok()
            .map(|i| self.court_history[i].1)
    }

    /// Last observed position at or before `frame`.
    pub fn last_observed_until(&self, frame: Frame) -> Option<(Frame, CourtPoint<T>)> {
        let idx = self.court_history.partition_point(|(f, _)| *f <= frame);
        idx.checked_sub(1).map(|i| self.court_history[i])
    }

    fn first_observed_in(&self, first: Frame, last: Frame) -> Option<(Frame, CourtPoint<T>)> {
        let idx = self.court_history.partition_point(|(f, _)| *f < first);
        self.court_history.get(idx).copied().filter(|(f, _)| *f <= last)
    }

    fn record_match(&mut self, frame: Frame, det: &Detection<T>) {
        self.court_history.push((frame, det.court));
        self.embedding_history.push(frame, det.embedding.clone());
        self.length += 1;
        self.last_matched = frame;
    }

    /// Exchanges everything observed from `from` onward, plus the live
    /// filter state, with `other`. Ids and earlier history stay put.
    fn exchange_from(&mut self, other: &mut Self, from: Frame) {
        let split = |h: &mut Vec<(Frame, CourtPoint<T>)>| {
            let idx = h.partition_point(|(f, _)| *f < from);
            h.split_off(idx)
        };
        let mine = split(&mut self.court_history);
        let theirs = split(&mut other.court_history);
        self.court_history.extend(theirs);
        other.court_history.extend(mine);

        let mine = self.embedding_history.split_off(from);
        let theirs = other.embedding_history.split_off(from);
        self.embedding_history.extend(theirs);
        other.embedding_history.extend(mine);

        std::mem::swap(&mut self.kinematics, &mut other.kinematics);
        std::mem::swap(&mut self.state, &mut other.state);
        std::mem::swap(&mut self.lost_since, &mut other.lost_since);
        std::mem::swap(&mut self.hits, &mut other.hits);
        std::mem::swap(&mut self.last_matched, &mut other.last_matched);
        self.length = self.court_history.len() as u32;
        other.length = other.court_history.len() as u32;
    }
}

/// Counters reported in the run summary.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TrackerStats {
    pub frames: u64,
    pub tracks_created: u64,
    pub bgr_pruned: u64,
    pub rlli_rematches: u64,
    pub sto_swaps: u64,
    pub dto_swaps: u64,
    pub events_opened: u64,
}

/// A swap correction that was applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwapRecord {
    pub a: TrackId,
    pub b: TrackId,
    pub label: OcclusionLabel,
    /// First frame whose identities were exchanged internally.
    pub from_frame: Frame,
    /// Frame at which the swap was detected.
    pub detected_at: Frame,
}

/// One tracking session over one sequence. Single writer.
#[derive(Debug)]
pub struct Tracker<T> {
    config: TrackerConfig<T>,
    last_frame: Option<Frame>,
    tracks: Vec<Track<T>>,
    next_id: TrackId,
    frozen: bool,
    events: Vec<OcclusionEvent<T>>,
    swaps: Vec<SwapRecord>,
    rows: Vec<TrackRow<T>>,
    stats: TrackerStats,
}

impl<T: Real> Tracker<T> {
    pub fn new(config: TrackerConfig<T>) -> Self {
        Self {
            config,
            last_frame: None,
            tracks: Vec::new(),
            next_id: 1,
            frozen: false,
            events: Vec::new(),
            swaps: Vec::new(),
            rows: Vec::new(),
            stats: TrackerStats::default(),
        }
    }

    pub fn config(&self) -> &TrackerConfig<T> {
        &self.config
    }

    pub fn tracks(&self) -> &[Track<T>] {
        &self.tracks
    }

    pub fn track(&self, id: TrackId) -> Option<&Track<T>> {
        self.tracks.iter().find(|t| t.id == id)
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn events(&self) -> &[OcclusionEvent<T>] {
        &self.events
    }

    pub fn swaps(&self) -> &[SwapRecord] {
        &self.swaps
    }

    pub fn stats(&self) -> &TrackerStats {
        &self.stats
    }

    /// Every row emitted so far, including batch-mode rewrites.
    pub fn rows(&self) -> &[TrackRow<T>] {
        &self.rows
    }

    /// All logged rows ordered by frame, then id. Batch relabels can leave
    /// a frame out of id order in [`Tracker::rows`].
    pub fn into_rows(mut self) -> Vec<TrackRow<T>> {
        self.rows.sort_by_key(|r| (r.frame, r.id));
        self.rows
    }

    /// Processes one frame and returns the rows emitted for it.
    pub fn step_frame(&mut self, frame: Frame, detections: &[Detection<T>]) -> Result<Vec<TrackRow<T>>, TrackerError> {
        if let Some(previous) = self.last_frame {
            if frame <= previous {
                return Err(TrackerError::OutOfOrder { previous, got: frame });
            }
        }
        let first_frame = self.last_frame.is_none();
        let dt = self.last_frame.map_or(1, |p| frame - p);
        self.last_frame = Some(frame);
        self.stats.frames += 1;
        let cfg = self.config;

        for t in self.tracks.iter_mut().filter(|t| t.state != TrackState::LongLost) {
            t.kinematics = kf_predict(&t.kinematics, dt, &cfg.kalman);
        }

        let live: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].state != TrackState::LongLost)
            .collect();
        let predicted: Vec<_> = live.iter().map(|&i| self.tracks[i].kinematics.position()).collect();
        let assoc = associate_frame(&predicted, detections, &cfg.association());

        let mut emitted: Vec<(TrackId, usize)> = Vec::new();
        for &(ti, di) in &assoc.matches {
            let idx = live[ti];
            let det = &detections[di];
            let t = &mut self.tracks[idx];
            t.kinematics = kf_update(&t.kinematics, det.court, &cfg.kalman);
            t.record_match(frame, det);
            t.hits += 1;
            match t.state {
                TrackState::Tentative if t.hits >= cfg.confirm_hits => t.state = TrackState::Active,
                TrackState::Lost => {
                    t.state = TrackState::Active;
                    t.lost_since = None;
                }
                _ => {}
            }
            emitted.push((t.id, di));
        }

        let mut newly_lost = Vec::new();
        let mut deleted = Vec::new();
        for &ti in &assoc.unmatched_tracks {
            let idx = live[ti];
            let t = &mut self.tracks[idx];
            t.hits = 0;
            match t.state {
                TrackState::Tentative => deleted.push(t.id),
                TrackState::Active => {
                    t.state = TrackState::Lost;
                    t.lost_since = Some(t.last_matched);
                    newly_lost.push(idx);
                }
                TrackState::Lost => {
                    let since = t.lost_since.unwrap_or(t.last_matched);
                    if frame - since > cfg.long_lost_frames {
                        if cfg.features.bgr {
                            t.state = TrackState::LongLost;
                        } else {
                            deleted.push(t.id);
                        }
                    }
                }
                TrackState::LongLost => {}
            }
        }

        if cfg.features.sto || cfg.features.dto {
            for idx in newly_lost {
                self.open_occlusion(idx, frame);
            }
        }

        if self.frozen {
            if cfg.features.rlli {
                let revived = self.rlli_rematch(frame, detections, &assoc.unmatched_detections);
                emitted.extend(revived);
            }
        } else {
            for &di in &assoc.unmatched_detections {
                let det = &detections[di];
                if det.confidence < cfg.high_conf {
                    continue;
                }
                let state = if first_frame || cfg.confirm_hits <= 1 {
                    TrackState::Active
                } else {
                    TrackState::Tentative
                };
                let id = self.next_id;
                self.next_id += 1;
                self.tracks.push(Track::new(id, frame, det, &cfg, state));
                self.stats.tracks_created += 1;
                if state == TrackState::Active {
                    emitted.push((id, di));
                }
            }
        }

        if !deleted.is_empty() {
            self.remove_tracks(&deleted);
        }

        if cfg.features.bgr && !self.frozen && frame >= cfg.bgr_frame {
            self.apply_bgr();
        }

        let mut out = Vec::new();
        for (id, di) in emitted {
            let Some(t) = self.track(id) else { continue };
            if t.state != TrackState::Active || t.last_matched != frame {
                continue;
            }
            let det = &detections[di];
            out.push(TrackRow {
                frame,
                id,
                bbox: det.bbox,
                confidence: det.confidence,
                court: t.kinematics.position(),
            });
        }
        out.sort_by_key(|r| r.id);
        out.dedup_by_key(|r| r.id);
        let start = self.rows.len();
        self.rows.extend(out);

        // Checks run after logging so a batch relabel also covers this frame.
        if cfg.features.sto || cfg.features.dto {
            self.advance_occlusions(frame);
        }
        let mut out = self.rows[start..].to_vec();
        out.sort_by_key(|r| r.id);
        Ok(out)
    }

    fn index_of(&self, id: TrackId) -> Option<usize> {
        self.tracks.iter().position(|t| t.id == id)
    }

    fn remove_tracks(&mut self, ids: &[TrackId]) {
        self.tracks.retain(|t| !ids.contains(&t.id));
        self.events
            .retain(|e| !ids.contains(&e.lost_track_id) || e.checked_at.is_some());
        for e in self.events.iter_mut().filter(|e| e.checked_at.is_none()) {
            e.neighbors.retain(|n| !ids.contains(&n.id));
        }
    }

    /// Keeps the `max_players` longest tracks and freezes the id set.
    pub fn apply_bgr(&mut self) -> Vec<TrackId> {
        let mut order: Vec<usize> = (0..self.tracks.len()).collect();
        order.sort_by(|&i, &j| {
            let (a, b) = (&self.tracks[i], &self.tracks[j]);
            b.length.cmp(&a.length).then(a.created.cmp(&b.created)).then(a.id.cmp(&b.id))
        });
        let keep: Vec<TrackId> = order
            .iter()
            .take(self.config.max_players)
            .map(|&i| self.tracks[i].id)
            .collect();
        if keep.len() < self.config.max_players {
            warn!(
                "player restriction: only {} tracks alive, freezing all of them",
                keep.len()
            );
        }
        let pruned: Vec<TrackId> = self
            .tracks
            .iter()
            .map(|t| t.id)
            .filter(|id| !keep.contains(id))
            .collect();
        self.stats.bgr_pruned += pruned.len() as u64;
        self.remove_tracks(&pruned);
        for t in self.tracks.iter_mut().filter(|t| t.state == TrackState::Tentative) {
            t.state = TrackState::Active;
        }
        self.frozen = true;
        let mut ids = keep;
        ids.sort_unstable();
        debug!("player set frozen: {ids:?}");
        ids
    }

    /// Matches long-lost tracks to leftover detections by appearance and
    /// distance from where they were last seen. Returns `(track id,
    /// detection index)` for every re-acquired track.
    pub fn rlli_rematch(
        &mut self,
        frame: Frame,
        detections: &[Detection<T>],
        unmatched: &[usize],
    ) -> Vec<(TrackId, usize)> {
        let cfg = self.config;
        let lost: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].state == TrackState::LongLost)
            .collect();
        if lost.is_empty() || unmatched.is_empty() {
            return Vec::new();
        }
        let mut costs = CostMatrix::new(lost.len(), unmatched.len());
        for (r, &ti) in lost.iter().enumerate() {
            let t = &self.tracks[ti];
            let since = t.lost_since.unwrap_or(t.last_matched);
            let Ok(window) = t.embedding_history.window_mean(since, cfg.window_before, WindowDirection::Before) else {
                continue;
            };
            let Some((_, last_pos)) = t.last_observed_until(since) else { continue };
            for (c, &di) in unmatched.iter().enumerate() {
                let det = &detections[di];
                let Some(emb) = det.embedding.as_ref() else { continue };
                let Ok(cost) = appearance_cost(&window.mean, emb) else { continue };
                let dist = last_pos.distance(&det.court);
                if cost <= cfg.rlli_alpha && dist <= cfg.rlli_dist {
                    costs.set(r, c, Some(cost));
                }
            }
        }
        let assignment = solve_assignment(&costs);
        let mut out = Vec::new();
        for (r, c) in assignment.pairs {
            let di = unmatched[c];
            let det = &detections[di];
            let t = &mut self.tracks[lost[r]];
            t.kinematics = kf_init(det.court, &cfg.kalman);
            t.record_match(frame, det);
            t.hits = 1;
            t.state = TrackState::Active;
            t.lost_since = None;
            self.stats.rlli_rematches += 1;
            debug!("frame {frame}: track {} re-acquired", t.id);
            out.push((t.id, di));
        }
        out
    }

    fn open_occlusion(&mut self, idx: usize, frame: Frame) {
        let lost = &self.tracks[idx];
        let candidates: Vec<NeighborCandidate<T>> = self
            .tracks
            .iter()
            .filter(|t| t.id != lost.id && matches!(t.state, TrackState::Active | TrackState::Lost))
            .map(|t| NeighborCandidate {
                id: t.id,
                position: t.kinematics.position(),
                observed: t.observed_at(frame),
            })
            .collect();
        let event = open_event(
            lost.id,
            lost.kinematics.position(),
            frame,
            self.config.window_before,
            &candidates,
        );
        self.stats.events_opened += 1;
        self.events.push(event);
    }

    fn advance_occlusions(&mut self, frame: Frame) {
        let m = self.config.window_after;
        for k in 0..self.events.len() {
            if self.events[k].checked_at.is_some() {
                continue;
            }
            let lost_id = self.events[k].lost_track_id;
            if self.events[k].resolution_frame.is_none() {
                if let Some(t) = self.track(lost_id) {
                    if t.state == TrackState::Active && t.last_matched == frame {
                        self.events[k].resolution_frame = Some(frame);
                    }
                }
            }
            if let Some(r) = self.events[k].resolution_frame {
                if frame + 1 >= r + m {
                    self.check_event(k, frame);
                }
            }
        }
    }

    /// Runs the swap tests for one resolved event and applies at most one
    /// correction, nearest neighbour first.
    fn check_event(&mut self, k: usize, frame: Frame) {
        let cfg = self.config;
        let event = self.events[k].clone();
        self.events[k].checked_at = Some(frame);
        let Some(resolution) = event.resolution_frame else { return };
        if event.is_degenerate() {
            return;
        }
        let Some(a) = self.track(event.lost_track_id) else { return };
        let before_anchor = event.occlusion_frame - 1;
        let after_last = resolution + cfg.window_after - 1;
        let window = |t: &Track<T>, anchor, len, dir| {
            t.embedding_history
                .window_mean(anchor, len, dir)
                .ok()
                .map(|w| w.mean)
                .filter(|e| e.norm() > T::zero())
        };
        let a_before = window(a, before_anchor, cfg.window_before, WindowDirection::Before);
        let a_after = window(a, resolution, cfg.window_after, WindowDirection::After);
        let mut first_label = OcclusionLabel::Unclassified;
        let mut swap = None;

        for (n, neighbor) in event.neighbors.iter().enumerate() {
            let Some(b) = self.track(neighbor.id) else { continue };
            let b_before = window(b, before_anchor, cfg.window_before, WindowDirection::Before);
            let b_after = window(b, resolution, cfg.window_after, WindowDirection::After);
            let evidence = PairAppearance {
                before_a: a_before.as_ref(),
                after_a: a_after.as_ref(),
                before_b: b_before.as_ref(),
                after_b: b_after.as_ref(),
            };
            let label = classify_event(&evidence, cfg.gamma);
            if n == 0 {
                first_label = label;
            }
            let decision = match label {
                OcclusionLabel::Dto if cfg.features.dto => dto_swap_check(&evidence, cfg.delta),
                OcclusionLabel::Sto if cfg.features.sto && cfg.sto_autocorrect => {
                    let trace = |t: &Track<T>| -> Option<MotionTrace<T>> {
                        let (start_frame, start) = t.first_observed_in(event.onset_frame, before_anchor)?;
                        let (end_frame, end) = t.last_observed_until(after_last)?;
                        (end_frame >= resolution).then_some(MotionTrace {
                            start_frame,
                            start,
                            end_frame,
                            end,
                        })
                    };
                    let point = neighbor.observed_at_occlusion.or_else(|| {
                        let pa = a.last_observed_until(before_anchor)?.1;
                        let pb = b.last_observed_until(before_anchor)?.1;
                        Some(pa.midpoint(&pb))
                    });
                    match (trace(a), trace(b), point) {
                        (Some(ta), Some(tb), Some(p)) => {
                            sto_swap_check(&ta, &tb, p, event.occlusion_frame, cfg.epsilon, cfg.zeta)
                        }
                        _ => SwapDecision::NoSwap(crate::occlusion::NoSwapReason::MissingEvidence),
                    }
                }
                _ => continue,
            };
            debug!(
                "frame {frame}: occlusion of {} vs {}: {:?} -> {:?}",
                event.lost_track_id, neighbor.id, label, decision
            );
            if decision.is_swap() {
                swap = Some((neighbor.id, label));
                break;
            }
        }
        self.events[k].label = first_label;
        if let Some((other, label)) = swap {
            self.events[k].label = label;
            self.events[k].swap_applied = Some(other);
            self.swap_tracks(event.lost_track_id, other, resolution, frame, label);
        }
    }

    fn swap_tracks(&mut self, a: TrackId, b: TrackId, from: Frame, detected_at: Frame, label: OcclusionLabel) {
        let (Some(ia), Some(ib)) = (self.index_of(a), self.index_of(b)) else { return };
        let (lo, hi) = if ia < ib { (ia, ib) } else { (ib, ia) };
        let (left, right) = self.tracks.split_at_mut(hi);
        left[lo].exchange_from(&mut right[0], from);
        if self.config.mode == CorrectionMode::Batch {
            apply_swap(&mut self.rows, a, b, from);
        }
        match label {
            OcclusionLabel::Sto => self.stats.sto_swaps += 1,
            OcclusionLabel::Dto => self.stats.dto_swaps += 1,
            OcclusionLabel::Unclassified => {}
        }
        self.swaps.push(SwapRecord {
            a,
            b,
            label,
            from_frame: from,
            detected_at,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::appearance::Embedding;

    fn det(frame: Frame, x: f64, y: f64, emb: Option<Vec<f64>>) -> Detection<f64> {
        Detection {
            frame,
            bbox: BBox::new(x / 2.0, y / 2.0, 20.0, 50.0),
            confidence: 0.9,
            court: CourtPoint::new(x, y),
            embedding: emb.map(Embedding::new),
        }
    }

    fn grid(frame: Frame, n: usize) -> Vec<Detection<f64>> {
        (0..n)
            .map(|i| {
                let x = 200.0 + 250.0 * (i % 5) as f64 + frame as f64;
                let y = 300.0 + 600.0 * (i / 5) as f64;
                let mut e = vec![0.0; 12];
                e[i] = 1.0;
                det(frame, x, y, Some(e))
            })
            .collect()
    }

    #[test]
    fn ten_separated_players() {
        let mut tr = Tracker::new(TrackerConfig::<f64>::default());
        for f in 1..=100 {
            tr.step_frame(f, &grid(f, 10)).unwrap();
        }
        assert!(tr.is_frozen());
        assert_eq!(tr.tracks().len(), 10);
        assert!(tr.tracks().iter().all(|t| t.state == TrackState::Active));
        // Every emitted row of a given x slot keeps the same id.
        let mut seen = std::collections::BTreeMap::new();
        for r in tr.rows() {
            let slot = ((r.bbox.x * 2.0 - r.frame as f64 - 200.0) / 250.0).round() as i64 + 10 * (r.bbox.y > 300.0) as i64;
            let prev = seen.insert(slot, r.id);
            assert!(prev.is_none() || prev == Some(r.id));
        }
    }

    #[test]
    fn out_of_order_frames_rejected() {
        let mut tr = Tracker::new(TrackerConfig::<f64>::default());
        tr.step_frame(5, &[]).unwrap();
        assert_eq!(
            tr.step_frame(5, &[]).unwrap_err(),
            TrackerError::OutOfOrder { previous: 5, got: 5 }
        );
    }

    #[test]
    fn long_lost_after_b_plus_one_misses() {
        let cfg = TrackerConfig::<f64>::default();
        let mut tr = Tracker::new(cfg);
        for f in 1..=110 {
            tr.step_frame(f, &grid(f, 10)).unwrap();
        }
        let gone = tr.rows().iter().find(|r| r.frame == 110 && r.bbox.x < 200.0).unwrap().id;
        let b = cfg.long_lost_frames;
        for f in 111..=(110 + b) {
            let dets: Vec<_> = grid(f, 10).into_iter().skip(1).collect();
            tr.step_frame(f, &dets).unwrap();
        }
        assert_eq!(tr.track(gone).unwrap().state, TrackState::Lost);
        let f = 111 + b;
        let dets: Vec<_> = grid(f, 10).into_iter().skip(1).collect();
        tr.step_frame(f, &dets).unwrap();
        assert_eq!(tr.track(gone).unwrap().state, TrackState::LongLost);
        assert_eq!(tr.track(gone).unwrap().lost_since, Some(110));
    }

    #[test]
    fn lost_track_rematched_within_gate() {
        let mut tr = Tracker::new(TrackerConfig::<f64>::default());
        for f in 1..=120 {
            tr.step_frame(f, &grid(f, 10)).unwrap();
        }
        let id = tr.rows().iter().find(|r| r.frame == 120 && r.bbox.x < 200.0).unwrap().id;
        for f in 121..=125 {
            let dets: Vec<_> = grid(f, 10).into_iter().skip(1).collect();
            tr.step_frame(f, &dets).unwrap();
        }
        assert_eq!(tr.track(id).unwrap().state, TrackState::Lost);
        let rows = tr.step_frame(126, &grid(126, 10)).unwrap();
        assert!(rows.iter().any(|r| r.id == id && r.bbox.x < 200.0));
        assert_eq!(tr.track(id).unwrap().state, TrackState::Active);
    }

    fn seeded_lengths(lengths: &[u32]) -> Tracker<f64> {
        let mut tr = Tracker::new(TrackerConfig::<f64>::default());
        for (i, &len) in lengths.iter().enumerate() {
            let d = det(1, 100.0 * i as f64, 0.0, None);
            let mut t = Track::new(i as TrackId + 1, (101 - len.min(100)) as Frame, &d, &tr.config, TrackState::Active);
            t.length = len;
            tr.tracks.push(t);
        }
        tr
    }

    #[test]
    fn bgr_keeps_ten_longest() {
        let mut tr = seeded_lengths(&[100, 100, 100, 100, 100, 100, 100, 100, 100, 95, 40, 12]);
        let kept = tr.apply_bgr();
        assert_eq!(kept, (1..=10).collect::<Vec<_>>());
        assert_eq!(tr.stats().bgr_pruned, 2);
    }

    #[test]
    fn bgr_exactly_ten_is_noop() {
        let mut tr = seeded_lengths(&[50; 10]);
        assert_eq!(tr.apply_bgr().len(), 10);
        assert_eq!(tr.stats().bgr_pruned, 0);
    }

    #[test]
    fn bgr_tie_prefers_earliest_creation() {
        let mut tr = seeded_lengths(&[100; 11]);
        // Same length; track 11 created earlier than track 3.
        tr.tracks[10].created = 0;
        tr.tracks[2].created = 5;
        let kept = tr.apply_bgr();
        assert!(kept.contains(&11));
        assert!(!kept.contains(&3));
    }

    #[test]
    fn bgr_with_fewer_tracks_keeps_all() {
        let mut tr = seeded_lengths(&[30, 20, 10]);
        assert_eq!(tr.apply_bgr(), vec![1, 2, 3]);
        assert!(tr.is_frozen());
    }

    #[test]
    fn no_new_ids_after_freeze() {
        let mut tr = Tracker::new(TrackerConfig::<f64>::default());
        for f in 1..=100 {
            tr.step_frame(f, &grid(f, 10)).unwrap();
        }
        for f in 101..=150 {
            let mut dets = grid(f, 10);
            dets.push(det(f, 2700.0, 1350.0, None));
            tr.step_frame(f, &dets).unwrap();
        }
        let ids: std::collections::BTreeSet<_> = tr.rows().iter().filter(|r| r.frame > 100).map(|r| r.id).collect();
        assert_eq!(ids.len(), 10);
    }

    #[test]
    fn projected_only_creates_new_ids() {
        let cfg = TrackerConfig::<f64> {
            features: Features::projected_only(),
            ..Default::default()
        };
        let mut tr = Tracker::new(cfg);
        for f in 1..=150 {
            let mut dets = grid(f, 10);
            if f > 100 {
                dets.push(det(f, 2700.0, 1350.0, None));
            }
            tr.step_frame(f, &dets).unwrap();
        }
        let ids: std::collections::BTreeSet<_> = tr.rows().iter().map(|r| r.id).collect();
        assert_eq!(ids.len(), 11);
    }
}
