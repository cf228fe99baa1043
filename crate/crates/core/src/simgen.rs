//! Synthetic basketball sequences with scripted two-player occlusions.
//!
//! Ten players (ids 1-5 team A, 6-10 team B) roam the court by random
//! waypoints. Scripted events pull two players together: they walk to an
//! approach start, run at each other, stand together while only one of them
//! is detected, then separate. In a swap event the two exchange places
//! halfway through the occlusion and the surviving detection switches to the
//! other player, which makes plain distance association exchange their ids.
//! Distractors (referees, bench) walk outside the lines for short spells.
//!
//! Detections are produced through a fixed synthetic camera and carry
//! team-prototype embeddings.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appearance::Embedding;
use crate::geometry::{court_template, BBox, CourtPoint, Correspondence, Homography, ImagePoint, COURT_LENGTH_CM, COURT_WIDTH_CM};
use crate::io::MotRow;
use crate::Frame;

/// Frames spent walking from free play to the approach start.
pub const TRANSITION_FRAMES: u32 = 90;
/// Frames of slow separation after a stationary occlusion.
pub const EXIT_FRAMES: u32 = 30;
/// Frames of straight running after a pass-through occlusion.
pub const PASS_EXIT_FRAMES: u32 = 12;
/// Frames on each side of an occlusion whose detections get low confidence.
pub const PARTIAL_FRAMES: u32 = 3;
const MEET_OFFSET_CM: f64 = 20.0;
const PASS_OFFSET_CM: f64 = 35.0;
const EXIT_SPEED: f64 = 1.5;
const BRAKE_FRAMES: u32 = 5;
const PLAYER_HEIGHT_CM: f64 = 190.0;
const FIRST_EVENT_FRAME: Frame = 130;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("event at frame {onset}: participants cannot reach the meeting point ({speed:.1} cm/frame needed, cap {vmax})")]
    Infeasible { onset: Frame, speed: f64, vmax: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    /// Same team.
    Sto,
    /// Different teams.
    Dto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventStyle {
    /// Head-on run that stops; players stand together, then drift apart.
    Scramble,
    /// Side-by-side run at constant velocity.
    PassThrough,
    /// Like a scramble, but the pair walks slowly together for longer than
    /// the long-lost horizon.
    LongHide,
}

/// One scripted occlusion. `participants[0]` stays detected; the detection
/// of `participants[1]` disappears at `onset` for `length` frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: EventKind,
    pub onset: Frame,
    pub participants: [u32; 2],
    #[serde(default)]
    pub swap: bool,
    #[serde(default = "default_length")]
    pub length: u32,
    #[serde(default)]
    pub style: Option<EventStyle>,
    /// Meeting point on the court; defaults to the participants' midpoint.
    #[serde(default)]
    pub meet: Option<[f64; 2]>,
    /// Approach speed, cm/frame.
    #[serde(default)]
    pub approach_speed: Option<f64>,
    #[serde(default)]
    pub approach_frames: Option<u32>,
}

fn default_length() -> u32 {
    10
}

impl EventSpec {
    pub fn style(&self) -> EventStyle {
        self.style.unwrap_or(match (self.kind, self.swap) {
            _ if self.length > 30 => EventStyle::LongHide,
            (EventKind::Sto, false) => EventStyle::PassThrough,
            _ => EventStyle::Scramble,
        })
    }

    pub fn approach_frames(&self) -> u32 {
        self.approach_frames.unwrap_or(25)
    }

    /// First frame of the scripted window.
    pub fn window_start(&self) -> i64 {
        self.onset as i64 - (self.approach_frames() + TRANSITION_FRAMES) as i64
    }

    /// Last frame of the scripted window.
    pub fn window_end(&self) -> Frame {
        let exit = match self.style() {
            EventStyle::PassThrough => PASS_EXIT_FRAMES,
            _ => EXIT_FRAMES,
        };
        self.onset + self.length + exit - 1
    }
}

/// Scenario description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub name: String,
    pub seed: u64,
    pub frames: u32,
    pub num_players: usize,
    pub num_distractors: usize,
    /// Speed cap, cm/frame.
    pub vmax: f64,
    /// Court-plane jitter of detections, cm.
    pub position_sigma_cm: f64,
    /// Pixel noise on each box coordinate.
    pub box_sigma_px: f64,
    /// Pixel noise on the calibration correspondences.
    pub correspondence_sigma_px: f64,
    /// Per-frame miss probability outside occlusions.
    pub dropout: f64,
    /// Per-frame probability that the hidden participant is suppressed.
    pub occlusion_dropout: f64,
    pub embedding_dim: usize,
    /// Norm of each player's offset from the team prototype.
    pub player_offset: f64,
    /// Per-component embedding noise.
    pub embedding_sigma: f64,
    /// Draw a random event schedule in addition to `events`.
    pub auto_events: bool,
    pub events: Vec<EventSpec>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            seed: 0,
            frames: 1500,
            num_players: 10,
            num_distractors: 3,
            vmax: 30.0,
            position_sigma_cm: 2.0,
            box_sigma_px: 1.0,
            correspondence_sigma_px: 0.5,
            dropout: 0.0,
            occlusion_dropout: 1.0,
            embedding_dim: 128,
            player_offset: 0.35,
            embedding_sigma: 0.02,
            auto_events: false,
            events: Vec::new(),
        }
    }
}

impl ScenarioSpec {
    /// The benchmark configuration: 1500 frames, 10 players, 3 distractors
    /// and a random event schedule.
    pub fn benchmark(seed: u64) -> Self {
        Self {
            name: format!("sim{seed:03}"),
            seed,
            auto_events: true,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::InvalidSpec(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn team_of(&self, player: u32) -> u8 {
        if (player as usize) <= self.num_players / 2 {
            0
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidSpec(m));
        if self.num_players < 2 || !self.num_players.is_multiple_of(2) {
            return bad(format!("num_players must be even and at least 2, got {}", self.num_players));
        }
        if self.frames < 2 {
            return bad("frames must be at least 2".into());
        }
        if !(self.vmax > 0.0) {
            return bad("vmax must be positive".into());
        }
        for (name, v) in [
            ("position_sigma_cm", self.position_sigma_cm),
            ("box_sigma_px", self.box_sigma_px),
            ("correspondence_sigma_px", self.correspondence_sigma_px),
            ("embedding_sigma", self.embedding_sigma),
            ("player_offset", self.player_offset),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a non-negative number"));
            }
        }
        for (name, p) in [("dropout", self.dropout), ("occlusion_dropout", self.occlusion_dropout)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.embedding_dim < 4 {
            return bad("embedding_dim must be at least 4".into());
        }
        validate_events(self, &self.events)
    }
}

fn validate_events(spec: &ScenarioSpec, events: &[EventSpec]) -> Result<(), SimError> {
    let bad = |m: String| Err(SimError::InvalidSpec(m));
    let mut busy: BTreeMap<u32, Vec<(i64, Frame)>> = BTreeMap::new();
    for e in events {
        let [a, b] = e.participants;
        let n = spec.num_players as u32;
        if a == b || a == 0 || b == 0 || a > n || b > n {
            return bad(format!("event at {}: participants must be two distinct players in 1..={n}", e.onset));
        }
        let same = spec.team_of(a) == spec.team_of(b);
        match e.kind {
            EventKind::Sto if !same => return bad(format!("event at {}: STO participants must share a team", e.onset)),
            EventKind::Dto if same => return bad(format!("event at {}: DTO participants must be on different teams", e.onset)),
            _ => {}
        }
        if e.length == 0 {
            return bad(format!("event at {}: length must be positive", e.onset));
        }
        let style = e.style();
        if e.swap && style != EventStyle::Scramble {
            return bad(format!("event at {}: only scramble events can swap", e.onset));
        }
        if e.approach_frames() < 12 {
            return bad(format!("event at {}: approach_frames must be at least 12", e.onset));
        }
        if e.window_start() < 1 || e.window_end() >= spec.frames {
            return bad(format!(
                "event at {}: scripted window {}..={} does not fit inside 1..={}",
                e.onset,
                e.window_start(),
                e.window_end(),
                spec.frames
            ));
        }
        if let Some(v) = e.approach_speed {
            if !(v > 0.0 && v <= spec.vmax) {
                return bad(format!("event at {}: approach_speed must lie in (0, vmax]", e.onset));
            }
        }
        for p in e.participants {
            let w = (e.window_start(), e.window_end());
            let list = busy.entry(p).or_default();
            if list.iter().any(|&(s, t)| w.0 <= t as i64 && s <= w.1 as i64) {
                return bad(format!("event at {}: player {p} is already scripted in an overlapping event", e.onset));
            }
            list.push(w);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ObjectClass {
    Player { team: u8 },
    Distractor,
}

impl ObjectClass {
    /// MOTChallenge class column: 1 players, 2 distractors.
    pub fn mot_class(&self) -> i32 {
        match self {
            ObjectClass::Player { .. } => 1,
            ObjectClass::Distractor => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTrack {
    pub id: u32,
    pub class: ObjectClass,
    /// Indexed by `frame - 1`; `None` while absent.
    pub positions: Vec<Option<CourtPoint<f64>>>,
}

impl ObjectTrack {
    pub fn at(&self, frame: Frame) -> Option<CourtPoint<f64>> {
        self.positions.get(frame.checked_sub(1)? as usize).copied().flatten()
    }
}

/// An event as realised by the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedEvent {
    pub spec: EventSpec,
    pub style: EventStyle,
    pub meet: CourtPoint<f64>,
}

impl ResolvedEvent {
    /// Participant whose detection is missing at `frame`, if any.
    pub fn hidden_at(&self, frame: Frame) -> Option<u32> {
        let k = frame.checked_sub(self.spec.onset)?;
        if k >= self.spec.length {
            return None;
        }
        let [a, b] = self.spec.participants;
        Some(if self.spec.swap && k >= self.spec.length / 2 { a } else { b })
    }

    /// Whether `player` is partially occluded at `frame`.
    pub fn partial_at(&self, frame: Frame, player: u32) -> bool {
        if !self.spec.participants.contains(&player) {
            return false;
        }
        let (on, len) = (self.spec.onset as i64, self.spec.length as i64);
        let f = frame as i64;
        f >= on - PARTIAL_FRAMES as i64 && f < on + len + PARTIAL_FRAMES as i64
    }
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub frames: u32,
    pub objects: Vec<ObjectTrack>,
    pub events: Vec<ResolvedEvent>,
    /// Image-to-court map of the synthetic camera.
    pub camera: Homography<f64>,
}

impl GroundTruth {
    pub fn player(&self, id: u32) -> Option<&ObjectTrack> {
        self.objects.iter().find(|o| o.id == id)
    }
}

/// The fixed camera: a 1920x1080 view with mild perspective, far sideline
/// at the top.
pub fn synthetic_camera() -> Homography<f64> {
    let pairs = [
        ((260.0, 300.0), (0.0, 0.0)),
        ((1660.0, 300.0), (COURT_LENGTH_CM, 0.0)),
        ((1880.0, 980.0), (COURT_LENGTH_CM, COURT_WIDTH_CM)),
        ((40.0, 980.0), (0.0, COURT_WIDTH_CM)),
    ]
    .map(|((u, v), (x, y))| Correspondence::new(ImagePoint::new(u, v), CourtPoint::new(x, y)));
    crate::geometry::estimate_homography(&pairs)
        .expect("camera corners are in general position")
        .homography
}

/// Ground-truth box of a standing player whose feet are at `p`.
pub fn player_box(camera: &Homography<f64>, p: CourtPoint<f64>) -> Option<BBox<f64>> {
    let foot = camera.unproject(&p).ok()?;
    let side = camera.unproject(&CourtPoint::new(p.x + 10.0, p.y)).ok()?;
    let scale = ((side.x - foot.x).powi(2) + (side.y - foot.y).powi(2)).sqrt() / 10.0;
    let h = PLAYER_HEIGHT_CM * scale;
    let w = 0.4 * h;
    Some(BBox::new(foot.x - w / 2.0, foot.y - h, w, h))
}

fn unit(angle: f64) -> CourtPoint<f64> {
    CourtPoint::new(angle.cos(), angle.sin())
}

fn add(p: CourtPoint<f64>, d: CourtPoint<f64>, s: f64) -> CourtPoint<f64> {
    CourtPoint::new(p.x + d.x * s, p.y + d.y * s)
}

fn lerp(a: CourtPoint<f64>, b: CourtPoint<f64>, t: f64) -> CourtPoint<f64> {
    CourtPoint::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t)
}

fn clamp_meet(p: CourtPoint<f64>) -> CourtPoint<f64> {
    CourtPoint::new(p.x.clamp(500.0, 2300.0), p.y.clamp(450.0, 950.0))
}

fn random_court_point(rng: &mut ChaCha8Rng) -> CourtPoint<f64> {
    CourtPoint::new(rng.random_range(150.0..2650.0), rng.random_range(150.0..1250.0))
}

/// Random-waypoint state of one free player.
#[derive(Debug, Clone)]
struct Roamer {
    waypoint: CourtPoint<f64>,
    speed: f64,
    pause: u32,
}

impl Roamer {
    fn new(rng: &mut ChaCha8Rng, vmax: f64) -> Self {
        Self {
            waypoint: random_court_point(rng),
            speed: rng.random_range(2.0..12.0f64).min(vmax),
            pause: 0,
        }
    }

    fn step(&mut self, p: CourtPoint<f64>, rng: &mut ChaCha8Rng, vmax: f64) -> CourtPoint<f64> {
        if self.pause > 0 {
            self.pause -= 1;
            return p;
        }
        let d = p.distance(&self.waypoint);
        if d <= self.speed {
            let reached = self.waypoint;
            *self = Self::new(rng, vmax);
            if rng.random_bool(0.3) {
                self.pause = rng.random_range(5..30);
            }
            return reached;
        }
        lerp(p, self.waypoint, self.speed / d)
    }
}

/// Positions of both participants for every frame of a scripted window,
/// starting at `window_start`.
fn script_event(
    e: &EventSpec,
    style: EventStyle,
    pa: CourtPoint<f64>,
    pb: CourtPoint<f64>,
    rng: &mut ChaCha8Rng,
    vmax: f64,
) -> Result<(CourtPoint<f64>, Vec<CourtPoint<f64>>, Vec<CourtPoint<f64>>), SimError> {
    let t_app = e.approach_frames();
    let l = e.length;
    let meet = e
        .meet
        .map(|[x, y]| CourtPoint::new(x, y))
        .unwrap_or_else(|| clamp_meet(pa.midpoint(&pb)));
    let (mut a, mut b) = (Vec::new(), Vec::new());

    let (dir, side, speed) = match style {
        EventStyle::PassThrough => {
            let sign = if meet.x <= COURT_LENGTH_CM / 2.0 { 1.0 } else { -1.0 };
            let angle = rng.random_range(-0.35..0.35f64) + if sign > 0.0 { 0.0 } else { std::f64::consts::PI };
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (unit(angle), side, e.approach_speed.unwrap_or_else(|| rng.random_range(8.0..12.0)))
        }
        _ => {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (unit(angle), side, e.approach_speed.unwrap_or_else(|| rng.random_range(10.0..13.0)))
        }
    };
    let u = CourtPoint::new(-dir.y * side, dir.x * side);
    // Distance covered after each approach frame. Head-on runs brake over
    // the last few frames instead of stopping dead.
    let brake = if style == EventStyle::PassThrough { 0 } else { BRAKE_FRAMES.min(t_app) };
    let mut covered = vec![0.0];
    for k in 0..t_app {
        let left = t_app - k;
        let v = if left > brake { speed } else { speed * left as f64 / (brake + 1) as f64 };
        covered.push(covered[k as usize] + v);
    }
    let run = covered[t_app as usize];

    // Arrival points at the onset frame and approach starts.
    let (arrive_a, arrive_b, start_a, start_b) = match style {
        EventStyle::PassThrough => {
            let qb = add(meet, u, PASS_OFFSET_CM);
            (meet, qb, add(meet, dir, -run), add(qb, dir, -run))
        }
        _ => {
            // Head-on: a runs along `dir`, b against it.
            let qh = add(meet, u, MEET_OFFSET_CM);
            (meet, qh, add(meet, dir, -run), add(qh, dir, run))
        }
    };

    for (p0, s, out) in [(pa, start_a, &mut a), (pb, start_b, &mut b)] {
        let need = p0.distance(&s) / TRANSITION_FRAMES as f64;
        if need > vmax {
            return Err(SimError::Infeasible {
                onset: e.onset,
                speed: need,
                vmax,
            });
        }
        for k in 0..TRANSITION_FRAMES {
            out.push(lerp(p0, s, k as f64 / TRANSITION_FRAMES as f64));
        }
    }
    for k in 0..t_app {
        let t = covered[k as usize] / run;
        a.push(lerp(start_a, arrive_a, t));
        b.push(lerp(start_b, arrive_b, t));
    }

    match style {
        EventStyle::PassThrough => {
            for k in 0..(l + PASS_EXIT_FRAMES) {
                a.push(add(arrive_a, dir, speed * k as f64));
                b.push(add(arrive_b, dir, speed * k as f64));
            }
        }
        EventStyle::Scramble | EventStyle::LongHide => {
            let drift = if style == EventStyle::LongHide {
                let w = unit(rng.random_range(0.0..std::f64::consts::TAU));
                let c = rng.random_range(1.0..2.0);
                CourtPoint::new(w.x * c, w.y * c)
            } else {
                CourtPoint::new(0.0, 0.0)
            };
            let mut front = arrive_a;
            let mut back = arrive_b;
            for k in 0..l {
                front = add(arrive_a, drift, k as f64);
                back = add(arrive_b, drift, k as f64);
                if e.swap && k >= l / 2 {
                    a.push(back);
                    b.push(front);
                } else {
                    a.push(front);
                    b.push(back);
                }
            }
            let (front_player, back_player) = if e.swap { (&mut b, &mut a) } else { (&mut a, &mut b) };
            for k in 1..=EXIT_FRAMES {
                front_player.push(add(front, u, -EXIT_SPEED * k as f64));
                back_player.push(add(back, u, EXIT_SPEED * k as f64));
            }
        }
    }
    Ok((meet, a, b))
}

/// Draws a random event schedule that keeps each player in at most one
/// scripted window at a time.
fn auto_schedule(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Vec<EventSpec> {
    let mut events: Vec<EventSpec> = spec.events.clone();
    let players: Vec<u32> = (1..=spec.num_players as u32).collect();
    let mut onset = FIRST_EVENT_FRAME + TRANSITION_FRAMES + 30;
    loop {
        let (kind, swap, style, length) = match rng.random_range(0..100) {
            0..25 => (EventKind::Dto, true, EventStyle::Scramble, rng.random_range(8..=12)),
            25..40 => (EventKind::Dto, false, EventStyle::Scramble, rng.random_range(8..=12)),
            40..60 => (EventKind::Sto, true, EventStyle::Scramble, rng.random_range(8..=12)),
            60..80 => (EventKind::Sto, false, EventStyle::PassThrough, rng.random_range(8..=14)),
            _ => (EventKind::Dto, false, EventStyle::LongHide, rng.random_range(40..=60)),
        };
        let approach = rng.random_range(20..=30);
        let mut e = EventSpec {
            kind,
            onset,
            participants: [0, 0],
            swap,
            length,
            style: Some(style),
            meet: None,
            approach_speed: None,
            approach_frames: Some(approach),
        };
        if e.window_end() + 5 >= spec.frames {
            break;
        }
        let free: Vec<u32> = players
            .iter()
            .copied()
            .filter(|&p| {
                events.iter().all(|o| {
                    !o.participants.contains(&p) || e.window_start() > o.window_end() as i64 || o.window_start() > e.window_end() as i64
                })
            })
            .collect();
        let mut pairs: Vec<[u32; 2]> = Vec::new();
        for &a in &free {
            for &b in &free {
                let same = spec.team_of(a) == spec.team_of(b);
                if a != b && same == (kind == EventKind::Sto) {
                    pairs.push([a, b]);
                }
            }
        }
        if let Some(&pair) = pairs.choose(rng) {
            e.participants = pair;
            events.push(e);
        }
        onset += rng.random_range(60..110);
    }
    events.sort_by_key(|e| e.onset);
    events
}

/// Simulates ground truth for `spec`.
pub fn generate(spec: &ScenarioSpec) -> Result<GroundTruth, SimError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let events = if spec.auto_events {
        let e = auto_schedule(spec, &mut rng);
        validate_events(spec, &e)?;
        e
    } else {
        spec.events.clone()
    };
    let n = spec.num_players;
    let frames = spec.frames as usize;

    // Start positions at least 150 cm apart.
    let mut pos: Vec<CourtPoint<f64>> = Vec::with_capacity(n);
    while pos.len() < n {
        let p = random_court_point(&mut rng);
        if pos.iter().all(|q| q.distance(&p) >= 150.0) {
            pos.push(p);
        }
    }
    let mut roamers: Vec<Roamer> = (0..n).map(|_| Roamer::new(&mut rng, spec.vmax)).collect();
    let mut tracks: Vec<Vec<Option<CourtPoint<f64>>>> = vec![Vec::with_capacity(frames); n];
    // Scripted positions keyed by (player index, frame).
    let mut scripted: BTreeMap<(usize, Frame), CourtPoint<f64>> = BTreeMap::new();
    let mut resolved = Vec::new();

    for f in 1..=spec.frames {
        for e in events.iter().filter(|e| e.window_start() == f as i64) {
            let [a, b] = e.participants.map(|p| p as usize - 1);
            let style = e.style();
            let (meet, pa, pb) = script_event(e, style, pos[a], pos[b], &mut rng, spec.vmax)?;
            for (k, (qa, qb)) in pa.into_iter().zip(pb).enumerate() {
                scripted.insert((a, f + k as Frame), qa);
                scripted.insert((b, f + k as Frame), qb);
            }
            resolved.push(ResolvedEvent {
                spec: e.clone(),
                style,
                meet,
            });
        }
        for i in 0..n {
            let next = match scripted.remove(&(i, f)) {
                Some(p) => {
                    roamers[i] = Roamer::new(&mut rng, spec.vmax);
                    p
                }
                None if f == 1 => pos[i],
                None => roamers[i].step(pos[i], &mut rng, spec.vmax),
            };
            pos[i] = next;
            tracks[i].push(Some(next));
        }
    }

    let mut objects: Vec<ObjectTrack> = tracks
        .into_iter()
        .enumerate()
        .map(|(i, positions)| ObjectTrack {
            id: i as u32 + 1,
            class: ObjectClass::Player {
                team: spec.team_of(i as u32 + 1),
            },
            positions,
        })
        .collect();

    for k in 0..spec.num_distractors {
        let life = rng.random_range(40..=80u32).min(spec.frames);
        // The first distractor is present from the start so the player
        // restriction has something to prune; the rest appear later.
        let latest = spec.frames - life + 1;
        let start = if k == 0 {
            rng.random_range(1..=latest.min(20))
        } else {
            rng.random_range(latest.min(FIRST_EVENT_FRAME + 20)..=latest)
        };
        let y = if rng.random_bool(0.5) {
            rng.random_range(-120.0..-60.0)
        } else {
            rng.random_range(COURT_WIDTH_CM + 60.0..COURT_WIDTH_CM + 120.0)
        };
        let mut x = rng.random_range(200.0..COURT_LENGTH_CM - 200.0);
        let vx = rng.random_range(1.0..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let mut positions = vec![None; frames];
        for f in start..start + life {
            positions[f as usize - 1] = Some(CourtPoint::new(x, y));
            x = (x + vx).clamp(0.0, COURT_LENGTH_CM);
        }
        objects.push(ObjectTrack {
            id: (n + 1 + k) as u32,
            class: ObjectClass::Distractor,
            positions,
        });
    }

    Ok(GroundTruth {
        frames: spec.frames,
        objects,
        events: resolved,
        camera: synthetic_camera(),
    })
}

/// Detector-side view of a scenario, ready to be written to disk.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub detections: Vec<MotRow>,
    /// `(frame, index within frame, embedding)` aligned with `detections`.
    pub embeddings: Vec<(Frame, usize, Embedding<f64>)>,
    pub gt: Vec<MotRow>,
    pub correspondences: Vec<Correspondence<f64>>,
    pub events: Vec<ResolvedEvent>,
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("validated sigma")
}

/// Identity prototypes: orthogonal team directions plus a small per-player
/// offset in the remaining dimensions.
fn prototypes(spec: &ScenarioSpec, gt: &GroundTruth, rng: &mut ChaCha8Rng) -> BTreeMap<u32, Vec<f64>> {
    let d = spec.embedding_dim;
    let unit_normal = normal(1.0);
    let mut out = BTreeMap::new();
    for o in &gt.objects {
        let axis = match o.class {
            ObjectClass::Player { team } => team as usize,
            ObjectClass::Distractor => 2,
        };
        let mut offset: Vec<f64> = (0..d).map(|k| if k < 3 { 0.0 } else { unit_normal.sample(rng) }).collect();
        let norm = offset.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        for v in &mut offset {
            *v *= spec.player_offset / norm;
        }
        offset[axis] = 1.0;
        out.insert(o.id, offset);
    }
    out
}

/// Turns ground truth into noisy detections, embeddings, ground-truth rows
/// and calibration correspondences.
pub fn degrade(gt: &GroundTruth, spec: &ScenarioSpec) -> SimOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_0fde_7ec7);
    let protos = prototypes(spec, gt, &mut rng);
    let pos_noise = normal(spec.position_sigma_cm);
    let px_noise = normal(spec.box_sigma_px);
    let emb_noise = normal(spec.embedding_sigma);

    let mut correspondences = Vec::new();
    for c in court_template::<f64>() {
        let img = gt.camera.unproject(&c).expect("template visible");
        let noisy = ImagePoint::new(
            img.x + normal(spec.correspondence_sigma_px).sample(&mut rng),
            img.y + normal(spec.correspondence_sigma_px).sample(&mut rng),
        );
        correspondences.push(Correspondence::new(noisy, c));
    }

    let mut detections = Vec::new();
    let mut embeddings = Vec::new();
    let mut gt_rows = Vec::new();
    for f in 1..=gt.frames {
        let mut frame_dets: Vec<(MotRow, Embedding<f64>)> = Vec::new();
        for o in &gt.objects {
            let Some(p) = o.at(f) else { continue };
            let Some(truth) = player_box(&gt.camera, p) else { continue };
            let hidden = gt.events.iter().any(|e| e.hidden_at(f) == Some(o.id));
            let partial = gt.events.iter().any(|e| e.partial_at(f, o.id));
            gt_rows.push(MotRow {
                frame: f,
                id: o.id as i64,
                bbox: truth,
                confidence: 1.0,
                class: o.class.mot_class(),
                visibility: if hidden { 0.2 } else if partial { 0.6 } else { 1.0 },
            });

            let missed = if hidden {
                rng.random_bool(spec.occlusion_dropout)
            } else {
                spec.dropout > 0.0 && rng.random_bool(spec.dropout)
            };
            if missed {
                continue;
            }
            let jitter = CourtPoint::new(p.x + pos_noise.sample(&mut rng), p.y + pos_noise.sample(&mut rng));
            let Some(b) = player_box(&gt.camera, jitter) else { continue };
            let bbox = BBox::new(
                b.x + px_noise.sample(&mut rng),
                b.y + px_noise.sample(&mut rng),
                (b.w + px_noise.sample(&mut rng)).max(1.0),
                (b.h + px_noise.sample(&mut rng)).max(1.0),
            );
            let confidence = if partial {
                rng.random_range(0.15..0.55)
            } else {
                rng.random_range(0.7..0.95)
            };
            let emb: Vec<f64> = protos[&o.id].iter().map(|v| v + emb_noise.sample(&mut rng)).collect();
            frame_dets.push((
                MotRow {
                    frame: f,
                    id: -1,
                    bbox,
                    confidence,
                    class: -1,
                    visibility: -1.0,
                },
                Embedding::new(emb),
            ));
        }
        frame_dets.shuffle(&mut rng);
        for (k, (row, emb)) in frame_dets.into_iter().enumerate() {
            detections.push(row);
            embeddings.push((f, k, emb));
        }
    }

    SimOutput {
        detections,
        embeddings,
        gt: gt_rows,
        correspondences,
        events: gt.events.clone(),
    }
}

pub fn simulate(spec: &ScenarioSpec) -> Result<(GroundTruth, SimOutput), SimError> {
    let gt = generate(spec)?;
    let out = degrade(&gt, spec);
    Ok((gt, out))
}

/// Ground-truth event table: `onset length kind p_visible p_hidden swap style meet_x meet_y`.
pub fn format_event_annotations(events: &[ResolvedEvent]) -> String {
    let mut s = String::from("# onset length kind p_visible p_hidden swap style meet_x meet_y\n");
    for e in events {
        let kind = match e.spec.kind {
            EventKind::Sto => "STO",
            EventKind::Dto => "DTO",
        };
        let style = match e.style {
            EventStyle::Scramble => "scramble",
            EventStyle::PassThrough => "pass_through",
            EventStyle::LongHide => "long_hide",
        };
        s += &format!(
            "{} {} {} {} {} {} {} {} {}\n",
            e.spec.onset,
            e.spec.length,
            kind,
            e.spec.participants[0],
            e.spec.participants[1],
            e.spec.swap as u8,
            style,
            e.meet.x,
            e.meet.y
        );
    }
    s
}
