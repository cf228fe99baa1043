//! End-to-end glue: detections to court, tracking, evaluation and sweeps.

use std::time::{Duration, Instant};

use log::warn;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::association::Detection;
use crate::geometry::{estimate_homography, foot_point, Correspondence, GeometryError, Homography};
use crate::io::{EmbeddingTable, IoError, MotRow};
use crate::metrics::{evaluate_sequence, filter_distractors, BoxRow, EvalResult, MetricsError};
use crate::occlusion::OcclusionEvent;
use crate::simgen::{SimError, SimOutput};
use crate::tracker::{Features, SwapRecord, TrackRow, Tracker, TrackerConfig, TrackerError, TrackerStats};
use crate::{Frame, TrackId};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("calibration: {0}")]
    Geometry(#[from] GeometryError),
    #[error("tracking: {0}")]
    Tracker(#[from] TrackerError),
    #[error("evaluation: {0}")]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("config: {0}")]
    Config(String),
}

/// Detections of one sequence, projected onto the court and grouped by
/// frame. Every frame between the first and last is present.
#[derive(Debug, Clone, Default)]
pub struct PreparedSequence {
    pub name: String,
    pub frames: Vec<(Frame, Vec<Detection<f64>>)>,
    /// Ground-truth rows with their class column.
    pub gt: Option<Vec<MotRow>>,
}

/// Projects detection rows through `homography` and attaches embeddings.
/// Rows whose foot point cannot be projected are skipped with a warning.
pub fn build_frames(
    rows: &[MotRow],
    embeddings: Option<&EmbeddingTable>,
    homography: &Homography<f64>,
    last_frame: Option<Frame>,
) -> Vec<(Frame, Vec<Detection<f64>>)> {
    let Some(first) = rows.first().map(|r| r.frame) else {
        return Vec::new();
    };
    let last = rows.iter().map(|r| r.frame).max().unwrap_or(first).max(last_frame.unwrap_or(0));
    let mut frames: Vec<(Frame, Vec<Detection<f64>>)> = (first..=last).map(|f| (f, Vec::new())).collect();
    let mut index_in_frame = 0usize;
    let mut current = None;
    for r in rows {
        if current != Some(r.frame) {
            current = Some(r.frame);
            index_in_frame = 0;
        }
        let k = index_in_frame;
        index_in_frame += 1;
        let court = match foot_point(&r.bbox).and_then(|p| homography.project(&p)) {
            Ok(c) => c,
            Err(e) => {
                warn!("frame {}: detection {k} skipped: {e}", r.frame);
                continue;
            }
        };
        let embedding = embeddings.and_then(|t| t.get(&(r.frame, k)).cloned());
        frames[(r.frame - first) as usize].1.push(Detection {
            frame: r.frame,
            bbox: r.bbox,
            confidence: r.confidence,
            court,
            embedding,
        });
    }
    frames
}

/// Builds a sequence from simulator output, calibrating from its
/// correspondences like a real input would be.
pub fn prepare_simulated(name: &str, out: &SimOutput) -> Result<PreparedSequence, PipelineError> {
    let h = calibrate(&out.correspondences)?;
    let table: EmbeddingTable = out.embeddings.iter().map(|(f, k, e)| ((*f, *k), e.clone())).collect();
    let last = out.gt.iter().map(|r| r.frame).max();
    Ok(PreparedSequence {
        name: name.to_string(),
        frames: build_frames(&out.detections, Some(&table), &h, last),
        gt: Some(out.gt.clone()),
    })
}

pub fn calibrate(pairs: &[Correspondence<f64>]) -> Result<Homography<f64>, PipelineError> {
    let est = estimate_homography(pairs)?;
    log::info!("homography estimated from {} points, rms residual {:.3} cm", pairs.len(), est.rms_residual);
    Ok(est.homography)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub tracking: Duration,
    pub evaluation: Duration,
}

#[derive(Debug, Clone)]
pub struct TrackOutput {
    pub rows: Vec<TrackRow<f64>>,
    pub events: Vec<OcclusionEvent<f64>>,
    pub swaps: Vec<SwapRecord>,
    pub stats: TrackerStats,
    pub elapsed: Duration,
}

impl TrackOutput {
    pub fn distinct_ids_after(&self, frame: Frame) -> Vec<TrackId> {
        let mut ids: Vec<TrackId> = self.rows.iter().filter(|r| r.frame > frame).map(|r| r.id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

pub fn run_track(seq: &PreparedSequence, config: &TrackerConfig<f64>) -> Result<TrackOutput, PipelineError> {
    config.validate().map_err(PipelineError::Config)?;
    let uses_appearance = config.features.rlli || config.features.sto || config.features.dto;
    if uses_appearance && seq.frames.iter().flat_map(|(_, d)| d).any(|d| d.embedding.is_none()) {
        warn!(
            "{}: some detections have no embedding; appearance-based stages fall back to unclassified",
            seq.name
        );
    }
    let start = Instant::now();
    let mut tracker = Tracker::new(*config);
    for (frame, dets) in &seq.frames {
        tracker.step_frame(*frame, dets)?;
    }
    let events = tracker.events().to_vec();
    let swaps = tracker.swaps().to_vec();
    let stats = tracker.stats().clone();
    Ok(TrackOutput {
        rows: tracker.into_rows(),
        events,
        swaps,
        stats,
        elapsed: start.elapsed(),
    })
}

/// Which ground-truth rows count and what happens to predictions on the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Keep only ground truth of this class; `None` keeps everything.
    pub player_class: Option<i32>,
    /// Drop predictions that sit on ignored ground truth instead of
    /// counting them as false positives.
    pub ignore_distractors: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            player_class: Some(1),
            ignore_distractors: false,
        }
    }
}

pub fn evaluate_rows(
    name: &str,
    gt: &[MotRow],
    pred: &[TrackRow<f64>],
    opts: &EvalOptions,
) -> Result<EvalResult, PipelineError> {
    let pred: Vec<BoxRow> = pred.iter().map(|r| BoxRow::new(r.frame, r.id, r.bbox)).collect();
    let (gt, pred) = match opts.player_class {
        None => (gt.iter().map(|r| BoxRow::new(r.frame, r.id as TrackId, r.bbox)).collect(), pred),
        Some(class) => {
            let tagged: Vec<(BoxRow, u32)> = gt
                .iter()
                .map(|r| (BoxRow::new(r.frame, r.id as TrackId, r.bbox), r.class.max(0) as u32))
                .collect();
            let (g, p) = filter_distractors(&tagged, &pred, class.max(0) as u32);
            (g, if opts.ignore_distractors { p } else { pred })
        }
    };
    Ok(evaluate_sequence(name, &gt, &pred)?)
}

/// Named stage combinations.
pub fn preset(name: &str) -> Option<Features> {
    let f = |bgr, rlli, sto, dto| Features { bgr, rlli, sto, dto };
    Some(match name {
        "full" | "mix" => Features::full(),
        "projected" | "projected-only" => Features::projected_only(),
        "bgr" => f(true, false, false, false),
        "bgr+rlli" | "rlli" => f(true, true, false, false),
        "sto" => f(true, false, true, false),
        "sto+rlli" => f(true, true, true, false),
        "dto" => f(true, false, false, true),
        "dto+rlli" => f(true, true, false, true),
        _ => return None,
    })
}

pub const PRESETS: &[&str] = &[
    "projected", "bgr", "bgr+rlli", "sto", "sto+rlli", "dto", "dto+rlli", "full",
];

/// Tracks and evaluates every sequence in parallel.
pub fn run_suite(
    seqs: &[PreparedSequence],
    config: &TrackerConfig<f64>,
    opts: &EvalOptions,
) -> Result<Vec<(TrackOutput, EvalResult)>, PipelineError> {
    seqs.par_iter()
        .map(|s| {
            let out = run_track(s, config)?;
            let gt = s
                .gt
                .as_ref()
                .ok_or_else(|| PipelineError::Config(format!("{}: no ground truth", s.name)))?;
            let eval = evaluate_rows(&s.name, gt, &out.rows, opts)?;
            Ok((out, eval))
        })
        .collect()
}

/// Mean HOTA over the suite for every (rlli_dist, gate) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rlli_dists: Vec<f64>,
    pub gates: Vec<f64>,
    /// `hota[row][col]` with rows over `rlli_dists`, columns over `gates`.
    pub hota: Vec<Vec<f64>>,
}

impl SweepTable {
    pub fn spread(&self) -> f64 {
        let all = self.hota.iter().flatten().copied();
        let max = all.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = all.fold(f64::INFINITY, f64::min);
        max - min
    }

    pub fn format(&self) -> String {
        let mut s = format!("{:>10}", "dist\\gate");
        for g in &self.gates {
            s += &format!(" {g:>7}");
        }
        s.push('\n');
        for (r, d) in self.rlli_dists.iter().enumerate() {
            s += &format!("{d:>10}");
            for v in &self.hota[r] {
                s += &format!(" {v:>7.2}");
            }
            s.push('\n');
        }
        s
    }
}

pub fn run_sweep(
    seqs: &[PreparedSequence],
    base: &TrackerConfig<f64>,
    gates: &[f64],
    rlli_dists: &[f64],
    opts: &EvalOptions,
) -> Result<SweepTable, PipelineError> {
    let cells: Vec<(usize, usize)> = (0..rlli_dists.len())
        .flat_map(|r| (0..gates.len()).map(move |c| (r, c)))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(r, c)| {
            let cfg = TrackerConfig {
                gate: gates[c],
                rlli_dist: rlli_dists[r],
                ..*base
            };
            let results = run_suite(seqs, &cfg, opts)?;
            Ok(results.iter().map(|(_, e)| e.hota).sum::<f64>() / results.len().max(1) as f64)
        })
        .collect::<Result<_, PipelineError>>()?;
    let mut hota = vec![vec![0.0; gates.len()]; rlli_dists.len()];
    for (&(r, c), v) in cells.iter().zip(values) {
        hota[r][c] = v;
    }
    Ok(SweepTable {
        rlli_dists: rlli_dists.to_vec(),
        gates: gates.to_vec(),
        hota,
    })
}

/// Human-readable run summary.
pub fn format_summary(name: &str, out: &TrackOutput) -> String {
    let s = &out.stats;
    let ids = out.distinct_ids_after(0).len();
    format!(
        "sequence {name}\nframes {}\nrows {}\ndistinct_ids {ids}\ntracks_created {}\nbgr_pruned {}\nrlli_rematches {}\nocclusion_events {}\nsto_swaps {}\ndto_swaps {}\ntracking_ms {:.3}\n",
        s.frames,
        out.rows.len(),
        s.tracks_created,
        s.bgr_pruned,
        s.rlli_rematches,
        s.events_opened,
        s.sto_swaps,
        s.dto_swaps,
        out.elapsed.as_secs_f64() * 1e3,
    )
}
