//! HOTA and CLEAR-MOT evaluation in image space.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::assignment::{solve_assignment, CostMatrix};
use crate::geometry::BBox;
use crate::{Frame, TrackId};

/// IoU threshold of the CLEAR protocol.
pub const CLEAR_IOU: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("ground truth is empty, MOTA is undefined")]
    EmptyGroundTruth,
}

/// One box of a ground-truth or predicted sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRow {
    pub frame: Frame,
    pub id: TrackId,
    pub bbox: BBox<f64>,
}

impl BoxRow {
    pub fn new(frame: Frame, id: TrackId, bbox: BBox<f64>) -> Self {
        Self { frame, id, bbox }
    }
}

/// The 19 localisation thresholds 0.05, 0.10, ..., 0.95.
pub fn alpha_grid() -> impl Iterator<Item = f64> {
    (1..=19).map(|k| k as f64 * 0.05)
}

/// Maximum-cardinality, then maximum-IoU one-to-one matching among pairs
/// with IoU at least `alpha`. Returns `(gt index, pred index, iou)`.
pub fn match_frame(gt: &[BBox<f64>], pred: &[BBox<f64>], alpha: f64) -> Vec<(usize, usize, f64)> {
    let ious: Vec<Vec<f64>> = gt.iter().map(|g| pred.iter().map(|p| g.iou(p)).collect()).collect();
    match_ious(&ious, pred.len(), alpha)
}

fn match_ious(ious: &[Vec<f64>], cols: usize, alpha: f64) -> Vec<(usize, usize, f64)> {
    let mut c = CostMatrix::new(ious.len(), cols);
    for (i, row) in ious.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v >= alpha && v > 0.0 {
                c.set(i, j, Some(1.0 - v));
            }
        }
    }
    solve_assignment(&c)
        .pairs
        .into_iter()
        .map(|(i, j)| (i, j, ious[i][j]))
        .collect()
}

/// Boxes grouped per frame with dense id indices.
struct Grouped {
    frames: BTreeMap<Frame, (Vec<usize>, Vec<usize>)>,
    gt_ids: Vec<usize>,
    pred_ids: Vec<usize>,
    n_gt_ids: usize,
    n_pred_ids: usize,
}

fn dense_ids(rows: &[BoxRow]) -> (Vec<usize>, usize) {
    let mut map: BTreeMap<TrackId, usize> = BTreeMap::new();
    for r in rows {
        let next = map.len();
        map.entry(r.id).or_insert(next);
    }
    (rows.iter().map(|r| map[&r.id]).collect(), map.len())
}

fn group(gt: &[BoxRow], pred: &[BoxRow]) -> Grouped {
    let mut frames: BTreeMap<Frame, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, r) in gt.iter().enumerate() {
        frames.entry(r.frame).or_default().0.push(i);
    }
    for (j, r) in pred.iter().enumerate() {
        frames.entry(r.frame).or_default().1.push(j);
    }
    let (gt_ids, n_gt_ids) = dense_ids(gt);
    let (pred_ids, n_pred_ids) = dense_ids(pred);
    Grouped {
        frames,
        gt_ids,
        pred_ids,
        n_gt_ids,
        n_pred_ids,
    }
}

/// HOTA family, in percent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct HotaScores {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub loca: f64,
}

/// Averages over the threshold grid. Empty inputs score 0.
pub fn compute_hota(gt: &[BoxRow], pred: &[BoxRow]) -> HotaScores {
    if gt.is_empty() && pred.is_empty() {
        return HotaScores::default();
    }
    let g = group(gt, pred);
    let alphas: Vec<f64> = alpha_grid().collect();
    let (n_gt, n_pred) = (gt.len() as f64, pred.len() as f64);

    // Per-threshold accumulators.
    let mut tp = vec![0usize; alphas.len()];
    let mut iou_sum = vec![0.0f64; alphas.len()];
    let mut pair_counts: Vec<HashMap<(usize, usize), usize>> = vec![HashMap::new(); alphas.len()];
    let mut gt_counts = vec![0usize; g.n_gt_ids];
    let mut pred_counts = vec![0usize; g.n_pred_ids];
    for &i in &g.gt_ids {
        gt_counts[i] += 1;
    }
    for &j in &g.pred_ids {
        pred_counts[j] += 1;
    }

    for (gi, pi) in g.frames.values() {
        if gi.is_empty() || pi.is_empty() {
            continue;
        }
        let ious: Vec<Vec<f64>> = gi
            .iter()
            .map(|&a| pi.iter().map(|&b| gt[a].bbox.iou(&pred[b].bbox)).collect())
            .collect();
        for (k, &alpha) in alphas.iter().enumerate() {
            for (a, b, iou) in match_ious(&ious, pi.len(), alpha) {
                tp[k] += 1;
                iou_sum[k] += iou;
                *pair_counts[k]
                    .entry((g.gt_ids[gi[a]], g.pred_ids[pi[b]]))
                    .or_default() += 1;
            }
        }
    }

    let mut out = HotaScores::default();
    for k in 0..alphas.len() {
        let tpk = tp[k] as f64;
        let deta = if n_gt + n_pred - tpk > 0.0 {
            tpk / (n_gt + n_pred - tpk)
        } else {
            0.0
        };
        let assa = if tp[k] == 0 {
            0.0
        } else {
            pair_counts[k]
                .iter()
                .map(|(&(i, j), &c)| {
                    let c = c as f64;
                    c * c / (gt_counts[i] as f64 + pred_counts[j] as f64 - c)
                })
                .sum::<f64>()
                / tpk
        };
        let loca = if tp[k] == 0 { 0.0 } else { iou_sum[k] / tpk };
        out.hota += (deta * assa).sqrt();
        out.deta += deta;
        out.assa += assa;
        out.loca += loca;
    }
    let scale = 100.0 / alphas.len() as f64;
    out.hota *= scale;
    out.deta *= scale;
    out.assa *= scale;
    out.loca *= scale;
    out
}

/// CLEAR-MOT counts at IoU 0.5.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ClearScores {
    /// Percent; may be negative.
    pub mota: f64,
    /// Mean IoU of matches, percent.
    pub motp: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub ids: usize,
    pub num_gt: usize,
}

/// Matches persist across frames while their IoU stays at or above 0.5;
/// remaining boxes are matched by maximum IoU. An identity switch is
/// counted when a ground-truth id is matched to a different predicted id
/// than at its previous match.
pub fn compute_clear(gt: &[BoxRow], pred: &[BoxRow]) -> Result<ClearScores, MetricsError> {
    if gt.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let g = group(gt, pred);
    let mut previous: HashMap<usize, usize> = HashMap::new();
    let mut last_match: HashMap<usize, usize> = HashMap::new();
    let mut s = ClearScores {
        num_gt: gt.len(),
        ..Default::default()
    };
    let mut iou_total = 0.0;

    for (gi, pi) in g.frames.values() {
        let ious: Vec<Vec<f64>> = gi
            .iter()
            .map(|&a| pi.iter().map(|&b| gt[a].bbox.iou(&pred[b].bbox)).collect())
            .collect();
        let mut c = CostMatrix::new(gi.len(), pi.len());
        for (a, row) in ious.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                if v >= CLEAR_IOU {
                    // Carried-over pairs are free, so they are always kept.
                    let carried = previous.get(&g.gt_ids[gi[a]]) == Some(&g.pred_ids[pi[b]]);
                    c.set(a, b, Some(if carried { 0.0 } else { 1.0 - v + 1e-9 }));
                }
            }
        }
        let matches = solve_assignment(&c).pairs;
        let mut current = HashMap::new();
        for &(a, b) in &matches {
            let (gid, pid) = (g.gt_ids[gi[a]], g.pred_ids[pi[b]]);
            if let Some(&prev) = last_match.get(&gid) {
                if prev != pid {
                    s.ids += 1;
                }
            }
            last_match.insert(gid, pid);
            current.insert(gid, pid);
            iou_total += ious[a][b];
        }
        previous = current;
        s.tp += matches.len();
        s.fn_ += gi.len() - matches.len();
        s.fp += pi.len() - matches.len();
    }
    s.mota = 100.0 * (1.0 - (s.fn_ + s.fp + s.ids) as f64 / s.num_gt as f64);
    s.motp = if s.tp == 0 { 0.0 } else { 100.0 * iou_total / s.tp as f64 };
    Ok(s)
}

/// Per-sequence evaluation record.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvalResult {
    pub sequence: String,
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub loca: f64,
    pub mota: f64,
    pub fp: usize,
    pub fn_: usize,
    pub ids: usize,
    pub num_gt: usize,
    pub num_pred: usize,
}

/// Drops predictions that overlap a ground-truth box of an ignored class
/// (referees, spectators) at IoU 0.5, then keeps only the kept-class
/// ground truth.
pub fn filter_distractors(gt: &[(BoxRow, u32)], pred: &[BoxRow], keep_class: u32) -> (Vec<BoxRow>, Vec<BoxRow>) {
    let mut ignored: HashMap<Frame, Vec<BBox<f64>>> = HashMap::new();
    for (r, class) in gt {
        if *class != keep_class {
            ignored.entry(r.frame).or_default().push(r.bbox);
        }
    }
    let kept_gt: Vec<BoxRow> = gt.iter().filter(|(_, c)| *c == keep_class).map(|(r, _)| *r).collect();
    let mut kept_gt_by_frame: HashMap<Frame, Vec<BBox<f64>>> = HashMap::new();
    for r in &kept_gt {
        kept_gt_by_frame.entry(r.frame).or_default().push(r.bbox);
    }
    let kept_pred = pred
        .iter()
        .filter(|p| {
            let Some(boxes) = ignored.get(&p.frame) else { return true };
            let best_ignored = boxes.iter().map(|b| b.iou(&p.bbox)).fold(0.0, f64::max);
            let best_player = kept_gt_by_frame
                .get(&p.frame)
                .map_or(0.0, |v| v.iter().map(|b| b.iou(&p.bbox)).fold(0.0, f64::max));
            best_ignored < CLEAR_IOU || best_player > best_ignored
        })
        .copied()
        .collect();
    (kept_gt, kept_pred)
}

pub fn evaluate_sequence(name: &str, gt: &[BoxRow], pred: &[BoxRow]) -> Result<EvalResult, MetricsError> {
    let clear = compute_clear(gt, pred)?;
    let hota = compute_hota(gt, pred);
    Ok(EvalResult {
        sequence: name.to_string(),
        hota: hota.hota,
        deta: hota.deta,
        assa: hota.assa,
        loca: hota.loca,
        mota: clear.mota,
        fp: clear.fp,
        fn_: clear.fn_,
        ids: clear.ids,
        num_gt: gt.len(),
        num_pred: pred.len(),
    })
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self::default();
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}±{:.2}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Aggregate {
    pub sequences: usize,
    pub hota: MeanStd,
    pub deta: MeanStd,
    pub assa: MeanStd,
    pub loca: MeanStd,
    pub mota: MeanStd,
    pub fp: MeanStd,
    pub fn_: MeanStd,
    pub ids: MeanStd,
}

pub fn aggregate(results: &[EvalResult]) -> Aggregate {
    Aggregate {
        sequences: results.len(),
        hota: MeanStd::of(results.iter().map(|r| r.hota)),
        deta: MeanStd::of(results.iter().map(|r| r.deta)),
        assa: MeanStd::of(results.iter().map(|r| r.assa)),
        loca: MeanStd::of(results.iter().map(|r| r.loca)),
        mota: MeanStd::of(results.iter().map(|r| r.mota)),
        fp: MeanStd::of(results.iter().map(|r| r.fp as f64)),
        fn_: MeanStd::of(results.iter().map(|r| r.fn_ as f64)),
        ids: MeanStd::of(results.iter().map(|r| r.ids as f64)),
    }
}

/// Plain-text report: one line per sequence and a mean ± std footer.
pub fn format_report(results: &[EvalResult]) -> String {
    let mut s = format!(
        "{:<16} {:>7} {:>7} {:>7} {:>7} {:>8} {:>6} {:>6} {:>5}\n",
        "sequence", "HOTA", "DetA", "AssA", "LocA", "MOTA", "FP", "FN", "IDS"
    );
    for r in results {
        s += &format!(
            "{:<16} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>8.2} {:>6} {:>6} {:>5}\n",
            r.sequence, r.hota, r.deta, r.assa, r.loca, r.mota, r.fp, r.fn_, r.ids
        );
    }
    if results.len() > 1 {
        let a = aggregate(results);
        s += &format!(
            "mean±std         HOTA {}  DetA {}  AssA {}  LocA {}  MOTA {}  FP {}  FN {}  IDS {}\n",
            a.hota, a.deta, a.assa, a.loca, a.mota, a.fp, a.fn_, a.ids
        );
    }
    s
}

/// Tab-separated table with a header row.
pub fn format_tsv(results: &[EvalResult]) -> String {
    let mut s = String::from("sequence\thota\tdeta\tassa\tloca\tmota\tfp\tfn\tids\tnum_gt\tnum_pred\n");
    for r in results {
        s += &format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.sequence, r.hota, r.deta, r.assa, r.loca, r.mota, r.fp, r.fn_, r.ids, r.num_gt, r.num_pred
        );
    }
    s
}
