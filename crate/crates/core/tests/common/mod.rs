//! Brute-force oracles and random instance builders shared by the
//! integration targets.
#![allow(dead_code)]

use std::collections::BTreeMap;

use courtsort::assignment::CostMatrix;
use courtsort::geometry::BBox;
use courtsort::metrics::{alpha_grid, BoxRow, HotaScores};
use courtsort::Frame;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every partial matching of a cost matrix, reduced to the best one:
/// most pairs first, then least total cost. Returns `(pairs, cost)`.
pub fn brute_assignment(c: &CostMatrix<f64>) -> (usize, f64) {
    fn go(c: &CostMatrix<f64>, row: usize, used: &mut Vec<bool>, n: usize, cost: f64, best: &mut (usize, f64)) {
        if row == c.rows() {
            if n > best.0 || (n == best.0 && cost < best.1) {
                *best = (n, cost);
            }
            return;
        }
        go(c, row + 1, used, n, cost, best);
        for col in 0..c.cols() {
            if used[col] {
                continue;
            }
            if let Some(v) = c.get(row, col) {
                used[col] = true;
                go(c, row + 1, used, n + 1, cost + v, best);
                used[col] = false;
            }
        }
    }
    let mut best = (0, 0.0);
    go(c, 0, &mut vec![false; c.cols()], 0, 0.0, &mut best);
    best
}

/// Minimum over all full permutations of a square matrix without
/// infeasible entries.
pub fn permutation_min(c: &[Vec<f64>]) -> f64 {
    let n = c.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    // Heap's algorithm.
    let mut stack = vec![0usize; n];
    let eval = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| c[i][j]).sum::<f64>();
    best = best.min(eval(&perm));
    let mut i = 0;
    while i < n {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            best = best.min(eval(&perm));
            stack[i] += 1;
            i = 0;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    best
}

fn iou(a: &BBox<f64>, b: &BBox<f64>) -> f64 {
    let w = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let h = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    inter / (a.w * a.h + b.w * b.h - inter)
}

/// All matchings of one frame as `(min iou, pairs)`; the empty matching
/// has min iou of infinity.
fn frame_matchings(ious: &[Vec<f64>]) -> Vec<(f64, Vec<(usize, usize)>)> {
    fn go(
        ious: &[Vec<f64>],
        row: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        min: f64,
        out: &mut Vec<(f64, Vec<(usize, usize)>)>,
    ) {
        if row == ious.len() {
            out.push((min, cur.clone()));
            return;
        }
        go(ious, row + 1, used, cur, min, out);
        for col in 0..used.len() {
            if used[col] || ious[row][col] <= 0.0 {
                continue;
            }
            used[col] = true;
            cur.push((row, col));
            go(ious, row + 1, used, cur, min.min(ious[row][col]), out);
            cur.pop();
            used[col] = false;
        }
    }
    let cols = ious.first().map_or(0, |r| r.len());
    let mut out = Vec::new();
    go(ious, 0, &mut vec![false; cols], &mut Vec::new(), f64::INFINITY, &mut out);
    out
}

/// HOTA by exhaustive per-frame matching and direct per-detection
/// TPA/FNA/FPA counting.
pub fn hota_oracle(gt: &[BoxRow], pred: &[BoxRow]) -> HotaScores {
    if gt.is_empty() && pred.is_empty() {
        return HotaScores::default();
    }
    let mut frames: BTreeMap<Frame, (Vec<&BoxRow>, Vec<&BoxRow>)> = BTreeMap::new();
    for g in gt {
        frames.entry(g.frame).or_default().0.push(g);
    }
    for p in pred {
        frames.entry(p.frame).or_default().1.push(p);
    }
    let alphas: Vec<f64> = alpha_grid().collect();
    // Per alpha: list of (gt id, pred id, iou) true positives.
    let mut tps: Vec<Vec<(u64, u64, f64)>> = vec![Vec::new(); alphas.len()];
    for (gs, ps) in frames.values() {
        let ious: Vec<Vec<f64>> = gs.iter().map(|g| ps.iter().map(|p| iou(&g.bbox, &p.bbox)).collect()).collect();
        let all = frame_matchings(&ious);
        for (k, &alpha) in alphas.iter().enumerate() {
            let mut best: Option<(usize, f64, &Vec<(usize, usize)>)> = None;
            for (min, pairs) in &all {
                if *min < alpha {
                    continue;
                }
                let sum: f64 = pairs.iter().map(|&(i, j)| ious[i][j]).sum();
                let better = match best {
                    None => true,
                    Some((n, s, _)) => pairs.len() > n || (pairs.len() == n && sum > s),
                };
                if better {
                    best = Some((pairs.len(), sum, pairs));
                }
            }
            for &(i, j) in best.map(|b| b.2).into_iter().flatten() {
                tps[k].push((gs[i].id, ps[j].id, ious[i][j]));
            }
        }
    }

    let count = |rows: &[BoxRow], id: u64| rows.iter().filter(|r| r.id == id).count() as f64;
    let mut out = HotaScores::default();
    for list in &tps {
        let tp = list.len() as f64;
        let fn_ = gt.len() as f64 - tp;
        let fp = pred.len() as f64 - tp;
        let deta = if tp + fn_ + fp > 0.0 { tp / (tp + fn_ + fp) } else { 0.0 };
        let mut assa = 0.0;
        let mut loca = 0.0;
        for &(g, p, v) in list {
            let tpa = list.iter().filter(|x| x.0 == g && x.1 == p).count() as f64;
            let fna = count(gt, g) - tpa;
            let fpa = count(pred, p) - tpa;
            assa += tpa / (tpa + fna + fpa);
            loca += v;
        }
        if !list.is_empty() {
            assa /= tp;
            loca /= tp;
        }
        out.hota += (deta * assa).sqrt();
        out.deta += deta;
        out.assa += assa;
        out.loca += loca;
    }
    let n = alphas.len() as f64;
    HotaScores {
        hota: 100.0 * out.hota / n,
        deta: 100.0 * out.deta / n,
        assa: 100.0 * out.assa / n,
        loca: 100.0 * out.loca / n,
    }
}

/// A small random tracking instance: up to `max_objects` moving boxes over
/// up to `max_frames` frames and a noisy prediction with occasional id
/// switches, misses and false positives.
pub fn random_instance(seed: u64, max_objects: usize, max_frames: u32) -> (Vec<BoxRow>, Vec<BoxRow>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_objects);
    let frames = rng.random_range(1..=max_frames);
    let objects: Vec<(f64, f64, f64, f64, f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.random_range(0.0..120.0),
                rng.random_range(0.0..120.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(20.0..50.0),
                rng.random_range(30.0..80.0),
            )
        })
        .collect();
    let mut label: Vec<u64> = (0..n as u64).map(|i| i + 10).collect();
    let (mut gt, mut pred) = (Vec::new(), Vec::new());
    for f in 1..=frames {
        let mut used = Vec::new();
        for (i, &(x, y, vx, vy, w, h)) in objects.iter().enumerate() {
            if !rng.random_bool(0.85) {
                continue;
            }
            let t = f as f64;
            let b = BBox::new(x + vx * t, y + vy * t, w, h);
            gt.push(BoxRow::new(f, i as u64 + 1, b));
            if rng.random_bool(0.05) {
                label[i] = rng.random_range(10..10 + n as u64 + 2);
            }
            if rng.random_bool(0.8) && !used.contains(&label[i]) {
                used.push(label[i]);
                let j = |r: &mut ChaCha8Rng, s: f64| r.random_range(-s..s);
                let pb = BBox::new(b.x + j(&mut rng, 12.0), b.y + j(&mut rng, 12.0), w + j(&mut rng, 8.0), h + j(&mut rng, 8.0));
                pred.push(BoxRow::new(f, label[i], pb));
            }
        }
        if rng.random_bool(0.1) {
            let id = 100 + rng.random_range(0..3u64);
            if !used.contains(&id) {
                let b = BBox::new(rng.random_range(0.0..150.0), rng.random_range(0.0..150.0), 30.0, 60.0);
                pred.push(BoxRow::new(f, id, b));
            }
        }
    }
    (gt, pred)
}
