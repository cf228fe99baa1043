//! Appearance embeddings and cosine costs.

use std::ops::RangeInclusive;

use thiserror::Error;

use crate::scalar::Real;
use crate::Frame;

/// Default embedding dimension.
pub const DEFAULT_DIM: usize = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AppearanceError {
    #[error("cosine cost undefined for a zero-norm embedding")]
    ZeroNorm,
    #[error("embedding dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("no embedded frame in window {first}..={last}")]
    EmptyWindow { first: Frame, last: Frame },
}

/// A fixed-length appearance descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T> {
    v: Vec<T>,
}

impl<T: Real> Embedding<T> {
    pub fn new(v: Vec<T>) -> Self {
        Self { v }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn norm(&self) -> T {
        self.v.iter().map(|x| *x * *x).sum::<T>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> T {
        self.v.iter().zip(&other.v).map(|(a, b)| *a * *b).sum()
    }

    /// Unit-norm copy; a zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            Self::new(self.v.iter().map(|x| *x / n).collect())
        } else {
            self.clone()
        }
    }
}

/// One minus cosine similarity, in `[0, 2]`.
pub fn appearance_cost<T: Real>(a: &Embedding<T>, b: &Embedding<T>) -> Result<T, AppearanceError> {
    if a.dim() != b.dim() {
        return Err(AppearanceError::DimensionMismatch(a.dim(), b.dim()));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na <= T::zero() || nb <= T::zero() || !na.is_finite() || !nb.is_finite() {
        return Err(AppearanceError::ZeroNorm);
    }
    let cos = (a.dot(b) / (na * nb)).max(-T::one()).min(T::one());
    Ok(T::one() - cos)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowDirection {
    /// Frames at or before the anchor.
    Before,
    /// Frames at or after the anchor.
    After,
}

/// Mean appearance over a contiguous frame range.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingWindow<T> {
    pub frames: RangeInclusive<Frame>,
    /// Number of embedded frames that contributed.
    pub count: usize,
    /// Arithmetic mean rescaled to unit norm (left as-is when it cancels to zero).
    pub mean: Embedding<T>,
}

/// Per-frame embeddings of one track, in frame order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingHistory<T> {
    entries: Vec<(Frame, Option<Embedding<T>>)>,
}

impl<T: Real> EmbeddingHistory<T> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    /// Appends a frame; frames must arrive in increasing order.
    pub fn push(&mut self, frame: Frame, embedding: Option<Embedding<T>>) {
        debug_assert!(self.entries.last().is_none_or(|(f, _)| *f < frame));
        self.entries.push((frame, embedding));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Frame, Option<Embedding<T>>)] {
        &self.entries
    }

    pub fn get(&self, frame: Frame) -> Option<&Embedding<T>> {
        self.entries
            .binary_search_by_key(&frame, |(f, _)| *f)
            .ok()
            .and_then(|i| self.entries[i].1.as_ref())
    }

    /// Removes and returns every entry at or after `frame`.
    pub fn split_off(&mut self, frame: Frame) -> Vec<(Frame, Option<Embedding<T>>)> {
        let idx = self.entries.partition_point(|(f, _)| *f < frame);
        self.entries.split_off(idx)
    }

    pub fn extend(&mut self, tail: Vec<(Frame, Option<Embedding<T>>)>) {
        self.entries.extend(tail);
    }

    /// Averages embeddings over `length` frames ending (`Before`) or starting
    /// (`After`) at `anchor`. Frames without an embedding are skipped.
    pub fn window_mean(
        &self,
        anchor: Frame,
        length: u32,
        direction: WindowDirection,
    ) -> Result<EmbeddingWindow<T>, AppearanceError> {
        let length = length.max(1);
        let frames = match direction {
            WindowDirection::Before => anchor.saturating_sub(length - 1)..=anchor,
            WindowDirection::After => anchor..=anchor.saturating_add(length - 1),
        };
        let mut sum: Option<Vec<T>> = None;
        let mut count = 0usize;
        for (_, e) in self.entries.iter().filter(|(f, _)| frames.contains(f)) {
            let Some(e) = e else { continue };
            let acc = sum.get_or_insert_with(|| vec![T::zero(); e.dim()]);
            if acc.len() != e.dim() {
                return Err(AppearanceError::DimensionMismatch(acc.len(), e.dim()));
            }
            for (a, x) in acc.iter_mut().zip(e.as_slice()) {
                *a = *a + *x;
            }
            count += 1;
        }
        let Some(sum) = sum else {
            return Err(AppearanceError::EmptyWindow {
                first: *frames.start(),
                last: *frames.end(),
            });
        };
        let n = T::of_usize(count);
        let mean = Embedding::new(sum.into_iter().map(|x| x / n).collect()).normalized();
        Ok(EmbeddingWindow { frames, count, mean })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: &[f64]) -> Embedding<f64> {
        Embedding::new(v.to_vec())
    }

    #[test]
    fn cost_examples() {
        assert_eq!(appearance_cost(&e(&[1.0, 0.0, 0.0]), &e(&[1.0, 0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(appearance_cost(&e(&[1.0, 0.0]), &e(&[0.0, 1.0])).unwrap(), 1.0);
        let c = appearance_cost(&e(&[1.0, 0.0]), &e(&[1.0, 1.0])).unwrap();
        assert!((c - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-12);
        assert!((c - 0.29289).abs() < 1e-5);
    }

    #[test]
    fn cost_errors() {
        assert_eq!(
            appearance_cost(&e(&[0.0, 0.0]), &e(&[1.0, 0.0])),
            Err(AppearanceError::ZeroNorm)
        );
        assert_eq!(
            appearance_cost(&e(&[1.0, 0.0]), &e(&[1.0, 0.0, 0.0])),
            Err(AppearanceError::DimensionMismatch(2, 3))
        );
    }

    #[test]
    fn singleton_window() {
        let mut h = EmbeddingHistory::new();
        h.push(5, Some(e(&[3.0, 4.0])));
        let w = h.window_mean(5, 10, WindowDirection::Before).unwrap();
        assert_eq!(w.count, 1);
        assert!((w.mean.as_slice()[0] - 0.6).abs() < 1e-12);
        assert!((w.mean.as_slice()[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn antipodal_mean_cancels_without_error() {
        let mut h = EmbeddingHistory::new();
        h.push(1, Some(e(&[1.0, 0.0])));
        h.push(2, Some(e(&[-1.0, 0.0])));
        let w = h.window_mean(2, 10, WindowDirection::Before).unwrap();
        assert_eq!(w.mean.norm(), 0.0);
        assert_eq!(appearance_cost(&w.mean, &e(&[1.0, 0.0])), Err(AppearanceError::ZeroNorm));
    }

    #[test]
    fn window_respects_direction_and_gaps() {
        let mut h = EmbeddingHistory::new();
        h.push(1, Some(e(&[1.0, 0.0])));
        h.push(2, None);
        h.push(3, Some(e(&[0.0, 1.0])));
        h.push(20, Some(e(&[0.0, 1.0])));
        let before = h.window_mean(3, 3, WindowDirection::Before).unwrap();
        assert_eq!(before.count, 2);
        assert_eq!(before.frames, 1..=3);
        let after = h.window_mean(4, 10, WindowDirection::After);
        assert_eq!(after, Err(AppearanceError::EmptyWindow { first: 4, last: 13 }));
        let after = h.window_mean(4, 20, WindowDirection::After).unwrap();
        assert_eq!(after.count, 1);
    }

    #[test]
    fn split_and_extend() {
        let mut h = EmbeddingHistory::new();
        for f in 1..=5 {
            h.push(f, Some(e(&[f as f64, 1.0])));
        }
        let tail = h.split_off(3);
        assert_eq!(h.len(), 2);
        assert_eq!(tail.len(), 3);
        h.extend(tail);
        assert_eq!(h.get(4).unwrap().as_slice()[0], 4.0);
    }
}
