//! Image-plane / court-plane geometry.
//!
//! A fixed camera is calibrated by a planar homography estimated from
//! image/court keypoint correspondences. Player positions on the court are
//! the homography image of the bottom-centre ("foot point") of each box.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Court length in centimetres.
pub const COURT_LENGTH_CM: f64 = 2800.0;
/// Court width in centimetres.
pub const COURT_WIDTH_CM: f64 = 1400.0;

/// Relative threshold below which determinants and homogeneous scales are
/// treated as zero. Both tests are invariant to the overall matrix scale.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// Twenty reference keypoints on a 2800 x 1400 cm court, in centimetres.
///
/// Origin is the near-left corner, x runs along the sideline, y across the
/// court. Order: four corners, the half-court line ends, the centre circle
/// crossings of the half-court line, the four corners of each restricted
/// area, and the four ends of the straight corner three-point segments.
pub const COURT_TEMPLATE: [(f64, f64); 20] = [
    (0.0, 0.0),
    (2800.0, 0.0),
    (2800.0, 1400.0),
    (0.0, 1400.0),
    (1400.0, 0.0),
    (1400.0, 1400.0),
    (1400.0, 520.0),
    (1400.0, 880.0),
    (0.0, 455.0),
    (580.0, 455.0),
    (580.0, 945.0),
    (0.0, 945.0),
    (2800.0, 455.0),
    (2220.0, 455.0),
    (2220.0, 945.0),
    (2800.0, 945.0),
    (299.0, 90.0),
    (299.0, 1310.0),
    (2501.0, 90.0),
    (2501.0, 1310.0),
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("need at least 4 correspondences, got {0}")]
    InsufficientCorrespondences(usize),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("point maps to infinity (homogeneous scale {0:e})")]
    PointAtInfinity(f64),
    #[error("invalid bounding box: width and height must be positive (w={w}, h={h})")]
    InvalidBbox { w: f64, h: f64 },
    #[error("non-finite coordinate")]
    NonFinite,
}

/// Pixel coordinates in the image.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImagePoint<T> {
    pub x: T,
    pub y: T,
}

/// Centimetre coordinates on the court plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CourtPoint<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> ImagePoint<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }
}

impl<T: Real> CourtPoint<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(&self, other: &Self) -> Self {
        let half = T::of(0.5);
        Self::new((self.x + other.x) * half, (self.y + other.y) * half)
    }

    /// True if the point lies on the playing surface (boundary included).
    pub fn in_court(&self) -> bool {
        self.x >= T::zero()
            && self.y >= T::zero()
            && self.x <= T::of(COURT_LENGTH_CM)
            && self.y <= T::of(COURT_WIDTH_CM)
    }
}

/// Axis-aligned image box: top-left corner plus extent, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BBox<T> {
    pub x: T,
    pub y: T,
    pub w: T,
    pub h: T,
}

impl<T: Real> BBox<T> {
    pub fn new(x: T, y: T, w: T, h: T) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> T {
        self.w.max(T::zero()) * self.h.max(T::zero())
    }

    pub fn iou(&self, other: &Self) -> T {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if ix <= T::zero() || iy <= T::zero() {
            return T::zero();
        }
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union <= T::zero() {
            T::zero()
        } else {
            inter / union
        }
    }
}

/// Bottom-centre of a box, used as the player's ground contact point.
pub fn foot_point<T: Real>(bbox: &BBox<T>) -> Result<ImagePoint<T>, GeometryError> {
    if !(bbox.w > T::zero() && bbox.h > T::zero()) {
        return Err(GeometryError::InvalidBbox {
            w: bbox.w.as_f64(),
            h: bbox.h.as_f64(),
        });
    }
    Ok(ImagePoint::new(bbox.x + bbox.w * T::of(0.5), bbox.y + bbox.h))
}

/// One keypoint seen in the image together with its court template position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence<T> {
    pub image: ImagePoint<T>,
    pub court: CourtPoint<T>,
}

impl<T: Real> Correspondence<T> {
    pub fn new(image: ImagePoint<T>, court: CourtPoint<T>) -> Self {
        Self { image, court }
    }
}

/// Projective map from image pixels to court centimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography<T> {
    m: [[T; 3]; 3],
}

impl<T: Real> Homography<T> {
    /// Wraps a raw matrix, rescaling so that the bottom-right entry is 1 when
    /// it is not negligible (unit Frobenius norm otherwise).
    pub fn new(m: [[T; 3]; 3]) -> Result<Self, GeometryError> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let norm = frobenius(&m);
        if norm == T::zero() {
            return Err(GeometryError::DegenerateGeometry("zero matrix"));
        }
        let det = det3(&m) / (norm * norm * norm);
        if det.abs() <= T::of(DEGENERACY_EPS) {
            return Err(GeometryError::DegenerateGeometry("singular homography"));
        }
        let scale = if m[2][2].abs() > T::of(DEGENERACY_EPS) * norm {
            m[2][2]
        } else {
            norm
        };
        let mut out = m;
        for v in out.iter_mut().flatten() {
            *v = *v / scale;
        }
        Ok(Self { m: out })
    }

    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[o, z, z], [z, o, z], [z, z, o]],
        }
    }

    pub fn matrix(&self) -> [[T; 3]; 3] {
        self.m
    }

    pub fn project(&self, p: &ImagePoint<T>) -> Result<CourtPoint<T>, GeometryError> {
        let (x, y, w) = apply(&self.m, p.x, p.y);
        let scale = self.m[2][0].abs() * p.x.abs() + self.m[2][1].abs() * p.y.abs() + self.m[2][2].abs();
        if w.abs() <= T::of(DEGENERACY_EPS) * scale || w == T::zero() {
            return Err(GeometryError::PointAtInfinity(w.as_f64()));
        }
        Ok(CourtPoint::new(x / w, y / w))
    }

    /// Maps a court point back to the image.
    pub fn unproject(&self, p: &CourtPoint<T>) -> Result<ImagePoint<T>, GeometryError> {
        let inv = self.inverse()?;
        let c = inv.project(&ImagePoint::new(p.x, p.y))?;
        Ok(ImagePoint::new(c.x, c.y))
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        let m = &self.m;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        // Adjugate; the determinant is dropped because scale is irrelevant.
        let adj = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        Self::new(adj)
    }

    /// Multiplies every entry by `factor` without renormalising.
    pub fn scaled_raw(&self, factor: T) -> [[T; 3]; 3] {
        let mut m = self.m;
        for v in m.iter_mut().flatten() {
            *v = *v * factor;
        }
        m
    }
}

/// Result of [`estimate_homography`].
#[derive(Debug, Clone, Copy)]
pub struct HomographyEstimate<T> {
    pub homography: Homography<T>,
    /// Root-mean-square reprojection error over the input pairs, court units.
    pub rms_residual: T,
}

/// Least-squares homography from image/court correspondences.
///
/// Normalised direct linear transform: both point sets are translated to
/// their centroid and scaled to mean distance sqrt(2); the null vector of the
/// stacked constraint matrix is taken from a one-sided Jacobi SVD.
pub fn estimate_homography<T: Real>(
    pairs: &[Correspondence<T>],
) -> Result<HomographyEstimate<T>, GeometryError> {
    if pairs.len() < 4 {
        return Err(GeometryError::InsufficientCorrespondences(pairs.len()));
    }
    if pairs.iter().any(|p| {
        !(p.image.x.is_finite() && p.image.y.is_finite() && p.court.x.is_finite() && p.court.y.is_finite())
    }) {
        return Err(GeometryError::NonFinite);
    }
    let img: Vec<(T, T)> = pairs.iter().map(|p| (p.image.x, p.image.y)).collect();
    let crt: Vec<(T, T)> = pairs.iter().map(|p| (p.court.x, p.court.y)).collect();
    let t_img = normalizer(&img)?;
    let t_crt = normalizer(&crt)?;

    let rows = (2 * pairs.len()).max(9);
    let mut a = vec![[T::zero(); 9]; rows];
    for (k, (&(u, v), &(x, y))) in img.iter().zip(&crt).enumerate() {
        let (u, v, _) = apply(&t_img, u, v);
        let (x, y, _) = apply(&t_crt, x, y);
        let o = T::one();
        let z = T::zero();
        a[2 * k] = [-u, -v, -o, z, z, z, x * u, x * v, x];
        a[2 * k + 1] = [z, z, z, -u, -v, -o, y * u, y * v, y];
    }
    let (sv, vmat) = jacobi_svd(&mut a);

    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| sv[i].partial_cmp(&sv[j]).unwrap_or(std::cmp::Ordering::Equal));
    let smax = sv[order[8]];
    if smax <= T::zero() {
        return Err(GeometryError::DegenerateGeometry("zero constraint matrix"));
    }
    // A unique solution needs a one-dimensional null space.
    if sv[order[1]] <= T::of(1e-9).max(T::epsilon() * T::of(64.0)) * smax {
        return Err(GeometryError::DegenerateGeometry("correspondences do not determine a unique homography"));
    }
    let h = order[0];
    let hn = [
        [vmat[0][h], vmat[1][h], vmat[2][h]],
        [vmat[3][h], vmat[4][h], vmat[5][h]],
        [vmat[6][h], vmat[7][h], vmat[8][h]],
    ];
    let t_crt_inv = inverse_similarity(&t_crt);
    let m = matmul(&matmul(&t_crt_inv, &hn), &t_img);
    let homography = Homography::new(m)?;

    let mut sq = T::zero();
    for p in pairs {
        let q = homography.project(&p.image)?;
        let d = q.distance(&p.court);
        sq = sq + d * d;
    }
    let rms_residual = (sq / T::of_usize(pairs.len())).sqrt();
    Ok(HomographyEstimate {
        homography,
        rms_residual,
    })
}

fn apply<T: Real>(m: &[[T; 3]; 3], x: T, y: T) -> (T, T, T) {
    (
        m[0][0] * x + m[0][1] * y + m[0][2],
        m[1][0] * x + m[1][1] * y + m[1][2],
        m[2][0] * x + m[2][1] * y + m[2][2],
    )
}

fn det3<T: Real>(m: &[[T; 3]; 3]) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn frobenius<T: Real>(m: &[[T; 3]; 3]) -> T {
    m.iter().flatten().map(|v| *v * *v).sum::<T>().sqrt()
}

fn matmul<T: Real>(a: &[[T; 3]; 3], b: &[[T; 3]; 3]) -> [[T; 3]; 3] {
    let mut out = [[T::zero(); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Similarity transform taking the points to zero centroid, mean radius sqrt(2).
fn normalizer<T: Real>(pts: &[(T, T)]) -> Result<[[T; 3]; 3], GeometryError> {
    let n = T::of_usize(pts.len());
    let cx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let cy = pts.iter().map(|p| p.1).sum::<T>() / n;
    let mean = pts.iter().map(|p| (p.0 - cx).hypot(p.1 - cy)).sum::<T>() / n;
    if mean <= T::zero() {
        return Err(GeometryError::DegenerateGeometry("all points coincide"));
    }
    let s = T::of(std::f64::consts::SQRT_2) / mean;
    let z = T::zero();
    Ok([[s, z, -s * cx], [z, s, -s * cy], [z, z, T::one()]])
}

fn inverse_similarity<T: Real>(t: &[[T; 3]; 3]) -> [[T; 3]; 3] {
    let s = t[0][0];
    let z = T::zero();
    [[T::one() / s, z, -t[0][2] / s], [z, T::one() / s, -t[1][2] / s], [z, z, T::one()]]
}

/// One-sided (Hestenes) Jacobi SVD of an m x 9 matrix, destroying `a`.
/// Returns the singular values and the right singular vectors as columns.
fn jacobi_svd<T: Real>(a: &mut [[T; 9]]) -> ([T; 9], [[T; 9]; 9]) {
    let mut v = [[T::zero(); 9]; 9];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = T::one();
    }
    let tol = T::epsilon();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..8 {
            for q in (p + 1)..9 {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for row in a.iter() {
                    alpha = alpha + row[p] * row[p];
                    beta = beta + row[q] * row[q];
                    gamma = gamma + row[p] * row[q];
                }
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for row in a.iter_mut() {
                    let (ap, aq) = (row[p], row[q]);
                    row[p] = c * ap - s * aq;
                    row[q] = s * ap + c * aq;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv = [T::zero(); 9];
    for (j, s) in sv.iter_mut().enumerate() {
        *s = a.iter().map(|row| row[j] * row[j]).sum::<T>().sqrt();
    }
    (sv, v)
}

/// The court template as typed points.
pub fn court_template<T: Real>() -> Vec<CourtPoint<T>> {
    COURT_TEMPLATE
        .iter()
        .map(|&(x, y)| CourtPoint::new(T::of(x), T::of(y)))
        .collect()
}
