//! Homography fitting: normalized direct linear transform and a seeded
//! RANSAC loop over 4-point minimal samples.

use nalgebra::{Matrix3, SMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Homography, Point};

use super::lk::PointCorrespondence;

const MIN_POINTS: usize = 4;
/// Twice the triangle area (px²) under which three sample points count as
/// collinear.
const COLLINEAR_AREA2: f64 = 1.0;
const MAX_DRAWS_PER_ITERATION: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    /// A correspondence is an inlier when its reprojection error is strictly
    /// below this (px).
    pub reproj_threshold: f64,
    pub max_iterations: usize,
    /// Probability of having drawn at least one all-inlier sample at which
    /// the loop may stop early. 1.0 disables early termination.
    pub confidence: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            reproj_threshold: 0.5,
            max_iterations: 500,
            confidence: 0.995,
            seed: 0,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.reproj_threshold > 0.0) || self.max_iterations == 0 || !(self.confidence > 0.0 && self.confidence <= 1.0) {
            return Err(Error::InvalidParameter(format!("ransac: {self:?}")));
        }
        Ok(())
    }
}

/// Output of [`estimate_homography`].
#[derive(Debug, Clone, PartialEq)]
pub struct HomographyFit {
    /// Maps previous-frame coordinates to current-frame coordinates.
    pub h: Homography,
    /// One flag per input correspondence; untracked points are never inliers.
    pub inlier_flags: Vec<bool>,
    /// Inlier count over tracked count.
    pub inlier_ratio: f64,
}

/// Least-squares homography through all pairs `src[i] -> dst[i]` (at least
/// four, not all collinear), with Hartley normalization of both point sets.
pub fn fit_homography_dlt(src: &[Point], dst: &[Point]) -> Result<Homography> {
    if src.len() != dst.len() {
        return Err(Error::InvalidParameter("DLT needs paired point sets".into()));
    }
    if src.len() < MIN_POINTS {
        return Err(Error::InsufficientPoints {
            needed: MIN_POINTS,
            got: src.len(),
        });
    }
    let (ts, ns) = normalize(src).ok_or(Error::DegenerateGeometry)?;
    let (td, nd) = normalize(dst).ok_or(Error::DegenerateGeometry)?;

    // accumulate AᵀA directly; the null vector of A is its smallest eigenvector
    let mut ata = SMatrix::<f64, 9, 9>::zeros();
    for (s, d) in ns.iter().zip(&nd) {
        let (x, y, u, v) = (s[0], s[1], d[0], d[1]);
        let r1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        let r2 = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u];
        for r in [r1, r2] {
            for i in 0..9 {
                if r[i] == 0.0 {
                    continue;
                }
                for j in i..9 {
                    ata[(i, j)] += r[i] * r[j];
                }
            }
        }
    }
    for i in 0..9 {
        for j in 0..i {
            ata[(i, j)] = ata[(j, i)];
        }
    }
    let eig = SymmetricEigen::new(ata);
    let (min_idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, &v)| if v < best.1 { (i, v) } else { best });
    let hv = eig.eigenvectors.column(min_idx);
    let hn = Matrix3::new(hv[0], hv[1], hv[2], hv[3], hv[4], hv[5], hv[6], hv[7], hv[8]);
    let td_inv = td.try_inverse().ok_or(Error::DegenerateGeometry)?;
    Homography::new(td_inv * hn * ts)
}

/// Similarity transform taking the centroid to the origin with mean distance
/// sqrt(2), and the transformed points.
fn normalize(pts: &[Point]) -> Option<(Matrix3<f64>, Vec<[f64; 2]>)> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let mean = pts
        .iter()
        .map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if mean < 1e-12 {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean;
    let t = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    let out = pts.iter().map(|p| [s * (p.x - cx), s * (p.y - cy)]).collect();
    Some((t, out))
}

fn collinear(a: Point, b: Point, c: Point) -> bool {
    let cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    cross.abs() < COLLINEAR_AREA2
}

fn degenerate(p: &[Point; 4]) -> bool {
    collinear(p[0], p[1], p[2]) || collinear(p[0], p[1], p[3]) || collinear(p[0], p[2], p[3]) || collinear(p[1], p[2], p[3])
}

/// Scores a model: inlier count and the summed error over inliers.
fn score(h: &Homography, src: &[Point], dst: &[Point], threshold: f64) -> (usize, f64) {
    src.iter().zip(dst).fold((0, 0.0), |(n, e), (&s, &d)| {
        let err = h.reprojection_error(s, d);
        if err < threshold {
            (n + 1, e + err)
        } else {
            (n, e)
        }
    })
}

/// Robust homography over the tracked correspondences. Reproducible for a
/// fixed `params.seed`.
pub fn estimate_homography(correspondences: &[PointCorrespondence], params: &RansacParams) -> Result<HomographyFit> {
    let tracked: Vec<usize> = (0..correspondences.len()).filter(|&i| correspondences[i].tracked).collect();
    let n = tracked.len();
    if n < MIN_POINTS {
        return Err(Error::InsufficientPoints {
            needed: MIN_POINTS,
            got: n,
        });
    }
    let src: Vec<Point> = tracked.iter().map(|&i| correspondences[i].prev).collect();
    let dst: Vec<Point> = tracked.iter().map(|&i| correspondences[i].curr).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(Homography, usize, f64)> = None;
    let mut needed_iterations = params.max_iterations;
    let mut iteration = 0;

    while iteration < needed_iterations.min(params.max_iterations) {
        iteration += 1;
        let Some(idx) = draw_sample(&mut rng, &src, &dst) else {
            continue;
        };
        let s4: Vec<Point> = idx.iter().map(|&i| src[i]).collect();
        let d4: Vec<Point> = idx.iter().map(|&i| dst[i]).collect();
        let Ok(h) = fit_homography_dlt(&s4, &d4) else {
            continue;
        };
        let (count, err) = score(&h, &src, &dst, params.reproj_threshold);
        let better = match &best {
            None => true,
            Some((_, bc, be)) => count > *bc || (count == *bc && err < *be),
        };
        if better {
            best = Some((h, count, err));
            needed_iterations = adaptive_iterations(count as f64 / n as f64, params.confidence, params.max_iterations);
        }
    }

    let (best_h, best_count, _) = best.ok_or(Error::DegenerateGeometry)?;
    let mut h = best_h;
    if best_count >= MIN_POINTS {
        let (s_in, d_in): (Vec<Point>, Vec<Point>) = src
            .iter()
            .zip(&dst)
            .filter(|(&s, &d)| best_h.reprojection_error(s, d) < params.reproj_threshold)
            .map(|(&s, &d)| (s, d))
            .unzip();
        if let Ok(refit) = fit_homography_dlt(&s_in, &d_in) {
            if score(&refit, &src, &dst, params.reproj_threshold).0 >= best_count {
                h = refit;
            }
        }
    }

    let mut flags = vec![false; correspondences.len()];
    let mut inliers = 0;
    for (k, &i) in tracked.iter().enumerate() {
        if h.reprojection_error(src[k], dst[k]) < params.reproj_threshold {
            flags[i] = true;
            inliers += 1;
        }
    }
    Ok(HomographyFit {
        h,
        inlier_flags: flags,
        inlier_ratio: inliers as f64 / n as f64,
    })
}

/// Draws four distinct indices whose points are in general position in both
/// frames, or gives up after a bounded number of draws.
fn draw_sample(rng: &mut ChaCha8Rng, src: &[Point], dst: &[Point]) -> Option<[usize; 4]> {
    let n = src.len();
    for _ in 0..MAX_DRAWS_PER_ITERATION {
        let mut idx = [0usize; 4];
        let mut k = 0;
        while k < 4 {
            let c = rng.random_range(0..n);
            if !idx[..k].contains(&c) {
                idx[k] = c;
                k += 1;
            }
        }
        let s = idx.map(|i| src[i]);
        let d = idx.map(|i| dst[i]);
        if !degenerate(&s) && !degenerate(&d) {
            return Some(idx);
        }
    }
    None
}

fn adaptive_iterations(inlier_ratio: f64, confidence: f64, cap: usize) -> usize {
    if confidence >= 1.0 {
        return cap;
    }
    let p_good = inlier_ratio.powi(MIN_POINTS as i32);
    if p_good <= f64::EPSILON {
        return cap;
    }
    if p_good >= 1.0 - f64::EPSILON {
        return 1;
    }
    let k = (1.0 - confidence).ln() / (1.0 - p_good).ln();
    (k.ceil().max(1.0) as usize).min(cap)
}
