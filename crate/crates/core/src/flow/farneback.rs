//! Two-frame dense optical flow by polynomial expansion.
//!
//! Each pixel neighbourhood is approximated by a quadratic
//! `f(p) ≈ pᵀ A p + bᵀ p + c`, fitted by weighted least squares under a
//! Gaussian applicability window. A displacement `d` between the frames
//! relates the coefficients through `b₂ = b₁ - 2 A d`; the per-pixel
//! constraint is aggregated over a box window and solved for `d`, refined
//! iteratively and coarse-to-fine over a pyramid.

use nalgebra::Matrix3;

use crate::error::Result;
use crate::imaging::filter::{gaussian_blur, resize_bilinear};
use crate::plane::{ensure_same_dims, Plane};

use super::{FlowField, FlowParams};

/// The 2x2 determinant is inflated by `DET_RELATIVE * trace^2 + DET_FLOOR`
/// before inversion, so the damping follows the local texture energy and
/// exactly flat regions stay at zero flow.
const DET_RELATIVE: f32 = 1e-3;
const DET_FLOOR: f32 = 1e-12;

/// Coefficients of the local quadratic at one pixel:
/// `[b_x, b_y, A_xx, A_yy, A_xy]` with `A_xy` the off-diagonal entry.
type Poly = [f32; 5];

/// Precomputed separable kernels and the inverse Gram rows for the
/// even-order coefficients.
#[derive(Debug, Clone)]
struct PolyBasis {
    radius: usize,
    g: Vec<f32>,
    xg: Vec<f32>,
    xxg: Vec<f32>,
    inv_s2: f32,
    inv_s22: f32,
    /// Rows of the inverted 3x3 system for `[c, A_xx, A_yy]` that yield
    /// `A_xx`, applied to `[m00, m20, m02]`.
    row_xx: [f32; 3],
    row_yy: [f32; 3],
}

impl PolyBasis {
    fn new(radius: usize, sigma: f32) -> Self {
        let r = radius as i64;
        let g: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * (sigma as f64).powi(2))).exp()).collect();
        let xs: Vec<f64> = (-r..=r).map(|i| i as f64).collect();
        let s0_1d: f64 = g.iter().sum();
        let s2_1d: f64 = g.iter().zip(&xs).map(|(g, x)| g * x * x).sum();
        let s4_1d: f64 = g.iter().zip(&xs).map(|(g, x)| g * x.powi(4)).sum();

        let s0 = s0_1d * s0_1d;
        let s2 = s0_1d * s2_1d;
        let s4 = s0_1d * s4_1d;
        let s22 = s2_1d * s2_1d;
        let gram = Matrix3::new(s0, s2, s2, s2, s4, s22, s2, s22, s4);
        let inv = gram.try_inverse().expect("Gram matrix of a Gaussian window is invertible");
        Self {
            radius,
            g: g.iter().map(|&v| v as f32).collect(),
            xg: g.iter().zip(&xs).map(|(g, x)| (g * x) as f32).collect(),
            xxg: g.iter().zip(&xs).map(|(g, x)| (g * x * x) as f32).collect(),
            inv_s2: (1.0 / s2) as f32,
            inv_s22: (1.0 / s22) as f32,
            row_xx: [inv[(1, 0)] as f32, inv[(1, 1)] as f32, inv[(1, 2)] as f32],
            row_yy: [inv[(2, 0)] as f32, inv[(2, 1)] as f32, inv[(2, 2)] as f32],
        }
    }

    /// Quadratic coefficients at every pixel, borders replicated.
    fn expand(&self, src: &Plane<f32>, out: &mut Vec<Poly>) {
        let (w, h) = src.dims();
        let n = self.radius;
        out.resize(w * h, [0.0; 5]);
        out.truncate(w * h);
        let mut v0 = vec![0.0f32; w + 2 * n];
        let mut v1 = vec![0.0f32; w + 2 * n];
        let mut v2 = vec![0.0f32; w + 2 * n];
        let mut m: [Vec<f32>; 6] = std::array::from_fn(|_| vec![0.0f32; w]);

        for y in 0..h {
            // vertical pass, taps at +k and -k folded together
            let centre = src.row(y);
            let g0 = self.g[n];
            for x in 0..w {
                v0[n + x] = g0 * centre[x];
                v1[n + x] = 0.0;
                v2[n + x] = 0.0;
            }
            for k in 1..=n {
                let lo = src.row(y.saturating_sub(k));
                let hi = src.row((y + k).min(h - 1));
                let (a, b, c) = (self.g[n + k], self.xg[n + k], self.xxg[n + k]);
                let (v0, v1, v2) = (&mut v0[n..n + w], &mut v1[n..n + w], &mut v2[n..n + w]);
                for x in 0..w {
                    let s = hi[x] + lo[x];
                    let d = hi[x] - lo[x];
                    v0[x] += a * s;
                    v1[x] += b * d;
                    v2[x] += c * s;
                }
            }
            for pad in 0..n {
                v0[pad] = v0[n];
                v1[pad] = v1[n];
                v2[pad] = v2[n];
                v0[n + w + pad] = v0[n + w - 1];
                v1[n + w + pad] = v1[n + w - 1];
                v2[n + w + pad] = v2[n + w - 1];
            }

            // horizontal pass into m00, m10, m20, m01, m11, m02
            {
                let [m00, m10, m20, m01, m11, m02] = &mut m;
                for x in 0..w {
                    m00[x] = g0 * v0[n + x];
                    m10[x] = 0.0;
                    m20[x] = 0.0;
                    m01[x] = g0 * v1[n + x];
                    m11[x] = 0.0;
                    m02[x] = g0 * v2[n + x];
                }
                for k in 1..=n {
                    let (a, b, c) = (self.g[n + k], self.xg[n + k], self.xxg[n + k]);
                    let (h0, l0) = (&v0[n + k..n + k + w], &v0[n - k..n - k + w]);
                    let (h1, l1) = (&v1[n + k..n + k + w], &v1[n - k..n - k + w]);
                    let (h2, l2) = (&v2[n + k..n + k + w], &v2[n - k..n - k + w]);
                    for x in 0..w {
                        let s0 = h0[x] + l0[x];
                        m00[x] += a * s0;
                        m10[x] += b * (h0[x] - l0[x]);
                        m20[x] += c * s0;
                        m01[x] += a * (h1[x] + l1[x]);
                        m11[x] += b * (h1[x] - l1[x]);
                        m02[x] += a * (h2[x] + l2[x]);
                    }
                }
            }

            let [m00, m10, m20, m01, m11, m02] = &m;
            let out_row = &mut out[y * w..(y + 1) * w];
            for (x, o) in out_row.iter_mut().enumerate() {
                let axx = self.row_xx[0] * m00[x] + self.row_xx[1] * m20[x] + self.row_xx[2] * m02[x];
                let ayy = self.row_yy[0] * m00[x] + self.row_yy[1] * m20[x] + self.row_yy[2] * m02[x];
                // the fitted xy coefficient is 2·A_xy
                *o = [m10[x] * self.inv_s2, m01[x] * self.inv_s2, axx, ayy, 0.5 * m11[x] * self.inv_s22];
            }
        }
    }
}

/// Flow taking `a` toward `b`: `a(p) ≈ b(p + d(p))`.
pub fn estimate_dense_flow(a: &Plane<f32>, b: &Plane<f32>, params: &FlowParams) -> Result<FlowField> {
    DenseFlow::new(*params)?.estimate(a, b)
}

/// Dense flow estimator that keeps its working buffers between calls, so a
/// sequence of same-sized frames does not reallocate per frame.
#[derive(Debug, Clone)]
pub struct DenseFlow {
    params: FlowParams,
    basis: PolyBasis,
    r0: Vec<Poly>,
    r1: Vec<Poly>,
    m: Vec<Poly>,
    blurred: Vec<Poly>,
    column: Vec<Poly>,
}

impl DenseFlow {
    pub fn new(params: FlowParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            basis: PolyBasis::new(params.poly_n, params.poly_sigma),
            params,
            r0: Vec::new(),
            r1: Vec::new(),
            m: Vec::new(),
            blurred: Vec::new(),
            column: Vec::new(),
        })
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    /// Flow taking `a` toward `b`, see [`estimate_dense_flow`].
    pub fn estimate(&mut self, a: &Plane<f32>, b: &Plane<f32>) -> Result<FlowField> {
        ensure_same_dims(a.dims(), b.dims())?;
        let params = self.params;
        let (w, h) = a.dims();

        let mut flow: Option<FlowField> = None;
        for level in (0..params.levels).rev() {
            let scale = params.pyr_scale.powi(level as i32);
            let (lw, lh) = (
                ((w as f32 * scale).round() as usize).max(1),
                ((h as f32 * scale).round() as usize).max(1),
            );
            if level > 0 && (lw < 2 * params.poly_n + 1 || lh < 2 * params.poly_n + 1) {
                continue;
            }
            let init = match flow.take() {
                None => FlowField::zeros(lw, lh)?,
                Some(coarse) => coarse.upscaled(lw, lh)?,
            };
            if level == 0 {
                self.basis.expand(a, &mut self.r0);
                self.basis.expand(b, &mut self.r1);
            } else {
                let sigma = (1.0 / scale - 1.0) * 0.5;
                self.basis.expand(&resize_bilinear(&gaussian_blur(a, sigma), lw, lh)?, &mut self.r0);
                self.basis.expand(&resize_bilinear(&gaussian_blur(b, sigma), lw, lh)?, &mut self.r1);
            }
            flow = Some(self.refine(init));
        }
        match flow {
            Some(f) => Ok(f),
            None => FlowField::zeros(w, h),
        }
    }

    /// Runs the fixed-point iterations at one pyramid level.
    fn refine(&mut self, mut flow: FlowField) -> FlowField {
        let (w, h) = flow.dims();
        self.m.resize(w * h, [0.0; 5]);
        self.blurred.resize(w * h, [0.0; 5]);
        let (m, blurred) = (&mut self.m[..w * h], &mut self.blurred[..w * h]);
        for _ in 0..self.params.iterations {
            update_matrices(&self.r0, &self.r1, &flow, m);
            box_blur5(m, w, h, self.params.window, blurred, &mut self.column);
            let (dx, dy) = (flow.dx.as_mut_slice(), flow.dy.as_mut_slice());
            for ((dx, dy), &[g11, g12, g22, h1, h2]) in dx.iter_mut().zip(dy.iter_mut()).zip(blurred.iter()) {
                let trace = g11 + g22;
                let idet = 1.0 / (g11 * g22 - g12 * g12 + DET_RELATIVE * trace * trace + DET_FLOOR);
                *dx = (g22 * h1 - g12 * h2) * idet;
                *dy = (g11 * h2 - g12 * h1) * idet;
            }
        }
        flow
    }
}

/// Per-pixel normal-equation terms `[G11, G12, G22, h1, h2]` of the
/// displacement constraint `A d = Δb` at the current flow estimate.
fn update_matrices(r0: &[Poly], r1: &[Poly], flow: &FlowField, m: &mut [Poly]) {
    #[cfg(target_arch = "x86_64")]
    if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
        // SAFETY: the required CPU features were detected at runtime.
        unsafe { update_matrices_avx2(r0, r1, flow, m) };
        return;
    }
    update_matrices_generic(r0, r1, flow, m);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
fn update_matrices_avx2(r0: &[Poly], r1: &[Poly], flow: &FlowField, m: &mut [Poly]) {
    update_matrices_generic(r0, r1, flow, m);
}

#[inline(always)]
fn update_matrices_generic(r0: &[Poly], r1: &[Poly], flow: &FlowField, m: &mut [Poly]) {
    let (w, h) = flow.dims();
    let (maxx, maxy) = ((w - 1) as f32, (h - 1) as f32);
    for y in 0..h {
        let row = y * w..(y + 1) * w;
        let (fdx, fdy) = (&flow.dx.as_slice()[row.clone()], &flow.dy.as_slice()[row.clone()]);
        let (p0_row, m_row) = (&r0[row.clone()], &mut m[row]);
        for x in 0..w {
            let (dx, dy) = (fdx[x], fdy[x]);
            let sx = (x as f32 + dx).clamp(0.0, maxx);
            let sy = (y as f32 + dy).clamp(0.0, maxy);
            let p1 = sample_poly(r1, w, h, sx, sy);
            let p0 = &p0_row[x];

            let a11 = 0.5 * (p0[2] + p1[2]);
            let a22 = 0.5 * (p0[3] + p1[3]);
            let a12 = 0.5 * (p0[4] + p1[4]);
            let db1 = 0.5 * (p0[0] - p1[0]) + a11 * dx + a12 * dy;
            let db2 = 0.5 * (p0[1] - p1[1]) + a12 * dx + a22 * dy;

            m_row[x] = [
                a11 * a11 + a12 * a12,
                a12 * (a11 + a22),
                a12 * a12 + a22 * a22,
                a11 * db1 + a12 * db2,
                a12 * db1 + a22 * db2,
            ];
        }
    }
}

/// Mean over a `size` x `size` window of every channel, borders replicated.
fn box_blur5(src: &[Poly], w: usize, h: usize, size: usize, out: &mut [Poly], column: &mut Vec<Poly>) {
    let r = (size / 2) as isize;
    let norm = 1.0 / ((2 * r + 1) * (2 * r + 1)) as f32;
    let row = |y: isize| {
        let y = y.clamp(0, h as isize - 1) as usize;
        src[y * w..(y + 1) * w].as_flattened()
    };
    column.clear();
    column.resize(w, [0.0; 5]);
    let col = column.as_mut_slice().as_flattened_mut();
    for dy in -r..=r {
        for (c, &v) in col.iter_mut().zip(row(dy)) {
            *c += v;
        }
    }
    let at = |x: isize| x.clamp(0, w as isize - 1) as usize;
    for y in 0..h {
        let sums: &[Poly] = col.as_chunks::<5>().0;
        let out_row = &mut out[y * w..(y + 1) * w];
        let mut acc = [0.0f32; 5];
        for dx in -r..=r {
            let c = &sums[at(dx)];
            for k in 0..5 {
                acc[k] += c[k];
            }
        }
        out_row[0] = acc.map(|v| v * norm);
        for x in 1..w as isize {
            let (add, sub) = (&sums[at(x + r)], &sums[at(x - r - 1)]);
            for k in 0..5 {
                acc[k] += add[k] - sub[k];
            }
            out_row[x as usize] = acc.map(|v| v * norm);
        }
        if y + 1 < h {
            let (add, sub) = (row(y as isize + r + 1), row(y as isize - r));
            for ((c, &a), &s) in col.iter_mut().zip(add).zip(sub) {
                *c += a - s;
            }
        }
    }
}

#[inline(always)]
fn sample_poly(r: &[Poly], w: usize, h: usize, x: f32, y: f32) -> Poly {
    if w < 2 || h < 2 {
        return r[(y as usize).min(h - 1) * w + (x as usize).min(w - 1)];
    }
    // callers clamp to the frame, so truncation is floor; the last row and
    // column are reached with a weight of one on the far tap
    let x0 = (x as i32 as usize).min(w - 2);
    let y0 = (y as i32 as usize).min(h - 2);
    let (fx, fy) = (x - x0 as f32, y - y0 as f32);
    let i = y0 * w + x0;
    let (top, bot) = (&r[i..i + 2], &r[i + w..i + w + 2]);
    let mut out = [0.0f32; 5];
    for k in 0..5 {
        let t = top[0][k] + fx * (top[1][k] - top[0][k]);
        let b = bot[0][k] + fx * (bot[1][k] - bot[0][k]);
        out[k] = t + fy * (b - t);
    }
    out
}
