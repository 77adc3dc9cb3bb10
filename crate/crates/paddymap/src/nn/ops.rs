//! Layer primitives with hand-written backward passes.
//!
//! All convolutions are stride-1 cross-correlations; 3x3 kernels use zero
//! same-padding. Weight gradients accumulate in f64 so results are stable
//! and independent of vector width.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// 1x1 convolution (pixel-wise dense layer)
// ---------------------------------------------------------------------------

/// w: [co, ci, 1, 1], b: [co, 1, 1, 1].
pub fn conv1x1_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    if w.c != x.c || b.n != w.n {
        return Err(Error::ShapeMismatch(format!(
            "conv1x1: input {}ch, weights {}x{}",
            x.c, w.n, w.c
        )));
    }
    let (co, ci, p) = (w.n, x.c, x.plane_len());
    let mut y = Tensor::zeros(x.n, co, x.h, x.w);
    for ni in 0..x.n {
        for o in 0..co {
            let dst = y.plane_mut(ni, o);
            dst.fill(b.data[o]);
            for i in 0..ci {
                let wv = w.data[o * ci + i];
                let src = &x.data[(ni * ci + i) * p..(ni * ci + i + 1) * p];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += wv * s;
                }
            }
        }
    }
    y.debug_assert_finite("conv1x1 forward");
    Ok(y)
}

pub fn conv1x1_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (co, ci, p) = (w.n, x.c, x.plane_len());
    let mut dx = Tensor::zeros(x.n, ci, x.h, x.w);
    let mut dw64 = vec![0f64; co * ci];
    let mut db64 = vec![0f64; co];
    for ni in 0..x.n {
        for o in 0..co {
            let g = dy.plane(ni, o);
            let mut db = 0f64;
            for &v in g {
                db += v as f64;
            }
            db64[o] += db;
            for i in 0..ci {
                let wv = w.data[o * ci + i];
                let xs = x.plane(ni, i);
                let dst = dx.plane_mut(ni, i);
                let mut dot = 0f64;
                for ((d, &gv), &xv) in dst.iter_mut().zip(g).zip(xs) {
                    *d += wv * gv;
                    dot += (gv * xv) as f64;
                }
                dw64[o * ci + i] += dot;
            }
        }
    }
    let dw = Tensor { n: co, c: ci, h: 1, w: 1, data: dw64.into_iter().map(|v| v as f32).collect() };
    let db = Tensor { n: co, c: 1, h: 1, w: 1, data: db64.into_iter().map(|v| v as f32).collect() };
    let _ = p;
    dx.debug_assert_finite("conv1x1 backward");
    (dx, dw, db)
}

// ---------------------------------------------------------------------------
// 3x3 convolution, zero same-padding
// ---------------------------------------------------------------------------

/// Add `wv * shift(src, dy, dx)` into dst (both h x w planes).
#[inline]
fn axpy_shifted(dst: &mut [f32], src: &[f32], h: usize, w: usize, dy: isize, dx: isize, wv: f32) {
    let (y0, y1) = ((-dy).max(0) as usize, (h as isize - dy.max(0)) as usize);
    let (x0, x1) = ((-dx).max(0) as usize, (w as isize - dx.max(0)) as usize);
    if y0 >= y1 || x0 >= x1 {
        return;
    }
    for ry in y0..y1 {
        let sy = (ry as isize + dy) as usize;
        let d = &mut dst[ry * w + x0..ry * w + x1];
        let s = &src[sy * w + (x0 as isize + dx) as usize..];
        for (dv, &sv) in d.iter_mut().zip(s) {
            *dv += wv * sv;
        }
    }
}

/// Dot of `a` with shift(b, dy, dx), accumulated in f64.
#[inline]
fn dot_shifted(a: &[f32], b: &[f32], h: usize, w: usize, dy: isize, dx: isize) -> f64 {
    let (y0, y1) = ((-dy).max(0) as usize, (h as isize - dy.max(0)) as usize);
    let (x0, x1) = ((-dx).max(0) as usize, (w as isize - dx.max(0)) as usize);
    let mut acc = 0f64;
    if y0 >= y1 || x0 >= x1 {
        return 0.0;
    }
    for ry in y0..y1 {
        let sy = (ry as isize + dy) as usize;
        let av = &a[ry * w + x0..ry * w + x1];
        let bv = &b[sy * w + (x0 as isize + dx) as usize..];
        let mut row = 0f32;
        for (&x, &y) in av.iter().zip(bv) {
            row += x * y;
        }
        acc += row as f64;
    }
    acc
}

/// w: [co, ci, 3, 3], b: [co, 1, 1, 1].
pub fn conv3x3_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    if w.c != x.c || w.h != 3 || w.w != 3 {
        return Err(Error::ShapeMismatch(format!(
            "conv3x3: input {}ch, weights {:?}",
            x.c,
            w.shape()
        )));
    }
    let (co, ci) = (w.n, x.c);
    let mut y = Tensor::zeros(x.n, co, x.h, x.w);
    for ni in 0..x.n {
        for o in 0..co {
            let dst = y.plane_mut(ni, o);
            dst.fill(b.data[o]);
        }
        for o in 0..co {
            // shift source rows/cols per tap, accumulate into the output
            for i in 0..ci {
                let src = x.plane(ni, i);
                let dst = y.plane_mut(ni, o);
                for ky in 0..3isize {
                    for kx in 0..3isize {
                        let wv = w.data[((o * ci + i) * 3 + ky as usize) * 3 + kx as usize];
                        axpy_shifted(dst, src, x.h, x.w, ky - 1, kx - 1, wv);
                    }
                }
            }
        }
    }
    y.debug_assert_finite("conv3x3 forward");
    Ok(y)
}

pub fn conv3x3_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (co, ci) = (w.n, x.c);
    let mut dx = Tensor::zeros(x.n, ci, x.h, x.w);
    let mut dw64 = vec![0f64; co * ci * 9];
    let mut db64 = vec![0f64; co];
    for ni in 0..x.n {
        for o in 0..co {
            let g = dy.plane(ni, o);
            let mut db = 0f64;
            for &v in g {
                db += v as f64;
            }
            db64[o] += db;
            for i in 0..ci {
                let xs = x.plane(ni, i);
                let dst = dx.plane_mut(ni, i);
                for ky in 0..3isize {
                    for kx in 0..3isize {
                        let widx = ((o * ci + i) * 3 + ky as usize) * 3 + kx as usize;
                        let wv = w.data[widx];
                        // dx += w * shift(dy, -(k-1)); dw = <dy, shift(x, k-1)>
                        axpy_shifted(dst, g, x.h, x.w, 1 - ky, 1 - kx, wv);
                        dw64[widx] += dot_shifted(g, xs, x.h, x.w, ky - 1, kx - 1);
                    }
                }
            }
        }
    }
    let dw = Tensor { n: co, c: ci, h: 3, w: 3, data: dw64.into_iter().map(|v| v as f32).collect() };
    let db = Tensor { n: co, c: 1, h: 1, w: 1, data: db64.into_iter().map(|v| v as f32).collect() };
    dx.debug_assert_finite("conv3x3 backward");
    (dx, dw, db)
}

// ---------------------------------------------------------------------------
// Depthwise 3x3 (per-channel), zero same-padding, no bias
// ---------------------------------------------------------------------------

/// w: [c, 1, 3, 3].
pub fn depthwise3x3_forward(x: &Tensor, w: &Tensor) -> Result<Tensor> {
    if w.n != x.c || w.h != 3 || w.w != 3 {
        return Err(Error::ShapeMismatch(format!(
            "depthwise3x3: input {}ch, weights {:?}",
            x.c,
            w.shape()
        )));
    }
    let mut y = Tensor::zeros(x.n, x.c, x.h, x.w);
    for ni in 0..x.n {
        for c in 0..x.c {
            let src = x.plane(ni, c);
            let dst = y.plane_mut(ni, c);
            for ky in 0..3isize {
                for kx in 0..3isize {
                    let wv = w.data[(c * 3 + ky as usize) * 3 + kx as usize];
                    axpy_shifted(dst, src, x.h, x.w, ky - 1, kx - 1, wv);
                }
            }
        }
    }
    y.debug_assert_finite("depthwise3x3 forward");
    Ok(y)
}

pub fn depthwise3x3_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> (Tensor, Tensor) {
    let mut dx = Tensor::zeros(x.n, x.c, x.h, x.w);
    let mut dw64 = vec![0f64; x.c * 9];
    for ni in 0..x.n {
        for c in 0..x.c {
            let g = dy.plane(ni, c);
            let xs = x.plane(ni, c);
            let dst = dx.plane_mut(ni, c);
            for ky in 0..3isize {
                for kx in 0..3isize {
                    let widx = (c * 3 + ky as usize) * 3 + kx as usize;
                    axpy_shifted(dst, g, x.h, x.w, 1 - ky, 1 - kx, w.data[widx]);
                    dw64[widx] += dot_shifted(g, xs, x.h, x.w, ky - 1, kx - 1);
                }
            }
        }
    }
    let dw = Tensor { n: x.c, c: 1, h: 3, w: 3, data: dw64.into_iter().map(|v| v as f32).collect() };
    dx.debug_assert_finite("depthwise3x3 backward");
    (dx, dw)
}

// ---------------------------------------------------------------------------
// Pointwise nonlinearities and structure ops
// ---------------------------------------------------------------------------

pub fn relu_forward(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    for v in y.data.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    y
}

/// `activated` is the relu output (its positivity encodes the mask).
pub fn relu_backward(activated: &Tensor, dy: &Tensor) -> Tensor {
    let mut dx = dy.clone();
    for (d, &a) in dx.data.iter_mut().zip(&activated.data) {
        if a <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}

/// 2x2 max pooling; rejects odd spatial dims. Returns the pooled tensor and
/// per-cell argmax (index into the input plane, ties to the first in
/// row-major order).
pub fn maxpool2x2_forward(x: &Tensor) -> Result<(Tensor, Vec<u32>)> {
    if x.h % 2 != 0 || x.w % 2 != 0 {
        return Err(Error::OddSpatialDims { h: x.h, w: x.w });
    }
    let (oh, ow) = (x.h / 2, x.w / 2);
    let mut y = Tensor::zeros(x.n, x.c, oh, ow);
    let mut argmax = vec![0u32; x.n * x.c * oh * ow];
    for ni in 0..x.n {
        for c in 0..x.c {
            let src = x.plane(ni, c);
            let dst = y.plane_mut(ni, c);
            let abase = (ni * x.c + c) * oh * ow;
            for ry in 0..oh {
                for rx in 0..ow {
                    let mut best_idx = (2 * ry) * x.w + 2 * rx;
                    let mut best = src[best_idx];
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = (2 * ry + dy) * x.w + 2 * rx + dx;
                        if src[idx] > best {
                            best = src[idx];
                            best_idx = idx;
                        }
                    }
                    dst[ry * ow + rx] = best;
                    argmax[abase + ry * ow + rx] = best_idx as u32;
                }
            }
        }
    }
    Ok((y, argmax))
}

pub fn maxpool2x2_backward(argmax: &[u32], dy: &Tensor, in_h: usize, in_w: usize) -> Tensor {
    let mut dx = Tensor::zeros(dy.n, dy.c, in_h, in_w);
    let op = dy.plane_len();
    for ni in 0..dy.n {
        for c in 0..dy.c {
            let g = dy.plane(ni, c);
            let abase = (ni * dy.c + c) * op;
            let dst = dx.plane_mut(ni, c);
            for (i, &gv) in g.iter().enumerate() {
                dst[argmax[abase + i] as usize] += gv;
            }
        }
    }
    dx
}

/// Nearest-neighbor 2x upsampling.
pub fn upsample2x_forward(x: &Tensor) -> Tensor {
    let (oh, ow) = (x.h * 2, x.w * 2);
    let mut y = Tensor::zeros(x.n, x.c, oh, ow);
    for ni in 0..x.n {
        for c in 0..x.c {
            let src = x.plane(ni, c);
            let dst = y.plane_mut(ni, c);
            for ry in 0..x.h {
                for rx in 0..x.w {
                    let v = src[ry * x.w + rx];
                    let base = (2 * ry) * ow + 2 * rx;
                    dst[base] = v;
                    dst[base + 1] = v;
                    dst[base + ow] = v;
                    dst[base + ow + 1] = v;
                }
            }
        }
    }
    y
}

pub fn upsample2x_backward(dy: &Tensor) -> Tensor {
    let (oh, ow) = (dy.h / 2, dy.w / 2);
    let mut dx = Tensor::zeros(dy.n, dy.c, oh, ow);
    for ni in 0..dy.n {
        for c in 0..dy.c {
            let g = dy.plane(ni, c);
            let dst = dx.plane_mut(ni, c);
            for ry in 0..oh {
                for rx in 0..ow {
                    let base = (2 * ry) * dy.w + 2 * rx;
                    dst[ry * ow + rx] = g[base] + g[base + 1] + g[base + dy.w] + g[base + dy.w + 1];
                }
            }
        }
    }
    dx
}

/// Element-wise residual addition.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(format!("add: {:?} vs {:?}", a.shape(), b.shape())));
    }
    let mut y = a.clone();
    for (d, &s) in y.data.iter_mut().zip(&b.data) {
        *d += s;
    }
    Ok(y)
}

/// Inverted dropout: active only in training; kept units scale by
/// 1/(1-rate). Returns output and the multiplier mask for backward.
pub fn dropout_forward(x: &Tensor, rate: f32, rng: &mut ChaCha8Rng) -> (Tensor, Vec<f32>) {
    if rate <= 0.0 {
        return (x.clone(), vec![1.0; x.len()]);
    }
    let scale = 1.0 / (1.0 - rate);
    let mut y = x.clone();
    let mut mask = vec![0f32; x.len()];
    for (m, v) in mask.iter_mut().zip(y.data.iter_mut()) {
        if rng.gen::<f32>() >= rate {
            *m = scale;
            *v *= scale;
        } else {
            *m = 0.0;
            *v = 0.0;
        }
    }
    (y, mask)
}

pub fn dropout_backward(mask: &[f32], dy: &Tensor) -> Tensor {
    let mut dx = dy.clone();
    for (d, &m) in dx.data.iter_mut().zip(mask) {
        *d *= m;
    }
    dx
}

/// Channel softmax with the usual max-shift for stability.
pub fn softmax_channels(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    let p = x.plane_len();
    for ni in 0..x.n {
        let base = ni * x.c * p;
        for px in 0..p {
            let mut maxv = f32::NEG_INFINITY;
            for c in 0..x.c {
                maxv = maxv.max(y.data[base + c * p + px]);
            }
            let mut sum = 0f32;
            for c in 0..x.c {
                let e = (y.data[base + c * p + px] - maxv).exp();
                y.data[base + c * p + px] = e;
                sum += e;
            }
            let inv = 1.0 / sum;
            for c in 0..x.c {
                y.data[base + c * p + px] *= inv;
            }
        }
    }
    y.debug_assert_finite("softmax");
    y
}

/// Probability floor applied inside the log, mirroring common framework
/// epsilons; keeps the loss finite for confident mistakes.
pub const CE_EPSILON: f32 = 1e-7;

/// Mean per-pixel categorical cross-entropy, accumulated in f64.
pub fn cross_entropy_loss(probs: &Tensor, labels: &Tensor) -> Result<f64> {
    if !probs.same_shape(labels) {
        return Err(Error::ShapeMismatch(format!(
            "loss: {:?} vs {:?}",
            probs.shape(),
            labels.shape()
        )));
    }
    let p = probs.plane_len();
    let mut acc = 0f64;
    for ni in 0..probs.n {
        let base = ni * probs.c * p;
        for px in 0..p {
            for c in 0..probs.c {
                let y = labels.data[base + c * p + px];
                if y > 0.0 {
                    let q = probs.data[base + c * p + px].max(CE_EPSILON).min(1.0);
                    acc -= (y as f64) * (q as f64).ln();
                }
            }
        }
    }
    Ok(acc / (probs.n * p) as f64)
}

/// Fused softmax + cross-entropy gradient at the logits: (p - y) / pixels.
pub fn softmax_ce_backward(probs: &Tensor, labels: &Tensor) -> Tensor {
    let mut d = probs.clone();
    let scale = 1.0 / (probs.n * probs.plane_len()) as f32;
    for (g, &y) in d.data.iter_mut().zip(&labels.data) {
        *g = (*g - y) * scale;
    }
    d
}
