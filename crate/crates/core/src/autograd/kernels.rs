//! Plain slice kernels shared by the tape ops and the incremental decoder.
//!
//! Keeping one implementation of each primitive is what makes the
//! incremental and replayed forward passes agree to rounding error.

pub const RMS_EPS: f64 = 1e-10;
pub const ROPE_BASE: f64 = 10_000.0;

/// `out[r×c] = a[r×k] · b[k×c]`.
pub fn matmul(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        let orow = &mut out[i * c..(i + 1) * c];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * c..(p + 1) * c];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `out[r×c] = a[r×k] · b[c×k]ᵀ`.
pub fn matmul_nt(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..c {
            out[i * c + j] = dot(arow, &b[j * k..(j + 1) * k]);
        }
    }
    out
}

/// `out[k×c] = a[r×k]ᵀ · b[r×c]`.
pub fn matmul_tn(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * c];
    for i in 0..r {
        let brow = &b[i * c..(i + 1) * c];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[p * c..(p + 1) * c];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// Row vector times matrix: `x[k] · w[k×c]`.
pub fn vecmat(x: &[f64], w: &[f64], c: usize) -> Vec<f64> {
    matmul(x, w, 1, x.len(), c)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable in-place softmax of one row.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Softmax over the entries where `visible` is true; hidden entries get 0.
pub fn masked_softmax_in_place(row: &mut [f64], visible: &[bool]) {
    let max = row
        .iter()
        .zip(visible)
        .filter(|(_, &m)| m)
        .map(|(v, _)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (v, &m) in row.iter_mut().zip(visible) {
        if m {
            *v = (*v - max).exp();
            total += *v;
        } else {
            *v = 0.0;
        }
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

pub fn logsumexp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Reciprocal RMS of one row.
pub fn inv_rms(row: &[f64]) -> f64 {
    let ms = row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64;
    1.0 / (ms + RMS_EPS).sqrt()
}

pub fn rmsnorm_row(row: &[f64], weight: &[f64]) -> Vec<f64> {
    let r = inv_rms(row);
    row.iter().zip(weight).map(|(x, w)| x * r * w).collect()
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

/// Rotation angle for pair `i` of a head of width `head_dim` at `position`.
pub fn rope_angle(position: usize, i: usize, head_dim: usize) -> f64 {
    let freq = ROPE_BASE.powf(-2.0 * i as f64 / head_dim as f64);
    position as f64 * freq
}

/// Rotary embedding applied in place to one row holding several heads.
/// `sign = -1.0` applies the inverse rotation (used by the backward pass).
pub fn rope_row(row: &mut [f64], position: usize, head_dim: usize, sign: f64) {
    for head in row.chunks_mut(head_dim) {
        for i in 0..head_dim / 2 {
            let theta = sign * rope_angle(position, i, head_dim);
            let (s, c) = theta.sin_cos();
            let x0 = head[2 * i];
            let x1 = head[2 * i + 1];
            head[2 * i] = x0 * c - x1 * s;
            head[2 * i + 1] = x0 * s + x1 * c;
        }
    }
}
