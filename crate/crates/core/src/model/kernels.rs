//! Dense f64 kernels shared by the autodiff tape and cached inference.

/// Strided view of a row-major buffer region.
#[derive(Debug, Clone, Copy)]
pub(crate) struct View {
    pub off: usize,
    pub rs: isize,
    pub cs: isize,
}

impl View {
    pub fn rows(off: usize, cols: usize) -> Self {
        View { off, rs: cols as isize, cs: 1 }
    }

    /// Transposed view of a row-major `cols`-wide region.
    pub fn t(off: usize, cols: usize) -> Self {
        View { off, rs: 1, cs: cols as isize }
    }

    pub fn strided(off: usize, rs: usize) -> Self {
        View { off, rs: rs as isize, cs: 1 }
    }

    pub fn strided_t(off: usize, rs: usize) -> Self {
        View { off, rs: 1, cs: rs as isize }
    }

    fn last(&self, rows: usize, cols: usize) -> usize {
        let r = (rows.saturating_sub(1)) as isize * self.rs;
        let c = (cols.saturating_sub(1)) as isize * self.cs;
        (self.off as isize + r + c) as usize
    }
}

/// `C = alpha·A·B + beta·C` with `A: m×k`, `B: k×n`, `C: m×n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    av: View,
    b: &[f64],
    bv: View,
    beta: f64,
    c: &mut [f64],
    cv: View,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || (av.last(m, k) < a.len() && bv.last(k, n) < b.len()), "gemm operand out of bounds");
    assert!(cv.last(m, n) < c.len(), "gemm output out of bounds");
    // SAFETY: every accessed element lies inside the slices (checked above) and
    // `c` does not alias `a` or `b` because it is borrowed mutably.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr().add(av.off),
            av.rs,
            av.cs,
            b.as_ptr().add(bv.off),
            bv.rs,
            bv.cs,
            beta,
            c.as_mut_ptr().add(cv.off),
            cv.rs,
            cv.cs,
        );
    }
}

/// `x[rows×k] · w[k×n] (+ b[n])`.
pub(crate) fn linear(x: &[f64], rows: usize, k: usize, w: &[f64], n: usize, b: Option<&[f64]>) -> Vec<f64> {
    let mut out = vec![0.0; rows * n];
    if let Some(b) = b {
        for r in 0..rows {
            out[r * n..(r + 1) * n].copy_from_slice(b);
        }
    }
    let beta = if b.is_some() { 1.0 } else { 0.0 };
    gemm(rows, k, n, 1.0, x, View::rows(0, k), w, View::rows(0, n), beta, &mut out, View::rows(0, n));
    out
}

pub(crate) const LN_EPS: f64 = 1e-5;

/// Row-wise layer norm. Returns (output, normalized input, 1/std per row).
pub(crate) fn layer_norm(x: &[f64], cols: usize, g: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let rows = x.len() / cols;
    let mut y = vec![0.0; x.len()];
    let mut xhat = vec![0.0; x.len()];
    let mut rstd = vec![0.0; rows];
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        let mean = row.iter().sum::<f64>() / cols as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        rstd[r] = rs;
        for c in 0..cols {
            let h = (row[c] - mean) * rs;
            xhat[r * cols + c] = h;
            y[r * cols + c] = h * g[c] + b[c];
        }
    }
    (y, xhat, rstd)
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// In-place numerically stable softmax of the first `valid` entries; the
/// rest are zeroed.
pub(crate) fn softmax_prefix(row: &mut [f64], valid: usize) {
    let max = row[..valid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in &mut row[..valid] {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in &mut row[..valid] {
        *v /= sum;
    }
    for v in &mut row[valid..] {
        *v = 0.0;
    }
}

/// Shape and masking of a multi-head attention call.
#[derive(Debug, Clone)]
pub(crate) struct AttnSpec {
    pub batch: usize,
    pub lq: usize,
    pub lk: usize,
    pub heads: usize,
    pub width: usize,
    pub causal: bool,
    /// Number of valid keys per batch element (`None`: all valid).
    pub key_lens: Option<Vec<usize>>,
}

impl AttnSpec {
    fn valid_keys(&self, b: usize, i: usize) -> usize {
        let mut n = self.key_lens.as_ref().map_or(self.lk, |l| l[b]);
        if self.causal {
            n = n.min(i + 1);
        }
        n.max(1)
    }
}

/// Scaled dot-product attention over `[batch·lq, width]` queries and
/// `[batch·lk, width]` keys/values. Returns (output, probabilities).
pub(crate) fn attention_forward(q: &[f64], k: &[f64], v: &[f64], s: &AttnSpec) -> (Vec<f64>, Vec<f64>) {
    let dh = s.width / s.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut probs = vec![0.0; s.batch * s.heads * s.lq * s.lk];
    let mut out = vec![0.0; s.batch * s.lq * s.width];
    for b in 0..s.batch {
        for h in 0..s.heads {
            let p_off = (b * s.heads + h) * s.lq * s.lk;
            let q_off = b * s.lq * s.width + h * dh;
            let k_off = b * s.lk * s.width + h * dh;
            gemm(
                s.lq,
                dh,
                s.lk,
                scale,
                q,
                View::strided(q_off, s.width),
                k,
                View::strided_t(k_off, s.width),
                0.0,
                &mut probs,
                View::rows(p_off, s.lk),
            );
            for i in 0..s.lq {
                let row = &mut probs[p_off + i * s.lk..p_off + (i + 1) * s.lk];
                softmax_prefix(row, s.valid_keys(b, i));
            }
            gemm(
                s.lq,
                s.lk,
                dh,
                1.0,
                &probs,
                View::rows(p_off, s.lk),
                v,
                View::strided(k_off, s.width),
                0.0,
                &mut out,
                View::strided(q_off, s.width),
            );
        }
    }
    (out, probs)
}

/// Gradients of attention w.r.t. (q, k, v), accumulated into the given buffers.
#[allow(clippy::too_many_arguments)]
pub(crate) fn attention_backward(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    probs: &[f64],
    dout: &[f64],
    s: &AttnSpec,
    dq: &mut [f64],
    dk: &mut [f64],
    dv: &mut [f64],
) {
    let dh = s.width / s.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dp = vec![0.0; s.lq * s.lk];
    for b in 0..s.batch {
        for h in 0..s.heads {
            let p_off = (b * s.heads + h) * s.lq * s.lk;
            let q_off = b * s.lq * s.width + h * dh;
            let k_off = b * s.lk * s.width + h * dh;
            // dV += Pᵀ dO
            gemm(
                s.lk,
                s.lq,
                dh,
                1.0,
                probs,
                View::t(p_off, s.lk),
                dout,
                View::strided(q_off, s.width),
                1.0,
                dv,
                View::strided(k_off, s.width),
            );
            // dP = dO Vᵀ
            gemm(
                s.lq,
                dh,
                s.lk,
                1.0,
                dout,
                View::strided(q_off, s.width),
                v,
                View::strided_t(k_off, s.width),
                0.0,
                &mut dp,
                View::rows(0, s.lk),
            );
            // dS = P ⊙ (dP − rowsum(P ⊙ dP))
            for i in 0..s.lq {
                let p = &probs[p_off + i * s.lk..p_off + (i + 1) * s.lk];
                let d = &mut dp[i * s.lk..(i + 1) * s.lk];
                let dot: f64 = p.iter().zip(d.iter()).map(|(a, b)| a * b).sum();
                for (dv, pv) in d.iter_mut().zip(p) {
                    *dv = pv * (*dv - dot);
                }
            }
            // dQ += scale·dS K ; dK += scale·dSᵀ Q
            gemm(
                s.lq,
                s.lk,
                dh,
                scale,
                &dp,
                View::rows(0, s.lk),
                k,
                View::strided(k_off, s.width),
                1.0,
                dq,
                View::strided(q_off, s.width),
            );
            gemm(
                s.lk,
                s.lq,
                dh,
                scale,
                &dp,
                View::t(0, s.lk),
                q,
                View::strided(q_off, s.width),
                1.0,
                dk,
                View::strided(k_off, s.width),
            );
        }
    }
}

/// Fixed sinusoidal position table `[len, width]`.
pub(crate) fn positional_table(len: usize, width: usize) -> Vec<f64> {
    let mut t = vec![0.0; len * width];
    for pos in 0..len {
        for i in 0..width {
            let pair = (i / 2) as f64;
            let angle = pos as f64 / 10_000f64.powf(2.0 * pair / width as f64);
            t[pos * width + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                c[i * n + j] = (0..k).map(|t| a[i * k + t] * b[t * n + j]).sum();
            }
        }
        c
    }

    #[test]
    fn linear_matches_naive_product() {
        let a: Vec<f64> = (0..12).map(|i| i as f64 * 0.5 - 2.0).collect();
        let b: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let got = linear(&a, 3, 4, &b, 5, None);
        for (x, y) in got.iter().zip(naive(&a, &b, 3, 4, 5)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut row = vec![1000.0, 1001.0, -5.0, 7.0];
        softmax_prefix(&mut row, 3);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(row[3], 0.0);
    }

    #[test]
    fn gelu_derivative_matches_difference() {
        for x in [-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn causal_attention_ignores_future() {
        let s = AttnSpec { batch: 1, lq: 3, lk: 3, heads: 1, width: 2, causal: true, key_lens: None };
        let q = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let k = q.clone();
        let mut v = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let (o1, p) = attention_forward(&q, &k, &v, &s);
        assert_eq!(&p[1..3], &[0.0, 0.0]);
        v[4] = 100.0;
        let (o2, _) = attention_forward(&q, &k, &v, &s);
        assert_eq!(&o1[..4], &o2[..4]);
    }
}
