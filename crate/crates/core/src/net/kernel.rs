//! Dense f64 kernels for batched affine layers.
//!
//! All three products reduce to one routine,
//! `out[i, :] = init[i, :] + sum_k a[i, k] * b[k, :]`, in which every output
//! element is accumulated in ascending `k` from its initial value. A sample
//! therefore gives bit-identical results alone or inside any batch, and
//! identical to a naive sequential loop. Zero multipliers are skipped
//! (adding `0 * w` to a finite sum never changes its value), which matters
//! because rectifier activations and their gradients are about half zeros.
//!
//! Each row of `a` is compressed to its nonzero entries once; the output is
//! then produced one column panel at a time, the panel held in registers
//! and the matching slab of `b` staying in cache across rows. The AVX2 and
//! AVX-512 variants compile the same scalar code with wider panels. Rust
//! never contracts `a * b + c` into a fused multiply-add, so every path
//! rounds identically.

#[derive(Clone, Copy)]
enum Init<'a> {
    Zero,
    /// The same row added to every output row.
    Broadcast(&'a [f64]),
    /// Accumulate onto what `out` already holds.
    Existing,
}

/// The nonzero entries of every row of `a`, in ascending `k`.
struct Sparse {
    starts: Vec<usize>,
    ks: Vec<usize>,
    xs: Vec<f64>,
}

impl Sparse {
    fn new(a: &[f64], m: usize, kdim: usize) -> Self {
        let mut s = Sparse {
            starts: Vec::with_capacity(m + 1),
            ks: Vec::new(),
            xs: Vec::new(),
        };
        s.starts.push(0);
        for row in a.chunks_exact(kdim).take(m) {
            for (k, &x) in row.iter().enumerate() {
                if x != 0.0 {
                    s.ks.push(k);
                    s.xs.push(x);
                }
            }
            s.starts.push(s.ks.len());
        }
        s
    }

    fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.starts[i], self.starts[i + 1]);
        (&self.ks[lo..hi], &self.xs[lo..hi])
    }
}

#[inline(always)]
fn initial(init: Init<'_>, out: &[f64], i: usize, n: usize, c: usize) -> f64 {
    match init {
        Init::Zero => 0.0,
        Init::Broadcast(bias) => bias[c],
        Init::Existing => out[i * n + c],
    }
}

/// Columns `c0..c0 + C` of every output row, accumulated in registers.
/// Returns the first column not covered.
#[inline(always)]
fn panels<const C: usize>(
    a: &Sparse,
    m: usize,
    b: &[f64],
    n: usize,
    init: Init<'_>,
    out: &mut [f64],
    mut c0: usize,
) -> usize {
    while c0 + C <= n {
        for i in 0..m {
            let mut acc = [0.0; C];
            for (c, v) in acc.iter_mut().enumerate() {
                *v = initial(init, out, i, n, c0 + c);
            }
            let (ks, xs) = a.row(i);
            for (&k, &x) in ks.iter().zip(xs) {
                let w: &[f64; C] = b[k * n + c0..k * n + c0 + C].try_into().expect("panel width");
                for c in 0..C {
                    acc[c] += x * w[c];
                }
            }
            out[i * n + c0..i * n + c0 + C].copy_from_slice(&acc);
        }
        c0 += C;
    }
    c0
}

#[inline(always)]
fn gemm_impl<const C: usize>(a: &[f64], m: usize, kdim: usize, b: &[f64], n: usize, init: Init<'_>, out: &mut [f64]) {
    let sparse = Sparse::new(a, m, kdim);
    let c0 = panels::<C>(&sparse, m, b, n, init, out, 0);
    let c0 = panels::<4>(&sparse, m, b, n, init, out, c0);
    for i in 0..m {
        let (ks, xs) = sparse.row(i);
        for c in c0..n {
            let mut s = initial(init, out, i, n, c);
            for (&k, &x) in ks.iter().zip(xs) {
                s += x * b[k * n + c];
            }
            out[i * n + c] = s;
        }
    }
}

#[cfg(target_arch = "x86_64")]
mod wide {
    use super::{gemm_impl, Init};

    #[target_feature(enable = "avx512f")]
    pub(super) unsafe fn gemm512(
        a: &[f64],
        m: usize,
        kdim: usize,
        b: &[f64],
        n: usize,
        init: Init<'_>,
        out: &mut [f64],
    ) {
        gemm_impl::<48>(a, m, kdim, b, n, init, out)
    }

    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn gemm256(
        a: &[f64],
        m: usize,
        kdim: usize,
        b: &[f64],
        n: usize,
        init: Init<'_>,
        out: &mut [f64],
    ) {
        gemm_impl::<16>(a, m, kdim, b, n, init, out)
    }
}

fn gemm(a: &[f64], m: usize, kdim: usize, b: &[f64], n: usize, init: Init<'_>, out: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: the CPU supports AVX-512F, checked at runtime.
            unsafe { wide::gemm512(a, m, kdim, b, n, init, out) };
            return;
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked at runtime.
            unsafe { wide::gemm256(a, m, kdim, b, n, init, out) };
            return;
        }
    }
    gemm_impl::<8>(a, m, kdim, b, n, init, out)
}

/// `out[r, :] = bias + sum_k x[r, k] * w[k, :]` with `w` stored `n_in x n_out`.
pub(crate) fn affine(x: &[f64], rows: usize, n_in: usize, w: &[f64], n_out: usize, bias: &[f64], out: &mut [f64]) {
    assert_eq!(x.len(), rows * n_in);
    assert_eq!(w.len(), n_in * n_out);
    assert_eq!(bias.len(), n_out);
    assert!(out.len() >= rows * n_out);
    gemm(x, rows, n_in, w, n_out, Init::Broadcast(bias), out)
}

/// `dw[k, :] += sum_r x[r, k] * delta[r, :]`.
pub(crate) fn accumulate_outer(x: &[f64], rows: usize, n_in: usize, delta: &[f64], n_out: usize, dw: &mut [f64]) {
    assert_eq!(x.len(), rows * n_in);
    assert_eq!(delta.len(), rows * n_out);
    assert_eq!(dw.len(), n_in * n_out);
    let xt = transpose(x, rows, n_in);
    gemm(&xt, n_in, rows, delta, n_out, Init::Existing, dw)
}

/// `dx[r, :] = sum_j delta[r, j] * wt[j, :]` with `wt` the transposed
/// weights, stored `n_out x n_in`.
pub(crate) fn backprop_input(delta: &[f64], rows: usize, n_out: usize, wt: &[f64], n_in: usize, dx: &mut [f64]) {
    assert_eq!(delta.len(), rows * n_out);
    assert_eq!(wt.len(), n_in * n_out);
    assert!(dx.len() >= rows * n_in);
    gemm(delta, rows, n_out, wt, n_in, Init::Zero, dx)
}

pub(crate) fn transpose(w: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = w[r * cols + c];
        }
    }
    t
}
