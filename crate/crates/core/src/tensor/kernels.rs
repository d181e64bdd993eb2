//! Dense kernels behind the graph operations.
//!
//! Matrix products dispatch to `matrixmultiply`'s single-threaded GEMM, which
//! uses a fixed blocking schedule per problem size, so results are
//! bit-identical run to run. The image-space helpers (im2col/col2im) are
//! plain loops with a fixed accumulation order.

use crate::scalar::Scalar;

/// `c += a · b` with `a` of extent (m,k), `b` of extent (k,n), all row-major.
pub fn matmul_nn_acc<F: Scalar>(c: &mut [F], a: &[F], b: &[F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    F::gemm_acc(m, k, n, a, [k as isize, 1], b, [n as isize, 1], c);
}

/// `c += a · bᵀ` with `a` of extent (m,k), `b` stored row-major as (n,k).
pub fn matmul_nt_acc<F: Scalar>(c: &mut [F], a: &[F], b: &[F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    F::gemm_acc(m, k, n, a, [k as isize, 1], b, [1, k as isize], c);
}

/// `c += aᵀ · b` with `a` stored row-major as (k,m), `b` as (k,n).
pub fn matmul_tn_acc<F: Scalar>(c: &mut [F], a: &[F], b: &[F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    F::gemm_acc(m, k, n, a, [1, m as isize], b, [n as isize, 1], c);
}

/// Column sums: `out[j] += sum_i g[i, j]` for `g` of extent (m,n).
pub fn col_sums_acc<F: Scalar>(out: &mut [F], g: &[F], n: usize) {
    debug_assert_eq!(out.len(), n);
    for row in g.chunks_exact(n) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += *v;
        }
    }
}

/// Gathers sliding-window patches of `src` (extent (c, h, w)) into a
/// (c·kh·kw, oh·ow) matrix; out-of-bounds taps read zero.
#[allow(clippy::too_many_arguments)]
pub fn im2col<F: Scalar>(
    col: &mut [F],
    src: &[F],
    ch: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) {
    debug_assert_eq!(col.len(), ch * kh * kw * oh * ow);
    debug_assert_eq!(src.len(), ch * h * w);
    let mut r = 0;
    for c in 0..ch {
        let plane = &src[c * h * w..(c + 1) * h * w];
        for di in 0..kh {
            for dj in 0..kw {
                let dst = &mut col[r * oh * ow..(r + 1) * oh * ow];
                for oi in 0..oh {
                    let si = (oi * stride + di) as isize - pad as isize;
                    let dst_row = &mut dst[oi * ow..(oi + 1) * ow];
                    if si < 0 || si >= h as isize {
                        dst_row.iter_mut().for_each(|v| *v = F::zero());
                        continue;
                    }
                    let src_row = &plane[si as usize * w..(si as usize + 1) * w];
                    for (oj, v) in dst_row.iter_mut().enumerate() {
                        let sj = (oj * stride + dj) as isize - pad as isize;
                        *v = if sj < 0 || sj >= w as isize {
                            F::zero()
                        } else {
                            src_row[sj as usize]
                        };
                    }
                }
                r += 1;
            }
        }
    }
}

/// Scatter-add inverse of [`im2col`]: `img[c, oi·s−p+di, oj·s−p+dj] += col[...]`.
#[allow(clippy::too_many_arguments)]
pub fn col2im_acc<F: Scalar>(
    img: &mut [F],
    col: &[F],
    ch: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) {
    debug_assert_eq!(col.len(), ch * kh * kw * oh * ow);
    debug_assert_eq!(img.len(), ch * h * w);
    let mut r = 0;
    for c in 0..ch {
        let plane = &mut img[c * h * w..(c + 1) * h * w];
        for di in 0..kh {
            for dj in 0..kw {
                let src = &col[r * oh * ow..(r + 1) * oh * ow];
                for oi in 0..oh {
                    let ti = (oi * stride + di) as isize - pad as isize;
                    if ti < 0 || ti >= h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[ti as usize * w..(ti as usize + 1) * w];
                    let src_row = &src[oi * ow..(oi + 1) * ow];
                    for (oj, v) in src_row.iter().enumerate() {
                        let tj = (oj * stride + dj) as isize - pad as isize;
                        if tj >= 0 && tj < w as isize {
                            dst_row[tj as usize] += *v;
                        }
                    }
                }
                r += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    fn arange(len: usize) -> Vec<f64> {
        (0..len).map(|v| (v as f64 * 0.37).sin()).collect()
    }

    #[test]
    fn matmul_variants_agree_with_naive() {
        let (m, k, n) = (7, 19, 11);
        let a = arange(m * k);
        let b = arange(k * n);
        let want = naive_nn(&a, &b, m, k, n);

        let mut c = vec![0.0; m * n];
        matmul_nn_acc(&mut c, &a, &b, m, k, n);
        for (x, y) in c.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }

        // b transposed: bt is (n,k)
        let mut bt = vec![0.0; n * k];
        for p in 0..k {
            for j in 0..n {
                bt[j * k + p] = b[p * n + j];
            }
        }
        let mut c = vec![0.0; m * n];
        matmul_nt_acc(&mut c, &a, &bt, m, k, n);
        for (x, y) in c.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }

        // a transposed: at is (k,m)
        let mut at = vec![0.0; k * m];
        for i in 0..m {
            for p in 0..k {
                at[p * m + i] = a[i * k + p];
            }
        }
        let mut c = vec![0.0; m * n];
        matmul_tn_acc(&mut c, &at, &b, m, k, n);
        for (x, y) in c.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_is_deterministic_across_repeats() {
        let (m, k, n) = (96, 128, 96);
        let a = arange(m * k);
        let b = arange(k * n);
        let mut first = vec![0.0; m * n];
        matmul_nn_acc(&mut first, &a, &b, m, k, n);
        for _ in 0..3 {
            let mut again = vec![0.0; m * n];
            matmul_nn_acc(&mut again, &a, &b, m, k, n);
            assert_eq!(first, again);
        }
    }

    #[test]
    fn accumulate_semantics() {
        let a = vec![1.0, 2.0];
        let b = vec![3.0, 4.0];
        let mut c = vec![10.0];
        matmul_nn_acc(&mut c, &a, &b, 1, 2, 1);
        assert_eq!(c, vec![10.0 + 11.0]);
    }

    #[test]
    fn im2col_col2im_roundtrip_geometry() {
        // 1x1 kernel, stride 1, no pad: im2col is the identity layout.
        let src = arange(3 * 4 * 5);
        let mut col = vec![0.0; 3 * 4 * 5];
        im2col(&mut col, &src, 3, 4, 5, 1, 1, 1, 0, 4, 5);
        assert_eq!(col, src);

        let mut img = vec![0.0; 3 * 4 * 5];
        col2im_acc(&mut img, &col, 3, 4, 5, 1, 1, 1, 0, 4, 5);
        assert_eq!(img, src);
    }
}
