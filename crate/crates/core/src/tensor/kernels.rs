// Inner loops for the tape. Written with four independent accumulators so the
// optimizer can vectorize them without fast-math.

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out[m×n] = a[m×k] · b[k×n]`
pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    if n == 1 {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&a[i * k..(i + 1) * k], b);
        }
        return out;
    }
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            axpy(a[i * k + p], &b[p * n..(p + 1) * n], row);
        }
    }
    out
}

/// `ga[m×k] += g[m×n] · bᵀ` where `b` is k×n.
pub(crate) fn matmul_grad_left(g: &[f64], b: &[f64], ga: &mut [f64], m: usize, k: usize, n: usize) {
    if n == 1 {
        for i in 0..m {
            axpy(g[i], b, &mut ga[i * k..(i + 1) * k]);
        }
        return;
    }
    for i in 0..m {
        let gi = &g[i * n..(i + 1) * n];
        for p in 0..k {
            ga[i * k + p] += dot(gi, &b[p * n..(p + 1) * n]);
        }
    }
}

/// `gb[k×n] += aᵀ · g` where `a` is m×k and `g` is m×n.
pub(crate) fn matmul_grad_right(a: &[f64], g: &[f64], gb: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let ai = &a[i * k..(i + 1) * k];
        let gi = &g[i * n..(i + 1) * n];
        if n == 1 {
            axpy(gi[0], ai, gb);
        } else {
            for p in 0..k {
                axpy(ai[p], gi, &mut gb[p * n..(p + 1) * n]);
            }
        }
    }
}
