//! Fixed-order reductions shared by every layer.

use crate::scalar::Real;

const LANES: usize = 8;

#[inline]
fn fold_lanes<T: Real>(acc: &[T; LANES], tail: T) -> T {
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Dot product with eight interleaved accumulators.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail += *x * *y;
    }
    fold_lanes(&acc, tail)
}

/// Four dot products of `x` against four rows; each result is bit-identical
/// to [`dot`] of that row with `x`.
#[inline]
pub fn dot4<T: Real>(rows: [&[T]; 4], x: &[T]) -> [T; 4] {
    let n = x.len();
    let mut acc = [[T::zero(); LANES]; 4];
    let full = n - n % LANES;
    let mut i = 0;
    while i < full {
        let xs = &x[i..i + LANES];
        for (r, row) in rows.iter().enumerate() {
            let ws = &row[i..i + LANES];
            for l in 0..LANES {
                acc[r][l] += ws[l] * xs[l];
            }
        }
        i += LANES;
    }
    let mut out = [T::zero(); 4];
    for (r, row) in rows.iter().enumerate() {
        let mut tail = T::zero();
        for j in full..n {
            tail += row[j] * x[j];
        }
        out[r] = fold_lanes(&acc[r], tail);
    }
    out
}

/// `y += alpha · x`.
#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// `y[r, o] = b[o] + w[o, :] · x[r, :]` for `rows` inputs of width `inp`.
pub fn linear<T: Real>(x: &[T], rows: usize, inp: usize, w: &[T], b: &[T], y: &mut [T]) {
    let out = b.len();
    debug_assert_eq!(x.len(), rows * inp);
    debug_assert_eq!(w.len(), out * inp);
    debug_assert_eq!(y.len(), rows * out);
    for r in 0..rows {
        let xr = &x[r * inp..(r + 1) * inp];
        let yr = &mut y[r * out..(r + 1) * out];
        let mut o = 0;
        while o + 4 <= out {
            let d = dot4(
                [
                    &w[o * inp..(o + 1) * inp],
                    &w[(o + 1) * inp..(o + 2) * inp],
                    &w[(o + 2) * inp..(o + 3) * inp],
                    &w[(o + 3) * inp..(o + 4) * inp],
                ],
                xr,
            );
            for k in 0..4 {
                yr[o + k] = b[o + k] + d[k];
            }
            o += 4;
        }
        while o < out {
            yr[o] = b[o] + dot(&w[o * inp..(o + 1) * inp], xr);
            o += 1;
        }
    }
}

/// Backward of [`linear`]: accumulates `gw`, `gb` and, when given, writes
/// the input gradient `gx` (overwritten).
pub fn linear_backward<T: Real>(
    x: &[T],
    rows: usize,
    inp: usize,
    w: &[T],
    gy: &[T],
    gw: &mut [T],
    gb: &mut [T],
    gx: Option<&mut [T]>,
) {
    let out = gb.len();
    for r in 0..rows {
        let xr = &x[r * inp..(r + 1) * inp];
        let gr = &gy[r * out..(r + 1) * out];
        for o in 0..out {
            let g = gr[o];
            if g != T::zero() {
                axpy(g, xr, &mut gw[o * inp..(o + 1) * inp]);
                gb[o] += g;
            }
        }
    }
    if let Some(gx) = gx {
        gx.iter_mut().for_each(|v| *v = T::zero());
        for r in 0..rows {
            let gr = &gy[r * out..(r + 1) * out];
            let gxr = &mut gx[r * inp..(r + 1) * inp];
            for o in 0..out {
                let g = gr[o];
                if g != T::zero() {
                    axpy(g, &w[o * inp..(o + 1) * inp], gxr);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..37).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..37).map(|i| (i as f64 * 0.11).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn dot4_is_bitwise_dot() {
        for n in [1usize, 7, 8, 9, 37, 128] {
            let rows: Vec<Vec<f64>> = (0..4)
                .map(|r| (0..n).map(|i| ((i * 7 + r * 3) as f64).sin()).collect())
                .collect();
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
            let d = dot4([&rows[0], &rows[1], &rows[2], &rows[3]], &x);
            for r in 0..4 {
                assert_eq!(d[r].to_bits(), dot(&rows[r], &x).to_bits());
            }
        }
    }
}
