use rand::Rng;

use super::kernels::{axpy, linear};
use super::{check_len, glorot_uniform, sigmoid, NnError, Param, Tensor};
use crate::scalar::Real;

/// Intermediate values of one cell step needed by the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmStepCache<T> {
    /// `[h_prev, x]`.
    pub zin: Vec<T>,
    /// Activated gates `[i, f, o, c̃]`, each of width m.
    pub gates: Vec<T>,
    pub c_prev: Vec<T>,
    pub tanh_c: Vec<T>,
}

/// One cell step. `w` is `4m × (m+d)` with gate blocks `[i, f, o, c̃]`
/// acting on `[h_prev, x]`; `b` is `4m`.
pub fn lstm_cell_step<T: Real>(
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<(Vec<T>, Vec<T>, LstmStepCache<T>), NnError> {
    let m = h_prev.len();
    let d = x.len();
    check_len("lstm weight rows", 4 * m, w.shape[0])?;
    check_len("lstm weight cols", m + d, w.shape[1])?;
    check_len("lstm bias", 4 * m, b.len())?;
    check_len("lstm cell state", m, c_prev.len())?;
    let mut zin = Vec::with_capacity(m + d);
    zin.extend_from_slice(h_prev);
    zin.extend_from_slice(x);
    let mut gates = vec![T::zero(); 4 * m];
    linear(&zin, 1, m + d, &w.data, &b.data, &mut gates);
    let mut h = vec![T::zero(); m];
    let mut c = vec![T::zero(); m];
    let mut tanh_c = vec![T::zero(); m];
    activate(&mut gates, c_prev, &mut c, &mut tanh_c, &mut h);
    Ok((
        h,
        c,
        LstmStepCache {
            zin,
            gates,
            c_prev: c_prev.to_vec(),
            tanh_c,
        },
    ))
}

#[inline]
fn activate<T: Real>(gates: &mut [T], c_prev: &[T], c: &mut [T], tanh_c: &mut [T], h: &mut [T]) {
    let m = c.len();
    for g in &mut gates[..3 * m] {
        *g = sigmoid(*g);
    }
    for g in &mut gates[3 * m..] {
        *g = g.tanh();
    }
    for j in 0..m {
        let (i, f, o, cand) = (gates[j], gates[m + j], gates[2 * m + j], gates[3 * m + j]);
        c[j] = f * c_prev[j] + i * cand;
        tanh_c[j] = c[j].tanh();
        h[j] = tanh_c[j] * o;
    }
}

/// Cached forward state of `n` sequences of length `len`.
#[derive(Clone, Debug, Default)]
pub struct LstmCache<T> {
    pub n: usize,
    pub len: usize,
    zin: Vec<T>,
    gates: Vec<T>,
    c: Vec<T>,
    tanh_c: Vec<T>,
}

/// Single LSTM layer with zero initial state.
#[derive(Clone, Debug, PartialEq)]
pub struct Lstm<T> {
    pub w: Param<T>,
    pub b: Param<T>,
    input: usize,
    hidden: usize,
}

impl<T: Real> Lstm<T> {
    /// Glorot-uniform gate weights, zero biases except the forget gate (+1).
    pub fn new<R: Rng>(name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let cols = hidden + input;
        let w = glorot_uniform(rng, 4 * hidden * cols, cols, hidden);
        let mut b = vec![T::zero(); 4 * hidden];
        for v in &mut b[hidden..2 * hidden] {
            *v = T::one();
        }
        Self {
            w: Param::new(
                format!("{name}.w"),
                Tensor::from_vec(&[4 * hidden, cols], w),
            ),
            b: Param::new(format!("{name}.b"), Tensor::from_vec(&[4 * hidden], b)),
            input,
            hidden,
        }
    }

    pub fn input(&self) -> usize {
        self.input
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Runs `n` independent sequences (`xs` laid out `[n][len][d]`) and
    /// returns every hidden state, laid out `[n][len][m]`.
    pub fn forward(
        &self,
        xs: &[T],
        n: usize,
        len: usize,
        keep_cache: bool,
    ) -> (Vec<T>, LstmCache<T>) {
        let (m, d) = (self.hidden, self.input);
        let cols = m + d;
        assert_eq!(xs.len(), n * len * d, "lstm input length");
        let mut hs = vec![T::zero(); n * len * m];
        let mut cache = LstmCache {
            n,
            len,
            ..LstmCache::default()
        };
        if keep_cache {
            cache.zin = vec![T::zero(); n * len * cols];
            cache.gates = vec![T::zero(); n * len * 4 * m];
            cache.c = vec![T::zero(); n * len * m];
            cache.tanh_c = vec![T::zero(); n * len * m];
        }
        let mut zin = vec![T::zero(); cols];
        let mut gates = vec![T::zero(); 4 * m];
        let mut c_prev = vec![T::zero(); m];
        let mut c = vec![T::zero(); m];
        let mut tanh_c = vec![T::zero(); m];
        let mut h = vec![T::zero(); m];
        for s in 0..n {
            zin[..m].iter_mut().for_each(|v| *v = T::zero());
            c_prev.iter_mut().for_each(|v| *v = T::zero());
            for t in 0..len {
                let k = s * len + t;
                zin[m..].copy_from_slice(&xs[k * d..(k + 1) * d]);
                linear(
                    &zin,
                    1,
                    cols,
                    &self.w.value.data,
                    &self.b.value.data,
                    &mut gates,
                );
                activate(&mut gates, &c_prev, &mut c, &mut tanh_c, &mut h);
                if keep_cache {
                    cache.zin[k * cols..(k + 1) * cols].copy_from_slice(&zin);
                    cache.gates[k * 4 * m..(k + 1) * 4 * m].copy_from_slice(&gates);
                    cache.c[k * m..(k + 1) * m].copy_from_slice(&c);
                    cache.tanh_c[k * m..(k + 1) * m].copy_from_slice(&tanh_c);
                }
                hs[k * m..(k + 1) * m].copy_from_slice(&h);
                zin[..m].copy_from_slice(&h);
                std::mem::swap(&mut c_prev, &mut c);
            }
        }
        (hs, cache)
    }

    /// Backpropagation through time. `grad_hs` is the loss gradient with
    /// respect to every hidden state (`[n][len][m]`). Accumulates parameter
    /// gradients and returns the input gradient when `need_input` is set.
    pub fn backward(
        &mut self,
        cache: &LstmCache<T>,
        grad_hs: &[T],
        need_input: bool,
    ) -> Option<Vec<T>> {
        let (m, d) = (self.hidden, self.input);
        let cols = m + d;
        let (n, len) = (cache.n, cache.len);
        assert_eq!(grad_hs.len(), n * len * m, "lstm output gradient length");
        assert_eq!(cache.zin.len(), n * len * cols, "lstm cache missing");
        let mut gx = need_input.then(|| vec![T::zero(); n * len * d]);
        let w = &self.w.value.data;
        let gw = &mut self.w.grad.data;
        let gb = &mut self.b.grad.data;
        let mut dh_next = vec![T::zero(); m];
        let mut dc_next = vec![T::zero(); m];
        let mut dpre = vec![T::zero(); 4 * m];
        let mut dzin = vec![T::zero(); cols];
        let one = T::one();
        for s in 0..n {
            dh_next.iter_mut().for_each(|v| *v = T::zero());
            dc_next.iter_mut().for_each(|v| *v = T::zero());
            for t in (0..len).rev() {
                let k = s * len + t;
                let g = &cache.gates[k * 4 * m..(k + 1) * 4 * m];
                let tc = &cache.tanh_c[k * m..(k + 1) * m];
                let zin = &cache.zin[k * cols..(k + 1) * cols];
                for j in 0..m {
                    let (i, f, o, cand) = (g[j], g[m + j], g[2 * m + j], g[3 * m + j]);
                    let c_prev = if t > 0 {
                        cache.c[(k - 1) * m + j]
                    } else {
                        T::zero()
                    };
                    let dh = grad_hs[k * m + j] + dh_next[j];
                    let dc = dh * o * (one - tc[j] * tc[j]) + dc_next[j];
                    dpre[j] = dc * cand * i * (one - i);
                    dpre[m + j] = dc * c_prev * f * (one - f);
                    dpre[2 * m + j] = dh * tc[j] * o * (one - o);
                    dpre[3 * m + j] = dc * i * (one - cand * cand);
                    dc_next[j] = dc * f;
                }
                dzin.iter_mut().for_each(|v| *v = T::zero());
                for r in 0..4 * m {
                    let gr = dpre[r];
                    if gr != T::zero() {
                        axpy(gr, zin, &mut gw[r * cols..(r + 1) * cols]);
                        gb[r] += gr;
                        axpy(gr, &w[r * cols..(r + 1) * cols], &mut dzin);
                    }
                }
                dh_next.copy_from_slice(&dzin[..m]);
                if let Some(gx) = gx.as_mut() {
                    gx[k * d..(k + 1) * d].copy_from_slice(&dzin[m..]);
                }
            }
        }
        gx
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.w, &mut self.b]
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        vec![&self.w, &self.b]
    }
}
