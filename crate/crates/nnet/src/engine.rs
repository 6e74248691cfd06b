//! Forward pass, reverse-mode gradient and forward-over-reverse
//! Hessian-vector product for an [`Architecture`].
//!
//! Activations are stored channel-major as `(C, B, L)`. Each convolution is
//! one matrix product `Y(O × BL) = W(O × Ck) · Col(Ck × BL)` over an
//! im2col buffer.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::arch::{Architecture, ParamLayout, BN_EPS};
use crate::error::{shape, Result};
use crate::scalar::{gemm, Mat, Scalar};
use crate::tensor::Tensor;

/// Per-channel batch-norm statistics of every block, `(mean, var)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BnStats {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Compiled network: architecture, parameter layout and call counters.
#[derive(Debug)]
pub struct Network {
    arch: Architecture,
    layout: ParamLayout,
    grad_calls: AtomicU64,
    hvp_calls: AtomicU64,
}

impl Clone for Network {
    fn clone(&self) -> Self {
        Self {
            arch: self.arch.clone(),
            layout: self.layout.clone(),
            grad_calls: AtomicU64::new(self.grad_calls()),
            hvp_calls: AtomicU64::new(self.hvp_calls()),
        }
    }
}

/// Result of one pass; optional parts are filled on request.
struct Pass<T> {
    probs: Vec<T>,
    loss: T,
    grad: Vec<T>,
    hvp: Vec<T>,
    stats: Vec<(Vec<f64>, Vec<f64>)>,
}

struct BlockTape<T> {
    c_in: usize,
    len: usize,
    col: Vec<T>,
    col_d: Option<Vec<T>>,
    xhat: Vec<T>,
    xhat_d: Vec<T>,
    inv_std: Vec<T>,
    std_d: Vec<T>,
    mask: Vec<bool>,
    argmax: Vec<u32>,
}

fn im2col<T: Scalar>(x: &[T], c_in: usize, b: usize, l: usize, k: usize) -> Vec<T> {
    let n = b * l;
    let pad = (k / 2) as isize;
    let mut col = vec![T::zero(); c_in * k * n];
    for c in 0..c_in {
        for j in 0..k {
            let dst = &mut col[(c * k + j) * n..(c * k + j + 1) * n];
            let off = j as isize - pad;
            for bb in 0..b {
                let src = &x[c * n + bb * l..c * n + (bb + 1) * l];
                let row = &mut dst[bb * l..(bb + 1) * l];
                let lo = (-off).max(0) as usize;
                let hi = (l as isize - off).min(l as isize).max(0) as usize;
                for t in lo..hi {
                    row[t] = src[(t as isize + off) as usize];
                }
            }
        }
    }
    col
}

fn col2im<T: Scalar>(col: &[T], c_in: usize, b: usize, l: usize, k: usize) -> Vec<T> {
    let n = b * l;
    let pad = (k / 2) as isize;
    let mut x = vec![T::zero(); c_in * n];
    for c in 0..c_in {
        for j in 0..k {
            let src = &col[(c * k + j) * n..(c * k + j + 1) * n];
            let off = j as isize - pad;
            for bb in 0..b {
                let row = &src[bb * l..(bb + 1) * l];
                let dst = &mut x[c * n + bb * l..c * n + (bb + 1) * l];
                let lo = (-off).max(0) as usize;
                let hi = (l as isize - off).min(l as isize).max(0) as usize;
                for (t, &r) in row.iter().enumerate().take(hi).skip(lo) {
                    let s = (t as isize + off) as usize;
                    dst[s] = dst[s] + r;
                }
            }
        }
    }
    x
}

fn add_row_bias<T: Scalar>(y: &mut [T], bias: &[T], n: usize) {
    for (row, &b) in y.chunks_exact_mut(n).zip(bias) {
        row.iter_mut().for_each(|v| *v = *v + b);
    }
}

fn add_row_sums<T: Scalar>(dst: &mut [T], m: &[T], n: usize) {
    for (d, row) in dst.iter_mut().zip(m.chunks_exact(n)) {
        *d = *d + row.iter().copied().sum::<T>();
    }
}

fn add_col_sums<T: Scalar>(dst: &mut [T], m: &[T], cols: usize) {
    for row in m.chunks_exact(cols) {
        for (d, &v) in dst.iter_mut().zip(row) {
            *d = *d + v;
        }
    }
}

impl Network {
    pub fn new(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let layout = arch.layout();
        Ok(Self { arch, layout, grad_calls: AtomicU64::new(0), hvp_calls: AtomicU64::new(0) })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.layout.total
    }

    pub fn grad_calls(&self) -> u64 {
        self.grad_calls.load(Ordering::Relaxed)
    }

    pub fn hvp_calls(&self) -> u64 {
        self.hvp_calls.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.grad_calls.store(0, Ordering::Relaxed);
        self.hvp_calls.store(0, Ordering::Relaxed);
    }

    fn check<T: Scalar>(&self, params: &[T], batch: &Tensor<T>, labels: Option<&[usize]>) -> Result<usize> {
        if params.len() != self.layout.total {
            return Err(shape(format!("expected {} parameters, got {}", self.layout.total, params.len())));
        }
        let (b, l) = batch.dims2()?;
        if l != self.arch.input_len {
            return Err(shape(format!("expected input length {}, got {l}", self.arch.input_len)));
        }
        if b == 0 {
            return Err(shape("empty batch"));
        }
        if let Some(y) = labels {
            if y.len() != b {
                return Err(shape(format!("{} labels for a batch of {b}", y.len())));
            }
            if let Some(bad) = y.iter().find(|&&c| c >= self.arch.n_way) {
                return Err(shape(format!("label {bad} outside {} classes", self.arch.n_way)));
            }
        }
        Ok(b)
    }

    /// Class probabilities `(B, N)` using the batch's own normalization
    /// statistics.
    pub fn forward<T: Scalar>(&self, params: &[T], batch: &Tensor<T>) -> Result<Tensor<T>> {
        let b = self.check(params, batch, None)?;
        let pass = self.run(params, None, batch.data(), b, None, false, None);
        Ok(Tensor::new(pass.probs, vec![b, self.arch.n_way]))
    }

    /// Forward pass with batch-norm statistics frozen to `stats`, so each
    /// row is classified independently of the rest of the batch.
    pub fn forward_frozen<T: Scalar>(&self, params: &[T], batch: &Tensor<T>, stats: &BnStats) -> Result<Tensor<T>> {
        let b = self.check(params, batch, None)?;
        if stats.layers.len() != self.arch.filters.len() {
            return Err(shape("statistics do not match the number of blocks"));
        }
        let pass = self.run(params, None, batch.data(), b, None, false, Some(stats));
        Ok(Tensor::new(pass.probs, vec![b, self.arch.n_way]))
    }

    /// Batch-norm statistics of a reference batch, for [`Self::forward_frozen`].
    pub fn batch_stats<T: Scalar>(&self, params: &[T], batch: &Tensor<T>) -> Result<BnStats> {
        let b = self.check(params, batch, None)?;
        Ok(BnStats { layers: self.run(params, None, batch.data(), b, None, false, None).stats })
    }

    /// Mean cross-entropy of the batch.
    pub fn loss<T: Scalar>(&self, params: &[T], batch: &Tensor<T>, labels: &[usize]) -> Result<T> {
        let b = self.check(params, batch, Some(labels))?;
        Ok(self.run(params, None, batch.data(), b, Some(labels), false, None).loss)
    }

    /// Loss, gradient and probabilities in one reverse pass.
    pub fn loss_grad<T: Scalar>(&self, params: &[T], batch: &Tensor<T>, labels: &[usize]) -> Result<(T, Vec<T>, Vec<T>)> {
        let b = self.check(params, batch, Some(labels))?;
        self.grad_calls.fetch_add(1, Ordering::Relaxed);
        let p = self.run(params, None, batch.data(), b, Some(labels), true, None);
        Ok((p.loss, p.grad, p.probs))
    }

    /// Gradient of the mean cross-entropy with respect to the parameters.
    pub fn grad<T: Scalar>(&self, params: &[T], batch: &Tensor<T>, labels: &[usize]) -> Result<Vec<T>> {
        Ok(self.loss_grad(params, batch, labels)?.1)
    }

    /// Hessian of the mean cross-entropy times `v`, by differentiating the
    /// reverse pass along `v`.
    pub fn hvp<T: Scalar>(&self, params: &[T], batch: &Tensor<T>, labels: &[usize], v: &[T]) -> Result<Vec<T>> {
        let b = self.check(params, batch, Some(labels))?;
        if v.len() != params.len() {
            return Err(shape(format!("direction has {} entries, parameters {}", v.len(), params.len())));
        }
        self.hvp_calls.fetch_add(1, Ordering::Relaxed);
        Ok(self.run(params, Some(v), batch.data(), b, Some(labels), true, None).hvp)
    }

    fn block_slices<'a, T>(&self, p: &'a [T], i: usize) -> [&'a [T]; 4] {
        let s = &self.layout.slots[4 * i..4 * i + 4];
        [0, 1, 2, 3].map(|j| &p[s[j].offset..s[j].offset + s[j].len])
    }

    #[allow(clippy::too_many_arguments)]
    fn run<T: Scalar>(
        &self,
        params: &[T],
        tangent: Option<&[T]>,
        input: &[T],
        b: usize,
        labels: Option<&[usize]>,
        want_grad: bool,
        frozen: Option<&BnStats>,
    ) -> Pass<T> {
        let arch = &self.arch;
        let k = arch.kernel;
        let lens = arch.lengths();
        let shift = T::lit(arch.input_shift);
        let scale = T::lit(arch.input_scale);
        let mut x: Vec<T> = input.iter().map(|&v| (v - shift) * scale).collect();
        let mut x_d: Option<Vec<T>> = None;
        let mut tapes = Vec::with_capacity(arch.filters.len());
        let mut stats = Vec::with_capacity(arch.filters.len());
        let mut c_in = 1;

        for (i, &o) in arch.filters.iter().enumerate() {
            let l = lens[i];
            let lp = lens[i + 1];
            let n = b * l;
            let ck = c_in * k;
            let [w, bias, gamma, beta] = self.block_slices(params, i);
            let v = tangent.map(|t| self.block_slices(t, i));

            let col = im2col(&x, c_in, b, l, k);
            let mut y = vec![T::zero(); o * n];
            gemm(Mat::new(w, o, ck), Mat::new(&col, ck, n), T::zero(), &mut y);
            add_row_bias(&mut y, bias, n);

            let col_d = x_d.as_ref().map(|xd| im2col(xd, c_in, b, l, k));
            let mut y_d = Vec::new();
            if let Some([vw, vb, _, _]) = v {
                y_d = vec![T::zero(); o * n];
                if let Some(cd) = &col_d {
                    gemm(Mat::new(w, o, ck), Mat::new(cd, ck, n), T::zero(), &mut y_d);
                }
                gemm(Mat::new(vw, o, ck), Mat::new(&col, ck, n), T::one(), &mut y_d);
                add_row_bias(&mut y_d, vb, n);
            }

            let nt = T::lit(n as f64);
            let eps = T::lit(BN_EPS);
            let mut inv_std = vec![T::zero(); o];
            let mut std_d = vec![T::zero(); if v.is_some() { o } else { 0 }];
            let mut means = vec![0.0; o];
            let mut vars = vec![0.0; o];
            // y becomes x̂ in place
            for c in 0..o {
                let row = &mut y[c * n..(c + 1) * n];
                let (mean, var) = match frozen {
                    Some(s) => (T::lit(s.layers[i].0[c]), T::lit(s.layers[i].1[c])),
                    None => {
                        let mean = row.iter().copied().sum::<T>() / nt;
                        let var = row.iter().map(|&a| (a - mean) * (a - mean)).sum::<T>() / nt;
                        (mean, var)
                    }
                };
                means[c] = mean.to_f64().unwrap_or(f64::NAN);
                vars[c] = var.to_f64().unwrap_or(f64::NAN);
                let inv = T::one() / (var + eps).sqrt();
                inv_std[c] = inv;
                row.iter_mut().for_each(|a| *a = (*a - mean) * inv);
            }
            stats.push((means, vars));
            let xhat = y;

            let mut xhat_d = Vec::new();
            if v.is_some() {
                xhat_d = y_d;
                for c in 0..o {
                    let inv = inv_std[c];
                    let xr = &xhat[c * n..(c + 1) * n];
                    let dr = &mut xhat_d[c * n..(c + 1) * n];
                    if frozen.is_some() {
                        dr.iter_mut().for_each(|d| *d = *d * inv);
                        continue;
                    }
                    let mu_d = dr.iter().copied().sum::<T>() / nt;
                    let s_d = xr.iter().zip(dr.iter()).map(|(&a, &d)| a * d).sum::<T>() / nt;
                    std_d[c] = s_d;
                    for (d, &a) in dr.iter_mut().zip(xr) {
                        *d = (*d - mu_d) * inv - a * s_d * inv;
                    }
                }
            }

            // affine, ReLU and pooling
            let bl = b * lp;
            let mut pooled = vec![T::zero(); o * bl];
            let mut pooled_d = if v.is_some() { vec![T::zero(); o * bl] } else { Vec::new() };
            let mut mask = vec![false; o * n];
            let mut argmax = vec![0u32; o * bl];
            let mut act = vec![T::zero(); n];
            let mut act_d = vec![T::zero(); if v.is_some() { n } else { 0 }];
            for c in 0..o {
                let (g, bt) = (gamma[c], beta[c]);
                let xr = &xhat[c * n..(c + 1) * n];
                let mr = &mut mask[c * n..(c + 1) * n];
                for j in 0..n {
                    let z = g * xr[j] + bt;
                    mr[j] = z > T::zero();
                    act[j] = if mr[j] { z } else { T::zero() };
                }
                if let Some([_, _, vg, vbt]) = v {
                    let dr = &xhat_d[c * n..(c + 1) * n];
                    for j in 0..n {
                        act_d[j] = if mr[j] { vg[c] * xr[j] + g * dr[j] + vbt[c] } else { T::zero() };
                    }
                }
                for bb in 0..b {
                    for t in 0..lp {
                        let j0 = bb * l + 2 * t;
                        let j = if act[j0] >= act[j0 + 1] { j0 } else { j0 + 1 };
                        let dst = c * bl + bb * lp + t;
                        pooled[dst] = act[j];
                        argmax[dst] = (c * n + j) as u32;
                        if v.is_some() {
                            pooled_d[dst] = act_d[j];
                        }
                    }
                }
            }

            tapes.push(BlockTape { c_in, len: l, col, col_d, xhat, xhat_d, inv_std, std_d, mask, argmax });
            x = pooled;
            x_d = v.map(|_| pooled_d);
            c_in = o;
        }

        // head
        let nw = arch.n_way;
        let lp = lens[lens.len() - 1];
        let f = c_in * lp;
        let bl = b * lp;
        let flatten = |src: &[T]| {
            let mut h = vec![T::zero(); b * f];
            for c in 0..c_in {
                for bb in 0..b {
                    h[bb * f + c * lp..bb * f + (c + 1) * lp].copy_from_slice(&src[c * bl + bb * lp..c * bl + (bb + 1) * lp]);
                }
            }
            h
        };
        let h = flatten(&x);
        let h_d = x_d.as_ref().map(|xd| flatten(xd));
        let hs = &self.layout.slots[4 * arch.filters.len()..];
        let wh = &params[hs[0].offset..hs[0].offset + hs[0].len];
        let bh = &params[hs[1].offset..hs[1].offset + hs[1].len];
        let mut logits = vec![T::zero(); b * nw];
        gemm(Mat::new(&h, b, f), Mat::new(wh, nw, f).t(), T::zero(), &mut logits);
        for row in logits.chunks_exact_mut(nw) {
            row.iter_mut().zip(bh).for_each(|(z, &bb)| *z = *z + bb);
        }
        let mut probs = logits;
        for row in probs.chunks_exact_mut(nw) {
            let m = row.iter().copied().fold(T::neg_infinity(), T::max);
            row.iter_mut().for_each(|z| *z = (*z - m).exp());
            let s = row.iter().copied().sum::<T>();
            row.iter_mut().for_each(|z| *z = *z / s);
        }

        let mut loss = T::zero();
        if let Some(y) = labels {
            let floor = T::lit(1e-12);
            let total: T = y.iter().enumerate().map(|(r, &c)| -probs[r * nw + c].max(floor).ln()).sum();
            loss = total / T::lit(b as f64);
        }
        let stats_out = stats;
        if !want_grad {
            return Pass { probs, loss, grad: Vec::new(), hvp: Vec::new(), stats: stats_out };
        }
        let y = labels.expect("gradient needs labels");
        let bt = T::lit(b as f64);

        let mut grad = vec![T::zero(); self.layout.total];
        let mut hvp = vec![T::zero(); if tangent.is_some() { self.layout.total } else { 0 }];

        let mut gz = probs.clone();
        for (r, &c) in y.iter().enumerate() {
            gz[r * nw + c] = gz[r * nw + c] - T::one();
        }
        gz.iter_mut().for_each(|g| *g = *g / bt);

        let mut gz_d = Vec::new();
        if let Some(t) = tangent {
            let vwh = &t[hs[0].offset..hs[0].offset + hs[0].len];
            let vbh = &t[hs[1].offset..hs[1].offset + hs[1].len];
            let mut zd = vec![T::zero(); b * nw];
            if let Some(hd) = &h_d {
                gemm(Mat::new(hd, b, f), Mat::new(wh, nw, f).t(), T::zero(), &mut zd);
            }
            gemm(Mat::new(&h, b, f), Mat::new(vwh, nw, f).t(), T::one(), &mut zd);
            for row in zd.chunks_exact_mut(nw) {
                row.iter_mut().zip(vbh).for_each(|(z, &bb)| *z = *z + bb);
            }
            gz_d = vec![T::zero(); b * nw];
            for r in 0..b {
                let p = &probs[r * nw..(r + 1) * nw];
                let zr = &zd[r * nw..(r + 1) * nw];
                let inner: T = p.iter().zip(zr).map(|(&a, &d)| a * d).sum();
                for j in 0..nw {
                    gz_d[r * nw + j] = p[j] * (zr[j] - inner) / bt;
                }
            }
        }

        {
            let gw = &mut grad[hs[0].offset..hs[0].offset + hs[0].len];
            gemm(Mat::new(&gz, b, nw).t(), Mat::new(&h, b, f), T::zero(), gw);
            add_col_sums(&mut grad[hs[1].offset..hs[1].offset + hs[1].len], &gz, nw);
        }
        let mut gh = vec![T::zero(); b * f];
        gemm(Mat::new(&gz, b, nw), Mat::new(wh, nw, f), T::zero(), &mut gh);
        let mut gh_d = Vec::new();
        if let Some(t) = tangent {
            let vwh = &t[hs[0].offset..hs[0].offset + hs[0].len];
            let hw = &mut hvp[hs[0].offset..hs[0].offset + hs[0].len];
            gemm(Mat::new(&gz_d, b, nw).t(), Mat::new(&h, b, f), T::zero(), hw);
            if let Some(hd) = &h_d {
                gemm(Mat::new(&gz, b, nw).t(), Mat::new(hd, b, f), T::one(), hw);
            }
            add_col_sums(&mut hvp[hs[1].offset..hs[1].offset + hs[1].len], &gz_d, nw);
            gh_d = vec![T::zero(); b * f];
            gemm(Mat::new(&gz_d, b, nw), Mat::new(wh, nw, f), T::zero(), &mut gh_d);
            gemm(Mat::new(&gz, b, nw), Mat::new(vwh, nw, f), T::one(), &mut gh_d);
        }

        let unflatten = |src: &[T]| {
            let mut p = vec![T::zero(); c_in * bl];
            for c in 0..c_in {
                for bb in 0..b {
                    p[c * bl + bb * lp..c * bl + (bb + 1) * lp].copy_from_slice(&src[bb * f + c * lp..bb * f + (c + 1) * lp]);
                }
            }
            p
        };
        let mut gp = unflatten(&gh);
        let mut gp_d = tangent.map(|_| unflatten(&gh_d));

        for i in (0..arch.filters.len()).rev() {
            let tape = &tapes[i];
            let o = arch.filters[i];
            let (c_in, l) = (tape.c_in, tape.len);
            let n = b * l;
            let ck = c_in * k;
            let nt = T::lit(n as f64);
            let [w, _, gamma, _] = self.block_slices(params, i);
            let v = tangent.map(|t| self.block_slices(t, i));
            let slots = &self.layout.slots[4 * i..4 * i + 4];

            let mut g = vec![T::zero(); o * n];
            for (&src, &gv) in tape.argmax.iter().zip(&gp) {
                g[src as usize] = gv;
            }
            let mut g_d = gp_d.as_ref().map(|gpd| {
                let mut gd = vec![T::zero(); o * n];
                for (&src, &gv) in tape.argmax.iter().zip(gpd) {
                    gd[src as usize] = gv;
                }
                gd
            });
            for (gv, &m) in g.iter_mut().zip(&tape.mask) {
                if !m {
                    *gv = T::zero();
                }
            }
            if let Some(gd) = g_d.as_mut() {
                for (gv, &m) in gd.iter_mut().zip(&tape.mask) {
                    if !m {
                        *gv = T::zero();
                    }
                }
            }

            // batch-norm backward, g becomes ∂L/∂y in place
            for c in 0..o {
                let xr = &tape.xhat[c * n..(c + 1) * n];
                let gr = &mut g[c * n..(c + 1) * n];
                let sum_g: T = gr.iter().copied().sum();
                let sum_gx: T = gr.iter().zip(xr).map(|(&a, &b)| a * b).sum();
                grad[slots[2].offset + c] = grad[slots[2].offset + c] + sum_gx;
                grad[slots[3].offset + c] = grad[slots[3].offset + c] + sum_g;
                let inv = tape.inv_std[c];
                let (m1, m2) = (sum_g / nt, sum_gx / nt);
                if let (Some(gd), Some([_, _, vg, _])) = (g_d.as_mut(), v) {
                    let xd = &tape.xhat_d[c * n..(c + 1) * n];
                    let dr = &mut gd[c * n..(c + 1) * n];
                    let sum_gd: T = dr.iter().copied().sum();
                    let sum_gdx: T = (0..n).map(|j| dr[j] * xr[j] + gr[j] * xd[j]).sum();
                    hvp[slots[2].offset + c] = hvp[slots[2].offset + c] + sum_gdx;
                    hvp[slots[3].offset + c] = hvp[slots[3].offset + c] + sum_gd;
                    let (md1, md2) = (sum_gd / nt, sum_gdx / nt);
                    let a = vg[c] * inv - gamma[c] * tape.std_d[c] * inv * inv;
                    let gi = gamma[c] * inv;
                    for j in 0..n {
                        let r = gr[j] - m1 - xr[j] * m2;
                        dr[j] = a * r + gi * (dr[j] - md1 - xd[j] * m2 - xr[j] * md2);
                    }
                }
                let gi = gamma[c] * inv;
                if frozen.is_some() {
                    gr.iter_mut().for_each(|a| *a = gi * *a);
                } else {
                    for j in 0..n {
                        gr[j] = gi * (gr[j] - m1 - xr[j] * m2);
                    }
                }
            }

            // convolution backward
            gemm(
                Mat::new(&g, o, n),
                Mat::new(&tape.col, ck, n).t(),
                T::one(),
                &mut grad[slots[0].offset..slots[0].offset + slots[0].len],
            );
            add_row_sums(&mut grad[slots[1].offset..slots[1].offset + slots[1].len], &g, n);
            if let (Some(gd), Some([vw, _, _, _])) = (g_d.as_ref(), v) {
                let hw = &mut hvp[slots[0].offset..slots[0].offset + slots[0].len];
                gemm(Mat::new(gd, o, n), Mat::new(&tape.col, ck, n).t(), T::one(), hw);
                if let Some(cd) = &tape.col_d {
                    gemm(Mat::new(&g, o, n), Mat::new(cd, ck, n).t(), T::one(), hw);
                }
                add_row_sums(&mut hvp[slots[1].offset..slots[1].offset + slots[1].len], gd, n);
                if i > 0 {
                    let mut gcol_d = vec![T::zero(); ck * n];
                    gemm(Mat::new(w, o, ck).t(), Mat::new(gd, o, n), T::zero(), &mut gcol_d);
                    gemm(Mat::new(vw, o, ck).t(), Mat::new(&g, o, n), T::one(), &mut gcol_d);
                    gp_d = Some(col2im(&gcol_d, c_in, b, l, k));
                }
            }
            if i > 0 {
                let mut gcol = vec![T::zero(); ck * n];
                gemm(Mat::new(w, o, ck).t(), Mat::new(&g, o, n), T::zero(), &mut gcol);
                gp = col2im(&gcol, c_in, b, l, k);
            }
        }

        Pass { probs, loss, grad, hvp, stats: stats_out }
    }
}

/// Mean of `−ln p[label]` over rows, with probabilities floored at 1e-12.
pub fn cross_entropy<T: Scalar>(probs: &Tensor<T>, labels: &[usize]) -> Result<T> {
    let (b, n) = probs.dims2()?;
    if labels.len() != b {
        return Err(shape(format!("{} labels for {b} rows", labels.len())));
    }
    let floor = T::lit(1e-12);
    let mut total = T::zero();
    for (r, &c) in labels.iter().enumerate() {
        if c >= n {
            return Err(shape(format!("label {c} outside {n} classes")));
        }
        total = total - probs.data()[r * n + c].max(floor).ln();
    }
    Ok(total / T::lit(b as f64))
}

/// Index of the largest probability in each row.
pub fn predict<T: Scalar>(probs: &Tensor<T>) -> Vec<usize> {
    let n = probs.shape().last().copied().unwrap_or(1).max(1);
    probs
        .data()
        .chunks_exact(n)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
                .0
        })
        .collect()
}
