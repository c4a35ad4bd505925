//! Batched forward-mode jets through the network and the matching reverse
//! pass for parameter gradients.
//!
//! Every layer carries a `width x (n * blocks)` matrix whose column blocks
//! hold, for `n` points, the value, then one block per first-derivative
//! direction, then one block per unordered pair of directions. The affine
//! maps act on all blocks at once; only the value block receives the bias.

use ndarray::{s, Array2, Axis};

use super::TanhNetwork;
use crate::error::{check_len, Error, Result};
use crate::par;

/// Points per independently traced chunk. Fixed so that gradient sums are
/// grouped identically whatever the number of threads.
const CHUNK: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum JetOrder {
    Value,
    First,
    Second,
}

fn pairs(m: usize) -> Vec<(usize, usize)> {
    let mut p = Vec::with_capacity(m * (m + 1) / 2);
    for k in 0..m {
        for l in k..m {
            p.push((k, l));
        }
    }
    p
}

fn block_count(m: usize, order: JetOrder) -> usize {
    match order {
        JetOrder::Value => 1,
        JetOrder::First => 1 + m,
        JetOrder::Second => 1 + m + m * (m + 1) / 2,
    }
}

/// Jets of the network output at a batch of points, block-major:
/// entry `(block, point)` is stored at `block * n + point`.
#[derive(Clone, Debug, PartialEq)]
pub struct JetBatch {
    n: usize,
    m: usize,
    order: JetOrder,
    data: Vec<f64>,
}

impl JetBatch {
    /// A zero-filled batch with the given layout, e.g. for adjoint seeds.
    pub fn zeros(n: usize, m: usize, order: JetOrder) -> Self {
        Self {
            n,
            m,
            order,
            data: vec![0.0; n * block_count(m, order)],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn directions(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> JetOrder {
        self.order
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn second_block(&self, k: usize, l: usize) -> usize {
        let (k, l) = if k <= l { (k, l) } else { (l, k) };
        let before: usize = (0..k).map(|a| self.m - a).sum();
        1 + self.m + before + (l - k)
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.data[i]
    }

    #[inline]
    pub fn first(&self, i: usize, k: usize) -> f64 {
        self.data[(1 + k) * self.n + i]
    }

    #[inline]
    pub fn second(&self, i: usize, k: usize, l: usize) -> f64 {
        self.data[self.second_block(k, l) * self.n + i]
    }

    pub fn values(&self) -> &[f64] {
        &self.data[..self.n]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }

    pub fn first_mut(&mut self, i: usize, k: usize) -> &mut f64 {
        &mut self.data[(1 + k) * self.n + i]
    }

    /// Seed slot of the `(k, l)` second derivative. The pair is stored once,
    /// so a loss depending on both `u_kl` and `u_lk` must add both
    /// sensitivities here.
    pub fn second_mut(&mut self, i: usize, k: usize, l: usize) -> &mut f64 {
        let b = self.second_block(k, l);
        &mut self.data[b * self.n + i]
    }
}

struct ChunkTrace {
    start: usize,
    n: usize,
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

/// Everything the reverse pass needs from a batched jet evaluation.
pub struct JetTrace {
    n: usize,
    m: usize,
    order: JetOrder,
    chunks: Vec<ChunkTrace>,
}

impl JetTrace {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

fn tanh_forward(z: &Array2<f64>, n: usize, m: usize, order: JetOrder, pairs: &[(usize, usize)]) -> Array2<f64> {
    let mut a = Array2::zeros(z.raw_dim());
    for (zr, mut ar) in z.outer_iter().zip(a.outer_iter_mut()) {
        let zr = zr.as_slice().expect("standard layout");
        let ar = ar.as_slice_mut().expect("standard layout");
        for i in 0..n {
            let a0 = zr[i].tanh();
            ar[i] = a0;
            if order == JetOrder::Value {
                continue;
            }
            let sech2 = 1.0 - a0 * a0;
            for k in 0..m {
                ar[(1 + k) * n + i] = sech2 * zr[(1 + k) * n + i];
            }
            if order == JetOrder::Second {
                let curv = -2.0 * a0 * sech2;
                for (p, &(k, l)) in pairs.iter().enumerate() {
                    let c = (1 + m + p) * n + i;
                    ar[c] = sech2 * zr[c] + curv * zr[(1 + k) * n + i] * zr[(1 + l) * n + i];
                }
            }
        }
    }
    a
}

fn tanh_backward(
    z: &Array2<f64>,
    abar: &Array2<f64>,
    n: usize,
    m: usize,
    order: JetOrder,
    pairs: &[(usize, usize)],
) -> Array2<f64> {
    let mut zbar = Array2::zeros(z.raw_dim());
    for ((zr, br), mut out) in z.outer_iter().zip(abar.outer_iter()).zip(zbar.outer_iter_mut()) {
        let zr = zr.as_slice().expect("standard layout");
        let br = br.as_slice().expect("standard layout");
        let out = out.as_slice_mut().expect("standard layout");
        for i in 0..n {
            let a0 = zr[i].tanh();
            let sech2 = 1.0 - a0 * a0;
            let curv = -2.0 * a0 * sech2;
            let mut sech2_bar = 0.0;
            let mut curv_bar = 0.0;
            if order >= JetOrder::First {
                for k in 0..m {
                    let c = (1 + k) * n + i;
                    out[c] = sech2 * br[c];
                    sech2_bar += br[c] * zr[c];
                }
            }
            if order == JetOrder::Second {
                for (p, &(k, l)) in pairs.iter().enumerate() {
                    let c = (1 + m + p) * n + i;
                    let g = br[c];
                    out[c] = sech2 * g;
                    sech2_bar += g * zr[c];
                    let zk = zr[(1 + k) * n + i];
                    let zl = zr[(1 + l) * n + i];
                    curv_bar += g * zk * zl;
                    out[(1 + k) * n + i] += curv * g * zl;
                    out[(1 + l) * n + i] += curv * g * zk;
                }
            }
            let a0_bar = br[i] - 2.0 * a0 * sech2_bar + (4.0 * a0 * a0 - 2.0 * sech2) * curv_bar;
            out[i] = sech2 * a0_bar;
        }
    }
    zbar
}

impl TanhNetwork {
    fn feature_jets(&self, points: &[f64], n: usize, dirs: &[usize], order: JetOrder, pairs: &[(usize, usize)]) -> Array2<f64> {
        let arch = &self.arch;
        let d = arch.input_dim();
        let m = dirs.len();
        let blocks = block_count(m, order);
        let mut f = Array2::zeros((arch.feature_dim(), n * blocks));
        let mut row = 0;
        // Linear features: t, non-periodic x, xi.
        let linear = |f: &mut Array2<f64>, row: usize, raw: usize| {
            for i in 0..n {
                f[(row, i)] = points[i * d + raw];
            }
            if order >= JetOrder::First {
                for (k, &r) in dirs.iter().enumerate() {
                    if r == raw {
                        for i in 0..n {
                            f[(row, (1 + k) * n + i)] = 1.0;
                        }
                    }
                }
            }
        };
        linear(&mut f, row, 0);
        row += 1;
        for xi in 0..arch.dx {
            let raw = arch.x_index(xi);
            if !arch.periodic {
                linear(&mut f, row, raw);
                row += 1;
                continue;
            }
            for i in 0..n {
                let x = wrap_angle(points[i * d + raw]);
                let (sn, cs) = x.sin_cos();
                f[(row, i)] = sn;
                f[(row + 1, i)] = cs;
                if order >= JetOrder::First {
                    for (k, &r) in dirs.iter().enumerate() {
                        if r == raw {
                            f[(row, (1 + k) * n + i)] = cs;
                            f[(row + 1, (1 + k) * n + i)] = -sn;
                        }
                    }
                }
                if order == JetOrder::Second {
                    for (p, &(k, l)) in pairs.iter().enumerate() {
                        if dirs[k] == raw && dirs[l] == raw {
                            f[(row, (1 + m + p) * n + i)] = -sn;
                            f[(row + 1, (1 + m + p) * n + i)] = -cs;
                        }
                    }
                }
            }
            row += 2;
        }
        for v in 0..arch.dxi {
            linear(&mut f, row, arch.xi_index(v));
            row += 1;
        }
        f
    }

    fn chunk_forward(
        &self,
        points: &[f64],
        n: usize,
        dirs: &[usize],
        order: JetOrder,
        pairs: &[(usize, usize)],
    ) -> (Array2<f64>, Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let m = dirs.len();
        let mut a = self.feature_jets(points, n, dirs, order, pairs);
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = layer.w.dot(&a);
            {
                let mut value = z.slice_mut(s![.., ..n]);
                for (mut col, b) in value.outer_iter_mut().zip(layer.b.iter()) {
                    col.mapv_inplace(|v| v + b);
                }
            }
            inputs.push(a);
            if li < last {
                a = tanh_forward(&z, n, m, order, pairs);
                pre.push(z);
            } else {
                a = z;
            }
        }
        (a, inputs, pre)
    }

    /// Jets of the output in the raw-input directions `dirs` (indices into
    /// `(t, x.., xi..)`) at `points` (row-major, `input_dim` per point),
    /// with the trace needed by [`TanhNetwork::backward`].
    pub fn jets(&self, points: &[f64], dirs: &[usize], order: JetOrder) -> Result<(JetBatch, JetTrace)> {
        let (batch, chunks) = self.jets_impl(points, dirs, order, true)?;
        let trace = JetTrace {
            n: batch.n,
            m: batch.m,
            order,
            chunks,
        };
        Ok((batch, trace))
    }

    /// Like [`TanhNetwork::jets`] but without keeping the trace.
    pub fn eval_jets(&self, points: &[f64], dirs: &[usize], order: JetOrder) -> Result<JetBatch> {
        Ok(self.jets_impl(points, dirs, order, false)?.0)
    }

    fn jets_impl(
        &self,
        points: &[f64],
        dirs: &[usize],
        order: JetOrder,
        keep: bool,
    ) -> Result<(JetBatch, Vec<ChunkTrace>)> {
        let d = self.arch.input_dim();
        if points.len() % d != 0 {
            return Err(Error::LengthMismatch {
                expected: d * (points.len() / d + 1),
                got: points.len(),
            });
        }
        if let Some(&bad) = dirs.iter().find(|&&r| r >= d) {
            return Err(Error::InvalidArgument(format!("jet direction {bad} out of range")));
        }
        let n = points.len() / d;
        let m = dirs.len();
        let pairs = pairs(m);
        let blocks = block_count(m, order);
        let n_chunks = n.div_ceil(CHUNK);
        let results = par::map_indexed(n_chunks, |c| {
            let start = c * CHUNK;
            let len = CHUNK.min(n - start);
            let (out, inputs, pre) =
                self.chunk_forward(&points[start * d..(start + len) * d], len, dirs, order, &pairs);
            let trace = keep.then_some(ChunkTrace { start, n: len, inputs, pre });
            (start, len, out, trace)
        });
        let mut data = vec![0.0; n * blocks];
        let mut chunks = Vec::with_capacity(if keep { n_chunks } else { 0 });
        for (start, len, out, trace) in results {
            let row = out.row(0);
            for b in 0..blocks {
                for i in 0..len {
                    data[b * n + start + i] = row[b * len + i];
                }
            }
            chunks.extend(trace);
        }
        Ok((JetBatch { n, m, order, data }, chunks))
    }

    /// Gradient of `sum_(block, point) seeds * jets` with respect to the
    /// parameters, in [`TanhNetwork::params`] order. `seeds` must share the
    /// trace's layout.
    pub fn backward(&self, trace: &JetTrace, seeds: &JetBatch) -> Result<Vec<f64>> {
        if seeds.n != trace.n || seeds.m != trace.m || seeds.order != trace.order {
            return Err(Error::InvalidArgument("seed layout does not match the jet trace".into()));
        }
        check_len(trace.n * block_count(trace.m, trace.order), seeds.data.len())?;
        let (n, m, order) = (trace.n, trace.m, trace.order);
        let pairs = pairs(m);
        let blocks = block_count(m, order);
        let parts = par::map_indexed(trace.chunks.len(), |c| {
            let ch = &trace.chunks[c];
            let mut seed = Array2::zeros((1, ch.n * blocks));
            for b in 0..blocks {
                for i in 0..ch.n {
                    seed[(0, b * ch.n + i)] = seeds.data[b * n + ch.start + i];
                }
            }
            self.chunk_backward(ch, seed, m, order, &pairs)
        });
        let mut grad = vec![0.0; self.param_count()];
        for part in parts {
            for (g, p) in grad.iter_mut().zip(part) {
                *g += p;
            }
        }
        Ok(grad)
    }

    fn chunk_backward(
        &self,
        ch: &ChunkTrace,
        seed: Array2<f64>,
        m: usize,
        order: JetOrder,
        pairs: &[(usize, usize)],
    ) -> Vec<f64> {
        let n = ch.n;
        let layers = &self.layers;
        let mut layer_grads: Vec<(Array2<f64>, Vec<f64>)> = Vec::with_capacity(layers.len());
        let mut zbar = seed;
        for li in (0..layers.len()).rev() {
            let wbar = zbar.dot(&ch.inputs[li].t());
            let bbar: Vec<f64> = zbar
                .slice(s![.., ..n])
                .sum_axis(Axis(1))
                .to_vec();
            layer_grads.push((wbar, bbar));
            if li == 0 {
                break;
            }
            let abar = layers[li].w.t().dot(&zbar);
            zbar = tanh_backward(&ch.pre[li - 1], &abar, n, m, order, pairs);
        }
        layer_grads.reverse();
        let mut flat = Vec::with_capacity(self.param_count());
        for (w, b) in layer_grads {
            flat.extend(w.iter());
            flat.extend(b);
        }
        flat
    }
}

/// Reduces an angle to `[-pi, pi)`, so that `x = pi` and `x = -pi` give
/// bitwise identical features.
#[inline]
pub(crate) fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    x - TAU * ((x + PI) / TAU).floor()
}
