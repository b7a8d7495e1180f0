//! Reverse-mode autodiff over f64 ndarrays.
//!
//! A [`Tape`] is a define-by-run graph: each op computes its value eagerly
//! and records enough to push gradients backward. Parameters live outside
//! the tape in a [`ParamStore`]; backward accumulates their gradients into a
//! caller-provided buffer so one store can serve many tapes (one per record
//! in a batch). Everything is f64 and single-threaded per tape, which keeps
//! training bit-reproducible.

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{ArrayD, Axis, Ix1, Ix2, IxDyn};

use crate::dist::kernels::disc_logistic_logmass_grad;

pub type Arr = ArrayD<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

const LAYER_NORM_EPS: f64 = 1e-5;

enum Op {
    Leaf,
    Param(usize),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    /// [T,D] + [D] broadcast over rows.
    AddRowBroadcast(Var, Var),
    /// [m,k] x [k,n].
    MatMul(Var, Var),
    /// [m,k] x [n,k]^T -> [m,n].
    MatMulT(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    /// Row-wise softmax of a 2-D array.
    SoftmaxRows(Var),
    /// 1-D log-softmax.
    LogSoftmax(Var),
    /// 1-D -> 0-d log-sum-exp.
    LogSumExp(Var),
    /// Row-wise layer norm of a 2-D array with per-feature gain/bias.
    LayerNorm { x: Var, gain: Var, bias: Var },
    /// 1-D concatenation.
    Concat(Vec<Var>),
    /// Stack k same-length 1-D arrays into [k,D].
    StackRows(Vec<Var>),
    /// Extract row i of a 2-D array as 1-D.
    Row(Var, usize),
    /// Columns [lo,hi) of a 2-D array.
    SliceCols(Var, usize, usize),
    /// Elements [lo,hi) of a 1-D array.
    SliceVec(Var, usize, usize),
    /// Same data, new shape.
    Reshape(Var),
    /// Element i of a 1-D array as a 0-d scalar.
    Pick(Var, usize),
    /// Sum of all elements -> 0-d.
    Sum(Var),
    /// [m,n] -> [n] summing over rows.
    SumAxis0(Var),
    /// Per-dimension, per-component discretized-logistic log bin masses.
    /// Inputs are [d,K] locations and log-scales; targets and the bin half
    /// width are constants. Analytic gradients are stashed at forward time.
    DiscLogisticLogMass { mu: Var, log_s: Var, d_mu: Arr, d_log_s: Arr },
    /// Importance-weighted binary cross-entropy from logits, averaged over
    /// the batch. Targets/weights are constants.
    BceWithLogits { logits: Var, targets: Vec<f64>, weights: Vec<f64> },
}

struct Node {
    value: Arc<Arr>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Arr {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        let arr = self.value(v);
        debug_assert_eq!(arr.len(), 1);
        arr.iter().next().copied().unwrap()
    }

    fn push(&mut self, value: Arr, op: Op) -> Var {
        self.push_shared(Arc::new(value), op)
    }

    fn push_shared(&mut self, value: Arc<Arr>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Arr) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn constant_vec(&mut self, value: &[f64]) -> Var {
        self.push(
            ArrayD::from_shape_vec(IxDyn(&[value.len()]), value.to_vec()).unwrap(),
            Op::Leaf,
        )
    }

    pub fn param(&mut self, store: &ParamStore, pid: usize) -> Var {
        self.push_shared(store.values[pid].clone(), Op::Param(pid))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        self.push(value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        self.push(value, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).mapv(|v| v * c);
        self.push(value, Op::Scale(a, c))
    }

    pub fn add_row_broadcast(&mut self, a: Var, bias: Var) -> Var {
        let m = self.value(a).view().into_dimensionality::<Ix2>().unwrap();
        let b = self
            .value(bias)
            .view()
            .into_dimensionality::<Ix1>()
            .unwrap();
        let value = (&m + &b).into_dyn();
        self.push(value, Op::AddRowBroadcast(a, bias))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let lhs = self.value(a).view().into_dimensionality::<Ix2>().unwrap();
        let rhs = self.value(b).view().into_dimensionality::<Ix2>().unwrap();
        let value = lhs.dot(&rhs).into_dyn();
        self.push(value, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let lhs = self.value(a).view().into_dimensionality::<Ix2>().unwrap();
        let rhs = self.value(b).view().into_dimensionality::<Ix2>().unwrap();
        let value = lhs.dot(&rhs.t()).into_dyn();
        self.push(value, Op::MatMulT(a, b))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|v| v.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let m = self.value(a).view().into_dimensionality::<Ix2>().unwrap();
        let mut out = m.to_owned();
        for mut row in out.rows_mut() {
            let max = row.iter().cloned().fold(f64::MIN, f64::max);
            row.mapv_inplace(|v| (v - max).exp());
            let sum: f64 = row.sum();
            row.mapv_inplace(|v| v / sum);
        }
        self.push(out.into_dyn(), Op::SoftmaxRows(a))
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let x = self.value(a).view().into_dimensionality::<Ix1>().unwrap();
        let max = x.iter().cloned().fold(f64::MIN, f64::max);
        let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let value = x.mapv(|v| v - lse).into_dyn();
        self.push(value, Op::LogSoftmax(a))
    }

    pub fn log_sum_exp(&mut self, a: Var) -> Var {
        let x = self.value(a).view().into_dimensionality::<Ix1>().unwrap();
        let max = x.iter().cloned().fold(f64::MIN, f64::max);
        let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        self.push(
            ArrayD::from_elem(IxDyn(&[]), lse),
            Op::LogSumExp(a),
        )
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let m = self.value(x).view().into_dimensionality::<Ix2>().unwrap();
        let g = self
            .value(gain)
            .view()
            .into_dimensionality::<Ix1>()
            .unwrap();
        let b = self
            .value(bias)
            .view()
            .into_dimensionality::<Ix1>()
            .unwrap();
        let mut out = m.to_owned();
        for mut row in out.rows_mut() {
            let d = row.len() as f64;
            let mean = row.sum() / d;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d;
            let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - mean) * inv_std * g[j] + b[j];
            }
        }
        self.push(out.into_dyn(), Op::LayerNorm { x, gain, bias })
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut data = Vec::new();
        for &p in parts {
            data.extend(self.value(p).iter().cloned());
        }
        self.push(
            ArrayD::from_shape_vec(IxDyn(&[data.len()]), data).unwrap(),
            Op::Concat(parts.to_vec()),
        )
    }

    pub fn stack_rows(&mut self, rows: &[Var]) -> Var {
        assert!(!rows.is_empty());
        let width = self.value(rows[0]).len();
        let mut data = Vec::with_capacity(rows.len() * width);
        for &r in rows {
            let v = self.value(r);
            debug_assert_eq!(v.len(), width);
            data.extend(v.iter().cloned());
        }
        self.push(
            ArrayD::from_shape_vec(IxDyn(&[rows.len(), width]), data).unwrap(),
            Op::StackRows(rows.to_vec()),
        )
    }

    pub fn row(&mut self, a: Var, i: usize) -> Var {
        let m = self.value(a).view().into_dimensionality::<Ix2>().unwrap();
        let value = m.row(i).to_owned().into_dyn();
        self.push(value, Op::Row(a, i))
    }

    pub fn slice_cols(&mut self, a: Var, lo: usize, hi: usize) -> Var {
        let m = self.value(a).view().into_dimensionality::<Ix2>().unwrap();
        let value = m.slice(ndarray::s![.., lo..hi]).to_owned().into_dyn();
        self.push(value, Op::SliceCols(a, lo, hi))
    }

    pub fn slice_vec(&mut self, a: Var, lo: usize, hi: usize) -> Var {
        let x = self.value(a).view().into_dimensionality::<Ix1>().unwrap();
        let value = x.slice(ndarray::s![lo..hi]).to_owned().into_dyn();
        self.push(value, Op::SliceVec(a, lo, hi))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Var {
        let value = self
            .value(a)
            .clone()
            .into_shape_with_order(IxDyn(shape))
            .expect("reshape must preserve element count");
        self.push(value, Op::Reshape(a))
    }

    pub fn pick(&mut self, a: Var, i: usize) -> Var {
        let x = self.value(a).view().into_dimensionality::<Ix1>().unwrap();
        self.push(ArrayD::from_elem(IxDyn(&[]), x[i]), Op::Pick(a, i))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(ArrayD::from_elem(IxDyn(&[]), s), Op::Sum(a))
    }

    pub fn sum_axis0(&mut self, a: Var) -> Var {
        let m = self.value(a).view().into_dimensionality::<Ix2>().unwrap();
        let value = m.sum_axis(Axis(0)).into_dyn();
        self.push(value, Op::SumAxis0(a))
    }

    /// log P(bin around x_d) for each dimension d and mixture component k.
    /// `mu` and `log_s` are [d,K]; log-scales are clamped to >= -7 inside.
    pub fn disc_logistic_logmass(&mut self, mu: Var, log_s: Var, x: &[f64], half_bin: f64) -> Var {
        let mu_v = self.value(mu).view().into_dimensionality::<Ix2>().unwrap();
        let ls_v = self
            .value(log_s)
            .view()
            .into_dimensionality::<Ix2>()
            .unwrap();
        let (d, k) = mu_v.dim();
        assert_eq!(x.len(), d);
        let mut value = ndarray::Array2::<f64>::zeros((d, k));
        let mut d_mu = ndarray::Array2::<f64>::zeros((d, k));
        let mut d_ls = ndarray::Array2::<f64>::zeros((d, k));
        for i in 0..d {
            for j in 0..k {
                let (lp, gmu, gls) =
                    disc_logistic_logmass_grad(x[i], mu_v[(i, j)], ls_v[(i, j)], half_bin);
                value[(i, j)] = lp;
                d_mu[(i, j)] = gmu;
                d_ls[(i, j)] = gls;
            }
        }
        self.push(
            value.into_dyn(),
            Op::DiscLogisticLogMass {
                mu,
                log_s,
                d_mu: d_mu.into_dyn(),
                d_log_s: d_ls.into_dyn(),
            },
        )
    }

    /// Weighted mean of per-point binary cross-entropies computed stably
    /// from logits.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64], weights: &[f64]) -> Var {
        let z = self
            .value(logits)
            .view()
            .into_dimensionality::<Ix1>()
            .unwrap();
        assert_eq!(z.len(), targets.len());
        assert_eq!(z.len(), weights.len());
        let n = z.len() as f64;
        let mut total = 0.0;
        for ((&zi, &ti), &wi) in z.iter().zip(targets).zip(weights) {
            total += wi * (ti * softplus(-zi) + (1.0 - ti) * softplus(zi));
        }
        self.push(
            ArrayD::from_elem(IxDyn(&[]), total / n),
            Op::BceWithLogits {
                logits,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
            },
        )
    }

    /// Push gradients of the scalar `loss` back to every parameter,
    /// accumulating into `param_grads` (indexed like the store).
    pub fn backward(&self, loss: Var, param_grads: &mut [Arr]) {
        let mut grads: Vec<Option<Arr>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(ArrayD::from_elem(IxDyn(&[]), 1.0));

        for idx in (0..=loss.0).rev() {
            let grad = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::Param(pid) => {
                    param_grads[*pid] += &grad;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, grad.clone());
                    accumulate(&mut grads, *b, grad);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, grad.clone());
                    accumulate(&mut grads, *b, grad.mapv(|v| -v));
                }
                Op::Mul(a, b) => {
                    let ga = &grad * self.value(*b);
                    let gb = &grad * self.value(*a);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads, *a, grad.mapv(|v| v * c));
                }
                Op::AddRowBroadcast(a, bias) => {
                    let g2 = grad.view().into_dimensionality::<Ix2>().unwrap();
                    let gb = g2.sum_axis(Axis(0)).into_dyn();
                    accumulate(&mut grads, *a, grad.clone());
                    accumulate(&mut grads, *bias, gb);
                }
                Op::MatMul(a, b) => {
                    let g = grad.view().into_dimensionality::<Ix2>().unwrap();
                    let av = self.value(*a).view().into_dimensionality::<Ix2>().unwrap();
                    let bv = self.value(*b).view().into_dimensionality::<Ix2>().unwrap();
                    accumulate(&mut grads, *a, g.dot(&bv.t()).into_dyn());
                    accumulate(&mut grads, *b, av.t().dot(&g).into_dyn());
                }
                Op::MatMulT(a, b) => {
                    let g = grad.view().into_dimensionality::<Ix2>().unwrap();
                    let av = self.value(*a).view().into_dimensionality::<Ix2>().unwrap();
                    let bv = self.value(*b).view().into_dimensionality::<Ix2>().unwrap();
                    accumulate(&mut grads, *a, g.dot(&bv).into_dyn());
                    accumulate(&mut grads, *b, g.t().dot(&av).into_dyn());
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let gx = ndarray::Zip::from(&grad)
                        .and(x)
                        .map_collect(|&g, &v| if v > 0.0 { g } else { 0.0 });
                    accumulate(&mut grads, *a, gx);
                }
                Op::Sigmoid(a) => {
                    let y = &self.nodes[idx].value;
                    let gx = ndarray::Zip::from(&grad)
                        .and(y.as_ref())
                        .map_collect(|&g, &yv| g * yv * (1.0 - yv));
                    accumulate(&mut grads, *a, gx);
                }
                Op::SoftmaxRows(a) => {
                    let y = self.nodes[idx]
                        .value
                        .view()
                        .into_dimensionality::<Ix2>()
                        .unwrap();
                    let g = grad.view().into_dimensionality::<Ix2>().unwrap();
                    let mut gx = g.to_owned();
                    for (mut grow, yrow) in gx.rows_mut().into_iter().zip(y.rows()) {
                        let dot: f64 = grow.iter().zip(yrow.iter()).map(|(a, b)| a * b).sum();
                        for (gv, &yv) in grow.iter_mut().zip(yrow.iter()) {
                            *gv = (*gv - dot) * yv;
                        }
                    }
                    accumulate(&mut grads, *a, gx.into_dyn());
                }
                Op::LogSoftmax(a) => {
                    let y = self.nodes[idx]
                        .value
                        .view()
                        .into_dimensionality::<Ix1>()
                        .unwrap();
                    let g = grad.view().into_dimensionality::<Ix1>().unwrap();
                    let gsum: f64 = g.sum();
                    let gx = ndarray::Zip::from(&g)
                        .and(&y)
                        .map_collect(|&gv, &yv| gv - yv.exp() * gsum);
                    accumulate(&mut grads, *a, gx.into_dyn());
                }
                Op::LogSumExp(a) => {
                    let x = self.value(*a).view().into_dimensionality::<Ix1>().unwrap();
                    let lse = self.nodes[idx].value.iter().next().copied().unwrap();
                    let gs = grad.iter().next().copied().unwrap();
                    let gx = x.mapv(|v| (v - lse).exp() * gs);
                    accumulate(&mut grads, *a, gx.into_dyn());
                }
                Op::LayerNorm { x, gain, bias } => {
                    let xv = self.value(*x).view().into_dimensionality::<Ix2>().unwrap();
                    let gv = self
                        .value(*gain)
                        .view()
                        .into_dimensionality::<Ix1>()
                        .unwrap();
                    let gy = grad.view().into_dimensionality::<Ix2>().unwrap();
                    let (rows, d) = xv.dim();
                    let dim = d as f64;
                    let mut gx = ndarray::Array2::<f64>::zeros((rows, d));
                    let mut ggain = ndarray::Array1::<f64>::zeros(d);
                    let mut gbias = ndarray::Array1::<f64>::zeros(d);
                    for r in 0..rows {
                        let xrow = xv.row(r);
                        let mean = xrow.sum() / dim;
                        let var = xrow.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / dim;
                        let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                        let xhat: Vec<f64> = xrow.iter().map(|v| (v - mean) * inv_std).collect();
                        let gyrow = gy.row(r);
                        let d_vec: Vec<f64> =
                            gyrow.iter().zip(gv.iter()).map(|(g, gn)| g * gn).collect();
                        let d_mean: f64 = d_vec.iter().sum::<f64>() / dim;
                        let dxhat_mean: f64 = d_vec
                            .iter()
                            .zip(&xhat)
                            .map(|(dv, xh)| dv * xh)
                            .sum::<f64>()
                            / dim;
                        for j in 0..d {
                            gx[(r, j)] = (d_vec[j] - d_mean - xhat[j] * dxhat_mean) * inv_std;
                            ggain[j] += gyrow[j] * xhat[j];
                            gbias[j] += gyrow[j];
                        }
                    }
                    accumulate(&mut grads, *x, gx.into_dyn());
                    accumulate(&mut grads, *gain, ggain.into_dyn());
                    accumulate(&mut grads, *bias, gbias.into_dyn());
                }
                Op::Concat(parts) => {
                    let g = grad.view().into_dimensionality::<Ix1>().unwrap();
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        let gp = g.slice(ndarray::s![offset..offset + len]).to_owned();
                        accumulate(&mut grads, p, gp.into_dyn());
                        offset += len;
                    }
                }
                Op::StackRows(rows) => {
                    let g = grad.view().into_dimensionality::<Ix2>().unwrap();
                    for (i, &r) in rows.iter().enumerate() {
                        accumulate(&mut grads, r, g.row(i).to_owned().into_dyn());
                    }
                }
                Op::Row(a, i) => {
                    let src = self.value(*a).view().into_dimensionality::<Ix2>().unwrap();
                    let mut gx = ndarray::Array2::<f64>::zeros(src.dim());
                    let g = grad.view().into_dimensionality::<Ix1>().unwrap();
                    gx.row_mut(*i).assign(&g);
                    accumulate(&mut grads, *a, gx.into_dyn());
                }
                Op::SliceCols(a, lo, _hi) => {
                    let src = self.value(*a).view().into_dimensionality::<Ix2>().unwrap();
                    let g = grad.view().into_dimensionality::<Ix2>().unwrap();
                    let mut gx = ndarray::Array2::<f64>::zeros(src.dim());
                    gx.slice_mut(ndarray::s![.., *lo..*lo + g.ncols()]).assign(&g);
                    accumulate(&mut grads, *a, gx.into_dyn());
                }
                Op::SliceVec(a, lo, _hi) => {
                    let src_len = self.value(*a).len();
                    let g = grad.view().into_dimensionality::<Ix1>().unwrap();
                    let mut gx = ndarray::Array1::<f64>::zeros(src_len);
                    gx.slice_mut(ndarray::s![*lo..*lo + g.len()]).assign(&g);
                    accumulate(&mut grads, *a, gx.into_dyn());
                }
                Op::Reshape(a) => {
                    let back = grad
                        .into_shape_with_order(self.value(*a).raw_dim())
                        .expect("gradient reshapes back");
                    accumulate(&mut grads, *a, back);
                }
                Op::Pick(a, i) => {
                    let src_len = self.value(*a).len();
                    let mut gx = ndarray::Array1::<f64>::zeros(src_len);
                    gx[*i] = grad.iter().next().copied().unwrap();
                    accumulate(&mut grads, *a, gx.into_dyn());
                }
                Op::Sum(a) => {
                    let gs = grad.iter().next().copied().unwrap();
                    let gx = ArrayD::from_elem(self.value(*a).raw_dim(), gs);
                    accumulate(&mut grads, *a, gx);
                }
                Op::SumAxis0(a) => {
                    let src = self.value(*a).view().into_dimensionality::<Ix2>().unwrap();
                    let g = grad.view().into_dimensionality::<Ix1>().unwrap();
                    let mut gx = ndarray::Array2::<f64>::zeros(src.dim());
                    for mut row in gx.rows_mut() {
                        row.assign(&g);
                    }
                    accumulate(&mut grads, *a, gx.into_dyn());
                }
                Op::DiscLogisticLogMass { mu, log_s, d_mu, d_log_s } => {
                    accumulate(&mut grads, *mu, &grad * d_mu);
                    accumulate(&mut grads, *log_s, &grad * d_log_s);
                }
                Op::BceWithLogits { logits, targets, weights } => {
                    let z = self
                        .value(*logits)
                        .view()
                        .into_dimensionality::<Ix1>()
                        .unwrap();
                    let gs = grad.iter().next().copied().unwrap();
                    let n = z.len() as f64;
                    let gx: ndarray::Array1<f64> = z
                        .iter()
                        .zip(targets)
                        .zip(weights)
                        .map(|((&zi, &ti), &wi)| gs * wi * (sigmoid(zi) - ti) / n)
                        .collect();
                    accumulate(&mut grads, *logits, gx.into_dyn());
                }
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Arr>], var: Var, grad: Arr) {
    match &mut grads[var.0] {
        Some(existing) => *existing += &grad,
        slot @ None => *slot = Some(grad),
    }
}

/// Named parameter tensors shared across tapes.
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Arc<Arr>>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            values: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: &str, value: Arr) -> usize {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter name {name}"
        );
        let pid = self.values.len();
        self.names.push(name.to_string());
        self.values.push(Arc::new(value));
        self.index.insert(name.to_string(), pid);
        pid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, pid: usize) -> &str {
        &self.names[pid]
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn value(&self, pid: usize) -> &Arr {
        &self.values[pid]
    }

    pub fn value_mut(&mut self, pid: usize) -> &mut Arr {
        Arc::make_mut(&mut self.values[pid])
    }

    pub fn set(&mut self, pid: usize, value: Arr) {
        assert_eq!(self.values[pid].shape(), value.shape());
        self.values[pid] = Arc::new(value);
    }

    pub fn zero_grads(&self) -> Vec<Arr> {
        self.values
            .iter()
            .map(|v| ArrayD::zeros(v.raw_dim()))
            .collect()
    }

    pub fn total_elements(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

/// Adam with PyTorch semantics: coupled L2 weight decay added to the raw
/// gradient, bias-corrected moments, eps outside the square root.
pub struct Adam {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Arr>,
    v: Vec<Arr>,
    t: u64,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64, weight_decay: f64) -> Self {
        Adam {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: store.zero_grads(),
            v: store.zero_grads(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &[Arr]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for pid in 0..store.len() {
            let value = store.value_mut(pid);
            let m = &mut self.m[pid];
            let v = &mut self.v[pid];
            ndarray::Zip::from(value)
                .and(m)
                .and(v)
                .and(&grads[pid])
                .for_each(|w, m, v, &g| {
                    let g = g + self.weight_decay * *w;
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                });
        }
    }

    pub fn state(&self) -> (&[Arr], &[Arr], u64) {
        (&self.m, &self.v, self.t)
    }

    pub fn restore(&mut self, m: Vec<Arr>, v: Vec<Arr>, t: u64) {
        self.m = m;
        self.v = v;
        self.t = t;
    }
}

/// Central-difference gradient checking support.
pub mod check {
    use super::{Arr, ParamStore};

    /// Perturb parameter element (pid, flat index) by ±step and evaluate
    /// `loss`, restoring the original value afterwards.
    pub fn central_difference(
        store: &mut ParamStore,
        pid: usize,
        flat: usize,
        step: f64,
        mut loss: impl FnMut(&ParamStore) -> f64,
    ) -> f64 {
        let original = store.value(pid).as_slice().unwrap()[flat];
        set_flat(store, pid, flat, original + step);
        let hi = loss(store);
        set_flat(store, pid, flat, original - step);
        let lo = loss(store);
        set_flat(store, pid, flat, original);
        (hi - lo) / (2.0 * step)
    }

    fn set_flat(store: &mut ParamStore, pid: usize, flat: usize, value: f64) {
        let arr: &mut Arr = store.value_mut(pid);
        arr.as_slice_mut().unwrap()[flat] = value;
    }

    /// Relative error with an absolute floor: central differences with step
    /// ~1e-5 on O(10) losses carry rounding noise of order 1e-10, so
    /// gradients below 1e-5 are compared against that floor instead of
    /// their own magnitude.
    pub fn relative_error(a: f64, b: f64) -> f64 {
        let scale = a.abs().max(b.abs());
        (a - b).abs() / scale.max(1e-5)
    }
}
