//! Network building blocks on top of the autodiff tape: linear layers,
//! layer norm, MLPs, multi-head self-attention and cross-attention blocks
//! (pre-norm residual wiring), plus the sinusoidal positional encoding used
//! for continuous attributes and query points.

use ndarray::{ArrayD, IxDyn};
use rand::Rng;

use crate::tape::{ParamStore, Tape, Var};

/// Sinusoidal encoding, applied separately to each scalar of `x`:
/// per scalar p the output is (sin 2^0 pi p, cos 2^0 pi p, ...,
/// sin 2^{L-1} pi p, cos 2^{L-1} pi p). Layout is dimension-major,
/// frequency-minor, giving 2*L*d values; this layout is frozen (checkpoints
/// depend on it).
pub fn positional_encode(x: &[f64], octaves: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * octaves * x.len());
    for &p in x {
        for l in 0..octaves {
            let freq = (2.0f64).powi(l as i32) * std::f64::consts::PI;
            let (s, c) = (freq * p).sin_cos();
            out.push(s);
            out.push(c);
        }
    }
    out
}

fn uniform_init(shape: &[usize], bound: f64, rng: &mut impl Rng) -> ArrayD<f64> {
    ArrayD::from_shape_fn(IxDyn(shape), |_| (rng.gen::<f64>() * 2.0 - 1.0) * bound)
}

/// y = x W + b for [T,in] inputs.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut impl Rng,
    ) -> Linear {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let w = store.add(&format!("{name}.w"), uniform_init(&[in_dim, out_dim], bound, rng));
        let b = store.add(&format!("{name}.b"), uniform_init(&[out_dim], bound, rng));
        Linear {
            w,
            b,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Var {
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let h = tape.matmul(x, w);
        tape.add_row_broadcast(h, b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gain: usize,
    pub bias: usize,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> LayerNorm {
        let gain = store.add(&format!("{name}.gain"), ArrayD::from_elem(IxDyn(&[dim]), 1.0));
        let bias = store.add(&format!("{name}.bias"), ArrayD::zeros(IxDyn(&[dim])));
        LayerNorm { gain, bias }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Var {
        let gain = tape.param(store, self.gain);
        let bias = tape.param(store, self.bias);
        tape.layer_norm(x, gain, bias)
    }
}

/// Two-layer ReLU MLP.
#[derive(Debug, Clone, Copy)]
pub struct Mlp {
    pub l1: Linear,
    pub l2: Linear,
}

impl Mlp {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        rng: &mut impl Rng,
    ) -> Mlp {
        Mlp {
            l1: Linear::new(store, &format!("{name}.l1"), in_dim, hidden, rng),
            l2: Linear::new(store, &format!("{name}.l2"), hidden, out_dim, rng),
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Var {
        let h = self.l1.forward(tape, store, x);
        let h = tape.relu(h);
        self.l2.forward(tape, store, h)
    }

    /// Convenience for a single vector input: wraps it as a one-row matrix.
    pub fn forward_vec(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Var {
        let m = tape.stack_rows(&[x]);
        let out = self.forward(tape, store, m);
        tape.row(out, 0)
    }
}

/// Multi-head attention core shared by the self- and cross-attention
/// blocks. The output projection is stored as [embed, qkv] and applied
/// head-by-head to avoid a column-concat op.
#[derive(Debug, Clone)]
struct MultiHead {
    wq: Linear,
    wk: Linear,
    wv: Linear,
    wo: usize,
    wo_bias: usize,
    heads: usize,
    head_dim: usize,
}

impl MultiHead {
    fn new(
        store: &mut ParamStore,
        name: &str,
        embed: usize,
        qkv: usize,
        heads: usize,
        rng: &mut impl Rng,
    ) -> MultiHead {
        assert!(qkv % heads == 0, "qkv dim {qkv} not divisible by {heads} heads");
        let bound = 1.0 / (qkv as f64).sqrt();
        MultiHead {
            wq: Linear::new(store, &format!("{name}.wq"), embed, qkv, rng),
            wk: Linear::new(store, &format!("{name}.wk"), embed, qkv, rng),
            wv: Linear::new(store, &format!("{name}.wv"), embed, qkv, rng),
            wo: store.add(&format!("{name}.wo"), uniform_init(&[embed, qkv], bound, rng)),
            wo_bias: store.add(&format!("{name}.wo_bias"), uniform_init(&[embed], bound, rng)),
            heads,
            head_dim: qkv / heads,
        }
    }

    /// Attention of `queries` [Tq,embed] over `keys_values` [Tk,embed].
    fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        queries: Var,
        keys_values: Var,
    ) -> Var {
        let q = self.wq.forward(tape, store, queries);
        let k = self.wk.forward(tape, store, keys_values);
        let v = self.wv.forward(tape, store, keys_values);
        let wo = tape.param(store, self.wo);
        let scale = 1.0 / (self.head_dim as f64).sqrt();

        let mut combined: Option<Var> = None;
        for h in 0..self.heads {
            let lo = h * self.head_dim;
            let hi = lo + self.head_dim;
            let qh = tape.slice_cols(q, lo, hi);
            let kh = tape.slice_cols(k, lo, hi);
            let vh = tape.slice_cols(v, lo, hi);
            let scores = tape.matmul_t(qh, kh);
            let scores = tape.scale(scores, scale);
            let attn = tape.softmax_rows(scores);
            let ctx = tape.matmul(attn, vh);
            let wo_h = tape.slice_cols(wo, lo, hi);
            let out_h = tape.matmul_t(ctx, wo_h);
            combined = Some(match combined {
                Some(acc) => tape.add(acc, out_h),
                None => out_h,
            });
        }
        let bias = tape.param(store, self.wo_bias);
        tape.add_row_broadcast(combined.expect("at least one head"), bias)
    }
}

/// Pre-norm transformer encoder block: self-attention + MLP, residual.
#[derive(Debug, Clone)]
pub struct EncoderBlock {
    ln_attn: LayerNorm,
    attn: MultiHead,
    ln_mlp: LayerNorm,
    mlp: Mlp,
}

impl EncoderBlock {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        embed: usize,
        qkv: usize,
        heads: usize,
        mlp_dim: usize,
        rng: &mut impl Rng,
    ) -> EncoderBlock {
        EncoderBlock {
            ln_attn: LayerNorm::new(store, &format!("{name}.ln_attn"), embed),
            attn: MultiHead::new(store, &format!("{name}.attn"), embed, qkv, heads, rng),
            ln_mlp: LayerNorm::new(store, &format!("{name}.ln_mlp"), embed),
            mlp: Mlp::new(store, &format!("{name}.mlp"), embed, mlp_dim, embed, rng),
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Var {
        let n = self.ln_attn.forward(tape, store, x);
        let a = self.attn.forward(tape, store, n, n);
        let x = tape.add(x, a);
        let n = self.ln_mlp.forward(tape, store, x);
        let m = self.mlp.forward(tape, store, n);
        tape.add(x, m)
    }
}

/// Cross-attention-only decoder block: queries attend to a memory sequence,
/// never to each other, so per-query outputs are independent.
#[derive(Debug, Clone)]
pub struct CrossBlock {
    ln_query: LayerNorm,
    ln_memory: LayerNorm,
    attn: MultiHead,
    ln_mlp: LayerNorm,
    mlp: Mlp,
}

impl CrossBlock {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        embed: usize,
        qkv: usize,
        heads: usize,
        mlp_dim: usize,
        rng: &mut impl Rng,
    ) -> CrossBlock {
        CrossBlock {
            ln_query: LayerNorm::new(store, &format!("{name}.ln_query"), embed),
            ln_memory: LayerNorm::new(store, &format!("{name}.ln_memory"), embed),
            attn: MultiHead::new(store, &format!("{name}.attn"), embed, qkv, heads, rng),
            ln_mlp: LayerNorm::new(store, &format!("{name}.ln_mlp"), embed),
            mlp: Mlp::new(store, &format!("{name}.mlp"), embed, mlp_dim, embed, rng),
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, memory: Var) -> Var {
        let nq = self.ln_query.forward(tape, store, x);
        let nm = self.ln_memory.forward(tape, store, memory);
        let a = self.attn.forward(tape, store, nq, nm);
        let x = tape.add(x, a);
        let n = self.ln_mlp.forward(tape, store, x);
        let m = self.mlp.forward(tape, store, n);
        tape.add(x, m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::tape::check;
    use ndarray::IxDyn;

    #[test]
    fn positional_encoding_layout_and_periodicity() {
        let enc = positional_encode(&[0.0], 4);
        assert_eq!(enc, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);

        assert_eq!(positional_encode(&[0.3, -0.7, 0.1], 32).len(), 2 * 32 * 3);

        // gamma(p) = gamma(p+2) exactly: every frequency 2^l*pi advances by
        // a multiple of 2*pi over a span of 2.
        let a = positional_encode(&[0.37], 8);
        let b = positional_encode(&[2.37], 8);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn encoder_block_gradients_check_out() {
        let mut rng = rng_from(3, &[]);
        let mut store = ParamStore::new();
        let block = EncoderBlock::new(&mut store, "blk", 6, 8, 2, 12, &mut rng);
        let x = ndarray::ArrayD::from_shape_fn(IxDyn(&[4, 6]), |_| rng.gen::<f64>() - 0.5);

        let run = |store: &ParamStore| -> (f64, Vec<ndarray::ArrayD<f64>>) {
            let mut tape = Tape::new();
            let xv = tape.constant(x.clone());
            let out = block.forward(&mut tape, store, xv);
            let sq = tape.mul(out, out);
            let loss = tape.sum(sq);
            let mut grads = store.zero_grads();
            tape.backward(loss, &mut grads);
            (tape.scalar_value(loss), grads)
        };
        let (_, grads) = run(&store);
        let mut rng2 = rng_from(4, &[]);
        for _ in 0..60 {
            let pid = rng2.gen_range(0..store.len());
            let flat = rng2.gen_range(0..store.value(pid).len());
            let fd = check::central_difference(&mut store, pid, flat, 1e-6, |s| run(s).0);
            let an = grads[pid].as_slice().unwrap()[flat];
            // 1e-4: the key bias has an exactly-zero analytic gradient
            // (softmax shift invariance), so FD noise dominates there.
            let err = check::relative_error(fd, an);
            assert!(err < 1e-4, "{}[{flat}]: fd={fd} an={an}", store.name(pid));
        }
    }

    #[test]
    fn cross_block_queries_are_independent() {
        let mut rng = rng_from(9, &[]);
        let mut store = ParamStore::new();
        let block = CrossBlock::new(&mut store, "x", 6, 8, 2, 12, &mut rng);
        let memory = ndarray::ArrayD::from_shape_fn(IxDyn(&[3, 6]), |_| rng.gen::<f64>() - 0.5);
        let queries = ndarray::ArrayD::from_shape_fn(IxDyn(&[5, 6]), |_| rng.gen::<f64>() - 0.5);

        let run = |q: ndarray::ArrayD<f64>| -> ndarray::ArrayD<f64> {
            let mut tape = Tape::new();
            let qv = tape.constant(q);
            let mv = tape.constant(memory.clone());
            let out = block.forward(&mut tape, &store, qv, mv);
            tape.value(out).clone()
        };
        let full = run(queries.clone());
        // Row 2 of the output must not change when other queries are
        // removed.
        let solo = run(
            queries
                .view()
                .into_dimensionality::<ndarray::Ix2>()
                .unwrap()
                .row(2)
                .to_owned()
                .insert_axis(ndarray::Axis(0))
                .into_dyn(),
        );
        let full2 = full.view().into_dimensionality::<ndarray::Ix2>().unwrap();
        let solo2 = solo.view().into_dimensionality::<ndarray::Ix2>().unwrap();
        for j in 0..6 {
            assert!((full2[(2, j)] - solo2[(0, j)]).abs() < 1e-12);
        }
    }
}
