//! Shared building blocks: linear layers, layer norm with affine
//! parameters, multi-head attention, feed-forward blocks, and series
//! decomposition by moving average.

use nembench_tensor::{Init, ParamBinding, ParamId, ParamSet, ParamSetBuilder, Tape, Var};

pub(crate) const LN_EPS: f64 = 1e-5;

/// Forward-pass context: the tape plus parameter lookup.
pub(crate) struct Ctx<'t, 'a> {
    pub tape: &'t Tape,
    pub binding: std::cell::RefCell<&'a mut ParamBinding>,
    pub params: &'a ParamSet,
}

impl<'t, 'a> Ctx<'t, 'a> {
    pub fn new(tape: &'t Tape, binding: &'a mut ParamBinding, params: &'a ParamSet) -> Self {
        Ctx {
            tape,
            binding: std::cell::RefCell::new(binding),
            params,
        }
    }

    pub fn var(&self, id: ParamId) -> Var<'t> {
        self.binding.borrow_mut().var(self.tape, self.params, id)
    }
}

/// Dense layer `y = x W + b`, with the uniform `1/sqrt(fan_in)` default
/// initialization.
pub(crate) struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(
        pb: &mut ParamSetBuilder,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
    ) -> Linear {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        let w = pb.alloc(&format!("{name}.w"), &[in_dim, out_dim], Init::UniformSym(bound));
        let b = bias
            .then(|| pb.alloc(&format!("{name}.b"), &[out_dim], Init::UniformSym(bound)));
        Linear {
            w,
            b,
            in_dim,
            out_dim,
        }
    }

    /// Applies to `[n, in] -> [n, out]`.
    pub fn apply2<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>) -> Var<'t> {
        let mut y = x.matmul(ctx.var(self.w));
        if let Some(b) = self.b {
            y = y.add(ctx.var(b));
        }
        y
    }

    /// Applies along the last axis of `[b, t, in] -> [b, t, out]`.
    pub fn apply3<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>) -> Var<'t> {
        let shape = x.shape();
        let (b, t) = (shape[0], shape[1]);
        debug_assert_eq!(shape[2], self.in_dim);
        self.apply2(ctx, x.reshape(&[b * t, self.in_dim]))
            .reshape(&[b, t, self.out_dim])
    }
}

/// Layer normalization over the last axis with learnable gain and bias.
pub(crate) struct Norm {
    gain: ParamId,
    bias: ParamId,
}

impl Norm {
    pub fn new(pb: &mut ParamSetBuilder, name: &str, dim: usize) -> Norm {
        Norm {
            gain: pb.alloc(&format!("{name}.gain"), &[dim], Init::Const(1.0)),
            bias: pb.alloc(&format!("{name}.bias"), &[dim], Init::Const(0.0)),
        }
    }

    pub fn apply<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>) -> Var<'t> {
        x.layer_norm_last(LN_EPS)
            .mul(ctx.var(self.gain))
            .add(ctx.var(self.bias))
    }
}

/// Largest head count from {8, 4, 2, 1} dividing the model dimension.
pub(crate) fn head_count(d_model: usize) -> usize {
    for h in [8, 4, 2, 1] {
        if d_model % h == 0 {
            return h;
        }
    }
    1
}

/// Multi-head scaled dot-product attention (no masking; encoder use only).
pub(crate) struct MultiHeadAttention {
    wq: Linear,
    wk: Linear,
    wv: Linear,
    wo: Linear,
    n_heads: usize,
    d_model: usize,
}

impl MultiHeadAttention {
    pub fn new(pb: &mut ParamSetBuilder, name: &str, d_model: usize) -> MultiHeadAttention {
        MultiHeadAttention {
            wq: Linear::new(pb, &format!("{name}.wq"), d_model, d_model, true),
            wk: Linear::new(pb, &format!("{name}.wk"), d_model, d_model, true),
            wv: Linear::new(pb, &format!("{name}.wv"), d_model, d_model, true),
            wo: Linear::new(pb, &format!("{name}.wo"), d_model, d_model, true),
            n_heads: head_count(d_model),
            d_model,
        }
    }

    /// `query: [b, tq, d]`, `keys/values: [b, tk, d]` -> `[b, tq, d]`.
    pub fn apply<'t>(&self, ctx: &Ctx<'t, '_>, query: Var<'t>, kv: Var<'t>) -> Var<'t> {
        let (b, tq) = (query.shape()[0], query.shape()[1]);
        let tk = kv.shape()[1];
        let h = self.n_heads;
        let dh = self.d_model / h;

        let split = |x: Var<'t>, t: usize| {
            // [b, t, d] -> [b*h, t, dh]
            x.reshape(&[b, t, h, dh])
                .permute(&[0, 2, 1, 3])
                .reshape(&[b * h, t, dh])
        };
        let q = split(self.wq.apply3(ctx, query), tq);
        let k = split(self.wk.apply3(ctx, kv), tk);
        let v = split(self.wv.apply3(ctx, kv), tk);

        let scores = q
            .bmm(k.permute(&[0, 2, 1]))
            .scale(1.0 / (dh as f64).sqrt());
        let attn = scores.softmax_last();
        let out = attn.bmm(v); // [b*h, tq, dh]
        let merged = out
            .reshape(&[b, h, tq, dh])
            .permute(&[0, 2, 1, 3])
            .reshape(&[b, tq, self.d_model]);
        self.wo.apply3(ctx, merged)
    }
}

/// Activation for feed-forward blocks.
#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Activation {
    Relu,
    Gelu,
}

/// Position-wise feed-forward block `d -> d_ff -> d`.
pub(crate) struct FeedForward {
    lin1: Linear,
    lin2: Linear,
    activation: Activation,
}

impl FeedForward {
    pub fn new(
        pb: &mut ParamSetBuilder,
        name: &str,
        d_model: usize,
        d_ff: usize,
        activation: Activation,
    ) -> FeedForward {
        FeedForward {
            lin1: Linear::new(pb, &format!("{name}.ff1"), d_model, d_ff, true),
            lin2: Linear::new(pb, &format!("{name}.ff2"), d_ff, d_model, true),
            activation,
        }
    }

    pub fn apply<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>) -> Var<'t> {
        let h = self.lin1.apply3(ctx, x);
        let h = match self.activation {
            Activation::Relu => h.relu(),
            Activation::Gelu => h.gelu(),
        };
        self.lin2.apply3(ctx, h)
    }
}

/// Post-norm encoder layer: self-attention and feed-forward, each wrapped in
/// residual + layer norm.
pub(crate) struct EncoderLayer {
    attn: MultiHeadAttention,
    ff: FeedForward,
    norm1: Norm,
    norm2: Norm,
}

impl EncoderLayer {
    pub fn new(
        pb: &mut ParamSetBuilder,
        name: &str,
        d_model: usize,
        d_ff: usize,
        activation: Activation,
    ) -> EncoderLayer {
        EncoderLayer {
            attn: MultiHeadAttention::new(pb, &format!("{name}.attn"), d_model),
            ff: FeedForward::new(pb, &format!("{name}.ff"), d_model, d_ff, activation),
            norm1: Norm::new(pb, &format!("{name}.norm1"), d_model),
            norm2: Norm::new(pb, &format!("{name}.norm2"), d_model),
        }
    }

    pub fn apply<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>) -> Var<'t> {
        let x = self.norm1.apply(ctx, x.add(self.attn.apply(ctx, x, x)));
        self.norm2.apply(ctx, x.add(self.ff.apply(ctx, x)))
    }
}

/// Trend component by moving average with replicated-edge padding; the
/// seasonal component is the residual. `kernel` must be odd.
pub(crate) fn moving_average<'t>(x: Var<'t>, kernel: usize) -> Var<'t> {
    debug_assert!(kernel % 2 == 1);
    let pad = (kernel - 1) / 2;
    x.pad_time(pad, pad, nembench_tensor::PadMode::Edge)
        .avg_pool1d(kernel, 1)
}

/// Splits `[b, t, c]` into (seasonal, trend) with `trend + seasonal == x`.
pub(crate) fn series_decomp<'t>(x: Var<'t>, kernel: usize) -> (Var<'t>, Var<'t>) {
    let trend = moving_average(x, kernel);
    (x.sub(trend), trend)
}

/// Default decomposition kernel shared by the decomposition-based families.
pub(crate) const DECOMP_KERNEL: usize = 25;

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    #[test]
    fn decomposition_reconstructs_exactly() {
        let tape = Tape::new();
        let data: Vec<f64> = (0..60).map(|i| (i as f64 * 0.3).sin() * 40.0 + 90.0).collect();
        let x = tape.leaf(
            ndarray::ArrayD::from_shape_vec(IxDyn(&[1, 60, 1]), data.clone()).unwrap(),
        );
        let (seasonal, trend) = series_decomp(x, 25);
        let sum = seasonal.add(trend).value();
        for (a, b) in sum.iter().zip(&data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn head_count_divides() {
        assert_eq!(head_count(32), 8);
        assert_eq!(head_count(512), 8);
        assert_eq!(head_count(12), 4);
        assert_eq!(head_count(6), 2);
        assert_eq!(head_count(7), 1);
    }

    #[test]
    fn attention_output_shape_and_finiteness() {
        let mut pb = ParamSetBuilder::new(5);
        let mha = MultiHeadAttention::new(&mut pb, "t", 16);
        let params = pb.finish();
        let tape = Tape::new();
        let mut binding = ParamBinding::new();
        let ctx = Ctx::new(&tape, &mut binding, &params);
        let data: Vec<f64> = (0..2 * 7 * 16).map(|i| ((i * 37) % 11) as f64 * 0.1 - 0.5).collect();
        let x = tape.leaf(ndarray::ArrayD::from_shape_vec(IxDyn(&[2, 7, 16]), data).unwrap());
        let y = mha.apply(&ctx, x, x);
        assert_eq!(y.shape(), vec![2, 7, 16]);
        assert!(y.value().iter().all(|v| v.is_finite()));
    }
}
