//! Patch-attention forecaster with exogenous cross-attention.
//!
//! The price series is cut into non-overlapping patches (length 16) that
//! become tokens alongside one learnable global token. Encoder layers run
//! self-attention over the patch+global tokens, then let the global token
//! cross-attend to variate tokens embedding every input channel's whole
//! series. A flatten head maps all tokens to the horizon. Inputs are
//! instance-normalized per channel; the forecast is de-normalized with the
//! price statistics.

use ndarray::Array3;

use nembench_tensor::{
    sinusoidal_encoding, Init, ParamBinding, ParamId, ParamSet, ParamSetBuilder, Tape, Var,
};

use crate::blocks::{Activation, Ctx, FeedForward, Linear, MultiHeadAttention, Norm};
use crate::{Architecture, ModelConfig};

const PATCH_LEN: usize = 16;

struct TimeXerLayer {
    self_attn: MultiHeadAttention,
    cross_attn: MultiHeadAttention,
    ff: FeedForward,
    norm1: Norm,
    norm2: Norm,
    norm3: Norm,
}

impl TimeXerLayer {
    fn new(pb: &mut ParamSetBuilder, name: &str, d: usize, d_ff: usize) -> TimeXerLayer {
        TimeXerLayer {
            self_attn: MultiHeadAttention::new(pb, &format!("{name}.self"), d),
            cross_attn: MultiHeadAttention::new(pb, &format!("{name}.cross"), d),
            ff: FeedForward::new(pb, &format!("{name}.ff"), d, d_ff, Activation::Gelu),
            norm1: Norm::new(pb, &format!("{name}.norm1"), d),
            norm2: Norm::new(pb, &format!("{name}.norm2"), d),
            norm3: Norm::new(pb, &format!("{name}.norm3"), d),
        }
    }

    /// `tokens: [b, n+1, d]` (patches plus trailing global token),
    /// `exog: [b, c, d]`.
    fn apply<'t>(&self, ctx: &Ctx<'t, '_>, tokens: Var<'t>, exog: Var<'t>) -> Var<'t> {
        let n_tok = tokens.shape()[1];
        let x = self
            .norm1
            .apply(ctx, tokens.add(self.self_attn.apply(ctx, tokens, tokens)));
        // Only the global token looks at the exogenous variates.
        let glb = x.slice_axis(1, n_tok - 1, n_tok);
        let glb = self
            .norm2
            .apply(ctx, glb.add(self.cross_attn.apply(ctx, glb, exog)));
        let patches = x.slice_axis(1, 0, n_tok - 1);
        let x = Var::concat(1, &[patches, glb]);
        self.norm3.apply(ctx, x.add(self.ff.apply(ctx, x)))
    }
}

pub(crate) struct TimeXerForecaster {
    patch_embed: Linear,
    glb_token: ParamId,
    exog_embed: Linear,
    layers: Vec<TimeXerLayer>,
    head: Linear,
    n_patches: usize,
    d_model: usize,
    horizon: usize,
}

impl TimeXerForecaster {
    pub fn new(cfg: &ModelConfig, pb: &mut ParamSetBuilder) -> Self {
        let d = cfg.model_dim;
        let n_patches = cfg.lookback.div_ceil(PATCH_LEN);
        let layers = (0..cfg.n_layers)
            .map(|l| TimeXerLayer::new(pb, &format!("enc{l}"), d, 4 * d))
            .collect();
        TimeXerForecaster {
            patch_embed: Linear::new(pb, "patch_embed", PATCH_LEN, d, true),
            glb_token: pb.alloc("glb_token", &[1, 1, d], Init::Normal(1.0)),
            exog_embed: Linear::new(pb, "exog_embed", cfg.lookback, d, true),
            layers,
            head: Linear::new(pb, "head", (n_patches + 1) * d, cfg.horizon, true),
            n_patches,
            d_model: d,
            horizon: cfg.horizon,
        }
    }
}

impl Architecture for TimeXerForecaster {
    fn forward<'t>(
        &self,
        tape: &'t Tape,
        binding: &mut ParamBinding,
        params: &ParamSet,
        input: &Array3<f64>,
    ) -> Var<'t> {
        let ctx = Ctx::new(tape, binding, params);
        let (b, l, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let x = tape.leaf(input.clone().into_dyn());
        let (xn, mean, std) = x.instance_norm_time(1e-5);

        // Endogenous patch tokens from the price channel.
        let price = xn.slice_axis(2, 0, 1); // [b, l, 1]
        let padded_len = self.n_patches * PATCH_LEN;
        let price = if padded_len > l {
            price.pad_time(0, padded_len - l, nembench_tensor::PadMode::Edge)
        } else {
            price
        };
        let patches = price.reshape(&[b, self.n_patches, PATCH_LEN]);
        let pos = tape.leaf(sinusoidal_encoding(self.n_patches, self.d_model));
        let patch_tokens = self.patch_embed.apply3(&ctx, patches).add(pos);

        // Broadcast the learnable global token across the batch.
        let glb = ctx.var(self.glb_token);
        let zeros = tape.leaf(ndarray::ArrayD::zeros(ndarray::IxDyn(&[
            b,
            1,
            self.d_model,
        ])));
        let glb = zeros.add(glb); // [b, 1, d]
        let mut tokens = Var::concat(1, &[patch_tokens, glb]);

        // Variate tokens for every channel's whole series.
        let exog = self.exog_embed.apply3(&ctx, xn.permute(&[0, 2, 1])); // [b, c, d]
        let _ = c;

        for layer in &self.layers {
            tokens = layer.apply(&ctx, tokens, exog);
        }

        let flat = tokens.reshape(&[b, (self.n_patches + 1) * self.d_model]);
        let out = self.head.apply2(&ctx, flat);
        let price_std = std.slice_axis(2, 0, 1).reshape(&[b, 1]);
        let price_mean = mean.slice_axis(2, 0, 1).reshape(&[b, 1]);
        let out = out.mul(price_std).add(price_mean);
        debug_assert_eq!(out.shape(), vec![b, self.horizon]);
        out
    }
}
