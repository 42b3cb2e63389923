//! Inverted Transformer: each variate's whole lookback series becomes one
//! token, attention runs across variates, and a per-token projection maps
//! the price token to the horizon. Token count therefore equals the channel
//! count, independent of the lookback length. Inputs are instance-normalized
//! per variate and the price forecast is de-normalized with the price
//! statistics.

use ndarray::Array3;

use nembench_tensor::{ParamBinding, ParamSet, ParamSetBuilder, Tape, Var};

use crate::blocks::{Activation, Ctx, EncoderLayer, Linear};
use crate::{Architecture, ModelConfig};

pub(crate) struct ITransformerForecaster {
    embed: Linear,
    layers: Vec<EncoderLayer>,
    head: Linear,
    n_features: usize,
    horizon: usize,
}

impl ITransformerForecaster {
    pub fn new(cfg: &ModelConfig, pb: &mut ParamSetBuilder) -> Self {
        let d = cfg.model_dim;
        let layers = (0..cfg.n_layers)
            .map(|l| EncoderLayer::new(pb, &format!("enc{l}"), d, 4 * d, Activation::Gelu))
            .collect();
        ITransformerForecaster {
            embed: Linear::new(pb, "variate_embed", cfg.lookback, d, true),
            layers,
            head: Linear::new(pb, "head", d, cfg.horizon, true),
            n_features: cfg.n_features,
            horizon: cfg.horizon,
        }
    }

    /// One token per variate.
    pub fn token_count(&self) -> usize {
        self.n_features
    }
}

impl Architecture for ITransformerForecaster {
    fn forward<'t>(
        &self,
        tape: &'t Tape,
        binding: &mut ParamBinding,
        params: &ParamSet,
        input: &Array3<f64>,
    ) -> Var<'t> {
        let ctx = Ctx::new(tape, binding, params);
        let b = input.shape()[0];
        let x = tape.leaf(input.clone().into_dyn());
        let (xn, mean, std) = x.instance_norm_time(1e-5);
        // [b, L, c] -> variate tokens [b, c, d]
        let tokens = self.embed.apply3(&ctx, xn.permute(&[0, 2, 1]));
        debug_assert_eq!(tokens.shape()[1], self.token_count());
        let mut h = tokens;
        for layer in &self.layers {
            h = layer.apply(&ctx, h);
        }
        let price_token = h.slice_axis(1, 0, 1).reshape(&[b, h.shape()[2]]);
        let out = self.head.apply2(&ctx, price_token);
        // De-normalize with the price channel statistics.
        let price_std = std.slice_axis(2, 0, 1).reshape(&[b, 1]);
        let price_mean = mean.slice_axis(2, 0, 1).reshape(&[b, 1]);
        let out = out.mul(price_std).add(price_mean);
        debug_assert_eq!(out.shape(), vec![b, self.horizon]);
        out
    }
}
