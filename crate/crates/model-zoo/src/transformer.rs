//! Encoder-only Transformer baseline with learned positional embeddings and
//! a linear head over the flattened encoder output, so one forward pass
//! emits every horizon step. Feed-forward width is four times the model
//! dimension with ReLU, post-norm residuals, and up to eight heads.

use ndarray::Array3;

use nembench_tensor::{Init, ParamBinding, ParamId, ParamSet, ParamSetBuilder, Tape, Var};

use crate::blocks::{Activation, Ctx, EncoderLayer, Linear};
use crate::{Architecture, ModelConfig};

pub(crate) struct TransformerForecaster {
    input_proj: Linear,
    positional: ParamId,
    layers: Vec<EncoderLayer>,
    head: Linear,
    lookback: usize,
    horizon: usize,
    d_model: usize,
}

impl TransformerForecaster {
    pub fn new(cfg: &ModelConfig, pb: &mut ParamSetBuilder) -> Self {
        let d = cfg.model_dim;
        let layers = (0..cfg.n_layers)
            .map(|l| EncoderLayer::new(pb, &format!("enc{l}"), d, 4 * d, Activation::Relu))
            .collect();
        TransformerForecaster {
            input_proj: Linear::new(pb, "input_proj", cfg.n_features, d, true),
            positional: pb.alloc("positional", &[cfg.lookback, d], Init::Normal(0.02)),
            layers,
            head: Linear::new(pb, "head", cfg.lookback * d, cfg.horizon, true),
            lookback: cfg.lookback,
            horizon: cfg.horizon,
            d_model: d,
        }
    }
}

impl Architecture for TransformerForecaster {
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
        let mut h = self
            .input_proj
            .apply3(&ctx, x)
            .add(ctx.var(self.positional)); // positions broadcast over batch
        for layer in &self.layers {
            h = layer.apply(&ctx, h);
        }
        let flat = h.reshape(&[b, self.lookback * self.d_model]);
        let out = self.head.apply2(&ctx, flat);
        debug_assert_eq!(out.shape(), vec![b, self.horizon]);
        out
    }
}
