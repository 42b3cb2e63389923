//! Convolutional-recurrent hybrid: a same-padded 1-D convolution stack over
//! the input window, ReLU, a recurrent layer on the extracted features, and
//! a linear head from the final hidden state to all horizon steps. Filters
//! and kernel size come from the search grid.

use ndarray::Array3;

use nembench_tensor::{ParamBinding, ParamSet, ParamSetBuilder, Tape, Var};

use crate::blocks::{Ctx, Linear};
use crate::lstm::LstmLayer;
use crate::{Architecture, ModelConfig};

pub(crate) struct CnnLstmForecaster {
    conv: Conv1d,
    lstm: LstmLayer,
    head: Linear,
    horizon: usize,
}

/// Same-padded stride-1 convolution along time, `[b, t, c_in] -> [b, t, f]`.
pub(crate) struct Conv1d {
    weights: Linear,
    kernel: usize,
}

impl Conv1d {
    pub fn new(
        pb: &mut ParamSetBuilder,
        name: &str,
        c_in: usize,
        filters: usize,
        kernel: usize,
    ) -> Conv1d {
        // fan_in = c_in * kernel, matching the dense-layer convention.
        Conv1d {
            weights: Linear::new(pb, name, c_in * kernel, filters, true),
            kernel,
        }
    }

    pub fn apply<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>) -> Var<'t> {
        let (b, t) = (x.shape()[0], x.shape()[1]);
        let pad = (self.kernel - 1) / 2;
        let cols = x
            .pad_time(pad, pad, nembench_tensor::PadMode::Zero)
            .unfold1d(self.kernel, 1); // [b, t, k*c]
        self.weights
            .apply2(ctx, cols.reshape(&[b * t, self.weights.in_dim]))
            .reshape(&[b, t, self.weights.out_dim])
    }
}

impl CnnLstmForecaster {
    pub fn new(cfg: &ModelConfig, pb: &mut ParamSetBuilder) -> Self {
        let filters = cfg.cnn_filters.expect("validated");
        let kernel = cfg.cnn_kernel.expect("validated");
        CnnLstmForecaster {
            conv: Conv1d::new(pb, "conv", cfg.n_features, filters, kernel),
            lstm: LstmLayer::new(pb, "lstm", filters, cfg.model_dim),
            head: Linear::new(pb, "head", cfg.model_dim, cfg.horizon, true),
            horizon: cfg.horizon,
        }
    }
}

impl Architecture for CnnLstmForecaster {
    fn forward<'t>(
        &self,
        tape: &'t Tape,
        binding: &mut ParamBinding,
        params: &ParamSet,
        input: &Array3<f64>,
    ) -> Var<'t> {
        let ctx = Ctx::new(tape, binding, params);
        let x = tape.leaf(input.clone().into_dyn());
        let features = self.conv.apply(&ctx, x).relu();
        let seq = self.lstm.apply(&ctx, features);
        let (b, t, h) = (seq.shape()[0], seq.shape()[1], seq.shape()[2]);
        let last = seq.slice_axis(1, t - 1, t).reshape(&[b, h]);
        let out = self.head.apply2(&ctx, last);
        debug_assert_eq!(out.shape(), vec![b, self.horizon]);
        out
    }
}
