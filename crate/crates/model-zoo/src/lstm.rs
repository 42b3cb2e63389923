//! Stacked LSTM with a linear head over the final hidden state.
//!
//! Gate order is (input, forget, cell, output); each layer carries one bias
//! vector and all recurrent parameters use the uniform `1/sqrt(hidden)`
//! initialization.

use ndarray::{Array3, IxDyn};

use nembench_tensor::{Init, ParamBinding, ParamId, ParamSet, ParamSetBuilder, Tape, Var};

use crate::blocks::{Ctx, Linear};
use crate::{Architecture, ModelConfig};

pub(crate) struct LstmLayer {
    w_ih: ParamId,
    w_hh: ParamId,
    bias: ParamId,
    hidden: usize,
}

impl LstmLayer {
    pub fn new(pb: &mut ParamSetBuilder, name: &str, input: usize, hidden: usize) -> LstmLayer {
        let bound = 1.0 / (hidden as f64).sqrt();
        LstmLayer {
            w_ih: pb.alloc(&format!("{name}.w_ih"), &[input, 4 * hidden], Init::UniformSym(bound)),
            w_hh: pb.alloc(&format!("{name}.w_hh"), &[hidden, 4 * hidden], Init::UniformSym(bound)),
            bias: pb.alloc(&format!("{name}.bias"), &[4 * hidden], Init::UniformSym(bound)),
            hidden,
        }
    }

    /// Runs the layer over `[b, t, in]`, returning the full hidden sequence
    /// `[b, t, hidden]`.
    pub fn apply<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>) -> Var<'t> {
        let (b, t, input) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let h = self.hidden;
        let w_hh = ctx.var(self.w_hh);
        // Input contributions for every step in one product: [b, t, 4h].
        let pre_x = x
            .reshape(&[b * t, input])
            .matmul(ctx.var(self.w_ih))
            .add(ctx.var(self.bias))
            .reshape(&[b, t, 4 * h]);

        let mut hidden = ctx.tape.leaf(ndarray::ArrayD::zeros(IxDyn(&[b, h])));
        let mut cell = ctx.tape.leaf(ndarray::ArrayD::zeros(IxDyn(&[b, h])));
        let mut outputs = Vec::with_capacity(t);
        for step in 0..t {
            let pre = pre_x
                .slice_axis(1, step, step + 1)
                .reshape(&[b, 4 * h])
                .add(hidden.matmul(w_hh));
            let hc = pre.lstm_gates(cell); // [b, 2h] = (hidden | cell)
            hidden = hc.slice_axis(1, 0, h);
            cell = hc.slice_axis(1, h, 2 * h);
            outputs.push(hidden.reshape(&[b, 1, h]));
        }
        Var::concat(1, &outputs)
    }
}

pub(crate) struct LstmForecaster {
    layers: Vec<LstmLayer>,
    head: Linear,
    horizon: usize,
}

impl LstmForecaster {
    pub fn new(cfg: &ModelConfig, pb: &mut ParamSetBuilder) -> Self {
        let mut layers = Vec::new();
        let mut input = cfg.n_features;
        for l in 0..cfg.n_layers {
            layers.push(LstmLayer::new(pb, &format!("lstm{l}"), input, cfg.model_dim));
            input = cfg.model_dim;
        }
        LstmForecaster {
            layers,
            head: Linear::new(pb, "head", cfg.model_dim, cfg.horizon, true),
            horizon: cfg.horizon,
        }
    }
}

impl Architecture for LstmForecaster {
    fn forward<'t>(
        &self,
        tape: &'t Tape,
        binding: &mut ParamBinding,
        params: &ParamSet,
        input: &Array3<f64>,
    ) -> Var<'t> {
        let ctx = Ctx::new(tape, binding, params);
        let mut x = tape.leaf(input.clone().into_dyn());
        for layer in &self.layers {
            x = layer.apply(&ctx, x);
        }
        let t = x.shape()[1];
        let last = x.slice_axis(1, t - 1, t); // [b, 1, h]
        let (b, h) = (x.shape()[0], x.shape()[2]);
        let out = self.head.apply2(&ctx, last.reshape(&[b, h]));
        debug_assert_eq!(out.shape(), vec![b, self.horizon]);
        out
    }
}
