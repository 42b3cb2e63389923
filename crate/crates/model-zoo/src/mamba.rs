//! Selective state-space forecaster.
//!
//! Each block expands the model dimension, applies a short causal depthwise
//! convolution, derives input-dependent step sizes and state projections,
//! runs the selective scan recurrence, and gates the result. Blocks sit in a
//! pre-norm residual stack; the final position's representation feeds a
//! linear head. Reference constants follow the original design: state
//! dimension 16, convolution width 4, expansion factor 2, and step-size rank
//! `ceil(d/16)` with the log-uniform bias initialization over [0.001, 0.1].

use ndarray::Array3;

use nembench_tensor::{Init, ParamBinding, ParamId, ParamSet, ParamSetBuilder, Tape, Var};

use crate::blocks::{Ctx, Linear};
use crate::{Architecture, ModelConfig};

const D_STATE: usize = 16;
const D_CONV: usize = 4;
const EXPAND: usize = 2;

struct MambaBlock {
    norm_gain: ParamId,
    in_proj: Linear,
    conv_w: ParamId,
    conv_b: ParamId,
    x_proj: Linear,
    dt_proj: Linear,
    a_log: ParamId,
    d_skip: ParamId,
    out_proj: Linear,
    d_inner: usize,
    dt_rank: usize,
}

impl MambaBlock {
    fn new(pb: &mut ParamSetBuilder, name: &str, d_model: usize) -> MambaBlock {
        let d_inner = EXPAND * d_model;
        let dt_rank = d_model.div_ceil(16);
        let conv_bound = 1.0 / (D_CONV as f64).sqrt();

        let norm_gain = pb.alloc(&format!("{name}.rms.gain"), &[d_model], Init::Const(1.0));
        let in_proj = Linear::new(pb, &format!("{name}.in_proj"), d_model, 2 * d_inner, false);
        let conv_w = pb.alloc(
            &format!("{name}.conv.w"),
            &[D_CONV, d_inner],
            Init::UniformSym(conv_bound),
        );
        let conv_b = pb.alloc(
            &format!("{name}.conv.b"),
            &[d_inner],
            Init::UniformSym(conv_bound),
        );
        let x_proj = Linear::new(
            pb,
            &format!("{name}.x_proj"),
            d_inner,
            dt_rank + 2 * D_STATE,
            false,
        );

        // Step-size projection: weight U(+-dt_rank^-1/2); bias chosen so
        // softplus(bias) is log-uniform over [0.001, 0.1].
        let dt_bound = 1.0 / (dt_rank as f64).sqrt();
        let dt_w = pb.alloc(
            &format!("{name}.dt_proj.w"),
            &[dt_rank, d_inner],
            Init::UniformSym(dt_bound),
        );
        let dt_b = pb.alloc_with(&format!("{name}.dt_proj.b"), &[d_inner], |rng| {
            use rand::Rng;
            let (lo, hi) = (0.001f64.ln(), 0.1f64.ln());
            let dt = (lo + (hi - lo) * rng.random::<f64>()).exp();
            // inverse of softplus
            dt + (-(-dt).exp_m1()).ln()
        });
        let dt_proj = Linear {
            w: dt_w,
            b: Some(dt_b),
            in_dim: dt_rank,
            out_dim: d_inner,
        };

        let a_init: Vec<f64> = (0..d_inner)
            .flat_map(|_| (1..=D_STATE).map(|n| (n as f64).ln()))
            .collect();
        let a_log = pb.alloc(
            &format!("{name}.a_log"),
            &[d_inner, D_STATE],
            Init::Values(a_init),
        );
        let d_skip = pb.alloc(&format!("{name}.d"), &[d_inner], Init::Const(1.0));
        let out_proj = Linear::new(pb, &format!("{name}.out_proj"), d_inner, d_model, false);

        MambaBlock {
            norm_gain,
            in_proj,
            conv_w,
            conv_b,
            x_proj,
            dt_proj,
            a_log,
            d_skip,
            out_proj,
            d_inner,
            dt_rank,
        }
    }

    fn rms_norm<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>) -> Var<'t> {
        let ms = x.square().mean_axis_keep(2).add_scalar(1e-6).sqrt();
        x.div(ms).mul(ctx.var(self.norm_gain))
    }

    /// Pre-norm residual block over `[b, t, d]`.
    fn apply<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>) -> Var<'t> {
        let (b, t) = (x.shape()[0], x.shape()[1]);
        let d_inner = self.d_inner;
        let xn = self.rms_norm(ctx, x);
        let proj = self.in_proj.apply3(ctx, xn); // [b, t, 2*d_inner]
        let stream = proj.slice_axis(2, 0, d_inner);
        let gate = proj.slice_axis(2, d_inner, 2 * d_inner);

        // Causal depthwise convolution, width 4.
        let cols = stream
            .pad_time(D_CONV - 1, 0, nembench_tensor::PadMode::Zero)
            .unfold1d(D_CONV, 1) // [b, t, k*d_inner], position-major
            .reshape(&[b, t, D_CONV, d_inner]);
        let conv = cols
            .mul(ctx.var(self.conv_w))
            .sum_axis_keep(2)
            .reshape(&[b, t, d_inner])
            .add(ctx.var(self.conv_b))
            .silu();

        // Input-dependent step, input and output projections.
        let projected = self.x_proj.apply3(ctx, conv);
        let dt_low = projected.slice_axis(2, 0, self.dt_rank);
        let b_mat = projected.slice_axis(2, self.dt_rank, self.dt_rank + D_STATE);
        let c_mat = projected.slice_axis(2, self.dt_rank + D_STATE, self.dt_rank + 2 * D_STATE);
        let delta = self.dt_proj.apply3(ctx, dt_low).softplus();

        let a = ctx.var(self.a_log).exp().neg();
        let scanned = delta.selective_scan(a, b_mat, c_mat, conv);
        let y = scanned
            .add(conv.mul(ctx.var(self.d_skip)))
            .mul(gate.silu());
        x.add(self.out_proj.apply3(ctx, y))
    }
}

pub(crate) struct MambaForecaster {
    embed: Linear,
    blocks: Vec<MambaBlock>,
    final_gain: ParamId,
    head: Linear,
    horizon: usize,
}

impl MambaForecaster {
    pub fn new(cfg: &ModelConfig, pb: &mut ParamSetBuilder) -> Self {
        let d = cfg.model_dim;
        let blocks = (0..cfg.n_layers)
            .map(|l| MambaBlock::new(pb, &format!("block{l}"), d))
            .collect();
        MambaForecaster {
            embed: Linear::new(pb, "embed", cfg.n_features, d, true),
            blocks,
            final_gain: pb.alloc("final_rms.gain", &[d], Init::Const(1.0)),
            head: Linear::new(pb, "head", d, cfg.horizon, true),
            horizon: cfg.horizon,
        }
    }
}

impl Architecture for MambaForecaster {
    fn forward<'t>(
        &self,
        tape: &'t Tape,
        binding: &mut ParamBinding,
        params: &ParamSet,
        input: &Array3<f64>,
    ) -> Var<'t> {
        let ctx = Ctx::new(tape, binding, params);
        let x = tape.leaf(input.clone().into_dyn());
        let mut h = self.embed.apply3(&ctx, x);
        for block in &self.blocks {
            h = block.apply(&ctx, h);
        }
        let ms = h.square().mean_axis_keep(2).add_scalar(1e-6).sqrt();
        let h = h.div(ms).mul(ctx.var(self.final_gain));
        let (b, t, d) = (h.shape()[0], h.shape()[1], h.shape()[2]);
        let last = h.slice_axis(1, t - 1, t).reshape(&[b, d]);
        let out = self.head.apply2(&ctx, last);
        debug_assert_eq!(out.shape(), vec![b, self.horizon]);
        out
    }
}
