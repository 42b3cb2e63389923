//! Multi-periodic 2-D convolution forecaster.
//!
//! The embedded sequence is first extended along time to cover the horizon.
//! Each block finds the k strongest frequencies in the spectrum, folds the
//! 1-D sequence into a `(cycles x period)` 2-D tensor per frequency, applies
//! an inception group of same-padded 2-D convolutions, unfolds back, and
//! aggregates the per-period results weighted by softmaxed spectral
//! amplitudes, with a residual connection. Reference constants: top-k = 5,
//! six inception kernels (1, 3, ..., 11), inception width equal to the model
//! dimension.

use ndarray::Array3;
use rustfft::{num_complex::Complex64, FftPlanner};

use nembench_tensor::{ParamBinding, ParamId, ParamSet, ParamSetBuilder, Tape, Var};

use crate::blocks::{Ctx, Linear, Norm};
use crate::{Architecture, ModelConfig};

const TOP_K: usize = 5;
const NUM_KERNELS: usize = 6;

/// Top-k frequency indices (1..=T/2) of a real series by spectral amplitude,
/// strongest first; ties break toward the lower frequency. On a pure
/// sinusoid of period `p` dividing `T`, the leading index is exactly `T/p`.
pub fn dominant_frequencies(series: &[f64], k: usize) -> Vec<usize> {
    let t = series.len();
    if t < 4 {
        return vec![1; k.min(1)];
    }
    let mut buf: Vec<Complex64> = series.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(t).process(&mut buf);
    let mut amps: Vec<(usize, f64)> = (1..=t / 2).map(|f| (f, buf[f].norm())).collect();
    amps.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    amps.into_iter().take(k).map(|(f, _)| f).collect()
}

/// Inception group: same-padded square convolutions of sizes 1, 3, ..., and
/// the mean of their outputs.
struct Inception {
    kernels: Vec<(ParamId, ParamId, usize)>, // weight, bias, size
}

impl Inception {
    fn new(pb: &mut ParamSetBuilder, name: &str, c_in: usize, c_out: usize) -> Inception {
        let kernels = (0..NUM_KERNELS)
            .map(|i| {
                let k = 2 * i + 1;
                let bound = 1.0 / ((c_in * k * k) as f64).sqrt();
                let w = pb.alloc(
                    &format!("{name}.k{k}.w"),
                    &[k * k * c_in, c_out],
                    nembench_tensor::Init::UniformSym(bound),
                );
                let b = pb.alloc(
                    &format!("{name}.k{k}.b"),
                    &[c_out],
                    nembench_tensor::Init::UniformSym(bound),
                );
                (w, b, k)
            })
            .collect();
        Inception { kernels }
    }

    /// `[b, rows, cols, c_in] -> [b, rows, cols, c_out]`.
    fn apply<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>) -> Var<'t> {
        let mut acc: Option<Var<'t>> = None;
        for &(w, b, k) in &self.kernels {
            let y = x.conv2d_same(ctx.var(w), ctx.var(b), k, k);
            acc = Some(match acc {
                Some(a) => a.add(y),
                None => y,
            });
        }
        acc.unwrap().scale(1.0 / self.kernels.len() as f64)
    }
}

struct TimesBlock {
    conv_in: Inception,
    conv_out: Inception,
}

impl TimesBlock {
    fn new(pb: &mut ParamSetBuilder, name: &str, d: usize, d_ff: usize) -> TimesBlock {
        TimesBlock {
            conv_in: Inception::new(pb, &format!("{name}.in"), d, d_ff),
            conv_out: Inception::new(pb, &format!("{name}.out"), d_ff, d),
        }
    }

    fn apply<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>) -> Var<'t> {
        let (b, t, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);

        // Period selection on the batch/channel mean, detached from the
        // gradient path.
        let mean_series: Vec<f64> = x.with_value(|v| {
            let mut out = vec![0.0; t];
            for bi in 0..b {
                for ti in 0..t {
                    for di in 0..d {
                        out[ti] += v[[bi, ti, di]];
                    }
                }
            }
            out.iter_mut().for_each(|o| *o /= (b * d) as f64);
            out
        });
        let freqs = dominant_frequencies(&mean_series, TOP_K);

        // Differentiable per-sample spectral amplitudes at the selected
        // frequencies, averaged over channels, for the aggregation weights.
        let tau = std::f64::consts::TAU;
        let mut basis = ndarray::Array2::<f64>::zeros((t, 2 * freqs.len()));
        for (i, &f) in freqs.iter().enumerate() {
            for ti in 0..t {
                let angle = tau * (f * ti) as f64 / t as f64;
                basis[[ti, 2 * i]] = angle.cos();
                basis[[ti, 2 * i + 1]] = -angle.sin();
            }
        }
        let basis = ctx.tape.leaf(basis.into_dyn());
        let spectral = x
            .permute(&[0, 2, 1])
            .reshape(&[b * d, t])
            .matmul(basis) // [b*d, 2k]
            .square()
            .reshape(&[b * d, freqs.len(), 2])
            .sum_axis_keep(2)
            .add_scalar(1e-12)
            .sqrt()
            .reshape(&[b, d, freqs.len()])
            .mean_axis_keep(1)
            .reshape(&[b, freqs.len()]);
        let weights = spectral.softmax_last(); // [b, k]

        let mut aggregated: Option<Var<'t>> = None;
        for (i, &f) in freqs.iter().enumerate() {
            let period = (t / f).max(1);
            let rows = t.div_ceil(period);
            let padded = rows * period;
            let folded = x
                .pad_time(0, padded - t, nembench_tensor::PadMode::Zero)
                .reshape(&[b, rows, period, d]);
            let conv = self.conv_out.apply(ctx, self.conv_in.apply(ctx, folded).gelu());
            let back = conv.reshape(&[b, padded, d]).slice_axis(1, 0, t);
            let w_i = weights.slice_axis(1, i, i + 1).reshape(&[b, 1, 1]);
            let weighted = back.mul(w_i);
            aggregated = Some(match aggregated {
                Some(a) => a.add(weighted),
                None => weighted,
            });
        }
        x.add(aggregated.expect("at least one period"))
    }
}

pub(crate) struct TimesNetForecaster {
    embed: Linear,
    predict_time: Linear,
    blocks: Vec<TimesBlock>,
    norms: Vec<Norm>,
    projection: Linear,
    lookback: usize,
    horizon: usize,
    d_model: usize,
}

impl TimesNetForecaster {
    pub fn new(cfg: &ModelConfig, pb: &mut ParamSetBuilder) -> Self {
        let d = cfg.model_dim;
        let d_ff = d; // inception width follows the compact reference configs
        let blocks = (0..cfg.n_layers)
            .map(|l| TimesBlock::new(pb, &format!("block{l}"), d, d_ff))
            .collect();
        let norms = (0..cfg.n_layers)
            .map(|l| Norm::new(pb, &format!("norm{l}"), d))
            .collect();
        TimesNetForecaster {
            embed: Linear::new(pb, "embed", cfg.n_features, d, true),
            predict_time: Linear::new(
                pb,
                "predict_time",
                cfg.lookback,
                cfg.lookback + cfg.horizon,
                true,
            ),
            blocks,
            norms,
            projection: Linear::new(pb, "projection", d, 1, true),
            lookback: cfg.lookback,
            horizon: cfg.horizon,
            d_model: d,
        }
    }
}

impl Architecture for TimesNetForecaster {
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

        let embedded = self.embed.apply3(&ctx, xn);
        let pos = tape.leaf(nembench_tensor::sinusoidal_encoding(
            self.lookback,
            self.d_model,
        ));
        let embedded = embedded.add(pos);

        // Extend along time to cover the horizon.
        let extended_len = self.lookback + self.horizon;
        let mut h = {
            let xt = embedded
                .permute(&[0, 2, 1])
                .reshape(&[b * self.d_model, self.lookback]);
            self.predict_time
                .apply2(&ctx, xt)
                .reshape(&[b, self.d_model, extended_len])
                .permute(&[0, 2, 1])
        };
        for (block, norm) in self.blocks.iter().zip(&self.norms) {
            h = norm.apply(&ctx, block.apply(&ctx, h));
        }
        let dec = self.projection.apply3(&ctx, h); // [b, extended, 1]
        let out = dec
            .slice_axis(1, self.lookback, extended_len)
            .reshape(&[b, self.horizon]);

        let price_std = std.slice_axis(2, 0, 1).reshape(&[b, 1]);
        let price_mean = mean.slice_axis(2, 0, 1).reshape(&[b, 1]);
        let out = out.mul(price_std).add(price_mean);
        debug_assert_eq!(out.shape(), vec![b, self.horizon]);
        out
    }
}
