//! Multiscale mixing forecaster.
//!
//! The input is processed channel-independently: every channel becomes its
//! own sample, embedded pointwise, and downsampled into a pyramid of coarser
//! series (average pooling, window 2, up to three levels). Each mixing block
//! decomposes every scale into seasonal and trend parts, mixes seasonal
//! information fine-to-coarse and trend information coarse-to-fine through
//! time-axis linear maps, and applies a pointwise feed-forward. Afterwards a
//! per-scale predictor maps each scale directly to the horizon and the
//! predictions are summed. Scales are instance-normalized and the output is
//! de-normalized with the finest scale's statistics.

use ndarray::Array3;

use nembench_tensor::{ParamBinding, ParamSet, ParamSetBuilder, Tape, Var};

use crate::blocks::{series_decomp, Ctx, Linear, DECOMP_KERNEL};
use crate::{Architecture, ModelConfig};

const DOWN_WINDOW: usize = 2;
const MAX_DOWN_LAYERS: usize = 3;

/// Two-layer map applied along the time axis.
struct TimeMap {
    lin1: Linear,
    lin2: Linear,
}

impl TimeMap {
    fn new(pb: &mut ParamSetBuilder, name: &str, t_in: usize, t_out: usize) -> TimeMap {
        TimeMap {
            lin1: Linear::new(pb, &format!("{name}.1"), t_in, t_out, true),
            lin2: Linear::new(pb, &format!("{name}.2"), t_out, t_out, true),
        }
    }

    /// `[n, t_in, d] -> [n, t_out, d]`.
    fn apply<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>) -> Var<'t> {
        let (n, t, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let xt = x.permute(&[0, 2, 1]).reshape(&[n * d, t]);
        let h = self.lin1.apply2(ctx, xt).gelu();
        let out = self.lin2.apply2(ctx, h);
        out.reshape(&[n, d, self.lin2.out_dim]).permute(&[0, 2, 1])
    }
}

struct MixingBlock {
    season_down: Vec<TimeMap>,
    trend_up: Vec<TimeMap>,
    out_ff: (Linear, Linear),
}

impl MixingBlock {
    fn new(pb: &mut ParamSetBuilder, name: &str, scale_lens: &[usize], d: usize, d_ff: usize) -> Self {
        let season_down = (0..scale_lens.len() - 1)
            .map(|i| {
                TimeMap::new(
                    pb,
                    &format!("{name}.season{i}"),
                    scale_lens[i],
                    scale_lens[i + 1],
                )
            })
            .collect();
        let trend_up = (0..scale_lens.len() - 1)
            .rev()
            .map(|i| {
                TimeMap::new(
                    pb,
                    &format!("{name}.trend{i}"),
                    scale_lens[i + 1],
                    scale_lens[i],
                )
            })
            .collect();
        MixingBlock {
            season_down,
            trend_up,
            out_ff: (
                Linear::new(pb, &format!("{name}.out1"), d, d_ff, true),
                Linear::new(pb, &format!("{name}.out2"), d_ff, d, true),
            ),
        }
    }

    fn apply<'t>(&self, ctx: &Ctx<'t, '_>, xs: &[Var<'t>]) -> Vec<Var<'t>> {
        let decomposed: Vec<(Var<'t>, Var<'t>)> = xs
            .iter()
            .map(|&x| series_decomp(x, DECOMP_KERNEL))
            .collect();

        // Seasonal mixing, finest to coarsest.
        let mut season_out = vec![decomposed[0].0];
        for (i, map) in self.season_down.iter().enumerate() {
            let fed = map.apply(ctx, season_out[i]);
            season_out.push(decomposed[i + 1].0.add(fed));
        }

        // Trend mixing, coarsest to finest.
        let n_scales = xs.len();
        let mut current = decomposed[n_scales - 1].1;
        let mut trend_out = vec![current];
        for (j, map) in self.trend_up.iter().enumerate() {
            let finer_idx = n_scales - 2 - j;
            let fed = map.apply(ctx, current);
            current = decomposed[finer_idx].1.add(fed);
            trend_out.push(current);
        }
        trend_out.reverse();

        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let mixed = season_out[i].add(trend_out[i]);
                let ff = self
                    .out_ff
                    .1
                    .apply3(ctx, self.out_ff.0.apply3(ctx, mixed).gelu());
                x.add(ff)
            })
            .collect()
    }
}

pub(crate) struct TimeMixerForecaster {
    embed: Linear,
    blocks: Vec<MixingBlock>,
    predictors: Vec<Linear>,
    projection: Linear,
    scale_lens: Vec<usize>,
    n_features: usize,
    horizon: usize,
}

/// Pyramid lengths for a lookback, truncating like stride-2 pooling.
fn pyramid(lookback: usize) -> Vec<usize> {
    let mut lens = vec![lookback];
    for _ in 0..MAX_DOWN_LAYERS {
        let next = lens.last().unwrap() / DOWN_WINDOW;
        if next < 2 {
            break;
        }
        lens.push(next);
    }
    lens
}

impl TimeMixerForecaster {
    pub fn new(cfg: &ModelConfig, pb: &mut ParamSetBuilder) -> Self {
        let d = cfg.model_dim;
        let d_ff = 2 * d;
        let scale_lens = pyramid(cfg.lookback);
        let blocks = (0..cfg.n_layers)
            .map(|l| MixingBlock::new(pb, &format!("mix{l}"), &scale_lens, d, d_ff))
            .collect();
        let predictors = scale_lens
            .iter()
            .enumerate()
            .map(|(i, &t)| Linear::new(pb, &format!("predict{i}"), t, cfg.horizon, true))
            .collect();
        TimeMixerForecaster {
            embed: Linear::new(pb, "embed", 1, d, true),
            blocks,
            predictors,
            projection: Linear::new(pb, "projection", d, 1, true),
            scale_lens,
            n_features: cfg.n_features,
            horizon: cfg.horizon,
        }
    }
}

impl Architecture for TimeMixerForecaster {
    fn forward<'t>(
        &self,
        tape: &'t Tape,
        binding: &mut ParamBinding,
        params: &ParamSet,
        input: &Array3<f64>,
    ) -> Var<'t> {
        let ctx = Ctx::new(tape, binding, params);
        let (b, l, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        debug_assert_eq!(c, self.n_features);
        let x = tape.leaf(input.clone().into_dyn());
        // Channel independence: every channel becomes its own sample.
        let per_channel = x.permute(&[0, 2, 1]).reshape(&[b * c, l, 1]);

        // Multi-scale pyramid with per-scale instance normalization.
        let mut scales = Vec::with_capacity(self.scale_lens.len());
        let mut stats0 = None;
        let mut cur = per_channel;
        for (i, &t_i) in self.scale_lens.iter().enumerate() {
            debug_assert_eq!(cur.shape()[1], t_i);
            let (norm, mean, std) = cur.instance_norm_time(1e-5);
            if i == 0 {
                stats0 = Some((mean, std));
            }
            scales.push(self.embed.apply3(&ctx, norm));
            if i + 1 < self.scale_lens.len() {
                cur = cur.avg_pool1d(DOWN_WINDOW, DOWN_WINDOW);
            }
        }

        for block in &self.blocks {
            scales = block.apply(&ctx, &scales);
        }

        // Future mixing: per-scale direct predictors, summed.
        let mut sum: Option<Var<'t>> = None;
        for (i, enc) in scales.iter().enumerate() {
            let over_time = {
                let (n, t, d) = (enc.shape()[0], enc.shape()[1], enc.shape()[2]);
                let xt = enc.permute(&[0, 2, 1]).reshape(&[n * d, t]);
                self.predictors[i]
                    .apply2(&ctx, xt)
                    .reshape(&[n, d, self.horizon])
                    .permute(&[0, 2, 1]) // [n, H, d]
            };
            let pred = self.projection.apply3(&ctx, over_time); // [n, H, 1]
            sum = Some(match sum {
                Some(acc) => acc.add(pred),
                None => pred,
            });
        }
        let merged = sum.expect("at least one scale");

        // De-normalize with the finest scale's statistics, then keep the
        // price channel.
        let (mean, std) = stats0.expect("scale 0 stats");
        let out = merged
            .mul(std.reshape(&[b * c, 1, 1]))
            .add(mean.reshape(&[b * c, 1, 1]));
        let out = out
            .reshape(&[b, c, self.horizon])
            .slice_axis(1, 0, 1)
            .reshape(&[b, self.horizon]);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pyramid_truncates_alongside_pooling() {
        assert_eq!(pyramid(336), vec![336, 168, 84, 42]);
        assert_eq!(pyramid(672), vec![672, 336, 168, 84]);
        assert_eq!(pyramid(48), vec![48, 24, 12, 6]);
        assert_eq!(pyramid(7), vec![7, 3]);
    }
}
