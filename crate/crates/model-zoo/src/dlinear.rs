//! Linear forecaster with trend-seasonal decomposition.
//!
//! The input price series is split by a moving average (kernel 25,
//! replicated edges) into trend and seasonal parts, and each part feeds its
//! own affine map from the lookback window to all horizon steps. Channels
//! are processed independently with shared weights, so only the price
//! channel contributes to the price forecast and the parameter count is
//! `2 * (lookback * horizon + horizon)` regardless of input width.

use ndarray::Array3;

use nembench_tensor::{ParamBinding, ParamSet, Tape, Var};

use crate::blocks::{series_decomp, Ctx, Linear, DECOMP_KERNEL};
use crate::{Architecture, ModelConfig};

pub(crate) struct DLinearForecaster {
    seasonal: Linear,
    trend: Linear,
    lookback: usize,
    horizon: usize,
}

impl DLinearForecaster {
    pub fn new(cfg: &ModelConfig, pb: &mut nembench_tensor::ParamSetBuilder) -> Self {
        DLinearForecaster {
            seasonal: Linear::new(pb, "seasonal", cfg.lookback, cfg.horizon, true),
            trend: Linear::new(pb, "trend", cfg.lookback, cfg.horizon, true),
            lookback: cfg.lookback,
            horizon: cfg.horizon,
        }
    }
}

impl Architecture for DLinearForecaster {
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
        // Price channel only; the shared per-channel maps make the other
        // channels irrelevant to the price output.
        let price = x.slice_axis(2, 0, 1); // [b, L, 1]
        let (seasonal, trend) = series_decomp(price, DECOMP_KERNEL);
        let seasonal = seasonal.reshape(&[b, self.lookback]);
        let trend = trend.reshape(&[b, self.lookback]);
        let out = self
            .seasonal
            .apply2(&ctx, seasonal)
            .add(self.trend.apply2(&ctx, trend));
        debug_assert_eq!(out.shape(), vec![b, self.horizon]);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Forecaster, ModelFamily};

    #[test]
    fn parameter_count_closed_form() {
        let cfg = ModelConfig::new(ModelFamily::DLinear, 1, 1)
            .with_setting(336, 48)
            .with_features(1);
        let model = Forecaster::build(cfg, 0).unwrap();
        assert_eq!(model.parameter_count(), 2 * (336 * 48 + 48));
        assert_eq!(model.parameter_count(), 32_352);
        // Width does not change the shared-map parameter count.
        let cfg5 = ModelConfig::new(ModelFamily::DLinear, 1, 1).with_setting(336, 48);
        assert_eq!(Forecaster::build(cfg5, 0).unwrap().parameter_count(), 32_352);
    }

    #[test]
    fn constant_input_matches_direct_affine_evaluation() {
        let cfg = ModelConfig::new(ModelFamily::DLinear, 1, 1)
            .with_setting(48, 8)
            .with_features(1);
        let model = Forecaster::build(cfg, 7).unwrap();
        let c = 0.35f64;
        let input = Array3::from_elem((1, 48, 1), c);
        let got = model.forecast(&input).unwrap();

        // Direct matrix evaluation of both affine heads. A constant window
        // has zero seasonal part, so the seasonal head contributes its bias.
        let bs = model.params.array(model.params_id("seasonal.b"));
        let wt = model.params.array(model.params_id("trend.w"));
        let bt = model.params.array(model.params_id("trend.b"));
        for j in 0..8 {
            let mut expect = bs[[j]] + bt[[j]];
            for t in 0..48 {
                expect += c * wt[[t, j]];
            }
            assert!(
                (got[[0, j]] - expect).abs() < 1e-10,
                "step {j}: {} vs {expect}",
                got[[0, j]]
            );
        }
    }

    #[test]
    fn same_seed_same_parameters() {
        let cfg = ModelConfig::new(ModelFamily::DLinear, 1, 1).with_setting(96, 12);
        let a = Forecaster::build(cfg, 42).unwrap();
        let b = Forecaster::build(cfg, 42).unwrap();
        assert_eq!(a.params.data(), b.params.data());
        let c = Forecaster::build(cfg, 43).unwrap();
        assert_ne!(a.params.data(), c.params.data());
    }
}
