//! Finite-difference gate for the hand-built architectures: compares the
//! analytic gradient of a mean-squared-error loss against central
//! differences over every parameter.

use ndarray::{Array2, Array3};

use nembench_tensor::{gradient_check, ParamBinding, ParamSet, Tape, Var};

use crate::{Forecaster, ModelError};

struct ModelLoss<'m> {
    model: &'m Forecaster,
    batch: Array3<f64>,
    targets: Array2<f64>,
}

impl nembench_tensor::LossFn for ModelLoss<'_> {
    fn loss<'t>(&self, tape: &'t Tape, binding: &mut ParamBinding, params: &ParamSet) -> Var<'t> {
        // Forward through the architecture with the *probed* parameters.
        let out = {
            let probe = ForecasterView {
                model: self.model,
                params,
            };
            probe.forward(tape, binding, &self.batch)
        };
        let target = tape.leaf(self.targets.clone().into_dyn());
        out.sub(target).square().mean_all()
    }
}

struct ForecasterView<'m> {
    model: &'m Forecaster,
    params: &'m ParamSet,
}

impl ForecasterView<'_> {
    fn forward<'t>(
        &self,
        tape: &'t Tape,
        binding: &mut ParamBinding,
        batch: &Array3<f64>,
    ) -> Var<'t> {
        self.model.arch_forward(tape, binding, self.params, batch)
    }
}

impl Forecaster {
    pub(crate) fn arch_forward<'t>(
        &self,
        tape: &'t Tape,
        binding: &mut ParamBinding,
        params: &ParamSet,
        batch: &Array3<f64>,
    ) -> Var<'t> {
        self.arch.forward(tape, binding, params, batch)
    }
}

/// Max relative error between analytic and central-difference gradients of
/// the MSE loss on `(batch, targets)`. Intended for small models
/// (2 forward passes per parameter).
pub fn gradient_check_model(
    model: &Forecaster,
    batch: &Array3<f64>,
    targets: &Array2<f64>,
    step: f64,
) -> Result<f64, ModelError> {
    if batch.shape()[1] != model.config.lookback || batch.shape()[2] != model.config.n_features {
        return Err(ModelError::Shape(format!(
            "gradient check batch {:?} does not match config",
            batch.shape()
        )));
    }
    let loss = ModelLoss {
        model,
        batch: batch.clone(),
        targets: targets.clone(),
    };
    let mut params = model.params.clone();
    Ok(gradient_check(&loss, &mut params, step))
}
