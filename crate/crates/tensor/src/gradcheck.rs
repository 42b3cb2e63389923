//! Finite-difference verification of analytic gradients.

use crate::params::{ParamBinding, ParamSet};
use crate::tape::{Tape, Var};

/// Builds a scalar loss from the current parameter values.
pub trait LossFn {
    fn loss<'t>(&self, tape: &'t Tape, binding: &mut ParamBinding, params: &ParamSet) -> Var<'t>;
}

impl<F> LossFn for F
where
    F: for<'t> Fn(&'t Tape, &mut ParamBinding, &ParamSet) -> Var<'t>,
{
    fn loss<'t>(&self, tape: &'t Tape, binding: &mut ParamBinding, params: &ParamSet) -> Var<'t> {
        self(tape, binding, params)
    }
}

/// Identity helper that pins a closure to the higher-ranked signature
/// [`LossFn`] requires; without it closure lifetime inference falls over.
pub fn loss_fn<F>(f: F) -> F
where
    F: for<'t> Fn(&'t Tape, &mut ParamBinding, &ParamSet) -> Var<'t>,
{
    f
}

fn eval(f: &impl LossFn, params: &ParamSet) -> f64 {
    let tape = Tape::new();
    let mut binding = ParamBinding::new();
    f.loss(&tape, &mut binding, params).scalar_value()
}

/// Compares the analytic gradient of `f` against central finite differences
/// over every parameter coordinate and returns the maximum relative error
/// `|a - n| / max(|a|, |n|)` (coordinates where both magnitudes are below
/// 1e-10 count as exact).
pub fn gradient_check(f: &impl LossFn, params: &mut ParamSet, step: f64) -> f64 {
    let analytic = {
        let tape = Tape::new();
        let mut binding = ParamBinding::new();
        let loss = f.loss(&tape, &mut binding, params);
        let grads = tape.backward(loss);
        binding.flat_grads(params, &grads)
    };

    let mut max_rel = 0.0f64;
    for i in 0..params.len() {
        let orig = params.data()[i];
        params.data_mut()[i] = orig + step;
        let plus = eval(f, params);
        params.data_mut()[i] = orig - step;
        let minus = eval(f, params);
        params.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs());
        if denom > 1e-10 {
            max_rel = max_rel.max((a - numeric).abs() / denom);
        }
    }
    max_rel
}

/// L2 norm of the analytic gradient of `f` at the current parameters.
pub fn gradient_l2_norm(f: &impl LossFn, params: &ParamSet) -> f64 {
    let tape = Tape::new();
    let mut binding = ParamBinding::new();
    let loss = f.loss(&tape, &mut binding, params);
    let grads = tape.backward(loss);
    let flat = binding.flat_grads(params, &grads);
    flat.iter().map(|g| g * g).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Init;
    use crate::Var;

    #[test]
    fn quadratic_gradient_is_exact() {
        let mut b = ParamSet::builder(3);
        let w = b.alloc("w", &[4], Init::UniformSym(1.0));
        let mut params = b.finish();
        let f = loss_fn(move |tape, binding, ps| {
            let v = binding.var(tape, ps, w);
            v.square().sum_all()
        });
        let err = gradient_check(&f, &mut params, 1e-5);
        assert!(err < 1e-8, "relative error {err}");
    }

    #[test]
    fn composite_ops_pass_finite_differences() {
        let mut b = ParamSet::builder(11);
        let w = b.alloc("w", &[3, 5], Init::UniformSym(0.6));
        let bias = b.alloc("b", &[5], Init::UniformSym(0.2));
        let mut params = b.finish();
        let f = loss_fn(move |tape, binding, ps| {
            let x = tape.leaf_from(
                &[0.3, -0.2, 0.9, 1.1, -0.7, 0.4],
                &[2, 3],
            );
            let w = binding.var(tape, ps, w);
            let bias = binding.var(tape, ps, bias);
            let h = x.matmul(w).add(bias).tanh();
            let s = h.softmax_last();
            let ln = h.layer_norm_last(1e-5);
            s.mul(ln).sigmoid().mean_all()
        });
        let err = gradient_check(&f, &mut params, 1e-5);
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn fused_lstm_cell_matches_finite_differences() {
        let mut b = ParamSet::builder(5);
        let pre = b.alloc("pre", &[2, 12], Init::UniformSym(0.8));
        let cell = b.alloc("cell", &[2, 3], Init::UniformSym(0.8));
        let mut params = b.finish();
        let f = loss_fn(move |tape, binding, ps| {
            let pre = binding.var(tape, ps, pre);
            let cell = binding.var(tape, ps, cell);
            let hc = pre.lstm_gates(cell);
            hc.square().mean_all()
        });
        let err = gradient_check(&f, &mut params, 1e-5);
        assert!(err < 1e-7, "relative error {err}");
    }

    #[test]
    fn selective_scan_matches_finite_differences() {
        let (bsz, len, d, n) = (2, 4, 3, 2);
        let mut b = ParamSet::builder(9);
        let delta = b.alloc("delta", &[bsz, len, d], Init::UniformSym(0.5));
        let a = b.alloc("a", &[d, n], Init::UniformSym(0.5));
        let b_in = b.alloc("b_in", &[bsz, len, n], Init::UniformSym(0.5));
        let c_out = b.alloc("c_out", &[bsz, len, n], Init::UniformSym(0.5));
        let x = b.alloc("x", &[bsz, len, d], Init::UniformSym(0.5));
        let mut params = b.finish();
        let f = loss_fn(move |tape, binding, ps| {
            let delta = binding.var(tape, ps, delta).softplus();
            let a = binding.var(tape, ps, a).neg();
            let b_in = binding.var(tape, ps, b_in);
            let c_out = binding.var(tape, ps, c_out);
            let x = binding.var(tape, ps, x);
            delta.selective_scan(a, b_in, c_out, x).square().mean_all()
        });
        let err = gradient_check(&f, &mut params, 1e-5);
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn unfold_pool_pad_pass_finite_differences() {
        let mut b = ParamSet::builder(17);
        let x = b.alloc("x", &[2, 6, 2], Init::UniformSym(1.0));
        let w = b.alloc("w", &[6, 3], Init::UniformSym(0.5));
        let mut params = b.finish();
        let f = loss_fn(move |tape, binding, ps| {
            let x = binding.var(tape, ps, x);
            let w = binding.var(tape, ps, w);
            let padded = x.pad_time(1, 1, crate::nn::PadMode::Edge);
            let u = padded.unfold1d(3, 1); // [2, 6, 6]
            let flat = u.reshape(&[12, 6]);
            let h = flat.matmul(w).gelu(); // [12, 3]
            let pooled = h.reshape(&[2, 6, 3]).avg_pool1d(2, 2);
            pooled.square().mean_all()
        });
        let err = gradient_check(&f, &mut params, 1e-5);
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn conv2d_same_matches_finite_differences() {
        let mut b = ParamSet::builder(29);
        let x = b.alloc("x", &[2, 4, 5, 3], Init::UniformSym(1.0));
        let w = b.alloc("w", &[9 * 3, 4], Init::UniformSym(0.3));
        let bias = b.alloc("b", &[4], Init::UniformSym(0.1));
        let mut params = b.finish();
        let f = loss_fn(move |tape, binding, ps| {
            let x = binding.var(tape, ps, x);
            let w = binding.var(tape, ps, w);
            let bias = binding.var(tape, ps, bias);
            x.conv2d_same(w, bias, 3, 3).gelu().square().mean_all()
        });
        let err = gradient_check(&f, &mut params, 1e-5);
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn unfold2d_passes_finite_differences() {
        let mut b = ParamSet::builder(23);
        let x = b.alloc("x", &[1, 4, 5, 2], Init::UniformSym(1.0));
        let mut params = b.finish();
        let f = loss_fn(move |tape, binding, ps| {
            let x = binding.var(tape, ps, x);
            let u = x.unfold2d(3, 3, 1, 1); // same-size output rows
            u.tanh().square().mean_all()
        });
        let err = gradient_check(&f, &mut params, 1e-5);
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn gradient_norm_zero_at_minimum() {
        let mut b = ParamSet::builder(2);
        let w = b.alloc("w", &[3], Init::Const(0.0));
        let params = b.finish();
        let f = loss_fn(move |tape, binding, ps| {
            let v = binding.var(tape, ps, w);
            v.square().sum_all()
        });
        assert!(gradient_l2_norm(&f, &params) < 1e-12);
        let _ = w;
        let _ = params;
    }
}
