//! Core differentiable operations: elementwise arithmetic with NumPy-style
//! broadcasting, reductions, shape manipulation, and matrix products.

use ndarray::{concatenate, ArrayD, ArrayViewD, Axis, Ix2, Ix3, IxDyn, Slice};

use crate::tape::{GradStore, Var};

/// Broadcast result shape under NumPy rules. Panics on incompatible shapes.
fn broadcast_shape(a: &[usize], b: &[usize]) -> Vec<usize> {
    let n = a.len().max(b.len());
    let mut out = vec![0usize; n];
    for i in 0..n {
        let da = if i < n - a.len() { 1 } else { a[i - (n - a.len())] };
        let db = if i < n - b.len() { 1 } else { b[i - (n - b.len())] };
        assert!(
            da == db || da == 1 || db == 1,
            "incompatible broadcast shapes {a:?} vs {b:?}"
        );
        out[i] = da.max(db);
    }
    out
}

/// Accumulates a gradient of possibly-broadcast shape onto the parent's
/// `target` shape, summing stretched axes. The no-broadcast fast path avoids
/// temporaries entirely.
fn accum_reduced(grads: &mut GradStore, id: usize, g: &ArrayD<f64>, target: &[usize]) {
    if g.shape() == target {
        grads.accum_ref(id, g);
        return;
    }
    let mut g = g.clone();
    while g.ndim() > target.len() {
        g = g.sum_axis(Axis(0));
    }
    for ax in 0..target.len() {
        if target[ax] == 1 && g.shape()[ax] != 1 {
            g = g.sum_axis(Axis(ax)).insert_axis(Axis(ax));
        }
    }
    grads.accum(id, g);
}

fn ew_binary(
    a: &ArrayD<f64>,
    b: &ArrayD<f64>,
    f: impl Fn(f64, f64) -> f64,
) -> ArrayD<f64> {
    let shape = broadcast_shape(a.shape(), b.shape());
    let av = a.broadcast(IxDyn(&shape)).expect("broadcast lhs");
    let bv = b.broadcast(IxDyn(&shape)).expect("broadcast rhs");
    let mut out = ArrayD::zeros(IxDyn(&shape));
    ndarray::Zip::from(&mut out)
        .and(&av)
        .and(&bv)
        .for_each(|o, &x, &y| *o = f(x, y));
    out
}

fn unary_ew(v: Var<'_>, f: impl Fn(f64) -> f64, df: impl Fn(f64, f64) -> f64 + 'static) -> Var<'_> {
    let out = v.with_value(|a| a.mapv(&f));
    let id = v.id;
    v.tape().push(
        out,
        Some(Box::new(move |values, g, grads: &mut GradStore| {
            let x = &values[id];
            // df receives (input, grad) per element.
            let mut gx = ArrayD::zeros(x.raw_dim());
            ndarray::Zip::from(&mut gx)
                .and(x)
                .and(g)
                .for_each(|o, &xi, &gi| *o = df(xi, gi));
            grads.accum(id, gx);
        })),
    )
}

impl<'t> Var<'t> {
    // ---- elementwise binary ----

    pub fn add(self, rhs: Var<'t>) -> Var<'t> {
        let (a_shape, b_shape) = (self.shape(), rhs.shape());
        let out = {
            let values = self.tape().values.borrow();
            ew_binary(&values[self.id], &values[rhs.id], |x, y| x + y)
        };
        let (aid, bid) = (self.id, rhs.id);
        self.tape().push(
            out,
            Some(Box::new(move |_values, g, grads| {
                accum_reduced(grads, aid, g, &a_shape);
                accum_reduced(grads, bid, g, &b_shape);
            })),
        )
    }

    pub fn sub(self, rhs: Var<'t>) -> Var<'t> {
        let (a_shape, b_shape) = (self.shape(), rhs.shape());
        let out = {
            let values = self.tape().values.borrow();
            ew_binary(&values[self.id], &values[rhs.id], |x, y| x - y)
        };
        let (aid, bid) = (self.id, rhs.id);
        self.tape().push(
            out,
            Some(Box::new(move |_values, g, grads| {
                accum_reduced(grads, aid, g, &a_shape);
                accum_reduced(grads, bid, &g.mapv(|x| -x), &b_shape);
            })),
        )
    }

    pub fn mul(self, rhs: Var<'t>) -> Var<'t> {
        let (a_shape, b_shape) = (self.shape(), rhs.shape());
        let out = {
            let values = self.tape().values.borrow();
            ew_binary(&values[self.id], &values[rhs.id], |x, y| x * y)
        };
        let (aid, bid) = (self.id, rhs.id);
        self.tape().push(
            out,
            Some(Box::new(move |values, g, grads| {
                let ga = ew_binary(g, &values[bid], |gi, y| gi * y);
                let gb = ew_binary(g, &values[aid], |gi, x| gi * x);
                accum_reduced(grads, aid, &ga, &a_shape);
                accum_reduced(grads, bid, &gb, &b_shape);
            })),
        )
    }

    pub fn div(self, rhs: Var<'t>) -> Var<'t> {
        let (a_shape, b_shape) = (self.shape(), rhs.shape());
        let out = {
            let values = self.tape().values.borrow();
            ew_binary(&values[self.id], &values[rhs.id], |x, y| x / y)
        };
        let (aid, bid) = (self.id, rhs.id);
        self.tape().push(
            out,
            Some(Box::new(move |values, g, grads| {
                let b = &values[bid];
                let ga = ew_binary(g, b, |gi, y| gi / y);
                let num = ew_binary(g, &values[aid], |gi, x| gi * x);
                let gb = ew_binary(&num, b, |n, y| -n / (y * y));
                accum_reduced(grads, aid, &ga, &a_shape);
                accum_reduced(grads, bid, &gb, &b_shape);
            })),
        )
    }

    // ---- elementwise unary ----

    pub fn neg(self) -> Var<'t> {
        unary_ew(self, |x| -x, |_, g| -g)
    }

    pub fn exp(self) -> Var<'t> {
        unary_ew(self, f64::exp, |x, g| g * x.exp())
    }

    pub fn ln(self) -> Var<'t> {
        unary_ew(self, f64::ln, |x, g| g / x)
    }

    pub fn sqrt(self) -> Var<'t> {
        unary_ew(self, f64::sqrt, |x, g| g * 0.5 / x.sqrt())
    }

    pub fn square(self) -> Var<'t> {
        unary_ew(self, |x| x * x, |x, g| 2.0 * x * g)
    }

    pub fn sigmoid(self) -> Var<'t> {
        unary_ew(self, sigmoid, |x, g| {
            let s = sigmoid(x);
            g * s * (1.0 - s)
        })
    }

    pub fn tanh(self) -> Var<'t> {
        unary_ew(self, f64::tanh, |x, g| {
            let t = x.tanh();
            g * (1.0 - t * t)
        })
    }

    pub fn relu(self) -> Var<'t> {
        unary_ew(self, |x| x.max(0.0), |x, g| if x > 0.0 { g } else { 0.0 })
    }

    /// x * sigmoid(x).
    pub fn silu(self) -> Var<'t> {
        unary_ew(self, |x| x * sigmoid(x), |x, g| {
            let s = sigmoid(x);
            g * (s + x * s * (1.0 - s))
        })
    }

    /// ln(1 + e^x), numerically stabilized.
    pub fn softplus(self) -> Var<'t> {
        unary_ew(self, softplus, |x, g| g * sigmoid(x))
    }

    /// Gaussian error linear unit, tanh approximation.
    pub fn gelu(self) -> Var<'t> {
        const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
        const A: f64 = 0.044_715;
        unary_ew(
            self,
            |x| 0.5 * x * (1.0 + (C * (x + A * x * x * x)).tanh()),
            |x, g| {
                let u = C * (x + A * x * x * x);
                let t = u.tanh();
                let du = C * (1.0 + 3.0 * A * x * x);
                g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)
            },
        )
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        unary_ew(self, move |x| x * c, move |_, g| g * c)
    }

    pub fn add_scalar(self, c: f64) -> Var<'t> {
        unary_ew(self, move |x| x + c, |_, g| g)
    }

    // ---- reductions ----

    /// Sum of all elements; shape `[1]`.
    pub fn sum_all(self) -> Var<'t> {
        let (total, shape) = self.with_value(|a| (a.sum(), a.shape().to_vec()));
        let id = self.id;
        self.tape().push(
            ArrayD::from_shape_vec(IxDyn(&[1]), vec![total]).unwrap(),
            Some(Box::new(move |_values, g, grads| {
                let gi = g.iter().next().copied().unwrap();
                grads.accum(id, ArrayD::from_elem(IxDyn(&shape), gi));
            })),
        )
    }

    /// Mean of all elements; shape `[1]`.
    pub fn mean_all(self) -> Var<'t> {
        let n = self.len() as f64;
        self.sum_all().scale(1.0 / n)
    }

    /// Sum along `axis`, keeping it as a length-1 dimension.
    pub fn sum_axis_keep(self, axis: usize) -> Var<'t> {
        let out = self.with_value(|a| a.sum_axis(Axis(axis)).insert_axis(Axis(axis)));
        let shape = self.shape();
        let id = self.id;
        self.tape().push(
            out,
            Some(Box::new(move |_values, g, grads| {
                let gb = g
                    .broadcast(IxDyn(&shape))
                    .expect("sum_axis_keep backward broadcast")
                    .to_owned();
                grads.accum(id, gb);
            })),
        )
    }

    /// Mean along `axis`, keeping it as a length-1 dimension.
    pub fn mean_axis_keep(self, axis: usize) -> Var<'t> {
        let n = self.shape()[axis] as f64;
        self.sum_axis_keep(axis).scale(1.0 / n)
    }

    // ---- shape ----

    pub fn reshape(self, shape: &[usize]) -> Var<'t> {
        let out = self.with_value(|a| {
            a.clone()
                .into_shape_with_order(IxDyn(shape))
                .expect("reshape: element count mismatch")
        });
        let old_shape = self.shape();
        let id = self.id;
        self.tape().push(
            out,
            Some(Box::new(move |_values, g, grads| {
                let gr = g
                    .as_standard_layout()
                    .to_owned()
                    .into_shape_with_order(IxDyn(&old_shape))
                    .expect("reshape backward");
                grads.accum(id, gr);
            })),
        )
    }

    /// Permute axes (generalized transpose). The result is materialized in
    /// standard layout.
    pub fn permute(self, axes: &[usize]) -> Var<'t> {
        let out = self.with_value(|a| {
            a.view()
                .permuted_axes(IxDyn(axes))
                .as_standard_layout()
                .to_owned()
        });
        let mut inverse = vec![0usize; axes.len()];
        for (i, &ax) in axes.iter().enumerate() {
            inverse[ax] = i;
        }
        let id = self.id;
        self.tape().push(
            out,
            Some(Box::new(move |_values, g, grads| {
                let gp = g
                    .view()
                    .permuted_axes(IxDyn(&inverse))
                    .as_standard_layout()
                    .to_owned();
                grads.accum(id, gp);
            })),
        )
    }

    /// Contiguous sub-range along `axis`.
    pub fn slice_axis(self, axis: usize, start: usize, end: usize) -> Var<'t> {
        let out = self.with_value(|a| {
            a.slice_axis(Axis(axis), Slice::from(start..end))
                .as_standard_layout()
                .to_owned()
        });
        let shape = self.shape();
        let id = self.id;
        self.tape().push(
            out,
            Some(Box::new(move |_values, g, grads| {
                let mut strip = grads
                    .slot(id, &shape)
                    .slice_axis_mut(Axis(axis), Slice::from(start..end));
                strip += g;
            })),
        )
    }

    /// Concatenate along `axis`.
    pub fn concat(axis: usize, parts: &[Var<'t>]) -> Var<'t> {
        assert!(!parts.is_empty());
        let tape = parts[0].tape();
        let out = {
            let values = tape.values.borrow();
            let views: Vec<ArrayViewD<f64>> = parts.iter().map(|p| values[p.id].view()).collect();
            concatenate(Axis(axis), &views)
                .expect("concat: shape mismatch")
                .as_standard_layout()
                .to_owned()
        };
        let meta: Vec<(usize, usize)> = parts
            .iter()
            .map(|p| (p.id, p.shape()[axis]))
            .collect();
        tape.push(
            out,
            Some(Box::new(move |_values, g, grads| {
                let mut offset = 0usize;
                for &(id, width) in &meta {
                    let part = g
                        .slice_axis(Axis(axis), Slice::from(offset..offset + width))
                        .as_standard_layout()
                        .to_owned();
                    grads.accum(id, part);
                    offset += width;
                }
            })),
        )
    }

    // ---- matrix products ----

    /// 2-D matrix product `[m,k] x [k,n] -> [m,n]`.
    pub fn matmul(self, rhs: Var<'t>) -> Var<'t> {
        let out = {
            let values = self.tape().values.borrow();
            let a = values[self.id]
                .view()
                .into_dimensionality::<Ix2>()
                .expect("matmul lhs must be 2-D");
            let b = values[rhs.id]
                .view()
                .into_dimensionality::<Ix2>()
                .expect("matmul rhs must be 2-D");
            a.dot(&b).into_dyn()
        };
        let (aid, bid) = (self.id, rhs.id);
        self.tape().push(
            out,
            Some(Box::new(move |values, g, grads| {
                let a = values[aid].view().into_dimensionality::<Ix2>().unwrap();
                let b = values[bid].view().into_dimensionality::<Ix2>().unwrap();
                let g2 = g.view().into_dimensionality::<Ix2>().unwrap();
                grads.accum(aid, g2.dot(&b.t()).into_dyn());
                grads.accum(bid, a.t().dot(&g2).into_dyn());
            })),
        )
    }

    /// Batched matrix product `[b,m,k] x [b,k,n] -> [b,m,n]`.
    pub fn bmm(self, rhs: Var<'t>) -> Var<'t> {
        let out = {
            let values = self.tape().values.borrow();
            let a = values[self.id]
                .view()
                .into_dimensionality::<Ix3>()
                .expect("bmm lhs must be 3-D");
            let b = values[rhs.id]
                .view()
                .into_dimensionality::<Ix3>()
                .expect("bmm rhs must be 3-D");
            assert_eq!(a.shape()[0], b.shape()[0], "bmm batch mismatch");
            let (bs, m, n) = (a.shape()[0], a.shape()[1], b.shape()[2]);
            let mut out = ndarray::Array3::<f64>::zeros((bs, m, n));
            for i in 0..bs {
                out.index_axis_mut(Axis(0), i)
                    .assign(&a.index_axis(Axis(0), i).dot(&b.index_axis(Axis(0), i)));
            }
            out.into_dyn()
        };
        let (aid, bid) = (self.id, rhs.id);
        self.tape().push(
            out,
            Some(Box::new(move |values, g, grads| {
                let a = values[aid].view().into_dimensionality::<Ix3>().unwrap();
                let b = values[bid].view().into_dimensionality::<Ix3>().unwrap();
                let g3 = g.view().into_dimensionality::<Ix3>().unwrap();
                let bs = a.shape()[0];
                let mut ga = ndarray::Array3::<f64>::zeros((bs, a.shape()[1], a.shape()[2]));
                let mut gb = ndarray::Array3::<f64>::zeros((bs, b.shape()[1], b.shape()[2]));
                for i in 0..bs {
                    let gi = g3.index_axis(Axis(0), i);
                    ga.index_axis_mut(Axis(0), i)
                        .assign(&gi.dot(&b.index_axis(Axis(0), i).t()));
                    gb.index_axis_mut(Axis(0), i)
                        .assign(&a.index_axis(Axis(0), i).t().dot(&gi));
                }
                grads.accum(aid, ga.into_dyn());
                grads.accum(bid, gb.into_dyn());
            })),
        )
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::Tape;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn broadcast_add_bias() {
        let tape = Tape::new();
        let x = tape.leaf_from(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]);
        let b = tape.leaf_from(&[10.0, 20.0, 30.0], &[3]);
        let y = x.add(b).sum_all();
        assert_eq!(y.scalar_value(), 1.0 + 2.0 + 3.0 + 4.0 + 5.0 + 6.0 + 2.0 * 60.0);
        let grads = tape.backward(y);
        assert_close(grads.get(b).unwrap().as_slice().unwrap(), &[2.0, 2.0, 2.0], 0.0);
    }

    #[test]
    fn broadcast_middle_axis() {
        let tape = Tape::new();
        let x = tape.leaf_from(&[1.0, 2.0, 3.0, 4.0], &[1, 4, 1]);
        let m = tape.leaf_from(&[2.0], &[1, 1, 1]);
        let y = x.mul(m).sum_all();
        let grads = tape.backward(y);
        assert_eq!(grads.get(m).unwrap().as_slice().unwrap(), &[10.0]);
    }

    #[test]
    fn matmul_grads_match_manual() {
        let tape = Tape::new();
        let a = tape.leaf_from(&[1.0, 2.0, 3.0, 4.0], &[2, 2]);
        let b = tape.leaf_from(&[5.0, 6.0, 7.0, 8.0], &[2, 2]);
        let y = a.matmul(b).sum_all();
        let grads = tape.backward(y);
        // d(sum(AB))/dA = ones * B^T
        assert_close(
            grads.get(a).unwrap().as_slice().unwrap(),
            &[11.0, 15.0, 11.0, 15.0],
            1e-12,
        );
        assert_close(
            grads.get(b).unwrap().as_slice().unwrap(),
            &[4.0, 4.0, 6.0, 6.0],
            1e-12,
        );
    }

    #[test]
    fn slice_and_concat_round_trip() {
        let tape = Tape::new();
        let x = tape.leaf_from(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]);
        let left = x.slice_axis(1, 0, 1);
        let right = x.slice_axis(1, 1, 3);
        let back = Var::concat(1, &[left, right]);
        assert_eq!(back.value().as_slice().unwrap(), x.value().as_slice().unwrap());
        let loss = back.square().sum_all();
        let grads = tape.backward(loss);
        assert_close(
            grads.get(x).unwrap().as_slice().unwrap(),
            &[2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
            1e-12,
        );
    }

    #[test]
    fn permute_is_involutive_on_grad() {
        let tape = Tape::new();
        let x = tape.leaf_from(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]);
        let y = x.permute(&[1, 0]);
        assert_eq!(y.shape(), vec![3, 2]);
        let loss = y.mul(y).sum_all();
        let grads = tape.backward(loss);
        assert_close(
            grads.get(x).unwrap().as_slice().unwrap(),
            &[2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
            1e-12,
        );
    }
}
