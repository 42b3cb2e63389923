use std::cell::RefCell;

use ndarray::{ArrayD, IxDyn};

pub(crate) type BackFn = Box<dyn Fn(&[ArrayD<f64>], &ArrayD<f64>, &mut GradStore)>;

/// Records one forward pass. Values are append-only; node ids are indices.
pub struct Tape {
    pub(crate) values: RefCell<Vec<ArrayD<f64>>>,
    pub(crate) backs: RefCell<Vec<Option<BackFn>>>,
}

/// Handle to a node on a [`Tape`]. Cheap to copy; all ops are methods here
/// or in the op modules.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    pub(crate) tape: &'t Tape,
    pub(crate) id: usize,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            values: RefCell::new(Vec::new()),
            backs: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.values.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// New leaf node. Leaves have no backward step; their gradients stay in
    /// the [`GradStore`] after `backward`.
    pub fn leaf(&self, value: ArrayD<f64>) -> Var<'_> {
        self.push(value, None)
    }

    /// Leaf from a flat slice with an explicit shape.
    pub fn leaf_from(&self, data: &[f64], shape: &[usize]) -> Var<'_> {
        let arr = ArrayD::from_shape_vec(IxDyn(shape), data.to_vec())
            .expect("leaf_from: shape does not match data length");
        self.leaf(arr)
    }

    /// Scalar leaf with shape `[1]`.
    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.leaf(ArrayD::from_shape_vec(IxDyn(&[1]), vec![value]).unwrap())
    }

    pub(crate) fn push(&self, value: ArrayD<f64>, back: Option<BackFn>) -> Var<'_> {
        debug_assert!(value.is_standard_layout(), "tape values must be contiguous");
        let mut values = self.values.borrow_mut();
        let mut backs = self.backs.borrow_mut();
        let id = values.len();
        values.push(value);
        backs.push(back);
        Var { tape: self, id }
    }

    /// Clone of a node's value.
    pub fn value(&self, v: Var) -> ArrayD<f64> {
        self.values.borrow()[v.id].clone()
    }

    /// Runs reverse-mode accumulation from a scalar `root` (one element).
    pub fn backward(&self, root: Var) -> GradStore {
        let values = self.values.borrow();
        let backs = self.backs.borrow();
        assert_eq!(
            values[root.id].len(),
            1,
            "backward root must be a scalar node"
        );
        let mut grads = GradStore {
            grads: vec![None; values.len()],
        };
        grads.accum(root.id, ArrayD::ones(values[root.id].raw_dim()));
        for id in (0..=root.id).rev() {
            if let Some(back) = &backs[id] {
                if let Some(g) = grads.grads[id].take() {
                    back(&values, &g, &mut grads);
                }
            }
        }
        grads
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    /// Clone of this node's value.
    pub fn value(&self) -> ArrayD<f64> {
        self.tape.value(*self)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.values.borrow()[self.id].shape().to_vec()
    }

    pub fn ndim(&self) -> usize {
        self.tape.values.borrow()[self.id].ndim()
    }

    /// Number of elements.
    pub fn len(&self) -> usize {
        self.tape.values.borrow()[self.id].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scalar_value(&self) -> f64 {
        let values = self.tape.values.borrow();
        debug_assert_eq!(values[self.id].len(), 1);
        values[self.id].iter().next().copied().unwrap()
    }

    pub(crate) fn tape(&self) -> &'t Tape {
        self.tape
    }

    /// Runs `f` on the borrowed value without cloning.
    pub fn with_value<R>(&self, f: impl FnOnce(&ArrayD<f64>) -> R) -> R {
        f(&self.tape.values.borrow()[self.id])
    }
}

/// Gradients resulting from one backward pass, indexed by node id.
pub struct GradStore {
    grads: Vec<Option<ArrayD<f64>>>,
}

impl GradStore {
    pub fn get(&self, v: Var) -> Option<&ArrayD<f64>> {
        self.grads[v.id].as_ref()
    }

    pub fn get_id(&self, id: usize) -> Option<&ArrayD<f64>> {
        self.grads[id].as_ref()
    }

    pub(crate) fn accum(&mut self, id: usize, g: ArrayD<f64>) {
        match &mut self.grads[id] {
            Some(existing) => *existing += &g,
            slot @ None => *slot = Some(g),
        }
    }

    /// Adds a gradient by reference, cloning only when the slot is empty.
    pub(crate) fn accum_ref(&mut self, id: usize, g: &ArrayD<f64>) {
        match &mut self.grads[id] {
            Some(existing) => *existing += g,
            slot @ None => *slot = Some(g.clone()),
        }
    }

    /// Mutable access to the gradient buffer, zero-initialized on first use;
    /// backward steps that touch only part of a parent scatter into this
    /// instead of allocating full-size temporaries.
    pub(crate) fn slot(&mut self, id: usize, shape: &[usize]) -> &mut ArrayD<f64> {
        if self.grads[id].is_none() {
            self.grads[id] = Some(ArrayD::zeros(IxDyn(shape)));
        }
        self.grads[id].as_mut().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_round_trip() {
        let tape = Tape::new();
        let v = tape.leaf_from(&[1.0, 2.0, 3.0, 4.0], &[2, 2]);
        assert_eq!(v.shape(), vec![2, 2]);
        assert_eq!(v.value().as_slice().unwrap(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let tape = Tape::new();
        let v = tape.leaf_from(&[1.0, 2.0, 3.0], &[3]);
        let s = v.sum_all();
        let grads = tape.backward(s);
        assert_eq!(grads.get(v).unwrap().as_slice().unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    #[should_panic(expected = "scalar")]
    fn backward_rejects_non_scalar_root() {
        let tape = Tape::new();
        let v = tape.leaf_from(&[1.0, 2.0], &[2]);
        tape.backward(v);
    }
}
