//! Flat parameter storage with named, shaped entries.
//!
//! Parameters are allocated once at model construction time (drawing their
//! initial values from a seeded generator in declaration order) and live in a
//! single `Vec<f64>`. Optimizers update that vector in place; checkpoints
//! serialize it verbatim.

use ndarray::{ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::tape::{GradStore, Tape, Var};

/// Handle to one named parameter entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(usize);

#[derive(Clone, Debug)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

/// Initialization scheme for a parameter entry.
#[derive(Clone, Debug)]
pub enum Init {
    /// Uniform on `[-bound, bound]`.
    UniformSym(f64),
    /// Gaussian with the given standard deviation.
    Normal(f64),
    Const(f64),
    /// Explicit values (length must match the shape).
    Values(Vec<f64>),
}

/// Builder that draws initial values in declaration order from a seeded
/// ChaCha20 stream, making construction bit-reproducible.
pub struct ParamSetBuilder {
    data: Vec<f64>,
    entries: Vec<Entry>,
    rng: ChaCha20Rng,
}

impl ParamSetBuilder {
    pub fn new(seed: u64) -> Self {
        ParamSetBuilder {
            data: Vec::new(),
            entries: Vec::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn alloc(&mut self, name: &str, shape: &[usize], init: Init) -> ParamId {
        let len: usize = shape.iter().product();
        let offset = self.data.len();
        match init {
            Init::UniformSym(bound) => {
                for _ in 0..len {
                    let r: f64 = self.rng.random();
                    self.data.push((2.0 * r - 1.0) * bound);
                }
            }
            Init::Normal(std) => {
                let dist = Normal::new(0.0, std).expect("valid std");
                for _ in 0..len {
                    self.data.push(dist.sample(&mut self.rng));
                }
            }
            Init::Const(v) => self.data.extend(std::iter::repeat_n(v, len)),
            Init::Values(values) => {
                assert_eq!(values.len(), len, "Init::Values length mismatch for {name}");
                self.data.extend_from_slice(&values);
            }
        }
        self.entries.push(Entry {
            name: name.to_string(),
            shape: shape.to_vec(),
            offset,
            len,
        });
        ParamId(self.entries.len() - 1)
    }

    /// Linear-layer default: uniform with bound `1/sqrt(fan_in)`.
    pub fn alloc_linear(&mut self, name: &str, fan_in: usize, shape: &[usize]) -> ParamId {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        self.alloc(name, shape, Init::UniformSym(bound))
    }

    /// Custom initialization drawing from the builder's seeded stream.
    pub fn alloc_with(
        &mut self,
        name: &str,
        shape: &[usize],
        mut f: impl FnMut(&mut ChaCha20Rng) -> f64,
    ) -> ParamId {
        let len: usize = shape.iter().product();
        let values: Vec<f64> = (0..len).map(|_| f(&mut self.rng)).collect();
        self.alloc(name, shape, Init::Values(values))
    }

    pub fn finish(self) -> ParamSet {
        ParamSet {
            data: self.data,
            entries: self.entries,
        }
    }
}

/// Flat parameter vector plus entry metadata.
#[derive(Clone, Debug)]
pub struct ParamSet {
    data: Vec<f64>,
    entries: Vec<Entry>,
}

impl ParamSet {
    pub fn builder(seed: u64) -> ParamSetBuilder {
        ParamSetBuilder::new(seed)
    }

    /// Total number of scalar parameters.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Replaces the whole flat vector (e.g. restoring a snapshot).
    pub fn restore(&mut self, data: &[f64]) {
        assert_eq!(data.len(), self.data.len(), "restore: length mismatch");
        self.data.copy_from_slice(data);
    }

    pub fn entry_name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    /// Looks up an entry by its allocation name.
    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries
            .iter()
            .position(|e| e.name == name)
            .map(ParamId)
    }

    pub fn entry_shape(&self, id: ParamId) -> &[usize] {
        &self.entries[id.0].shape
    }

    pub fn slice(&self, id: ParamId) -> &[f64] {
        let e = &self.entries[id.0];
        &self.data[e.offset..e.offset + e.len]
    }

    pub fn array(&self, id: ParamId) -> ArrayD<f64> {
        let e = &self.entries[id.0];
        ArrayD::from_shape_vec(IxDyn(&e.shape), self.slice(id).to_vec()).unwrap()
    }

    /// All parameters are finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Maps parameter entries to the tape leaves of one forward pass.
#[derive(Default)]
pub struct ParamBinding {
    bound: Vec<(usize, usize)>, // (entry index, node id)
}

impl ParamBinding {
    pub fn new() -> Self {
        Self::default()
    }

    /// Creates a tape leaf holding the current value of `id`.
    pub fn var<'t>(&mut self, tape: &'t Tape, params: &ParamSet, id: ParamId) -> Var<'t> {
        let v = tape.leaf(params.array(id));
        self.bound.push((id.0, v.id()));
        v
    }

    /// Gradient vector aligned with `params.data()`. Entries never bound in
    /// this pass get zeros; entries bound more than once accumulate.
    pub fn flat_grads(&self, params: &ParamSet, grads: &GradStore) -> Vec<f64> {
        let mut out = vec![0.0; params.len()];
        for &(entry_idx, node_id) in &self.bound {
            if let Some(g) = grads.get_id(node_id) {
                let e = &params.entries[entry_idx];
                for (slot, gv) in out[e.offset..e.offset + e.len].iter_mut().zip(g.iter()) {
                    *slot += gv;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_initialization() {
        let mut b1 = ParamSet::builder(7);
        b1.alloc("w", &[3, 4], Init::UniformSym(0.5));
        b1.alloc("b", &[4], Init::Normal(0.1));
        let p1 = b1.finish();

        let mut b2 = ParamSet::builder(7);
        b2.alloc("w", &[3, 4], Init::UniformSym(0.5));
        b2.alloc("b", &[4], Init::Normal(0.1));
        let p2 = b2.finish();

        assert_eq!(p1.data(), p2.data());

        let mut b3 = ParamSet::builder(8);
        b3.alloc("w", &[3, 4], Init::UniformSym(0.5));
        let p3 = b3.finish();
        assert_ne!(p1.data()[..12], p3.data()[..12]);
    }

    #[test]
    fn flat_grads_align_and_accumulate() {
        let mut b = ParamSet::builder(1);
        let w = b.alloc("w", &[2], Init::Const(3.0));
        let params = b.finish();

        let tape = Tape::new();
        let mut binding = ParamBinding::new();
        let v1 = binding.var(&tape, &params, w);
        let v2 = binding.var(&tape, &params, w); // bound twice (shared weight)
        let loss = v1.add(v2).sum_all();
        let grads = tape.backward(loss);
        let flat = binding.flat_grads(&params, &grads);
        assert_eq!(flat, vec![2.0, 2.0]);
    }
}
