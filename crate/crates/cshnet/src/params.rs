//! Named parameter storage and deterministic initialization.
//!
//! Networks are functional: a forward pass binds parameters into a fresh
//! [`Graph`] by name through a [`ParamCtx`]. Missing tensors are created on
//! first use from a per-name RNG stream, so initialization does not depend
//! on the order in which layers touch their weights.

use std::collections::BTreeMap;

use ndarray::{ArrayD, IxDyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autograd::{Graph, Value};

/// Weight initialization family for a parameter.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    /// Zero-mean Gaussian with the given standard deviation.
    Normal(f64),
    Zeros,
    Ones,
}

impl Init {
    fn sample(self, seed: u64, name: &str, shape: &[usize]) -> ArrayD<f64> {
        let n: usize = shape.iter().product();
        let data = match self {
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::Normal(std) => {
                let mut rng = ChaCha8Rng::seed_from_u64(name_seed(seed, name));
                let dist = Normal::new(0.0, std).expect("finite std");
                (0..n).map(|_| dist.sample(&mut rng)).collect()
            }
        };
        ArrayD::from_shape_vec(IxDyn(shape), data).unwrap()
    }
}

/// FNV-1a over the parameter name, mixed with the run seed, so every
/// parameter draws from its own reproducible stream.
fn name_seed(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in name.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ seed
}

/// All trainable tensors of a model, keyed by hierarchical name.
#[derive(Debug, Default, Clone)]
pub struct ParamStore {
    tensors: BTreeMap<String, ArrayD<f64>>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tensors(tensors: BTreeMap<String, ArrayD<f64>>) -> Self {
        Self { tensors }
    }

    pub fn insert(&mut self, name: &str, t: ArrayD<f64>) {
        self.tensors.insert(name.to_string(), t);
    }

    pub fn get(&self, name: &str) -> Option<&ArrayD<f64>> {
        self.tensors.get(name)
    }

    /// Replace an existing tensor; shape must not change.
    pub fn set(&mut self, name: &str, t: ArrayD<f64>) {
        let old = self
            .tensors
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"));
        assert_eq!(old.shape(), t.shape(), "parameter {name} changed shape");
        *old = t;
    }

    pub fn tensors(&self) -> &BTreeMap<String, ArrayD<f64>> {
        &self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar count across all tensors.
    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(|t| t.len()).sum()
    }

    /// Snap every value onto the f32 grid. Keeping the store on that grid
    /// makes f32 checkpoints lossless, which is what allows resumed runs to
    /// reproduce uninterrupted ones bit for bit.
    pub fn quantize_f32(&mut self) {
        for t in self.tensors.values_mut() {
            t.mapv_inplace(|v| v as f32 as f64);
        }
    }

    /// Zero every tensor whose name starts with `prefix` (empty = all).
    pub fn zero_prefixed(&mut self, prefix: &str) {
        for (name, t) in self.tensors.iter_mut() {
            if name.starts_with(prefix) {
                t.fill(0.0);
            }
        }
    }
}

enum Source<'a> {
    /// Normal operation: read through to the store, initializing on miss.
    Store { store: &'a mut ParamStore, seed: u64 },
    /// Gradient-check mode: every name must already be bound.
    Fixed,
}

/// Binds store tensors into a graph for one forward pass.
pub struct ParamCtx<'a> {
    pub graph: &'a mut Graph,
    source: Source<'a>,
    bound: BTreeMap<String, Value>,
}

impl<'a> ParamCtx<'a> {
    pub fn new(graph: &'a mut Graph, store: &'a mut ParamStore, seed: u64) -> Self {
        Self {
            graph,
            source: Source::Store { store, seed },
            bound: BTreeMap::new(),
        }
    }

    /// A context whose parameters were bound externally (used by gradient
    /// checks, which need control over the leaf handles).
    pub fn with_bound(graph: &'a mut Graph, bound: BTreeMap<String, Value>) -> Self {
        Self {
            graph,
            source: Source::Fixed,
            bound,
        }
    }

    /// Fetch a parameter by name, creating and initializing it on first use.
    pub fn param(&mut self, name: &str, shape: &[usize], init: Init) -> Value {
        if let Some(&v) = self.bound.get(name) {
            assert_eq!(self.graph.shape(v), shape, "parameter {name} shape mismatch");
            return v;
        }
        let tensor = match &mut self.source {
            Source::Fixed => panic!("parameter {name} not bound"),
            Source::Store { store, seed } => match store.get(name) {
                Some(t) => {
                    assert_eq!(t.shape(), shape, "parameter {name} shape mismatch");
                    t.clone()
                }
                None => {
                    let t = init.sample(*seed, name, shape);
                    store.insert(name, t.clone());
                    t
                }
            },
        };
        let v = self.graph.param(name, tensor);
        self.bound.insert(name.to_string(), v);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_per_name_and_order_independent() {
        let mut g1 = Graph::default();
        let mut s1 = ParamStore::new();
        {
            let mut ctx = ParamCtx::new(&mut g1, &mut s1, 7);
            ctx.param("a.w", &[4], Init::Normal(0.02));
            ctx.param("b.w", &[4], Init::Normal(0.02));
        }
        let mut g2 = Graph::default();
        let mut s2 = ParamStore::new();
        {
            let mut ctx = ParamCtx::new(&mut g2, &mut s2, 7);
            ctx.param("b.w", &[4], Init::Normal(0.02));
            ctx.param("a.w", &[4], Init::Normal(0.02));
        }
        assert_eq!(s1.get("a.w").unwrap(), s2.get("a.w").unwrap());
        assert_eq!(s1.get("b.w").unwrap(), s2.get("b.w").unwrap());
        assert_ne!(s1.get("a.w").unwrap(), s1.get("b.w").unwrap());
    }

    #[test]
    fn seed_changes_the_draw() {
        let t1 = Init::Normal(0.02).sample(1, "w", &[8]);
        let t2 = Init::Normal(0.02).sample(2, "w", &[8]);
        assert_ne!(t1, t2);
    }

    #[test]
    fn rebinding_reuses_the_handle() {
        let mut g = Graph::default();
        let mut s = ParamStore::new();
        let mut ctx = ParamCtx::new(&mut g, &mut s, 0);
        let v1 = ctx.param("w", &[2, 2], Init::Ones);
        let v2 = ctx.param("w", &[2, 2], Init::Ones);
        assert_eq!(v1, v2);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn quantize_is_idempotent() {
        let mut s = ParamStore::new();
        s.insert(
            "w",
            ArrayD::from_shape_vec(IxDyn(&[3]), vec![0.1, 1.0 / 3.0, -2.7]).unwrap(),
        );
        s.quantize_f32();
        let once = s.get("w").unwrap().clone();
        s.quantize_f32();
        assert_eq!(&once, s.get("w").unwrap());
        assert_ne!(once[[1]], 1.0 / 3.0);
    }
}
