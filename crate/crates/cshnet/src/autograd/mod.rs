//! Reverse-mode automatic differentiation on dynamically shaped `f64` arrays.
//!
//! A [`Graph`] is a single-use tape: forward values are computed eagerly as
//! ops are inserted, and [`Graph::backward`] replays the tape in reverse to
//! accumulate gradients. Everything runs single-threaded in `f64`, so a
//! fixed sequence of ops is bitwise reproducible.

mod conv;
mod elem;
mod linalg;
mod shape;

pub mod check;

pub use shape::{
    crop2d_map, fold_index, head_merge_map, head_split_map, relpos_map, roll2d_map,
    window_merge_map, window_partition_map,
};

use ndarray::{ArrayD, IxDyn};

/// Handle to a node in a [`Graph`]. Cheap to copy; only valid for the graph
/// that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Value(pub(crate) usize);

/// Signature of a node's backward step: given the gradient flowing into the
/// node, the parent values, and the node's own output, produce one optional
/// gradient per parent.
type GradFn = Box<dyn Fn(&ArrayD<f64>, &[&ArrayD<f64>], &ArrayD<f64>) -> Vec<Option<ArrayD<f64>>>>;

struct Node {
    value: ArrayD<f64>,
    parents: Vec<Value>,
    grad_fn: Option<GradFn>,
    needs_grad: bool,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Value`].
pub struct Gradients {
    grads: Vec<Option<ArrayD<f64>>>,
}

impl Gradients {
    pub fn of(&self, v: Value) -> Option<&ArrayD<f64>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

/// Single-use computation tape.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: Vec<(String, Value)>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Leaf that does not receive a gradient (data, constants, frozen weights).
    pub fn input(&mut self, value: ArrayD<f64>) -> Value {
        self.push(value, vec![], None, false)
    }

    /// Unnamed leaf that still accumulates a gradient, e.g. an image being
    /// differentiated against.
    pub fn input_grad(&mut self, value: ArrayD<f64>) -> Value {
        self.push(value, vec![], None, true)
    }

    /// Named trainable leaf. Gradients for it can be collected with
    /// [`Graph::param_grads`].
    pub fn param(&mut self, name: &str, value: ArrayD<f64>) -> Value {
        let v = self.push(value, vec![], None, true);
        self.params.push((name.to_string(), v));
        v
    }

    pub fn value(&self, v: Value) -> &ArrayD<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Value) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Extract a scalar node's value.
    pub fn scalar(&self, v: Value) -> f64 {
        let a = self.value(v);
        assert_eq!(a.len(), 1, "scalar() on non-scalar node of shape {:?}", a.shape());
        a.iter().next().copied().unwrap()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn push(
        &mut self,
        value: ArrayD<f64>,
        parents: Vec<Value>,
        grad_fn: Option<GradFn>,
        force_grad: bool,
    ) -> Value {
        let needs_grad = force_grad || parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node {
            value,
            parents,
            grad_fn,
            needs_grad,
        });
        Value(self.nodes.len() - 1)
    }

    /// Reverse pass from a scalar root. Returns per-node gradients; leaves
    /// keep theirs, interior gradients are dropped as soon as they have been
    /// consumed.
    pub fn backward(&self, root: Value) -> Gradients {
        let mut grads: Vec<Option<ArrayD<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        let seed = ArrayD::ones(IxDyn(self.nodes[root.0].value.shape()));
        assert_eq!(seed.len(), 1, "backward() root must be scalar");
        grads[root.0] = Some(seed);

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad || node.grad_fn.is_none() {
                // Leaves keep their accumulated gradient for collection.
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let f = node.grad_fn.as_ref().unwrap();
            let parent_vals: Vec<&ArrayD<f64>> =
                node.parents.iter().map(|p| &self.nodes[p.0].value).collect();
            let pgrads = f(&g, &parent_vals, &node.value);
            debug_assert_eq!(pgrads.len(), node.parents.len());
            for (p, pg) in node.parents.iter().zip(pgrads) {
                let Some(pg) = pg else { continue };
                if !self.nodes[p.0].needs_grad {
                    continue;
                }
                debug_assert_eq!(
                    pg.shape(),
                    self.nodes[p.0].value.shape(),
                    "gradient shape mismatch flowing into node {}",
                    p.0
                );
                match &mut grads[p.0] {
                    Some(acc) => *acc += &pg,
                    slot => *slot = Some(pg),
                }
            }
        }
        Gradients { grads }
    }

    /// Collect gradients of all named parameters, zeros for unused ones.
    pub fn param_grads(&self, grads: &Gradients) -> std::collections::BTreeMap<String, ArrayD<f64>> {
        let mut out = std::collections::BTreeMap::new();
        for (name, v) in &self.params {
            let g = match grads.of(*v) {
                Some(g) => g.clone(),
                None => ArrayD::zeros(IxDyn(self.shape(*v))),
            };
            out.insert(name.clone(), g);
        }
        out
    }
}

/// Ensure an array owns standard-layout storage and hand back its flat slice.
pub(crate) fn flat(a: &ArrayD<f64>) -> &[f64] {
    a.as_slice().expect("graph arrays must be standard layout")
}
