use std::cell::{Ref, RefCell};

use super::ops::Op;
use super::tensor::Tensor;
use crate::error::{NgcError, Result};

pub(crate) struct Node {
    pub value: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub requires_grad: bool,
    pub op: Op,
}

#[derive(Default)]
struct Inner {
    nodes: Vec<Node>,
    /// Accumulated gradients of leaf nodes, persisted across `backward` calls.
    leaf_grads: Vec<Option<Vec<f64>>>,
}

/// Append-only record of a forward computation.
///
/// Nodes are created in topological order, so the reverse sweep is a plain
/// descending walk over node ids.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    pub(crate) tape: &'t Tape,
    pub(crate) id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (r, c) = self.shape();
        write!(f, "Var#{}[{r}x{c}]", self.id)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf from raw values. Errors on length mismatch or non-finite input.
    pub fn leaf(&self, values: Vec<f64>, rows: usize, cols: usize, requires_grad: bool) -> Result<Var<'_>> {
        if values.len() != rows * cols {
            return Err(NgcError::Dimension(format!(
                "leaf of {rows}x{cols} given {} values",
                values.len()
            )));
        }
        self.push(values, rows, cols, requires_grad, Op::Leaf)
    }

    pub fn constant(&self, t: &Tensor) -> Result<Var<'_>> {
        self.leaf(t.values.clone(), t.rows(), t.cols(), false)
    }

    /// Leaf that participates in differentiation regardless of `t.requires_grad`.
    pub fn param(&self, t: &Tensor) -> Result<Var<'_>> {
        self.leaf(t.values.clone(), t.rows(), t.cols(), true)
    }

    pub fn scalar(&self, v: f64) -> Result<Var<'_>> {
        self.leaf(vec![v], 1, 1, false)
    }

    pub(crate) fn push(&self, value: Vec<f64>, rows: usize, cols: usize, requires_grad: bool, op: Op) -> Result<Var<'_>> {
        if let Some(bad) = value.iter().find(|v| !v.is_finite()) {
            return Err(NgcError::Numeric(format!("{} produced non-finite value {bad}", op.name())));
        }
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            value,
            rows,
            cols,
            requires_grad,
            op,
        });
        inner.leaf_grads.push(None);
        Ok(Var { tape: self, id })
    }

    pub(crate) fn nodes(&self) -> Ref<'_, Vec<Node>> {
        Ref::map(self.inner.borrow(), |i| &i.nodes)
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var<'_>) -> Option<Vec<f64>> {
        self.inner.borrow().leaf_grads[v.id].clone()
    }

    /// Gradient of a leaf, zeros if untouched.
    pub fn grad_or_zeros(&self, v: Var<'_>) -> Vec<f64> {
        let inner = self.inner.borrow();
        inner.leaf_grads[v.id]
            .clone()
            .unwrap_or_else(|| vec![0.0; inner.nodes[v.id].value.len()])
    }

    pub fn zero_grad(&self) {
        for g in self.inner.borrow_mut().leaf_grads.iter_mut() {
            *g = None;
        }
    }

    /// Reverse sweep from a scalar `loss`.
    ///
    /// Leaf gradients accumulate across calls; call [`Tape::zero_grad`]
    /// between independent backward passes.
    pub fn backward(&self, loss: Var<'_>) -> Result<()> {
        let mut inner = self.inner.borrow_mut();
        let Inner { nodes, leaf_grads } = &mut *inner;
        let root = &nodes[loss.id];
        if root.rows * root.cols != 1 {
            return Err(NgcError::Usage(format!(
                "backward needs a scalar loss, got {}x{}",
                root.rows, root.cols
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.id + 1];
        grads[loss.id] = Some(vec![1.0]);
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
                return Err(NgcError::Numeric(format!("non-finite gradient {bad} at {}", node.op.name())));
            }
            if matches!(node.op, Op::Leaf) {
                match &mut leaf_grads[id] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(g),
                }
                continue;
            }
            for (parent, contrib) in node.op.backward(nodes, node, &g) {
                if !nodes[parent].requires_grad {
                    continue;
                }
                match &mut grads[parent] {
                    Some(acc) => acc.iter_mut().zip(&contrib).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(contrib),
                }
            }
        }
        Ok(())
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> (usize, usize) {
        let nodes = self.tape.nodes();
        (nodes[self.id].rows, nodes[self.id].cols)
    }

    pub fn rows(&self) -> usize {
        self.shape().0
    }

    pub fn cols(&self) -> usize {
        self.shape().1
    }

    pub fn value(&self) -> Vec<f64> {
        self.tape.nodes()[self.id].value.clone()
    }

    /// Value of a 1×1 node.
    pub fn item(&self) -> f64 {
        self.tape.nodes()[self.id].value[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes()[self.id].requires_grad
    }

    pub fn to_tensor(&self) -> Tensor {
        let (r, c) = self.shape();
        Tensor {
            shape: vec![r, c],
            values: self.value(),
            requires_grad: false,
            grad: None,
        }
    }
}
