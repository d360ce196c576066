use std::cell::{Ref, RefCell};
use std::fmt;

use crate::Shape;

pub(crate) type NodeId = usize;

/// Recorded operation. Inputs always carry smaller ids than the node
/// itself, so reverse id order is a valid topological order.
pub(crate) enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Minimum(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    Exp(NodeId),
    Log(NodeId),
    Softplus(NodeId),
    Square(NodeId),
    Softmax(NodeId, usize),
    LogSoftmax(NodeId, usize),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    Concat(Vec<NodeId>, usize),
    Slice {
        x: NodeId,
        axis: usize,
        start: usize,
    },
    GatherRows(NodeId, Vec<usize>),
    Sum(NodeId, usize),
    Mean(NodeId, usize),
    SumAll(NodeId),
    MeanAll(NodeId),
    Reshape(NodeId),
    Transpose(NodeId),
}

pub(crate) struct Node {
    pub value: Vec<f64>,
    pub shape: Shape,
    pub op: Op,
    pub requires_grad: bool,
}

/// Operation recorder. Rebuilt for every training step.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Tensor<'t> {
    pub(crate) tape: &'t Tape,
    pub(crate) id: NodeId,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf that never receives gradient.
    pub fn constant(&self, value: Vec<f64>, dims: &[usize]) -> Tensor<'_> {
        self.leaf(value, Shape::new(dims), false)
    }

    /// Leaf that receives gradient.
    pub fn variable(&self, value: Vec<f64>, dims: &[usize]) -> Tensor<'_> {
        self.leaf(value, Shape::new(dims), true)
    }

    pub fn scalar(&self, value: f64) -> Tensor<'_> {
        self.leaf(vec![value], Shape::scalar(), false)
    }

    pub fn zeros(&self, dims: &[usize]) -> Tensor<'_> {
        let shape = Shape::new(dims);
        self.leaf(vec![0.0; shape.numel()], shape, false)
    }

    pub(crate) fn leaf(&self, value: Vec<f64>, shape: Shape, requires_grad: bool) -> Tensor<'_> {
        assert_eq!(
            value.len(),
            shape.numel(),
            "leaf buffer length {} does not match shape {}",
            value.len(),
            shape
        );
        let id = self.push(value, shape, Op::Leaf, requires_grad);
        Tensor { tape: self, id }
    }

    pub(crate) fn push(&self, value: Vec<f64>, shape: Shape, op: Op, requires_grad: bool) -> NodeId {
        debug_assert_eq!(value.len(), shape.numel());
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            shape,
            op,
            requires_grad,
        });
        nodes.len() - 1
    }

    pub(crate) fn nodes(&self) -> Ref<'_, Vec<Node>> {
        self.nodes.borrow()
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("nodes", &self.len()).finish()
    }
}

impl<'t> Tensor<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> Shape {
        self.tape.nodes()[self.id].shape
    }

    pub fn dims(&self) -> Vec<usize> {
        self.shape().dims().to_vec()
    }

    pub fn numel(&self) -> usize {
        self.shape().numel()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes()[self.id].requires_grad
    }

    /// Copy of the forward value.
    pub fn value(&self) -> Vec<f64> {
        self.tape.nodes()[self.id].value.clone()
    }

    pub fn with_value<R>(&self, f: impl FnOnce(&[f64]) -> R) -> R {
        f(&self.tape.nodes()[self.id].value)
    }

    /// First element; intended for scalars.
    pub fn item(&self) -> f64 {
        self.tape.nodes()[self.id].value[0]
    }

    /// Constant copy cut from the graph.
    pub fn detach(&self) -> Tensor<'t> {
        let (v, s) = {
            let nodes = self.tape.nodes();
            (nodes[self.id].value.clone(), nodes[self.id].shape)
        };
        self.tape.leaf(v, s, false)
    }
}

impl fmt::Debug for Tensor<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor#{}{}", self.id, self.shape())
    }
}
