use std::cell::{Cell, RefCell};

use super::{LiquidError, Result};
use crate::Real;

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Scale(usize, T),
    AddScalar(usize),
    MulConst(usize, Vec<T>),
    Tanh(usize),
    Sigmoid(usize),
    Softplus(usize),
    MatVec { w: usize, x: usize, rows: usize, cols: usize },
    Concat(Vec<usize>),
    Slice { a: usize, start: usize },
    Sum(usize),
    Broadcast(usize),
    SqErr { inputs: Vec<usize>, targets: Vec<T> },
}

#[derive(Debug)]
struct Node<T> {
    value: Vec<T>,
    op: Op<T>,
}

/// Records vector-valued operations for one reverse pass.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
    consumed: Cell<bool>,
}

/// Handle to a recorded value.
#[derive(Debug, Clone, Copy)]
pub struct Var<'t, T> {
    tape: &'t Tape<T>,
    id: usize,
}

/// Adjoints from one reverse pass, indexed by node.
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var<'_, T>) -> Option<&[T]> {
        self.grads.get(v.id).and_then(|g| g.as_deref())
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: RefCell::new(Vec::new()), consumed: Cell::new(false) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Vec<T>, op: Op<T>) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var { tape: self, id: nodes.len() - 1 }
    }

    /// Leaf node: a parameter or a constant input.
    pub fn leaf(&self, value: Vec<T>) -> Var<'_, T> {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&self, value: T) -> Var<'_, T> {
        self.leaf(vec![value])
    }

    pub fn concat(&self, parts: &[Var<'_, T>]) -> Var<'_, T> {
        let value = {
            let nodes = self.nodes.borrow();
            parts.iter().flat_map(|p| nodes[p.id].value.iter().copied()).collect()
        };
        self.push(value, Op::Concat(parts.iter().map(|p| p.id).collect()))
    }

    /// Sum of squared differences between scalar outputs and fixed targets.
    pub fn sq_err(&self, outputs: &[Var<'_, T>], targets: &[T]) -> Var<'_, T> {
        assert_eq!(outputs.len(), targets.len(), "one target per output");
        let value = {
            let nodes = self.nodes.borrow();
            outputs
                .iter()
                .zip(targets)
                .map(|(o, &t)| {
                    let d = nodes[o.id].value[0] - t;
                    d * d
                })
                .fold(T::zero(), |a, b| a + b)
        };
        self.push(vec![value], Op::SqErr { inputs: outputs.iter().map(|o| o.id).collect(), targets: targets.to_vec() })
    }

    /// Reverse pass from a scalar node. A tape supports exactly one pass.
    pub fn backward(&self, loss: Var<'_, T>) -> Result<Gradients<T>> {
        if self.consumed.replace(true) {
            return Err(LiquidError::GraphConsumed);
        }
        let nodes = self.nodes.borrow();
        assert_eq!(nodes[loss.id].value.len(), 1, "backward needs a scalar loss");
        let mut grads: Vec<Option<Vec<T>>> = vec![None; nodes.len()];
        grads[loss.id] = Some(vec![T::one()]);
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            let val = |i: usize| nodes[i].value.as_slice();
            let mut acc = |i: usize, f: &dyn Fn(usize) -> T| {
                let slot = grads[i].get_or_insert_with(|| vec![T::zero(); nodes[i].value.len()]);
                for (k, s) in slot.iter_mut().enumerate() {
                    *s = *s + f(k);
                }
            };
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    acc(*a, &|k| g[k]);
                    acc(*b, &|k| g[k]);
                }
                Op::Sub(a, b) => {
                    acc(*a, &|k| g[k]);
                    acc(*b, &|k| -g[k]);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (val(*a), val(*b));
                    acc(*a, &|k| g[k] * vb[k]);
                    acc(*b, &|k| g[k] * va[k]);
                }
                Op::Div(a, b) => {
                    let vb = val(*b);
                    let y = &node.value;
                    acc(*a, &|k| g[k] / vb[k]);
                    acc(*b, &|k| -g[k] * y[k] / vb[k]);
                }
                Op::Scale(a, c) => acc(*a, &|k| g[k] * *c),
                Op::AddScalar(a) => acc(*a, &|k| g[k]),
                Op::MulConst(a, c) => acc(*a, &|k| g[k] * c[k]),
                Op::Tanh(a) => {
                    let y = &node.value;
                    acc(*a, &|k| g[k] * (T::one() - y[k] * y[k]));
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    acc(*a, &|k| g[k] * y[k] * (T::one() - y[k]));
                }
                Op::Softplus(a) => {
                    let x = val(*a);
                    acc(*a, &|k| g[k] * x[k].sigmoid());
                }
                Op::MatVec { w, x, rows, cols } => {
                    let (vw, vx) = (val(*w), val(*x));
                    let (rows, cols) = (*rows, *cols);
                    acc(*w, &|k| g[k / cols] * vx[k % cols]);
                    acc(*x, &|c| (0..rows).fold(T::zero(), |s, r| s + vw[r * cols + c] * g[r]));
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = nodes[p].value.len();
                        acc(p, &|k| g[off + k]);
                        off += n;
                    }
                }
                Op::Slice { a, start } => {
                    let (start, n) = (*start, node.value.len());
                    acc(*a, &|k| if k >= start && k < start + n { g[k - start] } else { T::zero() });
                }
                Op::Sum(a) => acc(*a, &|_| g[0]),
                Op::Broadcast(a) => acc(*a, &|_| g.iter().fold(T::zero(), |s, &v| s + v)),
                Op::SqErr { inputs, targets } => {
                    let two = T::lit(2.0);
                    for (&i, &t) in inputs.iter().zip(targets) {
                        let d = val(i)[0] - t;
                        acc(i, &|_| g[0] * two * d);
                    }
                }
            }
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

impl<'t, T: Real> Var<'t, T> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Vec<T> {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    pub fn len(&self) -> usize {
        self.tape.nodes.borrow()[self.id].value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn unary(self, op: Op<T>, f: impl Fn(T) -> T) -> Self {
        let value = self.tape.nodes.borrow()[self.id].value.iter().map(|&v| f(v)).collect();
        self.tape.push(value, op)
    }

    fn binary(self, other: Self, op: Op<T>, f: impl Fn(T, T) -> T) -> Self {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
            assert_eq!(a.len(), b.len(), "elementwise operands differ in length");
            a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
        };
        self.tape.push(value, op)
    }

    pub fn add(self, other: Self) -> Self {
        self.binary(other, Op::Add(self.id, other.id), |a, b| a + b)
    }

    pub fn sub(self, other: Self) -> Self {
        self.binary(other, Op::Sub(self.id, other.id), |a, b| a - b)
    }

    pub fn mul(self, other: Self) -> Self {
        self.binary(other, Op::Mul(self.id, other.id), |a, b| a * b)
    }

    pub fn div(self, other: Self) -> Self {
        self.binary(other, Op::Div(self.id, other.id), |a, b| a / b)
    }

    pub fn scale(self, c: T) -> Self {
        self.unary(Op::Scale(self.id, c), |v| v * c)
    }

    pub fn add_scalar(self, c: T) -> Self {
        self.unary(Op::AddScalar(self.id), |v| v + c)
    }

    /// Elementwise product with a constant vector (no gradient to the constant).
    pub fn mul_const(self, c: Vec<T>) -> Self {
        let value = {
            let nodes = self.tape.nodes.borrow();
            nodes[self.id].value.iter().zip(&c).map(|(&v, &m)| v * m).collect()
        };
        self.tape.push(value, Op::MulConst(self.id, c))
    }

    pub fn tanh(self) -> Self {
        self.unary(Op::Tanh(self.id), |v| v.tanh())
    }

    pub fn sigmoid(self) -> Self {
        self.unary(Op::Sigmoid(self.id), |v| v.sigmoid())
    }

    pub fn softplus(self) -> Self {
        self.unary(Op::Softplus(self.id), |v| v.softplus())
    }

    /// `W x` with `W` stored row-major as `rows x cols`.
    pub fn matvec(w: Self, x: Self, rows: usize) -> Self {
        let (value, cols) = {
            let nodes = w.tape.nodes.borrow();
            let (vw, vx) = (&nodes[w.id].value, &nodes[x.id].value);
            let cols = vx.len();
            assert_eq!(vw.len(), rows * cols, "matrix shape does not match vector");
            let y = (0..rows)
                .map(|r| vw[r * cols..(r + 1) * cols].iter().zip(vx.iter()).fold(T::zero(), |s, (&a, &b)| s + a * b))
                .collect();
            (y, cols)
        };
        w.tape.push(value, Op::MatVec { w: w.id, x: x.id, rows, cols })
    }

    pub fn slice(self, start: usize, len: usize) -> Self {
        let value = self.tape.nodes.borrow()[self.id].value[start..start + len].to_vec();
        self.tape.push(value, Op::Slice { a: self.id, start })
    }

    pub fn sum(self) -> Self {
        let value = self.tape.nodes.borrow()[self.id].value.iter().fold(T::zero(), |s, &v| s + v);
        self.tape.push(vec![value], Op::Sum(self.id))
    }

    /// Repeats a one-element node `n` times.
    pub fn broadcast(self, n: usize) -> Self {
        let v = self.tape.nodes.borrow()[self.id].value[0];
        self.tape.push(vec![v; n], Op::Broadcast(self.id))
    }
}
