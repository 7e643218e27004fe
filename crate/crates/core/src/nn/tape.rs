//! Reverse-mode automatic differentiation over dense 2-D arrays.
//!
//! A [`Tape`] records every operation applied to its variables. Calling
//! [`Tape::backward`] on a root variable walks the record in reverse and
//! accumulates adjoints for every node. Element-wise binary operations
//! broadcast rows, columns and scalars the same way ndarray does; the
//! backward pass sums adjoints back down to each operand's shape.

use ndarray::{Array2, Axis, Zip};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    Tanh(Var),
    Exp(Var),
    Square(Var),
    Softplus(Var),
    Clamp(Var, f64, f64),
    Min(Var, Var),
    Max(Var, Var),
    RowSum(Var),
    Sum(Var),
    Mean(Var),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the root with respect to `v`; zeros when `v` does not
    /// influence the root.
    pub fn wrt(&self, v: Var) -> Array2<f64> {
        match self.grads.get(v.0) {
            Some(Some(g)) => g.clone(),
            _ => Array2::zeros(self.shapes[v.0]),
        }
    }
}

fn shape(a: &Array2<f64>) -> (usize, usize) {
    (a.nrows(), a.ncols())
}

fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> (usize, usize) {
    let dim = |x: usize, y: usize| {
        if x == y || y == 1 {
            x
        } else if x == 1 {
            y
        } else {
            panic!("incompatible broadcast shapes {a:?} and {b:?}")
        }
    };
    (dim(a.0, b.0), dim(a.1, b.1))
}

/// Sums `g` down to `target` (the inverse of broadcasting).
fn reduce_to(g: Array2<f64>, target: (usize, usize)) -> Array2<f64> {
    let mut g = g;
    if target.0 == 1 && g.nrows() != 1 {
        g = g.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if target.1 == 1 && g.ncols() != 1 {
        g = g.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    g
}

fn full(a: &Array2<f64>, to: (usize, usize)) -> Array2<f64> {
    a.broadcast(to).expect("broadcastable").to_owned()
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&mut self, x: f64) -> Var {
        self.leaf(Array2::from_elem((1, 1), x))
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Value of a 1×1 node.
    pub fn item(&self, v: Var) -> f64 {
        let a = self.value(v);
        debug_assert_eq!(shape(a), (1, 1));
        a[[0, 0]]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(&self.value(b).t());
        self.push(v, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) * k;
        self.push(v, Op::Scale(a, k))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn add_const(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) + k;
        self.push(v, Op::AddConst(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x * x);
        self.push(v, Op::Square(a))
    }

    /// `ln(1 + eˣ)`, evaluated without overflow.
    pub fn softplus(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(softplus);
        self.push(v, Op::Softplus(a))
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(a).mapv(|x| x.clamp(lo, hi));
        self.push(v, Op::Clamp(a, lo, hi))
    }

    pub fn minimum(&mut self, a: Var, b: Var) -> Var {
        let to = broadcast_shape(shape(self.value(a)), shape(self.value(b)));
        let mut v = full(self.value(a), to);
        Zip::from(&mut v)
            .and_broadcast(self.value(b))
            .for_each(|x, &y| *x = x.min(y));
        self.push(v, Op::Min(a, b))
    }

    pub fn maximum(&mut self, a: Var, b: Var) -> Var {
        let to = broadcast_shape(shape(self.value(a)), shape(self.value(b)));
        let mut v = full(self.value(a), to);
        Zip::from(&mut v)
            .and_broadcast(self.value(b))
            .for_each(|x, &y| *x = x.max(y));
        self.push(v, Op::Max(a, b))
    }

    /// Sums each row: `n×m → n×1`.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let v = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(v, Op::RowSum(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a).mean().unwrap_or(0.0));
        self.push(v, Op::Mean(a))
    }

    /// Back-propagates from `root`, seeding its adjoint with ones.
    pub fn backward(&self, root: Var) -> Gradients {
        let n = root.0 + 1;
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; n];
        grads[root.0] = Some(Array2::ones(shape(self.value(root))));

        fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..n).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(b).t());
                    let gb = self.value(a).t().dot(&g);
                    acc(&mut grads, a, ga);
                    acc(&mut grads, b, gb);
                }
                Op::MatMulT(a, b) => {
                    let ga = g.dot(self.value(b));
                    let gb = g.t().dot(self.value(a));
                    acc(&mut grads, a, ga);
                    acc(&mut grads, b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, a, reduce_to(g.clone(), shape(self.value(a))));
                    acc(&mut grads, b, reduce_to(g, shape(self.value(b))));
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, a, reduce_to(g.clone(), shape(self.value(a))));
                    acc(&mut grads, b, reduce_to(-g, shape(self.value(b))));
                }
                Op::Mul(a, b) => {
                    let ga = &g * self.value(b);
                    let gb = &g * self.value(a);
                    acc(&mut grads, a, reduce_to(ga, shape(self.value(a))));
                    acc(&mut grads, b, reduce_to(gb, shape(self.value(b))));
                }
                Op::Scale(a, k) => acc(&mut grads, a, g * k),
                Op::AddConst(a) => acc(&mut grads, a, g),
                Op::Tanh(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(&node.value)
                        .for_each(|g, &y| *g *= 1.0 - y * y);
                    acc(&mut grads, a, ga);
                }
                Op::Exp(a) => acc(&mut grads, a, g * &node.value),
                Op::Square(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(self.value(a))
                        .for_each(|g, &x| *g *= 2.0 * x);
                    acc(&mut grads, a, ga);
                }
                Op::Softplus(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(self.value(a))
                        .for_each(|g, &x| *g *= sigmoid(x));
                    acc(&mut grads, a, ga);
                }
                Op::Clamp(a, lo, hi) => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(self.value(a)).for_each(|g, &x| {
                        if x < lo || x > hi {
                            *g = 0.0;
                        }
                    });
                    acc(&mut grads, a, ga);
                }
                Op::Min(a, b) | Op::Max(a, b) => {
                    let take_min = matches!(node.op, Op::Min(..));
                    let to = shape(&node.value);
                    let av = full(self.value(a), to);
                    let bv = full(self.value(b), to);
                    let mut ga = g.clone();
                    let mut gb = g;
                    Zip::from(&mut ga)
                        .and(&mut gb)
                        .and(&av)
                        .and(&bv)
                        .for_each(|ga, gb, &x, &y| {
                            let pick_a = if take_min { x <= y } else { x >= y };
                            if pick_a {
                                *gb = 0.0;
                            } else {
                                *ga = 0.0;
                            }
                        });
                    acc(&mut grads, a, reduce_to(ga, shape(self.value(a))));
                    acc(&mut grads, b, reduce_to(gb, shape(self.value(b))));
                }
                Op::RowSum(a) => {
                    let ga = full(&g, shape(self.value(a)));
                    acc(&mut grads, a, ga);
                }
                Op::Sum(a) => {
                    let ga = Array2::from_elem(shape(self.value(a)), g[[0, 0]]);
                    acc(&mut grads, a, ga);
                }
                Op::Mean(a) => {
                    let s = shape(self.value(a));
                    let k = (s.0 * s.1).max(1) as f64;
                    let ga = Array2::from_elem(s, g[[0, 0]] / k);
                    acc(&mut grads, a, ga);
                }
            }
        }

        Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| shape(&n.value)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sum_of_squares_gradient_is_twice_the_input() {
        let mut t = Tape::new();
        let w = t.leaf(array![[1.5, -2.0], [0.25, 3.0]]);
        let sq = t.square(w);
        let loss = t.sum(sq);
        let g = t.backward(loss);
        assert_eq!(g.wrt(w), array![[3.0, -4.0], [0.5, 6.0]]);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let mut t = Tape::new();
        let w = t.leaf(array![[1.0, 2.0]]);
        let c = t.scalar(4.0);
        let g = t.backward(c);
        assert_eq!(g.wrt(w), Array2::<f64>::zeros((1, 2)));
    }

    #[test]
    fn broadcast_add_reduces_adjoint() {
        let mut t = Tape::new();
        let a = t.leaf(Array2::ones((3, 2)));
        let row = t.leaf(array![[1.0, 2.0]]);
        let s = t.add(a, row);
        let loss = t.sum(s);
        let g = t.backward(loss);
        assert_eq!(g.wrt(row), array![[3.0, 3.0]]);
        assert_eq!(g.wrt(a), Array2::<f64>::ones((3, 2)));
    }

    #[test]
    fn softplus_is_stable_for_large_inputs() {
        let mut t = Tape::new();
        let x = t.leaf(array![[800.0, -800.0, 0.0]]);
        let y = t.softplus(x);
        let v = t.value(y);
        assert_eq!(v[[0, 0]], 800.0);
        assert!(v[[0, 1]] >= 0.0 && v[[0, 1]] < 1e-300);
        assert!((v[[0, 2]] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn min_routes_gradient_to_smaller_operand() {
        let mut t = Tape::new();
        let a = t.leaf(array![[1.0, 5.0]]);
        let b = t.leaf(array![[2.0, 3.0]]);
        let m = t.minimum(a, b);
        let loss = t.sum(m);
        let g = t.backward(loss);
        assert_eq!(g.wrt(a), array![[1.0, 0.0]]);
        assert_eq!(g.wrt(b), array![[0.0, 1.0]]);
    }
}
