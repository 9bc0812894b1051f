//! Reverse-mode automatic differentiation over a recorded tape.
//!
//! Every recorded value is a dense row-major matrix; a scalar is a `1×1`
//! matrix. Each node keeps what its local partials need, and
//! [`Tape::backward`] performs a single reverse sweep over the append-only
//! recording, so gradients are bitwise reproducible for a fixed recording.
//!
//! Binary element-wise ops broadcast along any axis of extent 1.

mod expr_bridge;
mod gradcheck;

pub use expr_bridge::{eval_expr_batch, eval_expr_on_tape};
pub use gradcheck::{gradcheck, gradcheck_coords, Coordinate, FdScheme, GradcheckReport};

use crate::error::DomainError;
use crate::scalar::{gemm, MatRef, Scalar};

/// Handle to a recorded value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Unary {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Softplus,
    Sigmoid,
    Square,
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Scale(Var, T),
    Offset(Var),
    Unary(Var, Unary),
    ClampMin(Var, T),
    Sum(Var),
    SumRows(Var),
    SumCols(Var),
    Dot(Var, Var),
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    SoftmaxRows(Var),
    LayerNormRows { x: Var, inv_std: Vec<T> },
    GroupScale { x: Var, d: Var, groups: usize },
    Reshape(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SelectCols(Var, Vec<usize>),
    SliceRows(Var, usize),
    Transpose(Var),
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Neg(_) => "neg",
            Op::Scale(..) => "scale",
            Op::Offset(_) => "offset",
            Op::Unary(_, u) => match u {
                Unary::Sin => "sin",
                Unary::Cos => "cos",
                Unary::Exp => "exp",
                Unary::Log => "log",
                Unary::Sqrt => "sqrt",
                Unary::Softplus => "softplus",
                Unary::Sigmoid => "sigmoid",
                Unary::Square => "square",
            },
            Op::ClampMin(..) => "clamp_min",
            Op::Sum(_) => "sum",
            Op::SumRows(_) => "sum_rows",
            Op::SumCols(_) => "sum_cols",
            Op::Dot(..) => "dot",
            Op::MatMul { .. } => "matmul",
            Op::SoftmaxRows(_) => "softmax",
            Op::LayerNormRows { .. } => "layer_norm",
            Op::GroupScale { .. } => "group_scale",
            Op::Reshape(_) => "reshape",
            Op::ConcatCols(_) => "concat_cols",
            Op::ConcatRows(_) => "concat_rows",
            Op::SelectCols(..) => "select_cols",
            Op::SliceRows(..) => "slice_rows",
            Op::Transpose(_) => "transpose",
        }
    }
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Vec<T>,
    rows: usize,
    cols: usize,
    op: Op<T>,
    needs_grad: bool,
}

/// Overflow-safe `ln(1 + e^x)`.
#[inline]
pub fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
fn bidx(r: usize, c: usize, rows: usize, cols: usize) -> usize {
    let r = if rows == 1 { 0 } else { r };
    let c = if cols == 1 { 0 } else { c };
    r * cols + c
}

fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> (usize, usize) {
    let dim = |x: usize, y: usize| {
        assert!(
            x == y || x == 1 || y == 1,
            "cannot broadcast {a:?} with {b:?}"
        );
        x.max(y)
    };
    (dim(a.0, b.0), dim(a.1, b.1))
}

/// One forward+backward recording.
#[derive(Clone, Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
    shapes: Vec<(usize, usize)>,
}

impl<T: Scalar> Gradients<T> {
    /// Adjoint of `v`; all zeros when `v` does not influence the output.
    pub fn wrt(&self, v: Var) -> Vec<T> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                vec![T::zero(); r * c]
            }
        }
    }

    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads[v.0].as_deref()
    }

    /// Adjoint of a scalar value.
    pub fn scalar(&self, v: Var) -> T {
        self.get(v).map_or(T::zero(), |g| g[0])
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<T>, rows: usize, cols: usize, op: Op<T>) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        let needs_grad = match &op {
            Op::Leaf => false,
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) | Op::Dot(a, b) => {
                self.needs(*a) || self.needs(*b)
            }
            Op::MatMul { a, b, .. } => self.needs(*a) || self.needs(*b),
            Op::GroupScale { x, d, .. } => self.needs(*x) || self.needs(*d),
            Op::Neg(a)
            | Op::Scale(a, _)
            | Op::Offset(a)
            | Op::Unary(a, _)
            | Op::ClampMin(a, _)
            | Op::Sum(a)
            | Op::SumRows(a)
            | Op::SumCols(a)
            | Op::SoftmaxRows(a)
            | Op::Reshape(a)
            | Op::SelectCols(a, _)
            | Op::SliceRows(a, _)
            | Op::Transpose(a) => self.needs(*a),
            Op::LayerNormRows { x, .. } => self.needs(*x),
            Op::ConcatCols(parts) | Op::ConcatRows(parts) => parts.iter().any(|p| self.needs(*p)),
        };
        self.nodes.push(Node {
            value,
            rows,
            cols,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Differentiable input.
    pub fn leaf(&mut self, value: Vec<T>, rows: usize, cols: usize) -> Var {
        assert_eq!(value.len(), rows * cols, "leaf data/shape mismatch");
        let v = self.push(value, rows, cols, Op::Leaf);
        self.nodes[v.0].needs_grad = true;
        v
    }

    /// Input treated as a constant: no adjoint is propagated into it.
    pub fn constant(&mut self, value: Vec<T>, rows: usize, cols: usize) -> Var {
        assert_eq!(value.len(), rows * cols, "constant data/shape mismatch");
        self.push(value, rows, cols, Op::Leaf)
    }

    pub fn scalar_leaf(&mut self, v: T) -> Var {
        self.leaf(vec![v], 1, 1)
    }

    pub fn scalar_constant(&mut self, v: T) -> Var {
        self.constant(vec![v], 1, 1)
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> T {
        let n = &self.nodes[v.0];
        assert_eq!(n.value.len(), 1, "value is not a scalar");
        n.value[0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn is_leaf(&self, v: Var) -> bool {
        matches!(self.nodes[v.0].op, Op::Leaf)
    }

    /// First recorded node holding a NaN or infinity, with its op name.
    pub fn first_non_finite(&self) -> Option<(usize, &'static str)> {
        self.nodes
            .iter()
            .position(|n| n.value.iter().any(|v| !v.is_finite()))
            .map(|i| (i, self.nodes[i].op.name()))
    }

    fn zip(&mut self, a: Var, b: Var, op: Op<T>, f: impl Fn(T, T) -> T) -> Var {
        let (na, nb) = (&self.nodes[a.0], &self.nodes[b.0]);
        let (rows, cols) = broadcast_shape((na.rows, na.cols), (nb.rows, nb.cols));
        let value: Vec<T> = if na.rows == nb.rows && na.cols == nb.cols {
            na.value
                .iter()
                .zip(&nb.value)
                .map(|(&x, &y)| f(x, y))
                .collect()
        } else if nb.value.len() == 1 {
            let y = nb.value[0];
            na.value.iter().map(|&x| f(x, y)).collect()
        } else if na.value.len() == 1 {
            let x = na.value[0];
            nb.value.iter().map(|&y| f(x, y)).collect()
        } else {
            let mut out = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for c in 0..cols {
                    out.push(f(
                        na.value[bidx(r, c, na.rows, na.cols)],
                        nb.value[bidx(r, c, nb.rows, nb.cols)],
                    ));
                }
            }
            out
        };
        self.push(value, rows, cols, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, DomainError> {
        if let Some(&z) = self.value(b).iter().find(|v| **v == T::zero()) {
            return Err(DomainError {
                op: "div",
                value: z.as_f64(),
            });
        }
        Ok(self.zip(a, b, Op::Div(a, b), |x, y| x / y))
    }

    fn map(&mut self, a: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let n = &self.nodes[a.0];
        let value = n.value.iter().map(|&x| f(x)).collect();
        let (rows, cols) = (n.rows, n.cols);
        self.push(value, rows, cols, op)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.map(a, Op::Neg(a), |x| -x)
    }

    /// `k * a` for a constant `k`.
    pub fn scale(&mut self, a: Var, k: T) -> Var {
        self.map(a, Op::Scale(a, k), |x| k * x)
    }

    /// `a + k` for a constant `k`.
    pub fn offset(&mut self, a: Var, k: T) -> Var {
        self.map(a, Op::Offset(a), |x| x + k)
    }

    fn unary(&mut self, a: Var, u: Unary) -> Var {
        let f: fn(T) -> T = match u {
            Unary::Sin => T::sin,
            Unary::Cos => T::cos,
            Unary::Exp => T::exp,
            Unary::Log => T::ln,
            Unary::Sqrt => T::sqrt,
            Unary::Softplus => softplus,
            Unary::Sigmoid => sigmoid,
            Unary::Square => |x| x * x,
        };
        self.map(a, Op::Unary(a, u), f)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Sin)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Cos)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Exp)
    }

    pub fn log(&mut self, a: Var) -> Result<Var, DomainError> {
        if let Some(&bad) = self.value(a).iter().find(|v| !(**v > T::zero())) {
            return Err(DomainError {
                op: "log",
                value: bad.as_f64(),
            });
        }
        Ok(self.unary(a, Unary::Log))
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var, DomainError> {
        if let Some(&bad) = self.value(a).iter().find(|v| **v < T::zero()) {
            return Err(DomainError {
                op: "sqrt",
                value: bad.as_f64(),
            });
        }
        Ok(self.unary(a, Unary::Sqrt))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Softplus)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Sigmoid)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Square)
    }

    /// `max(a, floor)` element-wise.
    pub fn clamp_min(&mut self, a: Var, floor: T) -> Var {
        self.map(a, Op::ClampMin(a, floor), |x| x.max(floor))
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().copied().sum();
        self.push(vec![s], 1, 1, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = T::from_usize(self.value(a).len()).expect("length");
        let s = self.sum(a);
        self.scale(s, T::one() / n)
    }

    /// Column sums: `(r, c) -> (1, c)`.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let n = &self.nodes[a.0];
        let mut out = vec![T::zero(); n.cols];
        for row in n.value.chunks_exact(n.cols.max(1)) {
            for (o, &v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        let cols = n.cols;
        self.push(out, 1, cols, Op::SumRows(a))
    }

    /// Row sums: `(r, c) -> (r, 1)`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let n = &self.nodes[a.0];
        let out: Vec<T> = if n.cols == 0 {
            vec![T::zero(); n.rows]
        } else {
            n.value
                .chunks_exact(n.cols)
                .map(|r| r.iter().copied().sum())
                .collect()
        };
        let rows = n.rows;
        self.push(out, rows, 1, Op::SumCols(a))
    }

    /// Sum of the element-wise product of two equally shaped values.
    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "dot operands differ in shape");
        let s = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| x * y)
            .sum();
        self.push(vec![s], 1, 1, Op::Dot(a, b))
    }

    /// `op(a) * op(b)` where `op` optionally transposes.
    pub fn matmul_t(&mut self, a: Var, ta: bool, b: Var, tb: bool) -> Var {
        let (na, nb) = (&self.nodes[a.0], &self.nodes[b.0]);
        let ma = MatRef::new(&na.value, na.rows, na.cols);
        let mb = MatRef::new(&nb.value, nb.rows, nb.cols);
        let ma = if ta { ma.t() } else { ma };
        let mb = if tb { mb.t() } else { mb };
        let (m, _) = ma.shape();
        let (_, n) = mb.shape();
        let mut out = vec![T::zero(); m * n];
        gemm(T::one(), ma, mb, T::zero(), &mut out);
        self.push(out, m, n, Op::MatMul { a, b, ta, tb })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, false, b, false)
    }

    /// `a * bᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, false, b, true)
    }

    /// `aᵀ * b`
    pub fn matmul_tn(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, true, b, false)
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let n = &self.nodes[a.0];
        let mut out = n.value.clone();
        for row in out.chunks_exact_mut(n.cols.max(1)) {
            let m = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut z = T::zero();
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                z += *v;
            }
            for v in row.iter_mut() {
                *v /= z;
            }
        }
        let (rows, cols) = (n.rows, n.cols);
        self.push(out, rows, cols, Op::SoftmaxRows(a))
    }

    /// Per-row standardization `(x − mean) / sqrt(var + eps)` using the
    /// population variance; no affine parameters.
    pub fn layer_norm_rows(&mut self, a: Var, eps: T) -> Var {
        let n = &self.nodes[a.0];
        let cols = n.cols;
        let width = T::from_usize(cols).expect("width");
        let mut out = n.value.clone();
        let mut inv_std = Vec::with_capacity(n.rows);
        for row in out.chunks_exact_mut(cols.max(1)) {
            let mean = row.iter().copied().sum::<T>() / width;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / width;
            let s = T::one() / (var + eps).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * s;
            }
            inv_std.push(s);
        }
        let rows = n.rows;
        self.push(out, rows, cols, Op::LayerNormRows { x: a, inv_std })
    }

    /// Per-sample scaling of a stack of row groups.
    ///
    /// `d` is `(n, c)`. `x` is either `(groups, c)` (shared by all samples)
    /// or `(n * groups, c)`. Output row `s * groups + o` is row `o` of
    /// sample `s`'s group multiplied element-wise by `d[s, :]`.
    pub fn group_scale(&mut self, x: Var, d: Var, groups: usize) -> Var {
        let (xr, xc) = self.shape(x);
        let (n, c) = self.shape(d);
        assert_eq!(xc, c, "group_scale column mismatch");
        let shared = xr == groups;
        assert!(shared || xr == n * groups, "group_scale row mismatch");
        let (xv, dv) = (&self.nodes[x.0].value, &self.nodes[d.0].value);
        let mut out = Vec::with_capacity(n * groups * c);
        for s in 0..n {
            let drow = &dv[s * c..(s + 1) * c];
            for o in 0..groups {
                let r = if shared { o } else { s * groups + o };
                out.extend(xv[r * c..(r + 1) * c].iter().zip(drow).map(|(&a, &b)| a * b));
            }
        }
        self.push(out, n * groups, c, Op::GroupScale { x, d, groups })
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let n = &self.nodes[a.0];
        assert_eq!(n.rows * n.cols, rows * cols, "reshape changes size");
        let v = n.value.clone();
        self.push(v, rows, cols, Op::Reshape(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let rows = self.shape(parts[0]).0;
        let cols: usize = parts
            .iter()
            .map(|p| {
                assert_eq!(self.shape(*p).0, rows, "concat_cols row mismatch");
                self.shape(*p).1
            })
            .sum();
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                let n = &self.nodes[p.0];
                out.extend_from_slice(&n.value[r * n.cols..(r + 1) * n.cols]);
            }
        }
        self.push(out, rows, cols, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let cols = self.shape(parts[0]).1;
        let mut out = Vec::new();
        let mut rows = 0;
        for p in parts {
            let n = &self.nodes[p.0];
            assert_eq!(n.cols, cols, "concat_rows column mismatch");
            out.extend_from_slice(&n.value);
            rows += n.rows;
        }
        self.push(out, rows, cols, Op::ConcatRows(parts.to_vec()))
    }

    /// Gathers columns `idx` (repeats allowed).
    pub fn select_cols(&mut self, a: Var, idx: &[usize]) -> Var {
        let n = &self.nodes[a.0];
        assert!(idx.iter().all(|&i| i < n.cols), "column index out of range");
        let mut out = Vec::with_capacity(n.rows * idx.len());
        for row in n.value.chunks_exact(n.cols.max(1)).take(n.rows) {
            out.extend(idx.iter().map(|&i| row[i]));
        }
        let rows = n.rows;
        self.push(out, rows, idx.len(), Op::SelectCols(a, idx.to_vec()))
    }

    /// Rows `start..start + len`.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let n = &self.nodes[a.0];
        assert!(start + len <= n.rows, "row slice out of range");
        let cols = n.cols;
        let v = n.value[start * cols..(start + len) * cols].to_vec();
        self.push(v, len, cols, Op::SliceRows(a, start))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let n = &self.nodes[a.0];
        let (r, c) = (n.rows, n.cols);
        let mut out = Vec::with_capacity(r * c);
        for j in 0..c {
            out.extend((0..r).map(|i| n.value[i * c + j]));
        }
        self.push(out, c, r, Op::Transpose(a))
    }

    /// Reverse sweep from the scalar `output`.
    pub fn backward(&self, output: Var) -> Gradients<T> {
        let out = &self.nodes[output.0];
        assert_eq!(out.value.len(), 1, "backward needs a scalar output");
        let mut grads: Vec<Option<Vec<T>>> = vec![None; output.0 + 1];
        grads[output.0] = Some(vec![T::one()]);
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else {
                continue;
            };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        grads.resize(self.nodes.len(), None);
        Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| (n.rows, n.cols)).collect(),
        }
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        if !node.needs_grad {
            return;
        }
        macro_rules! acc {
            ($v:expr) => {{
                let v: Var = $v;
                let n = &self.nodes[v.0];
                if n.needs_grad {
                    Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); n.value.len()]))
                } else {
                    None
                }
            }};
        }
        let (rows, cols) = (node.rows, node.cols);
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) {
                    -T::one()
                } else {
                    T::one()
                };
                for (v, s) in [(*a, T::one()), (*b, sign)] {
                    let (vr, vc) = self.shape(v);
                    if let Some(gv) = acc!(v) {
                        reduce_into(gv, g, rows, cols, vr, vc, |_, x| s * x);
                    }
                }
            }
            Op::Mul(a, b) | Op::Div(a, b) => {
                let (a, b) = (*a, *b);
                let (na, nb) = (&self.nodes[a.0], &self.nodes[b.0]);
                let div = matches!(node.op, Op::Div(..));
                if let Some(ga) = acc!(a) {
                    for r in 0..rows {
                        for c in 0..cols {
                            let y = nb.value[bidx(r, c, nb.rows, nb.cols)];
                            let gi = g[r * cols + c];
                            ga[bidx(r, c, na.rows, na.cols)] += if div { gi / y } else { gi * y };
                        }
                    }
                }
                if let Some(gb) = acc!(b) {
                    for r in 0..rows {
                        for c in 0..cols {
                            let x = na.value[bidx(r, c, na.rows, na.cols)];
                            let gi = g[r * cols + c];
                            let j = bidx(r, c, nb.rows, nb.cols);
                            gb[j] += if div {
                                let y = nb.value[j];
                                -gi * x / (y * y)
                            } else {
                                gi * x
                            };
                        }
                    }
                }
            }
            Op::Neg(a) => {
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().zip(g).for_each(|(d, &x)| *d -= x);
                }
            }
            Op::Scale(a, k) => {
                let k = *k;
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().zip(g).for_each(|(d, &x)| *d += k * x);
                }
            }
            Op::Offset(a) | Op::Reshape(a) => {
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().zip(g).for_each(|(d, &x)| *d += x);
                }
            }
            Op::Unary(a, u) => {
                let x = &self.nodes[a.0].value;
                let y = &node.value;
                let two = T::lit(2.0);
                let half = T::lit(0.5);
                if let Some(ga) = acc!(*a) {
                    for k in 0..g.len() {
                        let local = match u {
                            Unary::Sin => x[k].cos(),
                            Unary::Cos => -x[k].sin(),
                            Unary::Exp => y[k],
                            Unary::Log => T::one() / x[k],
                            Unary::Sqrt => half / y[k],
                            Unary::Softplus => sigmoid(x[k]),
                            Unary::Sigmoid => y[k] * (T::one() - y[k]),
                            Unary::Square => two * x[k],
                        };
                        ga[k] += g[k] * local;
                    }
                }
            }
            Op::ClampMin(a, floor) => {
                let x = &self.nodes[a.0].value;
                let floor = *floor;
                if let Some(ga) = acc!(*a) {
                    for k in 0..g.len() {
                        if x[k] > floor {
                            ga[k] += g[k];
                        }
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::SumRows(a) => {
                if let Some(ga) = acc!(*a) {
                    for row in ga.chunks_exact_mut(cols.max(1)) {
                        row.iter_mut().zip(g).for_each(|(d, &x)| *d += x);
                    }
                }
            }
            Op::SumCols(a) => {
                let ac = self.nodes[a.0].cols;
                if let Some(ga) = acc!(*a) {
                    for (row, &x) in ga.chunks_exact_mut(ac.max(1)).zip(g) {
                        row.iter_mut().for_each(|d| *d += x);
                    }
                }
            }
            Op::Dot(a, b) => {
                let (a, b) = (*a, *b);
                if let Some(ga) = acc!(a) {
                    let bv = &self.nodes[b.0].value;
                    ga.iter_mut().zip(bv).for_each(|(d, &y)| *d += g[0] * y);
                }
                if let Some(gb) = acc!(b) {
                    let av = &self.nodes[a.0].value;
                    gb.iter_mut().zip(av).for_each(|(d, &x)| *d += g[0] * x);
                }
            }
            Op::MatMul { a, b, ta, tb } => {
                let (a, b, ta, tb) = (*a, *b, *ta, *tb);
                let (na, nb) = (&self.nodes[a.0], &self.nodes[b.0]);
                let dc = MatRef::new(g, rows, cols);
                let ma = MatRef::new(&na.value, na.rows, na.cols);
                let mb = MatRef::new(&nb.value, nb.rows, nb.cols);
                let opb = if tb { mb.t() } else { mb };
                let opa = if ta { ma.t() } else { ma };
                if let Some(ga) = acc!(a) {
                    if ta {
                        gemm(T::one(), opb, dc.t(), T::one(), ga);
                    } else {
                        gemm(T::one(), dc, opb.t(), T::one(), ga);
                    }
                }
                if let Some(gb) = acc!(b) {
                    if tb {
                        gemm(T::one(), dc.t(), opa, T::one(), gb);
                    } else {
                        gemm(T::one(), opa.t(), dc, T::one(), gb);
                    }
                }
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                if let Some(ga) = acc!(*a) {
                    for r in 0..rows {
                        let sl = r * cols..(r + 1) * cols;
                        let (yr, gr) = (&y[sl.clone()], &g[sl.clone()]);
                        let s: T = yr.iter().zip(gr).map(|(&p, &q)| p * q).sum();
                        for (k, d) in ga[sl].iter_mut().enumerate() {
                            *d += yr[k] * (gr[k] - s);
                        }
                    }
                }
            }
            Op::LayerNormRows { x, inv_std } => {
                let y = &node.value;
                let width = T::from_usize(cols).expect("width");
                if let Some(gx) = acc!(*x) {
                    for r in 0..rows {
                        let sl = r * cols..(r + 1) * cols;
                        let (yr, gr) = (&y[sl.clone()], &g[sl.clone()]);
                        let mg = gr.iter().copied().sum::<T>() / width;
                        let mgy = yr.iter().zip(gr).map(|(&p, &q)| p * q).sum::<T>() / width;
                        let s = inv_std[r];
                        for (k, d) in gx[sl].iter_mut().enumerate() {
                            *d += s * (gr[k] - mg - yr[k] * mgy);
                        }
                    }
                }
            }
            Op::GroupScale { x, d, groups } => {
                let (x, d, groups) = (*x, *d, *groups);
                let (nx, nd) = (&self.nodes[x.0], &self.nodes[d.0]);
                let shared = nx.rows == groups;
                let n = nd.rows;
                let c = cols;
                if let Some(gx) = acc!(x) {
                    for s in 0..n {
                        let drow = &nd.value[s * c..(s + 1) * c];
                        for o in 0..groups {
                            let xr = if shared { o } else { s * groups + o };
                            let orow = &g[(s * groups + o) * c..(s * groups + o + 1) * c];
                            for k in 0..c {
                                gx[xr * c + k] += orow[k] * drow[k];
                            }
                        }
                    }
                }
                if let Some(gd) = acc!(d) {
                    for s in 0..n {
                        for o in 0..groups {
                            let xr = if shared { o } else { s * groups + o };
                            let xrow = &nx.value[xr * c..(xr + 1) * c];
                            let orow = &g[(s * groups + o) * c..(s * groups + o + 1) * c];
                            for k in 0..c {
                                gd[s * c + k] += orow[k] * xrow[k];
                            }
                        }
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let pc = self.nodes[p.0].cols;
                    if let Some(gp) = acc!(*p) {
                        for r in 0..rows {
                            for k in 0..pc {
                                gp[r * pc + k] += g[r * cols + off + k];
                            }
                        }
                    }
                    off += pc;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let len = self.nodes[p.0].value.len();
                    if let Some(gp) = acc!(*p) {
                        gp.iter_mut()
                            .zip(&g[off..off + len])
                            .for_each(|(d, &x)| *d += x);
                    }
                    off += len;
                }
            }
            Op::SelectCols(a, idx) => {
                let ac = self.nodes[a.0].cols;
                if let Some(ga) = acc!(*a) {
                    for r in 0..rows {
                        for (k, &j) in idx.iter().enumerate() {
                            ga[r * ac + j] += g[r * cols + k];
                        }
                    }
                }
            }
            Op::SliceRows(a, start) => {
                let off = start * cols;
                if let Some(ga) = acc!(*a) {
                    ga[off..off + g.len()]
                        .iter_mut()
                        .zip(g)
                        .for_each(|(d, &x)| *d += x);
                }
            }
            Op::Transpose(a) => {
                if let Some(ga) = acc!(*a) {
                    // `a` is (cols, rows); `g` is (rows, cols).
                    for i in 0..rows {
                        for j in 0..cols {
                            ga[j * rows + i] += g[i * cols + j];
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates `f(index, g)` of an `(rows, cols)` adjoint into a
/// broadcast operand of shape `(vr, vc)`.
fn reduce_into<T: Scalar>(
    gv: &mut [T],
    g: &[T],
    rows: usize,
    cols: usize,
    vr: usize,
    vc: usize,
    f: impl Fn(usize, T) -> T,
) {
    if vr == rows && vc == cols {
        for (k, (d, &x)) in gv.iter_mut().zip(g).enumerate() {
            *d += f(k, x);
        }
        return;
    }
    for r in 0..rows {
        for c in 0..cols {
            let k = r * cols + c;
            gv[bidx(r, c, vr, vc)] += f(k, g[k]);
        }
    }
}
