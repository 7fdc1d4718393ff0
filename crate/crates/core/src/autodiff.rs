//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! A [`Graph`] records every operation applied to its [`Var`]s. Nodes are
//! appended in evaluation order, so the backward sweep simply walks the tape
//! in reverse. Only nodes that (transitively) depend on a parameter leaf carry
//! gradients; constants are never differentiated.
//!
//! Matrices are row-major `[rows × cols]`; a scalar is a `[1]` tensor.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    AddBias(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    /// Multiplies every row elementwise by a fixed vector.
    MulRow(usize, Vec<f64>),
    /// `c / x` for a fixed tensor `c` of the same shape.
    DivInto(usize, Vec<f64>),
    Relu(usize),
    Tanh(usize),
    Sigmoid(usize),
    Softplus(usize),
    ScaledTanh(usize, f64),
    /// `ln(max(x, floor))`.
    Log(usize, f64),
    Square(usize),
    ConcatCols(usize, usize),
    GatherRows(usize, Vec<usize>),
    /// Per-row `Σ_j w_j² x_j²`.
    RowSqNorm(usize, Option<Vec<f64>>),
    /// Per-row radial projection onto `‖diag(w) x‖ ≤ radius`.
    ProjectBall(usize, f64, Option<Vec<f64>>),
    Mean(usize),
    Sum(usize),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recorded computation.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every differentiable node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, or `None` if `v` did not
    /// influence the loss through a differentiable path.
    pub fn get(&self, v: Var) -> Option<Tensor> {
        let g = self.grads.get(v.0)?.as_ref()?;
        Tensor::new(self.shapes[v.0].clone(), g.clone()).ok()
    }

    /// Like [`Gradients::get`] but returns zeros for untouched nodes.
    pub fn get_or_zeros(&self, v: Var) -> Tensor {
        self.get(v)
            .unwrap_or_else(|| Tensor::zeros(self.shapes[v.0].clone()))
    }
}

fn matrix_dims(t: &Tensor) -> (usize, usize) {
    (t.rows(), t.cols())
}

/// `c = a · b` with explicit strides, so transposed operands need no copy.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    c: &mut [f64],
    accumulate: bool,
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: the caller provides slices whose extents cover the strided views:
    // a spans m×k, b spans k×n and c spans m×n in row-major order.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            if accumulate { 1.0 } else { 0.0 },
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn row_weight(w: &Option<Vec<f64>>, j: usize) -> f64 {
    w.as_ref().map_or(1.0, |w| w[j])
}

/// Projects each row of a row-major `[rows × cols]` buffer onto the weighted ball.
pub(crate) fn project_rows(data: &mut [f64], cols: usize, radius: f64, w: &Option<Vec<f64>>) {
    for row in data.chunks_mut(cols) {
        let norm = row
            .iter()
            .enumerate()
            .map(|(j, v)| (row_weight(w, j) * v).powi(2))
            .sum::<f64>()
            .sqrt();
        if norm > radius {
            let s = radius / norm;
            row.iter_mut().for_each(|v| *v *= s);
        }
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Scalar value of a `[1]` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::Backward(format!("node {} not in this graph", v.0)))
        }
    }

    /// A differentiable leaf (a trainable parameter).
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A non-differentiable leaf (data, noise, frozen weights).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = matrix_dims(self.value(a));
        let (k2, n) = matrix_dims(self.value(b));
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul [{m}×{k}] · [{k2}×{n}]"
            )));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            k as isize,
            1,
            self.value(b).data(),
            n as isize,
            1,
            &mut out,
            false,
        );
        let value = Tensor::matrix(m, n, out)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a.0, b.0), rg))
    }

    /// Adds a bias vector of length `cols` to every row.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let cols = self.value(x).cols();
        if self.value(bias).len() != cols {
            return Err(Error::Shape(format!(
                "bias of length {} for {} columns",
                self.value(bias).len(),
                cols
            )));
        }
        let b = self.value(bias).data().to_vec();
        let mut value = self.value(x).clone();
        for row in value.data_mut().chunks_mut(cols) {
            row.iter_mut().zip(&b).for_each(|(v, bj)| *v += bj);
        }
        let rg = self.rg(x) || self.rg(bias);
        Ok(self.push(value, Op::AddBias(x.0, bias.0), rg))
    }

    fn binary(&mut self, a: Var, b: Var, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.same_shape(tb) {
            return Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary(a, b, "add", |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Add(a.0, b.0), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary(a, b, "sub", |x, y| x - y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Sub(a.0, b.0), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary(a, b, "mul", |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Mul(a.0, b.0), rg))
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let v = self.value(x).map(f);
        let rg = self.rg(x);
        self.push(v, op, rg)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, Op::Scale(x.0, c), |v| c * v)
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, Op::AddScalar(x.0), |v| v + c)
    }

    /// Multiplies each row elementwise by `w` (length = column count).
    pub fn mul_row(&mut self, x: Var, w: &[f64]) -> Result<Var> {
        let cols = self.value(x).cols();
        if w.len() != cols {
            return Err(Error::Shape(format!(
                "row factor of length {} for {} columns",
                w.len(),
                cols
            )));
        }
        let mut value = self.value(x).clone();
        for row in value.data_mut().chunks_mut(cols) {
            row.iter_mut().zip(w).for_each(|(v, wj)| *v *= wj);
        }
        let rg = self.rg(x);
        Ok(self.push(value, Op::MulRow(x.0, w.to_vec()), rg))
    }

    /// Elementwise `numerator / x` for a fixed numerator of the same shape.
    pub fn div_into(&mut self, numerator: &Tensor, x: Var) -> Result<Var> {
        if !numerator.same_shape(self.value(x)) {
            return Err(Error::Shape(format!(
                "div_into: {:?} vs {:?}",
                numerator.shape(),
                self.value(x).shape()
            )));
        }
        let data = numerator
            .data()
            .iter()
            .zip(self.value(x).data())
            .map(|(c, v)| c / v)
            .collect();
        let value = Tensor::new(numerator.shape().to_vec(), data)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::DivInto(x.0, numerator.data().to_vec()), rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, Op::Relu(x.0), |v| v.max(0.0))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x.0), f64::tanh)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sigmoid(x.0), sigmoid)
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(x, Op::Softplus(x.0), softplus)
    }

    /// `scale · tanh(x)`.
    pub fn scaled_tanh(&mut self, x: Var, scale: f64) -> Var {
        self.unary(x, Op::ScaledTanh(x.0, scale), |v| scale * v.tanh())
    }

    /// Natural log with the argument clamped below at `floor`.
    pub fn log_clamped(&mut self, x: Var, floor: f64) -> Var {
        self.unary(x, Op::Log(x.0, floor), |v| v.max(floor).ln())
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, Op::Square(x.0), |v| v * v)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).concat_cols(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::ConcatCols(a.0, b.0), rg))
    }

    /// Output row `i` is input row `perm[i]`.
    pub fn gather_rows(&mut self, x: Var, perm: &[usize]) -> Result<Var> {
        let rows = self.value(x).rows();
        if perm.iter().any(|&p| p >= rows) {
            return Err(Error::Shape("row index out of range".into()));
        }
        let v = self.value(x).gather_rows(perm)?;
        let rg = self.rg(x);
        Ok(self.push(v, Op::GatherRows(x.0, perm.to_vec()), rg))
    }

    /// Per-row squared norm `Σ_j (w_j x_j)²` as an `[rows × 1]` column.
    pub fn row_sq_norm(&mut self, x: Var, weights: Option<&[f64]>) -> Result<Var> {
        let t = self.value(x);
        let cols = t.cols();
        if let Some(w) = weights {
            if w.len() != cols {
                return Err(Error::Shape("norm weights length".into()));
            }
        }
        let w = weights.map(<[f64]>::to_vec);
        let data: Vec<f64> = t
            .data()
            .chunks(cols)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, v)| (row_weight(&w, j) * v).powi(2))
                    .sum()
            })
            .collect();
        let value = Tensor::column(data);
        let rg = self.rg(x);
        Ok(self.push(value, Op::RowSqNorm(x.0, w), rg))
    }

    /// Radial projection of every row onto `‖diag(w) x‖ ≤ radius`.
    pub fn project_ball(&mut self, x: Var, radius: f64, weights: Option<&[f64]>) -> Result<Var> {
        let cols = self.value(x).cols();
        if let Some(w) = weights {
            if w.len() != cols {
                return Err(Error::Shape("projection weights length".into()));
            }
        }
        let w = weights.map(<[f64]>::to_vec);
        let mut value = self.value(x).clone();
        project_rows(value.data_mut(), cols, radius, &w);
        let rg = self.rg(x);
        Ok(self.push(value, Op::ProjectBall(x.0, radius, w), rg))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = Tensor::scalar(self.value(x).mean());
        let rg = self.rg(x);
        self.push(v, Op::Mean(x.0), rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let v = Tensor::scalar(self.value(x).sum());
        let rg = self.rg(x);
        self.push(v, Op::Sum(x.0), rg)
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::Backward("no recorded forward computation".into()));
        }
        self.check(loss)?;
        if self.value(loss).len() != 1 {
            return Err(Error::Backward(format!(
                "loss must be scalar, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], target: usize, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[target].requires_grad {
            return;
        }
        let slot = grads[target].get_or_insert_with(|| vec![0.0; self.nodes[target].value.len()]);
        f(slot);
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = &self.nodes[i].value;
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                let (m, k) = matrix_dims(ta);
                let n = tb.cols();
                // dA = G · Bᵀ
                self.accumulate(grads, *a, |ga| {
                    gemm(m, n, k, g, n as isize, 1, tb.data(), 1, n as isize, ga, true)
                });
                // dB = Aᵀ · G
                self.accumulate(grads, *b, |gb| {
                    gemm(k, m, n, ta.data(), 1, k as isize, g, n as isize, 1, gb, true)
                });
            }
            Op::AddBias(x, bias) => {
                self.accumulate(grads, *x, |gx| add_assign(gx, g));
                let cols = out.cols();
                self.accumulate(grads, *bias, |gb| {
                    for row in g.chunks(cols) {
                        add_assign(gb, row);
                    }
                });
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |ga| add_assign(ga, g));
                self.accumulate(grads, *b, |gb| add_assign(gb, g));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, |ga| add_assign(ga, g));
                self.accumulate(grads, *b, |gb| gb.iter_mut().zip(g).for_each(|(d, s)| *d -= s));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.nodes[*a].value.data(), self.nodes[*b].value.data());
                self.accumulate(grads, *a, |ga| {
                    for ((d, s), y) in ga.iter_mut().zip(g).zip(vb) {
                        *d += s * y;
                    }
                });
                self.accumulate(grads, *b, |gb| {
                    for ((d, s), x) in gb.iter_mut().zip(g).zip(va) {
                        *d += s * x;
                    }
                });
            }
            Op::Scale(x, c) => {
                self.accumulate(grads, *x, |gx| gx.iter_mut().zip(g).for_each(|(d, s)| *d += c * s));
            }
            Op::AddScalar(x) => self.accumulate(grads, *x, |gx| add_assign(gx, g)),
            Op::MulRow(x, w) => {
                let cols = w.len();
                self.accumulate(grads, *x, |gx| {
                    for (grow, srow) in gx.chunks_mut(cols).zip(g.chunks(cols)) {
                        for ((d, s), wj) in grow.iter_mut().zip(srow).zip(w) {
                            *d += s * wj;
                        }
                    }
                });
            }
            Op::DivInto(x, c) => {
                let xv = self.nodes[*x].value.data();
                self.accumulate(grads, *x, |gx| {
                    for (((d, s), cv), v) in gx.iter_mut().zip(g).zip(c).zip(xv) {
                        *d -= s * cv / (v * v);
                    }
                });
            }
            Op::Relu(x) => self.elementwise_from_output(grads, *x, g, out, |y| if y > 0.0 { 1.0 } else { 0.0 }),
            Op::Tanh(x) => self.elementwise_from_output(grads, *x, g, out, |y| 1.0 - y * y),
            Op::Sigmoid(x) => self.elementwise_from_output(grads, *x, g, out, |y| y * (1.0 - y)),
            Op::ScaledTanh(x, c) => {
                let c = *c;
                self.elementwise_from_output(grads, *x, g, out, |y| {
                    let t = y / c;
                    c * (1.0 - t * t)
                })
            }
            Op::Softplus(x) => self.elementwise_from_input(grads, *x, g, sigmoid),
            Op::Log(x, floor) => {
                let floor = *floor;
                self.elementwise_from_input(grads, *x, g, |v| if v > floor { 1.0 / v } else { 0.0 })
            }
            Op::Square(x) => self.elementwise_from_input(grads, *x, g, |v| 2.0 * v),
            Op::ConcatCols(a, b) => {
                let ca = self.nodes[*a].value.cols();
                let cb = self.nodes[*b].value.cols();
                self.accumulate(grads, *a, |ga| {
                    for (grow, srow) in ga.chunks_mut(ca).zip(g.chunks(ca + cb)) {
                        add_assign(grow, &srow[..ca]);
                    }
                });
                self.accumulate(grads, *b, |gb| {
                    for (grow, srow) in gb.chunks_mut(cb).zip(g.chunks(ca + cb)) {
                        add_assign(grow, &srow[ca..]);
                    }
                });
            }
            Op::GatherRows(x, perm) => {
                let cols = out.cols();
                self.accumulate(grads, *x, |gx| {
                    for (i, &p) in perm.iter().enumerate() {
                        add_assign(&mut gx[p * cols..(p + 1) * cols], &g[i * cols..(i + 1) * cols]);
                    }
                });
            }
            Op::RowSqNorm(x, w) => {
                let xv = &self.nodes[*x].value;
                let cols = xv.cols();
                self.accumulate(grads, *x, |gx| {
                    for ((grow, xrow), s) in gx.chunks_mut(cols).zip(xv.data().chunks(cols)).zip(g) {
                        for (j, (d, v)) in grow.iter_mut().zip(xrow).enumerate() {
                            let wj = row_weight(w, j);
                            *d += s * 2.0 * wj * wj * v;
                        }
                    }
                });
            }
            Op::ProjectBall(x, radius, w) => {
                let xv = &self.nodes[*x].value;
                let cols = xv.cols();
                self.accumulate(grads, *x, |gx| {
                    for ((grow, xrow), srow) in gx
                        .chunks_mut(cols)
                        .zip(xv.data().chunks(cols))
                        .zip(g.chunks(cols))
                    {
                        let n2: f64 = xrow
                            .iter()
                            .enumerate()
                            .map(|(j, v)| (row_weight(w, j) * v).powi(2))
                            .sum();
                        let norm = n2.sqrt();
                        if norm > *radius {
                            let s = radius / norm;
                            let dot: f64 = srow.iter().zip(xrow).map(|(a, b)| a * b).sum();
                            for (j, (d, (sg, v))) in grow.iter_mut().zip(srow.iter().zip(xrow)).enumerate() {
                                let wj = row_weight(w, j);
                                *d += s * (sg - wj * wj * v * dot / n2);
                            }
                        } else {
                            add_assign(grow, srow);
                        }
                    }
                });
            }
            Op::Mean(x) => {
                let n = self.nodes[*x].value.len() as f64;
                let s = g[0] / n;
                self.accumulate(grads, *x, |gx| gx.iter_mut().for_each(|d| *d += s));
            }
            Op::Sum(x) => {
                let s = g[0];
                self.accumulate(grads, *x, |gx| gx.iter_mut().for_each(|d| *d += s));
            }
        }
    }

    fn elementwise_from_output(
        &self,
        grads: &mut [Option<Vec<f64>>],
        x: usize,
        g: &[f64],
        out: &Tensor,
        deriv: impl Fn(f64) -> f64,
    ) {
        self.accumulate(grads, x, |gx| {
            for ((d, s), y) in gx.iter_mut().zip(g).zip(out.data()) {
                *d += s * deriv(*y);
            }
        });
    }

    fn elementwise_from_input(
        &self,
        grads: &mut [Option<Vec<f64>>],
        x: usize,
        g: &[f64],
        deriv: impl Fn(f64) -> f64,
    ) {
        let xv = self.nodes[x].value.data();
        self.accumulate(grads, x, |gx| {
            for ((d, s), v) in gx.iter_mut().zip(g).zip(xv) {
                *d += s * deriv(*v);
            }
        });
    }
}

fn add_assign(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}
