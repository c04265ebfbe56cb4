use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::params::{Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{dot, gemm_acc, gemm_nt_acc, gemm_tn_acc, Real, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    Gather(Var, Vec<usize>),
    Tanh(Var),
    Relu(Var),
    Sigmoid(Var),
    Softmax(Var),
    CrossEntropy {
        probs: Var,
        targets: Vec<usize>,
        weights: Vec<T>,
    },
    MaxPool(Var, Vec<usize>),
    Conv1d {
        input: Var,
        kernel: Var,
        taps: usize,
        dilation: usize,
    },
    Sum(Var),
    TracePowers {
        a: Var,
        /// `A⁰ .. A^{K-1}`
        powers: Vec<Vec<T>>,
    },
}

/// Names of the differentiable operations, as used by
/// [`Tape::inject_sign_flip`].
pub fn op_names() -> &'static [&'static str] {
    &[
        "matmul", "matmul_nt", "add", "add_row", "mul", "scale", "concat_cols", "concat_rows", "slice_cols",
        "slice_rows", "gather_rows", "tanh", "relu", "sigmoid", "softmax_rows", "cross_entropy_rows",
        "global_max_pool", "dilated_conv1d", "sum", "trace_powers",
    ]
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::MatMulNT(..) => "matmul_nt",
            Op::Add(..) => "add",
            Op::AddRow(..) => "add_row",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::ConcatCols(_) => "concat_cols",
            Op::ConcatRows(_) => "concat_rows",
            Op::SliceCols(..) => "slice_cols",
            Op::SliceRows(..) => "slice_rows",
            Op::Gather(..) => "gather_rows",
            Op::Tanh(_) => "tanh",
            Op::Relu(_) => "relu",
            Op::Sigmoid(_) => "sigmoid",
            Op::Softmax(_) => "softmax_rows",
            Op::CrossEntropy { .. } => "cross_entropy_rows",
            Op::MaxPool(..) => "global_max_pool",
            Op::Conv1d { .. } => "dilated_conv1d",
            Op::Sum(_) => "sum",
            Op::TracePowers { .. } => "trace_powers",
        }
    }
}

#[derive(Debug, Clone)]
struct Node<T> {
    rows: usize,
    cols: usize,
    /// Empty for parameter leaves, which read the store directly.
    value: Vec<T>,
    op: Op<T>,
}

/// Records a forward computation for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order and backward is a single reverse sweep.
pub struct Tape<'p, T: Real> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
    param_vars: Vec<Option<Var>>,
    train: bool,
    rng: Rng,
    fault: Option<&'static str>,
}

/// Probability floor used inside the log of the cross-entropy.
pub fn probability_floor<T: Real>() -> T {
    T::from_f64(1e-12)
}

fn shape_err(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::shape(op, alloc::format!("{}x{} vs {}x{}", a.0, a.1, b.0, b.1))
}

impl<'p, T: Real> Tape<'p, T> {
    pub fn new(params: &'p ParamStore<T>, train: bool, rng: Rng) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            grads: Vec::new(),
            param_vars: vec![None; params.len()],
            train,
            rng,
            fault: None,
        }
    }

    /// Negates the gradient passed back through every node of the named
    /// operation (see [`op_names`]). Debugging aid for the gradient checker.
    pub fn inject_sign_flip(&mut self, op: &'static str) {
        self.fault = Some(op);
    }

    pub fn is_train(&self) -> bool {
        self.train
    }

    pub fn rng(&mut self) -> &mut Rng {
        &mut self.rng
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<T>, op: Op<T>) -> Var {
        debug_assert!(matches!(op, Op::Param(_)) || value.len() == rows * cols);
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[T] {
        let n = &self.nodes[v.0];
        match n.op {
            Op::Param(p) => self.params.get(ParamId(p)).data(),
            _ => &n.value,
        }
    }

    /// Scalar value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> T {
        self.value(v)[0]
    }

    pub fn to_tensor(&self, v: Var) -> Tensor<T> {
        let (r, c) = self.shape(v);
        Tensor::matrix(r, c, self.value(v).to_vec())
    }

    /// Constant input; receives a gradient but never feeds parameters.
    pub fn constant(&mut self, rows: usize, cols: usize, data: Vec<T>) -> Var {
        assert_eq!(rows * cols, data.len(), "constant shape");
        self.push(rows, cols, data, Op::Leaf)
    }

    pub fn constant_tensor(&mut self, t: &Tensor<T>) -> Var {
        self.constant(t.rows(), t.cols(), t.data().to_vec())
    }

    /// Parameter leaf; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let t = self.params.get(id);
        let v = self.push(t.rows(), t.cols(), Vec::new(), Op::Param(id.0));
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        if k != k2 {
            return Err(shape_err("matmul", (m, k), (k2, n)));
        }
        let mut out = vec![T::zero(); m * n];
        gemm_acc(self.value(a), self.value(b), &mut out, m, k, n);
        Ok(self.push(m, n, out, Op::MatMul(a, b)))
    }

    /// `a · bᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (n, k2) = self.shape(b);
        if k != k2 {
            return Err(shape_err("matmul_nt", (m, k), (n, k2)));
        }
        let mut out = vec![T::zero(); m * n];
        gemm_nt_acc(self.value(a), self.value(b), &mut out, m, k, n);
        Ok(self.push(m, n, out, Op::MatMulNT(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err("add", self.shape(a), self.shape(b)));
        }
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| x + y)
            .collect();
        let (r, c) = self.shape(a);
        Ok(self.push(r, c, out, Op::Add(a, b)))
    }

    /// Adds the 1×c row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.shape(a);
        if self.shape(b) != (1, c) {
            return Err(shape_err("add_row", (r, c), self.shape(b)));
        }
        let bv = self.value(b);
        let out = self
            .value(a)
            .chunks(c)
            .flat_map(|row| row.iter().zip(bv).map(|(&x, &y)| x + y))
            .collect();
        Ok(self.push(r, c, out, Op::AddRow(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err("mul", self.shape(a), self.shape(b)));
        }
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| x * y)
            .collect();
        let (r, c) = self.shape(a);
        Ok(self.push(r, c, out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let out = self.value(a).iter().map(|&x| x * s).collect();
        let (r, c) = self.shape(a);
        self.push(r, c, out, Op::Scale(a, s))
    }

    /// Concatenation along axis 1 (columns); all parts need equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map(|&p| self.shape(p).0).unwrap_or(0);
        if parts.iter().any(|&p| self.shape(p).0 != rows) {
            return Err(Error::shape("concat_cols", "row counts differ"));
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let c = self.shape(p).1;
                out.extend_from_slice(&self.value(p)[r * c..(r + 1) * c]);
            }
        }
        Ok(self.push(rows, cols, out, Op::ConcatCols(parts.to_vec())))
    }

    /// Concatenation along axis 0 (rows); all parts need equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts.first().map(|&p| self.shape(p).1).unwrap_or(0);
        if parts.iter().any(|&p| self.shape(p).1 != cols) {
            return Err(Error::shape("concat_rows", "column counts differ"));
        }
        let rows: usize = parts.iter().map(|&p| self.shape(p).0).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for &p in parts {
            out.extend_from_slice(self.value(p));
        }
        Ok(self.push(rows, cols, out, Op::ConcatRows(parts.to_vec())))
    }

    /// Concatenation along the given axis (0 = rows, 1 = columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        match axis {
            0 => self.concat_rows(parts),
            1 => self.concat_cols(parts),
            _ => Err(Error::shape("concat", "axis must be 0 or 1")),
        }
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if start + len > c {
            return Err(Error::shape("slice_cols", alloc::format!("{}..{} of {}", start, start + len, c)));
        }
        let v = self.value(a);
        let mut out = Vec::with_capacity(r * len);
        for i in 0..r {
            out.extend_from_slice(&v[i * c + start..i * c + start + len]);
        }
        Ok(self.push(r, len, out, Op::SliceCols(a, start)))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if start + len > r {
            return Err(Error::shape("slice_rows", alloc::format!("{}..{} of {}", start, start + len, r)));
        }
        let out = self.value(a)[start * c..(start + len) * c].to_vec();
        Ok(self.push(len, c, out, Op::SliceRows(a, start)))
    }

    pub fn row(&mut self, a: Var, i: usize) -> Result<Var> {
        self.slice_rows(a, i, 1)
    }

    /// Selects rows by index (embedding lookup, broadcasting a row).
    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let (r, c) = self.shape(table);
        if let Some(&bad) = indices.iter().find(|&&i| i >= r) {
            return Err(Error::shape("gather_rows", alloc::format!("row {} of {}", bad, r)));
        }
        let v = self.value(table);
        let mut out = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            out.extend_from_slice(&v[i * c..(i + 1) * c]);
        }
        Ok(self.push(indices.len(), c, out, Op::Gather(table, indices.to_vec())))
    }

    fn unary(&mut self, a: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let out = self.value(a).iter().map(|&x| f(x)).collect();
        let (r, c) = self.shape(a);
        self.push(r, c, out, op)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, T::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| if x > T::zero() { x } else { T::zero() }, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, |x| T::one() / (T::one() + (-x).exp()), Op::Sigmoid(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let mut out = self.value(a).to_vec();
        for row in out.chunks_mut(c) {
            let m = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut s = T::zero();
            for x in row.iter_mut() {
                *x = (*x - m).exp();
                s = s + *x;
            }
            for x in row.iter_mut() {
                *x = *x / s;
            }
        }
        self.push(r, c, out, Op::Softmax(a))
    }

    /// `Σᵢ wᵢ · −ln p[i, tᵢ]` over rows of a probability matrix.
    pub fn cross_entropy_rows(&mut self, probs: Var, targets: &[usize], weights: &[T]) -> Result<Var> {
        let (r, c) = self.shape(probs);
        if targets.len() != r || weights.len() != r {
            return Err(Error::shape(
                "cross_entropy_rows",
                alloc::format!("{} rows, {} targets, {} weights", r, targets.len(), weights.len()),
            ));
        }
        if targets.iter().any(|&t| t >= c) {
            return Err(Error::shape("cross_entropy_rows", "target index out of range"));
        }
        let p = self.value(probs);
        let floor = probability_floor::<T>();
        let mut loss = T::zero();
        for i in 0..r {
            if weights[i] != T::zero() {
                loss = loss - weights[i] * p[i * c + targets[i]].max(floor).ln();
            }
        }
        Ok(self.push(
            1,
            1,
            vec![loss],
            Op::CrossEntropy {
                probs,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
            },
        ))
    }

    /// Column-wise maximum over rows (time steps): L×C → 1×C.
    pub fn global_max_pool(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.shape(a);
        if r == 0 {
            return Err(Error::shape("global_max_pool", "empty sequence"));
        }
        let v = self.value(a);
        let mut out = v[..c].to_vec();
        let mut arg = vec![0usize; c];
        for i in 1..r {
            for j in 0..c {
                if v[i * c + j] > out[j] {
                    out[j] = v[i * c + j];
                    arg[j] = i;
                }
            }
        }
        Ok(self.push(1, c, out, Op::MaxPool(a, arg)))
    }

    /// Same-length dilated 1-D convolution with zero padding.
    ///
    /// `input` is L×C_in, `kernel` is (taps·C_in)×C_out (a `[taps, C_in, C_out]`
    /// tensor). Output row t sums `input[t + (j − c)·dilation] · W_j` over taps
    /// j, where c is the centre tap.
    pub fn dilated_conv1d(&mut self, input: Var, kernel: Var, taps: usize, dilation: usize) -> Result<Var> {
        let (l, cin) = self.shape(input);
        let (kr, cout) = self.shape(kernel);
        if taps == 0 || kr != taps * cin || dilation == 0 {
            return Err(shape_err("dilated_conv1d", (l, cin), (kr, cout)));
        }
        let mut out = vec![T::zero(); l * cout];
        let x = self.value(input);
        let w = self.value(kernel);
        for j in 0..taps {
            let (t0, t1, off) = conv_range(l, taps, j, dilation);
            if t0 >= t1 {
                continue;
            }
            let xs = &x[(t0 as isize + off) as usize * cin..(t1 as isize + off) as usize * cin];
            gemm_acc(xs, &w[j * cin * cout..(j + 1) * cin * cout], &mut out[t0 * cout..t1 * cout], t1 - t0, cin, cout);
        }
        Ok(self.push(
            l,
            cout,
            out,
            Op::Conv1d {
                input,
                kernel,
                taps,
                dilation,
            },
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().copied().sum();
        self.push(1, 1, vec![s], Op::Sum(a))
    }

    /// `Σ_{k=1..K} tr(Aᵏ)`
    pub fn trace_powers(&mut self, a: Var, k: usize) -> Result<Var> {
        let (n, m) = self.shape(a);
        if n != m {
            return Err(shape_err("trace_powers", (n, m), (m, n)));
        }
        if k == 0 {
            return Err(Error::shape("trace_powers", "K must be at least 1"));
        }
        let av = self.value(a).to_vec();
        let mut eye = vec![T::zero(); n * n];
        for i in 0..n {
            eye[i * n + i] = T::one();
        }
        let mut powers = vec![eye];
        let mut total = T::zero();
        let mut cur = av.clone();
        for step in 1..=k {
            total = total + (0..n).map(|i| cur[i * n + i]).sum::<T>();
            if step < k {
                powers.push(cur.clone());
                let mut next = vec![T::zero(); n * n];
                gemm_acc(&cur, &av, &mut next, n, n, n);
                cur = next;
            }
        }
        Ok(self.push(1, 1, vec![total], Op::TracePowers { a, powers }))
    }

    /// Inverted dropout: zeroes with probability `rate`, scales survivors by
    /// 1/(1−rate). Identity outside training.
    pub fn dropout(&mut self, a: Var, rate: f64) -> Result<Var> {
        if !self.train || rate <= 0.0 {
            return Ok(a);
        }
        let (r, c) = self.shape(a);
        let keep = T::from_f64(1.0 / (1.0 - rate));
        let mask = (0..r * c)
            .map(|_| if self.rng.random::<f64>() < rate { T::zero() } else { keep })
            .collect();
        let m = self.constant(r, c, mask);
        self.mul(a, m)
    }

    /// Dropout mask shared by all rows (a fixed per-sequence mask).
    pub fn row_dropout_mask(&mut self, cols: usize, rate: f64) -> Option<Vec<T>> {
        if !self.train || rate <= 0.0 {
            return None;
        }
        let keep = T::from_f64(1.0 / (1.0 - rate));
        Some(
            (0..cols)
                .map(|_| if self.rng.random::<f64>() < rate { T::zero() } else { keep })
                .collect(),
        )
    }

    /// Multiplies by Normal(1, rate/(1−rate)) noise. Identity outside training.
    pub fn gaussian_dropout(&mut self, a: Var, rate: f64) -> Result<Var> {
        if !self.train || rate <= 0.0 {
            return Ok(a);
        }
        let (r, c) = self.shape(a);
        let std = Float::sqrt(rate / (1.0 - rate));
        let mask = (0..r * c)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                T::from_f64(1.0 + std * z)
            })
            .collect();
        let m = self.constant(r, c, mask);
        self.mul(a, m)
    }

    /// Adds Normal(0, std²) noise. Identity outside training.
    pub fn gaussian_noise(&mut self, a: Var, std: f64) -> Result<Var> {
        if !self.train || std <= 0.0 {
            return Ok(a);
        }
        let (r, c) = self.shape(a);
        let noise = (0..r * c)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                T::from_f64(std * z)
            })
            .collect();
        let m = self.constant(r, c, noise);
        self.add(a, m)
    }

    /// Gradient of the last backward pass with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Propagates gradients from a scalar node to every node it depends on.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.shape(loss) != (1, 1) {
            let (r, c) = self.shape(loss);
            return Err(Error::shape("backward", alloc::format!("loss must be scalar, got {}x{}", r, c)));
        }
        self.grads = vec![None; self.nodes.len()];
        self.grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let Some(g) = self.grads[i].take() else { continue };
            self.backprop_node(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn acc(&mut self, v: Var) -> &mut Vec<T> {
        let len = {
            let n = &self.nodes[v.0];
            n.rows * n.cols
        };
        self.grads[v.0].get_or_insert_with(|| vec![T::zero(); len])
    }

    /// Ops are pure functions of their inputs, so a node's own gradient is
    /// final once every later node has been visited.
    fn backprop_node(&mut self, i: usize, g: &[T]) {
        let op = core::mem::replace(&mut self.nodes[i].op, Op::Leaf);
        let flipped: Vec<T>;
        let g = if self.fault == Some(op.name()) {
            flipped = g.iter().map(|&x| -x).collect();
            &flipped[..]
        } else {
            g
        };
        let (rows, cols) = (self.nodes[i].rows, self.nodes[i].cols);
        match &op {
            Op::Leaf | Op::Param(_) => {}
            &Op::MatMul(a, b) => {
                let (m, k) = self.shape(a);
                let n = cols;
                let mut ga = vec![T::zero(); m * k];
                gemm_nt_acc(g, self.value(b), &mut ga, m, n, k);
                let mut gb = vec![T::zero(); k * n];
                gemm_tn_acc(self.value(a), g, &mut gb, k, m, n);
                add_into(self.acc(a), &ga);
                add_into(self.acc(b), &gb);
            }
            &Op::MatMulNT(a, b) => {
                // C = A·Bᵀ: dA = dC·B, dB = dCᵀ·A
                let (m, k) = self.shape(a);
                let n = cols;
                let mut ga = vec![T::zero(); m * k];
                gemm_acc(g, self.value(b), &mut ga, m, n, k);
                let mut gb = vec![T::zero(); n * k];
                gemm_tn_acc(g, self.value(a), &mut gb, n, m, k);
                add_into(self.acc(a), &ga);
                add_into(self.acc(b), &gb);
            }
            &Op::Add(a, b) => {
                add_into(self.acc(a), g);
                add_into(self.acc(b), g);
            }
            &Op::AddRow(a, b) => {
                add_into(self.acc(a), g);
                let gb = self.acc(b);
                for row in g.chunks(cols) {
                    add_into(gb, row);
                }
            }
            &Op::Mul(a, b) => {
                let ga: Vec<T> = g.iter().zip(self.value(b)).map(|(&x, &y)| x * y).collect();
                let gb: Vec<T> = g.iter().zip(self.value(a)).map(|(&x, &y)| x * y).collect();
                add_into(self.acc(a), &ga);
                add_into(self.acc(b), &gb);
            }
            &Op::Scale(a, s) => {
                let ga = self.acc(a);
                for (x, &y) in ga.iter_mut().zip(g) {
                    *x = *x + s * y;
                }
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let c = self.shape(p).1;
                    let gp = self.acc(p);
                    for r in 0..rows {
                        add_into(&mut gp[r * c..(r + 1) * c], &g[r * cols + off..r * cols + off + c]);
                    }
                    off += c;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let len = self.shape(p).0 * cols;
                    add_into(self.acc(p), &g[off..off + len]);
                    off += len;
                }
            }
            &Op::SliceCols(a, start) => {
                let c = self.shape(a).1;
                let ga = self.acc(a);
                for r in 0..rows {
                    add_into(&mut ga[r * c + start..r * c + start + cols], &g[r * cols..(r + 1) * cols]);
                }
            }
            &Op::SliceRows(a, start) => {
                let ga = self.acc(a);
                add_into(&mut ga[start * cols..(start + rows) * cols], g);
            }
            Op::Gather(t, idx) => {
                let ga = self.acc(*t);
                for (r, &i) in idx.iter().enumerate() {
                    add_into(&mut ga[i * cols..(i + 1) * cols], &g[r * cols..(r + 1) * cols]);
                }
            }
            &Op::Tanh(a) => {
                let d: Vec<T> = g
                    .iter()
                    .zip(&self.nodes[i].value)
                    .map(|(&gy, &y)| gy * (T::one() - y * y))
                    .collect();
                add_into(self.acc(a), &d);
            }
            &Op::Relu(a) => {
                let d: Vec<T> = g
                    .iter()
                    .zip(&self.nodes[i].value)
                    .map(|(&gy, &y)| if y > T::zero() { gy } else { T::zero() })
                    .collect();
                add_into(self.acc(a), &d);
            }
            &Op::Sigmoid(a) => {
                let d: Vec<T> = g
                    .iter()
                    .zip(&self.nodes[i].value)
                    .map(|(&gy, &y)| gy * y * (T::one() - y))
                    .collect();
                add_into(self.acc(a), &d);
            }
            &Op::Softmax(a) => {
                let y = &self.nodes[i].value;
                let mut d = vec![T::zero(); rows * cols];
                for r in 0..rows {
                    let yr = &y[r * cols..(r + 1) * cols];
                    let gr = &g[r * cols..(r + 1) * cols];
                    let s = dot(yr, gr);
                    for j in 0..cols {
                        d[r * cols + j] = yr[j] * (gr[j] - s);
                    }
                }
                add_into(self.acc(a), &d);
            }
            Op::CrossEntropy {
                probs,
                targets,
                weights,
            } => {
                let probs = *probs;
                let c = self.shape(probs).1;
                let floor = probability_floor::<T>();
                let p: Vec<T> = targets
                    .iter()
                    .enumerate()
                    .map(|(r, &t)| self.value(probs)[r * c + t])
                    .collect();
                let gp = self.acc(probs);
                for (r, &t) in targets.iter().enumerate() {
                    if weights[r] != T::zero() {
                        gp[r * c + t] = gp[r * c + t] - g[0] * weights[r] / p[r].max(floor);
                    }
                }
            }
            Op::MaxPool(a, arg) => {
                let c = cols;
                let ga = self.acc(*a);
                for (j, &r) in arg.iter().enumerate() {
                    ga[r * c + j] = ga[r * c + j] + g[j];
                }
            }
            &Op::Conv1d {
                input,
                kernel,
                taps,
                dilation,
            } => {
                let (l, cin) = self.shape(input);
                let cout = cols;
                let mut gx = vec![T::zero(); l * cin];
                let mut gw = vec![T::zero(); taps * cin * cout];
                {
                    let x = self.value(input);
                    let w = self.value(kernel);
                    for j in 0..taps {
                        let (t0, t1, off) = conv_range(l, taps, j, dilation);
                        if t0 >= t1 {
                            continue;
                        }
                        let xs0 = (t0 as isize + off) as usize;
                        let xs1 = (t1 as isize + off) as usize;
                        let gs = &g[t0 * cout..t1 * cout];
                        let wj = &w[j * cin * cout..(j + 1) * cin * cout];
                        gemm_nt_acc(gs, wj, &mut gx[xs0 * cin..xs1 * cin], t1 - t0, cout, cin);
                        gemm_tn_acc(&x[xs0 * cin..xs1 * cin], gs, &mut gw[j * cin * cout..(j + 1) * cin * cout], cin, t1 - t0, cout);
                    }
                }
                add_into(self.acc(input), &gx);
                add_into(self.acc(kernel), &gw);
            }
            &Op::Sum(a) => {
                let ga = self.acc(a);
                for x in ga.iter_mut() {
                    *x = *x + g[0];
                }
            }
            Op::TracePowers { a, powers } => {
                // d tr(Aᵏ)/dA = k·(Aᵏ⁻¹)ᵀ
                let a = *a;
                let n = self.shape(a).0;
                let mut d = vec![T::zero(); n * n];
                for (km1, p) in powers.iter().enumerate() {
                    let k = T::from_f64((km1 + 1) as f64) * g[0];
                    for r in 0..n {
                        for c in 0..n {
                            d[r * n + c] = d[r * n + c] + k * p[c * n + r];
                        }
                    }
                }
                add_into(self.acc(a), &d);
            }
        }
        self.nodes[i].op = op;
    }

    /// Adds `scale ·` the gradient of every parameter leaf into `out`.
    pub fn accumulate_param_grads(&self, out: &mut Gradients<T>, scale: T) {
        for (p, v) in self.param_vars.iter().enumerate() {
            if let Some(v) = v {
                if let Some(g) = self.grads.get(v.0).and_then(|g| g.as_ref()) {
                    for (o, &x) in out.get_mut(ParamId(p)).iter_mut().zip(g) {
                        *o = *o + scale * x;
                    }
                }
            }
        }
    }
}

/// Output rows `[t0, t1)` that read a valid input row for tap `j`, and the
/// input offset.
fn conv_range(l: usize, taps: usize, j: usize, dilation: usize) -> (usize, usize, isize) {
    let centre = (taps - 1) / 2;
    let off = (j as isize - centre as isize) * dilation as isize;
    let t0 = if off < 0 { (-off) as usize } else { 0 };
    let t1 = if off > 0 { l.saturating_sub(off as usize) } else { l };
    (t0.min(l), t1, off)
}

#[inline]
fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}
