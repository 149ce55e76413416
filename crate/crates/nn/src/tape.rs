//! Reverse-mode differentiation over row-major 2-D `f64` tensors.
//!
//! A [`Tape`] records every operation in creation order, so node indices
//! are already a topological order and `backward` is a single reverse sweep.

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(NnError::shape(
                "tensor",
                format!("{rows}x{cols} needs {} values, got {}", rows * cols, data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self::filled(1, 1, v)
    }

    pub fn row_vector(v: Vec<f64>) -> Self {
        Self {
            rows: 1,
            cols: v.len(),
            data: v,
        }
    }

    pub fn column_vector(v: Vec<f64>) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    /// `a[r, c] + b[1, c]` broadcast over rows.
    AddRow(usize, usize),
    Mul(usize, usize),
    MatMul(usize, usize),
    /// Causal dilated convolution; `w` is `[taps·cin, cout]`, tap `m`
    /// reads `x[t − m·dilation]`.
    Conv1d {
        x: usize,
        w: usize,
        b: usize,
        dilation: usize,
        taps: usize,
    },
    Relu(usize),
    SoftmaxRows(usize),
    Affine { a: usize, scale: f64 },
    Reshape(usize),
    ConcatCols(Vec<usize>),
    SliceCols { a: usize, start: usize },
    RowSum(usize),
    SumAll(usize),
    /// Mean pinball loss against constant targets.
    QuantileLoss { pred: usize, target: Vec<f64>, p: f64 },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Option<Vec<Vec<f64>>>,
}

fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.grads = None;
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    fn check(&self, v: Var) -> Result<&Tensor> {
        self.nodes
            .get(v.0)
            .map(|n| &n.value)
            .ok_or_else(|| NnError::State(format!("variable {} is not on this tape", v.0)))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.check(a)?, self.check(b)?);
        if x.shape() != y.shape() {
            return Err(NnError::shape("add", format!("{:?} vs {:?}", x.shape(), y.shape())));
        }
        let data = x.data.iter().zip(&y.data).map(|(p, q)| p + q).collect();
        let t = Tensor::new(x.rows, x.cols, data)?;
        Ok(self.push(Op::Add(a.0, b.0), t))
    }

    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.check(a)?, self.check(b)?);
        if y.rows != 1 || y.cols != x.cols {
            return Err(NnError::shape("add_row", format!("{:?} + {:?}", x.shape(), y.shape())));
        }
        let mut t = x.clone();
        for r in 0..t.rows {
            for (v, bv) in t.data[r * t.cols..(r + 1) * t.cols].iter_mut().zip(&y.data) {
                *v += bv;
            }
        }
        Ok(self.push(Op::AddRow(a.0, b.0), t))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.check(a)?, self.check(b)?);
        if x.shape() != y.shape() {
            return Err(NnError::shape("mul", format!("{:?} vs {:?}", x.shape(), y.shape())));
        }
        let data = x.data.iter().zip(&y.data).map(|(p, q)| p * q).collect();
        let t = Tensor::new(x.rows, x.cols, data)?;
        Ok(self.push(Op::Mul(a.0, b.0), t))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.check(a)?, self.check(b)?);
        if x.cols != y.rows {
            return Err(NnError::shape("matmul", format!("{:?} x {:?}", x.shape(), y.shape())));
        }
        let mut t = Tensor::zeros(x.rows, y.cols);
        matmul_into(&x.data, &y.data, &mut t.data, x.rows, x.cols, y.cols);
        Ok(self.push(Op::MatMul(a.0, b.0), t))
    }

    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, dilation: usize, taps: usize) -> Result<Var> {
        let (xv, wv, bv) = (self.check(x)?, self.check(w)?, self.check(b)?);
        let (len, cin) = xv.shape();
        let cout = wv.cols;
        if dilation == 0 || taps == 0 || wv.rows != taps * cin || bv.shape() != (1, cout) {
            return Err(NnError::shape(
                "conv1d",
                format!("x {:?}, w {:?}, b {:?}, taps {taps}", xv.shape(), wv.shape(), bv.shape()),
            ));
        }
        let mut t = Tensor::zeros(len, cout);
        for s in 0..len {
            let out = &mut t.data[s * cout..(s + 1) * cout];
            out.copy_from_slice(&bv.data);
            for m in 0..taps {
                let Some(src) = s.checked_sub(m * dilation) else { break };
                let xrow = &xv.data[src * cin..(src + 1) * cin];
                let wblk = &wv.data[m * cin * cout..(m + 1) * cin * cout];
                matmul_into(xrow, wblk, out, 1, cin, cout);
            }
        }
        Ok(self.push(
            Op::Conv1d {
                x: x.0,
                w: w.0,
                b: b.0,
                dilation,
                taps,
            },
            t,
        ))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let x = self.check(a)?;
        // NaN passes through so divergence is not hidden
        let data = x.data.iter().map(|&v| if v < 0.0 { 0.0 } else { v }).collect();
        let t = Tensor::new(x.rows, x.cols, data)?;
        Ok(self.push(Op::Relu(a.0), t))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.check(a)?;
        let mut t = x.clone();
        for r in 0..t.rows {
            softmax_in_place(&mut t.data[r * t.cols..(r + 1) * t.cols]);
        }
        Ok(self.push(Op::SoftmaxRows(a.0), t))
    }

    /// `scale·a + shift` with constant coefficients.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Result<Var> {
        let x = self.check(a)?;
        let data = x.data.iter().map(|v| scale * v + shift).collect();
        let t = Tensor::new(x.rows, x.cols, data)?;
        Ok(self.push(Op::Affine { a: a.0, scale }, t))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let x = self.check(a)?;
        let t = Tensor::new(rows, cols, x.data.clone())?;
        Ok(self.push(Op::Reshape(a.0), t))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(NnError::shape("concat_cols", "no inputs"));
        }
        let rows = self.check(parts[0])?.rows;
        let mut cols = 0;
        for p in parts {
            let t = self.check(*p)?;
            if t.rows != rows {
                return Err(NnError::shape("concat_cols", format!("rows {} vs {rows}", t.rows)));
            }
            cols += t.cols;
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(self.value(*p).row(r));
            }
        }
        let t = Tensor::new(rows, cols, data)?;
        Ok(self.push(Op::ConcatCols(parts.iter().map(|p| p.0).collect()), t))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let x = self.check(a)?;
        if start >= end || end > x.cols {
            return Err(NnError::shape("slice_cols", format!("{start}..{end} of {}", x.cols)));
        }
        let mut data = Vec::with_capacity(x.rows * (end - start));
        for r in 0..x.rows {
            data.extend_from_slice(&x.row(r)[start..end]);
        }
        let t = Tensor::new(x.rows, end - start, data)?;
        Ok(self.push(Op::SliceCols { a: a.0, start }, t))
    }

    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let x = self.check(a)?;
        let data = (0..x.rows).map(|r| x.row(r).iter().sum()).collect();
        let t = Tensor::column_vector(data);
        Ok(self.push(Op::RowSum(a.0), t))
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let s = self.check(a)?.data.iter().sum();
        Ok(self.push(Op::SumAll(a.0), Tensor::scalar(s)))
    }

    /// Mean pinball loss of `pred` (any shape, read row-major) against
    /// `target`.
    pub fn quantile_loss(&mut self, pred: Var, target: &[f64], p: f64) -> Result<Var> {
        if !(p > 0.0 && p < 1.0) {
            return Err(NnError::config(format!("quantile {p} outside (0, 1)")));
        }
        let x = self.check(pred)?;
        if x.len() != target.len() || target.is_empty() {
            return Err(NnError::shape("quantile_loss", format!("{} predictions, {} targets", x.len(), target.len())));
        }
        let total: f64 = x
            .data
            .iter()
            .zip(target)
            .map(|(yh, y)| {
                let d = y - yh;
                if d >= 0.0 {
                    p * d
                } else {
                    (p - 1.0) * d
                }
            })
            .sum();
        let t = Tensor::scalar(total / target.len() as f64);
        Ok(self.push(
            Op::QuantileLoss {
                pred: pred.0,
                target: target.to_vec(),
                p,
            },
            t,
        ))
    }

    /// Propagates adjoints from the scalar `loss` to every node.
    ///
    /// At `y = ŷ` the quantile loss uses the left derivative in `ŷ`, `−p`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lv = self.check(loss)?;
        if lv.shape() != (1, 1) {
            return Err(NnError::State(format!("backward needs a scalar, got {:?}", lv.shape())));
        }
        let mut g: Vec<Vec<f64>> = self.nodes.iter().map(|n| vec![0.0; n.value.len()]).collect();
        g[loss.0][0] = 1.0;
        for i in (0..=loss.0).rev() {
            if g[i].iter().all(|v| *v == 0.0) {
                continue;
            }
            let gi = std::mem::take(&mut g[i]);
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    axpy(&mut g[*a], &gi, 1.0);
                    axpy(&mut g[*b], &gi, 1.0);
                }
                Op::AddRow(a, b) => {
                    axpy(&mut g[*a], &gi, 1.0);
                    let c = node.value.cols;
                    for r in 0..node.value.rows {
                        axpy(&mut g[*b], &gi[r * c..(r + 1) * c], 1.0);
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[*a].value.data, &self.nodes[*b].value.data);
                    for k in 0..gi.len() {
                        g[*a][k] += gi[k] * bv[k];
                        g[*b][k] += gi[k] * av[k];
                    }
                }
                Op::MatMul(a, b) => {
                    let (x, y) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let (m, k, n) = (x.rows, x.cols, y.cols);
                    // dA = G·Bᵀ
                    for r in 0..m {
                        let grow = &gi[r * n..(r + 1) * n];
                        for p in 0..k {
                            let brow = &y.data[p * n..(p + 1) * n];
                            g[*a][r * k + p] += dot(grow, brow);
                        }
                    }
                    // dB = Aᵀ·G
                    for r in 0..m {
                        let grow = &gi[r * n..(r + 1) * n];
                        for p in 0..k {
                            let av = x.data[r * k + p];
                            if av != 0.0 {
                                axpy(&mut g[*b][p * n..(p + 1) * n], grow, av);
                            }
                        }
                    }
                }
                Op::Conv1d {
                    x,
                    w,
                    b,
                    dilation,
                    taps,
                } => {
                    let (xv, wv) = (&self.nodes[*x].value, &self.nodes[*w].value);
                    let (len, cin) = xv.shape();
                    let cout = wv.cols;
                    for s in 0..len {
                        let grow = &gi[s * cout..(s + 1) * cout];
                        axpy(&mut g[*b], grow, 1.0);
                        for m in 0..*taps {
                            let Some(src) = s.checked_sub(m * dilation) else { break };
                            for c in 0..cin {
                                let wi = (m * cin + c) * cout;
                                g[*x][src * cin + c] += dot(grow, &wv.data[wi..wi + cout]);
                                let xval = xv.data[src * cin + c];
                                if xval != 0.0 {
                                    axpy(&mut g[*w][wi..wi + cout], grow, xval);
                                }
                            }
                        }
                    }
                }
                Op::Relu(a) => {
                    let av = &self.nodes[*a].value.data;
                    for k in 0..gi.len() {
                        if av[k] > 0.0 {
                            g[*a][k] += gi[k];
                        }
                    }
                }
                Op::SoftmaxRows(a) => {
                    let s = &node.value;
                    for r in 0..s.rows {
                        let sr = s.row(r);
                        let gr = &gi[r * s.cols..(r + 1) * s.cols];
                        let inner = dot(sr, gr);
                        for c in 0..s.cols {
                            g[*a][r * s.cols + c] += sr[c] * (gr[c] - inner);
                        }
                    }
                }
                Op::Affine { a, scale } => axpy(&mut g[*a], &gi, *scale),
                Op::Reshape(a) => axpy(&mut g[*a], &gi, 1.0),
                Op::ConcatCols(parts) => {
                    let rows = node.value.rows;
                    let total = node.value.cols;
                    let mut off = 0;
                    for &p in parts {
                        let c = self.nodes[p].value.cols;
                        for r in 0..rows {
                            axpy(&mut g[p][r * c..(r + 1) * c], &gi[r * total + off..r * total + off + c], 1.0);
                        }
                        off += c;
                    }
                }
                Op::SliceCols { a, start } => {
                    let src_cols = self.nodes[*a].value.cols;
                    let c = node.value.cols;
                    for r in 0..node.value.rows {
                        let dst = r * src_cols + start;
                        axpy(&mut g[*a][dst..dst + c], &gi[r * c..(r + 1) * c], 1.0);
                    }
                }
                Op::RowSum(a) => {
                    let c = self.nodes[*a].value.cols;
                    for (r, gr) in gi.iter().enumerate() {
                        for v in &mut g[*a][r * c..(r + 1) * c] {
                            *v += gr;
                        }
                    }
                }
                Op::SumAll(a) => {
                    for v in g[*a].iter_mut() {
                        *v += gi[0];
                    }
                }
                Op::QuantileLoss { pred, target, p } => {
                    let pv = &self.nodes[*pred].value.data;
                    let scale = gi[0] / target.len() as f64;
                    for k in 0..target.len() {
                        let d = if target[k] >= pv[k] { -p } else { 1.0 - p };
                        g[*pred][k] += scale * d;
                    }
                }
            }
            g[i] = gi;
        }
        self.grads = Some(g);
        Ok(())
    }

    /// Adjoint of `v`; errors before `backward` has run.
    pub fn grad(&self, v: Var) -> Result<Tensor> {
        let g = self
            .grads
            .as_ref()
            .ok_or_else(|| NnError::State("gradients requested before backward".into()))?;
        let t = self.check(v)?;
        Tensor::new(t.rows, t.cols, g[v.0].clone())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(dst: &mut [f64], src: &[f64], a: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

/// Numerically stable softmax over a slice.
pub fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    for x in v.iter_mut() {
        *x /= s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
        Tensor::new(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Central differences of `f` with respect to every entry of `inputs[k]`
    /// compared with the tape gradient.
    fn check_grad<F>(inputs: Vec<Tensor>, f: F)
    where
        F: Fn(&mut Tape, &[Var]) -> Var,
    {
        let run = |ins: &[Tensor]| {
            let mut tape = Tape::new();
            let vars: Vec<Var> = ins.iter().map(|t| tape.leaf(t.clone())).collect();
            let out = f(&mut tape, &vars);
            (tape, vars, out)
        };
        let (mut tape, vars, out) = run(&inputs);
        tape.backward(out).unwrap();
        let h = 1e-6;
        for (k, t) in inputs.iter().enumerate() {
            let analytic = tape.grad(vars[k]).unwrap();
            for e in 0..t.len() {
                let mut plus = inputs.clone();
                plus[k].data[e] += h;
                let mut minus = inputs.clone();
                minus[k].data[e] -= h;
                let (tp, _, op) = run(&plus);
                let (tm, _, om) = run(&minus);
                let fd = (tp.value(op).data[0] - tm.value(om).data[0]) / (2.0 * h);
                let a = analytic.data[e];
                let err = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-3);
                assert!(err < 1e-4, "input {k} entry {e}: analytic {a}, fd {fd}");
            }
        }
    }

    #[test]
    fn relu_keeps_nan() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::new(1, 3, vec![-1.0, f64::NAN, 2.0]).unwrap());
        let y = t.relu(x).unwrap();
        let v = &t.value(y).data;
        assert_eq!(v[0], 0.0);
        assert!(v[1].is_nan());
        assert_eq!(v[2], 2.0);
    }

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let w = t.leaf(Tensor::scalar(3.0));
        let y = t.mul(w, w).unwrap();
        t.backward(y).unwrap();
        assert_eq!(t.grad(w).unwrap().data, vec![6.0]);
    }

    #[test]
    fn quantile_subgradient() {
        let mut t = Tape::new();
        let yh = t.leaf(Tensor::scalar(2.0));
        let l = t.quantile_loss(yh, &[5.0], 0.5).unwrap();
        t.backward(l).unwrap();
        assert_eq!(t.grad(yh).unwrap().data, vec![-0.5]);

        let mut t = Tape::new();
        let yh = t.leaf(Tensor::scalar(5.0));
        let l = t.quantile_loss(yh, &[5.0], 0.9).unwrap();
        assert_eq!(t.value(l).data[0], 0.0);
        t.backward(l).unwrap();
        assert_abs_diff_eq!(t.grad(yh).unwrap().data[0], -0.9);
    }

    #[test]
    fn state_errors() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::zeros(2, 2));
        assert!(matches!(t.grad(a), Err(NnError::State(_))));
        assert!(matches!(t.backward(a), Err(NnError::State(_))));
        assert!(matches!(t.backward(Var(17)), Err(NnError::State(_))));
    }

    #[test]
    fn primitive_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = rand_tensor(&mut rng, 3, 4);
        let b = rand_tensor(&mut rng, 4, 2);
        check_grad(vec![a.clone(), b], |t, v| {
            let m = t.matmul(v[0], v[1]).unwrap();
            let s = t.mul(m, m).unwrap();
            t.sum_all(s).unwrap()
        });
        let c = rand_tensor(&mut rng, 3, 4);
        let r = rand_tensor(&mut rng, 1, 4);
        check_grad(vec![a.clone(), c, r], |t, v| {
            let s = t.add(v[0], v[1]).unwrap();
            let s = t.add_row(s, v[2]).unwrap();
            let s = t.softmax_rows(s).unwrap();
            let w = t.affine(s, 2.0, 0.5).unwrap();
            let q = t.mul(w, v[0]).unwrap();
            let q = t.row_sum(q).unwrap();
            t.quantile_loss(q, &[0.3, -0.2, 1.0], 0.5).unwrap()
        });
        check_grad(vec![a], |t, v| {
            let x = t.affine(v[0], 1.0, 0.05).unwrap();
            let r = t.relu(x).unwrap();
            let s = t.slice_cols(r, 1, 3).unwrap();
            let c = t.concat_cols(&[s, v[0]]).unwrap();
            let f = t.reshape(c, 1, 18).unwrap();
            let sq = t.mul(f, f).unwrap();
            t.sum_all(sq).unwrap()
        });
    }

    #[test]
    fn conv_gradient_and_causality() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = rand_tensor(&mut rng, 9, 3);
        let w = rand_tensor(&mut rng, 6, 4);
        let b = rand_tensor(&mut rng, 1, 4);
        check_grad(vec![x.clone(), w.clone(), b.clone()], |t, v| {
            let c = t.conv1d(v[0], v[1], v[2], 2, 2).unwrap();
            let s = t.mul(c, c).unwrap();
            t.sum_all(s).unwrap()
        });
        // outputs before step 5 ignore inputs from step 5 on
        let out = |x: &Tensor| {
            let mut t = Tape::new();
            let (xv, wv, bv) = (t.leaf(x.clone()), t.leaf(w.clone()), t.leaf(b.clone()));
            let c = t.conv1d(xv, wv, bv, 4, 2).unwrap();
            t.value(c).clone()
        };
        let base = out(&x);
        let mut x2 = x.clone();
        for v in &mut x2.data[15..] {
            *v += 10.0;
        }
        let moved = out(&x2);
        assert_eq!(base.data[..20], moved.data[..20]);
        assert_ne!(base.data[20..], moved.data[20..]);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(v in prop::collection::vec(-50.0f64..50.0, 1..10)) {
            let mut t = Tape::new();
            let n = v.len();
            let x = t.leaf(Tensor::row_vector(v));
            let s = t.softmax_rows(x).unwrap();
            let total: f64 = t.value(s).data.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert_eq!(t.value(s).cols, n);
        }
    }
}
