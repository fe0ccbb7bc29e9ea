//! Eager reverse-mode autodiff over 2-D tensors.
//!
//! Every operation computes its value immediately and records what the
//! backward pass needs. Gradients of parameters accumulate directly into
//! the [`ModelParameters`] gradient buffers, so shared weights (recurrent
//! cells, unrolled propagation steps) come out right without special
//! handling.

use std::collections::HashMap;

use thiserror::Error;

use crate::graph as graph_ops;
use crate::neural::params::{ModelParameters, ParamId};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("shape mismatch in {op}: {details}")]
pub struct ShapeError {
    pub op: &'static str,
    pub details: String,
}

impl ShapeError {
    fn new(op: &'static str, details: impl Into<String>) -> Self {
        ShapeError {
            op,
            details: details.into(),
        }
    }
}

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Constant,
    Param(ParamId),
    EmbedRows { param: ParamId, rows: Vec<usize> },
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    AddRowBroadcast(Var, Var),
    MulColBroadcast(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    AffineScalar { x: Var, mul: f64, add: f64 },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows { x: Var, rows: Vec<usize> },
    SegmentSumRows { x: Var, ids: Vec<usize>, count: usize },
    SegmentSoftmaxCol { x: Var, ids: Vec<usize>, count: usize },
    RowSoftmax(Var),
    SelectEntries { x: Var, entries: Vec<Option<(usize, usize)>> },
    ClampMin { x: Var, floor: f64 },
    Log(Var),
    Transpose(Var),
    MeanAll(Var),
    SumAll(Var),
}

pub struct Tape<F> {
    ops: Vec<Op>,
    values: Vec<Tensor<F>>,
    param_cache: HashMap<usize, Var>,
}

impl<F: Scalar> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Tape {
            ops: Vec::new(),
            values: Vec::new(),
            param_cache: HashMap::new(),
        }
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.values[v.0]
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> F {
        debug_assert_eq!(self.values[v.0].len(), 1);
        self.values[v.0].data()[0]
    }

    pub fn node_count(&self) -> usize {
        self.ops.len()
    }

    fn push(&mut self, op: Op, value: Tensor<F>) -> Var {
        self.ops.push(op);
        self.values.push(value);
        Var(self.ops.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<F>) -> Var {
        self.push(Op::Constant, value)
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.constant(Tensor::zeros(rows, cols))
    }

    /// Brings a parameter tensor onto the tape. Repeated calls for the same
    /// parameter reuse one node.
    pub fn param(&mut self, params: &ModelParameters<F>, id: ParamId) -> Var {
        if let Some(&v) = self.param_cache.get(&id.0) {
            return v;
        }
        let v = self.push(Op::Param(id), params.value(id).clone());
        self.param_cache.insert(id.0, v);
        v
    }

    /// Row lookup straight out of a parameter table (embedding lookup),
    /// without copying the whole table onto the tape.
    pub fn embed_rows(
        &mut self,
        params: &ModelParameters<F>,
        id: ParamId,
        rows: &[usize],
    ) -> Result<Var, ShapeError> {
        let table = params.value(id);
        let mut out = Tensor::zeros(rows.len(), table.cols());
        for (i, &r) in rows.iter().enumerate() {
            if r >= table.rows() {
                return Err(ShapeError::new(
                    "embed_rows",
                    format!("row {r} out of range for table of {} rows", table.rows()),
                ));
            }
            out.row_mut(i).copy_from_slice(table.row(r));
        }
        Ok(self.push(
            Op::EmbedRows {
                param: id,
                rows: rows.to_vec(),
            },
            out,
        ))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let (av, bv) = (&self.values[a.0], &self.values[b.0]);
        if av.cols() != bv.rows() {
            return Err(ShapeError::new(
                "matmul",
                format!("{}x{} . {}x{}", av.rows(), av.cols(), bv.rows(), bv.cols()),
            ));
        }
        let value = av.matmul(bv);
        Ok(self.push(Op::MatMul(a, b), value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let (av, bv) = (&self.values[a.0], &self.values[b.0]);
        if av.rows() != bv.rows() || av.cols() != bv.cols() {
            return Err(ShapeError::new(
                "add",
                format!("{}x{} vs {}x{}", av.rows(), av.cols(), bv.rows(), bv.cols()),
            ));
        }
        let mut value = av.clone();
        value.add_scaled(bv, F::one());
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let (av, bv) = (&self.values[a.0], &self.values[b.0]);
        if av.rows() != bv.rows() || av.cols() != bv.cols() {
            return Err(ShapeError::new(
                "mul",
                format!("{}x{} vs {}x{}", av.rows(), av.cols(), bv.rows(), bv.cols()),
            ));
        }
        let data: Vec<F> = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(&x, &y)| x * y)
            .collect();
        let value = Tensor::from_vec(av.rows(), av.cols(), data);
        Ok(self.push(Op::Mul(a, b), value))
    }

    /// a (n x d) + bias (1 x d), bias broadcast over rows.
    pub fn add_row_broadcast(&mut self, a: Var, bias: Var) -> Result<Var, ShapeError> {
        let (av, bv) = (&self.values[a.0], &self.values[bias.0]);
        if bv.rows() != 1 || av.cols() != bv.cols() {
            return Err(ShapeError::new(
                "add_row_broadcast",
                format!("{}x{} + {}x{}", av.rows(), av.cols(), bv.rows(), bv.cols()),
            ));
        }
        let mut value = av.clone();
        for i in 0..value.rows() {
            let row = value.row_mut(i);
            for (x, &b) in row.iter_mut().zip(bv.data()) {
                *x = *x + b;
            }
        }
        Ok(self.push(Op::AddRowBroadcast(a, bias), value))
    }

    /// a (n x d) scaled row-wise by w (n x 1).
    pub fn mul_col_broadcast(&mut self, a: Var, w: Var) -> Result<Var, ShapeError> {
        let (av, wv) = (&self.values[a.0], &self.values[w.0]);
        if wv.cols() != 1 || av.rows() != wv.rows() {
            return Err(ShapeError::new(
                "mul_col_broadcast",
                format!("{}x{} * {}x{}", av.rows(), av.cols(), wv.rows(), wv.cols()),
            ));
        }
        let mut value = av.clone();
        for i in 0..value.rows() {
            let s = wv.data()[i];
            for x in value.row_mut(i) {
                *x = *x * s;
            }
        }
        Ok(self.push(Op::MulColBroadcast(a, w), value))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.values[x.0].map(|v| F::one() / (F::one() + (-v).exp()));
        self.push(Op::Sigmoid(x), value)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.values[x.0].map(|v| v.tanh());
        self.push(Op::Tanh(x), value)
    }

    /// Elementwise mul*x + add.
    pub fn affine_scalar(&mut self, x: Var, mul: f64, add: f64) -> Var {
        let (m, a) = (F::from_f64(mul), F::from_f64(add));
        let value = self.values[x.0].map(|v| m * v + a);
        self.push(Op::AffineScalar { x, mul, add }, value)
    }

    pub fn one_minus(&mut self, x: Var) -> Var {
        self.affine_scalar(x, -1.0, 1.0)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, ShapeError> {
        if parts.is_empty() {
            return Err(ShapeError::new("concat_cols", "no parts"));
        }
        let rows = self.values[parts[0].0].rows();
        let mut total_cols = 0;
        for &p in parts {
            let v = &self.values[p.0];
            if v.rows() != rows {
                return Err(ShapeError::new("concat_cols", "row counts differ"));
            }
            total_cols += v.cols();
        }
        let mut value = Tensor::zeros(rows, total_cols);
        for i in 0..rows {
            let mut at = 0;
            for &p in parts {
                let v = &self.values[p.0];
                value.row_mut(i)[at..at + v.cols()].copy_from_slice(v.row(i));
                at += v.cols();
            }
        }
        Ok(self.push(Op::ConcatCols(parts.to_vec()), value))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, ShapeError> {
        if parts.is_empty() {
            return Err(ShapeError::new("concat_rows", "no parts"));
        }
        let cols = self.values[parts[0].0].cols();
        let mut total_rows = 0;
        for &p in parts {
            let v = &self.values[p.0];
            if v.cols() != cols {
                return Err(ShapeError::new("concat_rows", "column counts differ"));
            }
            total_rows += v.rows();
        }
        let mut value = Tensor::zeros(total_rows, cols);
        let mut at = 0;
        for &p in parts {
            let v = &self.values[p.0];
            for i in 0..v.rows() {
                value.row_mut(at + i).copy_from_slice(v.row(i));
            }
            at += v.rows();
        }
        Ok(self.push(Op::ConcatRows(parts.to_vec()), value))
    }

    pub fn gather_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var, ShapeError> {
        let xv = &self.values[x.0];
        let mut value = Tensor::zeros(rows.len(), xv.cols());
        for (i, &r) in rows.iter().enumerate() {
            if r >= xv.rows() {
                return Err(ShapeError::new(
                    "gather_rows",
                    format!("row {r} out of range for {} rows", xv.rows()),
                ));
            }
            value.row_mut(i).copy_from_slice(xv.row(r));
        }
        Ok(self.push(
            Op::GatherRows {
                x,
                rows: rows.to_vec(),
            },
            value,
        ))
    }

    pub fn segment_sum_rows(
        &mut self,
        x: Var,
        ids: &[usize],
        count: usize,
    ) -> Result<Var, ShapeError> {
        let value = graph_ops::segment_sum(&self.values[x.0], ids, count)
            .map_err(|e| ShapeError::new("segment_sum_rows", e.to_string()))?;
        Ok(self.push(
            Op::SegmentSumRows {
                x,
                ids: ids.to_vec(),
                count,
            },
            value,
        ))
    }

    /// Segment softmax of a column vector of logits (n x 1).
    pub fn segment_softmax_col(
        &mut self,
        x: Var,
        ids: &[usize],
        count: usize,
    ) -> Result<Var, ShapeError> {
        let xv = &self.values[x.0];
        if xv.cols() != 1 {
            return Err(ShapeError::new(
                "segment_softmax_col",
                format!("expected column vector, got {}x{}", xv.rows(), xv.cols()),
            ));
        }
        let out = graph_ops::segment_softmax(xv.data(), ids, count)
            .map_err(|e| ShapeError::new("segment_softmax_col", e.to_string()))?;
        let value = Tensor::col_vector(out);
        Ok(self.push(
            Op::SegmentSoftmaxCol {
                x,
                ids: ids.to_vec(),
                count,
            },
            value,
        ))
    }

    /// Softmax independently over the columns of each row.
    pub fn row_softmax(&mut self, x: Var) -> Var {
        let xv = &self.values[x.0];
        let mut value = Tensor::zeros(xv.rows(), xv.cols());
        for i in 0..xv.rows() {
            let row = xv.row(i);
            let max = row
                .iter()
                .copied()
                .fold(F::neg_infinity(), |a, b| if b > a { b } else { a });
            let mut sum = F::zero();
            let out = value.row_mut(i);
            for (o, &v) in out.iter_mut().zip(row) {
                let e = (v - max).exp();
                *o = e;
                sum = sum + e;
            }
            for o in out.iter_mut() {
                *o = *o / sum;
            }
        }
        self.push(Op::RowSoftmax(x), value)
    }

    /// Picks entries (row, col) into an (m x 1) column; `None` entries give
    /// a hard zero with no gradient.
    pub fn select_entries(
        &mut self,
        x: Var,
        entries: &[Option<(usize, usize)>],
    ) -> Result<Var, ShapeError> {
        let xv = &self.values[x.0];
        let mut data = Vec::with_capacity(entries.len());
        for e in entries {
            match e {
                Some((r, c)) => {
                    if *r >= xv.rows() || *c >= xv.cols() {
                        return Err(ShapeError::new(
                            "select_entries",
                            format!("({r}, {c}) out of {}x{}", xv.rows(), xv.cols()),
                        ));
                    }
                    data.push(xv.get(*r, *c));
                }
                None => data.push(F::zero()),
            }
        }
        let value = Tensor::col_vector(data);
        Ok(self.push(
            Op::SelectEntries {
                x,
                entries: entries.to_vec(),
            },
            value,
        ))
    }

    pub fn clamp_min(&mut self, x: Var, floor: f64) -> Var {
        let f = F::from_f64(floor);
        let value = self.values[x.0].map(|v| if v > f { v } else { f });
        self.push(Op::ClampMin { x, floor }, value)
    }

    pub fn log(&mut self, x: Var) -> Var {
        let value = self.values[x.0].map(|v| v.ln());
        self.push(Op::Log(x), value)
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let value = self.values[x.0].transpose();
        self.push(Op::Transpose(x), value)
    }

    pub fn mean_all(&mut self, x: Var) -> Result<Var, ShapeError> {
        let xv = &self.values[x.0];
        if xv.is_empty() {
            return Err(ShapeError::new("mean_all", "empty tensor"));
        }
        let n = F::from_f64(xv.len() as f64);
        let mut acc = F::zero();
        for &v in xv.data() {
            acc = acc + v;
        }
        let value = Tensor::from_vec(1, 1, vec![acc / n]);
        Ok(self.push(Op::MeanAll(x), value))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let mut acc = F::zero();
        for &v in self.values[x.0].data() {
            acc = acc + v;
        }
        let value = Tensor::from_vec(1, 1, vec![acc]);
        self.push(Op::SumAll(x), value)
    }

    /// Reverse pass from a scalar root. Parameter gradients accumulate into
    /// `params`; call `params.zero_grads()` first for fresh gradients.
    pub fn backward(
        &self,
        root: Var,
        params: &mut ModelParameters<F>,
    ) -> Result<(), ShapeError> {
        if self.values[root.0].len() != 1 {
            return Err(ShapeError::new("backward", "root is not a scalar"));
        }
        let mut grads: Vec<Option<Tensor<F>>> = vec![None; self.ops.len()];
        grads[root.0] = Some(Tensor::from_vec(1, 1, vec![F::one()]));

        for id in (0..=root.0).rev() {
            let Some(dy) = grads[id].take() else { continue };
            match &self.ops[id] {
                Op::Constant => {}
                Op::Param(pid) => {
                    params.grad_mut(*pid).add_scaled(&dy, F::one());
                }
                Op::EmbedRows { param, rows } => {
                    let grad = params.grad_mut(*param);
                    for (i, &r) in rows.iter().enumerate() {
                        let src = dy.row(i);
                        let dst = grad.row_mut(r);
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d = *d + s;
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let da = dy.matmul_nt(&self.values[b.0]);
                    let db = self.values[a.0].matmul_tn(&dy);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, dy.clone());
                    accumulate(&mut grads, *b, dy);
                }
                Op::Mul(a, b) => {
                    let da = zip_mul(&dy, &self.values[b.0]);
                    let db = zip_mul(&dy, &self.values[a.0]);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddRowBroadcast(a, bias) => {
                    let mut db = Tensor::zeros(1, dy.cols());
                    for i in 0..dy.rows() {
                        let row = dy.row(i);
                        let out = db.row_mut(0);
                        for (o, &v) in out.iter_mut().zip(row) {
                            *o = *o + v;
                        }
                    }
                    accumulate(&mut grads, *a, dy);
                    accumulate(&mut grads, *bias, db);
                }
                Op::MulColBroadcast(a, w) => {
                    let av = &self.values[a.0];
                    let wv = &self.values[w.0];
                    let mut da = dy.clone();
                    let mut dw = Tensor::zeros(wv.rows(), 1);
                    for i in 0..dy.rows() {
                        let s = wv.data()[i];
                        let mut acc = F::zero();
                        for (x, &orig) in da.row_mut(i).iter_mut().zip(av.row(i)) {
                            acc = acc + *x * orig;
                            *x = *x * s;
                        }
                        dw.data_mut()[i] = acc;
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *w, dw);
                }
                Op::Sigmoid(x) => {
                    let y = &self.values[id];
                    let dx = zip3(&dy, y, |d, s| d * s * (F::one() - s));
                    accumulate(&mut grads, *x, dx);
                }
                Op::Tanh(x) => {
                    let y = &self.values[id];
                    let dx = zip3(&dy, y, |d, t| d * (F::one() - t * t));
                    accumulate(&mut grads, *x, dx);
                }
                Op::AffineScalar { x, mul, .. } => {
                    let m = F::from_f64(*mul);
                    accumulate(&mut grads, *x, dy.map(|d| d * m));
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let pv = &self.values[p.0];
                        let mut dp = Tensor::zeros(pv.rows(), pv.cols());
                        for i in 0..pv.rows() {
                            dp.row_mut(i)
                                .copy_from_slice(&dy.row(i)[at..at + pv.cols()]);
                        }
                        at += pv.cols();
                        accumulate(&mut grads, p, dp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let pv = &self.values[p.0];
                        let mut dp = Tensor::zeros(pv.rows(), pv.cols());
                        for i in 0..pv.rows() {
                            dp.row_mut(i).copy_from_slice(dy.row(at + i));
                        }
                        at += pv.rows();
                        accumulate(&mut grads, p, dp);
                    }
                }
                Op::GatherRows { x, rows } => {
                    let xv = &self.values[x.0];
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    for (i, &r) in rows.iter().enumerate() {
                        let src = dy.row(i);
                        let dst = dx.row_mut(r);
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d = *d + s;
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::SegmentSumRows { x, ids, .. } => {
                    let xv = &self.values[x.0];
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    for (i, &s) in ids.iter().enumerate() {
                        dx.row_mut(i).copy_from_slice(dy.row(s));
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::SegmentSoftmaxCol { x, ids, count } => {
                    let y = &self.values[id];
                    // Per segment: dx_i = y_i * (dy_i - sum_j y_j dy_j).
                    let mut seg_dot = vec![F::zero(); *count];
                    for (i, &s) in ids.iter().enumerate() {
                        seg_dot[s] = seg_dot[s] + y.data()[i] * dy.data()[i];
                    }
                    let mut dx = Tensor::zeros(y.rows(), 1);
                    for (i, &s) in ids.iter().enumerate() {
                        dx.data_mut()[i] = y.data()[i] * (dy.data()[i] - seg_dot[s]);
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::RowSoftmax(x) => {
                    let y = &self.values[id];
                    let mut dx = Tensor::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let yr = y.row(i);
                        let dr = dy.row(i);
                        let mut dot = F::zero();
                        for (&yy, &dd) in yr.iter().zip(dr) {
                            dot = dot + yy * dd;
                        }
                        for (o, (&yy, &dd)) in
                            dx.row_mut(i).iter_mut().zip(yr.iter().zip(dr))
                        {
                            *o = yy * (dd - dot);
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::SelectEntries { x, entries } => {
                    let xv = &self.values[x.0];
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    for (i, e) in entries.iter().enumerate() {
                        if let Some((r, c)) = e {
                            let cur = dx.get(*r, *c);
                            dx.set(*r, *c, cur + dy.data()[i]);
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::ClampMin { x, floor } => {
                    let f = F::from_f64(*floor);
                    let xv = &self.values[x.0];
                    let data: Vec<F> = dy
                        .data()
                        .iter()
                        .zip(xv.data())
                        .map(|(&d, &v)| if v > f { d } else { F::zero() })
                        .collect();
                    accumulate(
                        &mut grads,
                        *x,
                        Tensor::from_vec(dy.rows(), dy.cols(), data),
                    );
                }
                Op::Log(x) => {
                    let xv = &self.values[x.0];
                    let data: Vec<F> = dy
                        .data()
                        .iter()
                        .zip(xv.data())
                        .map(|(&d, &v)| d / v)
                        .collect();
                    accumulate(
                        &mut grads,
                        *x,
                        Tensor::from_vec(dy.rows(), dy.cols(), data),
                    );
                }
                Op::Transpose(x) => {
                    accumulate(&mut grads, *x, dy.transpose());
                }
                Op::MeanAll(x) => {
                    let xv = &self.values[x.0];
                    let scale = dy.data()[0] / F::from_f64(xv.len() as f64);
                    let dx = Tensor::from_vec(
                        xv.rows(),
                        xv.cols(),
                        vec![scale; xv.len()],
                    );
                    accumulate(&mut grads, *x, dx);
                }
                Op::SumAll(x) => {
                    let xv = &self.values[x.0];
                    let dx = Tensor::from_vec(
                        xv.rows(),
                        xv.cols(),
                        vec![dy.data()[0]; xv.len()],
                    );
                    accumulate(&mut grads, *x, dx);
                }
            }
        }
        Ok(())
    }
}

fn accumulate<F: Scalar>(grads: &mut [Option<Tensor<F>>], v: Var, g: Tensor<F>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_scaled(&g, F::one()),
        slot @ None => *slot = Some(g),
    }
}

fn zip_mul<F: Scalar>(a: &Tensor<F>, b: &Tensor<F>) -> Tensor<F> {
    let data: Vec<F> = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| x * y)
        .collect();
    Tensor::from_vec(a.rows(), a.cols(), data)
}

fn zip3<F: Scalar>(dy: &Tensor<F>, y: &Tensor<F>, f: impl Fn(F, F) -> F) -> Tensor<F> {
    let data: Vec<F> = dy
        .data()
        .iter()
        .zip(y.data())
        .map(|(&d, &s)| f(d, s))
        .collect();
    Tensor::from_vec(dy.rows(), dy.cols(), data)
}
