//! Forward and backward kernels for every operator.

use super::graph::{Node, NodeId};
use super::Tensor;

#[derive(Clone, Debug)]
pub(crate) enum Op {
    Input,
    Leaf,
    MatMul(NodeId, NodeId),
    BatchMatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Affine { x: NodeId, scale: f64, shift: f64 },
    Sigmoid(NodeId),
    Tanh(NodeId),
    Softmax { x: NodeId, axis: usize },
    Log { x: NodeId, floor: f64 },
    Concat { inputs: Vec<NodeId>, axis: usize },
    Slice { x: NodeId, axis: usize, start: usize, len: usize },
    Reshape { x: NodeId, shape: Vec<usize> },
    Gather { table: NodeId, ids: Vec<usize> },
    Pick { x: NodeId, indices: Vec<usize> },
    Conv1d { x: NodeId, weight: NodeId, bias: NodeId, width: usize },
    MaxOverTime { x: NodeId, lengths: Vec<usize> },
    Sum(NodeId),
    Mean(NodeId),
}

impl Op {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::BatchMatMul(..) => "batch_matmul",
            Op::Add(..) => "add",
            Op::AddBias(..) => "add_bias",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Affine { .. } => "affine",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::Softmax { .. } => "softmax",
            Op::Log { .. } => "log",
            Op::Concat { .. } => "concat",
            Op::Slice { .. } => "slice",
            Op::Reshape { .. } => "reshape",
            Op::Gather { .. } => "gather",
            Op::Pick { .. } => "pick",
            Op::Conv1d { .. } => "conv1d",
            Op::MaxOverTime { .. } => "max_over_time",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
        }
    }

    pub(crate) fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Input | Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::BatchMatMul(a, b)
            | Op::Add(a, b)
            | Op::AddBias(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b) => vec![*a, *b],
            Op::Affine { x, .. }
            | Op::Sigmoid(x)
            | Op::Tanh(x)
            | Op::Softmax { x, .. }
            | Op::Log { x, .. }
            | Op::Slice { x, .. }
            | Op::Reshape { x, .. }
            | Op::Pick { x, .. }
            | Op::MaxOverTime { x, .. }
            | Op::Sum(x)
            | Op::Mean(x) => vec![*x],
            Op::Gather { table, .. } => vec![*table],
            Op::Concat { inputs, .. } => inputs.clone(),
            Op::Conv1d { x, weight, bias, .. } => vec![*x, *weight, *bias],
        }
    }
}

type OpError = (&'static str, String);

fn fail<T>(op: &Op, detail: String) -> Result<T, OpError> {
    Err((op.name(), detail))
}

/// `c = a * b + beta * c` with explicit strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    debug_assert!(k == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    debug_assert!((m - 1) * rsc + (n - 1) * csc < c.len());
    // SAFETY: the asserted extents keep every access inside the slices, and
    // `c` is uniquely borrowed with non-overlapping rows.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
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

/// (outer, axis, inner) extents of `shape` around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

pub(crate) fn forward(op: &Op, nodes: &[Node]) -> Result<Tensor, OpError> {
    let val = |id: &NodeId| &nodes[id.0].value;
    match op {
        Op::Input | Op::Leaf => unreachable!("inputs and leaves are never recomputed"),
        Op::MatMul(a, b) => {
            let (a, b) = (val(a), val(b));
            if a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0] {
                return fail(op, format!("cannot multiply {:?} by {:?}", a.shape, b.shape));
            }
            let (m, k, n) = (a.shape[0], a.shape[1], b.shape[1]);
            let mut out = vec![0.0; m * n];
            gemm(m, k, n, &a.data, (k, 1), &b.data, (n, 1), 0.0, &mut out, (n, 1));
            Ok(Tensor::from_parts(vec![m, n], out))
        }
        Op::BatchMatMul(a, b) => {
            let (a, b) = (val(a), val(b));
            if a.rank() != 3 || b.rank() != 3 || a.shape[0] != b.shape[0] || a.shape[2] != b.shape[1] {
                return fail(op, format!("cannot batch-multiply {:?} by {:?}", a.shape, b.shape));
            }
            let (bs, m, k, n) = (a.shape[0], a.shape[1], a.shape[2], b.shape[2]);
            let mut out = vec![0.0; bs * m * n];
            for i in 0..bs {
                gemm(
                    m,
                    k,
                    n,
                    &a.data[i * m * k..(i + 1) * m * k],
                    (k, 1),
                    &b.data[i * k * n..(i + 1) * k * n],
                    (n, 1),
                    0.0,
                    &mut out[i * m * n..(i + 1) * m * n],
                    (n, 1),
                );
            }
            Ok(Tensor::from_parts(vec![bs, m, n], out))
        }
        Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => {
            let (a, b) = (val(a), val(b));
            if a.shape != b.shape {
                return fail(op, format!("operand shapes differ: {:?} vs {:?}", a.shape, b.shape));
            }
            let data = match op {
                Op::Add(..) => a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect(),
                Op::Sub(..) => a.data.iter().zip(&b.data).map(|(x, y)| x - y).collect(),
                _ => a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect(),
            };
            Ok(Tensor::from_parts(a.shape.clone(), data))
        }
        Op::AddBias(x, bias) => {
            let (x, bias) = (val(x), val(bias));
            let n = *x.shape.last().unwrap();
            if bias.rank() != 1 || bias.shape[0] != n {
                return fail(op, format!("bias {:?} does not match rows of {:?}", bias.shape, x.shape));
            }
            let mut data = x.data.clone();
            for row in data.chunks_exact_mut(n) {
                for (v, b) in row.iter_mut().zip(&bias.data) {
                    *v += b;
                }
            }
            Ok(Tensor::from_parts(x.shape.clone(), data))
        }
        Op::Affine { x, scale, shift } => {
            let x = val(x);
            Ok(Tensor::from_parts(
                x.shape.clone(),
                x.data.iter().map(|v| scale * v + shift).collect(),
            ))
        }
        Op::Sigmoid(x) => {
            let x = val(x);
            Ok(Tensor::from_parts(x.shape.clone(), x.data.iter().map(|&v| sigmoid(v)).collect()))
        }
        Op::Tanh(x) => {
            let x = val(x);
            Ok(Tensor::from_parts(x.shape.clone(), x.data.iter().map(|v| v.tanh()).collect()))
        }
        Op::Softmax { x, axis } => {
            let x = val(x);
            if *axis >= x.rank() {
                return fail(op, format!("axis {axis} out of range for {:?}", x.shape));
            }
            let (outer, len, inner) = split_axis(&x.shape, *axis);
            let mut data = x.data.clone();
            for o in 0..outer {
                for i in 0..inner {
                    let base = o * len * inner + i;
                    let mut max = f64::NEG_INFINITY;
                    for t in 0..len {
                        max = max.max(data[base + t * inner]);
                    }
                    let mut total = 0.0;
                    for t in 0..len {
                        let e = (data[base + t * inner] - max).exp();
                        data[base + t * inner] = e;
                        total += e;
                    }
                    for t in 0..len {
                        data[base + t * inner] /= total;
                    }
                }
            }
            Ok(Tensor::from_parts(x.shape.clone(), data))
        }
        Op::Log { x, floor } => {
            let x = val(x);
            Ok(Tensor::from_parts(
                x.shape.clone(),
                x.data.iter().map(|v| v.max(*floor).ln()).collect(),
            ))
        }
        Op::Concat { inputs, axis } => {
            if inputs.is_empty() {
                return fail(op, "nothing to concatenate".into());
            }
            let first = val(&inputs[0]);
            if *axis >= first.rank() {
                return fail(op, format!("axis {axis} out of range for {:?}", first.shape));
            }
            let mut total = 0;
            for id in inputs {
                let s = &val(id).shape;
                let compatible = s.len() == first.rank()
                    && s.iter().zip(&first.shape).enumerate().all(|(d, (p, q))| d == *axis || p == q);
                if !compatible {
                    return fail(op, format!("cannot join {:?} with {:?} on axis {axis}", s, first.shape));
                }
                total += s[*axis];
            }
            let (outer, _, inner) = split_axis(&first.shape, *axis);
            let mut data = Vec::with_capacity(outer * total * inner);
            for o in 0..outer {
                for id in inputs {
                    let t = val(id);
                    let chunk = t.shape[*axis] * inner;
                    data.extend_from_slice(&t.data[o * chunk..(o + 1) * chunk]);
                }
            }
            let mut shape = first.shape.clone();
            shape[*axis] = total;
            Ok(Tensor::from_parts(shape, data))
        }
        Op::Slice { x, axis, start, len } => {
            let x = val(x);
            if *axis >= x.rank() || *len == 0 || start + len > x.shape[*axis] {
                return fail(op, format!("slice {start}..{} of axis {axis} in {:?}", start + len, x.shape));
            }
            let (outer, dim, inner) = split_axis(&x.shape, *axis);
            let mut data = Vec::with_capacity(outer * len * inner);
            for o in 0..outer {
                let from = (o * dim + start) * inner;
                data.extend_from_slice(&x.data[from..from + len * inner]);
            }
            let mut shape = x.shape.clone();
            shape[*axis] = *len;
            Ok(Tensor::from_parts(shape, data))
        }
        Op::Reshape { x, shape } => {
            let x = val(x);
            if shape.iter().product::<usize>() != x.len() || shape.iter().any(|&d| d == 0) {
                return fail(op, format!("cannot view {:?} as {:?}", x.shape, shape));
            }
            Ok(Tensor::from_parts(shape.clone(), x.data.clone()))
        }
        Op::Gather { table, ids } => {
            let table = val(table);
            if table.rank() != 2 || ids.is_empty() {
                return fail(op, format!("gather needs a matrix and ids, got {:?}", table.shape));
            }
            let (rows, d) = (table.shape[0], table.shape[1]);
            let mut data = Vec::with_capacity(ids.len() * d);
            for &id in ids {
                if id >= rows {
                    return fail(op, format!("row {id} out of range for {rows} rows"));
                }
                data.extend_from_slice(&table.data[id * d..(id + 1) * d]);
            }
            Ok(Tensor::from_parts(vec![ids.len(), d], data))
        }
        Op::Pick { x, indices } => {
            let x = val(x);
            if x.rank() != 2 || x.shape[0] != indices.len() {
                return fail(op, format!("{} indices for {:?}", indices.len(), x.shape));
            }
            let v = x.shape[1];
            let mut data = Vec::with_capacity(indices.len());
            for (b, &i) in indices.iter().enumerate() {
                if i >= v {
                    return fail(op, format!("index {i} out of range for width {v}"));
                }
                data.push(x.data[b * v + i]);
            }
            Ok(Tensor::from_parts(vec![indices.len()], data))
        }
        Op::Conv1d { x, weight, bias, width } => {
            let (x, w, bias) = (val(x), val(weight), val(bias));
            if x.rank() != 3 || *width == 0 || x.shape[1] < *width {
                return fail(op, format!("input {:?} too short for width {width}", x.shape));
            }
            let (bs, t, c) = (x.shape[0], x.shape[1], x.shape[2]);
            if w.rank() != 2 || w.shape[0] != width * c || bias.rank() != 1 || bias.shape[0] != w.shape[1] {
                return fail(
                    op,
                    format!("weight {:?} / bias {:?} do not fit channels {c}", w.shape, bias.shape),
                );
            }
            let f = w.shape[1];
            let steps = t - width + 1;
            let mut out = vec![0.0; bs * steps * f];
            for b in 0..bs {
                let rows = &mut out[b * steps * f..(b + 1) * steps * f];
                for row in rows.chunks_exact_mut(f) {
                    row.copy_from_slice(&bias.data);
                }
                // windows overlap: row s of the im2col view starts at s * c
                gemm(
                    steps,
                    width * c,
                    f,
                    &x.data[b * t * c..(b + 1) * t * c],
                    (c, 1),
                    &w.data,
                    (f, 1),
                    1.0,
                    rows,
                    (f, 1),
                );
            }
            Ok(Tensor::from_parts(vec![bs, steps, f], out))
        }
        Op::MaxOverTime { x, lengths } => {
            let x = val(x);
            if x.rank() != 3 || lengths.len() != x.shape[0] {
                return fail(op, format!("{} lengths for {:?}", lengths.len(), x.shape));
            }
            let (bs, t, f) = (x.shape[0], x.shape[1], x.shape[2]);
            let mut out = vec![f64::NEG_INFINITY; bs * f];
            for b in 0..bs {
                let len = lengths[b];
                if len == 0 || len > t {
                    return fail(op, format!("length {len} outside 1..={t}"));
                }
                let dst = &mut out[b * f..(b + 1) * f];
                for s in 0..len {
                    let row = &x.data[(b * t + s) * f..(b * t + s + 1) * f];
                    for (m, v) in dst.iter_mut().zip(row) {
                        if *v > *m {
                            *m = *v;
                        }
                    }
                }
            }
            Ok(Tensor::from_parts(vec![bs, f], out))
        }
        Op::Sum(x) => Ok(Tensor::scalar(val(x).data.iter().sum())),
        Op::Mean(x) => {
            let x = val(x);
            Ok(Tensor::scalar(x.data.iter().sum::<f64>() / x.len() as f64))
        }
    }
}

/// Takes the gradient buffer of `id` out of the tape (allocating zeros on
/// first touch), or `None` when the node does not need one.
fn take_grad(nodes: &mut [Node], id: NodeId) -> Option<Vec<f64>> {
    let node = &mut nodes[id.0];
    if !node.requires_grad {
        return None;
    }
    Some(node.grad.take().unwrap_or_else(|| vec![0.0; node.value.len()]))
}

fn put_grad(nodes: &mut [Node], id: NodeId, grad: Option<Vec<f64>>) {
    if let Some(g) = grad {
        nodes[id.0].grad = Some(g);
    }
}

/// Adds `f(i)` to each element of the gradient of `id`.
fn accumulate(nodes: &mut [Node], id: NodeId, f: impl Fn(usize) -> f64) {
    if let Some(mut g) = take_grad(nodes, id) {
        for (i, v) in g.iter_mut().enumerate() {
            *v += f(i);
        }
        put_grad(nodes, id, Some(g));
    }
}

pub(crate) fn backward(op: &Op, out: &Tensor, dout: &[f64], nodes: &mut [Node]) {
    match op {
        Op::Input | Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (m, k) = (nodes[a.0].value.shape[0], nodes[a.0].value.shape[1]);
            let n = nodes[b.0].value.shape[1];
            if let Some(mut ga) = take_grad(nodes, *a) {
                // dA += dC * B^T
                gemm(m, n, k, dout, (n, 1), &nodes[b.0].value.data, (1, n), 1.0, &mut ga, (k, 1));
                put_grad(nodes, *a, Some(ga));
            }
            if let Some(mut gb) = take_grad(nodes, *b) {
                // dB += A^T * dC
                gemm(k, m, n, &nodes[a.0].value.data, (1, k), dout, (n, 1), 1.0, &mut gb, (n, 1));
                put_grad(nodes, *b, Some(gb));
            }
        }
        Op::BatchMatMul(a, b) => {
            let s = &nodes[a.0].value.shape;
            let (bs, m, k) = (s[0], s[1], s[2]);
            let n = nodes[b.0].value.shape[2];
            if let Some(mut ga) = take_grad(nodes, *a) {
                let bv = &nodes[b.0].value.data;
                for i in 0..bs {
                    gemm(
                        m,
                        n,
                        k,
                        &dout[i * m * n..(i + 1) * m * n],
                        (n, 1),
                        &bv[i * k * n..(i + 1) * k * n],
                        (1, n),
                        1.0,
                        &mut ga[i * m * k..(i + 1) * m * k],
                        (k, 1),
                    );
                }
                put_grad(nodes, *a, Some(ga));
            }
            if let Some(mut gb) = take_grad(nodes, *b) {
                let av = &nodes[a.0].value.data;
                for i in 0..bs {
                    gemm(
                        k,
                        m,
                        n,
                        &av[i * m * k..(i + 1) * m * k],
                        (1, k),
                        &dout[i * m * n..(i + 1) * m * n],
                        (n, 1),
                        1.0,
                        &mut gb[i * k * n..(i + 1) * k * n],
                        (n, 1),
                    );
                }
                put_grad(nodes, *b, Some(gb));
            }
        }
        Op::Add(a, b) => {
            accumulate(nodes, *a, |i| dout[i]);
            accumulate(nodes, *b, |i| dout[i]);
        }
        Op::Sub(a, b) => {
            accumulate(nodes, *a, |i| dout[i]);
            accumulate(nodes, *b, |i| -dout[i]);
        }
        Op::Mul(a, b) => {
            let bv = nodes[b.0].value.data.clone();
            accumulate(nodes, *a, |i| dout[i] * bv[i]);
            let av = &nodes[a.0].value.data.clone();
            accumulate(nodes, *b, |i| dout[i] * av[i]);
        }
        Op::AddBias(x, bias) => {
            accumulate(nodes, *x, |i| dout[i]);
            if let Some(mut gb) = take_grad(nodes, *bias) {
                let n = gb.len();
                for row in dout.chunks_exact(n) {
                    for (g, d) in gb.iter_mut().zip(row) {
                        *g += d;
                    }
                }
                put_grad(nodes, *bias, Some(gb));
            }
        }
        Op::Affine { x, scale, .. } => accumulate(nodes, *x, |i| scale * dout[i]),
        Op::Sigmoid(x) => {
            let y = &out.data;
            accumulate(nodes, *x, |i| dout[i] * y[i] * (1.0 - y[i]));
        }
        Op::Tanh(x) => {
            let y = &out.data;
            accumulate(nodes, *x, |i| dout[i] * (1.0 - y[i] * y[i]));
        }
        Op::Softmax { x, axis } => {
            let (outer, len, inner) = split_axis(&out.shape, *axis);
            let y = &out.data;
            let mut dx = vec![0.0; y.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let base = o * len * inner + i;
                    let dot: f64 = (0..len).map(|t| dout[base + t * inner] * y[base + t * inner]).sum();
                    for t in 0..len {
                        let j = base + t * inner;
                        dx[j] = y[j] * (dout[j] - dot);
                    }
                }
            }
            accumulate(nodes, *x, |i| dx[i]);
        }
        Op::Log { x, floor } => {
            let xv = nodes[x.0].value.data.clone();
            accumulate(nodes, *x, |i| if xv[i] > *floor { dout[i] / xv[i] } else { 0.0 });
        }
        Op::Concat { inputs, axis } => {
            let (outer, total, inner) = split_axis(&out.shape, *axis);
            let mut offset = 0;
            for id in inputs {
                let width = nodes[id.0].value.shape[*axis];
                let chunk = width * inner;
                if let Some(mut g) = take_grad(nodes, *id) {
                    for o in 0..outer {
                        let src = (o * total + offset) * inner;
                        for (gv, d) in g[o * chunk..(o + 1) * chunk].iter_mut().zip(&dout[src..src + chunk]) {
                            *gv += d;
                        }
                    }
                    put_grad(nodes, *id, Some(g));
                }
                offset += width;
            }
        }
        Op::Slice { x, axis, start, len } => {
            if let Some(mut g) = take_grad(nodes, *x) {
                let (outer, dim, inner) = split_axis(&nodes[x.0].value.shape, *axis);
                let chunk = len * inner;
                for o in 0..outer {
                    let dst = (o * dim + start) * inner;
                    for (gv, d) in g[dst..dst + chunk].iter_mut().zip(&dout[o * chunk..(o + 1) * chunk]) {
                        *gv += d;
                    }
                }
                put_grad(nodes, *x, Some(g));
            }
        }
        Op::Reshape { x, .. } => accumulate(nodes, *x, |i| dout[i]),
        Op::Gather { table, ids } => {
            if let Some(mut g) = take_grad(nodes, *table) {
                let d = out.shape[1];
                for (r, &id) in ids.iter().enumerate() {
                    for (gv, dv) in g[id * d..(id + 1) * d].iter_mut().zip(&dout[r * d..(r + 1) * d]) {
                        *gv += dv;
                    }
                }
                put_grad(nodes, *table, Some(g));
            }
        }
        Op::Pick { x, indices } => {
            if let Some(mut g) = take_grad(nodes, *x) {
                let v = nodes[x.0].value.shape[1];
                for (b, &i) in indices.iter().enumerate() {
                    g[b * v + i] += dout[b];
                }
                put_grad(nodes, *x, Some(g));
            }
        }
        Op::Conv1d { x, weight, bias, width } => {
            let s = &nodes[x.0].value.shape;
            let (bs, t, c) = (s[0], s[1], s[2]);
            let f = out.shape[2];
            let steps = out.shape[1];
            let kdim = width * c;
            if let Some(mut gb) = take_grad(nodes, *bias) {
                for row in dout.chunks_exact(f) {
                    for (g, d) in gb.iter_mut().zip(row) {
                        *g += d;
                    }
                }
                put_grad(nodes, *bias, Some(gb));
            }
            if let Some(mut gw) = take_grad(nodes, *weight) {
                let xv = &nodes[x.0].value.data;
                for b in 0..bs {
                    // dW += view^T * dOut_b
                    gemm(
                        kdim,
                        steps,
                        f,
                        &xv[b * t * c..(b + 1) * t * c],
                        (1, c),
                        &dout[b * steps * f..(b + 1) * steps * f],
                        (f, 1),
                        1.0,
                        &mut gw,
                        (f, 1),
                    );
                }
                put_grad(nodes, *weight, Some(gw));
            }
            if let Some(mut gx) = take_grad(nodes, *x) {
                let wv = &nodes[weight.0].value.data;
                let mut cols = vec![0.0; steps * kdim];
                for b in 0..bs {
                    gemm(
                        steps,
                        f,
                        kdim,
                        &dout[b * steps * f..(b + 1) * steps * f],
                        (f, 1),
                        wv,
                        (1, f),
                        0.0,
                        &mut cols,
                        (kdim, 1),
                    );
                    let dst = &mut gx[b * t * c..(b + 1) * t * c];
                    for s in 0..steps {
                        for (g, v) in dst[s * c..s * c + kdim].iter_mut().zip(&cols[s * kdim..(s + 1) * kdim]) {
                            *g += v;
                        }
                    }
                }
                put_grad(nodes, *x, Some(gx));
            }
        }
        Op::MaxOverTime { x, lengths } => {
            if let Some(mut g) = take_grad(nodes, *x) {
                let s = &nodes[x.0].value.shape;
                let (t, f) = (s[1], s[2]);
                let xv = &nodes[x.0].value.data;
                for (b, &len) in lengths.iter().enumerate() {
                    for j in 0..f {
                        // first position attaining the max takes the gradient
                        let target = out.data[b * f + j];
                        if let Some(s) = (0..len).find(|&s| xv[(b * t + s) * f + j] == target) {
                            g[(b * t + s) * f + j] += dout[b * f + j];
                        }
                    }
                }
                put_grad(nodes, *x, Some(g));
            }
        }
        Op::Sum(x) => accumulate(nodes, *x, |_| dout[0]),
        Op::Mean(x) => {
            let n = nodes[x.0].value.len() as f64;
            accumulate(nodes, *x, |_| dout[0] / n);
        }
    }
}
