//! Tape-style reverse-mode differentiation over [`Tensor`] values.
//!
//! Nodes are appended in evaluation order, so the node list is already a topological
//! order; `backward` walks it once in reverse and accumulates gradients additively.

use super::linalg::{log_det_spd, spd_inverse};
use super::par;
use super::tensor::{matmul, transpose, Tensor};
use crate::error::{bail, Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Geometry of a square-kernel 2-D transposed convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub stride: usize,
    pub padding: usize,
    pub output_padding: usize,
}

impl ConvGeometry {
    /// `(in − 1)·stride + kernel − 2·padding + output_padding`, or `None` when non-positive.
    pub fn output_extent(&self, input: usize, kernel: usize) -> Option<usize> {
        let grown = (input - 1) * self.stride + kernel + self.output_padding;
        grown
            .checked_sub(2 * self.padding)
            .filter(|&extent| extent > 0)
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    ConvTranspose2d {
        input: Var,
        weight: Var,
        bias: Var,
        geometry: ConvGeometry,
    },
    Linear {
        input: Var,
        weight: Var,
        bias: Var,
    },
    Relu(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    LogDet(Var),
    Reshape(Var),
    ConcatCols(Vec<Var>),
    Submatrix(Var, Vec<usize>),
    Slice(Var, usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    kink_fingerprint: u64,
}

/// Gradients of one scalar with respect to every node that needed one.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<Tensor> {
        self.grads[var.0]
            .as_ref()
            .map(|g| Tensor::from_parts(self.shapes[var.0].clone(), g.clone()))
    }

    /// Gradient as a flat vector, zeros if the node received no gradient.
    pub fn flat(&self, var: Var) -> Vec<f64> {
        self.grads[var.0]
            .clone()
            .unwrap_or_else(|| vec![0.0; self.shapes[var.0].iter().product()])
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Differentiable input.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_unchecked(value, Op::Leaf, true)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_unchecked(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn scalar(&self, var: Var) -> f64 {
        self.nodes[var.0].value.data()[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Hash of every ReLU activation pattern evaluated so far. Two evaluations with equal
    /// fingerprints took the same linear piece of every ReLU.
    pub fn kink_fingerprint(&self) -> u64 {
        self.kink_fingerprint
    }

    fn push_unchecked(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, inputs: &[Var]) -> Result<Var> {
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            bail!(
                Numeric,
                "{} produced non-finite value at index {i}",
                op_name(&op)
            );
        }
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        Ok(self.push_unchecked(Tensor::from_parts(shape, data), op, needs_grad))
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = matmul(self.value(a), self.value(b))?;
        let shape = out.shape().to_vec();
        self.push(shape, out.into_data(), Op::MatMul(a, b), &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = transpose(self.value(a))?;
        let shape = out.shape().to_vec();
        self.push(shape, out.into_data(), Op::Transpose(a), &[a])
    }

    /// Transposed convolution of `input [B, Cin, H, W]` with `weight [Cin, Cout, k, k]`
    /// and `bias [Cout]`.
    pub fn conv_transpose2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Var,
        geometry: ConvGeometry,
    ) -> Result<Var> {
        let dims = ConvDims::resolve(self.shape(input), self.shape(weight), self.shape(bias), geometry)?;
        let x = self.data(input);
        let w = self.data(weight);
        let b = self.data(bias);
        let mut out = vec![0.0; dims.batch * dims.out_sample()];
        par::for_each_row(&mut out, dims.out_sample(), |s, o| {
            conv_t_forward_sample(&dims, &x[s * dims.in_sample()..(s + 1) * dims.in_sample()], w, b, o)
        });
        let shape = vec![dims.batch, dims.cout, dims.oh, dims.ow];
        self.push(
            shape,
            out,
            Op::ConvTranspose2d {
                input,
                weight,
                bias,
                geometry,
            },
            &[input, weight, bias],
        )
    }

    /// Fully connected layer: `input [B, in]`, `weight [out, in]`, `bias [out]`.
    pub fn linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (batch, fan_in) = self.value(input).dims2()?;
        let (fan_out, w_in) = self.value(weight).dims2()?;
        if w_in != fan_in || self.shape(bias) != [fan_out] {
            bail!(
                Dimension,
                "linear: input [{batch}, {fan_in}], weight [{fan_out}, {w_in}], bias {:?}",
                self.shape(bias)
            );
        }
        let x = self.data(input);
        let w = self.data(weight);
        let b = self.data(bias);
        let mut out = vec![0.0; batch * fan_out];
        par::for_each_row(&mut out, fan_out, |s, row| {
            let xs = &x[s * fan_in..(s + 1) * fan_in];
            for (o, y) in row.iter_mut().enumerate() {
                let wr = &w[o * fan_in..(o + 1) * fan_in];
                *y = xs.iter().zip(wr).fold(b[o], |acc, (a, c)| acc + a * c);
            }
        });
        self.push(
            vec![batch, fan_out],
            out,
            Op::Linear {
                input,
                weight,
                bias,
            },
            &[input, weight, bias],
        )
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let data: Vec<f64> = self.data(a).iter().map(|&v| v.max(0.0)).collect();
        let mut h = self.kink_fingerprint ^ 0x9e37_79b9_7f4a_7c15;
        for &v in self.data(a) {
            h = (h ^ u64::from(v > 0.0)).wrapping_mul(0x0000_0100_0000_01b3);
        }
        self.kink_fingerprint = h;
        let shape = self.shape(a).to_vec();
        self.push(shape, data, Op::Relu(a), &[a])
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            bail!(
                Dimension,
                "{what}: shapes {:?} and {:?} differ",
                self.shape(a),
                self.shape(b)
            );
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let data = zip_map(self.data(a), self.data(b), |x, y| x + y);
        let shape = self.shape(a).to_vec();
        self.push(shape, data, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let data = zip_map(self.data(a), self.data(b), |x, y| x - y);
        let shape = self.shape(a).to_vec();
        self.push(shape, data, Op::Sub(a, b), &[a, b])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let data = zip_map(self.data(a), self.data(b), |x, y| x * y);
        let shape = self.shape(a).to_vec();
        self.push(shape, data, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let data = self.data(a).iter().map(|v| v * factor).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, data, Op::Scale(a, factor), &[a])
    }

    /// Sum of all elements as a `[1]` tensor, correctly rounded.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).sum();
        self.push(vec![1], vec![s], Op::Sum(a), &[a])
    }

    /// `ln det` of a symmetric positive-definite matrix.
    pub fn log_det(&mut self, a: Var) -> Result<Var> {
        let v = log_det_spd(self.value(a))?;
        self.push(vec![1], vec![v], Op::LogDet(a), &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let n: usize = shape.iter().product();
        if n != self.value(a).len() || shape.contains(&0) {
            bail!(
                Dimension,
                "cannot reshape {:?} to {shape:?}",
                self.shape(a)
            );
        }
        let data = self.data(a).to_vec();
        self.push(shape, data, Op::Reshape(a), &[a])
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            bail!(Dimension, "concat_cols needs at least one part");
        }
        let rows = self.value(parts[0]).dims2()?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.value(p).dims2()?;
            if r != rows {
                bail!(Dimension, "concat_cols: row counts {rows} and {r} differ");
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &c) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.data(p)[r * c..(r + 1) * c]);
            }
        }
        self.push(vec![rows, total], data, Op::ConcatCols(parts.to_vec()), parts)
    }

    /// Principal submatrix `a[idx, idx]` of a square matrix.
    pub fn submatrix(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let (n, m) = self.value(a).dims2()?;
        if n != m || idx.is_empty() || idx.iter().any(|&i| i >= n) {
            bail!(Dimension, "invalid principal submatrix {idx:?} of {n}x{m}");
        }
        let k = idx.len();
        let src = self.data(a);
        let mut data = Vec::with_capacity(k * k);
        for &i in idx {
            for &j in idx {
                data.push(src[i * n + j]);
            }
        }
        self.push(vec![k, k], data, Op::Submatrix(a, idx.to_vec()), &[a])
    }

    /// Contiguous run of the flattened tensor, returned as a vector.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let total = self.value(a).len();
        if len == 0 || start + len > total {
            bail!(Dimension, "slice {start}..{} out of {total}", start + len);
        }
        let data = self.data(a)[start..start + len].to_vec();
        self.push(vec![len], data, Op::Slice(a, start), &[a])
    }

    /// Reverse pass from a single-element node.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.value(root).len() != 1 {
            bail!(
                Dimension,
                "backward needs a scalar root, got shape {:?}",
                self.shape(root)
            );
        }
        let n = root.0 + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);
        for i in (0..n).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.needs_grad {
                self.propagate(node, &g, &mut grads)?;
            }
            grads[i] = Some(g);
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        // Nodes that do not need gradients (constants) report none.
        for (g, node) in grads.iter_mut().zip(&self.nodes) {
            if !node.needs_grad {
                *g = None;
            }
        }
        Ok(Gradients { grads, shapes })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        let mut send = |v: Var, contribution: Vec<f64>| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.iter_mut().zip(&contribution).for_each(|(a, c)| *a += c),
                slot @ None => *slot = Some(contribution),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let gt = Tensor::from_parts(node.value.shape().to_vec(), g.to_vec());
                if self.nodes[a.0].needs_grad {
                    let bt = transpose(self.value(*b))?;
                    send(*a, matmul(&gt, &bt)?.into_data());
                }
                if self.nodes[b.0].needs_grad {
                    let at = transpose(self.value(*a))?;
                    send(*b, matmul(&at, &gt)?.into_data());
                }
            }
            Op::Transpose(a) => {
                let gt = Tensor::from_parts(node.value.shape().to_vec(), g.to_vec());
                send(*a, transpose(&gt)?.into_data());
            }
            Op::ConvTranspose2d {
                input,
                weight,
                bias,
                geometry,
            } => {
                let dims = ConvDims::resolve(
                    self.shape(*input),
                    self.shape(*weight),
                    self.shape(*bias),
                    *geometry,
                )?;
                let x = self.data(*input);
                let w = self.data(*weight);
                if self.nodes[input.0].needs_grad {
                    let mut gx = vec![0.0; x.len()];
                    par::for_each_row(&mut gx, dims.in_sample(), |s, gxs| {
                        conv_t_grad_input_sample(&dims, &g[s * dims.out_sample()..(s + 1) * dims.out_sample()], w, gxs)
                    });
                    send(*input, gx);
                }
                if self.nodes[weight.0].needs_grad {
                    let per_ci = dims.cout * dims.k * dims.k;
                    let mut gw = vec![0.0; w.len()];
                    par::for_each_row(&mut gw, per_ci, |ci, gwc| conv_t_grad_weight_channel(&dims, ci, x, g, gwc));
                    send(*weight, gw);
                }
                if self.nodes[bias.0].needs_grad {
                    let plane = dims.oh * dims.ow;
                    let mut gb = vec![0.0; dims.cout];
                    for s in 0..dims.batch {
                        for (co, acc) in gb.iter_mut().enumerate() {
                            let base = s * dims.out_sample() + co * plane;
                            *acc += g[base..base + plane].iter().fold(0.0, |a, v| a + v);
                        }
                    }
                    send(*bias, gb);
                }
            }
            Op::Linear {
                input,
                weight,
                bias,
            } => {
                let (batch, fan_in) = self.value(*input).dims2()?;
                let fan_out = self.value(*bias).len();
                let x = self.data(*input);
                let w = self.data(*weight);
                if self.nodes[input.0].needs_grad {
                    let mut gx = vec![0.0; batch * fan_in];
                    par::for_each_row(&mut gx, fan_in, |s, row| {
                        let gs = &g[s * fan_out..(s + 1) * fan_out];
                        for (o, &gv) in gs.iter().enumerate() {
                            let wr = &w[o * fan_in..(o + 1) * fan_in];
                            row.iter_mut().zip(wr).for_each(|(r, wv)| *r += gv * wv);
                        }
                    });
                    send(*input, gx);
                }
                if self.nodes[weight.0].needs_grad {
                    let mut gw = vec![0.0; fan_out * fan_in];
                    par::for_each_row(&mut gw, fan_in, |o, row| {
                        for s in 0..batch {
                            let gv = g[s * fan_out + o];
                            let xs = &x[s * fan_in..(s + 1) * fan_in];
                            row.iter_mut().zip(xs).for_each(|(r, xv)| *r += gv * xv);
                        }
                    });
                    send(*weight, gw);
                }
                if self.nodes[bias.0].needs_grad {
                    let mut gb = vec![0.0; fan_out];
                    for s in 0..batch {
                        gb.iter_mut()
                            .zip(&g[s * fan_out..(s + 1) * fan_out])
                            .for_each(|(a, v)| *a += v);
                    }
                    send(*bias, gb);
                }
            }
            Op::Relu(a) => {
                let x = self.data(*a);
                send(*a, zip_map(g, x, |gv, xv| if xv > 0.0 { gv } else { 0.0 }));
            }
            Op::Add(a, b) => {
                send(*a, g.to_vec());
                send(*b, g.to_vec());
            }
            Op::Sub(a, b) => {
                send(*a, g.to_vec());
                send(*b, g.iter().map(|v| -v).collect());
            }
            Op::Mul(a, b) => {
                let (xa, xb) = (self.data(*a), self.data(*b));
                send(*a, zip_map(g, xb, |gv, v| gv * v));
                send(*b, zip_map(g, xa, |gv, v| gv * v));
            }
            Op::Scale(a, factor) => send(*a, g.iter().map(|v| v * factor).collect()),
            Op::Sum(a) => send(*a, vec![g[0]; self.value(*a).len()]),
            Op::LogDet(a) => {
                let inv = spd_inverse(self.value(*a))?;
                send(*a, inv.data().iter().map(|v| v * g[0]).collect());
            }
            Op::Reshape(a) => send(*a, g.to_vec()),
            Op::ConcatCols(parts) => {
                let rows = node.value.shape()[0];
                let total = node.value.shape()[1];
                let mut offset = 0;
                for &p in parts {
                    let c = self.shape(p)[1];
                    let mut gp = Vec::with_capacity(rows * c);
                    for r in 0..rows {
                        gp.extend_from_slice(&g[r * total + offset..r * total + offset + c]);
                    }
                    send(p, gp);
                    offset += c;
                }
            }
            Op::Submatrix(a, idx) => {
                let n = self.shape(*a)[0];
                let k = idx.len();
                let mut ga = vec![0.0; n * n];
                for (r, &i) in idx.iter().enumerate() {
                    for (c, &j) in idx.iter().enumerate() {
                        ga[i * n + j] += g[r * k + c];
                    }
                }
                send(*a, ga);
            }
            Op::Slice(a, start) => {
                let mut ga = vec![0.0; self.value(*a).len()];
                ga[*start..*start + g.len()].copy_from_slice(g);
                send(*a, ga);
            }
        }
        Ok(())
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::MatMul(..) => "matmul",
        Op::Transpose(..) => "transpose",
        Op::ConvTranspose2d { .. } => "conv_transpose2d",
        Op::Linear { .. } => "linear",
        Op::Relu(..) => "relu",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::Scale(..) => "scale",
        Op::Sum(..) => "sum",
        Op::LogDet(..) => "log_det",
        Op::Reshape(..) => "reshape",
        Op::ConcatCols(..) => "concat_cols",
        Op::Submatrix(..) => "submatrix",
        Op::Slice(..) => "slice",
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

#[derive(Clone, Copy, Debug)]
struct ConvDims {
    batch: usize,
    cin: usize,
    cout: usize,
    h: usize,
    w: usize,
    k: usize,
    oh: usize,
    ow: usize,
    geometry: ConvGeometry,
}

impl ConvDims {
    fn resolve(input: &[usize], weight: &[usize], bias: &[usize], geometry: ConvGeometry) -> Result<Self> {
        let (&[batch, cin, h, w], &[wcin, cout, k, k2]) = (input, weight) else {
            return Err(Error::Dimension(format!(
                "conv_transpose2d needs input [B,C,H,W] and weight [Cin,Cout,k,k], got {input:?} and {weight:?}"
            )));
        };
        if wcin != cin || k != k2 || bias != [cout] {
            bail!(
                Dimension,
                "conv_transpose2d: input {input:?}, weight {weight:?}, bias {bias:?} disagree"
            );
        }
        if geometry.stride == 0 || geometry.output_padding >= geometry.stride {
            bail!(
                Configuration,
                "output_padding {} must be smaller than stride {}",
                geometry.output_padding,
                geometry.stride
            );
        }
        let (Some(oh), Some(ow)) = (geometry.output_extent(h, k), geometry.output_extent(w, k)) else {
            bail!(Dimension, "conv_transpose2d output extent is not positive");
        };
        Ok(Self {
            batch,
            cin,
            cout,
            h,
            w,
            k,
            oh,
            ow,
            geometry,
        })
    }

    fn in_sample(&self) -> usize {
        self.cin * self.h * self.w
    }

    fn out_sample(&self) -> usize {
        self.cout * self.oh * self.ow
    }

    /// Output coordinate hit by input `i` and kernel tap `t`, if it lands inside.
    fn target(&self, i: usize, t: usize, limit: usize) -> Option<usize> {
        (i * self.geometry.stride + t)
            .checked_sub(self.geometry.padding)
            .filter(|&o| o < limit)
    }
}

fn conv_t_forward_sample(d: &ConvDims, x: &[f64], w: &[f64], b: &[f64], out: &mut [f64]) {
    let plane = d.oh * d.ow;
    let kk = d.k * d.k;
    for co in 0..d.cout {
        out[co * plane..(co + 1) * plane].fill(b[co]);
    }
    for ci in 0..d.cin {
        for ih in 0..d.h {
            for iw in 0..d.w {
                let v = x[(ci * d.h + ih) * d.w + iw];
                for kh in 0..d.k {
                    let Some(oh) = d.target(ih, kh, d.oh) else { continue };
                    for kw in 0..d.k {
                        let Some(ow) = d.target(iw, kw, d.ow) else { continue };
                        let wbase = ci * d.cout * kk + kh * d.k + kw;
                        for co in 0..d.cout {
                            out[co * plane + oh * d.ow + ow] += v * w[wbase + co * kk];
                        }
                    }
                }
            }
        }
    }
}

fn conv_t_grad_input_sample(d: &ConvDims, g: &[f64], w: &[f64], gx: &mut [f64]) {
    let plane = d.oh * d.ow;
    let kk = d.k * d.k;
    for ci in 0..d.cin {
        for ih in 0..d.h {
            for iw in 0..d.w {
                let mut acc = 0.0;
                for kh in 0..d.k {
                    let Some(oh) = d.target(ih, kh, d.oh) else { continue };
                    for kw in 0..d.k {
                        let Some(ow) = d.target(iw, kw, d.ow) else { continue };
                        let wbase = ci * d.cout * kk + kh * d.k + kw;
                        for co in 0..d.cout {
                            acc += g[co * plane + oh * d.ow + ow] * w[wbase + co * kk];
                        }
                    }
                }
                gx[(ci * d.h + ih) * d.w + iw] = acc;
            }
        }
    }
}

fn conv_t_grad_weight_channel(d: &ConvDims, ci: usize, x: &[f64], g: &[f64], gw: &mut [f64]) {
    let plane = d.oh * d.ow;
    let kk = d.k * d.k;
    for s in 0..d.batch {
        let xs = &x[s * d.in_sample()..(s + 1) * d.in_sample()];
        let gs = &g[s * d.out_sample()..(s + 1) * d.out_sample()];
        for ih in 0..d.h {
            for iw in 0..d.w {
                let v = xs[(ci * d.h + ih) * d.w + iw];
                for kh in 0..d.k {
                    let Some(oh) = d.target(ih, kh, d.oh) else { continue };
                    for kw in 0..d.k {
                        let Some(ow) = d.target(iw, kw, d.ow) else { continue };
                        for co in 0..d.cout {
                            gw[co * kk + kh * d.k + kw] += v * gs[co * plane + oh * d.ow + ow];
                        }
                    }
                }
            }
        }
    }
}
