//! Differentiable operations. Each forward method records an [`Op`] whose
//! `backward` rule returns the vector-Jacobian product for every parent.

use super::kernels;
use super::tape::{Node, Var};
use crate::error::{NgcError, Result};

pub(crate) enum Op {
    Leaf,
    MatMul { a: usize, b: usize },
    MatMulNt { a: usize, b: usize },
    Transpose { a: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Div { a: usize, b: usize },
    Scale { a: usize, c: f64 },
    Neg { a: usize },
    Exp { a: usize },
    Log { a: usize },
    Gelu { a: usize },
    Sum { a: usize },
    Mean { a: usize },
    SumRows { a: usize },
    GatherRows { a: usize, idx: Vec<usize> },
    ConcatCols { parts: Vec<usize> },
    ConcatRows { parts: Vec<usize> },
    SliceCols { a: usize, start: usize },
    RmsNorm { x: usize, w: usize, inv: Vec<f64> },
    Softmax { a: usize },
    MaskedSoftmax { a: usize },
    LogSoftmax { a: usize },
    LogSumExp { a: usize },
    Rope { a: usize, positions: Vec<usize>, head_dim: usize },
    PickPerRow { a: usize, idx: Vec<usize> },
    Select { a: usize, idx: Vec<usize> },
    SeqLogprob { s: usize, sigma: Vec<usize> },
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul { .. } => "matmul",
            Op::MatMulNt { .. } => "matmul_nt",
            Op::Transpose { .. } => "transpose",
            Op::Add { .. } => "add",
            Op::Sub { .. } => "sub",
            Op::Mul { .. } => "mul",
            Op::Div { .. } => "div",
            Op::Scale { .. } => "scale",
            Op::Neg { .. } => "neg",
            Op::Exp { .. } => "exp",
            Op::Log { .. } => "log",
            Op::Gelu { .. } => "gelu",
            Op::Sum { .. } => "sum",
            Op::Mean { .. } => "mean",
            Op::SumRows { .. } => "sum_rows",
            Op::GatherRows { .. } => "gather_rows",
            Op::ConcatCols { .. } => "concat_cols",
            Op::ConcatRows { .. } => "concat_rows",
            Op::SliceCols { .. } => "slice_cols",
            Op::RmsNorm { .. } => "rmsnorm",
            Op::Softmax { .. } => "softmax",
            Op::MaskedSoftmax { .. } => "masked_softmax",
            Op::LogSoftmax { .. } => "log_softmax",
            Op::LogSumExp { .. } => "logsumexp",
            Op::Rope { .. } => "rope",
            Op::PickPerRow { .. } => "pick_per_row",
            Op::Select { .. } => "select",
            Op::SeqLogprob { .. } => "sequence_logprob",
        }
    }

    /// Vector-Jacobian products `(parent id, contribution)` given the
    /// upstream gradient `g` of `node`.
    pub fn backward(&self, nodes: &[Node], node: &Node, g: &[f64]) -> Vec<(usize, Vec<f64>)> {
        let val = |id: usize| &nodes[id].value;
        match self {
            Op::Leaf => Vec::new(),
            Op::MatMul { a, b } => {
                let (r, k, c) = (nodes[*a].rows, nodes[*a].cols, nodes[*b].cols);
                let ga = kernels::matmul_nt(g, val(*b), r, c, k);
                let gb = kernels::matmul_tn(val(*a), g, r, k, c);
                vec![(*a, ga), (*b, gb)]
            }
            Op::MatMulNt { a, b } => {
                // out = a bᵀ, a: r×k, b: c×k
                let (r, k, c) = (nodes[*a].rows, nodes[*a].cols, nodes[*b].rows);
                let ga = kernels::matmul(g, val(*b), r, c, k);
                let gb = kernels::matmul_tn(g, val(*a), r, c, k);
                vec![(*a, ga), (*b, gb)]
            }
            Op::Transpose { a } => {
                let (r, c) = (nodes[*a].rows, nodes[*a].cols);
                let mut ga = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        ga[i * c + j] = g[j * r + i];
                    }
                }
                vec![(*a, ga)]
            }
            Op::Add { a, b } => vec![(*a, g.to_vec()), (*b, g.to_vec())],
            Op::Sub { a, b } => vec![(*a, g.to_vec()), (*b, g.iter().map(|x| -x).collect())],
            Op::Mul { a, b } => {
                let ga = g.iter().zip(val(*b)).map(|(g, y)| g * y).collect();
                let gb = g.iter().zip(val(*a)).map(|(g, x)| g * x).collect();
                vec![(*a, ga), (*b, gb)]
            }
            Op::Div { a, b } => {
                let (x, y) = (val(*a), val(*b));
                let ga = g.iter().zip(y).map(|(g, y)| g / y).collect();
                let gb = g
                    .iter()
                    .zip(x.iter().zip(y))
                    .map(|(g, (x, y))| -g * x / (y * y))
                    .collect();
                vec![(*a, ga), (*b, gb)]
            }
            Op::Scale { a, c } => vec![(*a, g.iter().map(|x| x * c).collect())],
            Op::Neg { a } => vec![(*a, g.iter().map(|x| -x).collect())],
            Op::Exp { a } => vec![(*a, g.iter().zip(&node.value).map(|(g, e)| g * e).collect())],
            Op::Log { a } => vec![(*a, g.iter().zip(val(*a)).map(|(g, x)| g / x).collect())],
            Op::Gelu { a } => vec![(
                *a,
                g.iter().zip(val(*a)).map(|(g, x)| g * kernels::gelu_grad(*x)).collect(),
            )],
            Op::Sum { a } => vec![(*a, vec![g[0]; val(*a).len()])],
            Op::Mean { a } => {
                let n = val(*a).len();
                vec![(*a, vec![g[0] / n as f64; n])]
            }
            Op::SumRows { a } => {
                let (r, c) = (nodes[*a].rows, nodes[*a].cols);
                let mut ga = Vec::with_capacity(r * c);
                for _ in 0..r {
                    ga.extend_from_slice(&g[..c]);
                }
                vec![(*a, ga)]
            }
            Op::GatherRows { a, idx } => {
                let c = nodes[*a].cols;
                let mut ga = vec![0.0; val(*a).len()];
                for (out_r, &src) in idx.iter().enumerate() {
                    for j in 0..c {
                        ga[src * c + j] += g[out_r * c + j];
                    }
                }
                vec![(*a, ga)]
            }
            Op::ConcatCols { parts } => {
                let rows = node.rows;
                let total = node.cols;
                let mut offset = 0;
                let mut out = Vec::with_capacity(parts.len());
                for &p in parts {
                    let c = nodes[p].cols;
                    let mut gp = Vec::with_capacity(rows * c);
                    for i in 0..rows {
                        gp.extend_from_slice(&g[i * total + offset..i * total + offset + c]);
                    }
                    out.push((p, gp));
                    offset += c;
                }
                out
            }
            Op::ConcatRows { parts } => {
                let mut offset = 0;
                let mut out = Vec::with_capacity(parts.len());
                for &p in parts {
                    let n = val(p).len();
                    out.push((p, g[offset..offset + n].to_vec()));
                    offset += n;
                }
                out
            }
            Op::SliceCols { a, start } => {
                let (r, c) = (nodes[*a].rows, nodes[*a].cols);
                let w = node.cols;
                let mut ga = vec![0.0; r * c];
                for i in 0..r {
                    ga[i * c + start..i * c + start + w].copy_from_slice(&g[i * w..(i + 1) * w]);
                }
                vec![(*a, ga)]
            }
            Op::RmsNorm { x, w, inv } => {
                let (r, c) = (nodes[*x].rows, nodes[*x].cols);
                let (xv, wv) = (val(*x), val(*w));
                let mut gx = vec![0.0; r * c];
                let mut gw = vec![0.0; c];
                for i in 0..r {
                    let xr = &xv[i * c..(i + 1) * c];
                    let gr = &g[i * c..(i + 1) * c];
                    let s = inv[i];
                    let mut proj = 0.0;
                    for j in 0..c {
                        proj += gr[j] * wv[j] * xr[j];
                        gw[j] += gr[j] * xr[j] * s;
                    }
                    let coef = s * s * s / c as f64 * proj;
                    for j in 0..c {
                        gx[i * c + j] = s * gr[j] * wv[j] - xr[j] * coef;
                    }
                }
                vec![(*x, gx), (*w, gw)]
            }
            Op::Softmax { a } | Op::MaskedSoftmax { a } => {
                let c = node.cols;
                let p = &node.value;
                let mut ga = vec![0.0; p.len()];
                for i in 0..node.rows {
                    let pr = &p[i * c..(i + 1) * c];
                    let gr = &g[i * c..(i + 1) * c];
                    let d = kernels::dot(pr, gr);
                    for j in 0..c {
                        ga[i * c + j] = pr[j] * (gr[j] - d);
                    }
                }
                vec![(*a, ga)]
            }
            Op::LogSoftmax { a } => {
                let c = node.cols;
                let mut ga = vec![0.0; node.value.len()];
                for i in 0..node.rows {
                    let gr = &g[i * c..(i + 1) * c];
                    let total: f64 = gr.iter().sum();
                    for j in 0..c {
                        ga[i * c + j] = gr[j] - node.value[i * c + j].exp() * total;
                    }
                }
                vec![(*a, ga)]
            }
            Op::LogSumExp { a } => {
                let c = nodes[*a].cols;
                let x = val(*a);
                let mut ga = vec![0.0; x.len()];
                for i in 0..nodes[*a].rows {
                    let lse = node.value[i];
                    for j in 0..c {
                        ga[i * c + j] = g[i] * (x[i * c + j] - lse).exp();
                    }
                }
                vec![(*a, ga)]
            }
            Op::Rope { a, positions, head_dim } => {
                let c = node.cols;
                let mut ga = g.to_vec();
                for (i, &pos) in positions.iter().enumerate() {
                    kernels::rope_row(&mut ga[i * c..(i + 1) * c], pos, *head_dim, -1.0);
                }
                vec![(*a, ga)]
            }
            Op::PickPerRow { a, idx } => {
                let c = nodes[*a].cols;
                let mut ga = vec![0.0; val(*a).len()];
                for (i, &j) in idx.iter().enumerate() {
                    ga[i * c + j] += g[i];
                }
                vec![(*a, ga)]
            }
            Op::Select { a, idx } => {
                let mut ga = vec![0.0; val(*a).len()];
                for (k, &j) in idx.iter().enumerate() {
                    ga[j] += g[k];
                }
                vec![(*a, ga)]
            }
            Op::SeqLogprob { s, sigma } => {
                let grad = crate::sampler::sequence_logprob_grad(val(*s), sigma);
                vec![(*s, grad.into_iter().map(|d| d * g[0]).collect())]
            }
        }
    }
}

fn same_shape(a: &Var<'_>, b: &Var<'_>, op: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(NgcError::Dimension(format!(
            "{op}: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

impl<'t> Var<'t> {
    fn rg(&self) -> bool {
        self.requires_grad()
    }

    fn unary(&self, op: Op, f: impl Fn(f64) -> f64) -> Result<Var<'t>> {
        let (r, c) = self.shape();
        let out: Vec<f64> = self.tape.nodes()[self.id].value.iter().map(|&x| f(x)).collect();
        self.tape.push(out, r, c, self.rg(), op)
    }

    fn binary(&self, other: &Var<'t>, op: Op, name: &str, f: impl Fn(f64, f64) -> f64) -> Result<Var<'t>> {
        same_shape(self, other, name)?;
        let (r, c) = self.shape();
        let out: Vec<f64> = {
            let nodes = self.tape.nodes();
            nodes[self.id]
                .value
                .iter()
                .zip(&nodes[other.id].value)
                .map(|(&x, &y)| f(x, y))
                .collect()
        };
        self.tape.push(out, r, c, self.rg() || other.rg(), op)
    }

    /// Matrix product `self[m×k] · other[k×n]`.
    pub fn matmul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let ((m, k), (k2, n)) = (self.shape(), other.shape());
        if k != k2 {
            return Err(NgcError::Dimension(format!("matmul: {m}x{k} by {k2}x{n}")));
        }
        let out = {
            let nodes = self.tape.nodes();
            kernels::matmul(&nodes[self.id].value, &nodes[other.id].value, m, k, n)
        };
        self.tape.push(out, m, n, self.rg() || other.rg(), Op::MatMul { a: self.id, b: other.id })
    }

    /// `self[m×k] · other[n×k]ᵀ` without materializing the transpose.
    pub fn matmul_nt(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let ((m, k), (n, k2)) = (self.shape(), other.shape());
        if k != k2 {
            return Err(NgcError::Dimension(format!("matmul_nt: {m}x{k} by ({n}x{k2})ᵀ")));
        }
        let out = {
            let nodes = self.tape.nodes();
            kernels::matmul_nt(&nodes[self.id].value, &nodes[other.id].value, m, k, n)
        };
        self.tape.push(out, m, n, self.rg() || other.rg(), Op::MatMulNt { a: self.id, b: other.id })
    }

    pub fn transpose(&self) -> Result<Var<'t>> {
        let (r, c) = self.shape();
        let out = {
            let nodes = self.tape.nodes();
            let v = &nodes[self.id].value;
            let mut out = vec![0.0; r * c];
            for i in 0..r {
                for j in 0..c {
                    out[j * r + i] = v[i * c + j];
                }
            }
            out
        };
        self.tape.push(out, c, r, self.rg(), Op::Transpose { a: self.id })
    }

    pub fn add(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Add { a: self.id, b: other.id }, "add", |x, y| x + y)
    }

    pub fn sub(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Sub { a: self.id, b: other.id }, "sub", |x, y| x - y)
    }

    pub fn mul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Mul { a: self.id, b: other.id }, "mul", |x, y| x * y)
    }

    pub fn div(&self, other: &Var<'t>) -> Result<Var<'t>> {
        if self.tape.nodes()[other.id].value.iter().any(|&y| y == 0.0) {
            return Err(NgcError::Domain("div: zero divisor".into()));
        }
        self.binary(other, Op::Div { a: self.id, b: other.id }, "div", |x, y| x / y)
    }

    pub fn scale(&self, c: f64) -> Result<Var<'t>> {
        self.unary(Op::Scale { a: self.id, c }, |x| x * c)
    }

    pub fn neg(&self) -> Result<Var<'t>> {
        self.unary(Op::Neg { a: self.id }, |x| -x)
    }

    pub fn exp(&self) -> Result<Var<'t>> {
        self.unary(Op::Exp { a: self.id }, f64::exp)
    }

    pub fn log(&self) -> Result<Var<'t>> {
        if let Some(bad) = self.tape.nodes()[self.id].value.iter().find(|&&x| x <= 0.0) {
            return Err(NgcError::Domain(format!("log of nonpositive value {bad}")));
        }
        self.unary(Op::Log { a: self.id }, f64::ln)
    }

    pub fn gelu(&self) -> Result<Var<'t>> {
        self.unary(Op::Gelu { a: self.id }, kernels::gelu)
    }

    /// Sum of all entries, as a 1×1 node.
    pub fn sum(&self) -> Result<Var<'t>> {
        let s = self.tape.nodes()[self.id].value.iter().sum();
        self.tape.push(vec![s], 1, 1, self.rg(), Op::Sum { a: self.id })
    }

    pub fn mean(&self) -> Result<Var<'t>> {
        let s = {
            let nodes = self.tape.nodes();
            let v = &nodes[self.id].value;
            if v.is_empty() {
                return Err(NgcError::Dimension("mean of empty tensor".into()));
            }
            v.iter().sum::<f64>() / v.len() as f64
        };
        self.tape.push(vec![s], 1, 1, self.rg(), Op::Mean { a: self.id })
    }

    /// Column sums: `r×c → 1×c`.
    pub fn sum_rows(&self) -> Result<Var<'t>> {
        let (r, c) = self.shape();
        let out = {
            let nodes = self.tape.nodes();
            let v = &nodes[self.id].value;
            let mut out = vec![0.0; c];
            for i in 0..r {
                for j in 0..c {
                    out[j] += v[i * c + j];
                }
            }
            out
        };
        self.tape.push(out, 1, c, self.rg(), Op::SumRows { a: self.id })
    }

    pub fn gather_rows(&self, idx: &[usize]) -> Result<Var<'t>> {
        let (r, c) = self.shape();
        if let Some(&bad) = idx.iter().find(|&&i| i >= r) {
            return Err(NgcError::Dimension(format!("gather_rows: row {bad} of {r}")));
        }
        let out = {
            let nodes = self.tape.nodes();
            let v = &nodes[self.id].value;
            let mut out = Vec::with_capacity(idx.len() * c);
            for &i in idx {
                out.extend_from_slice(&v[i * c..(i + 1) * c]);
            }
            out
        };
        self.tape.push(out, idx.len(), c, self.rg(), Op::GatherRows { a: self.id, idx: idx.to_vec() })
    }

    pub fn slice_cols(&self, start: usize, width: usize) -> Result<Var<'t>> {
        let (r, c) = self.shape();
        if start + width > c {
            return Err(NgcError::Dimension(format!("slice_cols {start}+{width} of {c}")));
        }
        let out = {
            let nodes = self.tape.nodes();
            let v = &nodes[self.id].value;
            let mut out = Vec::with_capacity(r * width);
            for i in 0..r {
                out.extend_from_slice(&v[i * c + start..i * c + start + width]);
            }
            out
        };
        self.tape.push(out, r, width, self.rg(), Op::SliceCols { a: self.id, start })
    }

    /// Stable softmax along the last dimension.
    pub fn softmax_lastdim(&self) -> Result<Var<'t>> {
        let (r, c) = self.shape();
        if c == 0 {
            return Err(NgcError::Dimension("softmax over empty last dimension".into()));
        }
        let mut out = self.value();
        for row in out.chunks_mut(c) {
            kernels::softmax_in_place(row);
        }
        self.tape.push(out, r, c, self.rg(), Op::Softmax { a: self.id })
    }

    /// Softmax restricted to `visible` entries (row-major, same shape).
    /// Every row must expose at least one entry.
    pub fn masked_softmax_lastdim(&self, visible: &[bool]) -> Result<Var<'t>> {
        let (r, c) = self.shape();
        if visible.len() != r * c {
            return Err(NgcError::Dimension(format!(
                "mask of {} entries for {r}x{c} scores",
                visible.len()
            )));
        }
        if let Some(bad) = visible.chunks(c).position(|row| !row.iter().any(|&m| m)) {
            return Err(NgcError::Usage(format!("attention row {bad} has no visible key")));
        }
        let mut out = self.value();
        for (row, m) in out.chunks_mut(c).zip(visible.chunks(c)) {
            kernels::masked_softmax_in_place(row, m);
        }
        self.tape.push(out, r, c, self.rg(), Op::MaskedSoftmax { a: self.id })
    }

    pub fn log_softmax_lastdim(&self) -> Result<Var<'t>> {
        let (r, c) = self.shape();
        if c == 0 {
            return Err(NgcError::Dimension("log_softmax over empty last dimension".into()));
        }
        let mut out = self.value();
        for row in out.chunks_mut(c) {
            let lse = kernels::logsumexp(row);
            row.iter_mut().for_each(|v| *v -= lse);
        }
        self.tape.push(out, r, c, self.rg(), Op::LogSoftmax { a: self.id })
    }

    /// Row-wise log-sum-exp: `r×c → r×1`.
    pub fn logsumexp_lastdim(&self) -> Result<Var<'t>> {
        let (r, c) = self.shape();
        if c == 0 {
            return Err(NgcError::Dimension("logsumexp over empty last dimension".into()));
        }
        let out: Vec<f64> = self.value().chunks(c).map(kernels::logsumexp).collect();
        self.tape.push(out, r, 1, self.rg(), Op::LogSumExp { a: self.id })
    }

    /// Row-wise RMS normalization scaled by a `1×c` weight row.
    pub fn rmsnorm(&self, weight: &Var<'t>) -> Result<Var<'t>> {
        let (r, c) = self.shape();
        if weight.shape() != (1, c) {
            return Err(NgcError::Dimension(format!(
                "rmsnorm weight {:?} for width {c}",
                weight.shape()
            )));
        }
        let (out, inv) = {
            let nodes = self.tape.nodes();
            let x = &nodes[self.id].value;
            let w = &nodes[weight.id].value;
            let mut out = Vec::with_capacity(r * c);
            let mut inv = Vec::with_capacity(r);
            for row in x.chunks(c) {
                let s = kernels::inv_rms(row);
                inv.push(s);
                out.extend(row.iter().zip(w).map(|(x, w)| x * s * w));
            }
            (out, inv)
        };
        self.tape.push(
            out,
            r,
            c,
            self.rg() || weight.rg(),
            Op::RmsNorm {
                x: self.id,
                w: weight.id,
                inv,
            },
        )
    }

    /// Rotary position embedding; row `i` is rotated by `positions[i]`,
    /// independently within each `head_dim`-wide head.
    pub fn rope(&self, positions: &[usize], head_dim: usize) -> Result<Var<'t>> {
        let (r, c) = self.shape();
        if positions.len() != r || head_dim % 2 != 0 || c % head_dim != 0 {
            return Err(NgcError::Dimension(format!(
                "rope: {r}x{c} with {} positions, head_dim {head_dim}",
                positions.len()
            )));
        }
        let mut out = self.value();
        for (row, &p) in out.chunks_mut(c).zip(positions) {
            kernels::rope_row(row, p, head_dim, 1.0);
        }
        self.tape.push(
            out,
            r,
            c,
            self.rg(),
            Op::Rope {
                a: self.id,
                positions: positions.to_vec(),
                head_dim,
            },
        )
    }

    /// `out[i] = self[i, idx[i]]`, as an `r×1` column.
    pub fn pick_per_row(&self, idx: &[usize]) -> Result<Var<'t>> {
        let (r, c) = self.shape();
        if idx.len() != r || idx.iter().any(|&j| j >= c) {
            return Err(NgcError::Dimension(format!("pick_per_row: {} indices for {r}x{c}", idx.len())));
        }
        let out = {
            let nodes = self.tape.nodes();
            idx.iter().enumerate().map(|(i, &j)| nodes[self.id].value[i * c + j]).collect()
        };
        self.tape.push(out, r, 1, self.rg(), Op::PickPerRow { a: self.id, idx: idx.to_vec() })
    }

    /// Flat-index selection into a `1×k` row.
    pub fn select(&self, idx: &[usize]) -> Result<Var<'t>> {
        let out = {
            let nodes = self.tape.nodes();
            let v = &nodes[self.id].value;
            if let Some(&bad) = idx.iter().find(|&&j| j >= v.len()) {
                return Err(NgcError::Dimension(format!("select: index {bad} of {}", v.len())));
            }
            idx.iter().map(|&j| v[j]).collect()
        };
        self.tape.push(out, 1, idx.len(), self.rg(), Op::Select { a: self.id, idx: idx.to_vec() })
    }

    /// Log-probability of the ordered selection `sigma` under sequential
    /// sampling without replacement from `softmax(self)`. `self` is `1×N`.
    pub fn sequence_logprob(&self, sigma: &[usize]) -> Result<Var<'t>> {
        let lp = crate::sampler::sequence_logprob(&self.value(), sigma)?;
        self.tape.push(
            vec![lp],
            1,
            1,
            self.rg(),
            Op::SeqLogprob {
                s: self.id,
                sigma: sigma.to_vec(),
            },
        )
    }
}

/// Horizontal concatenation of equally tall parts.
pub fn concat_cols<'t>(parts: &[Var<'t>]) -> Result<Var<'t>> {
    let first = parts.first().ok_or_else(|| NgcError::Dimension("concat of nothing".into()))?;
    let tape = first.tape;
    let rows = first.rows();
    let widths: Vec<usize> = parts.iter().map(Var::cols).collect();
    if parts.iter().any(|p| p.rows() != rows) {
        return Err(NgcError::Dimension("concat_cols: row counts differ".into()));
    }
    let total: usize = widths.iter().sum();
    let out = {
        let nodes = tape.nodes();
        let mut out = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for (p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&nodes[p.id].value[i * w..(i + 1) * w]);
            }
        }
        out
    };
    let rg = parts.iter().any(Var::rg);
    tape.push(
        out,
        rows,
        total,
        rg,
        Op::ConcatCols {
            parts: parts.iter().map(|p| p.id).collect(),
        },
    )
}

/// Vertical concatenation of equally wide parts.
pub fn concat_rows<'t>(parts: &[Var<'t>]) -> Result<Var<'t>> {
    let first = parts.first().ok_or_else(|| NgcError::Dimension("concat of nothing".into()))?;
    let tape = first.tape;
    let cols = first.cols();
    if parts.iter().any(|p| p.cols() != cols) {
        return Err(NgcError::Dimension("concat_rows: column counts differ".into()));
    }
    let out: Vec<f64> = {
        let nodes = tape.nodes();
        parts.iter().flat_map(|p| nodes[p.id].value.iter().copied()).collect()
    };
    let rows = out.len() / cols.max(1);
    let rg = parts.iter().any(Var::rg);
    tape.push(
        out,
        rows,
        cols,
        rg,
        Op::ConcatRows {
            parts: parts.iter().map(|p| p.id).collect(),
        },
    )
}

/// Sum of 1×1 (or equally shaped) nodes.
pub fn sum_all<'t>(tape: &'t super::Tape, parts: &[Var<'t>]) -> Result<Var<'t>> {
    let mut iter = parts.iter();
    let Some(first) = iter.next() else {
        return tape.scalar(0.0);
    };
    iter.try_fold(*first, |acc, p| acc.add(p))
}
