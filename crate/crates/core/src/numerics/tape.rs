//! Reverse-mode tape. A tape is rebuilt per forward pass, owns every
//! intermediate tensor, and is confined to one logical thread.

use super::{NumericsError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

const RMS_EPS: f64 = 1e-12;

enum Op {
    Leaf,
    MatMul {
        a: usize,
        b: usize,
    },
    Add {
        a: usize,
        b: usize,
    },
    Mul {
        a: usize,
        b: usize,
    },
    /// Row-broadcast multiply: `a` is (rows, cols), `b` is (cols,).
    MulBcast {
        a: usize,
        b: usize,
    },
    Scale {
        a: usize,
        c: f64,
    },
    Embedding {
        table: usize,
        ids: Vec<usize>,
    },
    RmsNorm {
        a: usize,
        inv_rms: Vec<f64>,
    },
    Gelu {
        a: usize,
    },
    Softmax {
        a: usize,
    },
    CrossEntropy {
        logits: usize,
        targets: Vec<usize>,
        mask: Vec<f64>,
        probs: Vec<f64>,
        mask_total: f64,
    },
    L2Norm {
        a: usize,
    },
    Sum {
        a: usize,
    },
    CausalAttention {
        q: usize,
        k: usize,
        v: usize,
        n_heads: usize,
        rope_base: f64,
        q_rot: Vec<f64>,
        k_rot: Vec<f64>,
        /// Per-head dense (T, T) attention probabilities, zero above the diagonal.
        probs: Vec<f64>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

pub struct Tape {
    nodes: Vec<Node>,
    backward_done: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            backward_done: false,
        }
    }

    pub fn leaf(&mut self, tensor: Tensor) -> VarId {
        self.nodes.push(Node {
            value: tensor,
            op: Op::Leaf,
        });
        VarId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: VarId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: VarId) -> Option<&[f64]> {
        self.nodes[id.0].value.grad.as_deref()
    }

    /// Clears all gradients so backward may run again.
    pub fn reset_grads(&mut self) {
        for node in &mut self.nodes {
            node.value.grad = None;
        }
        self.backward_done = false;
    }

    fn push(&mut self, op: &'static str, shape: Vec<usize>, data: Vec<f64>, node_op: Op) -> Result<VarId, NumericsError> {
        if !data.iter().all(|x| x.is_finite()) {
            return Err(NumericsError::NonFinite { op });
        }
        let numel: usize = shape.iter().product();
        debug_assert_eq!(numel, data.len());
        self.nodes.push(Node {
            value: Tensor::new(shape, data).expect("internal shape bug"),
            op: node_op,
        });
        Ok(VarId(self.nodes.len() - 1))
    }

    // ── forward primitives ──────────────────────────────────────────────

    /// (m, k) x (k, n) -> (m, n).
    pub fn matmul(&mut self, a: VarId, b: VarId) -> Result<VarId, NumericsError> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (m, ka) = ta.as_2d();
        let (kb, n) = tb.as_2d();
        if ka != kb {
            return Err(NumericsError::ShapeMismatch {
                op: "matmul",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let data = matmul_raw(ta.data(), tb.data(), m, ka, n);
        self.push("matmul", vec![m, n], data, Op::MatMul { a: a.0, b: b.0 })
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> Result<VarId, NumericsError> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.shape() != tb.shape() {
            return Err(NumericsError::ShapeMismatch {
                op: "add",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        self.push("add", ta.shape().to_vec(), data, Op::Add { a: a.0, b: b.0 })
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> Result<VarId, NumericsError> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.shape() != tb.shape() {
            return Err(NumericsError::ShapeMismatch {
                op: "mul",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        self.push("mul", ta.shape().to_vec(), data, Op::Mul { a: a.0, b: b.0 })
    }

    /// Multiply each row of `a` (rows, cols) by the vector `b` (cols,).
    pub fn mul_bcast(&mut self, a: VarId, b: VarId) -> Result<VarId, NumericsError> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (rows, cols) = ta.as_2d();
        if tb.numel() != cols {
            return Err(NumericsError::ShapeMismatch {
                op: "mul_bcast",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let gain = tb.data();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let row = &ta.data()[r * cols..(r + 1) * cols];
            data.extend(row.iter().zip(gain).map(|(x, g)| x * g));
        }
        self.push("mul_bcast", ta.shape().to_vec(), data, Op::MulBcast { a: a.0, b: b.0 })
    }

    pub fn scale(&mut self, a: VarId, c: f64) -> Result<VarId, NumericsError> {
        let ta = &self.nodes[a.0].value;
        let data = ta.data().iter().map(|x| x * c).collect();
        self.push("scale", ta.shape().to_vec(), data, Op::Scale { a: a.0, c })
    }

    /// Row lookup: `table` is (vocab, dim), output is (ids.len(), dim).
    pub fn embedding(&mut self, table: VarId, ids: &[usize]) -> Result<VarId, NumericsError> {
        let tt = &self.nodes[table.0].value;
        let (vocab, dim) = tt.as_2d();
        let mut data = Vec::with_capacity(ids.len() * dim);
        for &id in ids {
            if id >= vocab {
                return Err(NumericsError::IndexOutOfRange {
                    op: "embedding",
                    index: id,
                    bound: vocab,
                });
            }
            data.extend_from_slice(&tt.data()[id * dim..(id + 1) * dim]);
        }
        self.push(
            "embedding",
            vec![ids.len(), dim],
            data,
            Op::Embedding {
                table: table.0,
                ids: ids.to_vec(),
            },
        )
    }

    /// Per-row RMS normalization (no gain).
    pub fn rms_norm(&mut self, a: VarId) -> Result<VarId, NumericsError> {
        let ta = &self.nodes[a.0].value;
        let (rows, cols) = ta.as_2d();
        let mut data = Vec::with_capacity(rows * cols);
        let mut inv_rms = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = &ta.data()[r * cols..(r + 1) * cols];
            let ms = row.iter().map(|x| x * x).sum::<f64>() / cols as f64;
            let inv = 1.0 / (ms + RMS_EPS).sqrt();
            inv_rms.push(inv);
            data.extend(row.iter().map(|x| x * inv));
        }
        self.push("rms_norm", ta.shape().to_vec(), data, Op::RmsNorm { a: a.0, inv_rms })
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: VarId) -> Result<VarId, NumericsError> {
        let ta = &self.nodes[a.0].value;
        let data = ta.data().iter().map(|&x| gelu_scalar(x)).collect();
        self.push("gelu", ta.shape().to_vec(), data, Op::Gelu { a: a.0 })
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: VarId) -> Result<VarId, NumericsError> {
        let ta = &self.nodes[a.0].value;
        let (rows, cols) = ta.as_2d();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let row = &ta.data()[r * cols..(r + 1) * cols];
            data.extend(softmax_row(row));
        }
        self.push("softmax", ta.shape().to_vec(), data, Op::Softmax { a: a.0 })
    }

    /// Mean negative log-likelihood of integer targets under the logits,
    /// weighted per position by `mask`. Positions with zero mask contribute
    /// nothing; the result is a scalar.
    pub fn cross_entropy(
        &mut self,
        logits: VarId,
        targets: &[usize],
        mask: &[f64],
    ) -> Result<VarId, NumericsError> {
        let tl = &self.nodes[logits.0].value;
        let (rows, cols) = tl.as_2d();
        if targets.len() != rows || mask.len() != rows {
            return Err(NumericsError::ShapeMismatch {
                op: "cross_entropy",
                lhs: vec![rows, cols],
                rhs: vec![targets.len(), mask.len()],
            });
        }
        let mask_total: f64 = mask.iter().sum();
        if mask_total <= 0.0 {
            return Err(NumericsError::NonFinite { op: "cross_entropy_empty_mask" });
        }
        let mut probs = Vec::with_capacity(rows * cols);
        let mut loss = 0.0;
        for r in 0..rows {
            let t = targets[r];
            if t >= cols {
                return Err(NumericsError::IndexOutOfRange {
                    op: "cross_entropy",
                    index: t,
                    bound: cols,
                });
            }
            let row = &tl.data()[r * cols..(r + 1) * cols];
            let p = softmax_row(row);
            loss -= mask[r] * p[t].max(f64::MIN_POSITIVE).ln();
            probs.extend(p);
        }
        loss /= mask_total;
        self.push(
            "cross_entropy",
            vec![1],
            vec![loss],
            Op::CrossEntropy {
                logits: logits.0,
                targets: targets.to_vec(),
                mask: mask.to_vec(),
                probs,
                mask_total,
            },
        )
    }

    /// L2 norm over the last axis: (rows, cols) -> (rows,).
    pub fn l2_norm(&mut self, a: VarId) -> Result<VarId, NumericsError> {
        let ta = &self.nodes[a.0].value;
        let (rows, cols) = ta.as_2d();
        let data = (0..rows)
            .map(|r| {
                let row = &ta.data()[r * cols..(r + 1) * cols];
                row.iter().map(|x| x * x).sum::<f64>().sqrt()
            })
            .collect();
        self.push("l2_norm", vec![rows], data, Op::L2Norm { a: a.0 })
    }

    /// Sum of all elements -> scalar.
    pub fn sum(&mut self, a: VarId) -> Result<VarId, NumericsError> {
        let ta = &self.nodes[a.0].value;
        let total = ta.data().iter().sum();
        self.push("sum", vec![1], vec![total], Op::Sum { a: a.0 })
    }

    /// Causal multi-head scaled dot-product attention with rotary position
    /// embeddings applied to q and k. All of q, k, v are (T, d_model) with
    /// `d_model = n_heads * head_dim`; positions are 0..T.
    pub fn causal_attention(
        &mut self,
        q: VarId,
        k: VarId,
        v: VarId,
        n_heads: usize,
        rope_base: f64,
    ) -> Result<VarId, NumericsError> {
        let (tq, tk, tv) = (
            &self.nodes[q.0].value,
            &self.nodes[k.0].value,
            &self.nodes[v.0].value,
        );
        let (t_len, d_model) = tq.as_2d();
        if tk.shape() != tq.shape() || tv.shape() != tq.shape() {
            return Err(NumericsError::ShapeMismatch {
                op: "causal_attention",
                lhs: tq.shape().to_vec(),
                rhs: tk.shape().to_vec(),
            });
        }
        if d_model % n_heads != 0 {
            return Err(NumericsError::ShapeMismatch {
                op: "causal_attention_heads",
                lhs: vec![d_model],
                rhs: vec![n_heads],
            });
        }
        let head_dim = d_model / n_heads;

        let mut q_rot = tq.data().to_vec();
        let mut k_rot = tk.data().to_vec();
        for pos in 0..t_len {
            rope_rotate(&mut q_rot[pos * d_model..(pos + 1) * d_model], pos, n_heads, rope_base, false);
            rope_rotate(&mut k_rot[pos * d_model..(pos + 1) * d_model], pos, n_heads, rope_base, false);
        }

        let scale = 1.0 / (head_dim as f64).sqrt();
        let vdat = tv.data();
        let mut probs = vec![0.0; n_heads * t_len * t_len];
        let mut out = vec![0.0; t_len * d_model];
        let mut scores = vec![0.0; t_len];
        for h in 0..n_heads {
            let off = h * head_dim;
            for i in 0..t_len {
                let qi = &q_rot[i * d_model + off..i * d_model + off + head_dim];
                for (j, s) in scores[..=i].iter_mut().enumerate() {
                    let kj = &k_rot[j * d_model + off..j * d_model + off + head_dim];
                    *s = scale * dot(qi, kj);
                }
                let p = softmax_row(&scores[..=i]);
                let prow = &mut probs[(h * t_len + i) * t_len..(h * t_len + i) * t_len + i + 1];
                prow.copy_from_slice(&p);
                let orow = &mut out[i * d_model + off..i * d_model + off + head_dim];
                for (j, &pj) in p.iter().enumerate() {
                    let vj = &vdat[j * d_model + off..j * d_model + off + head_dim];
                    for (o, &vv) in orow.iter_mut().zip(vj) {
                        *o += pj * vv;
                    }
                }
            }
        }
        self.push(
            "causal_attention",
            vec![t_len, d_model],
            out,
            Op::CausalAttention {
                q: q.0,
                k: k.0,
                v: v.0,
                n_heads,
                rope_base,
                q_rot,
                k_rot,
                probs,
            },
        )
    }

    // ── backward ────────────────────────────────────────────────────────

    /// Populates `grad` on every node reachable from `loss`. Errors if the
    /// loss is not scalar or if backward already ran without a reset.
    pub fn backward(&mut self, loss: VarId) -> Result<(), NumericsError> {
        if self.backward_done {
            return Err(NumericsError::BackwardWithoutReset);
        }
        let loss_t = &self.nodes[loss.0].value;
        if !loss_t.is_scalar() {
            return Err(NumericsError::LossNotScalar(loss_t.shape().to_vec()));
        }
        self.backward_done = true;

        let n = self.nodes.len();
        let mut grads: Vec<Vec<f64>> = self.nodes.iter().map(|nd| vec![0.0; nd.value.numel()]).collect();
        grads[loss.0][0] = 1.0;

        // Nodes only reference earlier nodes, so one reverse sweep suffices.
        for idx in (0..n).rev() {
            if idx > loss.0 {
                continue;
            }
            let gout = std::mem::take(&mut grads[idx]);
            match &self.nodes[idx].op {
                Op::Leaf => {
                    grads[idx] = gout;
                    continue;
                }
                Op::MatMul { a, b } => {
                    let (m, k) = self.nodes[*a].value.as_2d();
                    let (_, ncols) = self.nodes[*b].value.as_2d();
                    let adat = self.nodes[*a].value.data();
                    let bdat = self.nodes[*b].value.data();
                    // dA = dC . B^T
                    {
                        let ga = &mut grads[*a];
                        for i in 0..m {
                            let grow = &gout[i * ncols..(i + 1) * ncols];
                            for p in 0..k {
                                ga[i * k + p] += dot(grow, &bdat[p * ncols..(p + 1) * ncols]);
                            }
                        }
                    }
                    // dB = A^T . dC
                    {
                        let gb = &mut grads[*b];
                        for i in 0..m {
                            let grow = &gout[i * ncols..(i + 1) * ncols];
                            for p in 0..k {
                                let av = adat[i * k + p];
                                if av != 0.0 {
                                    let gbrow = &mut gb[p * ncols..(p + 1) * ncols];
                                    for (g, &gc) in gbrow.iter_mut().zip(grow) {
                                        *g += av * gc;
                                    }
                                }
                            }
                        }
                    }
                }
                Op::Add { a, b } => {
                    for (g, &go) in grads[*a].iter_mut().zip(&gout) {
                        *g += go;
                    }
                    for (g, &go) in grads[*b].iter_mut().zip(&gout) {
                        *g += go;
                    }
                }
                Op::Mul { a, b } => {
                    let (a, b) = (*a, *b);
                    let bdat = self.nodes[b].value.data().to_vec();
                    let adat = self.nodes[a].value.data().to_vec();
                    for ((g, &go), &bv) in grads[a].iter_mut().zip(&gout).zip(&bdat) {
                        *g += go * bv;
                    }
                    for ((g, &go), &av) in grads[b].iter_mut().zip(&gout).zip(&adat) {
                        *g += go * av;
                    }
                }
                Op::MulBcast { a, b } => {
                    let (a, b) = (*a, *b);
                    let (rows, cols) = self.nodes[a].value.as_2d();
                    let gain = self.nodes[b].value.data().to_vec();
                    let adat = self.nodes[a].value.data().to_vec();
                    {
                        let ga = &mut grads[a];
                        for r in 0..rows {
                            for c in 0..cols {
                                ga[r * cols + c] += gout[r * cols + c] * gain[c];
                            }
                        }
                    }
                    {
                        let gb = &mut grads[b];
                        for r in 0..rows {
                            for c in 0..cols {
                                gb[c] += gout[r * cols + c] * adat[r * cols + c];
                            }
                        }
                    }
                }
                Op::Scale { a, c } => {
                    let c = *c;
                    for (g, &go) in grads[*a].iter_mut().zip(&gout) {
                        *g += go * c;
                    }
                }
                Op::Embedding { table, ids } => {
                    let dim = self.nodes[*table].value.as_2d().1;
                    let gt = &mut grads[*table];
                    for (row, &id) in ids.iter().enumerate() {
                        let src = &gout[row * dim..(row + 1) * dim];
                        let dst = &mut gt[id * dim..(id + 1) * dim];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                }
                Op::RmsNorm { a, inv_rms } => {
                    let a = *a;
                    let inv_rms = inv_rms.clone();
                    let (rows, cols) = self.nodes[a].value.as_2d();
                    let adat = self.nodes[a].value.data().to_vec();
                    let ga = &mut grads[a];
                    for r in 0..rows {
                        let inv = inv_rms[r];
                        let x = &adat[r * cols..(r + 1) * cols];
                        let go = &gout[r * cols..(r + 1) * cols];
                        let xdot = dot(go, x);
                        let coef = inv * inv * inv * xdot / cols as f64;
                        let grow = &mut ga[r * cols..(r + 1) * cols];
                        for ((g, &goi), &xi) in grow.iter_mut().zip(go).zip(x) {
                            *g += inv * goi - coef * xi;
                        }
                    }
                }
                Op::Gelu { a } => {
                    let a = *a;
                    let adat = self.nodes[a].value.data().to_vec();
                    for ((g, &go), &x) in grads[a].iter_mut().zip(&gout).zip(&adat) {
                        *g += go * gelu_deriv(x);
                    }
                }
                Op::Softmax { a } => {
                    let a = *a;
                    let (rows, cols) = self.nodes[idx].value.as_2d();
                    let y = self.nodes[idx].value.data().to_vec();
                    let ga = &mut grads[a];
                    for r in 0..rows {
                        let yr = &y[r * cols..(r + 1) * cols];
                        let go = &gout[r * cols..(r + 1) * cols];
                        let s = dot(go, yr);
                        let grow = &mut ga[r * cols..(r + 1) * cols];
                        for ((g, &goi), &yi) in grow.iter_mut().zip(go).zip(yr) {
                            *g += yi * (goi - s);
                        }
                    }
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    mask,
                    probs,
                    mask_total,
                } => {
                    let cols = self.nodes[*logits].value.as_2d().1;
                    let gl = &mut grads[*logits];
                    let go = gout[0];
                    for (r, (&t, &m)) in targets.iter().zip(mask.iter()).enumerate() {
                        if m == 0.0 {
                            continue;
                        }
                        let w = go * m / mask_total;
                        let p = &probs[r * cols..(r + 1) * cols];
                        let grow = &mut gl[r * cols..(r + 1) * cols];
                        for (g, &pi) in grow.iter_mut().zip(p) {
                            *g += w * pi;
                        }
                        grow[t] -= w;
                    }
                }
                Op::L2Norm { a } => {
                    let a = *a;
                    let (rows, cols) = self.nodes[a].value.as_2d();
                    let norms = self.nodes[idx].value.data().to_vec();
                    let adat = self.nodes[a].value.data().to_vec();
                    let ga = &mut grads[a];
                    for r in 0..rows {
                        if norms[r] == 0.0 {
                            continue;
                        }
                        let w = gout[r] / norms[r];
                        let x = &adat[r * cols..(r + 1) * cols];
                        let grow = &mut ga[r * cols..(r + 1) * cols];
                        for (g, &xi) in grow.iter_mut().zip(x) {
                            *g += w * xi;
                        }
                    }
                }
                Op::Sum { a } => {
                    let go = gout[0];
                    for g in grads[*a].iter_mut() {
                        *g += go;
                    }
                }
                Op::CausalAttention {
                    q,
                    k,
                    v,
                    n_heads,
                    rope_base,
                    q_rot,
                    k_rot,
                    probs,
                } => {
                    let (q, k, v, n_heads, rope_base) = (*q, *k, *v, *n_heads, *rope_base);
                    let (t_len, d_model) = self.nodes[q].value.as_2d();
                    let head_dim = d_model / n_heads;
                    let scale = 1.0 / (head_dim as f64).sqrt();
                    let vdat = self.nodes[v].value.data().to_vec();
                    let q_rot = q_rot.clone();
                    let k_rot = k_rot.clone();
                    let probs = probs.clone();

                    let mut gq_rot = vec![0.0; t_len * d_model];
                    let mut gk_rot = vec![0.0; t_len * d_model];
                    let mut gv = vec![0.0; t_len * d_model];
                    let mut dp = vec![0.0; t_len];
                    for h in 0..n_heads {
                        let off = h * head_dim;
                        for i in 0..t_len {
                            let go = &gout[i * d_model + off..i * d_model + off + head_dim];
                            let prow = &probs[(h * t_len + i) * t_len..(h * t_len + i) * t_len + i + 1];
                            // dV and dP
                            for (j, &pj) in prow.iter().enumerate() {
                                let vj = &vdat[j * d_model + off..j * d_model + off + head_dim];
                                dp[j] = dot(go, vj);
                                let gvj = &mut gv[j * d_model + off..j * d_model + off + head_dim];
                                for (g, &goi) in gvj.iter_mut().zip(go) {
                                    *g += pj * goi;
                                }
                            }
                            // softmax backward -> dS, then dQ~ and dK~
                            let s = dot(&dp[..=i], prow);
                            let qi = &q_rot[i * d_model + off..i * d_model + off + head_dim];
                            for j in 0..=i {
                                let ds = prow[j] * (dp[j] - s) * scale;
                                if ds == 0.0 {
                                    continue;
                                }
                                let kj = &k_rot[j * d_model + off..j * d_model + off + head_dim];
                                let gqi = &mut gq_rot[i * d_model + off..i * d_model + off + head_dim];
                                for (g, &kv) in gqi.iter_mut().zip(kj) {
                                    *g += ds * kv;
                                }
                                let gkj = &mut gk_rot[j * d_model + off..j * d_model + off + head_dim];
                                for (g, &qv) in gkj.iter_mut().zip(qi) {
                                    *g += ds * qv;
                                }
                            }
                        }
                    }
                    // Undo the rotary embedding: its Jacobian is the inverse rotation.
                    for pos in 0..t_len {
                        rope_rotate(&mut gq_rot[pos * d_model..(pos + 1) * d_model], pos, n_heads, rope_base, true);
                        rope_rotate(&mut gk_rot[pos * d_model..(pos + 1) * d_model], pos, n_heads, rope_base, true);
                    }
                    for (g, &s) in grads[q].iter_mut().zip(&gq_rot) {
                        *g += s;
                    }
                    for (g, &s) in grads[k].iter_mut().zip(&gk_rot) {
                        *g += s;
                    }
                    for (g, &s) in grads[v].iter_mut().zip(&gv) {
                        *g += s;
                    }
                }
            }
            grads[idx] = gout;
        }

        for (node, grad) in self.nodes.iter_mut().zip(grads) {
            node.value.grad = Some(grad);
        }
        Ok(())
    }
}

// ── shared kernels (also used by the tape-free inference path) ──────────

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
    c
}

pub(crate) fn softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = ex.iter().sum();
    ex.into_iter().map(|x| x / total).collect()
}

pub(crate) fn gelu_scalar(x: f64) -> f64 {
    const C: f64 = 0.7978845608028654; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

pub(crate) fn gelu_deriv(x: f64) -> f64 {
    const C: f64 = 0.7978845608028654;
    let u = C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * C * (1.0 + 3.0 * 0.044715 * x * x)
}

/// In-place rotary embedding of one position's row; `inverse` applies the
/// transpose (the backward rotation). Pairs are (2a, 2a+1) within each head.
pub(crate) fn rope_rotate(row: &mut [f64], pos: usize, n_heads: usize, base: f64, inverse: bool) {
    let d_model = row.len();
    let head_dim = d_model / n_heads;
    let sign = if inverse { -1.0 } else { 1.0 };
    for h in 0..n_heads {
        let off = h * head_dim;
        for a in 0..head_dim / 2 {
            let theta = pos as f64 * base.powf(-2.0 * a as f64 / head_dim as f64);
            let (sin, cos) = (sign * theta.sin(), theta.cos());
            let x0 = row[off + 2 * a];
            let x1 = row[off + 2 * a + 1];
            row[off + 2 * a] = x0 * cos - x1 * sin;
            row[off + 2 * a + 1] = x0 * sin + x1 * cos;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_symmetry() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![2], vec![0.0, 0.0]).unwrap());
        let y = tape.softmax(x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = crate::numerics::Rng::new(17, 0);
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::randn(vec![6, 9], 3.0, &mut rng));
        let y = tape.softmax(x).unwrap();
        let (rows, cols) = tape.value(y).as_2d();
        for r in 0..rows {
            let s: f64 = tape.value(y).data()[r * cols..(r + 1) * cols].iter().sum();
            assert!((s - 1.0).abs() <= 1e-12, "row {r} sums to {s}");
        }
    }

    #[test]
    fn matmul_identity() {
        let mut rng = crate::numerics::Rng::new(2, 0);
        let mut tape = Tape::new();
        let eye = tape.leaf(Tensor::new(vec![3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap());
        let a = tape.leaf(Tensor::randn(vec![3, 3], 1.0, &mut rng));
        let out = tape.matmul(eye, a).unwrap();
        assert_eq!(tape.value(out).data(), tape.value(a).data());
    }

    #[test]
    fn matmul_shape_mismatch_reports_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(vec![2, 3]));
        let b = tape.leaf(Tensor::zeros(vec![4, 2]));
        match tape.matmul(a, b) {
            Err(NumericsError::ShapeMismatch { lhs, rhs, .. }) => {
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![4, 2]);
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let mut tape = Tape::new();
        let logits = tape.leaf(Tensor::new(vec![1, 4], vec![0.0; 4]).unwrap());
        let loss = tape.cross_entropy(logits, &[2], &[1.0]).unwrap();
        assert!((tape.value(loss).scalar_value() - 4.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rms_norm_unit_rms() {
        let mut rng = crate::numerics::Rng::new(4, 0);
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::randn(vec![5, 16], 2.5, &mut rng));
        let y = tape.rms_norm(x).unwrap();
        let (rows, cols) = tape.value(y).as_2d();
        for r in 0..rows {
            let row = &tape.value(y).data()[r * cols..(r + 1) * cols];
            let rms = (row.iter().map(|v| v * v).sum::<f64>() / cols as f64).sqrt();
            assert!((rms - 1.0).abs() <= 1e-10, "row {r} rms {rms}");
        }
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![5], vec![1., 2., 3., 4., 5.]).unwrap().with_grad());
        let loss = tape.sum(x).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0; 5]);
    }

    #[test]
    fn backward_of_square_is_2x() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(3.0).with_grad());
        let y = tape.mul(x, x).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[6.0]);
    }

    #[test]
    fn backward_twice_errors_without_reset() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(2.0).with_grad());
        let y = tape.mul(x, x).unwrap();
        tape.backward(y).unwrap();
        assert!(matches!(tape.backward(y), Err(NumericsError::BackwardWithoutReset)));
        tape.reset_grads();
        tape.backward(y).unwrap();
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(vec![3]).with_grad());
        let y = tape.scale(x, 2.0).unwrap();
        assert!(matches!(tape.backward(y), Err(NumericsError::LossNotScalar(_))));
    }

    #[test]
    fn rope_inverse_undoes_rotation() {
        let mut rng = crate::numerics::Rng::new(8, 0);
        let orig: Vec<f64> = (0..16).map(|_| rng.gauss()).collect();
        let mut row = orig.clone();
        rope_rotate(&mut row, 7, 2, 10000.0, false);
        rope_rotate(&mut row, 7, 2, 10000.0, true);
        for (a, b) in row.iter().zip(&orig) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_is_causal() {
        // Perturbing a later key/value row must not change earlier outputs.
        let mut rng = crate::numerics::Rng::new(12, 0);
        let q = Tensor::randn(vec![4, 8], 1.0, &mut rng);
        let k = Tensor::randn(vec![4, 8], 1.0, &mut rng);
        let v = Tensor::randn(vec![4, 8], 1.0, &mut rng);

        let run = |q: &Tensor, k: &Tensor, v: &Tensor| {
            let mut tape = Tape::new();
            let (qi, ki, vi) = (tape.leaf(q.clone()), tape.leaf(k.clone()), tape.leaf(v.clone()));
            let out = tape.causal_attention(qi, ki, vi, 2, 10000.0).unwrap();
            tape.value(out).data().to_vec()
        };
        let base = run(&q, &k, &v);
        let mut k2 = k.clone();
        k2.data_mut()[3 * 8] += 10.0;
        let mut v2 = v.clone();
        v2.data_mut()[3 * 8 + 1] -= 5.0;
        let bumped = run(&q, &k2, &v2);
        assert_eq!(&base[..3 * 8], &bumped[..3 * 8]);
        assert_ne!(&base[3 * 8..], &bumped[3 * 8..]);
    }
}
