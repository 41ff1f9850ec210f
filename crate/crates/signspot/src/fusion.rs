//! Dense double-precision implementations of the fusion equations: scaled
//! dot-product attention, multi-head self/cross attention, gated stream
//! combination, prior-weighted attention maps, multi-stream decoder context,
//! pose-heatmap and expected-LER losses, plus analytic backward passes and a
//! central finite-difference gradient checker.
//!
//! Only forward passes, loss values, and gradients are provided; there is no
//! training loop.

use crate::{Error, Result};

/// Dense row-major matrix of finite doubles.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2D {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2D {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::ShapeMismatch("tensor dimensions must be positive".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "data length {} != {rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor data".into()));
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

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.set(i, i, 1.0);
        }
        t
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("tensor rows".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn same_shape(&self, other: &Tensor2D) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn matmul(&self, other: &Tensor2D) -> Result<Tensor2D> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Tensor2D::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Tensor2D {
        let mut out = Tensor2D::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor2D {
        Tensor2D {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor2D, f: impl Fn(f64, f64) -> f64) -> Result<Tensor2D> {
        if !self.same_shape(other) {
            return Err(Error::ShapeMismatch(format!(
                "elementwise op on {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Tensor2D {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor2D) -> Result<Tensor2D> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor2D) -> Result<Tensor2D> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Tensor2D) -> Result<Tensor2D> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Tensor2D {
        self.map(|v| v * s)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Frobenius inner product: sum of the elementwise product.
    pub fn inner(&self, other: &Tensor2D) -> Result<f64> {
        Ok(self.hadamard(other)?.sum())
    }

    pub fn concat_cols(parts: &[Tensor2D]) -> Result<Tensor2D> {
        if parts.is_empty() {
            return Err(Error::EmptyInput("concat".into()));
        }
        let rows = parts[0].rows;
        if parts.iter().any(|p| p.rows != rows) {
            return Err(Error::ShapeMismatch("concat row counts differ".into()));
        }
        let cols: usize = parts.iter().map(|p| p.cols).sum();
        let mut out = Tensor2D::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for p in parts {
                out.data[r * cols + offset..r * cols + offset + p.cols]
                    .copy_from_slice(p.row(r));
                offset += p.cols;
            }
        }
        Ok(out)
    }

    pub fn slice_cols(&self, start: usize, end: usize) -> Tensor2D {
        assert!(start < end && end <= self.cols);
        let mut out = Tensor2D::zeros(self.rows, end - start);
        for r in 0..self.rows {
            out.data[r * (end - start)..(r + 1) * (end - start)]
                .copy_from_slice(&self.row(r)[start..end]);
        }
        out
    }
}

fn row_softmax(t: &Tensor2D) -> Tensor2D {
    let mut out = t.clone();
    for r in 0..t.rows {
        let row = &mut out.data[r * t.cols..(r + 1) * t.cols];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `softmax(Q K^T / sqrt(d)) V` with the softmax taken row-wise.
pub fn attention(q: &Tensor2D, k: &Tensor2D, v: &Tensor2D) -> Result<Tensor2D> {
    let (a, _) = attention_with_weights(q, k, v)?;
    Ok(a)
}

/// Attention output together with the softmax weight matrix.
pub fn attention_with_weights(
    q: &Tensor2D,
    k: &Tensor2D,
    v: &Tensor2D,
) -> Result<(Tensor2D, Tensor2D)> {
    if q.cols != k.cols {
        return Err(Error::ShapeMismatch(format!(
            "query dim {} != key dim {}",
            q.cols, k.cols
        )));
    }
    if k.rows != v.rows {
        return Err(Error::ShapeMismatch(format!(
            "{} keys but {} values",
            k.rows, v.rows
        )));
    }
    let scale = 1.0 / (q.cols as f64).sqrt();
    let logits = q.matmul(&k.transpose())?.scale(scale);
    let weights = row_softmax(&logits);
    Ok((weights.matmul(v)?, weights))
}

/// Gradients of a scalar loss through [`attention`] given `d_out = dL/d(output)`.
pub fn attention_backward(
    q: &Tensor2D,
    k: &Tensor2D,
    v: &Tensor2D,
    d_out: &Tensor2D,
) -> Result<(Tensor2D, Tensor2D, Tensor2D)> {
    let (_, weights) = attention_with_weights(q, k, v)?;
    let scale = 1.0 / (q.cols as f64).sqrt();
    let d_v = weights.transpose().matmul(d_out)?;
    let d_weights = d_out.matmul(&v.transpose())?;
    // Row-wise softmax backward: dS = A ⊙ (dA - rowsum(dA ⊙ A)).
    let mut d_logits = Tensor2D::zeros(weights.rows, weights.cols);
    for r in 0..weights.rows {
        let dot: f64 = (0..weights.cols)
            .map(|c| d_weights.get(r, c) * weights.get(r, c))
            .sum();
        for c in 0..weights.cols {
            d_logits.set(r, c, weights.get(r, c) * (d_weights.get(r, c) - dot));
        }
    }
    let d_q = d_logits.matmul(k)?.scale(scale);
    let d_k = d_logits.transpose().matmul(q)?.scale(scale);
    Ok((d_q, d_k, d_v))
}

/// Learnable projections for multi-head attention; one Q/K/V projection per
/// head plus the output projection.
#[derive(Debug, Clone)]
pub struct MultiHeadParams {
    pub w_q: Vec<Tensor2D>,
    pub w_k: Vec<Tensor2D>,
    pub w_v: Vec<Tensor2D>,
    pub w_o: Tensor2D,
}

impl MultiHeadParams {
    pub fn heads(&self) -> usize {
        self.w_q.len()
    }

    /// Identity projections: `h` heads slicing a `d`-wide feature into equal
    /// parts. Requires `d` divisible by `h`.
    pub fn identity(d: usize, h: usize) -> Result<Self> {
        if h == 0 || !d.is_multiple_of(h) {
            return Err(Error::InvalidConfig(format!(
                "feature dim {d} not divisible by {h} heads"
            )));
        }
        let dh = d / h;
        let slice_proj = |head: usize| {
            let mut w = Tensor2D::zeros(d, dh);
            for j in 0..dh {
                w.set(head * dh + j, j, 1.0);
            }
            w
        };
        let w_q: Vec<_> = (0..h).map(slice_proj).collect();
        Ok(Self {
            w_k: w_q.clone(),
            w_v: w_q.clone(),
            w_q,
            w_o: Tensor2D::identity(d),
        })
    }

    fn validate(&self) -> Result<()> {
        let h = self.heads();
        if h == 0 || self.w_k.len() != h || self.w_v.len() != h {
            return Err(Error::ShapeMismatch(
                "per-head projection lists must be non-empty and equal length".into(),
            ));
        }
        for i in 1..h {
            if !self.w_q[i].same_shape(&self.w_q[0])
                || !self.w_k[i].same_shape(&self.w_k[0])
                || !self.w_v[i].same_shape(&self.w_v[0])
            {
                return Err(Error::ShapeMismatch("heads have differing shapes".into()));
            }
        }
        if self.w_q[0].cols != self.w_k[0].cols {
            return Err(Error::ShapeMismatch(
                "query and key head widths differ".into(),
            ));
        }
        if self.w_o.rows != h * self.w_v[0].cols {
            return Err(Error::ShapeMismatch(format!(
                "output projection expects {} rows, got {}",
                h * self.w_v[0].cols,
                self.w_o.rows
            )));
        }
        Ok(())
    }
}

/// Multi-head attention: per-head attention over projected inputs, heads
/// concatenated and passed through the output projection.
pub fn multihead(
    q: &Tensor2D,
    k: &Tensor2D,
    v: &Tensor2D,
    params: &MultiHeadParams,
) -> Result<Tensor2D> {
    params.validate()?;
    let heads: Vec<Tensor2D> = (0..params.heads())
        .map(|i| {
            attention(
                &q.matmul(&params.w_q[i])?,
                &k.matmul(&params.w_k[i])?,
                &v.matmul(&params.w_v[i])?,
            )
        })
        .collect::<Result<_>>()?;
    Tensor2D::concat_cols(&heads)?.matmul(&params.w_o)
}

/// Multi-head self-attention: query, key and value are the same sequence.
pub fn msa(x: &Tensor2D, params: &MultiHeadParams) -> Result<Tensor2D> {
    multihead(x, x, x, params)
}

/// Multi-head cross-attention: query from one modality, key/value from another.
pub fn mca(x: &Tensor2D, y: &Tensor2D, params: &MultiHeadParams) -> Result<Tensor2D> {
    multihead(x, y, y, params)
}

/// Gradients of a scalar loss through [`multihead`].
#[derive(Debug, Clone)]
pub struct MultiHeadGrads {
    pub w_q: Vec<Tensor2D>,
    pub w_k: Vec<Tensor2D>,
    pub w_v: Vec<Tensor2D>,
    pub w_o: Tensor2D,
    pub q: Tensor2D,
    pub k: Tensor2D,
    pub v: Tensor2D,
}

pub fn multihead_backward(
    q: &Tensor2D,
    k: &Tensor2D,
    v: &Tensor2D,
    params: &MultiHeadParams,
    d_out: &Tensor2D,
) -> Result<MultiHeadGrads> {
    params.validate()?;
    let h = params.heads();
    let projected: Vec<(Tensor2D, Tensor2D, Tensor2D)> = (0..h)
        .map(|i| {
            Ok((
                q.matmul(&params.w_q[i])?,
                k.matmul(&params.w_k[i])?,
                v.matmul(&params.w_v[i])?,
            ))
        })
        .collect::<Result<_>>()?;
    let heads: Vec<Tensor2D> = projected
        .iter()
        .map(|(qi, ki, vi)| attention(qi, ki, vi))
        .collect::<Result<_>>()?;
    let concat = Tensor2D::concat_cols(&heads)?;

    let d_concat = d_out.matmul(&params.w_o.transpose())?;
    let d_w_o = concat.transpose().matmul(d_out)?;

    let dh = params.w_v[0].cols;
    let mut grads = MultiHeadGrads {
        w_q: Vec::with_capacity(h),
        w_k: Vec::with_capacity(h),
        w_v: Vec::with_capacity(h),
        w_o: d_w_o,
        q: Tensor2D::zeros(q.rows, q.cols),
        k: Tensor2D::zeros(k.rows, k.cols),
        v: Tensor2D::zeros(v.rows, v.cols),
    };
    for (i, (qi, ki, vi)) in projected.iter().enumerate() {
        let d_head = d_concat.slice_cols(i * dh, (i + 1) * dh);
        let (d_qi, d_ki, d_vi) = attention_backward(qi, ki, vi, &d_head)?;
        grads.w_q.push(q.transpose().matmul(&d_qi)?);
        grads.w_k.push(k.transpose().matmul(&d_ki)?);
        grads.w_v.push(v.transpose().matmul(&d_vi)?);
        grads.q = grads.q.add(&d_qi.matmul(&params.w_q[i].transpose())?)?;
        grads.k = grads.k.add(&d_ki.matmul(&params.w_k[i].transpose())?)?;
        grads.v = grads.v.add(&d_vi.matmul(&params.w_v[i].transpose())?)?;
    }
    Ok(grads)
}

/// Gate weights: `R = sigmoid(Y_s W_s + Y_c W_c + b)`, bias broadcast across
/// rows.
#[derive(Debug, Clone)]
pub struct GateParams {
    pub w_s: Tensor2D,
    pub w_c: Tensor2D,
    pub b: Tensor2D,
}

impl GateParams {
    fn validate(&self, d: usize) -> Result<()> {
        if self.w_s.rows != d
            || self.w_s.cols != d
            || !self.w_s.same_shape(&self.w_c)
            || self.b.rows != 1
            || self.b.cols != d
        {
            return Err(Error::ShapeMismatch(format!(
                "gate parameters incompatible with feature dim {d}"
            )));
        }
        Ok(())
    }
}

fn gate_preactivation(ys: &Tensor2D, yc: &Tensor2D, params: &GateParams) -> Result<Tensor2D> {
    let mut z = ys.matmul(&params.w_s)?.add(&yc.matmul(&params.w_c)?)?;
    for r in 0..z.rows() {
        for c in 0..z.cols() {
            let v = z.get(r, c) + params.b.get(0, c);
            z.set(r, c, v);
        }
    }
    Ok(z)
}

/// Gated combination of self-attended and cross-attended features:
/// `Y_s ⊙ R + Y_c ⊙ (1 - R)` with `R = sigmoid(Y_s W_s + Y_c W_c + b)`.
pub fn gate(ys: &Tensor2D, yc: &Tensor2D, params: &GateParams) -> Result<Tensor2D> {
    if !ys.same_shape(yc) {
        return Err(Error::ShapeMismatch("gate inputs differ in shape".into()));
    }
    params.validate(ys.cols())?;
    let r = gate_preactivation(ys, yc, params)?.map(sigmoid);
    let one_minus = r.map(|v| 1.0 - v);
    ys.hadamard(&r)?.add(&yc.hadamard(&one_minus)?)
}

/// Gradients of a scalar loss through [`gate`].
#[derive(Debug, Clone)]
pub struct GateGrads {
    pub w_s: Tensor2D,
    pub w_c: Tensor2D,
    pub b: Tensor2D,
    pub ys: Tensor2D,
    pub yc: Tensor2D,
}

pub fn gate_backward(
    ys: &Tensor2D,
    yc: &Tensor2D,
    params: &GateParams,
    d_out: &Tensor2D,
) -> Result<GateGrads> {
    if !ys.same_shape(yc) || !ys.same_shape(d_out) {
        return Err(Error::ShapeMismatch("gate backward shapes differ".into()));
    }
    params.validate(ys.cols())?;
    let r = gate_preactivation(ys, yc, params)?.map(sigmoid);
    let d_r = d_out.hadamard(&ys.sub(yc)?)?;
    let d_z = d_r.hadamard(&r.zip_map(&r, |a, _| a * (1.0 - a))?)?;
    let mut d_b = Tensor2D::zeros(1, ys.cols());
    for c in 0..ys.cols() {
        let sum: f64 = (0..ys.rows()).map(|row| d_z.get(row, c)).sum();
        d_b.set(0, c, sum);
    }
    let d_ys = d_out
        .hadamard(&r)?
        .add(&d_z.matmul(&params.w_s.transpose())?)?;
    let d_yc = d_out
        .hadamard(&r.map(|v| 1.0 - v))?
        .add(&d_z.matmul(&params.w_c.transpose())?)?;
    Ok(GateGrads {
        w_s: ys.transpose().matmul(&d_z)?,
        w_c: yc.transpose().matmul(&d_z)?,
        b: d_b,
        ys: d_ys,
        yc: d_yc,
    })
}

fn global_softmax(logits: &Tensor2D) -> Tensor2D {
    let max = logits.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps = logits.map(|v| (v - max).exp());
    let sum = exps.sum();
    exps.scale(1.0 / sum)
}

/// Prior-weighted attention map: `beta = softmax(logits)` over all cells,
/// `A = beta ⊙ M^alpha / sum(beta ⊙ M^alpha)`. The prior `M` must be
/// nonnegative; an all-zero weighted sum is an error.
pub fn prior_attention(beta_logits: &Tensor2D, m: &Tensor2D, alpha: f64) -> Result<Tensor2D> {
    if !beta_logits.same_shape(m) {
        return Err(Error::ShapeMismatch(
            "attention logits and prior differ in shape".into(),
        ));
    }
    if m.data().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput("prior map must be nonnegative".into()));
    }
    let beta = global_softmax(beta_logits);
    let weighted = beta.zip_map(m, |b, p| b * p.powf(alpha))?;
    let total = weighted.sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput(
            "prior-weighted attention sums to zero".into(),
        ));
    }
    Ok(weighted.scale(1.0 / total))
}

/// Gradient of a scalar loss through [`prior_attention`] with respect to the
/// attention logits.
pub fn prior_attention_backward(
    beta_logits: &Tensor2D,
    m: &Tensor2D,
    alpha: f64,
    d_out: &Tensor2D,
) -> Result<Tensor2D> {
    let out = prior_attention(beta_logits, m, alpha)?;
    let beta = global_softmax(beta_logits);
    let m_alpha = m.map(|p| p.powf(alpha));
    let total = beta.hadamard(&m_alpha)?.sum();
    // dL/du_i = (d_out_i - sum_j d_out_j A_j) / total, u = beta ⊙ M^alpha.
    let inner = d_out.hadamard(&out)?.sum();
    let d_u = d_out.map(|v| (v - inner) / total);
    let d_beta = d_u.hadamard(&m_alpha)?;
    // Global softmax backward.
    let dot = d_beta.hadamard(&beta)?.sum();
    beta.zip_map(&d_beta, |b, db| b * (db - dot))
}

/// The three encoder modalities, in their fixed concatenation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Modality {
    Global,
    Mouth,
    Hand,
}

/// One modality's encoder output with its cross-attention projections.
#[derive(Debug, Clone)]
pub struct ModalityStream {
    pub modality: Modality,
    pub features: Tensor2D,
    pub params: MultiHeadParams,
}

/// Per-modality cross-attention contexts concatenated in global, mouth, hand
/// order; the output width is the sum of the per-modality output widths.
pub fn multistream_context(
    decoder_state: &Tensor2D,
    streams: &[ModalityStream],
) -> Result<Tensor2D> {
    if streams.is_empty() {
        return Err(Error::EmptyInput("modality streams".into()));
    }
    let mut ordered: Vec<&ModalityStream> = streams.iter().collect();
    ordered.sort_by_key(|s| s.modality);
    for pair in ordered.windows(2) {
        if pair[0].modality == pair[1].modality {
            return Err(Error::InvalidInput(format!(
                "duplicate modality {:?}",
                pair[0].modality
            )));
        }
    }
    let contexts: Vec<Tensor2D> = ordered
        .iter()
        .map(|s| mca(decoder_state, &s.features, &s.params))
        .collect::<Result<_>>()?;
    Tensor2D::concat_cols(&contexts)
}

/// Confidence-gated squared heatmap error:
/// `sum_i ||pred_i - pseudo_i||^2 * 1[conf_i > tau]`.
pub fn pose_heatmap_loss(
    pred: &[Tensor2D],
    pseudo: &[Tensor2D],
    conf: &[f64],
    tau: f64,
) -> Result<f64> {
    if pred.len() != pseudo.len() || pred.len() != conf.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted maps, {} pseudo maps, {} confidences",
            pred.len(),
            pseudo.len(),
            conf.len()
        )));
    }
    let mut loss = 0.0;
    for ((p, q), &c) in pred.iter().zip(pseudo).zip(conf) {
        if !p.same_shape(q) {
            return Err(Error::ShapeMismatch("heatmap shapes differ".into()));
        }
        if c > tau {
            loss += p.sub(q)?.map(|v| v * v).sum();
        }
    }
    Ok(loss)
}

/// Gradient of [`pose_heatmap_loss`] with respect to the predicted maps.
pub fn pose_heatmap_loss_grad(
    pred: &[Tensor2D],
    pseudo: &[Tensor2D],
    conf: &[f64],
    tau: f64,
) -> Result<Vec<Tensor2D>> {
    if pred.len() != pseudo.len() || pred.len() != conf.len() {
        return Err(Error::ShapeMismatch("heatmap list lengths differ".into()));
    }
    pred.iter()
        .zip(pseudo)
        .zip(conf)
        .map(|((p, q), &c)| {
            if c > tau {
                p.sub(q).map(|d| d.scale(2.0))
            } else {
                Ok(Tensor2D::zeros(p.rows(), p.cols()))
            }
        })
        .collect()
}

/// Multi-stream recognizer loss: the joint-stream CTC loss plus weighted
/// auxiliary hand and mouth CTC losses, each the negative marginal log
/// likelihood of the labels under that stream's posteriorgram.
pub fn multistream_ctc_loss(
    joint: &crate::ctc::Posteriorgram,
    hand: &crate::ctc::Posteriorgram,
    mouth: &crate::ctc::Posteriorgram,
    labels: &[String],
    lambda_hand: f64,
    lambda_mouth: f64,
) -> Result<f64> {
    let nll = |post: &crate::ctc::Posteriorgram| -> Result<f64> {
        Ok(-crate::ctc::sequence_log_prob(post, labels)?.log_prob)
    };
    Ok(nll(joint)? + lambda_hand * nll(hand)? + lambda_mouth * nll(mouth)?)
}

/// Expected negative letter accuracy over proposals with normalized scores
/// `p_i = f_i / sum f`, plus the score-function gradient coefficients
/// `-p_i * Acc_i` (each pairs with `∇ log p_i` in the REINFORCE estimate).
pub fn expected_ler_loss(scores: &[f64], accuracies: &[f64]) -> Result<(f64, Vec<f64>)> {
    if scores.len() != accuracies.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores but {} accuracies",
            scores.len(),
            accuracies.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput("proposal scores".into()));
    }
    if scores.iter().any(|&f| !f.is_finite() || f < 0.0) {
        return Err(Error::InvalidInput("proposal scores must be >= 0".into()));
    }
    let total: f64 = scores.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("all proposal scores are zero".into()));
    }
    let mut loss = 0.0;
    let coefficients = scores
        .iter()
        .zip(accuracies)
        .map(|(&f, &acc)| {
            let term = -(f / total) * acc;
            loss += term;
            term
        })
        .collect();
    Ok((loss, coefficients))
}

/// Result of comparing an analytic gradient against central differences.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_coordinate: usize,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// Central-difference check: perturbs each coordinate of `theta` by
/// `±epsilon` and compares `(f(+) - f(-)) / 2ε` with the analytic gradient.
/// Relative error uses `max(|numeric|, |analytic|, 1e-6)` as denominator.
pub fn finite_diff_check(
    f: &mut dyn FnMut(&[f64]) -> f64,
    theta: &[f64],
    analytic: &[f64],
    epsilon: f64,
) -> GradCheck {
    assert_eq!(theta.len(), analytic.len());
    let mut point = theta.to_vec();
    let mut max_rel_error: f64 = 0.0;
    let mut worst_coordinate = 0;
    for i in 0..theta.len() {
        point[i] = theta[i] + epsilon;
        let plus = f(&point);
        point[i] = theta[i] - epsilon;
        let minus = f(&point);
        point[i] = theta[i];
        let numeric = (plus - minus) / (2.0 * epsilon);
        let denom = numeric.abs().max(analytic[i].abs()).max(1e-6);
        let rel = (numeric - analytic[i]).abs() / denom;
        if rel > max_rel_error {
            max_rel_error = rel;
            worst_coordinate = i;
        }
    }
    GradCheck {
        max_rel_error,
        worst_coordinate,
    }
}

pub mod checks {
    //! Randomized gradient checks for every differentiable fusion operation,
    //! shared by the test suite and the `fusion-check` CLI command.

    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[derive(Debug, Clone)]
    pub struct FamilyCheck {
        pub name: &'static str,
        pub max_rel_error: f64,
    }

    fn random_tensor(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor2D {
        Tensor2D::new(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn unflatten(theta: &[f64], shapes: &[(usize, usize)]) -> Vec<Tensor2D> {
        let mut out = Vec::with_capacity(shapes.len());
        let mut offset = 0;
        for &(r, c) in shapes {
            out.push(Tensor2D::new(r, c, theta[offset..offset + r * c].to_vec()).unwrap());
            offset += r * c;
        }
        out
    }

    fn flatten(tensors: &[&Tensor2D]) -> Vec<f64> {
        tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    fn check_attention(rng: &mut impl Rng, eps: f64) -> f64 {
        let (tq, tk, d, dv) = (
            rng.random_range(1..4),
            rng.random_range(1..4),
            rng.random_range(2..5),
            rng.random_range(1..4),
        );
        let q = random_tensor(rng, tq, d);
        let k = random_tensor(rng, tk, d);
        let v = random_tensor(rng, tk, dv);
        let g = random_tensor(rng, tq, dv);
        let shapes = [(tq, d), (tk, d), (tk, dv)];
        let theta = flatten(&[&q, &k, &v]);
        let (dq, dk, dvv) = attention_backward(&q, &k, &v, &g).unwrap();
        let analytic = flatten(&[&dq, &dk, &dvv]);
        let mut f = |t: &[f64]| {
            let parts = unflatten(t, &shapes);
            attention(&parts[0], &parts[1], &parts[2])
                .unwrap()
                .inner(&g)
                .unwrap()
        };
        finite_diff_check(&mut f, &theta, &analytic, eps).max_rel_error
    }

    fn check_multihead(rng: &mut impl Rng, eps: f64) -> f64 {
        let h = rng.random_range(1..3);
        let dh = rng.random_range(1..3);
        let d = rng.random_range(2..5);
        let d_out = rng.random_range(1..4);
        let (tq, tk) = (rng.random_range(1..4), rng.random_range(1..4));
        let q = random_tensor(rng, tq, d);
        let k = random_tensor(rng, tk, d);
        let v = random_tensor(rng, tk, d);
        let params = MultiHeadParams {
            w_q: (0..h).map(|_| random_tensor(rng, d, dh)).collect(),
            w_k: (0..h).map(|_| random_tensor(rng, d, dh)).collect(),
            w_v: (0..h).map(|_| random_tensor(rng, d, dh)).collect(),
            w_o: random_tensor(rng, h * dh, d_out),
        };
        let g = random_tensor(rng, tq, d_out);

        let mut shapes = Vec::new();
        for _ in 0..3 * h {
            shapes.push((d, dh));
        }
        shapes.push((h * dh, d_out));
        let all: Vec<&Tensor2D> = params
            .w_q
            .iter()
            .chain(&params.w_k)
            .chain(&params.w_v)
            .chain(std::iter::once(&params.w_o))
            .collect();
        let theta = flatten(&all);
        let grads = multihead_backward(&q, &k, &v, &params, &g).unwrap();
        let grad_list: Vec<&Tensor2D> = grads
            .w_q
            .iter()
            .chain(&grads.w_k)
            .chain(&grads.w_v)
            .chain(std::iter::once(&grads.w_o))
            .collect();
        let analytic = flatten(&grad_list);
        let mut f = |t: &[f64]| {
            let parts = unflatten(t, &shapes);
            let p = MultiHeadParams {
                w_q: parts[0..h].to_vec(),
                w_k: parts[h..2 * h].to_vec(),
                w_v: parts[2 * h..3 * h].to_vec(),
                w_o: parts[3 * h].clone(),
            };
            multihead(&q, &k, &v, &p).unwrap().inner(&g).unwrap()
        };
        finite_diff_check(&mut f, &theta, &analytic, eps).max_rel_error
    }

    fn check_gate(rng: &mut impl Rng, eps: f64) -> f64 {
        let t = rng.random_range(1..4);
        let d = rng.random_range(1..5);
        let ys = random_tensor(rng, t, d);
        let yc = random_tensor(rng, t, d);
        let params = GateParams {
            w_s: random_tensor(rng, d, d),
            w_c: random_tensor(rng, d, d),
            b: random_tensor(rng, 1, d),
        };
        let g = random_tensor(rng, t, d);
        let shapes = [(d, d), (d, d), (1, d)];
        let theta = flatten(&[&params.w_s, &params.w_c, &params.b]);
        let grads = gate_backward(&ys, &yc, &params, &g).unwrap();
        let analytic = flatten(&[&grads.w_s, &grads.w_c, &grads.b]);
        let mut f = |t: &[f64]| {
            let parts = unflatten(t, &shapes);
            let p = GateParams {
                w_s: parts[0].clone(),
                w_c: parts[1].clone(),
                b: parts[2].clone(),
            };
            gate(&ys, &yc, &p).unwrap().inner(&g).unwrap()
        };
        finite_diff_check(&mut f, &theta, &analytic, eps).max_rel_error
    }

    fn check_prior_attention(rng: &mut impl Rng, eps: f64) -> f64 {
        let rows = rng.random_range(1..4);
        let cols = rng.random_range(1..4);
        let logits = random_tensor(rng, rows, cols);
        let m = random_tensor(rng, rows, cols).map(|v| v.abs() + 0.1);
        let alpha = rng.random_range(0.0..2.0);
        let g = random_tensor(rng, rows, cols);
        let theta = logits.data().to_vec();
        let analytic = prior_attention_backward(&logits, &m, alpha, &g)
            .unwrap()
            .data()
            .to_vec();
        let mut f = |t: &[f64]| {
            let l = Tensor2D::new(rows, cols, t.to_vec()).unwrap();
            prior_attention(&l, &m, alpha).unwrap().inner(&g).unwrap()
        };
        finite_diff_check(&mut f, &theta, &analytic, eps).max_rel_error
    }

    fn check_pose_loss(rng: &mut impl Rng, eps: f64) -> f64 {
        let n = rng.random_range(1..4);
        let rows = rng.random_range(1..3);
        let cols = rng.random_range(1..4);
        let tau = 0.5;
        let pred: Vec<Tensor2D> = (0..n).map(|_| random_tensor(rng, rows, cols)).collect();
        let pseudo: Vec<Tensor2D> = (0..n).map(|_| random_tensor(rng, rows, cols)).collect();
        // Keep confidences away from tau so the indicator is locally constant.
        let conf: Vec<f64> = (0..n)
            .map(|_| if rng.random::<bool>() { 0.9 } else { 0.1 })
            .collect();
        let shapes: Vec<(usize, usize)> = (0..n).map(|_| (rows, cols)).collect();
        let refs: Vec<&Tensor2D> = pred.iter().collect();
        let theta = flatten(&refs);
        let grad = pose_heatmap_loss_grad(&pred, &pseudo, &conf, tau).unwrap();
        let grad_refs: Vec<&Tensor2D> = grad.iter().collect();
        let analytic = flatten(&grad_refs);
        let mut f = |t: &[f64]| {
            let parts = unflatten(t, &shapes);
            pose_heatmap_loss(&parts, &pseudo, &conf, tau).unwrap()
        };
        finite_diff_check(&mut f, &theta, &analytic, eps).max_rel_error
    }

    /// Runs `instances` random gradient checks per operation family and
    /// reports the worst relative error seen in each.
    pub fn standard_gradient_checks(seed: u64, instances: usize, eps: f64) -> Vec<FamilyCheck> {
        type CheckFn = fn(&mut ChaCha8Rng, f64) -> f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let families: [(&'static str, CheckFn); 5] = [
            ("attention", |r, e| check_attention(r, e)),
            ("multihead", |r, e| check_multihead(r, e)),
            ("gate", |r, e| check_gate(r, e)),
            ("prior_attention", |r, e| check_prior_attention(r, e)),
            ("pose_heatmap_loss", |r, e| check_pose_loss(r, e)),
        ];
        families
            .iter()
            .map(|(name, check)| {
                let mut worst: f64 = 0.0;
                for _ in 0..instances {
                    worst = worst.max(check(&mut rng, eps));
                }
                FamilyCheck {
                    name,
                    max_rel_error: worst,
                }
            })
            .collect()
    }
}
