//! The recurrent hazard network.
//!
//! Each sample is unrolled over its intervals: the input at step `l` is the
//! sample's feature embedding concatenated with the normalized time channel
//! `l / L`, fed through a single-layer LSTM, and squashed by a sigmoid head
//! into the conditional hazard `h_l`. The forward pass caches every
//! intermediate so [`backward`] can run exact reverse-mode differentiation
//! through the recurrence.
//!
//! Gate layout in all `4 * d_hid` tensors is `[input, forget, cell, output]`.

use crate::error::{Error, Result};
use crate::exec;
use crate::sample::{Dataset, Features};
use crate::survival::{
    self, HazardSequence, SurvivalCurve, HAZARD_FLOOR,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
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

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| dot(self.row(r), x))
            .collect()
    }

    /// `y = A^T x`.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            let xr = x[r];
            for (yc, a) in y.iter_mut().zip(row) {
                *yc += xr * a;
            }
        }
        y
    }

    /// Rank-1 accumulate `A += u v^T`.
    pub fn add_outer(&mut self, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (r, &ur) in u.iter().enumerate() {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (a, &vc) in row.iter_mut().zip(v) {
                *a += ur * vc;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// All trainable tensors of the hazard network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Feature embedding, `feature_dim x d_emb`.
    pub embedding: Matrix,
    /// LSTM input weights, `4*d_hid x d_in` with `d_in = d_emb + 1`.
    pub w_input: Matrix,
    /// LSTM recurrent weights, `4*d_hid x d_hid`.
    pub w_recurrent: Matrix,
    /// LSTM gate biases, `4*d_hid`.
    pub bias: Vec<f64>,
    /// Hazard head weights, `d_hid`.
    pub head_weight: Vec<f64>,
    /// Hazard head bias.
    pub head_bias: f64,
    pub feature_dim: usize,
    pub d_emb: usize,
    pub d_hid: usize,
}

impl ModelParams {
    /// Input width of the LSTM: embedding plus the time channel.
    pub fn d_in(&self) -> usize {
        self.d_emb + 1
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            embedding: Matrix::zeros(self.feature_dim, self.d_emb),
            w_input: Matrix::zeros(4 * self.d_hid, self.d_in()),
            w_recurrent: Matrix::zeros(4 * self.d_hid, self.d_hid),
            bias: vec![0.0; 4 * self.d_hid],
            head_weight: vec![0.0; self.d_hid],
            head_bias: 0.0,
            feature_dim: self.feature_dim,
            d_emb: self.d_emb,
            d_hid: self.d_hid,
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.embedding.data.len()
            + self.w_input.data.len()
            + self.w_recurrent.data.len()
            + self.bias.len()
            + self.head_weight.len()
            + 1
    }

    /// Applies `f` to every parameter of `self` paired with the matching
    /// parameter of `other`. Walk order is fixed, so reductions built on top
    /// are deterministic.
    pub fn zip_apply(&mut self, other: &Self, mut f: impl FnMut(&mut f64, f64)) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.embedding.data.iter_mut().zip(&other.embedding.data) {
            f(a, *b);
        }
        for (a, b) in self.w_input.data.iter_mut().zip(&other.w_input.data) {
            f(a, *b);
        }
        for (a, b) in self
            .w_recurrent
            .data
            .iter_mut()
            .zip(&other.w_recurrent.data)
        {
            f(a, *b);
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            f(a, *b);
        }
        for (a, b) in self.head_weight.iter_mut().zip(&other.head_weight) {
            f(a, *b);
        }
        f(&mut self.head_bias, other.head_bias);
    }

    /// Three-way walk: `f(&mut self[i], b[i], c[i])` over every parameter.
    pub fn zip2_apply(&mut self, b: &Self, c: &Self, mut f: impl FnMut(&mut f64, f64, f64)) {
        debug_assert!(self.same_shape(b) && self.same_shape(c));
        for ((a, &vb), &vc) in self
            .embedding
            .data
            .iter_mut()
            .zip(&b.embedding.data)
            .zip(&c.embedding.data)
        {
            f(a, vb, vc);
        }
        for ((a, &vb), &vc) in self
            .w_input
            .data
            .iter_mut()
            .zip(&b.w_input.data)
            .zip(&c.w_input.data)
        {
            f(a, vb, vc);
        }
        for ((a, &vb), &vc) in self
            .w_recurrent
            .data
            .iter_mut()
            .zip(&b.w_recurrent.data)
            .zip(&c.w_recurrent.data)
        {
            f(a, vb, vc);
        }
        for ((a, &vb), &vc) in self.bias.iter_mut().zip(&b.bias).zip(&c.bias) {
            f(a, vb, vc);
        }
        for ((a, &vb), &vc) in self
            .head_weight
            .iter_mut()
            .zip(&b.head_weight)
            .zip(&c.head_weight)
        {
            f(a, vb, vc);
        }
        f(&mut self.head_bias, b.head_bias, c.head_bias);
    }

    /// Applies `f` to every parameter in place.
    pub fn apply(&mut self, mut f: impl FnMut(&mut f64)) {
        for a in self
            .embedding
            .data
            .iter_mut()
            .chain(self.w_input.data.iter_mut())
            .chain(self.w_recurrent.data.iter_mut())
            .chain(self.bias.iter_mut())
            .chain(self.head_weight.iter_mut())
        {
            f(a);
        }
        f(&mut self.head_bias);
    }

    /// Folds `f` over every parameter value.
    pub fn fold<B>(&self, init: B, mut f: impl FnMut(B, f64) -> B) -> B {
        let mut acc = init;
        for a in self
            .embedding
            .data
            .iter()
            .chain(self.w_input.data.iter())
            .chain(self.w_recurrent.data.iter())
            .chain(self.bias.iter())
            .chain(self.head_weight.iter())
        {
            acc = f(acc, *a);
        }
        f(acc, self.head_bias)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.feature_dim == other.feature_dim
            && self.d_emb == other.d_emb
            && self.d_hid == other.d_hid
    }

    pub fn all_finite(&self) -> bool {
        self.fold(true, |ok, v| ok && v.is_finite())
    }

    /// Euclidean norm over all parameters.
    pub fn global_norm(&self) -> f64 {
        self.fold(0.0, |acc, v| acc + v * v).sqrt()
    }
}

/// Xavier-uniform initialization: each matrix is drawn from `U[-a, a]` with
/// `a = sqrt(6 / (fan_in + fan_out))`; forget-gate biases start at 1.0 and
/// every other bias at 0. Deterministic under `seed`.
pub fn init_params(feature_dim: usize, d_emb: usize, d_hid: usize, seed: u64) -> Result<ModelParams> {
    if feature_dim == 0 || d_emb == 0 || d_hid == 0 {
        return Err(Error::InvalidArgument(
            "feature_dim, d_emb and d_hid must all be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d_in = d_emb + 1;

    let mut draw = |rows: usize, cols: usize, fan_in: usize, fan_out: usize| {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect();
        Matrix::from_vec(rows, cols, data)
    };

    let embedding = draw(feature_dim, d_emb, feature_dim, d_emb)?;
    let w_input = draw(4 * d_hid, d_in, d_in, 4 * d_hid)?;
    let w_recurrent = draw(4 * d_hid, d_hid, d_hid, 4 * d_hid)?;
    let head_weight = {
        let a = (6.0 / (d_hid + 1) as f64).sqrt();
        (0..d_hid).map(|_| rng.gen_range(-a..a)).collect()
    };

    let mut bias = vec![0.0; 4 * d_hid];
    bias[d_hid..2 * d_hid].fill(1.0); // forget gate

    Ok(ModelParams {
        embedding,
        w_input,
        w_recurrent,
        bias,
        head_weight,
        head_bias: 0.0,
        feature_dim,
        d_emb,
        d_hid,
    })
}

/// Per-step cache entries retained by [`forward`].
#[derive(Debug, Clone)]
pub struct StepCache {
    /// Gate pre-activations, `4*d_hid`.
    pub pre: Vec<f64>,
    pub gate_input: Vec<f64>,
    pub gate_forget: Vec<f64>,
    pub gate_cell: Vec<f64>,
    pub gate_output: Vec<f64>,
    pub cell: Vec<f64>,
    pub cell_tanh: Vec<f64>,
    pub hidden: Vec<f64>,
    pub head_pre: f64,
    /// Sigmoid of `head_pre`, before clamping.
    pub hazard_raw: f64,
}

/// Everything [`backward`] needs for exact gradients: the embedded feature
/// vector, the per-step activations, and the unroll geometry.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub embedded: Vec<f64>,
    pub steps: Vec<StepCache>,
    pub num_intervals: usize,
    features: Features,
}

impl ForwardCache {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Builds the step-`l` input vector: the feature embedding (constant across
/// steps) with the normalized time channel `l / L` appended.
pub fn embed_input(
    params: &ModelParams,
    features: &Features,
    l: usize,
    num_intervals: usize,
) -> Result<Vec<f64>> {
    if l == 0 || l > num_intervals {
        return Err(Error::IndexOutOfRange {
            index: l,
            len: num_intervals,
        });
    }
    let mut input = embed_features(params, features)?;
    input.push(l as f64 / num_intervals as f64);
    Ok(input)
}

fn embed_features(params: &ModelParams, features: &Features) -> Result<Vec<f64>> {
    let mut out = vec![0.0; params.d_emb];
    for (idx, value) in features.pairs() {
        if *idx >= params.feature_dim {
            return Err(Error::IndexOutOfRange {
                index: *idx,
                len: params.feature_dim,
            });
        }
        let row = params.embedding.row(*idx);
        for (o, e) in out.iter_mut().zip(row) {
            *o += value * e;
        }
    }
    Ok(out)
}

/// Unrolls the network for `l_max` steps from zero initial state and emits
/// one clamped hazard per step plus the cache for [`backward`].
pub fn forward(
    params: &ModelParams,
    features: &Features,
    l_max: usize,
    num_intervals: usize,
) -> Result<(HazardSequence, ForwardCache)> {
    if l_max == 0 || l_max > num_intervals {
        return Err(Error::IndexOutOfRange {
            index: l_max,
            len: num_intervals,
        });
    }
    if !params.all_finite() {
        return Err(Error::NonFinite("model parameters".into()));
    }
    let d_hid = params.d_hid;
    let embedded = embed_features(params, features)?;

    let mut hidden = vec![0.0; d_hid];
    let mut cell = vec![0.0; d_hid];
    let mut steps = Vec::with_capacity(l_max);
    let mut hazards = Vec::with_capacity(l_max);
    let mut input = embedded.clone();
    input.push(0.0);

    for l in 1..=l_max {
        *input.last_mut().unwrap() = l as f64 / num_intervals as f64;

        let mut pre = params.w_input.matvec(&input);
        let rec = params.w_recurrent.matvec(&hidden);
        for ((p, r), b) in pre.iter_mut().zip(&rec).zip(&params.bias) {
            *p += r + b;
        }

        let gate_input: Vec<f64> = pre[..d_hid].iter().map(|&x| sigmoid(x)).collect();
        let gate_forget: Vec<f64> = pre[d_hid..2 * d_hid].iter().map(|&x| sigmoid(x)).collect();
        let gate_cell: Vec<f64> = pre[2 * d_hid..3 * d_hid].iter().map(|&x| x.tanh()).collect();
        let gate_output: Vec<f64> = pre[3 * d_hid..].iter().map(|&x| sigmoid(x)).collect();

        let new_cell: Vec<f64> = (0..d_hid)
            .map(|k| gate_forget[k] * cell[k] + gate_input[k] * gate_cell[k])
            .collect();
        let cell_tanh: Vec<f64> = new_cell.iter().map(|c| c.tanh()).collect();
        let new_hidden: Vec<f64> = (0..d_hid).map(|k| gate_output[k] * cell_tanh[k]).collect();

        let head_pre = dot(&params.head_weight, &new_hidden) + params.head_bias;
        let hazard_raw = sigmoid(head_pre);
        hazards.push(hazard_raw);

        steps.push(StepCache {
            pre,
            gate_input,
            gate_forget,
            gate_cell,
            gate_output,
            cell: new_cell.clone(),
            cell_tanh,
            hidden: new_hidden.clone(),
            head_pre,
            hazard_raw,
        });
        hidden = new_hidden;
        cell = new_cell;
    }

    Ok((
        HazardSequence::new(hazards),
        ForwardCache {
            embedded,
            steps,
            num_intervals,
            features: features.clone(),
        },
    ))
}

/// Backpropagation through time: given `dL/dh_l` for every emitted hazard,
/// accumulates exact gradients for every tensor in [`ModelParams`].
pub fn backward(params: &ModelParams, cache: &ForwardCache, grad_h: &[f64]) -> Result<ModelParams> {
    if grad_h.len() != cache.steps.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} hazard gradients for {} unrolled steps",
            grad_h.len(),
            cache.steps.len()
        )));
    }
    let d_hid = params.d_hid;
    let mut grads = params.zeros_like();
    let mut d_embedded = vec![0.0; params.d_emb];

    let mut d_hidden_next = vec![0.0; d_hid];
    let mut d_cell_next = vec![0.0; d_hid];

    let mut input = cache.embedded.clone();
    input.push(0.0);

    for l in (1..=cache.steps.len()).rev() {
        let step = &cache.steps[l - 1];
        *input.last_mut().unwrap() = l as f64 / cache.num_intervals as f64;

        // Head: h = sigmoid(u) clamped; clamped outputs are flat.
        let h = step.hazard_raw;
        let dh_du = if (HAZARD_FLOOR..=1.0 - HAZARD_FLOOR).contains(&h) {
            h * (1.0 - h)
        } else {
            0.0
        };
        let du = grad_h[l - 1] * dh_du;

        for (g, r) in grads.head_weight.iter_mut().zip(&step.hidden) {
            *g += du * r;
        }
        grads.head_bias += du;

        let d_hidden: Vec<f64> = params
            .head_weight
            .iter()
            .zip(&d_hidden_next)
            .map(|(w, dn)| du * w + dn)
            .collect();

        let prev_cell: &[f64] = if l >= 2 {
            &cache.steps[l - 2].cell
        } else {
            &[]
        };
        let prev_hidden: &[f64] = if l >= 2 {
            &cache.steps[l - 2].hidden
        } else {
            &[]
        };

        let mut d_pre = vec![0.0; 4 * d_hid];
        let mut d_cell = vec![0.0; d_hid];
        for k in 0..d_hid {
            let dc = d_cell_next[k]
                + d_hidden[k] * step.gate_output[k] * (1.0 - step.cell_tanh[k] * step.cell_tanh[k]);
            d_cell[k] = dc;

            let d_out = d_hidden[k] * step.cell_tanh[k];
            let d_in_gate = dc * step.gate_cell[k];
            let c_prev = if l >= 2 { prev_cell[k] } else { 0.0 };
            let d_forget = dc * c_prev;
            let d_cand = dc * step.gate_input[k];

            d_pre[k] = d_in_gate * step.gate_input[k] * (1.0 - step.gate_input[k]);
            d_pre[d_hid + k] = d_forget * step.gate_forget[k] * (1.0 - step.gate_forget[k]);
            d_pre[2 * d_hid + k] = d_cand * (1.0 - step.gate_cell[k] * step.gate_cell[k]);
            d_pre[3 * d_hid + k] = d_out * step.gate_output[k] * (1.0 - step.gate_output[k]);
        }

        grads.w_input.add_outer(&d_pre, &input);
        if l >= 2 {
            grads.w_recurrent.add_outer(&d_pre, prev_hidden);
        }
        for (b, dp) in grads.bias.iter_mut().zip(&d_pre) {
            *b += dp;
        }

        let d_input = params.w_input.matvec_t(&d_pre);
        for (de, di) in d_embedded.iter_mut().zip(&d_input) {
            *de += di;
        }

        d_hidden_next = params.w_recurrent.matvec_t(&d_pre);
        d_cell_next = (0..d_hid).map(|k| d_cell[k] * step.gate_forget[k]).collect();
    }

    for (idx, value) in cache.features.pairs() {
        let row_start = idx * params.d_emb;
        for (e, de) in grads.embedding.data[row_start..row_start + params.d_emb]
            .iter_mut()
            .zip(&d_embedded)
        {
            *e += value * de;
        }
    }

    Ok(grads)
}

/// Model outputs for one sample over the full grid.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub hazards: HazardSequence,
    pub survival: SurvivalCurve,
    pub event_rate: Vec<f64>,
    pub event_prob: Vec<f64>,
}

/// Runs the model over every sample of a dataset for all `L` intervals and
/// composes the derived curves. Samples are evaluated in parallel when the
/// `parallel` feature is enabled; output order matches the dataset.
pub fn predict(params: &ModelParams, dataset: &Dataset) -> Result<Vec<Prediction>> {
    if dataset.feature_dim() != params.feature_dim {
        return Err(Error::ShapeMismatch(format!(
            "dataset feature_dim {} vs model feature_dim {}",
            dataset.feature_dim(),
            params.feature_dim
        )));
    }
    let l_full = dataset.grid().num_intervals();
    let results = exec::par_map(dataset.samples(), |sample| {
        forward(params, sample.features(), l_full, l_full).map(|(hazards, _)| {
            let survival = survival::survival_from_hazards(&hazards);
            let event_rate = survival.values().iter().map(|s| 1.0 - s).collect();
            let event_prob = survival::event_probs(&hazards);
            Prediction {
                hazards,
                survival,
                event_rate,
                event_prob,
            }
        })
    });
    results.into_iter().collect()
}
