//! LSTM autoencoder over a user's sequence of tweet embeddings.
//!
//! The encoder LSTM (input `d`, hidden `h`) reads the embeddings in
//! chronological order; its hidden state after tweet `j` is the temporal
//! feature `F_j`. The decoder LSTM (input `h`, hidden `d`) reads the feature
//! sequence and its hidden state at step `j` is the reconstruction of tweet
//! `j`. Both start from zero state. Training minimizes the mean squared
//! reconstruction error and never looks at labels.
//!
//! Cell, with `σ` the logistic function:
//!
//! ```text
//! i = σ(W_i x + U_i h' + b_i)    f = σ(W_f x + U_f h' + b_f)
//! o = σ(W_o x + U_o h' + b_o)    g = tanh(W_g x + U_g h' + b_g)
//! c = f ⊙ c' + i ⊙ g             h = o ⊙ tanh(c)
//! ```

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{corpus_dim, EmbeddedUser};
use crate::error::{Error, Result};
use crate::kernel::params::accumulate;
use crate::kernel::{
    adam_step, glorot_init, sigmoid, stream_rng, tanh, AdamConfig, AdamState, Matrix, ParamBlock, ParamSet, Stream,
};

/// Gate order used for every per-gate array.
pub const GATES: [&str; 4] = ["input", "forget", "output", "candidate"];
const INPUT: usize = 0;
const FORGET: usize = 1;
const OUTPUT: usize = 2;
const CANDIDATE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `hidden x input_dim` input weights per gate.
    pub w: [Matrix; 4],
    /// `hidden x hidden` recurrent weights per gate.
    pub u: [Matrix; 4],
    pub b: [Vec<f64>; 4],
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            w: std::array::from_fn(|_| Matrix::zeros(hidden, input_dim)),
            u: std::array::from_fn(|_| Matrix::zeros(hidden, hidden)),
            b: std::array::from_fn(|_| vec![0.0; hidden]),
        }
    }

    /// Glorot-uniform weights, forget-gate bias 1, other biases 0.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let w = std::array::from_fn(|_| glorot_init(hidden, input_dim, rng));
        let u = std::array::from_fn(|_| glorot_init(hidden, hidden, rng));
        let mut b: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden]);
        b[FORGET].fill(1.0);
        Self { w, u, b }
    }

    pub fn input_dim(&self) -> usize {
        self.w[0].cols()
    }

    pub fn hidden(&self) -> usize {
        self.w[0].rows()
    }

    pub fn validate(&self) -> Result<()> {
        let (h, d) = (self.hidden(), self.input_dim());
        for g in 0..4 {
            if self.w[g].shape() != (h, d) || self.u[g].shape() != (h, h) || self.b[g].len() != h {
                return Err(Error::shape(
                    "LstmParams",
                    format!("consistent {} gate dims (hidden {h}, input {d})", GATES[g]),
                    format!("W {:?}, U {:?}, b {}", self.w[g].shape(), self.u[g].shape(), self.b[g].len()),
                ));
            }
        }
        Ok(())
    }

    pub(crate) fn blocks_prefixed(&self, prefix: &str) -> Vec<ParamBlock<'_>> {
        let mut out = Vec::with_capacity(12);
        for g in 0..4 {
            let gate = GATES[g];
            for (kind, m) in [("w", &self.w[g]), ("u", &self.u[g])] {
                out.push(ParamBlock {
                    name: format!("{prefix}{kind}_{gate}"),
                    rows: m.rows(),
                    cols: m.cols(),
                    data: m.as_slice(),
                });
            }
            out.push(ParamBlock {
                name: format!("{prefix}b_{gate}"),
                rows: self.b[g].len(),
                cols: 1,
                data: &self.b[g],
            });
        }
        out
    }

    pub(crate) fn blocks_mut_inner(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(12);
        let Self { w, u, b } = self;
        for ((w, u), b) in w.iter_mut().zip(u.iter_mut()).zip(b.iter_mut()) {
            out.push(w.as_mut_slice());
            out.push(u.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out
    }
}

impl ParamSet for LstmParams {
    fn blocks(&self) -> Vec<ParamBlock<'_>> {
        self.blocks_prefixed("")
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.blocks_mut_inner()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderParams {
    pub encoder: LstmParams,
    pub decoder: LstmParams,
}

impl AutoencoderParams {
    pub fn init<R: Rng + ?Sized>(embedding_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let encoder = LstmParams::init(embedding_dim, hidden, rng);
        let decoder = LstmParams::init(hidden, embedding_dim, rng);
        Self { encoder, decoder }
    }

    pub fn zeros(embedding_dim: usize, hidden: usize) -> Self {
        Self {
            encoder: LstmParams::zeros(embedding_dim, hidden),
            decoder: LstmParams::zeros(hidden, embedding_dim),
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn hidden(&self) -> usize {
        self.encoder.hidden()
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.decoder.validate()?;
        if self.decoder.input_dim() != self.encoder.hidden() || self.decoder.hidden() != self.encoder.input_dim() {
            return Err(Error::shape(
                "AutoencoderParams",
                format!(
                    "decoder {}→{}",
                    self.encoder.hidden(),
                    self.encoder.input_dim()
                ),
                format!("decoder {}→{}", self.decoder.input_dim(), self.decoder.hidden()),
            ));
        }
        Ok(())
    }
}

impl ParamSet for AutoencoderParams {
    fn blocks(&self) -> Vec<ParamBlock<'_>> {
        let mut out = self.encoder.blocks_prefixed("encoder.");
        out.extend(self.decoder.blocks_prefixed("decoder."));
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.encoder.blocks_mut_inner();
        out.extend(self.decoder.blocks_mut_inner());
        out
    }
}

/// Per-user temporal features, row `j` = `F_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub user_id: String,
    pub features: Matrix,
}

/// Everything one cell step needs for its backward pass.
#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: [Vec<f64>; 4],
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    c: Vec<f64>,
}

fn step_cached(p: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
    let hidden = p.hidden();
    let gates: [Vec<f64>; 4] = std::array::from_fn(|g| {
        let mut a = p.b[g].clone();
        p.w[g].gemv_acc(x, &mut a);
        p.u[g].gemv_acc(h_prev, &mut a);
        if g == CANDIDATE {
            a.iter_mut().for_each(|v| *v = tanh(*v));
        } else {
            a.iter_mut().for_each(|v| *v = sigmoid(*v));
        }
        a
    });
    let mut c = vec![0.0; hidden];
    let mut tanh_c = vec![0.0; hidden];
    let mut h = vec![0.0; hidden];
    for k in 0..hidden {
        c[k] = gates[FORGET][k] * c_prev[k] + gates[INPUT][k] * gates[CANDIDATE][k];
        tanh_c[k] = tanh(c[k]);
        h[k] = gates[OUTPUT][k] * tanh_c[k];
    }
    StepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates,
        tanh_c,
        h,
        c,
    }
}

fn check_step_dims(p: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<()> {
    p.validate()?;
    if x.len() != p.input_dim() {
        return Err(Error::shape("lstm_cell_step", format!("x of length {}", p.input_dim()), x.len()));
    }
    if h_prev.len() != p.hidden() || c_prev.len() != p.hidden() {
        return Err(Error::shape(
            "lstm_cell_step",
            format!("state of length {}", p.hidden()),
            format!("h {} / c {}", h_prev.len(), c_prev.len()),
        ));
    }
    Ok(())
}

/// One LSTM step; returns `(h, c)`.
pub fn lstm_cell_step(params: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_step_dims(params, x, h_prev, c_prev)?;
    let s = step_cached(params, x, h_prev, c_prev);
    Ok((s.h, s.c))
}

/// Unrolled forward pass of one LSTM layer from zero state.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    steps: Vec<StepCache>,
    hidden: usize,
}

impl LstmTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Hidden states stacked as an `m x hidden` matrix.
    pub fn outputs(&self) -> Matrix {
        let data = self.steps.iter().flat_map(|s| s.h.iter().copied()).collect();
        Matrix::new(self.steps.len(), self.hidden, data).expect("non-empty trace")
    }

    pub fn final_cell(&self) -> &[f64] {
        &self.steps.last().expect("non-empty trace").c
    }
}

fn run_layer(p: &LstmParams, seq: &Matrix) -> LstmTrace {
    let hidden = p.hidden();
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut steps = Vec::with_capacity(seq.rows());
    for x in seq.row_iter() {
        let s = step_cached(p, x, &h, &c);
        h.clone_from(&s.h);
        c.clone_from(&s.c);
        steps.push(s);
    }
    LstmTrace { steps, hidden }
}

pub fn forward_layer(p: &LstmParams, seq: &Matrix) -> Result<LstmTrace> {
    p.validate()?;
    if seq.cols() != p.input_dim() {
        return Err(Error::shape(
            "lstm forward",
            format!("sequence with {} columns", p.input_dim()),
            format!("{} columns", seq.cols()),
        ));
    }
    Ok(run_layer(p, seq))
}

/// Backpropagation through time. `d_h` holds the loss gradient with respect
/// to each step's hidden output (`m x hidden`). Parameter gradients are
/// added into `grads`; the gradient with respect to the input sequence is
/// returned.
pub fn backward_layer(p: &LstmParams, trace: &LstmTrace, d_h: &Matrix, grads: &mut LstmParams) -> Matrix {
    let hidden = p.hidden();
    let input_dim = p.input_dim();
    debug_assert_eq!(d_h.shape(), (trace.len(), hidden));
    let mut d_x = Matrix::zeros(trace.len(), input_dim);
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];
    let mut da: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden]);

    for t in (0..trace.len()).rev() {
        let s = &trace.steps[t];
        let [gi, gf, go, gg] = &s.gates;
        for k in 0..hidden {
            let dh = d_h.get(t, k) + dh_next[k];
            let dc = dh * go[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]) + dc_next[k];
            let d_o = dh * s.tanh_c[k];
            let d_i = dc * gg[k];
            let d_g = dc * gi[k];
            let d_f = dc * s.c_prev[k];
            da[INPUT][k] = d_i * gi[k] * (1.0 - gi[k]);
            da[FORGET][k] = d_f * gf[k] * (1.0 - gf[k]);
            da[OUTPUT][k] = d_o * go[k] * (1.0 - go[k]);
            da[CANDIDATE][k] = d_g * (1.0 - gg[k] * gg[k]);
            dc_next[k] = dc * gf[k];
        }
        dh_next.fill(0.0);
        let dx_row = d_x.row_mut(t);
        for g in 0..4 {
            grads.w[g].add_outer(1.0, &da[g], &s.x);
            grads.u[g].add_outer(1.0, &da[g], &s.h_prev);
            for (b, d) in grads.b[g].iter_mut().zip(&da[g]) {
                *b += d;
            }
            p.w[g].gemv_t_acc(&da[g], dx_row);
            p.u[g].gemv_t_acc(&da[g], &mut dh_next);
        }
    }
    d_x
}

/// Encoder hidden states, one row per tweet.
pub fn encode_sequence(params: &AutoencoderParams, seq: &Matrix) -> Result<Matrix> {
    Ok(forward_layer(&params.encoder, seq)?.outputs())
}

/// Decoder hidden states (the reconstruction), one row per tweet.
pub fn decode_sequence(params: &AutoencoderParams, features: &Matrix) -> Result<Matrix> {
    Ok(forward_layer(&params.decoder, features)?.outputs())
}

/// Mean squared error over all entries.
pub fn reconstruction_loss(original: &Matrix, reconstructed: &Matrix) -> Result<f64> {
    if original.shape() != reconstructed.shape() {
        return Err(Error::shape(
            "reconstruction_loss",
            format!("{:?}", original.shape()),
            format!("{:?}", reconstructed.shape()),
        ));
    }
    let n = original.as_slice().len() as f64;
    let sse: f64 = original
        .as_slice()
        .iter()
        .zip(reconstructed.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sse / n)
}

/// Reconstruction loss of one sequence and its gradient with respect to all
/// autoencoder parameters.
pub fn autoencoder_loss_and_grad(params: &AutoencoderParams, seq: &Matrix) -> Result<(f64, AutoencoderParams)> {
    let enc = forward_layer(&params.encoder, seq)?;
    let features = enc.outputs();
    let dec = forward_layer(&params.decoder, &features)?;
    let recon = dec.outputs();
    let loss = reconstruction_loss(seq, &recon)?;

    let scale = 2.0 / seq.as_slice().len() as f64;
    let d_recon_data = recon
        .as_slice()
        .iter()
        .zip(seq.as_slice())
        .map(|(r, x)| scale * (r - x))
        .collect();
    let d_recon = Matrix::new(recon.rows(), recon.cols(), d_recon_data)?;

    let mut grads = AutoencoderParams::zeros(params.embedding_dim(), params.hidden());
    let d_features = backward_layer(&params.decoder, &dec, &d_recon, &mut grads.decoder);
    backward_layer(&params.encoder, &enc, &d_features, &mut grads.encoder);
    Ok((loss, grads))
}

fn default_hidden() -> usize {
    32
}
fn default_ae_epochs() -> usize {
    50
}
fn default_ae_lr() -> f64 {
    5e-3
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoencoderConfig {
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_ae_epochs")]
    pub epochs: usize,
    #[serde(default = "default_ae_lr")]
    pub learning_rate: f64,
    /// Visit users in a freshly shuffled order every epoch.
    #[serde(default = "default_true")]
    pub shuffle: bool,
    /// Set from the pipeline's root seed rather than read from config files.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            epochs: default_ae_epochs(),
            learning_rate: default_ae_lr(),
            shuffle: true,
            seed: 0,
        }
    }
}

impl AutoencoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::Config("autoencoder hidden size must be positive".into()));
        }
        AdamConfig::with_learning_rate(self.learning_rate).validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainOutput {
    pub params: AutoencoderParams,
    /// Mean per-user reconstruction loss of each epoch, measured before each
    /// user's update.
    pub loss_history: Vec<f64>,
}

/// Unsupervised autoencoder training: one Adam step per user sequence.
/// Labels are never read.
pub fn pretrain_autoencoder(corpus: &[EmbeddedUser], config: &AutoencoderConfig) -> Result<PretrainOutput> {
    config.validate()?;
    let dim = corpus_dim(corpus)?.ok_or_else(|| Error::InvalidArgument("cannot pretrain on an empty corpus".into()))?;
    let mut params = AutoencoderParams::init(dim, config.hidden, &mut stream_rng(config.seed, Stream::AutoencoderInit));
    let sequences: Vec<Matrix> = corpus.iter().map(EmbeddedUser::to_matrix).collect();

    let mut adam = AdamState::new(params.num_params(), AdamConfig::with_learning_rate(config.learning_rate));
    let mut shuffle_rng = stream_rng(config.seed, Stream::AutoencoderShuffle);
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut flat = params.to_flat();
    let mut loss_history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut total = 0.0;
        for &i in &order {
            let (loss, grads) = autoencoder_loss_and_grad(&params, &sequences[i])?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "autoencoder loss {loss} at epoch {epoch}, user `{}`",
                    corpus[i].user_id
                )));
            }
            total += loss;
            adam_step(&mut flat, &grads.to_flat(), &mut adam)?;
            params.set_flat(&flat)?;
        }
        loss_history.push(total / sequences.len() as f64);
    }
    Ok(PretrainOutput { params, loss_history })
}

/// Mean reconstruction loss over a corpus, without updating anything.
pub fn mean_reconstruction_loss(params: &AutoencoderParams, corpus: &[EmbeddedUser]) -> Result<f64> {
    check_corpus_dim(params, corpus)?;
    let losses: Vec<f64> = corpus
        .par_iter()
        .map(|u| {
            let x = u.to_matrix();
            let recon = decode_sequence(params, &encode_sequence(params, &x)?)?;
            reconstruction_loss(&x, &recon)
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
}

fn check_corpus_dim(params: &AutoencoderParams, corpus: &[EmbeddedUser]) -> Result<()> {
    for u in corpus {
        if u.dim() != params.embedding_dim() {
            return Err(Error::Dimension {
                user: u.user_id.clone(),
                expected: params.embedding_dim(),
                actual: u.dim(),
            });
        }
    }
    Ok(())
}

/// Encoder features for every user, in corpus order.
pub fn extract_features(params: &AutoencoderParams, corpus: &[EmbeddedUser]) -> Result<Vec<FeatureSequence>> {
    params.validate()?;
    check_corpus_dim(params, corpus)?;
    corpus
        .par_iter()
        .map(|u| {
            Ok(FeatureSequence {
                user_id: u.user_id.clone(),
                features: encode_sequence(params, &u.to_matrix())?,
            })
        })
        .collect()
}

/// Sum of per-user gradients, reduced in corpus order.
pub fn batch_autoencoder_grad(params: &AutoencoderParams, batch: &[Matrix]) -> Result<(f64, AutoencoderParams)> {
    let parts: Vec<(f64, AutoencoderParams)> = batch
        .par_iter()
        .map(|x| autoencoder_loss_and_grad(params, x))
        .collect::<Result<_>>()?;
    let mut total = AutoencoderParams::zeros(params.embedding_dim(), params.hidden());
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        accumulate(&mut total, g);
    }
    Ok((loss, total))
}

/// Variable-length sequences zero-padded to a common length.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedBatch {
    /// One `max_len x dim` matrix per sequence.
    pub data: Vec<Matrix>,
    /// `mask[s][t]` is true for real (unpadded) steps.
    pub mask: Vec<Vec<bool>>,
}

impl PaddedBatch {
    pub fn new(seqs: &[Matrix]) -> Result<Self> {
        let first = seqs
            .first()
            .ok_or_else(|| Error::InvalidArgument("cannot pad an empty batch".into()))?;
        let dim = first.cols();
        let max_len = seqs.iter().map(Matrix::rows).max().unwrap_or(0);
        let mut data = Vec::with_capacity(seqs.len());
        let mut mask = Vec::with_capacity(seqs.len());
        for s in seqs {
            if s.cols() != dim {
                return Err(Error::shape("PaddedBatch", format!("{dim} columns"), s.cols()));
            }
            let mut padded = Matrix::zeros(max_len, dim);
            padded.as_mut_slice()[..s.as_slice().len()].copy_from_slice(s.as_slice());
            data.push(padded);
            mask.push((0..max_len).map(|t| t < s.rows()).collect());
        }
        Ok(Self { data, mask })
    }

    pub fn max_len(&self) -> usize {
        self.mask.first().map_or(0, Vec::len)
    }
}

/// Runs one LSTM layer over a padded batch in lockstep. Outputs at padded
/// steps are zeroed; since padding only trails, real steps match the
/// unpadded forward pass exactly.
pub fn forward_layer_padded(p: &LstmParams, batch: &PaddedBatch) -> Result<Vec<Matrix>> {
    p.validate()?;
    let hidden = p.hidden();
    let n = batch.data.len();
    let mut h = vec![vec![0.0; hidden]; n];
    let mut c = vec![vec![0.0; hidden]; n];
    let mut out = vec![Matrix::zeros(batch.max_len(), hidden); n];
    for t in 0..batch.max_len() {
        for s in 0..n {
            let x = batch.data[s].row(t);
            if x.len() != p.input_dim() {
                return Err(Error::shape("forward_layer_padded", p.input_dim(), x.len()));
            }
            let step = step_cached(p, x, &h[s], &c[s]);
            if batch.mask[s][t] {
                out[s].row_mut(t).copy_from_slice(&step.h);
            }
            h[s] = step.h;
            c[s] = step.c;
        }
    }
    Ok(out)
}

/// Padded-batch autoencoder pass: per-sequence reconstructions (padded
/// rows zero) and the loss averaged per sequence over its real steps, then
/// across sequences.
pub fn padded_reconstruction(params: &AutoencoderParams, batch: &PaddedBatch) -> Result<(Vec<Matrix>, f64)> {
    let features = forward_layer_padded(&params.encoder, batch)?;
    let feature_batch = PaddedBatch {
        data: features,
        mask: batch.mask.clone(),
    };
    let recon = forward_layer_padded(&params.decoder, &feature_batch)?;
    let mut total = 0.0;
    for ((x, r), mask) in batch.data.iter().zip(&recon).zip(&batch.mask) {
        let real = mask.iter().filter(|&&m| m).count();
        let mut sse = 0.0;
        for t in (0..mask.len()).filter(|&t| mask[t]) {
            sse += x.row(t).iter().zip(r.row(t)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        total += sse / (real * x.cols()) as f64;
    }
    Ok((recon, total / batch.data.len() as f64))
}
