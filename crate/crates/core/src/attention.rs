//! Attention-based multi-instance pooling.
//!
//! Each temporal feature `F_j` gets a raw score `v · tanh(W F_j + b)`; the
//! scores are softmax-normalized into weights and the pooled user vector is
//! `S = Σ_j weight_j F_j`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::{dot, glorot_init, softmax_stable, tanh, Matrix, ParamBlock, ParamSet};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// `a x h` projection.
    pub w: Matrix,
    pub b: Vec<f64>,
    pub v: Vec<f64>,
}

impl AttentionParams {
    pub fn zeros(feature_dim: usize, attention_dim: usize) -> Self {
        Self {
            w: Matrix::zeros(attention_dim, feature_dim),
            b: vec![0.0; attention_dim],
            v: vec![0.0; attention_dim],
        }
    }

    /// Glorot-uniform `W` and `v`, zero `b`.
    pub fn init<R: Rng + ?Sized>(feature_dim: usize, attention_dim: usize, rng: &mut R) -> Self {
        let w = glorot_init(attention_dim, feature_dim, rng);
        let v = glorot_init(attention_dim, 1, rng).into_vec();
        Self {
            w,
            b: vec![0.0; attention_dim],
            v,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn attention_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.b.len() != self.w.rows() || self.v.len() != self.w.rows() {
            return Err(Error::shape(
                "AttentionParams",
                format!("b and v of length {}", self.w.rows()),
                format!("b {} / v {}", self.b.len(), self.v.len()),
            ));
        }
        Ok(())
    }
}

impl ParamSet for AttentionParams {
    fn blocks(&self) -> Vec<ParamBlock<'_>> {
        vec![
            ParamBlock {
                name: "attention.w".into(),
                rows: self.w.rows(),
                cols: self.w.cols(),
                data: self.w.as_slice(),
            },
            ParamBlock {
                name: "attention.b".into(),
                rows: self.b.len(),
                cols: 1,
                data: &self.b,
            },
            ParamBlock {
                name: "attention.v".into(),
                rows: self.v.len(),
                cols: 1,
                data: &self.v,
            },
        ]
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.as_mut_slice(), &mut self.b, &mut self.v]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub weights: Vec<f64>,
    pub aggregate: Vec<f64>,
}

fn check_features(params: &AttentionParams, features: &Matrix) -> Result<()> {
    params.validate()?;
    if features.cols() != params.feature_dim() {
        return Err(Error::shape(
            "attention",
            format!("features with {} columns", params.feature_dim()),
            format!("{} columns", features.cols()),
        ));
    }
    Ok(())
}

/// Raw score per instance; each depends only on its own feature row.
pub fn attention_scores(params: &AttentionParams, features: &Matrix) -> Result<Vec<f64>> {
    check_features(params, features)?;
    Ok(features.row_iter().map(|f| score_row(params, f).0).collect())
}

fn score_row(params: &AttentionParams, f: &[f64]) -> (f64, Vec<f64>) {
    let mut u = params.b.clone();
    params.w.gemv_acc(f, &mut u);
    u.iter_mut().for_each(|x| *x = tanh(*x));
    (dot(&params.v, &u), u)
}

pub fn attention_weights(scores: &[f64], mask: Option<&[bool]>) -> Result<Vec<f64>> {
    softmax_stable(scores, mask)
}

pub fn aggregate_features(weights: &[f64], features: &Matrix) -> Result<Vec<f64>> {
    if weights.len() != features.rows() {
        return Err(Error::shape(
            "aggregate_features",
            format!("{} weights", features.rows()),
            weights.len(),
        ));
    }
    let mut s = vec![0.0; features.cols()];
    for (&w, f) in weights.iter().zip(features.row_iter()) {
        if w != 0.0 {
            crate::kernel::axpy(w, f, &mut s);
        }
    }
    Ok(s)
}

/// Scores, weights and pooled vector in one pass.
pub fn attend(params: &AttentionParams, features: &Matrix, mask: Option<&[bool]>) -> Result<AttentionOutput> {
    let scores = attention_scores(params, features)?;
    let weights = attention_weights(&scores, mask)?;
    let aggregate = aggregate_features(&weights, features)?;
    Ok(AttentionOutput { weights, aggregate })
}

/// Forward activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct AttentionTrace {
    hidden: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub aggregate: Vec<f64>,
}

pub fn attention_forward(params: &AttentionParams, features: &Matrix) -> Result<AttentionTrace> {
    check_features(params, features)?;
    let (scores, hidden): (Vec<f64>, Vec<Vec<f64>>) = features.row_iter().map(|f| score_row(params, f)).unzip();
    let weights = softmax_stable(&scores, None)?;
    let aggregate = aggregate_features(&weights, features)?;
    Ok(AttentionTrace {
        hidden,
        weights,
        aggregate,
    })
}

/// Given `dL/dS`, accumulates parameter gradients into `grads` and returns
/// `dL/dF` (`m x h`).
pub fn attention_backward(
    params: &AttentionParams,
    features: &Matrix,
    trace: &AttentionTrace,
    d_aggregate: &[f64],
    grads: &mut AttentionParams,
) -> Matrix {
    let m = features.rows();
    // dL/dweight_j = dS · F_j, then through the softmax Jacobian.
    let d_weights: Vec<f64> = features.row_iter().map(|f| dot(d_aggregate, f)).collect();
    let mean = dot(&trace.weights, &d_weights);
    let mut d_features = Matrix::zeros(m, features.cols());
    let mut d_pre = vec![0.0; params.attention_dim()];
    for j in 0..m {
        let alpha = trace.weights[j];
        let d_score = alpha * (d_weights[j] - mean);
        let t = &trace.hidden[j];
        crate::kernel::axpy(d_score, t, &mut grads.v);
        for k in 0..d_pre.len() {
            d_pre[k] = d_score * params.v[k] * (1.0 - t[k] * t[k]);
        }
        let f = features.row(j);
        grads.w.add_outer(1.0, &d_pre, f);
        crate::kernel::axpy(1.0, &d_pre, &mut grads.b);

        let row = d_features.row_mut(j);
        crate::kernel::axpy(alpha, d_aggregate, row);
        params.w.gemv_t_acc(&d_pre, row);
    }
    d_features
}
