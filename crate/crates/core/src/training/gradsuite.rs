//! Finite-difference verification of every hand-written backward pass.

use rand::Rng;

use super::head::{MilHead, Pooling};
use crate::error::{Error, Result};
use crate::kernel::gradcheck::{DEFAULT_STEP, DEFAULT_TOLERANCE};
use crate::kernel::{finite_difference_gradcheck, stream_rng, GradCheckReport, Matrix, ParamBlock, ParamSet, Stream};
use crate::lstm::{autoencoder_loss_and_grad, backward_layer, forward_layer, AutoencoderParams, LstmParams};

/// Problem size of the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradSuiteConfig {
    pub users: usize,
    pub seq_len: usize,
    pub embedding_dim: usize,
    pub hidden: usize,
    pub attention_dim: usize,
    pub seed: u64,
}

impl Default for GradSuiteConfig {
    fn default() -> Self {
        Self {
            users: 2,
            seq_len: 3,
            embedding_dim: 4,
            hidden: 3,
            attention_dim: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckResult {
    pub name: String,
    /// Parameter block holding the worst coordinate.
    pub worst_block: String,
    pub report: GradCheckReport,
}

#[derive(Debug, Clone)]
pub struct GradSuiteReport {
    pub tolerance: f64,
    pub checks: Vec<GradCheckResult>,
}

impl GradSuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.report.passes(self.tolerance))
    }

    pub fn max_rel_error(&self) -> f64 {
        self.checks.iter().map(|c| c.report.max_rel_error).fold(0.0, f64::max)
    }

    /// Converts a failing report into the numerical error.
    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            return Ok(self);
        }
        let worst = self
            .checks
            .iter()
            .max_by(|a, b| a.report.max_rel_error.total_cmp(&b.report.max_rel_error))
            .expect("suite has checks");
        Err(Error::GradCheck {
            max_rel_error: worst.report.max_rel_error,
            tolerance: self.tolerance,
            worst: format!("{} ({})", worst.name, worst.worst_block),
        })
    }
}

/// Encoder plus head: everything the supervised loss depends on.
#[derive(Debug, Clone)]
struct EncoderHead {
    encoder: LstmParams,
    head: MilHead,
}

impl ParamSet for EncoderHead {
    fn blocks(&self) -> Vec<ParamBlock<'_>> {
        let mut out = self.encoder.blocks_prefixed("encoder.");
        out.extend(self.head.blocks());
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.encoder.blocks_mut_inner();
        out.extend(self.head.blocks_mut());
        out
    }
}

impl EncoderHead {
    fn loss_and_grad(&self, seqs: &[Matrix], labels: &[f64]) -> Result<(f64, EncoderHead)> {
        let mut grads = EncoderHead {
            encoder: LstmParams::zeros(self.encoder.input_dim(), self.encoder.hidden()),
            head: self.head.zeros_like(),
        };
        let n = seqs.len() as f64;
        let mut loss = 0.0;
        for (x, &y) in seqs.iter().zip(labels) {
            let trace = forward_layer(&self.encoder, x)?;
            let (l, d_features) = self.head.loss_and_grad(&trace.outputs(), y, &mut grads.head)?;
            backward_layer(&self.encoder, &trace, &d_features, &mut grads.encoder);
            loss += l;
        }
        grads.scale(1.0 / n);
        Ok((loss / n, grads))
    }
}

fn uniform_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
        .expect("positive dims")
}

fn randomize<P: ParamSet, R: Rng>(p: &mut P, rng: &mut R) {
    for block in p.blocks_mut() {
        block.iter_mut().for_each(|v| *v = rng.random_range(-0.8..0.8));
    }
}

fn check<P, F>(name: &str, params: &P, analytic: &P, fault: bool, mut loss: F) -> Result<GradCheckResult>
where
    P: ParamSet + Clone,
    F: FnMut(&P) -> Result<f64>,
{
    let mut grad = analytic.to_flat();
    if fault {
        grad.iter_mut().for_each(|g| *g *= 2.0);
    }
    let mut probe = params.clone();
    let mut failure = None;
    let report = finite_difference_gradcheck(
        |flat| {
            probe.set_flat(flat).expect("same layout");
            loss(&probe).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            })
        },
        &params.to_flat(),
        &grad,
        DEFAULT_STEP,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let report = report?;
    let worst_block = params
        .locate(report.worst_index)
        .map(|(b, i)| format!("{b}[{i}]"))
        .unwrap_or_default();
    Ok(GradCheckResult {
        name: name.to_string(),
        worst_block,
        report,
    })
}

/// Runs the autoencoder check, each pooling head in isolation, and the full
/// supervised loss through the unrolled encoder. With `inject_fault` every
/// analytic gradient is doubled, which must make the suite fail.
pub fn run_gradient_suite(config: &GradSuiteConfig, inject_fault: bool) -> Result<GradSuiteReport> {
    let GradSuiteConfig {
        users,
        seq_len,
        embedding_dim: d,
        hidden: h,
        attention_dim: a,
        seed,
    } = *config;
    if users == 0 || seq_len == 0 || d == 0 || h == 0 || a == 0 {
        return Err(Error::InvalidArgument("gradient suite dimensions must be positive".into()));
    }
    let mut rng = stream_rng(seed, Stream::Synth);
    let seqs: Vec<Matrix> = (0..users).map(|_| uniform_matrix(seq_len, d, &mut rng)).collect();
    let features: Vec<Matrix> = (0..users).map(|_| uniform_matrix(seq_len, h, &mut rng)).collect();
    let labels: Vec<f64> = (0..users).map(|i| (i % 2) as f64).collect();
    let mut checks = Vec::new();

    let mut ae = AutoencoderParams::zeros(d, h);
    randomize(&mut ae, &mut rng);
    let ae_loss = |p: &AutoencoderParams| -> Result<f64> {
        let mut total = 0.0;
        for x in &seqs {
            total += autoencoder_loss_and_grad(p, x)?.0;
        }
        Ok(total / users as f64)
    };
    let mut ae_grad = AutoencoderParams::zeros(d, h);
    for x in &seqs {
        crate::kernel::params::accumulate(&mut ae_grad, &autoencoder_loss_and_grad(&ae, x)?.1);
    }
    ae_grad.scale(1.0 / users as f64);
    checks.push(check("autoencoder", &ae, &ae_grad, inject_fault, ae_loss)?);

    let feature_refs: Vec<&Matrix> = features.iter().collect();
    for pooling in Pooling::ALL {
        let mut head = MilHead::zeros(pooling, h, a);
        randomize(&mut head, &mut rng);
        let (_, grad) = head.batch_loss_and_grad(&feature_refs, &labels)?;
        checks.push(check(&format!("head.{pooling}"), &head, &grad, inject_fault, |p| {
            p.mean_loss(&feature_refs, &labels)
        })?);
    }

    let mut full = EncoderHead {
        encoder: LstmParams::zeros(d, h),
        head: MilHead::zeros(Pooling::Attention, h, a),
    };
    randomize(&mut full, &mut rng);
    let (_, grad) = full.loss_and_grad(&seqs, &labels)?;
    checks.push(check("full", &full, &grad, inject_fault, |p| {
        p.loss_and_grad(&seqs, &labels).map(|(l, _)| l)
    })?);

    Ok(GradSuiteReport {
        tolerance: DEFAULT_TOLERANCE,
        checks,
    })
}
