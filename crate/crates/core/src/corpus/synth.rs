//! Synthetic multi-instance corpora.
//!
//! Negative users draw every instance from the base distribution
//! `N(0, noise_scale^2 I)`. Positive users draw `k = max(1, round(signal_rate * m))`
//! instances, at uniformly random positions, from the shifted distribution
//! `N(shift, noise_scale^2 I)` where every coordinate of `shift` is
//! `+-shift_magnitude` with a seeded random sign. Everything else comes from
//! the base distribution.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{EmbeddedUser, Label};
use crate::error::{Error, Result};
use crate::kernel::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_users: usize,
    /// Inclusive range of tweets per user.
    pub m_range: (usize, usize),
    pub dim: usize,
    pub signal_rate: f64,
    pub noise_scale: f64,
    #[serde(default = "default_shift")]
    pub shift_magnitude: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_shift() -> f64 {
    0.5
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_users: 200,
            m_range: (5, 20),
            dim: 16,
            signal_rate: 1.0,
            noise_scale: 0.3,
            shift_magnitude: default_shift(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.m_range;
        if self.n_users < 2 {
            return Err(Error::Config("synthetic corpus needs at least 2 users".into()));
        }
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("empty tweet-count range {lo}..={hi}")));
        }
        if self.dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if !(self.signal_rate > 0.0 && self.signal_rate <= 1.0) {
            return Err(Error::Config(format!("signal_rate must be in (0, 1], got {}", self.signal_rate)));
        }
        if !(self.noise_scale >= 0.0) || !self.shift_magnitude.is_finite() {
            return Err(Error::Config("noise_scale must be >= 0 and shift finite".into()));
        }
        Ok(())
    }

    pub fn signal_rows_for(&self, m: usize) -> usize {
        ((self.signal_rate * m as f64).round() as usize).clamp(1, m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub users: Vec<EmbeddedUser>,
    /// Per user, the sorted row indices drawn from the shifted distribution.
    /// Empty for negative users.
    pub signal_rows: Vec<Vec<usize>>,
    pub shift: Vec<f64>,
}

/// Balanced corpus: users alternate normal, depressed, normal, ...
pub fn generate_synthetic_corpus(config: &SynthConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, Stream::Synth);
    let shift: Vec<f64> = (0..config.dim)
        .map(|_| if rng.random::<bool>() { config.shift_magnitude } else { -config.shift_magnitude })
        .collect();

    let width = (config.n_users - 1).to_string().len().max(4);
    let mut users = Vec::with_capacity(config.n_users);
    let mut signal_rows = Vec::with_capacity(config.n_users);
    for i in 0..config.n_users {
        let label = if i % 2 == 1 { Label::Depressed } else { Label::Normal };
        let m = rng.random_range(config.m_range.0..=config.m_range.1);
        let mut rows: Vec<usize> = if label.is_positive() {
            sample(&mut rng, m, config.signal_rows_for(m)).into_vec()
        } else {
            Vec::new()
        };
        rows.sort_unstable();

        let mut data = Vec::with_capacity(m * config.dim);
        for j in 0..m {
            let signal = rows.binary_search(&j).is_ok();
            for &s in &shift {
                let z: f64 = StandardNormal.sample(&mut rng);
                let mean = if signal { s } else { 0.0 };
                data.push((mean + config.noise_scale * z) as f32);
            }
        }
        users.push(EmbeddedUser::new(format!("user-{i:0width$}"), Some(label), config.dim, data)?);
        signal_rows.push(rows);
    }
    Ok(SyntheticCorpus {
        users,
        signal_rows,
        shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_positive_rows_equal_shift() {
        let cfg = SynthConfig {
            n_users: 10,
            signal_rate: 1.0,
            noise_scale: 0.0,
            ..SynthConfig::default()
        };
        let c = generate_synthetic_corpus(&cfg).unwrap();
        let shift: Vec<f32> = c.shift.iter().map(|&v| v as f32).collect();
        for u in c.users.iter().filter(|u| u.label == Some(Label::Depressed)) {
            assert!(u.rows().all(|r| r == shift.as_slice()));
        }
        for u in c.users.iter().filter(|u| u.label == Some(Label::Normal)) {
            assert!(u.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn balanced_labels() {
        let c = generate_synthetic_corpus(&SynthConfig::default()).unwrap();
        let pos = c.users.iter().filter(|u| u.label == Some(Label::Depressed)).count();
        assert_eq!((pos, c.users.len() - pos), (100, 100));
    }

    #[test]
    fn needle_count_follows_rate() {
        let cfg = SynthConfig {
            n_users: 20,
            m_range: (20, 20),
            signal_rate: 0.1,
            ..SynthConfig::default()
        };
        let c = generate_synthetic_corpus(&cfg).unwrap();
        for (u, rows) in c.users.iter().zip(&c.signal_rows) {
            let expected = if u.label == Some(Label::Depressed) { 2 } else { 0 };
            assert_eq!(rows.len(), expected);
        }
        // Short bags still carry one needle.
        assert_eq!(cfg.signal_rows_for(4), 1);
    }

    #[test]
    fn reproducible_bitwise() {
        let cfg = SynthConfig { seed: 77, ..SynthConfig::default() };
        assert_eq!(generate_synthetic_corpus(&cfg).unwrap(), generate_synthetic_corpus(&cfg).unwrap());
        let other = SynthConfig { seed: 78, ..SynthConfig::default() };
        assert_ne!(generate_synthetic_corpus(&cfg).unwrap(), generate_synthetic_corpus(&other).unwrap());
    }

    #[test]
    fn degenerate_configs_rejected() {
        for cfg in [
            SynthConfig { m_range: (5, 4), ..SynthConfig::default() },
            SynthConfig { m_range: (0, 4), ..SynthConfig::default() },
            SynthConfig { dim: 0, ..SynthConfig::default() },
            SynthConfig { n_users: 1, ..SynthConfig::default() },
            SynthConfig { signal_rate: 0.0, ..SynthConfig::default() },
        ] {
            assert!(generate_synthetic_corpus(&cfg).is_err(), "{cfg:?}");
        }
    }
}
