use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_patience() -> usize {
    5
}

/// Validation-loss early stopping. An epoch improves when its loss is below
/// the best so far by more than `min_delta`; training stops once `patience`
/// consecutive epochs fail to improve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlyStoppingConfig {
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default)]
    pub min_delta: f64,
}

impl Default for EarlyStoppingConfig {
    fn default() -> Self {
        Self {
            patience: default_patience(),
            min_delta: 0.0,
        }
    }
}

impl EarlyStoppingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 {
            return Err(Error::Config("early stopping patience must be positive".into()));
        }
        if !(self.min_delta >= 0.0 && self.min_delta.is_finite()) {
            return Err(Error::Config(format!("min_delta must be finite and non-negative, got {}", self.min_delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// New best; the caller should snapshot its parameters.
    Improved,
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct EarlyStopping {
    config: EarlyStoppingConfig,
    best: Option<(usize, f64)>,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(config: EarlyStoppingConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            best: None,
            wait: 0,
        })
    }

    /// Records the validation loss of `epoch` (1-based).
    pub fn observe(&mut self, epoch: usize, loss: f64) -> Verdict {
        let improved = match self.best {
            None => true,
            Some((_, best)) => loss < best - self.config.min_delta,
        };
        if improved {
            self.best = Some((epoch, loss));
            self.wait = 0;
            return Verdict::Improved;
        }
        self.wait += 1;
        if self.wait >= self.config.patience {
            Verdict::Stop
        } else {
            Verdict::Continue
        }
    }

    /// `(epoch, loss)` of the best epoch seen so far.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(losses: &[f64], patience: usize, min_delta: f64) -> (usize, usize) {
        let mut es = EarlyStopping::new(EarlyStoppingConfig { patience, min_delta }).unwrap();
        for (i, &l) in losses.iter().enumerate() {
            if es.observe(i + 1, l) == Verdict::Stop {
                return (i + 1, es.best().unwrap().0);
            }
        }
        (losses.len(), es.best().unwrap().0)
    }

    #[test]
    fn stops_patience_epochs_after_best() {
        let losses = [1.0, 0.8, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1];
        assert_eq!(run(&losses, 1, 0.0), (4, 3));
        assert_eq!(run(&losses, 3, 0.0), (6, 3));
        assert_eq!(run(&losses, 10, 0.0), (8, 3));
    }

    #[test]
    fn rising_from_second_epoch() {
        assert_eq!(run(&[0.5, 0.6, 0.7, 0.8], 1, 0.0), (2, 1));
        assert_eq!(run(&[0.5, 0.6, 0.7, 0.8], 2, 0.0), (3, 1));
    }

    #[test]
    fn min_delta_ignores_small_gains() {
        assert_eq!(run(&[1.0, 0.99, 0.98, 0.97], 2, 0.05), (3, 1));
    }

    #[test]
    fn ties_do_not_improve() {
        assert_eq!(run(&[1.0, 1.0, 1.0], 2, 0.0), (3, 1));
    }

    #[test]
    fn invalid_configs() {
        assert!(EarlyStopping::new(EarlyStoppingConfig { patience: 0, min_delta: 0.0 }).is_err());
        assert!(EarlyStopping::new(EarlyStoppingConfig { patience: 1, min_delta: -1.0 }).is_err());
    }
}
