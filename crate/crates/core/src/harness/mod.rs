//! Dataset generation, training drivers, benchmarks, ablations and the CLI.

pub mod bench;
pub mod cli;
pub mod config;
pub mod dataset;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mini-batch training hyperparameters shared by both unfolded models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Epochs per incremental round.
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Weight `λ` of the supervised MSE term; 0 trains on the objective alone.
    pub supervised_weight: f64,
    /// Seed of the mini-batch shuffling and of any parameter initialisation.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::fum()
    }
}

impl TrainConfig {
    pub fn fum() -> Self {
        Self {
            epochs: 10,
            learning_rate: 1e-3,
            batch_size: 64,
            supervised_weight: 0.0,
            seed: 0,
        }
    }

    pub fn masum() -> Self {
        Self {
            epochs: 10,
            learning_rate: 1e-3,
            batch_size: 128,
            supervised_weight: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput("learning_rate must be finite and nonnegative".into()));
        }
        if !(self.supervised_weight >= 0.0 && self.supervised_weight.is_finite()) {
            return Err(Error::InvalidInput("supervised_weight must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Caps the global worker pool at `UNFOLD_EE_THREADS` when that variable is
/// set. Safe to call more than once; only the first successful call counts.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("UNFOLD_EE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("UNFOLD_EE_THREADS must be a positive integer, got {v:?}")))?;
    if n == 0 {
        return Err(Error::InvalidInput("UNFOLD_EE_THREADS must be at least 1".into()));
    }
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
