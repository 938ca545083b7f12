//! Experiment configuration files.
//!
//! ```json
//! {
//!   "network": {"num_bs": 4, "users_per_bs": 2, "p_max": 0.1},
//!   "solver": {"epsilon": 1e-4},
//!   "dataset": {"n_samples": 2222, "restarts": 3},
//!   "fum": {"layers": 5, "train": {"epochs": 3}},
//!   "masum": {"train": {"epochs": 5}},
//!   "bench": {"pmax_dbw": [-30, -20, -10, 0], "instances": 50}
//! }
//! ```
//!
//! Only `network.num_bs` and `network.users_per_bs` are required; every other
//! scenario field defaults to [`NetworkConfig::scenario`] and every other
//! section to its `Default`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp_numerical::SolverOptions;
use crate::harness::bench::{Scheme, Shift};
use crate::harness::dataset::DatasetOptions;
use crate::harness::TrainConfig;
use crate::netmodel::NetworkConfig;
use crate::unfold_masum::MasumLayout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSection {
    pub n_samples: usize,
    #[serde(flatten)]
    pub options: DatasetOptions,
}

impl Default for DatasetSection {
    /// 2222 samples, so that the 36% training share is 800.
    fn default() -> Self {
        Self {
            n_samples: 2222,
            options: DatasetOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FumSection {
    pub layers: usize,
    pub train: TrainConfig,
}

impl Default for FumSection {
    fn default() -> Self {
        Self {
            layers: 5,
            train: TrainConfig::fum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MasumSection {
    /// Defaults to [`MasumLayout::desk`] for the scenario.
    pub layout: Option<MasumLayout>,
    pub train: TrainConfig,
}

impl Default for MasumSection {
    fn default() -> Self {
        Self {
            layout: None,
            train: TrainConfig::masum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSection {
    pub schemes: Vec<Scheme>,
    pub pmax_dbw: Vec<f64>,
    pub instances: usize,
    pub warm_start: bool,
    pub off_training: Shift,
    pub timing_instances: usize,
    pub timing_reps: usize,
    pub layer_grid: Vec<usize>,
    pub attention_grid: Vec<usize>,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            pmax_dbw: (0..=10).map(|i| -40.0 + 5.0 * i as f64).collect(),
            instances: 50,
            warm_start: true,
            off_training: Shift::default(),
            timing_instances: 50,
            timing_reps: 5,
            layer_grid: vec![3, 5, 7],
            attention_grid: vec![0, 1, 2, 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub solver: SolverOptions,
    pub dataset: DatasetSection,
    pub fum: FumSection,
    pub masum: MasumSection,
    pub bench: BenchSection,
}

#[derive(Deserialize)]
struct RawConfig {
    network: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    solver: SolverOptions,
    #[serde(default)]
    dataset: DatasetSection,
    #[serde(default)]
    fum: FumSection,
    #[serde(default)]
    masum: MasumSection,
    #[serde(default)]
    bench: BenchSection,
}

impl ExperimentConfig {
    /// Defaults around `network`.
    pub fn for_network(network: NetworkConfig) -> Self {
        Self {
            network,
            solver: SolverOptions::default(),
            dataset: DatasetSection::default(),
            fum: FumSection::default(),
            masum: MasumSection::default(),
            bench: BenchSection::default(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(s)?;
        let dim = |k: &str| -> Result<usize> {
            raw.network
                .get(k)
                .and_then(serde_json::Value::as_u64)
                .map(|v| v as usize)
                .ok_or_else(|| Error::InvalidInput(format!("network.{k} is required")))
        };
        let base = NetworkConfig::scenario(dim("num_bs")?, dim("users_per_bs")?);
        let mut merged = serde_json::to_value(&base)?;
        let obj = merged.as_object_mut().expect("config serialises to an object");
        for (k, v) in raw.network {
            if !obj.contains_key(&k) {
                return Err(Error::InvalidInput(format!("unknown network field {k:?}")));
            }
            obj.insert(k, v);
        }
        let network: NetworkConfig = serde_json::from_value(merged)?;
        network.validate()?;
        let cfg = Self {
            network,
            solver: raw.solver,
            dataset: raw.dataset,
            fum: raw.fum,
            masum: raw.masum,
            bench: raw.bench,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.solver.validate()?;
        self.fum.train.validate()?;
        self.masum.train.validate()?;
        if let Some(l) = &self.masum.layout {
            l.validate()?;
        }
        if self.fum.layers == 0 {
            return Err(Error::InvalidInput("fum.layers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn masum_layout(&self) -> MasumLayout {
        self.masum.layout.clone().unwrap_or_else(|| MasumLayout::desk(&self.network))
    }
}
