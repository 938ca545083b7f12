//! Solver-labelled datasets, stored as JSON lines.
//!
//! The first line is a header carrying the scenario and the split; every
//! following line is one sample.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp_closedform::solve_algorithm2_from;
use crate::fp_numerical::{solve_algorithm1_from, SolverOptions, SolverReport};
use crate::grid::UserGrid;
use crate::netmodel::{generate_channels_with_seed, wsee, ChannelRealization, NetworkConfig, PowerAllocation};

/// Which solver produced (or should produce) a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    /// Algorithm 1.
    Numerical,
    /// Algorithm 2.
    Closedform,
}

impl SolverChoice {
    pub fn solve_from(
        self,
        g: &ChannelRealization,
        cfg: &NetworkConfig,
        opts: &SolverOptions,
        init: &PowerAllocation,
    ) -> Result<SolverReport> {
        match self {
            SolverChoice::Numerical => solve_algorithm1_from(g, cfg, opts, init),
            SolverChoice::Closedform => solve_algorithm2_from(g, cfg, opts, init),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub channel: ChannelRealization,
    pub target_rho: PowerAllocation,
    pub target_wsee: f64,
    pub solver: SolverChoice,
}

impl Sample {
    /// Labels `channel` with `target_rho`, computing its WSEE.
    pub fn new(
        channel: ChannelRealization,
        target_rho: PowerAllocation,
        cfg: &NetworkConfig,
        solver: SolverChoice,
    ) -> Result<Self> {
        let target_wsee = wsee(&channel, &target_rho, cfg)?;
        Ok(Self {
            channel,
            target_rho,
            target_wsee,
            solver,
        })
    }

    pub fn check(&self, cfg: &NetworkConfig) -> Result<()> {
        self.channel.check_matches(cfg)?;
        if !self.target_rho.is_feasible() {
            return Err(Error::InvalidInput("infeasible target".into()));
        }
        let w = wsee(&self.channel, &self.target_rho, cfg)?;
        if !w.is_finite() || (w - self.target_wsee).abs() > 1e-9 * w.abs().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "target_wsee {} disagrees with the target allocation ({w})",
                self.target_wsee
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// First `round(n·train_fraction)` indices train; the rest alternate
    /// between validation and test halves.
    pub fn contiguous(n: usize, train_fraction: f64) -> Self {
        let n_train = ((n as f64 * train_fraction).round() as usize).min(n);
        let rest = n - n_train;
        let n_val = rest / 2;
        Self {
            train: (0..n_train).collect(),
            validation: (n_train..n_train + n_val).collect(),
            test: (n_train + n_val..n).collect(),
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.validation).chain(&self.test) {
            if i >= n || seen[i] {
                return Err(Error::InvalidInput("split indices must be disjoint and in range".into()));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidInput("split does not cover every sample".into()));
        }
        Ok(())
    }
}

/// Settings of [`gen_dataset_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetOptions {
    pub solver: SolverChoice,
    pub restarts: usize,
    pub train_fraction: f64,
    pub solver_options: SolverOptions,
    /// Regeneration attempts per sample before giving up.
    pub max_attempts: usize,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            solver: SolverChoice::Closedform,
            restarts: 3,
            train_fraction: 0.36,
            solver_options: SolverOptions::default(),
            max_attempts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub cfg: NetworkConfig,
    pub samples: Vec<Sample>,
    pub split: Split,
    /// Samples redrawn because a solver run reported degraded progress.
    #[serde(default)]
    pub regenerated: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    #[serde(rename = "type")]
    kind: String,
    cfg: NetworkConfig,
    split: Split,
    #[serde(default)]
    regenerated: usize,
}

impl Dataset {
    pub fn new(cfg: NetworkConfig, samples: Vec<Sample>, split: Split) -> Result<Self> {
        let d = Self {
            cfg,
            samples,
            split,
            regenerated: 0,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate_physics()?;
        self.split.check(self.samples.len())?;
        for s in &self.samples {
            s.check(&self.cfg)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn pick(&self, idx: &[usize]) -> Vec<&Sample> {
        idx.iter().map(|&i| &self.samples[i]).collect()
    }

    pub fn train(&self) -> Vec<&Sample> {
        self.pick(&self.split.train)
    }

    pub fn validation(&self) -> Vec<&Sample> {
        self.pick(&self.split.validation)
    }

    pub fn test(&self) -> Vec<&Sample> {
        self.pick(&self.split.test)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            kind: "dataset".into(),
            cfg: self.cfg.clone(),
            split: self.split.clone(),
            regenerated: self.regenerated,
        };
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        for s in &self.samples {
            serde_json::to_writer(&mut w, s)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty dataset file".into()))??;
        let header: Header = serde_json::from_str(&first)?;
        if header.kind != "dataset" {
            return Err(Error::InvalidInput(format!("expected a dataset header, found {:?}", header.kind)));
        }
        let mut samples = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            samples.push(serde_json::from_str(&line)?);
        }
        let mut d = Self::new(header.cfg, samples, header.split)?;
        d.regenerated = header.regenerated;
        Ok(d)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// A random feasible allocation with every entry in `[0, 1/K)`.
pub fn random_allocation<R: Rng + ?Sized>(rng: &mut R, num_bs: usize, users_per_bs: usize) -> PowerAllocation {
    let k = users_per_bs as f64;
    let grid = UserGrid::from_fn(num_bs, users_per_bs, |_, _| rng.random::<f64>() / k);
    PowerAllocation::new(grid).expect("entries below 1/K are feasible")
}

/// Best of `restarts` runs of `solver`: the first from the uniform allocation,
/// the rest from random feasible ones. `None` if any run was degraded or
/// failed to converge.
pub fn best_of_restarts<R: Rng + ?Sized>(
    g: &ChannelRealization,
    cfg: &NetworkConfig,
    solver: SolverChoice,
    opts: &SolverOptions,
    restarts: usize,
    rng: &mut R,
) -> Result<Option<SolverReport>> {
    let mut best: Option<SolverReport> = None;
    for r in 0..restarts.max(1) {
        let init = if r == 0 {
            PowerAllocation::uniform(cfg.num_bs, cfg.users_per_bs)
        } else {
            random_allocation(rng, cfg.num_bs, cfg.users_per_bs)
        };
        let rep = solver.solve_from(g, cfg, opts, &init)?;
        if rep.degraded || !rep.converged {
            return Ok(None);
        }
        if best.as_ref().is_none_or(|b| rep.final_wsee() > b.final_wsee()) {
            best = Some(rep);
        }
    }
    Ok(best)
}

/// Seeds of `n` independent draws derived from `seed`.
pub fn derive_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

/// [`gen_dataset_with`] under the default options and the given solver.
pub fn gen_dataset(cfg: &NetworkConfig, n_samples: usize, solver: SolverChoice, seed: u64) -> Result<Dataset> {
    let opts = DatasetOptions {
        solver,
        ..Default::default()
    };
    gen_dataset_with(cfg, n_samples, &opts, seed)
}

/// Draws `n_samples` channels and labels each with the best of
/// `opts.restarts` solver runs. Samples are processed in parallel, each from
/// its own derived seed, so the result depends only on `seed`.
pub fn gen_dataset_with(cfg: &NetworkConfig, n_samples: usize, opts: &DatasetOptions, seed: u64) -> Result<Dataset> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&opts.train_fraction) {
        return Err(Error::InvalidInput("train_fraction must lie in [0, 1]".into()));
    }
    cfg.validate_physics()?;
    opts.solver_options.validate()?;
    let seeds = derive_seeds(seed, n_samples);
    let labelled: Vec<(Sample, usize)> = seeds
        .par_iter()
        .map(|&s| label_one(cfg, opts, s))
        .collect::<Result<_>>()?;
    let regenerated = labelled.iter().map(|(_, r)| r).sum();
    let samples = labelled.into_iter().map(|(s, _)| s).collect();
    let mut d = Dataset::new(cfg.clone(), samples, Split::contiguous(n_samples, opts.train_fraction))?;
    d.regenerated = regenerated;
    Ok(d)
}

fn label_one(cfg: &NetworkConfig, opts: &DatasetOptions, seed: u64) -> Result<(Sample, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..opts.max_attempts.max(1) {
        let g = generate_channels_with_seed(cfg, rng.random())?;
        if let Some(rep) = best_of_restarts(&g, cfg, opts.solver, &opts.solver_options, opts.restarts, &mut rng)? {
            return Ok((Sample::new(g, rep.rho_final, cfg, opts.solver)?, attempt));
        }
    }
    Err(Error::InvalidInput(format!(
        "no well-behaved sample after {} attempts",
        opts.max_attempts
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fp_closedform::solve_algorithm2;

    #[test]
    fn deterministic_and_valid() {
        let cfg = NetworkConfig::scenario(2, 2);
        let a = gen_dataset(&cfg, 10, SolverChoice::Closedform, 3).unwrap();
        let b = gen_dataset(&cfg, 10, SolverChoice::Closedform, 3).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        assert_eq!(a.split.train.len(), 4);
        assert_eq!(a.split.validation.len() + a.split.test.len(), 6);
        let c = gen_dataset(&cfg, 10, SolverChoice::Closedform, 4).unwrap();
        assert_ne!(a.samples[0].channel, c.samples[0].channel);
    }

    #[test]
    fn restarts_never_lose_to_a_single_run() {
        let cfg = NetworkConfig::scenario(3, 2);
        let d = gen_dataset(&cfg, 12, SolverChoice::Closedform, 9).unwrap();
        for s in &d.samples {
            let single = solve_algorithm2(&s.channel, &cfg, &SolverOptions::default()).unwrap();
            assert!(s.target_wsee >= single.final_wsee() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let cfg = NetworkConfig::scenario(2, 2);
        let d = gen_dataset(&cfg, 5, SolverChoice::Numerical, 1).unwrap();
        let mut buf = Vec::new();
        d.write_jsonl(&mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&c| c == b'\n').count(), 6);
        assert_eq!(Dataset::read_jsonl(&buf[..]).unwrap(), d);
    }

    #[test]
    fn rejects_tampered_targets() {
        let cfg = NetworkConfig::scenario(2, 2);
        let mut d = gen_dataset(&cfg, 3, SolverChoice::Closedform, 1).unwrap();
        d.samples[1].target_wsee *= 1.01;
        assert!(d.validate().is_err());
        assert!(gen_dataset(&cfg, 0, SolverChoice::Closedform, 1).is_err());
    }

    #[test]
    fn split_covers_everything() {
        for n in [1, 2, 7, 100] {
            let s = Split::contiguous(n, 0.36);
            s.check(n).unwrap();
        }
    }
}
