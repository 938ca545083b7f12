//! Benchmarks: the `P_max` sweep, off-training evaluation, inference timing
//! and the layer / attention ablations.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp_closedform::solve_algorithm2_from;
use crate::fp_numerical::{solve_algorithm1_from, SolverOptions};
use crate::harness::dataset::{derive_seeds, Dataset, Sample};
use crate::harness::TrainConfig;
use crate::links::Links;
use crate::netmodel::{dbw_to_watts, generate_channels_with_seed, ChannelRealization, NetworkConfig, PowerAllocation};
use crate::unfold_fum::{fum_forward, fum_train_incremental, FumModel};
use crate::unfold_masum::{masum_forward, masum_train, MasumLayout, MasumModel};

/// A power-control scheme under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Algorithm 1.
    Alg1,
    /// Algorithm 2.
    Alg2,
    Fum,
    Masum,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Alg1, Scheme::Alg2, Scheme::Fum, Scheme::Masum];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Alg1 => "alg1",
            Scheme::Alg2 => "alg2",
            Scheme::Fum => "fum",
            Scheme::Masum => "masum",
        }
    }

    pub fn is_solver(self) -> bool {
        matches!(self, Scheme::Alg1 | Scheme::Alg2)
    }
}

/// Trained models available to a benchmark.
#[derive(Debug, Clone, Copy, Default)]
pub struct Models<'a> {
    pub fum: Option<&'a FumModel>,
    pub masum: Option<&'a MasumModel>,
}

impl Models<'_> {
    /// Fails unless every learned scheme in `schemes` has a trained model.
    pub fn check(&self, schemes: &[Scheme]) -> Result<()> {
        for s in schemes {
            match s {
                Scheme::Fum if !self.fum.is_some_and(|m| m.trained) => {
                    return Err(Error::Untrained("the fum scheme needs a trained FUM model".into()))
                }
                Scheme::Masum if !self.masum.is_some_and(|m| m.trained) => {
                    return Err(Error::Untrained("the masum scheme needs a trained MASUM model".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Runs one scheme on one channel from the uniform allocation (solvers) or
/// the model's own start (models). `cfg` overrides the models' scenario.
pub fn run_scheme(
    scheme: Scheme,
    g: &ChannelRealization,
    cfg: &NetworkConfig,
    opts: &SolverOptions,
    models: Models<'_>,
) -> Result<PowerAllocation> {
    let uniform = PowerAllocation::uniform(cfg.num_bs, cfg.users_per_bs);
    run_scheme_from(scheme, g, cfg, opts, models, &uniform)
}

fn run_scheme_from(
    scheme: Scheme,
    g: &ChannelRealization,
    cfg: &NetworkConfig,
    opts: &SolverOptions,
    models: Models<'_>,
    init: &PowerAllocation,
) -> Result<PowerAllocation> {
    match scheme {
        Scheme::Alg1 => Ok(solve_algorithm1_from(g, cfg, opts, init)?.rho_final),
        Scheme::Alg2 => Ok(solve_algorithm2_from(g, cfg, opts, init)?.rho_final),
        Scheme::Fum => {
            models.check(&[scheme])?;
            let m = models.fum.expect("checked");
            if &m.cfg == cfg {
                Ok(fum_forward(m, g)?.rho)
            } else {
                let mut m = m.clone();
                m.cfg = cfg.clone();
                Ok(fum_forward(&m, g)?.rho)
            }
        }
        Scheme::Masum => {
            models.check(&[scheme])?;
            let m = models.masum.expect("checked");
            if &m.cfg == cfg {
                masum_forward(m, g, &m.init_rho)
            } else {
                let mut m = m.clone();
                m.cfg = cfg.clone();
                masum_forward(&m, g, &m.init_rho)
            }
        }
    }
}

/// Draws `n` evaluation channels.
pub fn eval_channels(cfg: &NetworkConfig, n: usize, seed: u64) -> Result<Vec<ChannelRealization>> {
    derive_seeds(seed, n)
        .into_iter()
        .map(|s| generate_channels_with_seed(cfg, s))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scheme: Scheme,
    pub p_max_dbw: f64,
    pub wsee_bits_per_joule: f64,
    /// Mean wall time per instance; 0 unless timing was requested.
    pub wall_time_s: f64,
    pub accuracy_pct: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
}

pub const BENCH_HEADER: [&str; 5] = ["scheme", "p_max_dbw", "wsee_bits_per_joule", "wall_time_s", "accuracy_pct"];

impl BenchResult {
    pub fn to_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(BENCH_HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.scheme.name().to_string(),
                r.p_max_dbw.to_string(),
                r.wsee_bits_per_joule.to_string(),
                r.wall_time_s.to_string(),
                r.accuracy_pct.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// The mean WSEE curve of one scheme, in sweep order.
    pub fn curve(&self, scheme: Scheme) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.scheme == scheme)
            .map(|r| (r.p_max_dbw, r.wsee_bits_per_joule))
            .collect()
    }
}

/// Settings of [`bench_pmax_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepOptions {
    pub solver: SolverOptions,
    /// Record wall times; without it every time is reported as 0 so that the
    /// output is reproducible.
    pub timing: bool,
    /// Also start every solver from the previous point's allocation, rescaled
    /// to the same transmit power, and keep the better result.
    pub warm_start: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            timing: false,
            warm_start: true,
        }
    }
}

/// Mean WSEE of every scheme at every `P_max` over the fixed channel set.
///
/// `accuracy_pct` is the mean per-channel ratio to the first solver scheme
/// listed (Algorithm 2 when none is), times 100. `pmax_dbw` must be
/// increasing.
pub fn bench_pmax_sweep(
    cfg: &NetworkConfig,
    schemes: &[Scheme],
    pmax_dbw: &[f64],
    channels: &[ChannelRealization],
    models: Models<'_>,
    opts: &SweepOptions,
) -> Result<BenchResult> {
    cfg.validate_physics()?;
    opts.solver.validate()?;
    models.check(schemes)?;
    if schemes.is_empty() || pmax_dbw.is_empty() || channels.is_empty() {
        return Err(Error::InvalidInput("schemes, sweep points and channels must be nonempty".into()));
    }
    if pmax_dbw.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("the P_max sweep must be strictly increasing".into()));
    }
    for g in channels {
        g.check_matches(cfg)?;
    }
    let reference = schemes.iter().copied().find(|s| s.is_solver()).unwrap_or(Scheme::Alg2);
    let mut run_list: Vec<Scheme> = schemes.to_vec();
    if !run_list.contains(&reference) {
        run_list.push(reference);
    }

    // per scheme, per channel: the allocation at the previous sweep point
    let mut prev: Vec<Vec<Option<PowerAllocation>>> = vec![vec![None; channels.len()]; run_list.len()];
    let mut rows = Vec::new();
    let mut prev_p: Option<f64> = None;
    for &p_dbw in pmax_dbw {
        let p = dbw_to_watts(p_dbw);
        let cfg_p = cfg.clone().with_p_max(p);
        let mut results: Vec<(Vec<f64>, f64)> = Vec::with_capacity(run_list.len());
        for (si, &scheme) in run_list.iter().enumerate() {
            let start = Instant::now();
            let out: Vec<(PowerAllocation, f64)> = channels
                .par_iter()
                .zip(prev[si].par_iter())
                .map(|(g, warm)| {
                    let l = Links::new(g, &cfg_p)?;
                    let cold = run_scheme(scheme, g, &cfg_p, &opts.solver, models)?;
                    let mut best = (l.wsee(cold.grid().as_slice()), cold);
                    if let (true, true, Some(w), Some(pp)) = (scheme.is_solver(), opts.warm_start, warm, prev_p) {
                        let scaled = PowerAllocation::new(w.grid().map(|r| r * pp / p))?;
                        let hot = run_scheme_from(scheme, g, &cfg_p, &opts.solver, models, &scaled)?;
                        let wh = l.wsee(hot.grid().as_slice());
                        if wh > best.0 {
                            best = (wh, hot);
                        }
                    }
                    Ok((best.1, best.0))
                })
                .collect::<Result<_>>()?;
            let elapsed = start.elapsed().as_secs_f64() / channels.len() as f64;
            let wsees: Vec<f64> = out.iter().map(|(_, w)| *w).collect();
            prev[si] = out.into_iter().map(|(r, _)| Some(r)).collect();
            results.push((wsees, elapsed));
        }
        let ref_idx = run_list.iter().position(|&s| s == reference).expect("reference is run");
        let ref_w = results[ref_idx].0.clone();
        for (si, &scheme) in run_list.iter().enumerate() {
            if !schemes.contains(&scheme) {
                continue;
            }
            let (w, t) = &results[si];
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            let acc = w.iter().zip(&ref_w).map(|(a, b)| a / b).sum::<f64>() / w.len() as f64 * 100.0;
            rows.push(BenchRow {
                scheme,
                p_max_dbw: p_dbw,
                wsee_bits_per_joule: mean,
                wall_time_s: if opts.timing { *t } else { 0.0 },
                accuracy_pct: acc,
            });
        }
        prev_p = Some(p);
    }
    Ok(BenchResult { rows })
}

/// A shift of the channel distribution away from the training scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Shift {
    pub path_loss_delta: f64,
    pub fading_scale: f64,
}

impl Default for Shift {
    /// Exponent +0.5, fading variance ×1.5.
    fn default() -> Self {
        Self {
            path_loss_delta: 0.5,
            fading_scale: 1.5,
        }
    }
}

impl Shift {
    pub fn none() -> Self {
        Self {
            path_loss_delta: 0.0,
            fading_scale: 1.0,
        }
    }

    pub fn apply(&self, cfg: &NetworkConfig) -> NetworkConfig {
        let mut c = cfg.clone();
        c.path_loss_exponent += self.path_loss_delta;
        c.fading_variance *= self.fading_scale;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffTrainingReport {
    pub shift: Shift,
    pub instances: usize,
    /// Mean achieved-WSEE ratio against Algorithm 1, per evaluated model.
    pub fum_ratio: Option<f64>,
    pub masum_ratio: Option<f64>,
}

/// Evaluates the models on channels drawn from `shift` applied to `cfg` and
/// compares each with Algorithm 1 on the same channels.
pub fn eval_off_training(
    models: Models<'_>,
    cfg: &NetworkConfig,
    shift: Shift,
    instances: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<OffTrainingReport> {
    if instances == 0 {
        return Err(Error::InvalidInput("instances must be at least 1".into()));
    }
    let channels = eval_channels(&shift.apply(cfg), instances, seed)?;
    let reference: Vec<f64> = channels
        .par_iter()
        .map(|g| {
            let r = run_scheme(Scheme::Alg1, g, cfg, opts, models)?;
            Ok(Links::new(g, cfg)?.wsee(r.grid().as_slice()))
        })
        .collect::<Result<_>>()?;
    let ratio = |scheme: Scheme| -> Result<f64> {
        let r: Vec<f64> = channels
            .par_iter()
            .zip(&reference)
            .map(|(g, w)| {
                let rho = run_scheme(scheme, g, cfg, opts, models)?;
                Ok(Links::new(g, cfg)?.wsee(rho.grid().as_slice()) / w)
            })
            .collect::<Result<_>>()?;
        Ok(r.iter().sum::<f64>() / r.len() as f64)
    };
    let fum_ratio = if models.fum.is_some() { Some(ratio(Scheme::Fum)?) } else { None };
    let masum_ratio = if models.masum.is_some() { Some(ratio(Scheme::Masum)?) } else { None };
    Ok(OffTrainingReport {
        shift,
        instances,
        fum_ratio,
        masum_ratio,
    })
}

/// Per-call wall time statistics, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub scheme: Scheme,
    pub samples: usize,
    pub median_s: f64,
    pub p95_s: f64,
}

/// Times `reps` warm calls per instance on the calling thread. Solvers run
/// to convergence; models run one forward pass.
pub fn measure_inference(
    scheme: Scheme,
    instances: &[ChannelRealization],
    reps: usize,
    cfg: &NetworkConfig,
    models: Models<'_>,
    opts: &SolverOptions,
) -> Result<TimingStats> {
    if instances.is_empty() || reps == 0 {
        return Err(Error::InvalidInput("need at least one instance and one repetition".into()));
    }
    models.check(&[scheme])?;
    let mut times = Vec::with_capacity(instances.len() * reps);
    for g in instances {
        run_scheme(scheme, g, cfg, opts, models)?;
        for _ in 0..reps {
            let start = Instant::now();
            let r = run_scheme(scheme, g, cfg, opts, models)?;
            times.push(start.elapsed().as_secs_f64());
            std::hint::black_box(r);
        }
    }
    times.sort_by(f64::total_cmp);
    Ok(TimingStats {
        scheme,
        samples: times.len(),
        median_s: quantile(&times, 0.5),
        p95_s: quantile(&times, 0.95),
    })
}

/// Nearest-rank quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Mean achieved-WSEE ratio of `scheme` against each sample's target.
pub fn accuracy_on(samples: &[&Sample], cfg: &NetworkConfig, scheme: Scheme, models: Models<'_>) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples to evaluate".into()));
    }
    let opts = SolverOptions::default();
    let r: Vec<f64> = samples
        .par_iter()
        .map(|s| {
            let rho = run_scheme(scheme, &s.channel, cfg, &opts, models)?;
            Ok(Links::new(&s.channel, cfg)?.wsee(rho.grid().as_slice()) / s.target_wsee)
        })
        .collect::<Result<_>>()?;
    Ok(r.iter().sum::<f64>() / r.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// Layer count, or number of attention blocks.
    pub setting: usize,
    pub accuracy_pct: f64,
    pub inference_ms: f64,
}

/// Trains a FUM per layer count and reports test accuracy and median
/// inference time.
pub fn ablation_layers(data: &Dataset, grid: &[usize], hyper: &TrainConfig, timing_reps: usize) -> Result<Vec<AblationRow>> {
    let (train, test) = (data.train(), data.test());
    let channels: Vec<ChannelRealization> = test.iter().map(|s| s.channel.clone()).collect();
    grid.iter()
        .map(|&layers| {
            let (m, _) = fum_train_incremental(&train, &data.cfg, layers, hyper)?;
            let models = Models {
                fum: Some(&m),
                masum: None,
            };
            let acc = accuracy_on(&test, &data.cfg, Scheme::Fum, models)?;
            let t = measure_inference(Scheme::Fum, &channels, timing_reps, &data.cfg, models, &SolverOptions::default())?;
            Ok(AblationRow {
                setting: layers,
                accuracy_pct: acc * 100.0,
                inference_ms: t.median_s * 1e3,
            })
        })
        .collect()
}

/// Trains a MASUM per attention-block count (blocks in the last stages).
pub fn ablation_attention(
    data: &Dataset,
    layout: &MasumLayout,
    grid: &[usize],
    hyper: &TrainConfig,
    timing_reps: usize,
) -> Result<Vec<AblationRow>> {
    let (train, test) = (data.train(), data.test());
    let channels: Vec<ChannelRealization> = test.iter().map(|s| s.channel.clone()).collect();
    grid.iter()
        .map(|&n| {
            let l = layout.clone().with_attention(n);
            let (m, _) = masum_train(&train, &data.cfg, &l, hyper)?;
            let models = Models {
                fum: None,
                masum: Some(&m),
            };
            let acc = accuracy_on(&test, &data.cfg, Scheme::Masum, models)?;
            let t = measure_inference(Scheme::Masum, &channels, timing_reps, &data.cfg, models, &SolverOptions::default())?;
            Ok(AblationRow {
                setting: n,
                accuracy_pct: acc * 100.0,
                inference_ms: t.median_s * 1e3,
            })
        })
        .collect()
}

pub fn ablation_to_csv<W: Write>(rows: &[AblationRow], setting_name: &str, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([setting_name, "accuracy_pct", "inference_ms"])?;
    for r in rows {
        out.write_record([r.setting.to_string(), r.accuracy_pct.to_string(), r.inference_ms.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untrained_models_are_refused() {
        let cfg = NetworkConfig::scenario(2, 2);
        let ch = eval_channels(&cfg, 2, 1).unwrap();
        let fum = FumModel::new(&cfg, 2);
        let models = Models {
            fum: Some(&fum),
            masum: None,
        };
        let err = bench_pmax_sweep(&cfg, &[Scheme::Fum], &[-20.0], &ch, models, &SweepOptions::default());
        assert!(matches!(err, Err(Error::Untrained(_))));
        let err = bench_pmax_sweep(&cfg, &[Scheme::Masum], &[-20.0], &ch, Models::default(), &SweepOptions::default());
        assert!(matches!(err, Err(Error::Untrained(_))));
    }

    #[test]
    fn sweep_is_complete_and_monotone() {
        let cfg = NetworkConfig::scenario(2, 2);
        let ch = eval_channels(&cfg, 4, 3).unwrap();
        let pts = [-30.0, -20.0, -10.0, 0.0];
        let schemes = [Scheme::Alg2, Scheme::Alg1];
        let r = bench_pmax_sweep(&cfg, &schemes, &pts, &ch, Models::default(), &SweepOptions::default()).unwrap();
        assert_eq!(r.rows.len(), 8);
        for s in schemes {
            let c = r.curve(s);
            assert_eq!(c.len(), 4);
            assert!(c.windows(2).all(|w| w[1].1 >= w[0].1 * (1.0 - 1e-12)));
        }
        assert!(r.rows.iter().all(|row| row.wall_time_s == 0.0));
        let mut buf = Vec::new();
        r.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("scheme,p_max_dbw,wsee_bits_per_joule,wall_time_s,accuracy_pct\n"));
        assert!(bench_pmax_sweep(&cfg, &schemes, &[0.0, -1.0], &ch, Models::default(), &SweepOptions::default()).is_err());
    }

    #[test]
    fn timing_statistics() {
        let cfg = NetworkConfig::scenario(2, 2);
        let ch = eval_channels(&cfg, 1, 3).unwrap();
        let t = measure_inference(Scheme::Alg2, &ch, 1, &cfg, Models::default(), &SolverOptions::default()).unwrap();
        assert_eq!(t.samples, 1);
        assert_eq!(t.median_s, t.p95_s);
        assert!(t.median_s > 0.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.95), 4.0);
    }

    #[test]
    fn shift_changes_the_distribution() {
        let cfg = NetworkConfig::scenario(2, 2);
        let s = Shift::default().apply(&cfg);
        assert_eq!(s.path_loss_exponent, cfg.path_loss_exponent + 0.5);
        assert_eq!(s.fading_variance, 1.5 * cfg.fading_variance);
        assert_eq!(Shift::none().apply(&cfg), cfg);
    }
}
