//! Fully-unfolded model (FUM): Algorithm 2 unrolled into `L` layers.
//!
//! Layer `ℓ` runs one closed-form iteration and blends it with learnable
//! per-link biases:
//!
//! ```text
//! γ_ℓ   = (1 − α_γ)·SINR(ρ_{ℓ−1}) + α_γ·θ_γ
//! ρ_cf  = closed-form update at (ρ_{ℓ−1}, γ_ℓ, y(ρ_{ℓ−1}))
//! ρ_ℓ   = project_feasible((1 − α_ρ)·ρ_cf + α_ρ·θ_ρ)
//! ```
//!
//! With every `α = 0` the model is exactly `L` iterations of Algorithm 2.
//! Inference runs on plain floats; training rebuilds the same computation on
//! an autodiff tape. Piecewise choices made in the forward pass (safeguard
//! step, clamps, which budgets bind) are held fixed on the tape, and the
//! water-filling multiplier carries its implicit derivative through one
//! Newton correction.

use std::f64::consts::LN_2;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdError, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::fp_closedform::{cf_iteration, entry_rho, objective_cf, CfState};
use crate::fp_numerical::RhoRule;
use crate::grid::UserGrid;
use crate::harness::dataset::Sample;
use crate::harness::TrainConfig;
use crate::links::{Links, TapeLinks};
use crate::netmodel::{project_feasible_unchecked, ChannelRealization, NetworkConfig, PowerAllocation};

/// Learnable parameters of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FumLayer {
    pub alpha_rho: UserGrid,
    pub theta_rho: UserGrid,
    pub alpha_gamma: UserGrid,
    pub theta_gamma: UserGrid,
}

impl FumLayer {
    /// `α = 0.1`, `θ_ρ = 1/(2K)`, `θ_γ = 1`.
    pub fn initial(num_bs: usize, users_per_bs: usize) -> Self {
        Self {
            alpha_rho: UserGrid::filled(num_bs, users_per_bs, 0.1),
            theta_rho: UserGrid::filled(num_bs, users_per_bs, 1.0 / (2.0 * users_per_bs as f64)),
            alpha_gamma: UserGrid::filled(num_bs, users_per_bs, 0.1),
            theta_gamma: UserGrid::filled(num_bs, users_per_bs, 1.0),
        }
    }

    /// A layer that is exactly one Algorithm 2 iteration.
    pub fn undamped(num_bs: usize, users_per_bs: usize) -> Self {
        Self {
            alpha_rho: UserGrid::zeros(num_bs, users_per_bs),
            alpha_gamma: UserGrid::zeros(num_bs, users_per_bs),
            ..Self::initial(num_bs, users_per_bs)
        }
    }

    fn zeros_like(&self) -> Self {
        let (nb, nu) = self.alpha_rho.shape();
        Self {
            alpha_rho: UserGrid::zeros(nb, nu),
            theta_rho: UserGrid::zeros(nb, nu),
            alpha_gamma: UserGrid::zeros(nb, nu),
            theta_gamma: UserGrid::zeros(nb, nu),
        }
    }

    fn fields(&self) -> [&UserGrid; 4] {
        [&self.alpha_rho, &self.theta_rho, &self.alpha_gamma, &self.theta_gamma]
    }

    fn fields_mut(&mut self) -> [&mut UserGrid; 4] {
        [
            &mut self.alpha_rho,
            &mut self.theta_rho,
            &mut self.alpha_gamma,
            &mut self.theta_gamma,
        ]
    }

    fn validate(&self, num_bs: usize, users_per_bs: usize) -> Result<()> {
        for f in self.fields() {
            f.check_shape(num_bs, users_per_bs, "layer parameter")?;
            if f.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("layer parameters must be finite".into()));
            }
        }
        for a in [&self.alpha_rho, &self.alpha_gamma] {
            if a.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidInput("damping must lie in [0, 1]".into()));
            }
        }
        if self.theta_gamma.as_slice().iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidInput("theta_gamma must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Gradients with the same layout as the model's layers.
pub type FumGrads = Vec<FumLayer>;

#[derive(Debug, Clone, PartialEq)]
pub struct FumModel {
    pub layers: Vec<FumLayer>,
    pub cfg: NetworkConfig,
    pub init_rho: PowerAllocation,
    /// `γ` fed to the first layer; the SINR at `init_rho` when absent.
    pub init_gamma: Option<UserGrid>,
    pub rho_rule: RhoRule,
    pub safeguard: bool,
    /// Set by training; benchmarks refuse untrained models.
    pub trained: bool,
}

#[derive(Serialize, Deserialize)]
struct FumFile {
    #[serde(rename = "type")]
    kind: String,
    #[serde(rename = "L")]
    num_layers: usize,
    layers: Vec<FumLayer>,
    cfg: NetworkConfig,
    init_rho: PowerAllocation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    init_gamma: Option<UserGrid>,
    #[serde(default)]
    rho_rule: RhoRule,
    #[serde(default = "yes")]
    safeguard: bool,
    #[serde(default)]
    trained: bool,
}

fn yes() -> bool {
    true
}

impl Serialize for FumModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FumFile {
            kind: "fum".into(),
            num_layers: self.layers.len(),
            layers: self.layers.clone(),
            cfg: self.cfg.clone(),
            init_rho: self.init_rho.clone(),
            init_gamma: self.init_gamma.clone(),
            rho_rule: self.rho_rule,
            safeguard: self.safeguard,
            trained: self.trained,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FumModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let f = FumFile::deserialize(d)?;
        if f.kind != "fum" {
            return Err(D::Error::custom(format!("expected a fum model, found {:?}", f.kind)));
        }
        if f.num_layers != f.layers.len() {
            return Err(D::Error::custom("L does not match the number of layers"));
        }
        let m = FumModel {
            layers: f.layers,
            cfg: f.cfg,
            init_rho: f.init_rho,
            init_gamma: f.init_gamma,
            rho_rule: f.rho_rule,
            safeguard: f.safeguard,
            trained: f.trained,
        };
        m.validate().map_err(D::Error::custom)?;
        Ok(m)
    }
}

impl FumModel {
    /// `L` freshly initialised layers starting from the uniform allocation.
    pub fn new(cfg: &NetworkConfig, num_layers: usize) -> Self {
        Self::with_layers(cfg, vec![FumLayer::initial(cfg.num_bs, cfg.users_per_bs); num_layers])
    }

    /// `L` layers with zero damping.
    pub fn undamped(cfg: &NetworkConfig, num_layers: usize) -> Self {
        Self::with_layers(cfg, vec![FumLayer::undamped(cfg.num_bs, cfg.users_per_bs); num_layers])
    }

    fn with_layers(cfg: &NetworkConfig, layers: Vec<FumLayer>) -> Self {
        Self {
            layers,
            cfg: cfg.clone(),
            init_rho: PowerAllocation::uniform(cfg.num_bs, cfg.users_per_bs),
            init_gamma: None,
            rho_rule: RhoRule::Derived,
            safeguard: true,
            trained: false,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate_physics()?;
        if self.layers.is_empty() {
            return Err(Error::InvalidInput("a FUM needs at least one layer".into()));
        }
        let (nb, nu) = (self.cfg.num_bs, self.cfg.users_per_bs);
        for l in &self.layers {
            l.validate(nb, nu)?;
        }
        self.init_rho.grid().check_shape(nb, nu, "init_rho")?;
        if let Some(g) = &self.init_gamma {
            g.check_shape(nb, nu, "init_gamma")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Output of the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FumOutput {
    pub rho: PowerAllocation,
    pub gamma: UserGrid,
}

fn forward_flat(model: &FumModel, l: &Links) -> (Vec<f64>, Vec<f64>) {
    let mut rho = model.init_rho.grid().as_slice().to_vec();
    let mut gamma = match &model.init_gamma {
        Some(g) => g.as_slice().to_vec(),
        None => l.sinr(&rho),
    };
    for layer in &model.layers {
        let it = cf_iteration(
            l,
            &rho,
            &gamma,
            Some((layer.alpha_gamma.as_slice(), layer.theta_gamma.as_slice())),
            model.rho_rule,
            model.safeguard,
        );
        let a = layer.alpha_rho.as_slice();
        let th = layer.theta_rho.as_slice();
        let blended: Vec<f64> = (0..l.len()).map(|e| (1.0 - a[e]) * it.rho[e] + a[e] * th[e]).collect();
        rho = project_feasible_unchecked(&l.grid(blended)).into_vec();
        gamma = it.gamma;
    }
    (rho, gamma)
}

/// Runs every layer on plain floats.
pub fn fum_forward(model: &FumModel, g: &ChannelRealization) -> Result<FumOutput> {
    model.validate()?;
    let l = Links::new(g, &model.cfg)?;
    let (rho, gamma) = forward_flat(model, &l);
    Ok(FumOutput {
        rho: PowerAllocation::from_grid_unchecked(l.grid(rho)),
        gamma: l.grid(gamma),
    })
}

/// Forward pass with wall-clock timing.
pub fn fum_infer(model: &FumModel, g: &ChannelRealization) -> Result<(PowerAllocation, f64)> {
    let start = Instant::now();
    let out = fum_forward(model, g)?;
    Ok((out.rho, start.elapsed().as_secs_f64()))
}

/// `−objective_cf` at `rho_hat` with every auxiliary at its optimum, plus
/// `λ·mean((ρ̂ − ρ_target)²)` when a target is given.
pub fn fum_loss(
    model: &FumModel,
    g: &ChannelRealization,
    rho_hat: &PowerAllocation,
    target: Option<(&PowerAllocation, f64)>,
) -> Result<f64> {
    let st = CfState::tight(g, rho_hat, &model.cfg)?;
    let mut loss = -objective_cf(g, &st, &model.cfg)?;
    if let Some((t, lambda)) = target {
        loss += lambda * mse(rho_hat.grid(), t.grid())?;
    }
    Ok(loss)
}

pub(crate) fn mse(a: &UserGrid, b: &UserGrid) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape("target allocation shape differs".into()));
    }
    Ok(a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

/// Handles of one layer's parameters on a tape.
#[derive(Debug, Clone, Copy)]
pub struct LayerVars {
    pub alpha_rho: Var,
    pub theta_rho: Var,
    pub alpha_gamma: Var,
    pub theta_gamma: Var,
}

impl LayerVars {
    pub fn register(t: &mut Tape, layer: &FumLayer) -> Self {
        let col = |t: &mut Tape, g: &UserGrid| t.input(Tensor::column(g.as_slice().to_vec()));
        Self {
            alpha_rho: col(t, &layer.alpha_rho),
            theta_rho: col(t, &layer.theta_rho),
            alpha_gamma: col(t, &layer.alpha_gamma),
            theta_gamma: col(t, &layer.theta_gamma),
        }
    }

    fn vars(&self) -> [Var; 4] {
        [self.alpha_rho, self.theta_rho, self.alpha_gamma, self.theta_gamma]
    }
}

fn column(t: &mut Tape, v: Vec<f64>) -> Var {
    t.constant(Tensor::column(v))
}

/// `ρ_e(λ)` of the derived rule on the tape, with the clamp pattern decided
/// by the current values. `den_mask` is 0 for links whose update is fixed at
/// zero, so their (possibly vanishing) `β` never reaches a division.
fn rho_of_lambda(
    tl: &TapeLinks<'_>,
    t: &mut Tape,
    num: Var,
    beta: Var,
    lambda: Var,
    den_mask: &[f64],
    x: Var,
) -> Result<Var, AdError> {
    let d = t.add(beta, lambda)?;
    let mask = column(t, den_mask.to_vec());
    let d = t.mul(d, mask)?;
    let fill = column(t, den_mask.iter().map(|m| 1.0 - m).collect());
    let d = t.add(d, fill)?;
    let ratio = t.div(num, d)?;
    let q = t.sqrt(ratio)?;
    let s = t.sub(q, x)?;
    let r = t.div(s, tl.gp)?;
    Ok(t.clamp(r, 0.0, 1.0))
}

/// One layer on the tape. `gamma_prev` only feeds `z`, which the derived
/// rule does not use, so it is not threaded through.
pub fn layer_tape(
    tl: &TapeLinks<'_>,
    t: &mut Tape,
    lv: &LayerVars,
    rho_in: Var,
    rule: RhoRule,
    use_safeguard: bool,
) -> Result<Var, AdError> {
    if rule != RhoRule::Derived {
        return Err(AdError::Shape {
            op: "fum layer",
            detail: "only the derived rule is differentiable".into(),
        });
    }
    let l = tl.links;
    let n = l.len();
    let rho_v = t.value(rho_in).data().to_vec();
    let ag = t.value(lv.alpha_gamma).data().to_vec();
    let thg = t.value(lv.theta_gamma).data().to_vec();
    let sinr_v = l.sinr(&rho_v);
    let it = cf_iteration(l, &rho_v, &sinr_v, Some((&ag, &thg)), rule, use_safeguard);

    let x = tl.disturbance(t, rho_in)?;
    let s = tl.signal(t, rho_in)?;
    let sinr = t.div(s, x)?;
    let diff = t.sub(lv.theta_gamma, sinr)?;
    let shift = t.mul(lv.alpha_gamma, diff)?;
    let gamma = t.add(sinr, shift)?;
    let r0 = tl.rate(t, sinr)?;
    let d0 = tl.total_power(t, rho_in);

    let live: Vec<f64> = (0..n)
        .map(|e| if it.degenerate[e] || l.weights[e] == 0.0 { 0.0 } else { 1.0 })
        .collect();
    // c1 = ω·(1/D0)·B(1+γ)/ln2 on live links; y/√R0 = 1/D0 when both come from ρ_in
    let g1 = t.offset(gamma, 1.0);
    let wl = column(t, (0..n).map(|e| l.weights[e] * live[e] * l.bandwidth / LN_2).collect());
    let c1 = t.mul(wl, g1)?;
    let c1 = t.div(c1, d0)?;
    let sx = t.add(s, x)?;
    let sx2 = t.square(sx)?;
    let v = t.mul(c1, s)?;
    let v = t.div(v, sx2)?;
    let cross = t.matmul(tl.coupling_t, v)?;
    // own cost ω·y²·P = ω·R0·P/D0²
    let d02 = t.square(d0)?;
    let own = t.div(r0, d02)?;
    let own = t.mul(tl.weights, own)?;
    let own = t.scale(own, l.p_max);
    let beta = t.add(own, cross)?;

    let num = t.mul(c1, x)?;
    let num = t.mul(num, tl.gp)?;
    let beta_v = t.value(beta).data().to_vec();
    let c1_v = t.value(c1).data().to_vec();
    let x_v = t.value(x).data().to_vec();
    let den_mask: Vec<f64> = (0..n).map(|e| if c1_v[e] > 0.0 { 1.0 } else { 0.0 }).collect();

    let nu = l.users_per_bs;
    let lam_star: Vec<f64> = (0..n).map(|e| it.lambdas[e / nu]).collect();
    let lam_c = column(t, lam_star.clone());
    let mut rho_cf = rho_of_lambda(tl, t, num, beta, lam_c, &den_mask, x)?;
    if it.lambdas.iter().any(|&v| v > 0.0) {
        // slope of the row sum in λ at λ*, over links strictly inside (0, 1)
        let mut slope = vec![0.0; l.num_bs];
        for e in 0..n {
            let lam = lam_star[e];
            let r = entry_rho(c1_v[e], beta_v[e], x_v[e], l.gp[e], lam);
            if den_mask[e] > 0.0 && r > 0.0 && r < 1.0 {
                let nn = c1_v[e] * x_v[e] * l.gp[e];
                slope[e / nu] += -0.5 * nn.sqrt() * (beta_v[e] + lam).powf(-1.5) / l.gp[e];
            }
        }
        let active: Vec<f64> = (0..n)
            .map(|e| {
                let m = e / nu;
                if it.lambdas[m] > 0.0 && slope[m] != 0.0 {
                    -1.0 / slope[m]
                } else {
                    0.0
                }
            })
            .collect();
        let sums = tl.row_sums(t, rho_cf)?;
        let resid = t.offset(sums, -1.0);
        let gain = column(t, active);
        let corr = t.mul(resid, gain)?;
        let lam = t.add(lam_c, corr)?;
        rho_cf = rho_of_lambda(tl, t, num, beta, lam, &den_mask, x)?;
    }
    let guarded = if it.t == 1.0 {
        rho_cf
    } else {
        let step = t.sub(rho_cf, rho_in)?;
        let step = t.scale(step, it.t);
        t.add(rho_in, step)?
    };
    let rho_sg = tl.project_feasible(t, guarded)?;
    let gap = t.sub(lv.theta_rho, rho_sg)?;
    let pull = t.mul(lv.alpha_rho, gap)?;
    let blended = t.add(rho_sg, pull)?;
    tl.project_feasible(t, blended)
}

/// All layers on the tape, from the model's initial allocation.
pub fn forward_tape(
    model: &FumModel,
    tl: &TapeLinks<'_>,
    t: &mut Tape,
    layers: &[LayerVars],
) -> Result<Var, AdError> {
    let mut rho = column(t, model.init_rho.grid().as_slice().to_vec());
    for lv in layers {
        rho = layer_tape(tl, t, lv, rho, model.rho_rule, model.safeguard)?;
    }
    Ok(rho)
}

/// Training loss of one sample on the tape: `−WSEE(ρ̂)/target` plus the
/// optional supervised term.
fn sample_loss_tape(
    model: &FumModel,
    tl: &TapeLinks<'_>,
    t: &mut Tape,
    layers: &[LayerVars],
    sample: &Sample,
    supervised: f64,
) -> Result<Var, AdError> {
    let rho = forward_tape(model, tl, t, layers)?;
    let w = tl.wsee(t, rho)?;
    let mut loss = t.scale(w, -1.0 / sample.target_wsee.max(1e-300));
    if supervised > 0.0 {
        let target = column(t, sample.target_rho.grid().as_slice().to_vec());
        let d = t.sub(rho, target)?;
        let d2 = t.square(d)?;
        let s = t.sum(d2);
        let s = t.scale(s, supervised / tl.links.len() as f64);
        loss = t.add(loss, s)?;
    }
    Ok(loss)
}

/// Loss and gradients of one sample with respect to every layer.
pub fn sample_gradient(model: &FumModel, sample: &Sample, supervised: f64) -> Result<(f64, FumGrads)> {
    let l = Links::new(&sample.channel, &model.cfg)?;
    let mut t = Tape::new();
    let tl = l.on_tape(&mut t);
    let layers: Vec<LayerVars> = model.layers.iter().map(|ly| LayerVars::register(&mut t, ly)).collect();
    let loss = sample_loss_tape(model, &tl, &mut t, &layers, sample, supervised)?;
    t.backward(loss)?;
    let mut grads = Vec::with_capacity(layers.len());
    for (lv, ly) in layers.iter().zip(&model.layers) {
        let mut gl = ly.zeros_like();
        for (dst, v) in gl.fields_mut().into_iter().zip(lv.vars()) {
            dst.as_mut_slice().copy_from_slice(t.grad(v)?.data());
        }
        grads.push(gl);
    }
    Ok((t.scalar(loss), grads))
}

/// `θ ← θ − δ·∇θ` on every layer, damping re-clamped to `[0, 1]` and `θ_γ`
/// kept nonnegative. Non-finite gradient entries leave their parameter
/// untouched; the count of such entries is returned.
pub fn fum_update(model: &FumModel, grads: &FumGrads, delta: f64) -> Result<(FumModel, usize)> {
    if grads.len() != model.layers.len() {
        return Err(Error::Shape("gradient has the wrong number of layers".into()));
    }
    let mut out = model.clone();
    let mut rejected = 0;
    for (layer, g) in out.layers.iter_mut().zip(grads) {
        for (i, (p, gp)) in layer.fields_mut().into_iter().zip(g.fields()).enumerate() {
            if p.shape() != gp.shape() {
                return Err(Error::Shape("gradient grid shape differs".into()));
            }
            for (v, d) in p.as_mut_slice().iter_mut().zip(gp.as_slice()) {
                if !d.is_finite() {
                    rejected += 1;
                    continue;
                }
                let nv = *v - delta * d;
                *v = match i {
                    0 | 2 => nv.clamp(0.0, 1.0),
                    3 => nv.max(0.0),
                    _ => nv,
                };
            }
        }
    }
    Ok((out, rejected))
}

/// One row of a training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub round: usize,
    pub epoch: usize,
    pub loss: f64,
    pub wsee_ratio: f64,
}

/// Mean achieved-WSEE ratio of the model over `samples`.
pub fn fum_ratio(model: &FumModel, samples: &[&Sample]) -> Result<f64> {
    let ratios: Vec<f64> = samples
        .par_iter()
        .map(|s| {
            let out = fum_forward(model, &s.channel)?;
            let l = Links::new(&s.channel, &model.cfg)?;
            Ok(l.wsee(out.rho.grid().as_slice()) / s.target_wsee)
        })
        .collect::<Result<_>>()?;
    Ok(ratios.iter().sum::<f64>() / ratios.len().max(1) as f64)
}

fn batch_gradient(model: &FumModel, batch: &[&Sample], supervised: f64) -> Result<(f64, FumGrads, usize)> {
    let parts: Vec<Result<(f64, FumGrads)>> = batch.par_iter().map(|s| sample_gradient(model, s, supervised)).collect();
    let mut total = model.layers.iter().map(FumLayer::zeros_like).collect::<Vec<_>>();
    let mut loss = 0.0;
    let mut failed = 0;
    for p in parts {
        match p {
            Ok((l, g)) => {
                loss += l;
                for (acc, gl) in total.iter_mut().zip(&g) {
                    for (a, b) in acc.fields_mut().into_iter().zip(gl.fields()) {
                        for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                            *x += y;
                        }
                    }
                }
            }
            Err(_) => failed += 1,
        }
    }
    Ok((loss, total, failed))
}

/// Layer-wise incremental training.
///
/// Round `τ` trains layers `0..=τ`; layer `τ+1` then starts as a copy of
/// layer `τ`. The last round trains the full model. The loss of a sample is
/// `−WSEE(ρ̂)/target_wsee`, summed over the mini-batch, minimised by plain
/// gradient descent.
pub fn fum_train_incremental(
    train: &[&Sample],
    cfg: &NetworkConfig,
    num_layers: usize,
    hyper: &TrainConfig,
) -> Result<(FumModel, Vec<LogRow>)> {
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if num_layers == 0 {
        return Err(Error::InvalidInput("a FUM needs at least one layer".into()));
    }
    hyper.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut model = FumModel::new(cfg, 1);
    let mut log = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    for round in 0..num_layers {
        if round > 0 {
            let last = model.layers.last().expect("at least one layer").clone();
            model.layers.push(last);
        }
        for epoch in 0..hyper.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(hyper.batch_size) {
                let batch: Vec<&Sample> = chunk.iter().map(|&i| train[i]).collect();
                let (loss, grads, _) = batch_gradient(&model, &batch, hyper.supervised_weight)?;
                epoch_loss += loss;
                model = fum_update(&model, &grads, hyper.learning_rate)?.0;
            }
            log.push(LogRow {
                round,
                epoch,
                loss: epoch_loss / train.len() as f64,
                wsee_ratio: fum_ratio(&model, train)?,
            });
        }
    }
    model.trained = true;
    Ok((model, log))
}
