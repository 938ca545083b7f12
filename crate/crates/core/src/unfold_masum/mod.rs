//! Multi-attention semi-unfolded model (MASUM).
//!
//! Each stage recomputes the auxiliaries `y` and `z` from the incoming power
//! and stacks them with the gain image into four channels over an
//! `(M·K) × M` grid (rows are links, columns are source base stations; per-link
//! quantities are repeated along the row):
//!
//! 1. `10·log10(G·P/σ²)/30`
//! 2. `ρ`
//! 3. `y²·p_c²/B`, the rate-per-bandwidth times `(p_c/D)²`
//! 4. `z²·X/B = γ/(1+γ)`
//!
//! A 3×3 convolution with ReLU gives `f_c`. The main pipeline flattens `f_c`
//! into a one-hidden-layer FC with a linear skip path and emits `p_main`.
//! Attention blocks at their declared stages turn `f_c` into `f_A`; at the
//! last stage every `f_A` is fused, mean-pooled and mapped by `fc_att` to
//! `p_att`. Each stage outputs `refine(p_att, p_main)` (with `p_att = 0`
//! before the last stage), which feeds the next.

pub mod layers;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdError, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::fp_numerical::{objective_fp, update_y, update_z};
use crate::harness::dataset::Sample;
use crate::harness::TrainConfig;
use crate::links::{Links, TapeLinks};
use crate::netmodel::{ChannelRealization, NetworkConfig, PowerAllocation};
use crate::unfold_fum::{mse, LogRow};

pub use layers::{
    attention_block, attention_weights, fuse_features, permutation_augment, refine, Arrangement, AttentionBlockParams,
    Dense, FeatureMap, FusionParams,
};
use layers::{
    attention_tape, broadcast_links, conv3x3, dense, fuse_tape, gain_channel, gate_tape, AttentionVars, DenseVars,
};

/// Number of input channels of every stage.
pub const INPUT_CHANNELS: usize = 4;

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasumLayout {
    pub stages: usize,
    /// Channels of `f_c` and of every attention map.
    pub channels: usize,
    /// Width of the hidden FC layer of the main pipeline.
    pub hidden: usize,
    /// Stage index of every attention block.
    pub attention_positions: Vec<usize>,
    /// Arrangements per training sample, the identity included.
    pub n_perms: usize,
}

impl MasumLayout {
    /// Five stages of width 8, hidden width `4·M·K`, attention in the last two.
    pub fn desk(cfg: &NetworkConfig) -> Self {
        Self {
            stages: 5,
            channels: 8,
            hidden: 4 * cfg.num_links(),
            attention_positions: vec![3, 4],
            n_perms: 2,
        }
    }

    /// Attention in the last `n` stages.
    pub fn with_attention(mut self, n: usize) -> Self {
        let n = n.min(self.stages);
        self.attention_positions = (self.stages - n..self.stages).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 || self.channels == 0 || self.hidden == 0 || self.n_perms == 0 {
            return Err(Error::InvalidInput("MASUM sizes must be positive".into()));
        }
        if self.attention_positions.iter().any(|&p| p >= self.stages) {
            return Err(Error::InvalidInput("attention positions must be stage indices".into()));
        }
        Ok(())
    }
}

/// Parameters of one stage's main pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageParams {
    /// 3×3 kernel, `9·INPUT_CHANNELS × C`.
    pub conv: Dense,
    pub fc1: Dense,
    pub fc2: Dense,
    /// Linear path from the flattened features straight to `p_main`.
    pub skip: Tensor,
}

impl StageParams {
    fn init<R: rand::Rng + ?Sized>(rng: &mut R, cfg: &NetworkConfig, layout: &MasumLayout) -> Self {
        let n = cfg.num_links();
        let flat = n * cfg.num_bs * layout.channels;
        let mut fc2 = Dense::glorot(rng, layout.hidden, n);
        fc2.weight = fc2.weight.map(|w| 0.1 * w);
        // start near the uniform allocation: sigmoid(s)·s = 1/(2K)
        let s0 = gate_inverse(1.0 / (2.0 * cfg.users_per_bs as f64));
        fc2.bias = Tensor::filled(1, n, s0);
        Self {
            conv: Dense::glorot(rng, 9 * INPUT_CHANNELS, layout.channels),
            fc1: Dense::glorot(rng, flat, layout.hidden),
            fc2,
            skip: Tensor::zeros(flat, n),
        }
    }

    fn tensors(&self) -> [&Tensor; 7] {
        [
            &self.conv.weight,
            &self.conv.bias,
            &self.fc1.weight,
            &self.fc1.bias,
            &self.fc2.weight,
            &self.fc2.bias,
            &self.skip,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor; 7] {
        [
            &mut self.conv.weight,
            &mut self.conv.bias,
            &mut self.fc1.weight,
            &mut self.fc1.bias,
            &mut self.fc2.weight,
            &mut self.fc2.bias,
            &mut self.skip,
        ]
    }
}

/// Solves `sigmoid(s)·s = p` for `s ≥ 0` by Newton's method.
fn gate_inverse(p: f64) -> f64 {
    let mut s = p.max(0.1);
    for _ in 0..50 {
        let sg = crate::autodiff::sigmoid(s);
        let f = sg * s - p;
        let df = sg + s * sg * (1.0 - sg);
        s -= f / df;
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionedBlock {
    pub position: usize,
    pub params: AttentionBlockParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "masum")]
pub struct MasumModel {
    pub layout: MasumLayout,
    pub cfg: NetworkConfig,
    pub init_rho: PowerAllocation,
    pub stages: Vec<StageParams>,
    pub attention_blocks: Vec<PositionedBlock>,
    /// Present when there is at least one attention block.
    pub fusion: Option<FusionParams>,
    pub fc_att: Option<Dense>,
    /// Set by training; benchmarks refuse untrained models.
    #[serde(default)]
    pub trained: bool,
}

impl MasumModel {
    /// Randomly initialised model with `stages` stages of `layout`.
    pub fn init(cfg: &NetworkConfig, layout: &MasumLayout, stages: usize, seed: u64) -> Result<Self> {
        cfg.validate_physics()?;
        layout.validate()?;
        if stages == 0 || stages > layout.stages {
            return Err(Error::InvalidInput(format!("stage count must be in 1..={}", layout.stages)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = StageParams::init(&mut rng, cfg, layout);
        let c = layout.channels;
        let blocks: Vec<PositionedBlock> = layout
            .attention_positions
            .iter()
            .map(|&position| PositionedBlock {
                position,
                params: AttentionBlockParams::init(&mut rng, c),
            })
            .collect();
        let (fusion, fc_att) = if blocks.is_empty() {
            (None, None)
        } else {
            (
                Some(FusionParams::init(&mut rng, blocks.len() * c, c)),
                Some(Dense::zeros(c, cfg.num_links())),
            )
        };
        Ok(Self {
            layout: layout.clone(),
            cfg: cfg.clone(),
            init_rho: PowerAllocation::uniform(cfg.num_bs, cfg.users_per_bs),
            stages: vec![first; stages],
            attention_blocks: blocks,
            fusion,
            fc_att,
            trained: false,
        })
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    /// Blocks whose stage exists in the current (possibly partial) model.
    pub fn active_blocks(&self) -> usize {
        self.attention_blocks.iter().filter(|b| b.position < self.stages.len()).count()
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate_physics()?;
        self.layout.validate()?;
        if self.stages.is_empty() || self.stages.len() > self.layout.stages {
            return Err(Error::InvalidInput("stage count outside the layout".into()));
        }
        let n = self.cfg.num_links();
        let c = self.layout.channels;
        let flat = n * self.cfg.num_bs * c;
        let shapes = [
            (9 * INPUT_CHANNELS, c),
            (1, c),
            (flat, self.layout.hidden),
            (1, self.layout.hidden),
            (self.layout.hidden, n),
            (1, n),
            (flat, n),
        ];
        for s in &self.stages {
            for (t, want) in s.tensors().into_iter().zip(shapes) {
                if t.shape() != want {
                    return Err(Error::Shape(format!("stage tensor {:?}, expected {want:?}", t.shape())));
                }
            }
        }
        let nb = self.attention_blocks.len();
        if self.attention_blocks.iter().map(|b| b.position).collect::<Vec<_>>() != self.layout.attention_positions {
            return Err(Error::InvalidInput("attention blocks disagree with the layout".into()));
        }
        for b in &self.attention_blocks {
            if b.params.tensors().iter().any(|t| t.shape() != (c, c)) {
                return Err(Error::Shape("attention kernel shape".into()));
            }
        }
        match (&self.fusion, &self.fc_att) {
            (None, None) if nb == 0 => {}
            (Some(f), Some(d)) if nb > 0 => {
                if f.first.shape() != (nb * c, c)
                    || f.second.shape() != (c, c)
                    || d.weight.shape() != (c, n)
                    || d.bias.shape() != (1, n)
                {
                    return Err(Error::Shape("fusion or fc_att shape".into()));
                }
            }
            _ => return Err(Error::InvalidInput("fusion parameters must accompany attention blocks".into())),
        }
        if self.tensors().iter().any(|t| t.data().iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidInput("parameters must be finite".into()));
        }
        Ok(())
    }

    /// Every parameter tensor in a fixed order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = self.stages.iter().flat_map(StageParams::tensors).collect();
        out.extend(self.attention_blocks.iter().flat_map(|b| b.params.tensors()));
        if let (Some(f), Some(d)) = (&self.fusion, &self.fc_att) {
            out.extend([&f.first, &f.second, &d.weight, &d.bias]);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = self.stages.iter_mut().flat_map(StageParams::tensors_mut).collect();
        out.extend(self.attention_blocks.iter_mut().flat_map(|b| b.params.tensors_mut()));
        if let (Some(f), Some(d)) = (&mut self.fusion, &mut self.fc_att) {
            out.extend([&mut f.first, &mut f.second, &mut d.weight, &mut d.bias]);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        if v.get("type").and_then(|t| t.as_str()) != Some("masum") {
            return Err(Error::InvalidInput("not a masum model file".into()));
        }
        let m: Self = serde_json::from_value(v)?;
        m.validate()?;
        Ok(m)
    }
}

/// Model output on a tape.
pub struct TapeOutput {
    pub rho: Var,
    /// `f_s` of every active attention block.
    pub attention: Vec<Var>,
}

/// Records the forward pass. `params` are the model's tensors on the tape in
/// [`MasumModel::tensors`] order.
pub fn forward_tape(
    model: &MasumModel,
    g: &ChannelRealization,
    tl: &TapeLinks<'_>,
    t: &mut Tape,
    params: &[Var],
    rho_init: Var,
) -> Result<TapeOutput, AdError> {
    let l = tl.links;
    let (nb, n) = (l.num_bs, l.len());
    let (h, w) = (n, nb);
    let p = h * w;
    let c = model.layout.channels;
    let gain = t.constant(gain_channel(g, l));
    let ns = model.stages.len();
    let blocks = &model.attention_blocks;
    let block_base = 7 * ns;
    let mut att_maps: Vec<Option<Var>> = vec![None; blocks.len()];
    let mut f_s_all = Vec::new();
    let mut rho = rho_init;
    for s in 0..ns {
        let pv = &params[7 * s..7 * s + 7];
        let feats = stage_features(tl, t, rho, gain, w)?;
        let conv = conv3x3(t, feats, h, w, DenseVars { weight: pv[0], bias: pv[1] })?;
        let f_c = t.relu(conv);
        let flat = t.reshape(f_c, 1, p * c)?;
        let hid = dense(t, flat, DenseVars { weight: pv[2], bias: pv[3] })?;
        let hid = t.relu(hid);
        let main = dense(t, hid, DenseVars { weight: pv[4], bias: pv[5] })?;
        let skip = t.matmul(flat, pv[6])?;
        let main = t.add(main, skip)?;
        let mut score = t.reshape(main, n, 1)?;
        for (i, b) in blocks.iter().enumerate() {
            if b.position == s {
                let v = &params[block_base + 4 * i..block_base + 4 * i + 4];
                let (f_a, f_s) = attention_tape(
                    t,
                    f_c,
                    AttentionVars {
                        w1: v[0],
                        w2: v[1],
                        w3: v[2],
                        w_out: v[3],
                    },
                )?;
                att_maps[i] = Some(f_a);
                f_s_all.push(f_s);
            }
        }
        if s + 1 == ns && att_maps.iter().any(Option::is_some) {
            let fb = block_base + 4 * blocks.len();
            let maps: Vec<Var> = att_maps
                .iter()
                .map(|m| m.unwrap_or_else(|| t.constant(Tensor::zeros(p, c))))
                .collect();
            let fused = fuse_tape(t, &maps, params[fb], params[fb + 1])?;
            let pool = t.constant(Tensor::filled(1, p, 1.0 / p as f64));
            let pooled = t.matmul(pool, fused)?;
            let att = dense(t, pooled, DenseVars { weight: params[fb + 2], bias: params[fb + 3] })?;
            let att = t.reshape(att, n, 1)?;
            score = t.add(score, att)?;
        }
        let gated = gate_tape(t, score)?;
        rho = tl.project_feasible(t, gated)?;
    }
    Ok(TapeOutput {
        rho,
        attention: f_s_all,
    })
}

/// The four-channel `P × 4` stage input built from the incoming power.
fn stage_features(tl: &TapeLinks<'_>, t: &mut Tape, rho: Var, gain: Var, width: usize) -> Result<Var, AdError> {
    let l = tl.links;
    let s = tl.signal(t, rho)?;
    let x = tl.disturbance(t, rho)?;
    let gamma = t.div(s, x)?;
    let r = tl.rate(t, gamma)?;
    let d = tl.total_power(t, rho);
    let d2 = t.square(d)?;
    let y = t.div(r, d2)?;
    let y = t.scale(y, l.circuit * l.circuit / l.bandwidth);
    let g1 = t.offset(gamma, 1.0);
    let z = t.div(gamma, g1)?;
    let rb = broadcast_links(t, rho, width)?;
    let yb = broadcast_links(t, y, width)?;
    let zb = broadcast_links(t, z, width)?;
    t.concat_cols(&[gain, rb, yb, zb])
}

fn register_constants(t: &mut Tape, model: &MasumModel) -> Vec<Var> {
    model.tensors().into_iter().map(|x| t.constant(x.clone())).collect()
}

/// Forward pass from `rho_init`.
pub fn masum_forward(model: &MasumModel, g: &ChannelRealization, rho_init: &PowerAllocation) -> Result<PowerAllocation> {
    model.validate()?;
    masum_forward_unchecked(model, g, rho_init)
}

fn masum_forward_unchecked(model: &MasumModel, g: &ChannelRealization, rho_init: &PowerAllocation) -> Result<PowerAllocation> {
    let l = Links::new(g, &model.cfg)?;
    rho_init.grid().check_shape(l.num_bs, l.users_per_bs, "rho_init")?;
    let mut t = Tape::new();
    let tl = l.on_tape(&mut t);
    let params = register_constants(&mut t, model);
    let r0 = t.constant(Tensor::column(rho_init.grid().as_slice().to_vec()));
    let out = forward_tape(model, g, &tl, &mut t, &params, r0)?;
    Ok(PowerAllocation::from_grid_unchecked(l.grid(t.value(out.rho).data().to_vec())))
}

/// Forward pass from the model's initial allocation, with wall-clock timing.
pub fn masum_infer(model: &MasumModel, g: &ChannelRealization) -> Result<(PowerAllocation, f64)> {
    let start = Instant::now();
    let rho = masum_forward_unchecked(model, g, &model.init_rho)?;
    Ok((rho, start.elapsed().as_secs_f64()))
}

/// `f_s` of every attention block on one instance.
pub fn masum_attention_maps(model: &MasumModel, g: &ChannelRealization) -> Result<Vec<Tensor>> {
    model.validate()?;
    let l = Links::new(g, &model.cfg)?;
    let mut t = Tape::new();
    let tl = l.on_tape(&mut t);
    let params = register_constants(&mut t, model);
    let r0 = t.constant(Tensor::column(model.init_rho.grid().as_slice().to_vec()));
    let out = forward_tape(model, g, &tl, &mut t, &params, r0)?;
    Ok(out.attention.iter().map(|&v| t.value(v).clone()).collect())
}

/// `−objective_fp` at the tight auxiliaries of `rho_hat` (that is,
/// `−WSEE(ρ̂)`), plus `λ·mean((ρ̂ − ρ_target)²)` when a target is given.
pub fn masum_loss(
    model: &MasumModel,
    g: &ChannelRealization,
    rho_hat: &PowerAllocation,
    target: Option<(&PowerAllocation, f64)>,
) -> Result<f64> {
    let y = update_y(g, rho_hat, &model.cfg)?;
    let z = update_z(g, rho_hat, &model.cfg)?;
    let mut loss = -objective_fp(g, rho_hat, &y, &z, &model.cfg)?;
    if let Some((t, lambda)) = target {
        loss += lambda * mse(rho_hat.grid(), t.grid())?;
    }
    Ok(loss)
}

/// Loss and parameter gradients for one arrangement of one sample.
fn arrangement_gradient(
    model: &MasumModel,
    arr: &Arrangement,
    target_wsee: f64,
    supervised: f64,
) -> Result<(f64, Vec<Tensor>)> {
    let l = Links::new(&arr.channel, &model.cfg)?;
    let mut t = Tape::new();
    let tl = l.on_tape(&mut t);
    let params: Vec<Var> = model.tensors().into_iter().map(|x| t.input(x.clone())).collect();
    let r0 = t.constant(Tensor::column(model.init_rho.grid().as_slice().to_vec()));
    let out = forward_tape(model, &arr.channel, &tl, &mut t, &params, r0)?;
    let w = tl.wsee(&mut t, out.rho)?;
    let mut loss = t.scale(w, -1.0 / target_wsee.max(1e-300));
    if supervised > 0.0 {
        if let Some(target) = &arr.target {
            let tc = t.constant(Tensor::column(target.grid().as_slice().to_vec()));
            let d = t.sub(out.rho, tc)?;
            let d2 = t.square(d)?;
            let s = t.sum(d2);
            let s = t.scale(s, supervised / l.len() as f64);
            loss = t.add(loss, s)?;
        }
    }
    t.backward(loss)?;
    let grads = params.iter().map(|&v| t.grad(v)).collect::<Result<_, _>>()?;
    Ok((t.scalar(loss), grads))
}

/// Adam state over a list of tensors.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One step; non-finite gradient entries are skipped. Returns how many
    /// entries were skipped.
    pub fn update(&mut self, params: Vec<&mut Tensor>, grads: &[Tensor]) -> usize {
        if self.m.len() != params.len() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
            self.step = 0;
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let mut skipped = 0;
        for (i, (p, g)) in params.into_iter().zip(grads).enumerate() {
            for (j, (x, &d)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                if !d.is_finite() {
                    skipped += 1;
                    continue;
                }
                let m = &mut self.m[i][j];
                let v = &mut self.v[i][j];
                *m = self.beta1 * *m + (1.0 - self.beta1) * d;
                *v = self.beta2 * *v + (1.0 - self.beta2) * d * d;
                *x -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            }
        }
        skipped
    }
}

/// Mean achieved-WSEE ratio over `samples`.
pub fn masum_ratio(model: &MasumModel, samples: &[&Sample]) -> Result<f64> {
    model.validate()?;
    let ratios: Vec<f64> = samples
        .par_iter()
        .map(|s| {
            let rho = masum_forward_unchecked(model, &s.channel, &model.init_rho)?;
            let l = Links::new(&s.channel, &model.cfg)?;
            Ok(l.wsee(rho.grid().as_slice()) / s.target_wsee)
        })
        .collect::<Result<_>>()?;
    Ok(ratios.iter().sum::<f64>() / ratios.len().max(1) as f64)
}

/// Incremental training: round `τ` trains stages `0..=τ` (and the attention
/// pipeline once one of its blocks is active), stage `τ+1` then starts as a
/// copy of stage `τ`. The loss of an arrangement is `−WSEE(ρ̂)/target_wsee`,
/// optionally plus the supervised term; mini-batches are optimised with Adam.
pub fn masum_train(
    train: &[&Sample],
    cfg: &NetworkConfig,
    layout: &MasumLayout,
    hyper: &TrainConfig,
) -> Result<(MasumModel, Vec<LogRow>)> {
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    hyper.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut model = MasumModel::init(cfg, layout, 1, hyper.seed)?;
    let arrangements: Vec<Vec<Arrangement>> = train
        .iter()
        .map(|s| permutation_augment(&s.channel, Some(&s.target_rho), layout.n_perms, &mut rng))
        .collect::<Result<_>>()?;
    let mut items: Vec<(usize, usize)> = (0..train.len())
        .flat_map(|i| (0..layout.n_perms).map(move |j| (i, j)))
        .collect();
    let mut log = Vec::new();
    for round in 0..layout.stages {
        if round > 0 {
            let last = model.stages.last().expect("at least one stage").clone();
            model.stages.push(last);
        }
        let mut adam = Adam::new(hyper.learning_rate);
        for epoch in 0..hyper.epochs {
            items.shuffle(&mut rng);
            let mut total = 0.0;
            for chunk in items.chunks(hyper.batch_size) {
                let parts: Vec<Result<(f64, Vec<Tensor>)>> = chunk
                    .par_iter()
                    .map(|&(i, j)| {
                        arrangement_gradient(&model, &arrangements[i][j], train[i].target_wsee, hyper.supervised_weight)
                    })
                    .collect();
                let mut sum: Vec<Tensor> = model.tensors().iter().map(|x| Tensor::zeros(x.rows(), x.cols())).collect();
                let mut count = 0usize;
                for part in parts.into_iter().flatten() {
                    total += part.0;
                    count += 1;
                    for (acc, g) in sum.iter_mut().zip(&part.1) {
                        for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                            *a += b;
                        }
                    }
                }
                if count == 0 {
                    continue;
                }
                for acc in &mut sum {
                    for a in acc.data_mut() {
                        *a /= count as f64;
                    }
                }
                adam.update(model.tensors_mut(), &sum);
            }
            log.push(LogRow {
                round,
                epoch,
                loss: total / items.len() as f64,
                wsee_ratio: masum_ratio(&model, train)?,
            });
        }
    }
    model.trained = true;
    Ok((model, log))
}
