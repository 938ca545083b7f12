//! Building blocks of the semi-unfolded model, each usable on a tape or
//! directly on values.
//!
//! On the tape a feature map is a `P × C` matrix: one row per spatial
//! position (`P = H·W`, row-major over `(h, w)`), one column per channel.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdError, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::grid::UserGrid;
use crate::links::Links;
use crate::netmodel::{project_feasible, ChannelRealization, PowerAllocation};

/// Real `C × H × W` tensor, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "{channels}x{height}x{width} feature map needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("feature map entries must be finite".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn from_fn(channels: usize, height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for h in 0..height {
                for w in 0..width {
                    data.push(f(c, h, w));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn positions(&self) -> usize {
        self.height * self.width
    }

    pub fn get(&self, c: usize, h: usize, w: usize) -> f64 {
        self.data[(c * self.height + h) * self.width + w]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// The `P × C` layout used on the tape.
    pub fn to_positions(&self) -> Tensor {
        let p = self.positions();
        Tensor::from_fn(p, self.channels, |pos, c| self.data[c * p + pos])
    }

    pub fn from_positions(t: &Tensor, height: usize, width: usize) -> Result<Self> {
        if t.rows() != height * width {
            return Err(Error::Shape(format!("{} positions for a {height}x{width} map", t.rows())));
        }
        let c = t.cols();
        Self::new(
            c,
            height,
            width,
            (0..c).flat_map(|ch| (0..t.rows()).map(move |p| t.get(p, ch))).collect(),
        )
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Fully connected (or 1×1-convolution) layer `x·W + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `in × out`.
    pub weight: Tensor,
    /// `1 × out`.
    pub bias: Tensor,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Tensor::zeros(inputs, outputs),
            bias: Tensor::zeros(1, outputs),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(rng: &mut R, inputs: usize, outputs: usize) -> Self {
        Self {
            weight: glorot(rng, inputs, outputs),
            bias: Tensor::zeros(1, outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.cols()
    }
}

pub fn glorot<R: Rng + ?Sized>(rng: &mut R, inputs: usize, outputs: usize) -> Tensor {
    let a = (6.0 / (inputs + outputs) as f64).sqrt();
    Tensor::from_fn(inputs, outputs, |_, _| rng.random_range(-a..=a))
}

/// A [`Dense`] layer registered on a tape.
#[derive(Debug, Clone, Copy)]
pub struct DenseVars {
    pub weight: Var,
    pub bias: Var,
}

/// Repeats a `1 × C` row over `rows` rows.
pub fn broadcast_row(t: &mut Tape, row: Var, rows: usize) -> Result<Var, AdError> {
    let c = t.value(row).cols();
    t.gather(row, rows, c, (0..rows * c).map(|i| Some(i % c)).collect())
}

/// `x·W + b` with the bias broadcast over the rows of `x`.
pub fn dense(t: &mut Tape, x: Var, d: DenseVars) -> Result<Var, AdError> {
    let xw = t.matmul(x, d.weight)?;
    let rows = t.value(xw).rows();
    let b = broadcast_row(t, d.bias, rows)?;
    t.add(xw, b)
}

/// 3×3 convolution, stride 1, zero padding, as im2col followed by a matmul.
/// `kernel` maps `9·C_in` patch entries (offset-major, then channel) to
/// `C_out` channels.
pub fn conv3x3(t: &mut Tape, x: Var, height: usize, width: usize, kernel: DenseVars) -> Result<Var, AdError> {
    let c_in = t.value(x).cols();
    let p = height * width;
    let mut index = Vec::with_capacity(p * 9 * c_in);
    for h in 0..height as isize {
        for w in 0..width as isize {
            for dh in -1..=1 {
                for dw in -1..=1 {
                    let (hh, ww) = (h + dh, w + dw);
                    let inside = hh >= 0 && ww >= 0 && hh < height as isize && ww < width as isize;
                    for c in 0..c_in {
                        index.push(inside.then(|| (hh as usize * width + ww as usize) * c_in + c));
                    }
                }
            }
        }
    }
    let patches = t.gather(x, p, 9 * c_in, index)?;
    dense(t, patches, kernel)
}

/// Three parallel 1×1 convolutions and an output 1×1 convolution, all
/// `C → C` without bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionBlockParams {
    pub w1: Tensor,
    pub w2: Tensor,
    pub w3: Tensor,
    pub w_out: Tensor,
}

impl AttentionBlockParams {
    /// Glorot-uniform `w1..w3` and a zero output kernel, so a fresh block is
    /// the identity.
    pub fn init<R: Rng + ?Sized>(rng: &mut R, channels: usize) -> Self {
        Self {
            w1: glorot(rng, channels, channels),
            w2: glorot(rng, channels, channels),
            w3: glorot(rng, channels, channels),
            w_out: Tensor::zeros(channels, channels),
        }
    }

    pub fn channels(&self) -> usize {
        self.w1.rows()
    }

    pub(crate) fn tensors(&self) -> [&Tensor; 4] {
        [&self.w1, &self.w2, &self.w3, &self.w_out]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut Tensor; 4] {
        [&mut self.w1, &mut self.w2, &mut self.w3, &mut self.w_out]
    }

    fn check(&self, channels: usize) -> Result<()> {
        for w in self.tensors() {
            if w.shape() != (channels, channels) {
                return Err(Error::Shape(format!(
                    "attention kernels must be {channels}x{channels}, got {:?}",
                    w.shape()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AttentionVars {
    pub w1: Var,
    pub w2: Var,
    pub w3: Var,
    pub w_out: Var,
}

/// Returns `(f_A, f_s)`: the block output and the `P × P` attention matrix.
pub fn attention_tape(t: &mut Tape, f_c: Var, a: AttentionVars) -> Result<(Var, Var), AdError> {
    let f1 = t.matmul(f_c, a.w1)?;
    let f2 = t.matmul(f_c, a.w2)?;
    let f3 = t.matmul(f_c, a.w3)?;
    let f2t = t.transpose(f2)?;
    let scores = t.matmul(f1, f2t)?;
    let f_s = t.softmax(scores);
    let f_cal = t.matmul(f_s, f3)?;
    let f_hat = t.matmul(f_cal, a.w_out)?;
    Ok((t.add(f_hat, f_c)?, f_s))
}

fn attention_values(f_c: &FeatureMap, params: &AttentionBlockParams) -> Result<(Tensor, Tensor)> {
    params.check(f_c.channels())?;
    let mut t = Tape::new();
    let x = t.constant(f_c.to_positions());
    let a = AttentionVars {
        w1: t.constant(params.w1.clone()),
        w2: t.constant(params.w2.clone()),
        w3: t.constant(params.w3.clone()),
        w_out: t.constant(params.w_out.clone()),
    };
    let (out, f_s) = attention_tape(&mut t, x, a)?;
    Ok((t.value(out).clone(), t.value(f_s).clone()))
}

/// Non-local attention with a residual connection: `f_A = f̂_cal + f_c`.
pub fn attention_block(f_c: &FeatureMap, params: &AttentionBlockParams) -> Result<FeatureMap> {
    let (out, _) = attention_values(f_c, params)?;
    FeatureMap::from_positions(&out, f_c.height(), f_c.width())
}

/// The row-stochastic `P × P` matrix `f_s` of [`attention_block`].
pub fn attention_weights(f_c: &FeatureMap, params: &AttentionBlockParams) -> Result<Tensor> {
    Ok(attention_values(f_c, params)?.1)
}

/// Two successive 1×1 convolutions over channel-concatenated maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    /// `(n_maps·C) × C`.
    pub first: Tensor,
    /// `C × C`.
    pub second: Tensor,
}

impl FusionParams {
    pub fn init<R: Rng + ?Sized>(rng: &mut R, inputs: usize, channels: usize) -> Self {
        Self {
            first: glorot(rng, inputs, channels),
            second: glorot(rng, channels, channels),
        }
    }
}

pub fn fuse_tape(t: &mut Tape, maps: &[Var], first: Var, second: Var) -> Result<Var, AdError> {
    let cat = t.concat_cols(maps)?;
    let h = t.matmul(cat, first)?;
    t.matmul(h, second)
}

pub fn fuse_features(maps: &[FeatureMap], fusion: &FusionParams) -> Result<FeatureMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::InvalidInput("fusion needs at least one map".into()))?;
    let (h, w) = (first.height(), first.width());
    if maps.iter().any(|m| m.height() != h || m.width() != w) {
        return Err(Error::Shape("fused maps must share spatial dimensions".into()));
    }
    let total: usize = maps.iter().map(FeatureMap::channels).sum();
    if fusion.first.rows() != total || fusion.second.rows() != fusion.first.cols() {
        return Err(Error::Shape(format!(
            "fusion kernels {:?}, {:?} do not fit {total} input channels",
            fusion.first.shape(),
            fusion.second.shape()
        )));
    }
    let mut t = Tape::new();
    let vars: Vec<Var> = maps.iter().map(|m| t.constant(m.to_positions())).collect();
    let a = t.constant(fusion.first.clone());
    let b = t.constant(fusion.second.clone());
    let out = fuse_tape(&mut t, &vars, a, b)?;
    FeatureMap::from_positions(t.value(out), h, w)
}

/// `sigmoid(s)·s` for a column `s` on the tape, before projection.
pub fn gate_tape(t: &mut Tape, s: Var) -> Result<Var, AdError> {
    let g = t.sigmoid(s);
    t.mul(g, s)
}

/// `s = p_att + p_main`, `p̂ = project_feasible(sigmoid(s)·s)`.
pub fn refine(p_att: &UserGrid, p_main: &UserGrid) -> Result<PowerAllocation> {
    if p_att.shape() != p_main.shape() {
        return Err(Error::Shape("p_att and p_main differ in shape".into()));
    }
    let gated = p_att.zip_map(p_main, |a, b| {
        let s = a + b;
        crate::autodiff::sigmoid(s) * s
    });
    project_feasible(&gated)
}

/// One arrangement produced by [`permutation_augment`].
#[derive(Debug, Clone, PartialEq)]
pub struct Arrangement {
    /// `perms[m][k]` is the original index of the user now at position `k`.
    pub perms: Vec<Vec<usize>>,
    pub channel: ChannelRealization,
    pub target: Option<PowerAllocation>,
}

/// The identity arrangement followed by `n_perms − 1` random per-cell
/// reorderings of the users, applied to the gain rows and to the target.
pub fn permutation_augment<R: Rng + ?Sized>(
    g: &ChannelRealization,
    target: Option<&PowerAllocation>,
    n_perms: usize,
    rng: &mut R,
) -> Result<Vec<Arrangement>> {
    if n_perms == 0 {
        return Err(Error::InvalidInput("n_perms must be at least 1".into()));
    }
    let (nb, nu) = (g.num_bs(), g.users_per_bs());
    if let Some(t) = target {
        t.grid().check_shape(nb, nu, "target")?;
    }
    let identity: Vec<Vec<usize>> = vec![(0..nu).collect(); nb];
    let mut out = Vec::with_capacity(n_perms);
    for i in 0..n_perms {
        let perms = if i == 0 {
            identity.clone()
        } else {
            (0..nb)
                .map(|_| {
                    let mut p: Vec<usize> = (0..nu).collect();
                    p.shuffle(rng);
                    p
                })
                .collect()
        };
        out.push(apply_permutation(g, target, perms));
    }
    Ok(out)
}

pub fn apply_permutation(
    g: &ChannelRealization,
    target: Option<&PowerAllocation>,
    perms: Vec<Vec<usize>>,
) -> Arrangement {
    let channel = g.permuted_unchecked(&perms);
    let target = target.map(|t| {
        let grid = UserGrid::from_fn(g.num_bs(), g.users_per_bs(), |m, k| t.get(m, perms[m][k]));
        PowerAllocation::from_grid_unchecked(grid)
    });
    Arrangement { perms, channel, target }
}

/// Inverse of a per-cell permutation.
pub fn invert_permutation(perms: &[Vec<usize>]) -> Vec<Vec<usize>> {
    perms
        .iter()
        .map(|p| {
            let mut inv = vec![0; p.len()];
            for (k, &src) in p.iter().enumerate() {
                inv[src] = k;
            }
            inv
        })
        .collect()
}

/// Per-link column on the tape repeated across the `width` columns of the
/// gain image, giving a `P × 1` channel.
pub(crate) fn broadcast_links(t: &mut Tape, col: Var, width: usize) -> Result<Var, AdError> {
    let n = t.value(col).len();
    t.gather(col, n * width, 1, (0..n * width).map(|i| Some(i / width)).collect())
}

/// Gain image channel, `10·log10(G·P/σ²)/30`, as a `P × 1` column.
pub(crate) fn gain_channel(g: &ChannelRealization, l: &Links) -> Tensor {
    let raw = g.raw();
    Tensor::column(
        raw.iter()
            .map(|v| 10.0 * (v * l.p_max / l.noise).log10() / 30.0)
            .collect(),
    )
}
