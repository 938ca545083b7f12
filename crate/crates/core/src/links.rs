//! Flattened per-link view of one channel realisation.
//!
//! Link `e = m·K + k` is user `k` of cell `m`. Interference is linear in the
//! allocation, `I = C·ρ`, where `C[u][e]` is the power that link `e`'s
//! transmit coefficient leaks into victim `u` (SIC-earlier users of the same
//! cell and every user of every other cell). Solvers, the unfolded models and
//! their tape versions all evaluate the physics through this one layout.

use crate::autodiff::{AdError, Tape, Tensor, Var};
use crate::error::Result;
use crate::grid::UserGrid;
use crate::netmodel::{ChannelRealization, NetworkConfig};

#[derive(Debug, Clone)]
pub struct Links {
    pub num_bs: usize,
    pub users_per_bs: usize,
    /// `G[m][k][m] · P_max` per link.
    pub gp: Vec<f64>,
    /// Interference coupling, `n × n`, already scaled by `P_max`.
    pub coupling: Tensor,
    pub weights: Vec<f64>,
    pub noise: f64,
    pub p_max: f64,
    pub circuit: f64,
    pub bandwidth: f64,
}

impl Links {
    pub fn new(g: &ChannelRealization, cfg: &NetworkConfig) -> Result<Self> {
        g.check_matches(cfg)?;
        let (nb, nu) = (cfg.num_bs, cfg.users_per_bs);
        let n = nb * nu;
        let p = cfg.p_max;
        let coupling = Tensor::from_fn(n, n, |u, e| {
            let (m, k) = (u / nu, u % nu);
            let (src, j) = (e / nu, e % nu);
            if src == m {
                if g.decoded_before(m, j, k) {
                    g.direct(m, k) * p
                } else {
                    0.0
                }
            } else {
                g.gain(m, k, src) * p
            }
        });
        Ok(Self {
            num_bs: nb,
            users_per_bs: nu,
            gp: (0..n).map(|e| g.direct(e / nu, e % nu) * p).collect(),
            coupling,
            weights: cfg.weights.as_slice().to_vec(),
            noise: cfg.noise_power,
            p_max: p,
            circuit: cfg.circuit_power,
            bandwidth: cfg.bandwidth,
        })
    }

    pub fn len(&self) -> usize {
        self.gp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gp.is_empty()
    }

    pub fn grid(&self, v: Vec<f64>) -> UserGrid {
        UserGrid::from_vec(self.num_bs, self.users_per_bs, v).expect("link vector length")
    }

    /// Interference plus noise, `C·ρ + σ²`.
    pub fn disturbance(&self, rho: &[f64]) -> Vec<f64> {
        let n = self.len();
        let c = self.coupling.data();
        (0..n)
            .map(|u| {
                let row = &c[u * n..(u + 1) * n];
                row.iter().zip(rho).map(|(a, r)| a * r).sum::<f64>() + self.noise
            })
            .collect()
    }

    pub fn signal(&self, rho: &[f64]) -> Vec<f64> {
        self.gp.iter().zip(rho).map(|(g, r)| g * r).collect()
    }

    pub fn sinr(&self, rho: &[f64]) -> Vec<f64> {
        let x = self.disturbance(rho);
        self.signal(rho).iter().zip(&x).map(|(s, x)| s / x).collect()
    }

    pub fn rate(&self, sinr: &[f64]) -> Vec<f64> {
        sinr.iter().map(|g| self.bandwidth * g.ln_1p() / std::f64::consts::LN_2).collect()
    }

    pub fn total_power(&self, rho: &[f64]) -> Vec<f64> {
        rho.iter().map(|r| r * self.p_max + self.circuit).collect()
    }

    pub fn wsee(&self, rho: &[f64]) -> f64 {
        let rate = self.rate(&self.sinr(rho));
        rate.iter()
            .zip(rho)
            .zip(&self.weights)
            .map(|((r, p), w)| if *w == 0.0 { 0.0 } else { w * r / (p * self.p_max + self.circuit) })
            .sum()
    }

    /// Sum of the coefficients of each link's own BS, repeated per link.
    pub fn row_sums(&self, rho: &[f64]) -> Vec<f64> {
        let nu = self.users_per_bs;
        (0..self.len())
            .map(|e| {
                let m = e / nu;
                rho[m * nu..(m + 1) * nu].iter().sum()
            })
            .collect()
    }

    /// `n × n` block-diagonal of ones; `B·ρ` gives [`Links::row_sums`].
    pub fn row_sum_matrix(&self) -> Tensor {
        let nu = self.users_per_bs;
        Tensor::from_fn(self.len(), self.len(), |a, b| if a / nu == b / nu { 1.0 } else { 0.0 })
    }

    /// Registers the constants on a tape.
    pub fn on_tape<'a>(&'a self, tape: &mut Tape) -> TapeLinks<'a> {
        TapeLinks {
            links: self,
            gp: tape.constant(Tensor::column(self.gp.clone())),
            coupling: tape.constant(self.coupling.clone()),
            coupling_t: tape.constant(self.coupling.transpose()),
            weights: tape.constant(Tensor::column(self.weights.clone())),
            row_sum: tape.constant(self.row_sum_matrix()),
        }
    }
}

/// [`Links`] constants living on a particular tape. All link vectors are
/// `n × 1` columns.
#[derive(Debug, Clone, Copy)]
pub struct TapeLinks<'a> {
    pub links: &'a Links,
    pub gp: Var,
    pub coupling: Var,
    pub coupling_t: Var,
    pub weights: Var,
    pub row_sum: Var,
}

impl TapeLinks<'_> {
    pub fn disturbance(&self, t: &mut Tape, rho: Var) -> Result<Var, AdError> {
        let i = t.matmul(self.coupling, rho)?;
        Ok(t.offset(i, self.links.noise))
    }

    pub fn signal(&self, t: &mut Tape, rho: Var) -> Result<Var, AdError> {
        t.mul(self.gp, rho)
    }

    pub fn sinr(&self, t: &mut Tape, rho: Var) -> Result<Var, AdError> {
        let s = self.signal(t, rho)?;
        let x = self.disturbance(t, rho)?;
        t.div(s, x)
    }

    /// `B·log2(1 + γ)`.
    pub fn rate(&self, t: &mut Tape, sinr: Var) -> Result<Var, AdError> {
        let a = t.offset(sinr, 1.0);
        let l = t.log2(a)?;
        Ok(t.scale(l, self.links.bandwidth))
    }

    pub fn total_power(&self, t: &mut Tape, rho: Var) -> Var {
        let p = t.scale(rho, self.links.p_max);
        t.offset(p, self.links.circuit)
    }

    /// `Σ ω·v`.
    pub fn weighted_sum(&self, t: &mut Tape, v: Var) -> Result<Var, AdError> {
        let w = t.mul(self.weights, v)?;
        Ok(t.sum(w))
    }

    pub fn wsee(&self, t: &mut Tape, rho: Var) -> Result<Var, AdError> {
        let g = self.sinr(t, rho)?;
        let r = self.rate(t, g)?;
        let d = self.total_power(t, rho);
        let ee = t.div(r, d)?;
        self.weighted_sum(t, ee)
    }

    /// Per-link sums of the own-BS coefficients.
    pub fn row_sums(&self, t: &mut Tape, rho: Var) -> Result<Var, AdError> {
        t.matmul(self.row_sum, rho)
    }

    /// Clamp to `[0, 1]` and rescale over-budget rows. Whether a row is
    /// rescaled is decided on the current values and held fixed.
    pub fn project_feasible(&self, t: &mut Tape, raw: Var) -> Result<Var, AdError> {
        let c = t.clamp(raw, 0.0, 1.0);
        let sums = self.links.row_sums(t.value(c).data());
        if sums.iter().all(|&s| s <= 1.0) {
            return Ok(c);
        }
        let s = self.row_sums(t, c)?;
        let mask: Vec<f64> = sums.iter().map(|&s| if s > 1.0 { 1.0 } else { 0.0 }).collect();
        let keep: Vec<f64> = mask.iter().map(|m| 1.0 - m).collect();
        let mask = t.constant(Tensor::column(mask));
        let keep = t.constant(Tensor::column(keep));
        let one = t.scalar_constant(1.0);
        let masked = t.mul(mask, s)?;
        let denom = t.add(masked, keep)?;
        let factor = t.div(one, denom)?;
        t.mul(c, factor)
    }
}
