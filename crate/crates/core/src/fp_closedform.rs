//! Algorithm 2: Lagrange-dual plus multidimensional quadratic transform,
//! giving a loop of closed-form updates.
//!
//! With `S` the received signal power and `X = I + σ²`, the dual transform of
//! the rate is
//!
//! ```text
//! R(ρ, γ) = B·log2(1+γ) − (B/ln2)·γ + (B/ln2)·(1+γ)·S / (S + X)
//! ```
//!
//! which equals `B·log2(1+S/X)` at `γ = S/X`. Its quadratic transform is
//!
//! ```text
//! R(ρ, γ, z) = B·log2(1+γ) − (B/ln2)·γ + (1/ln2)·(2z·√(B(1+γ)S) − z²(S + X))
//! ```
//!
//! tight at `z = √(B(1+γ)S) / (S + X)`.
//!
//! The default power update maximises, per link and in closed form, the
//! surrogate obtained by linearising `2y√R` at the current rate and every
//! cross-link interference term at the current allocation. Its gradient at
//! the current point is the WSEE gradient, so fixed points are stationary.
//! Per-BS budgets are met by water-filling a common multiplier; an update
//! that would lower the WSEE is backtracked along the segment from the
//! current allocation.

use std::f64::consts::LN_2;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{AdError, Tape, Var};
use crate::error::{Error, Result};
use crate::fp_numerical::{update_y, RhoRule, SolverOptions, SolverReport};
use crate::grid::UserGrid;
use crate::links::{Links, TapeLinks};
use crate::netmodel::{
    self, interference_unchecked, project_feasible_unchecked, signal_unchecked, ChannelRealization,
    NetworkConfig, PowerAllocation,
};

/// Iterate of Algorithm 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfState {
    pub rho: PowerAllocation,
    pub gamma: UserGrid,
    pub y: UserGrid,
    pub z: UserGrid,
}

impl CfState {
    /// Every auxiliary at its optimum for `rho`: `γ = SINR`, then `z` and `y`.
    pub fn tight(g: &ChannelRealization, rho: &PowerAllocation, cfg: &NetworkConfig) -> Result<Self> {
        let gamma = update_gamma(g, rho, cfg)?;
        let z = update_z_cf(g, rho, &gamma, cfg)?;
        let y = update_y(g, rho, cfg)?;
        Ok(Self {
            rho: rho.clone(),
            gamma,
            y,
            z,
        })
    }

    fn check(&self, g: &ChannelRealization, cfg: &NetworkConfig) -> Result<()> {
        g.check_matches(cfg)?;
        let (nb, nu) = (cfg.num_bs, cfg.users_per_bs);
        self.rho.grid().check_shape(nb, nu, "rho")?;
        self.gamma.check_shape(nb, nu, "gamma")?;
        self.y.check_shape(nb, nu, "y")?;
        self.z.check_shape(nb, nu, "z")
    }
}

fn check(g: &ChannelRealization, rho: &PowerAllocation, cfg: &NetworkConfig) -> Result<()> {
    g.check_matches(cfg)?;
    rho.grid().check_shape(cfg.num_bs, cfg.users_per_bs, "power allocation")
}

/// Interference power without noise.
pub fn interference(g: &ChannelRealization, rho: &PowerAllocation, cfg: &NetworkConfig) -> Result<UserGrid> {
    netmodel::interference(g, rho.grid(), cfg)
}

/// `γ = SINR(ρ)`.
pub fn update_gamma(g: &ChannelRealization, rho: &PowerAllocation, cfg: &NetworkConfig) -> Result<UserGrid> {
    netmodel::sinr(g, rho, cfg)
}

fn signal_and_disturbance(g: &ChannelRealization, rho: &PowerAllocation, cfg: &NetworkConfig) -> (UserGrid, UserGrid) {
    let s = signal_unchecked(g, rho.grid(), cfg.p_max);
    let x = interference_unchecked(g, rho.grid(), cfg.p_max).map(|i| i + cfg.noise_power);
    (s, x)
}

/// Lagrange-dual rate.
pub fn rate_lagrange(
    g: &ChannelRealization,
    rho: &PowerAllocation,
    gamma: &UserGrid,
    cfg: &NetworkConfig,
) -> Result<UserGrid> {
    check(g, rho, cfg)?;
    gamma.check_shape(cfg.num_bs, cfg.users_per_bs, "gamma")?;
    let (s, x) = signal_and_disturbance(g, rho, cfg);
    let b = cfg.bandwidth;
    Ok(UserGrid::from_fn(cfg.num_bs, cfg.users_per_bs, |m, k| {
        let (gm, sm, xm) = (gamma.get(m, k), s.get(m, k), x.get(m, k));
        b * gm.ln_1p() / LN_2 - b * gm / LN_2 + b * (1.0 + gm) * sm / ((sm + xm) * LN_2)
    }))
}

/// Quadratic transform of the Lagrange-dual rate.
pub fn rate_quadratic(
    g: &ChannelRealization,
    rho: &PowerAllocation,
    gamma: &UserGrid,
    z: &UserGrid,
    cfg: &NetworkConfig,
) -> Result<UserGrid> {
    check(g, rho, cfg)?;
    gamma.check_shape(cfg.num_bs, cfg.users_per_bs, "gamma")?;
    z.check_shape(cfg.num_bs, cfg.users_per_bs, "z")?;
    let (s, x) = signal_and_disturbance(g, rho, cfg);
    let b = cfg.bandwidth;
    Ok(UserGrid::from_fn(cfg.num_bs, cfg.users_per_bs, |m, k| {
        let (gm, zm, sm, xm) = (gamma.get(m, k), z.get(m, k), s.get(m, k), x.get(m, k));
        b * gm.ln_1p() / LN_2 - b * gm / LN_2
            + (2.0 * zm * (b * (1.0 + gm) * sm).sqrt() - zm * zm * (sm + xm)) / LN_2
    }))
}

/// `z = √(B·g·ρP·(1+γ)) / (S + I + σ²)`.
pub fn update_z_cf(
    g: &ChannelRealization,
    rho: &PowerAllocation,
    gamma: &UserGrid,
    cfg: &NetworkConfig,
) -> Result<UserGrid> {
    check(g, rho, cfg)?;
    gamma.check_shape(cfg.num_bs, cfg.users_per_bs, "gamma")?;
    let (s, x) = signal_and_disturbance(g, rho, cfg);
    Ok(UserGrid::from_fn(cfg.num_bs, cfg.users_per_bs, |m, k| {
        let (sm, xm) = (s.get(m, k), x.get(m, k));
        (cfg.bandwidth * (1.0 + gamma.get(m, k)) * sm).sqrt() / (sm + xm)
    }))
}

/// `Σ ω (2y√R(ρ,γ,z) − y²(ρP_max + p_c))`.
pub fn objective_cf(g: &ChannelRealization, state: &CfState, cfg: &NetworkConfig) -> Result<f64> {
    state.check(g, cfg)?;
    let r = rate_quadratic(g, &state.rho, &state.gamma, &state.z, cfg)?;
    let mut total = 0.0;
    for m in 0..cfg.num_bs {
        for k in 0..cfg.users_per_bs {
            let rq = r.get(m, k);
            if rq < 0.0 {
                return Err(Error::Domain {
                    bs: m,
                    user: k,
                    what: format!("transformed rate {rq} is negative"),
                });
            }
            let y = state.y.get(m, k);
            let d = state.rho.get(m, k) * cfg.p_max + cfg.circuit_power;
            total += cfg.weights.get(m, k) * (2.0 * y * rq.sqrt() - y * y * d);
        }
    }
    Ok(total)
}

/// Quadratic-transform rate on a tape.
pub fn rate_quadratic_tape(tl: &TapeLinks<'_>, t: &mut Tape, rho: Var, gamma: Var, z: Var) -> Result<Var, AdError> {
    let b = tl.links.bandwidth;
    let s = tl.signal(t, rho)?;
    let x = tl.disturbance(t, rho)?;
    let g1 = t.offset(gamma, 1.0);
    let lg = t.log2(g1)?;
    let head = t.scale(lg, b);
    let lin = t.scale(gamma, b / LN_2);
    let head = t.sub(head, lin)?;
    let bs = t.mul(g1, s)?;
    let bs = t.scale(bs, b);
    let root = t.sqrt(bs)?;
    let zr = t.mul(z, root)?;
    let zr = t.scale(zr, 2.0 / LN_2);
    let sx = t.add(s, x)?;
    let z2 = t.square(z)?;
    let q = t.mul(z2, sx)?;
    let q = t.scale(q, 1.0 / LN_2);
    let tail = t.sub(zr, q)?;
    t.add(head, tail)
}

/// `objective_cf` on a tape.
pub fn objective_cf_tape(
    tl: &TapeLinks<'_>,
    t: &mut Tape,
    rho: Var,
    gamma: Var,
    y: Var,
    z: Var,
) -> Result<Var, AdError> {
    let rq = rate_quadratic_tape(tl, t, rho, gamma, z)?;
    let rr = t.sqrt(rq)?;
    let yr = t.mul(y, rr)?;
    let gain = t.scale(yr, 2.0);
    let y2 = t.square(y)?;
    let d = tl.total_power(t, rho);
    let cost = t.mul(y2, d)?;
    let per = t.sub(gain, cost)?;
    tl.weighted_sum(t, per)
}

/// Coefficients of the separable surrogate maximised by the derived rule:
/// `Σ_e c1_e·S_e/(S_e + X0_e) − β_e·ρ_e`.
#[derive(Debug, Clone)]
pub(crate) struct DerivedCoeffs {
    pub c1: Vec<f64>,
    pub beta: Vec<f64>,
    pub x0: Vec<f64>,
    pub degenerate: Vec<bool>,
}

pub(crate) fn derived_coeffs(l: &Links, rho0: &[f64], gamma: &[f64], y: &[f64]) -> DerivedCoeffs {
    let n = l.len();
    let x0 = l.disturbance(rho0);
    let s0 = l.signal(rho0);
    let r0: Vec<f64> = (0..n).map(|e| l.bandwidth * (s0[e] / x0[e]).ln_1p() / LN_2).collect();
    let degenerate: Vec<bool> = (0..n).map(|e| !(y[e] > 0.0 && r0[e] > 0.0)).collect();
    let c1: Vec<f64> = (0..n)
        .map(|e| {
            if degenerate[e] {
                0.0
            } else {
                l.weights[e] * (y[e] / r0[e].sqrt()) * l.bandwidth * (1.0 + gamma[e]) / LN_2
            }
        })
        .collect();
    let v: Vec<f64> = (0..n).map(|u| c1[u] * s0[u] / (s0[u] + x0[u]).powi(2)).collect();
    let c = l.coupling.data();
    let beta = (0..n)
        .map(|e| {
            let cross: f64 = (0..n).map(|u| c[u * n + e] * v[u]).sum();
            l.weights[e] * y[e] * y[e] * l.p_max + cross
        })
        .collect();
    DerivedCoeffs {
        c1,
        beta,
        x0,
        degenerate,
    }
}

/// Unconstrained maximiser of `c1·S/(S + x) − β·ρ` over `ρ ∈ [0, 1]`,
/// with `β` shifted by the multiplier `lam`.
#[inline]
pub(crate) fn entry_rho(c1: f64, beta: f64, x: f64, gp: f64, lam: f64) -> f64 {
    if !(c1 > 0.0) || !(gp > 0.0) {
        return 0.0;
    }
    let d = beta + lam;
    if !(d > 0.0) {
        return 1.0;
    }
    (((c1 * x * gp / d).sqrt() - x) / gp).clamp(0.0, 1.0)
}

/// Derived closed-form update; returns the allocation and the water-filling
/// multiplier of every BS (0 where the budget is slack).
pub(crate) fn derived_rho(l: &Links, dc: &DerivedCoeffs) -> (Vec<f64>, Vec<f64>) {
    let nu = l.users_per_bs;
    let mut rho = vec![0.0; l.len()];
    let mut lambdas = vec![0.0; l.num_bs];
    for m in 0..l.num_bs {
        let idx = m * nu..(m + 1) * nu;
        let at = |lam: f64| -> Vec<f64> {
            idx.clone()
                .map(|e| entry_rho(dc.c1[e], dc.beta[e], dc.x0[e], l.gp[e], lam))
                .collect()
        };
        let mut row = at(0.0);
        if row.iter().sum::<f64>() > 1.0 {
            let (mut lo, mut hi) = (0.0, dc.beta[idx.clone()].iter().cloned().fold(1e-300, f64::max));
            while at(hi).iter().sum::<f64>() > 1.0 {
                lo = hi;
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if at(mid).iter().sum::<f64>() > 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            row = at(hi);
            lambdas[m] = hi;
        }
        rho[idx].copy_from_slice(&row);
    }
    (rho, lambdas)
}

/// Update as printed in the source derivation. Entries whose denominator
/// `4y⁴z²(1+γ)gP` vanishes are set to 0 and flagged.
pub(crate) fn printed_rho(l: &Links, rho0: &[f64], gamma: &[f64], y: &[f64], z: &[f64]) -> (Vec<f64>, Vec<bool>) {
    let x0 = l.disturbance(rho0);
    let mut flags = vec![false; l.len()];
    let rho = (0..l.len())
        .map(|e| {
            let (gm, ym, zm, gp) = (gamma[e], y[e], z[e], l.gp[e]);
            let interf = x0[e] - l.noise;
            let den = 4.0 * ym.powi(4) * zm * zm * (1.0 + gm) * gp;
            if !(den != 0.0 && den.is_finite()) {
                flags[e] = true;
                return 0.0;
            }
            let inner = (zm * (1.0 + gm) * gp).powi(2)
                - ym * ym * ((1.0 + gm).log2() + gm + zm * zm * (1.0 - interf - l.noise));
            (inner * inner / den).min(1.0)
        })
        .collect();
    (rho, flags)
}

/// Backtracks `rho0 + t·(rho_new − rho0)`, `t = 1, ½, ¼, …`, until the WSEE is
/// no lower than `f0`. Returns the accepted point and `t` (0 if none passed).
pub(crate) fn safeguard(l: &Links, rho0: &[f64], f0: f64, rho_new: &[f64]) -> (Vec<f64>, f64) {
    let mut t = 1.0;
    for _ in 0..50 {
        let cand: Vec<f64> = rho0.iter().zip(rho_new).map(|(a, b)| a + t * (b - a)).collect();
        if l.wsee(&cand) >= f0 {
            return (cand, t);
        }
        t *= 0.5;
    }
    (rho0.to_vec(), 0.0)
}

/// What one Algorithm 2 iteration (or one unfolded layer) produces.
#[derive(Debug, Clone)]
pub(crate) struct CfIteration {
    pub gamma: Vec<f64>,
    /// Output after the safeguard and `project_feasible`.
    pub rho: Vec<f64>,
    pub t: f64,
    pub lambdas: Vec<f64>,
    pub degenerate: Vec<bool>,
}

/// `z` from the incoming `γ`, fresh `γ = SINR(ρ)` (optionally blended as
/// `(1−α)γ + αθ`), `y`, then the power update.
pub(crate) fn cf_iteration(
    l: &Links,
    rho: &[f64],
    gamma_prev: &[f64],
    gamma_blend: Option<(&[f64], &[f64])>,
    rule: RhoRule,
    use_safeguard: bool,
) -> CfIteration {
    let n = l.len();
    let x0 = l.disturbance(rho);
    let s0 = l.signal(rho);
    let z: Vec<f64> = (0..n)
        .map(|e| (l.bandwidth * (1.0 + gamma_prev[e]) * s0[e]).sqrt() / (s0[e] + x0[e]))
        .collect();
    let sinr: Vec<f64> = (0..n).map(|e| s0[e] / x0[e]).collect();
    let gamma: Vec<f64> = match gamma_blend {
        None => sinr,
        Some((alpha, theta)) => (0..n).map(|e| (1.0 - alpha[e]) * sinr[e] + alpha[e] * theta[e]).collect(),
    };
    let rate = l.rate(&l.sinr(rho));
    let y: Vec<f64> = (0..n)
        .map(|e| rate[e].sqrt() / (rho[e] * l.p_max + l.circuit))
        .collect();
    let (rho_cf, lambdas, degenerate) = match rule {
        RhoRule::Derived => {
            let dc = derived_coeffs(l, rho, &gamma, &y);
            let (r, lam) = derived_rho(l, &dc);
            (r, lam, dc.degenerate)
        }
        RhoRule::Printed => {
            let (r, flags) = printed_rho(l, rho, &gamma, &y, &z);
            let r = project_feasible_unchecked(&l.grid(r)).into_vec();
            (r, vec![0.0; l.num_bs], flags)
        }
    };
    let (guarded, t) = if use_safeguard {
        safeguard(l, rho, l.wsee(rho), &rho_cf)
    } else {
        (rho_cf.clone(), 1.0)
    };
    let out = project_feasible_unchecked(&l.grid(guarded)).into_vec();
    CfIteration {
        gamma,
        rho: out,
        t,
        lambdas,
        degenerate,
    }
}

/// Result of a single closed-form power update.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoUpdate {
    pub rho: PowerAllocation,
    /// Links forced to zero power because their update was undefined.
    pub degenerate: Vec<[usize; 2]>,
}

fn flagged(nu: usize, flags: &[bool]) -> Vec<[usize; 2]> {
    flags
        .iter()
        .enumerate()
        .filter(|(_, f)| **f)
        .map(|(e, _)| [e / nu, e % nu])
        .collect()
}

/// Closed-form power update at fixed `(γ, y, z)`, linearised around
/// `state.rho`. No safeguard is applied here.
pub fn update_rho_closedform(
    g: &ChannelRealization,
    state: &CfState,
    cfg: &NetworkConfig,
    rule: RhoRule,
) -> Result<RhoUpdate> {
    state.check(g, cfg)?;
    let l = Links::new(g, cfg)?;
    let rho0 = state.rho.grid().as_slice();
    let (rho, flags) = match rule {
        RhoRule::Derived => {
            let dc = derived_coeffs(&l, rho0, state.gamma.as_slice(), state.y.as_slice());
            (derived_rho(&l, &dc).0, dc.degenerate)
        }
        RhoRule::Printed => printed_rho(&l, rho0, state.gamma.as_slice(), state.y.as_slice(), state.z.as_slice()),
    };
    Ok(RhoUpdate {
        rho: PowerAllocation::from_grid_unchecked(project_feasible_unchecked(&l.grid(rho))),
        degenerate: flagged(cfg.users_per_bs, &flags),
    })
}

/// The separable concave function of `rho` that the derived rule maximises
/// over the feasible set, built around `state.rho`.
pub fn rho_surrogate(g: &ChannelRealization, state: &CfState, cfg: &NetworkConfig, rho: &PowerAllocation) -> Result<f64> {
    state.check(g, cfg)?;
    check(g, rho, cfg)?;
    let l = Links::new(g, cfg)?;
    let dc = derived_coeffs(&l, state.rho.grid().as_slice(), state.gamma.as_slice(), state.y.as_slice());
    Ok(rho
        .grid()
        .as_slice()
        .iter()
        .enumerate()
        .map(|(e, &r)| {
            let s = l.gp[e] * r;
            let share = if s + dc.x0[e] > 0.0 { s / (s + dc.x0[e]) } else { 0.0 };
            dc.c1[e] * share - dc.beta[e] * r
        })
        .sum())
}

/// Algorithm 2 from the uniform `1/(2K)` allocation.
pub fn solve_algorithm2(g: &ChannelRealization, cfg: &NetworkConfig, opts: &SolverOptions) -> Result<SolverReport> {
    let init = PowerAllocation::uniform(cfg.num_bs, cfg.users_per_bs);
    solve_algorithm2_from(g, cfg, opts, &init)
}

pub fn solve_algorithm2_from(
    g: &ChannelRealization,
    cfg: &NetworkConfig,
    opts: &SolverOptions,
    init: &PowerAllocation,
) -> Result<SolverReport> {
    let start = Instant::now();
    cfg.validate_physics()?;
    if !(opts.epsilon > 0.0) || opts.max_outer_iters == 0 {
        return Err(Error::InvalidInput("epsilon must be positive and max_outer_iters at least 1".into()));
    }
    check(g, init, cfg)?;
    let l = Links::new(g, cfg)?;
    let mut rho = init.grid().as_slice().to_vec();
    let mut gamma = l.sinr(&rho);
    let mut prev = l.wsee(&rho);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut degenerate = Vec::new();
    for _ in 0..opts.max_outer_iters {
        let it = cf_iteration(&l, &rho, &gamma, None, opts.rho_rule, opts.safeguard);
        degenerate = it.degenerate;
        rho = it.rho;
        gamma = it.gamma;
        let f = l.wsee(&rho);
        trace.push(f);
        if opts.converged(prev, f) {
            converged = true;
            break;
        }
        prev = f;
    }
    Ok(SolverReport {
        iterations: trace.len(),
        objective_trace: trace,
        converged,
        wall_time_s: start.elapsed().as_secs_f64(),
        rho_final: PowerAllocation::from_grid_unchecked(l.grid(rho)),
        degenerate_entries: Some(flagged(cfg.users_per_bs, &degenerate)),
        degraded: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use crate::netmodel::{generate_channels_with_seed, wsee};

    fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    fn instance(m: usize, k: usize, seed: u64) -> (ChannelRealization, NetworkConfig) {
        let cfg = NetworkConfig::scenario(m, k);
        (generate_channels_with_seed(&cfg, seed).unwrap(), cfg)
    }

    #[test]
    fn dual_and_quadratic_forms_are_tight() {
        let (g, cfg) = instance(3, 3, 2);
        let rho = PowerAllocation::uniform(3, 3);
        let st = CfState::tight(&g, &rho, &cfg).unwrap();
        let r = netmodel::rate(&st.gamma, &cfg);
        let rl = rate_lagrange(&g, &rho, &st.gamma, &cfg).unwrap();
        let rq = rate_quadratic(&g, &rho, &st.gamma, &st.z, &cfg).unwrap();
        let scale = r.as_slice().iter().cloned().fold(0.0, f64::max);
        assert!(rl.max_abs_diff(&r) <= 1e-9 * scale);
        assert!(rq.max_abs_diff(&r) <= 1e-9 * scale);
        let w = wsee(&g, &rho, &cfg).unwrap();
        assert!((objective_cf(&g, &st, &cfg).unwrap() - w).abs() <= 1e-9 * w);
    }

    #[test]
    fn dual_rate_is_maximised_at_the_sinr() {
        let (g, cfg) = instance(2, 2, 9);
        let rho = PowerAllocation::uniform(2, 2);
        let st = CfState::tight(&g, &rho, &cfg).unwrap();
        let r = netmodel::rate(&st.gamma, &cfg);
        for f in [0.0, 0.3, 0.9, 1.1, 2.0, 10.0] {
            let gp = st.gamma.map(|v| v * f);
            let rl = rate_lagrange(&g, &rho, &gp, &cfg).unwrap();
            for (a, b) in rl.as_slice().iter().zip(r.as_slice()) {
                assert!(a <= &(b + 1e-9 * b.abs()));
            }
            let zp = st.z.map(|v| v * (0.5 + f / 4.0));
            let rq = rate_quadratic(&g, &rho, &st.gamma, &zp, &cfg).unwrap();
            let rl = rate_lagrange(&g, &rho, &st.gamma, &cfg).unwrap();
            for (a, b) in rq.as_slice().iter().zip(rl.as_slice()) {
                assert!(a <= &(b + 1e-9 * b.abs()));
            }
        }
    }

    #[test]
    fn trivial_values() {
        let mut cfg = NetworkConfig::scenario(1, 1);
        cfg.bandwidth = 1.0;
        cfg.p_max = 1.0;
        cfg.noise_power = 1e-300;
        let g = ChannelRealization::from_gains(0, vec![vec![vec![1.0]]]).unwrap();
        let rho = PowerAllocation::new(UserGrid::filled(1, 1, 1.0)).unwrap();
        // B·gρP = 1, γ = 3, S + I + σ² = 1
        let z = update_z_cf(&g, &rho, &UserGrid::filled(1, 1, 3.0), &cfg).unwrap();
        assert!((z.get(0, 0) - 2.0).abs() < 1e-12);

        let zero = PowerAllocation::new(UserGrid::zeros(1, 1)).unwrap();
        let z0 = update_z_cf(&g, &zero, &UserGrid::filled(1, 1, 3.0), &cfg).unwrap();
        assert_eq!(z0.get(0, 0), 0.0);
        let r = rate_lagrange(&g, &zero, &UserGrid::zeros(1, 1), &cfg).unwrap();
        assert_eq!(r.get(0, 0), 0.0);
        let q = rate_quadratic(&g, &rho, &UserGrid::zeros(1, 1), &UserGrid::zeros(1, 1), &cfg).unwrap();
        assert_eq!(q.get(0, 0), 0.0);
        assert_eq!(interference(&g, &rho, &cfg).unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn z_update_maximises_quadratic_form() {
        let (g, cfg) = instance(2, 2, 21);
        let rho = PowerAllocation::new(UserGrid::from_rows(&[vec![0.4, 0.2], vec![0.1, 0.6]]).unwrap()).unwrap();
        let gamma = UserGrid::from_rows(&[vec![3.0, 0.5], vec![12.0, 1.0]]).unwrap();
        let z = update_z_cf(&g, &rho, &gamma, &cfg).unwrap();
        for m in 0..2 {
            for k in 0..2 {
                let f = |v: f64| {
                    let mut zz = z.clone();
                    zz.set(m, k, v);
                    rate_quadratic(&g, &rho, &gamma, &zz, &cfg).unwrap().get(m, k)
                };
                let zo = golden_max(f, 0.0, 10.0 * z.get(m, k));
                assert!((zo - z.get(m, k)).abs() <= 1e-6 * z.get(m, k));
            }
        }
    }

    #[test]
    fn zero_y_is_degenerate() {
        let (g, cfg) = instance(2, 2, 3);
        let mut st = CfState::tight(&g, &PowerAllocation::uniform(2, 2), &cfg).unwrap();
        st.y.set(1, 0, 0.0);
        for rule in [RhoRule::Derived, RhoRule::Printed] {
            let up = update_rho_closedform(&g, &st, &cfg, rule).unwrap();
            assert_eq!(up.rho.get(1, 0), 0.0);
            assert!(up.degenerate.contains(&[1, 0]));
        }
    }

    #[test]
    fn single_link_update_matches_grid_maximiser_of_surrogate() {
        for gain in [1e-13, 3e-12, 1e-10] {
            let cfg = NetworkConfig::scenario(1, 1);
            let g = ChannelRealization::from_gains(0, vec![vec![vec![gain]]]).unwrap();
            let st = CfState::tight(&g, &PowerAllocation::new(UserGrid::filled(1, 1, 0.3)).unwrap(), &cfg).unwrap();
            let up = update_rho_closedform(&g, &st, &cfg, RhoRule::Derived).unwrap();
            let q = |r: f64| {
                rho_surrogate(&g, &st, &cfg, &PowerAllocation::new(UserGrid::filled(1, 1, r)).unwrap()).unwrap()
            };
            let best = (0..=100_000)
                .map(|i| i as f64 / 100_000.0)
                .max_by(|a, b| q(*a).total_cmp(&q(*b)))
                .unwrap();
            assert!((up.rho.get(0, 0) - best).abs() < 1e-4, "{gain}: {} vs {best}", up.rho.get(0, 0));
        }
    }

    #[test]
    fn surrogate_gradient_matches_wsee_gradient() {
        let (g, cfg) = instance(3, 2, 17);
        let rho = PowerAllocation::new(UserGrid::from_fn(3, 2, |m, k| 0.1 + 0.1 * (m + k) as f64)).unwrap();
        let st = CfState::tight(&g, &rho, &cfg).unwrap();
        let w0 = wsee(&g, &rho, &cfg).unwrap();
        let h = 1e-7;
        for m in 0..3 {
            for k in 0..2 {
                let bump = |d: f64| {
                    let mut r = rho.grid().clone();
                    r.set(m, k, r.get(m, k) + d);
                    PowerAllocation::new(r).unwrap()
                };
                let dq = (rho_surrogate(&g, &st, &cfg, &bump(h)).unwrap()
                    - rho_surrogate(&g, &st, &cfg, &bump(-h)).unwrap())
                    / (2.0 * h);
                let dw = (wsee(&g, &bump(h), &cfg).unwrap() - wsee(&g, &bump(-h), &cfg).unwrap()) / (2.0 * h);
                assert!((dq - dw).abs() <= 1e-5 * w0, "({m},{k}) {dq} vs {dw}");
            }
        }
    }

    #[test]
    fn interior_entries_of_update_are_surrogate_stationary() {
        let (g, cfg) = instance(2, 2, 5);
        let st = CfState::tight(&g, &PowerAllocation::uniform(2, 2), &cfg).unwrap();
        let up = update_rho_closedform(&g, &st, &cfg, RhoRule::Derived).unwrap();
        let w0 = wsee(&g, &st.rho, &cfg).unwrap();
        for m in 0..2 {
            if up.rho.grid().row_sum(m) > 1.0 - 1e-9 {
                continue;
            }
            for k in 0..2 {
                let r = up.rho.get(m, k);
                if r <= 1e-6 || r >= 1.0 - 1e-6 {
                    continue;
                }
                let h = 1e-6 * r;
                let bump = |d: f64| {
                    let mut x = up.rho.grid().clone();
                    x.set(m, k, r + d);
                    PowerAllocation::new(x).unwrap()
                };
                let d = (rho_surrogate(&g, &st, &cfg, &bump(h)).unwrap()
                    - rho_surrogate(&g, &st, &cfg, &bump(-h)).unwrap())
                    / (2.0 * h);
                assert!(d.abs() <= 1e-5 * w0, "{d}");
            }
        }
    }

    #[test]
    fn tape_objective_matches_plain() {
        let (g, cfg) = instance(2, 3, 4);
        let rho = PowerAllocation::uniform(2, 3);
        let mut st = CfState::tight(&g, &rho, &cfg).unwrap();
        st.z = st.z.map(|v| v * 0.97);
        let l = Links::new(&g, &cfg).unwrap();
        let mut t = Tape::new();
        let tl = l.on_tape(&mut t);
        let col = |t: &mut Tape, v: &UserGrid| t.constant(Tensor::column(v.as_slice().to_vec()));
        let r = t.input(Tensor::column(rho.grid().as_slice().to_vec()));
        let (gm, y, z) = (col(&mut t, &st.gamma), col(&mut t, &st.y), col(&mut t, &st.z));
        let f = objective_cf_tape(&tl, &mut t, r, gm, y, z).unwrap();
        let expect = objective_cf(&g, &st, &cfg).unwrap();
        assert!((t.scalar(f) - expect).abs() <= 1e-12 * expect.abs());
    }

    #[test]
    fn algorithm2_is_monotone_and_short() {
        for seed in 0..10 {
            let (g, cfg) = instance(4, 4, seed);
            let rep = solve_algorithm2(&g, &cfg, &SolverOptions::default()).unwrap();
            assert!(rep.converged);
            assert!(rep.iterations <= 50, "{}", rep.iterations);
            for w in rep.objective_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9);
            }
            assert!(rep.rho_final.is_feasible());
        }
    }

    #[test]
    fn infinite_epsilon_gives_one_entry() {
        let (g, cfg) = instance(2, 2, 1);
        let opts = SolverOptions {
            epsilon: f64::INFINITY,
            ..Default::default()
        };
        assert_eq!(solve_algorithm2(&g, &cfg, &opts).unwrap().objective_trace.len(), 1);
    }

    #[test]
    fn printed_rule_stays_feasible() {
        let (g, cfg) = instance(4, 2, 6);
        let opts = SolverOptions {
            rho_rule: RhoRule::Printed,
            safeguard: false,
            max_outer_iters: 10,
            ..Default::default()
        };
        let rep = solve_algorithm2(&g, &cfg, &opts).unwrap();
        assert!(rep.rho_final.is_feasible());
    }
}
