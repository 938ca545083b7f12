//! Algorithm 1: quadratic-transform fractional programming with a numerically
//! solved power subproblem.
//!
//! Each outer iteration refreshes the auxiliaries `z` (signal/interference
//! split inside the logarithm) and `y` (numerator/denominator split of each
//! energy-efficiency ratio) at the current allocation, then ascends the
//! resulting concave surrogate in `ρ` by projected gradient with an Armijo
//! line search. The surrogate is tight at the current point, so the WSEE
//! trace cannot decrease.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{AdError, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::grid::UserGrid;
use crate::links::{Links, TapeLinks};
use crate::netmodel::{
    interference_unchecked, project_euclidean, rate, signal_unchecked, sinr_unchecked, ChannelRealization,
    NetworkConfig, PowerAllocation,
};

/// Auxiliary variables of the quadratic transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxState {
    pub y: UserGrid,
    pub z: UserGrid,
}

/// Which closed-form power update Algorithm 2 applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoRule {
    /// Joint maximiser of the linearised dual surrogate, with per-BS
    /// water-filling.
    #[default]
    Derived,
    /// The textbook stationary-point expression followed by
    /// `project_feasible`. Kept for comparison only.
    Printed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Relative tolerance on the change of the objective between iterations.
    pub epsilon: f64,
    pub max_outer_iters: usize,
    /// Initial step of the inner projected-gradient ascent, in units of the
    /// objective normalised by its starting value.
    pub inner_step: f64,
    pub inner_iters: usize,
    /// Stop the inner ascent when the projected-gradient mapping falls below this.
    pub inner_tol: f64,
    pub rho_rule: RhoRule,
    /// Backtrack a closed-form update that would lower the WSEE.
    pub safeguard: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_outer_iters: 100,
            inner_step: 0.1,
            inner_iters: 500,
            inner_tol: 1e-7,
            rho_rule: RhoRule::Derived,
            safeguard: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidInput(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_outer_iters == 0 || self.inner_iters == 0 {
            return Err(Error::InvalidInput("iteration counts must be at least 1".into()));
        }
        if !(self.inner_step > 0.0 && self.inner_step.is_finite()) || !(self.inner_tol >= 0.0) {
            return Err(Error::InvalidInput("inner_step must be positive and inner_tol nonnegative".into()));
        }
        Ok(())
    }

    /// `|f(t) - f(t-1)| < ε · max(|f(t)|, 1)`.
    pub fn converged(&self, prev: f64, cur: f64) -> bool {
        (cur - prev).abs() < self.epsilon * cur.abs().max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    /// WSEE after every outer iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    #[serde(rename = "rho")]
    pub rho_final: PowerAllocation,
    /// Links whose closed-form update hit a zero denominator (Algorithm 2 only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degenerate_entries: Option<Vec<[usize; 2]>>,
    /// Some inner line search gave up before meeting its tolerance.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degraded: bool,
}

impl SolverReport {
    pub fn final_wsee(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn check(g: &ChannelRealization, rho: &PowerAllocation, cfg: &NetworkConfig) -> Result<()> {
    g.check_matches(cfg)?;
    rho.grid().check_shape(cfg.num_bs, cfg.users_per_bs, "power allocation")
}

/// `y = √R / (ρ P_max + p_c)`, the maximiser of `2y√R − y²(ρP_max + p_c)`.
pub fn update_y(g: &ChannelRealization, rho: &PowerAllocation, cfg: &NetworkConfig) -> Result<UserGrid> {
    check(g, rho, cfg)?;
    let r = rate(&sinr_unchecked(g, rho.grid(), cfg), cfg);
    Ok(r.zip_map(rho.grid(), |r, p| r.sqrt() / (p * cfg.p_max + cfg.circuit_power)))
}

/// `z = √S / (I + σ²)`, the maximiser of `2z√S − z²(I + σ²)`.
pub fn update_z(g: &ChannelRealization, rho: &PowerAllocation, cfg: &NetworkConfig) -> Result<UserGrid> {
    check(g, rho, cfg)?;
    let s = signal_unchecked(g, rho.grid(), cfg.p_max);
    let i = interference_unchecked(g, rho.grid(), cfg.p_max);
    Ok(s.zip_map(&i, |s, i| s.sqrt() / (i + cfg.noise_power)))
}

/// `B·log2(1 + 2z√S − z²(I + σ²))`.
pub fn transformed_rate(
    g: &ChannelRealization,
    rho: &PowerAllocation,
    z: &UserGrid,
    cfg: &NetworkConfig,
) -> Result<UserGrid> {
    check(g, rho, cfg)?;
    z.check_shape(cfg.num_bs, cfg.users_per_bs, "z")?;
    let s = signal_unchecked(g, rho.grid(), cfg.p_max);
    let i = interference_unchecked(g, rho.grid(), cfg.p_max);
    let mut out = UserGrid::zeros(cfg.num_bs, cfg.users_per_bs);
    for m in 0..cfg.num_bs {
        for k in 0..cfg.users_per_bs {
            let zz = z.get(m, k);
            let arg = 1.0 + 2.0 * zz * s.get(m, k).sqrt() - zz * zz * (i.get(m, k) + cfg.noise_power);
            if !(arg > 0.0) {
                return Err(Error::Domain {
                    bs: m,
                    user: k,
                    what: format!("log argument {arg} is not positive"),
                });
            }
            out.set(m, k, cfg.bandwidth * arg.log2());
        }
    }
    Ok(out)
}

/// `Σ ω (2y√R̃ − y²(ρP_max + p_c))`.
pub fn objective_fp(
    g: &ChannelRealization,
    rho: &PowerAllocation,
    y: &UserGrid,
    z: &UserGrid,
    cfg: &NetworkConfig,
) -> Result<f64> {
    y.check_shape(cfg.num_bs, cfg.users_per_bs, "y")?;
    let r = transformed_rate(g, rho, z, cfg)?;
    let mut total = 0.0;
    for m in 0..cfg.num_bs {
        for k in 0..cfg.users_per_bs {
            let rt = r.get(m, k);
            if rt < 0.0 {
                return Err(Error::Domain {
                    bs: m,
                    user: k,
                    what: format!("transformed rate {rt} is negative"),
                });
            }
            let yy = y.get(m, k);
            let d = rho.get(m, k) * cfg.p_max + cfg.circuit_power;
            total += cfg.weights.get(m, k) * (2.0 * yy * rt.sqrt() - yy * yy * d);
        }
    }
    Ok(total)
}

/// `objective_fp` on a tape, as a function of the allocation column `rho`.
pub fn objective_fp_tape(tl: &TapeLinks<'_>, t: &mut Tape, rho: Var, y: Var, z: Var) -> Result<Var, AdError> {
    let s = tl.signal(t, rho)?;
    let x = tl.disturbance(t, rho)?;
    let root = t.sqrt(s)?;
    let zs = t.mul(z, root)?;
    let lin = t.scale(zs, 2.0);
    let z2 = t.square(z)?;
    let quad = t.mul(z2, x)?;
    let arg = t.sub(lin, quad)?;
    let arg = t.offset(arg, 1.0);
    let l = t.log2(arg)?;
    let rt = t.scale(l, tl.links.bandwidth);
    let rr = t.sqrt(rt)?;
    let yr = t.mul(y, rr)?;
    let gain = t.scale(yr, 2.0);
    let y2 = t.square(y)?;
    let d = tl.total_power(t, rho);
    let cost = t.mul(y2, d)?;
    let per = t.sub(gain, cost)?;
    tl.weighted_sum(t, per)
}

/// Plain evaluation of `objective_fp` on flat link vectors; `None` outside
/// the domain of the logarithm or the square root.
fn objective_fp_flat(l: &Links, rho: &[f64], y: &[f64], z: &[f64]) -> Option<f64> {
    let x = l.disturbance(rho);
    let mut total = 0.0;
    for e in 0..l.len() {
        let arg = 1.0 + 2.0 * z[e] * (l.gp[e] * rho[e]).sqrt() - z[e] * z[e] * x[e];
        if !(arg >= 1.0) {
            return None;
        }
        let rt = l.bandwidth * arg.log2();
        total += l.weights[e] * (2.0 * y[e] * rt.sqrt() - y[e] * y[e] * (rho[e] * l.p_max + l.circuit));
    }
    Some(total)
}

/// Outcome of one inner power subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoStep {
    pub rho: PowerAllocation,
    pub objective: f64,
    pub iterations: usize,
    /// The line search gave up before the tolerance was met.
    pub degraded: bool,
}

/// Projected-gradient ascent of `objective_fp` in `ρ` at fixed `(y, z)`.
///
/// The objective is normalised by its value at `rho0`; the step adapts
/// (halved until the Armijo condition holds, doubled after each success).
/// Projection is the Euclidean one onto the per-BS capped simplex. Steps that
/// leave the domain of the transformed rate are rejected like failed Armijo
/// tests. The gradient comes from [`crate::autodiff`].
pub fn solve_rho_subproblem(
    g: &ChannelRealization,
    y: &UserGrid,
    z: &UserGrid,
    rho0: &PowerAllocation,
    cfg: &NetworkConfig,
    opts: &SolverOptions,
) -> Result<RhoStep> {
    check(g, rho0, cfg)?;
    y.check_shape(cfg.num_bs, cfg.users_per_bs, "y")?;
    z.check_shape(cfg.num_bs, cfg.users_per_bs, "z")?;
    let l = Links::new(g, cfg)?;
    let (ys, zs) = (y.as_slice(), z.as_slice());
    let f0 = match objective_fp_flat(&l, rho0.grid().as_slice(), ys, zs) {
        Some(v) => v,
        None => {
            objective_fp(g, rho0, y, z, cfg)?;
            return Err(Error::InvalidInput("objective undefined at the starting allocation".into()));
        }
    };
    let scale = 1.0 / f0.abs().max(1e-300);
    let eval = |rho: &[f64]| objective_fp_flat(&l, rho, ys, zs).map(|v| v * scale);

    let grad = |rho: &[f64]| -> Result<Vec<f64>> {
        let mut t = Tape::new();
        let tl = l.on_tape(&mut t);
        let r = t.input(Tensor::column(rho.to_vec()));
        let yv = t.constant(Tensor::column(ys.to_vec()));
        let zv = t.constant(Tensor::column(zs.to_vec()));
        let f = objective_fp_tape(&tl, &mut t, r, yv, zv)?;
        t.backward(f)?;
        Ok(t.grad(r)?.into_data().into_iter().map(|v| v * scale).collect())
    };
    let project = |v: Vec<f64>| -> Result<Vec<f64>> { Ok(project_euclidean(&l.grid(v))?.into_grid().into_vec()) };

    let mut x = rho0.grid().as_slice().to_vec();
    let mut fx = f0 * scale;
    let mut step = opts.inner_step;
    let mut degraded = false;
    let mut iterations = 0;
    for _ in 0..opts.inner_iters {
        let gr = grad(&x)?;
        if gr.iter().any(|v| !v.is_finite()) {
            degraded = true;
            break;
        }
        let mut accepted = None;
        for _ in 0..60 {
            let cand = project(x.iter().zip(&gr).map(|(a, b)| a + step * b).collect())?;
            let dir: f64 = cand.iter().zip(&x).zip(&gr).map(|((c, a), g)| (c - a) * g).sum();
            let moved = cand.iter().zip(&x).map(|(c, a)| (c - a).abs()).fold(0.0, f64::max);
            if moved == 0.0 {
                accepted = Some((cand, fx, 0.0));
                break;
            }
            if let Some(fc) = eval(&cand) {
                if fc >= fx + 1e-4 * dir {
                    accepted = Some((cand, fc, moved));
                    break;
                }
            }
            step *= 0.5;
        }
        iterations += 1;
        let Some((cand, fc, moved)) = accepted else {
            degraded = true;
            break;
        };
        let improvement = fc - fx;
        x = cand;
        fx = fc;
        if moved / step < opts.inner_tol || improvement <= 1e-15 * fx.abs() {
            break;
        }
        step = (step * 2.0).min(1e12);
    }
    let rho = PowerAllocation::new(l.grid(x))?;
    Ok(RhoStep {
        rho,
        objective: fx / scale,
        iterations,
        degraded,
    })
}

/// Algorithm 1 from the uniform `1/(2K)` allocation.
pub fn solve_algorithm1(g: &ChannelRealization, cfg: &NetworkConfig, opts: &SolverOptions) -> Result<SolverReport> {
    let init = PowerAllocation::uniform(cfg.num_bs, cfg.users_per_bs);
    solve_algorithm1_from(g, cfg, opts, &init)
}

pub fn solve_algorithm1_from(
    g: &ChannelRealization,
    cfg: &NetworkConfig,
    opts: &SolverOptions,
    init: &PowerAllocation,
) -> Result<SolverReport> {
    let start = Instant::now();
    cfg.validate_physics()?;
    opts.validate()?;
    check(g, init, cfg)?;
    let l = Links::new(g, cfg)?;
    let mut rho = init.clone();
    let mut prev = l.wsee(rho.grid().as_slice());
    let mut trace = Vec::new();
    let mut converged = false;
    let mut degraded = false;
    for _ in 0..opts.max_outer_iters {
        let z = update_z(g, &rho, cfg)?;
        let y = update_y(g, &rho, cfg)?;
        let step = solve_rho_subproblem(g, &y, &z, &rho, cfg, opts)?;
        degraded |= step.degraded;
        let f = l.wsee(step.rho.grid().as_slice());
        // the surrogate is tight, so only rounding can make this fail
        let f = if f >= prev {
            rho = step.rho;
            f
        } else {
            prev
        };
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
        rho_final: rho,
        degenerate_entries: None,
        degraded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
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

    fn single(gain: f64) -> (ChannelRealization, NetworkConfig) {
        let cfg = NetworkConfig::scenario(1, 1);
        let g = ChannelRealization::from_gains(0, vec![vec![vec![gain]]]).unwrap();
        (g, cfg)
    }

    #[test]
    fn y_and_z_trivial_values() {
        let mut cfg = NetworkConfig::scenario(1, 1);
        cfg.bandwidth = 4.0 / 3f64.log2();
        cfg.p_max = 1.0;
        cfg.circuit_power = 1.0;
        cfg.noise_power = 0.5;
        let g = ChannelRealization::from_gains(0, vec![vec![vec![1.0]]]).unwrap();
        let rho = PowerAllocation::new(UserGrid::filled(1, 1, 1.0)).unwrap();
        // R = 4, ρP + p_c = 2
        let y = update_y(&g, &rho, &cfg).unwrap();
        assert!((y.get(0, 0) - 1.0).abs() < 1e-12);

        cfg.noise_power = 2.0;
        let g4 = ChannelRealization::from_gains(0, vec![vec![vec![4.0]]]).unwrap();
        let z = update_z(&g4, &rho, &cfg).unwrap();
        assert!((z.get(0, 0) - 1.0).abs() < 1e-12);

        let zero = PowerAllocation::new(UserGrid::zeros(1, 1)).unwrap();
        assert_eq!(update_y(&g, &zero, &cfg).unwrap().get(0, 0), 0.0);
        assert_eq!(update_z(&g, &zero, &cfg).unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn auxiliaries_are_one_dimensional_maximisers() {
        let cfg = NetworkConfig::scenario(2, 2);
        let g = generate_channels_with_seed(&cfg, 11).unwrap();
        let rho = PowerAllocation::new(UserGrid::from_rows(&[vec![0.3, 0.5], vec![0.2, 0.1]]).unwrap()).unwrap();
        let y = update_y(&g, &rho, &cfg).unwrap();
        let z = update_z(&g, &rho, &cfg).unwrap();
        let s = signal_unchecked(&g, rho.grid(), cfg.p_max);
        let i = interference_unchecked(&g, rho.grid(), cfg.p_max);
        let r = rate(&sinr_unchecked(&g, rho.grid(), &cfg), &cfg);
        for m in 0..2 {
            for k in 0..2 {
                let d = rho.get(m, k) * cfg.p_max + cfg.circuit_power;
                let rr = r.get(m, k);
                let yo = golden_max(|v| 2.0 * v * rr.sqrt() - v * v * d, 0.0, 10.0 * y.get(m, k));
                assert!((yo - y.get(m, k)).abs() <= 1e-6 * y.get(m, k));
                let (ss, xx) = (s.get(m, k), i.get(m, k) + cfg.noise_power);
                let zo = golden_max(|v| 2.0 * v * ss.sqrt() - v * v * xx, 0.0, 10.0 * z.get(m, k));
                assert!((zo - z.get(m, k)).abs() <= 1e-6 * z.get(m, k));
            }
        }
    }

    #[test]
    fn tightness_and_majorisation() {
        let cfg = NetworkConfig::scenario(3, 2);
        let g = generate_channels_with_seed(&cfg, 4).unwrap();
        let rho = PowerAllocation::uniform(3, 2);
        let y = update_y(&g, &rho, &cfg).unwrap();
        let z = update_z(&g, &rho, &cfg).unwrap();
        let w = wsee(&g, &rho, &cfg).unwrap();
        let f = objective_fp(&g, &rho, &y, &z, &cfg).unwrap();
        assert!((f - w).abs() <= 1e-9 * w);
        let rt = transformed_rate(&g, &rho, &z, &cfg).unwrap();
        let r = rate(&sinr_unchecked(&g, rho.grid(), &cfg), &cfg);
        assert!(rt.max_abs_diff(&r) <= 1e-9 * r.as_slice().iter().cloned().fold(0.0, f64::max));

        let zp = z.map(|v| v * 0.9);
        let rp = transformed_rate(&g, &rho, &zp, &cfg).unwrap();
        for (a, b) in rp.as_slice().iter().zip(r.as_slice()) {
            assert!(a <= b);
        }
        let yp = y.map(|v| v * 1.1);
        assert!(objective_fp(&g, &rho, &yp, &zp, &cfg).unwrap() <= w);
        let zero = UserGrid::zeros(3, 2);
        assert_eq!(objective_fp(&g, &rho, &zero, &zero, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn log_domain_error_names_the_link() {
        let cfg = NetworkConfig::scenario(1, 2);
        let g = generate_channels_with_seed(&cfg, 2).unwrap();
        let rho = PowerAllocation::uniform(1, 2);
        let mut z = UserGrid::zeros(1, 2);
        z.set(0, 1, 1e12);
        match transformed_rate(&g, &rho, &z, &cfg) {
            Err(Error::Domain { bs: 0, user: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tape_objective_matches_plain_evaluation() {
        let cfg = NetworkConfig::scenario(2, 2);
        let g = generate_channels_with_seed(&cfg, 8).unwrap();
        let rho = PowerAllocation::uniform(2, 2);
        let y = update_y(&g, &rho, &cfg).unwrap();
        let z = update_z(&g, &rho, &cfg).unwrap();
        let l = Links::new(&g, &cfg).unwrap();
        let mut t = Tape::new();
        let tl = l.on_tape(&mut t);
        let r = t.input(Tensor::column(rho.grid().as_slice().to_vec()));
        let yv = t.constant(Tensor::column(y.as_slice().to_vec()));
        let zv = t.constant(Tensor::column(z.as_slice().to_vec()));
        let f = objective_fp_tape(&tl, &mut t, r, yv, zv).unwrap();
        let expect = objective_fp(&g, &rho, &y, &z, &cfg).unwrap();
        assert!((t.scalar(f) - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn single_link_subproblem_matches_grid() {
        let (g, cfg) = single(3e-12);
        let rho0 = PowerAllocation::uniform(1, 1);
        let y = update_y(&g, &rho0, &cfg).unwrap();
        let z = update_z(&g, &rho0, &cfg).unwrap();
        let opts = SolverOptions {
            inner_tol: 1e-12,
            inner_iters: 5000,
            ..Default::default()
        };
        let step = solve_rho_subproblem(&g, &y, &z, &rho0, &cfg, &opts).unwrap();
        let f = |r: f64| {
            let p = PowerAllocation::new(UserGrid::filled(1, 1, r)).unwrap();
            objective_fp(&g, &p, &y, &z, &cfg).unwrap_or(f64::NEG_INFINITY)
        };
        let best = (0..=100_000)
            .map(|i| i as f64 / 100_000.0)
            .max_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap();
        assert!((step.rho.get(0, 0) - best).abs() < 1e-4, "{} vs {best}", step.rho.get(0, 0));
        assert!(step.objective >= f(0.25) - 1e-12 * f(0.25).abs());
    }

    #[test]
    fn stationary_start_is_kept() {
        let (g, cfg) = single(3e-12);
        let opts = SolverOptions {
            epsilon: 1e-14,
            max_outer_iters: 500,
            inner_tol: 1e-12,
            inner_iters: 5000,
            ..Default::default()
        };
        let rep = solve_algorithm1(&g, &cfg, &opts).unwrap();
        let y = update_y(&g, &rep.rho_final, &cfg).unwrap();
        let z = update_z(&g, &rep.rho_final, &cfg).unwrap();
        let step = solve_rho_subproblem(&g, &y, &z, &rep.rho_final, &cfg, &SolverOptions::default()).unwrap();
        assert!((step.rho.get(0, 0) - rep.rho_final.get(0, 0)).abs() <= 1e-6);
    }

    #[test]
    fn single_link_algorithm1_finds_global_optimum() {
        let (g, cfg) = single(3e-12);
        let opts = SolverOptions {
            epsilon: 1e-14,
            max_outer_iters: 1000,
            inner_tol: 1e-12,
            inner_iters: 5000,
            ..Default::default()
        };
        let rep = solve_algorithm1(&g, &cfg, &opts).unwrap();
        let w = |r: f64| wsee(&g, &PowerAllocation::new(UserGrid::filled(1, 1, r)).unwrap(), &cfg).unwrap();
        let best = (0..=100_000)
            .map(|i| i as f64 / 100_000.0)
            .max_by(|a, b| w(*a).total_cmp(&w(*b)))
            .unwrap();
        assert!((rep.rho_final.get(0, 0) - best).abs() < 1e-3, "{} vs {best}", rep.rho_final.get(0, 0));
    }

    #[test]
    fn zero_weights_stop_immediately() {
        let mut cfg = NetworkConfig::scenario(2, 2);
        let g = generate_channels_with_seed(&cfg, 3).unwrap();
        cfg.weights = UserGrid::zeros(2, 2);
        let rep = solve_algorithm1(&g, &cfg, &SolverOptions::default()).unwrap();
        assert_eq!(rep.final_wsee(), 0.0);
        assert!(rep.iterations <= 2);
    }

    #[test]
    fn trace_is_monotone_and_short() {
        let cfg = NetworkConfig::scenario(4, 2);
        for seed in 0..5 {
            let g = generate_channels_with_seed(&cfg, seed).unwrap();
            let rep = solve_algorithm1(&g, &cfg, &SolverOptions::default()).unwrap();
            assert!(rep.converged);
            assert!(rep.iterations <= 50);
            for w in rep.objective_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9);
            }
            assert!(rep.rho_final.is_feasible());
        }
    }

    #[test]
    fn infinite_epsilon_runs_one_iteration() {
        let cfg = NetworkConfig::scenario(2, 2);
        let g = generate_channels_with_seed(&cfg, 1).unwrap();
        let opts = SolverOptions {
            epsilon: f64::INFINITY,
            ..Default::default()
        };
        let rep = solve_algorithm1(&g, &cfg, &opts).unwrap();
        assert_eq!(rep.objective_trace.len(), 1);
    }
}
