//! Scenario description, channel generation and the link-level quantities
//! (SINR after SIC, rate, energy efficiency, WSEE) that every solver and
//! model evaluates.
//!
//! Channels are stored as effective scalar power gains `G[m][k][n]`: the
//! gain from base station `n` to user `k` of cell `m`, i.e. pathloss times
//! `‖h‖²`. Users inside a cell are kept in SIC order, strongest direct gain
//! first, so user `k` is interfered by the users `j < k` of its own cell.
//! The physics itself ranks users by direct gain (index breaks ties), so a
//! cell whose users were reordered evaluates identically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::UserGrid;

/// Thermal noise power spectral density, dBm/Hz.
pub const NOISE_PSD_DBM_PER_HZ: f64 = -174.0;
/// Receiver noise figure, dB.
pub const NOISE_FIGURE_DB: f64 = 7.0;
/// Users are never dropped closer than this to their serving BS (meters).
pub const MIN_USER_DISTANCE: f64 = 10.0;
/// Carrier frequency used for the 1 m reference loss, Hz.
pub const CARRIER_FREQUENCY_HZ: f64 = 2.4e9;

/// Tolerance used when checking the power-budget invariants.
pub const FEASIBILITY_TOL: f64 = 1e-12;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn dbw_to_watts(dbw: f64) -> f64 {
    10f64.powf(dbw / 10.0)
}

pub fn watts_to_dbw(watts: f64) -> f64 {
    10.0 * watts.log10()
}

/// Noise power over `bandwidth` Hz for the given noise figure.
pub fn thermal_noise_power(bandwidth: f64, noise_figure_db: f64) -> f64 {
    dbm_to_watts(NOISE_PSD_DBM_PER_HZ + noise_figure_db + 10.0 * bandwidth.log10())
}

/// Free-space loss at 1 m for the given carrier, dB.
pub fn free_space_reference_loss_db(carrier_hz: f64) -> f64 {
    let wavelength = 299_792_458.0 / carrier_hz;
    20.0 * (4.0 * std::f64::consts::PI / wavelength).log10()
}

fn default_reference_loss_db() -> f64 {
    free_space_reference_loss_db(CARRIER_FREQUENCY_HZ)
}

fn default_fading_variance() -> f64 {
    1.0
}

/// Static scenario parameters. All quantities are SI (watts, hertz, meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub num_bs: usize,
    pub users_per_bs: usize,
    pub num_antennas: usize,
    pub p_max: f64,
    /// Per-user circuit power.
    pub circuit_power: f64,
    pub bandwidth: f64,
    pub noise_power: f64,
    pub weights: UserGrid,
    pub path_loss_exponent: f64,
    pub cell_radius: f64,
    pub rng_seed: u64,
    /// Loss at the 1 m reference distance, dB.
    #[serde(default = "default_reference_loss_db")]
    pub reference_loss_db: f64,
    /// Variance of each complex fading coefficient.
    #[serde(default = "default_fading_variance")]
    pub fading_variance: f64,
}

impl NetworkConfig {
    /// Scenario with the default physical layer (250 kHz subchannel, 20 dBm
    /// circuit power, 8 antennas, exponent 3.5, 500 m cells, `P_max` = -10 dBW).
    pub fn scenario(num_bs: usize, users_per_bs: usize) -> Self {
        let bandwidth = 250e3;
        Self {
            num_bs,
            users_per_bs,
            num_antennas: 8,
            p_max: dbw_to_watts(-10.0),
            circuit_power: dbm_to_watts(20.0),
            bandwidth,
            noise_power: thermal_noise_power(bandwidth, NOISE_FIGURE_DB),
            weights: UserGrid::filled(num_bs, users_per_bs, 1.0),
            path_loss_exponent: 3.5,
            cell_radius: 500.0,
            rng_seed: 0,
            reference_loss_db: default_reference_loss_db(),
            fading_variance: 1.0,
        }
    }

    /// Desk-scale default: 4 cells, 2 users per cell.
    pub fn desk_default() -> Self {
        Self::scenario(4, 2)
    }

    pub fn with_p_max(mut self, p_max: f64) -> Self {
        self.p_max = p_max;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn num_links(&self) -> usize {
        self.num_bs * self.users_per_bs
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_physics()?;
        if !self.weights.as_slice().iter().any(|w| *w > 0.0) {
            return Err(Error::InvalidInput("at least one weight must be strictly positive".into()));
        }
        Ok(())
    }

    /// Every check of [`NetworkConfig::validate`] except the requirement that
    /// some weight be positive; the solvers are well defined without it.
    pub fn validate_physics(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(what.to_string()));
        if self.num_bs == 0 || self.users_per_bs == 0 || self.num_antennas == 0 {
            return bad("num_bs, users_per_bs and num_antennas must be at least 1");
        }
        for (name, v) in [
            ("p_max", self.p_max),
            ("circuit_power", self.circuit_power),
            ("bandwidth", self.bandwidth),
            ("noise_power", self.noise_power),
            ("cell_radius", self.cell_radius),
            ("fading_variance", self.fading_variance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !self.path_loss_exponent.is_finite() || !self.reference_loss_db.is_finite() {
            return bad("path loss parameters must be finite");
        }
        self.weights.check_shape(self.num_bs, self.users_per_bs, "weights")?;
        if self.weights.as_slice().iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("weights must be finite and nonnegative");
        }
        Ok(())
    }

    /// Distance-dependent power gain (linear).
    pub fn path_gain(&self, distance: f64) -> f64 {
        10f64.powf(-self.reference_loss_db / 10.0) * distance.max(1.0).powf(-self.path_loss_exponent)
    }
}

/// BS sites on a hexagonal lattice with inter-site distance `√3 · radius`,
/// taken in order of distance from the origin.
pub fn bs_positions(num_bs: usize, cell_radius: f64) -> Vec<(f64, f64)> {
    let isd = 3f64.sqrt() * cell_radius;
    let mut rings = 0i64;
    while 1 + 3 * rings * (rings + 1) < num_bs as i64 {
        rings += 1;
    }
    let span = rings + 2;
    let mut pts = Vec::new();
    for i in -span..=span {
        for j in -span..=span {
            let x = isd * (i as f64 + 0.5 * j as f64);
            let y = isd * (3f64.sqrt() / 2.0) * j as f64;
            pts.push((x, y));
        }
    }
    // distances are rounded so that sites on one ring tie and fall back to angle
    pts.sort_by(|a, b| {
        let da = (a.0.hypot(a.1) * 1e6).round();
        let db = (b.0.hypot(b.1) * 1e6).round();
        da.total_cmp(&db).then(a.1.atan2(a.0).total_cmp(&b.1.atan2(b.0)))
    });
    pts.truncate(num_bs);
    pts
}

/// `‖h‖²` for `h` with `n` iid circularly-symmetric complex Gaussian entries
/// of the given variance.
pub fn sample_fading_power<R: Rng + ?Sized>(rng: &mut R, n: usize, variance: f64) -> f64 {
    let scale = variance / 2.0;
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            scale * (re * re + im * im)
        })
        .sum()
}

/// Effective power gains for one drop of users, `[serving cell][user][source BS]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    seed: u64,
    num_bs: usize,
    users_per_bs: usize,
    gains: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ChannelRow {
    seed: u64,
    gains: Vec<Vec<Vec<f64>>>,
}

impl ChannelRealization {
    /// Build from explicit gains. Gains must be positive and finite and each
    /// cell's users must already be in SIC order.
    pub fn from_gains(seed: u64, gains: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let num_bs = gains.len();
        let users_per_bs = gains.first().map_or(0, Vec::len);
        if num_bs == 0 || users_per_bs == 0 {
            return Err(Error::Shape("empty gain array".into()));
        }
        let mut flat = Vec::with_capacity(num_bs * users_per_bs * num_bs);
        for cell in &gains {
            if cell.len() != users_per_bs {
                return Err(Error::Shape("ragged gain array (users)".into()));
            }
            for user in cell {
                if user.len() != num_bs {
                    return Err(Error::Shape(format!(
                        "each user needs {num_bs} source gains, got {}",
                        user.len()
                    )));
                }
                flat.extend_from_slice(user);
            }
        }
        let ch = Self {
            seed,
            num_bs,
            users_per_bs,
            gains: flat,
        };
        ch.validate()?;
        Ok(ch)
    }

    fn validate(&self) -> Result<()> {
        if self.gains.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::InvalidInput("channel gains must be positive and finite".into()));
        }
        for m in 0..self.num_bs {
            for k in 1..self.users_per_bs {
                if self.direct(m, k) > self.direct(m, k - 1) {
                    return Err(Error::InvalidInput(format!(
                        "cell {m} is not in SIC order at user {k}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_bs(&self) -> usize {
        self.num_bs
    }

    pub fn users_per_bs(&self) -> usize {
        self.users_per_bs
    }

    #[inline]
    pub fn gain(&self, m: usize, k: usize, n: usize) -> f64 {
        self.gains[(m * self.users_per_bs + k) * self.num_bs + n]
    }

    /// Gain from the serving BS.
    #[inline]
    pub fn direct(&self, m: usize, k: usize) -> f64 {
        self.gain(m, k, m)
    }

    /// Whether user `j` of cell `m` is decoded before user `k`.
    pub fn decoded_before(&self, m: usize, j: usize, k: usize) -> bool {
        let (a, b) = (self.direct(m, j), self.direct(m, k));
        a > b || (a == b && j < k)
    }

    pub fn direct_grid(&self) -> UserGrid {
        UserGrid::from_fn(self.num_bs, self.users_per_bs, |m, k| self.direct(m, k))
    }

    pub fn raw(&self) -> &[f64] {
        &self.gains
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.num_bs)
            .map(|m| {
                (0..self.users_per_bs)
                    .map(|k| (0..self.num_bs).map(|n| self.gain(m, k, n)).collect())
                    .collect()
            })
            .collect()
    }

    pub fn check_matches(&self, cfg: &NetworkConfig) -> Result<()> {
        if self.num_bs != cfg.num_bs || self.users_per_bs != cfg.users_per_bs {
            return Err(Error::Shape(format!(
                "channel is {}x{}, config expects {}x{}",
                self.num_bs, self.users_per_bs, cfg.num_bs, cfg.users_per_bs
            )));
        }
        Ok(())
    }

    /// Reorders the users of each cell by `perms[m]` (new position `k` takes old
    /// user `perms[m][k]`). The result need not be in SIC order, so it is only
    /// exposed to the data-augmentation code.
    pub(crate) fn permuted_unchecked(&self, perms: &[Vec<usize>]) -> Self {
        let mut gains = vec![0.0; self.gains.len()];
        for m in 0..self.num_bs {
            for k in 0..self.users_per_bs {
                let src = perms[m][k];
                for n in 0..self.num_bs {
                    gains[(m * self.users_per_bs + k) * self.num_bs + n] = self.gain(m, src, n);
                }
            }
        }
        Self {
            seed: self.seed,
            num_bs: self.num_bs,
            users_per_bs: self.users_per_bs,
            gains,
        }
    }

    /// One JSON-lines row: `{"seed":…, "gains":[[[…]]]}`.
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(&ChannelRow {
            seed: self.seed,
            gains: self.to_nested(),
        })?)
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let row: ChannelRow = serde_json::from_str(line)?;
        Self::from_gains(row.seed, row.gains)
    }
}

impl Serialize for ChannelRealization {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChannelRow {
            seed: self.seed,
            gains: self.to_nested(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ChannelRealization {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let row = ChannelRow::deserialize(d)?;
        Self::from_gains(row.seed, row.gains).map_err(serde::de::Error::custom)
    }
}

/// Channel drop using `cfg.rng_seed`.
pub fn generate_channels(cfg: &NetworkConfig) -> Result<ChannelRealization> {
    generate_channels_with_seed(cfg, cfg.rng_seed)
}

/// Users uniform over the annulus `[MIN_USER_DISTANCE, cell_radius]` around
/// their BS; gain = pathloss(d) · ‖h‖²; users sorted by descending direct gain.
pub fn generate_channels_with_seed(cfg: &NetworkConfig, seed: u64) -> Result<ChannelRealization> {
    cfg.validate()?;
    let (nb, nu) = (cfg.num_bs, cfg.users_per_bs);
    let sites = bs_positions(nb, cfg.cell_radius);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_min = MIN_USER_DISTANCE.min(cfg.cell_radius / 2.0);
    let mut gains = vec![0.0; nb * nu * nb];
    for m in 0..nb {
        let mut users: Vec<Vec<f64>> = (0..nu)
            .map(|_| {
                let u: f64 = rng.random();
                let r = (r_min * r_min + u * (cfg.cell_radius.powi(2) - r_min * r_min)).sqrt();
                let theta: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                let pos = (sites[m].0 + r * theta.cos(), sites[m].1 + r * theta.sin());
                (0..nb)
                    .map(|n| {
                        let d = (pos.0 - sites[n].0).hypot(pos.1 - sites[n].1);
                        cfg.path_gain(d) * sample_fading_power(&mut rng, cfg.num_antennas, cfg.fading_variance)
                    })
                    .collect()
            })
            .collect();
        users.sort_by(|a, b| b[m].total_cmp(&a[m]));
        for (k, user) in users.iter().enumerate() {
            gains[(m * nu + k) * nb..(m * nu + k + 1) * nb].copy_from_slice(user);
        }
    }
    let ch = ChannelRealization {
        seed,
        num_bs: nb,
        users_per_bs: nu,
        gains,
    };
    ch.validate()?;
    Ok(ch)
}

/// Power-allocation coefficients, each in `[0, 1]`, with `Σ_k ρ[m][k] ≤ 1` per BS.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PowerAllocation(UserGrid);

impl PowerAllocation {
    pub fn new(rho: UserGrid) -> Result<Self> {
        for m in 0..rho.num_bs() {
            for &v in rho.row(m) {
                if !(-FEASIBILITY_TOL..=1.0 + FEASIBILITY_TOL).contains(&v) {
                    return Err(Error::InvalidInput(format!("coefficient {v} outside [0, 1] at BS {m}")));
                }
            }
            let s = rho.row_sum(m);
            if s > 1.0 + 1e-9 {
                return Err(Error::InvalidInput(format!("BS {m} budget exceeded: Σρ = {s}")));
            }
        }
        Ok(Self(rho))
    }

    /// Uniform `1 / (2K)` on every link.
    pub fn uniform(num_bs: usize, users_per_bs: usize) -> Self {
        Self(UserGrid::filled(num_bs, users_per_bs, 1.0 / (2.0 * users_per_bs as f64)))
    }

    /// Trusted constructor for values that are feasible by construction.
    pub(crate) fn from_grid_unchecked(rho: UserGrid) -> Self {
        Self(rho)
    }

    pub fn grid(&self) -> &UserGrid {
        &self.0
    }

    pub fn into_grid(self) -> UserGrid {
        self.0
    }

    #[inline]
    pub fn get(&self, m: usize, k: usize) -> f64 {
        self.0.get(m, k)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_feasible(&self) -> bool {
        PowerAllocation::new(self.0.clone()).is_ok()
    }
}

impl<'de> Deserialize<'de> for PowerAllocation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let grid = UserGrid::deserialize(d)?;
        PowerAllocation::new(grid).map_err(serde::de::Error::custom)
    }
}

/// Per-link metrics at one allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkMetrics {
    pub sinr: UserGrid,
    pub rate: UserGrid,
    pub ee: UserGrid,
    pub wsee: f64,
}

fn check_inputs(g: &ChannelRealization, rho: &UserGrid, cfg: &NetworkConfig) -> Result<()> {
    g.check_matches(cfg)?;
    rho.check_shape(cfg.num_bs, cfg.users_per_bs, "power allocation")
}

/// Interference power (noise excluded): earlier-decoded users of the same cell
/// plus every user of every other cell, all seen through the victim's channel.
pub fn interference(g: &ChannelRealization, rho: &UserGrid, cfg: &NetworkConfig) -> Result<UserGrid> {
    check_inputs(g, rho, cfg)?;
    Ok(interference_unchecked(g, rho, cfg.p_max))
}

pub(crate) fn interference_unchecked(g: &ChannelRealization, rho: &UserGrid, p_max: f64) -> UserGrid {
    let (nb, nu) = rho.shape();
    let bs_load: Vec<f64> = (0..nb).map(|n| rho.row_sum(n)).collect();
    let mut out = UserGrid::zeros(nb, nu);
    for m in 0..nb {
        for k in 0..nu {
            let mut inter = 0.0;
            for (n, load) in bs_load.iter().enumerate() {
                if n != m {
                    inter += g.gain(m, k, n) * load;
                }
            }
            let earlier: f64 = (0..nu).filter(|&j| g.decoded_before(m, j, k)).map(|j| rho.get(m, j)).sum();
            out.set(m, k, p_max * (g.direct(m, k) * earlier + inter));
        }
    }
    out
}

/// Received signal power `G[m][k][m] · ρ · P_max`.
pub(crate) fn signal_unchecked(g: &ChannelRealization, rho: &UserGrid, p_max: f64) -> UserGrid {
    UserGrid::from_fn(rho.num_bs(), rho.users_per_bs(), |m, k| g.direct(m, k) * rho.get(m, k) * p_max)
}

/// SINR after SIC.
pub fn sinr(g: &ChannelRealization, rho: &PowerAllocation, cfg: &NetworkConfig) -> Result<UserGrid> {
    check_inputs(g, rho.grid(), cfg)?;
    Ok(sinr_unchecked(g, rho.grid(), cfg))
}

pub(crate) fn sinr_unchecked(g: &ChannelRealization, rho: &UserGrid, cfg: &NetworkConfig) -> UserGrid {
    let interf = interference_unchecked(g, rho, cfg.p_max);
    let signal = signal_unchecked(g, rho, cfg.p_max);
    signal.zip_map(&interf, |s, i| s / (i + cfg.noise_power))
}

/// `B · log2(1 + γ)`.
pub fn rate(sinr: &UserGrid, cfg: &NetworkConfig) -> UserGrid {
    sinr.map(|g| cfg.bandwidth * (1.0 + g).log2())
}

/// `R / (ρ P_max + p_c)`.
pub fn energy_efficiency(rate: &UserGrid, rho: &UserGrid, cfg: &NetworkConfig) -> UserGrid {
    rate.zip_map(rho, |r, p| r / (p * cfg.p_max + cfg.circuit_power))
}

pub fn link_metrics(g: &ChannelRealization, rho: &PowerAllocation, cfg: &NetworkConfig) -> Result<LinkMetrics> {
    let sinr = sinr(g, rho, cfg)?;
    let rate = rate(&sinr, cfg);
    let ee = energy_efficiency(&rate, rho.grid(), cfg);
    let wsee = weighted_sum(&ee, &cfg.weights);
    Ok(LinkMetrics { sinr, rate, ee, wsee })
}

pub(crate) fn weighted_sum(values: &UserGrid, weights: &UserGrid) -> f64 {
    values.as_slice().iter().zip(weights.as_slice()).map(|(v, w)| v * w).sum()
}

/// Weighted sum energy efficiency, bit/joule.
pub fn wsee(g: &ChannelRealization, rho: &PowerAllocation, cfg: &NetworkConfig) -> Result<f64> {
    check_inputs(g, rho.grid(), cfg)?;
    Ok(wsee_unchecked(g, rho.grid(), cfg))
}

pub(crate) fn wsee_unchecked(g: &ChannelRealization, rho: &UserGrid, cfg: &NetworkConfig) -> f64 {
    let sinr = sinr_unchecked(g, rho, cfg);
    let mut total = 0.0;
    for (i, (&s, &p)) in sinr.as_slice().iter().zip(rho.as_slice()).enumerate() {
        let w = cfg.weights.as_slice()[i];
        if w != 0.0 {
            total += w * cfg.bandwidth * (1.0 + s).log2() / (p * cfg.p_max + cfg.circuit_power);
        }
    }
    total
}

/// Clamp every entry to `[0, 1]`, then rescale any BS whose coefficients sum
/// past one. Feasible inputs come back unchanged.
pub fn project_feasible(raw: &UserGrid) -> Result<PowerAllocation> {
    if raw.as_slice().iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("NaN in power coefficients".into()));
    }
    Ok(PowerAllocation(project_feasible_unchecked(raw)))
}

pub(crate) fn project_feasible_unchecked(raw: &UserGrid) -> UserGrid {
    let mut out = raw.map(|v| v.clamp(0.0, 1.0));
    for m in 0..out.num_bs() {
        let s = out.row_sum(m);
        if s > 1.0 {
            for k in 0..out.users_per_bs() {
                out.set(m, k, out.get(m, k) / s);
            }
            // Rounding can leave the sum an ulp above 1; shave it off so a
            // second pass is a no-op.
            while out.row_sum(m) > 1.0 {
                for k in 0..out.users_per_bs() {
                    out.set(m, k, out.get(m, k) * (1.0 - f64::EPSILON));
                }
            }
        }
    }
    out
}

/// Euclidean projection onto `{0 ≤ ρ ≤ 1, Σ_k ρ[m][k] ≤ 1}`, row by row.
pub fn project_euclidean(raw: &UserGrid) -> Result<PowerAllocation> {
    if raw.as_slice().iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("NaN in power coefficients".into()));
    }
    let mut out = raw.clone();
    for m in 0..raw.num_bs() {
        let row = project_capped_simplex(raw.row(m));
        for (k, v) in row.into_iter().enumerate() {
            out.set(m, k, v);
        }
    }
    Ok(PowerAllocation(out))
}

/// Projects one row onto `{x ∈ [0,1]^K : Σx ≤ 1}` by bisection on the shift.
fn project_capped_simplex(row: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = row.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    if clamped.iter().sum::<f64>() <= 1.0 {
        return clamped;
    }
    let shifted_sum = |tau: f64| row.iter().map(|v| (v - tau).clamp(0.0, 1.0)).sum::<f64>();
    let mut lo = 0.0;
    let mut hi = row.iter().cloned().fold(f64::MIN, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if shifted_sum(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    row.iter().map(|v| (v - hi).clamp(0.0, 1.0)).collect()
}
