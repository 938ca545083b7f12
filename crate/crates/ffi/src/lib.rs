//! C ABI over `unfold-ee`.
//!
//! Every fallible function returns a [`UeStatus`]. On failure a message is
//! kept per thread and can be read with [`ue_last_error_message`] until the
//! next call on that thread. Objects are opaque handles created by `*_new` or
//! `*_from_json` functions and released by the matching `*_free`.
//!
//! Power allocations cross the boundary as row-major `num_bs × users_per_bs`
//! arrays of `f64`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use unfold_ee::fp_closedform::solve_algorithm2;
use unfold_ee::fp_numerical::{solve_algorithm1, SolverOptions};
use unfold_ee::netmodel::{generate_channels_with_seed, wsee};
use unfold_ee::unfold_fum::{fum_infer, FumModel};
use unfold_ee::unfold_masum::{masum_infer, MasumModel};
use unfold_ee::{ChannelRealization, Error, NetworkConfig, PowerAllocation, UserGrid};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    ShapeMismatch = 3,
    Untrained = 4,
    Runtime = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UeAlgorithm {
    /// Algorithm 1: numerical inner solver.
    Numerical = 0,
    /// Algorithm 2: closed-form updates.
    ClosedForm = 1,
}

/// Scenario parameters.
pub struct UeNetwork {
    inner: NetworkConfig,
}

/// One channel realization.
pub struct UeChannel {
    inner: ChannelRealization,
}

pub struct UeFumModel {
    inner: FumModel,
}

pub struct UeMasumModel {
    inner: MasumModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(UeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Shape(_) => UeStatus::ShapeMismatch,
            Error::InvalidInput(_) | Error::Json(_) | Error::Csv(_) => UeStatus::InvalidInput,
            Error::Untrained(_) => UeStatus::Untrained,
            Error::Domain { .. } | Error::Autodiff(_) | Error::Io(_) => UeStatus::Runtime,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(UeStatus::InvalidInput, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(UeStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> UeStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UeStatus::Ok,
        Ok(Err(Failure(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            UeStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(UeStatus::InvalidInput, format!("{what} is not UTF-8")))
}

unsafe fn write_out<T>(p: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn write_rho(cfg: &NetworkConfig, rho: &PowerAllocation, out: *mut f64, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("rho_out"));
    }
    let src = rho.grid().as_slice();
    if len != src.len() {
        return Err(Failure(
            UeStatus::ShapeMismatch,
            format!("rho_out holds {len} entries, expected {}", cfg.num_links()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, len);
    Ok(())
}

fn channel_for<'a>(net: &NetworkConfig, ch: &'a ChannelRealization) -> Result<&'a ChannelRealization, Failure> {
    ch.check_matches(net)?;
    Ok(ch)
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn ue_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ue_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default scenario with `num_bs` cells of `users_per_bs` users.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ue_network_new(num_bs: usize, users_per_bs: usize, out: *mut *mut UeNetwork) -> UeStatus {
    guard(|| {
        let cfg = NetworkConfig::scenario(num_bs, users_per_bs);
        cfg.validate()?;
        write_out(out, Box::into_raw(Box::new(UeNetwork { inner: cfg })), "out")
    })
}

/// Scenario from a complete JSON object.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` as in [`ue_network_new`].
#[no_mangle]
pub unsafe extern "C" fn ue_network_from_json(json: *const c_char, out: *mut *mut UeNetwork) -> UeStatus {
    guard(|| {
        let cfg: NetworkConfig = serde_json::from_str(text(json, "json")?)?;
        cfg.validate()?;
        write_out(out, Box::into_raw(Box::new(UeNetwork { inner: cfg })), "out")
    })
}

/// Sets the per-cell power budget in watts.
///
/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ue_network_set_p_max(net: *mut UeNetwork, p_max_watts: f64) -> UeStatus {
    guard(|| {
        let net = net.as_mut().ok_or_else(|| null("net"))?;
        let cfg = net.inner.clone().with_p_max(p_max_watts);
        cfg.validate()?;
        net.inner = cfg;
        Ok(())
    })
}

/// Number of links, `num_bs × users_per_bs`; 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ue_network_num_links(net: *const UeNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.inner.num_links())
}

/// # Safety
/// `net` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ue_network_free(net: *mut UeNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Draws a channel realization from the scenario with the given seed.
///
/// # Safety
/// `net` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ue_channel_generate(net: *const UeNetwork, seed: u64, out: *mut *mut UeChannel) -> UeStatus {
    guard(|| {
        let g = generate_channels_with_seed(&borrow(net, "net")?.inner, seed)?;
        write_out(out, Box::into_raw(Box::new(UeChannel { inner: g })), "out")
    })
}

/// # Safety
/// `ch` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ue_channel_free(ch: *mut UeChannel) {
    if !ch.is_null() {
        drop(Box::from_raw(ch));
    }
}

/// WSEE of a feasible allocation.
///
/// # Safety
/// Handles must be live, `rho` must point to `len` readable values and
/// `wsee_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ue_wsee(
    net: *const UeNetwork,
    ch: *const UeChannel,
    rho: *const f64,
    len: usize,
    wsee_out: *mut f64,
) -> UeStatus {
    guard(|| {
        let cfg = &borrow(net, "net")?.inner;
        let g = channel_for(cfg, &borrow(ch, "ch")?.inner)?;
        if rho.is_null() {
            return Err(null("rho"));
        }
        let data = std::slice::from_raw_parts(rho, len).to_vec();
        let grid = UserGrid::from_vec(cfg.num_bs, cfg.users_per_bs, data)?;
        let v = wsee(g, &PowerAllocation::new(grid)?, cfg)?;
        write_out(wsee_out, v, "wsee_out")
    })
}

/// Runs a solver to convergence with default options. `rho_out` receives
/// `len` = number of links values; `iterations_out` may be null.
///
/// # Safety
/// Handles must be live and the output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn ue_solve(
    net: *const UeNetwork,
    ch: *const UeChannel,
    algorithm: UeAlgorithm,
    rho_out: *mut f64,
    len: usize,
    wsee_out: *mut f64,
    iterations_out: *mut usize,
) -> UeStatus {
    guard(|| {
        let cfg = &borrow(net, "net")?.inner;
        let g = channel_for(cfg, &borrow(ch, "ch")?.inner)?;
        let opts = SolverOptions::default();
        let rep = match algorithm {
            UeAlgorithm::Numerical => solve_algorithm1(g, cfg, &opts)?,
            UeAlgorithm::ClosedForm => solve_algorithm2(g, cfg, &opts)?,
        };
        write_rho(cfg, &rep.rho_final, rho_out, len)?;
        write_out(wsee_out, rep.final_wsee(), "wsee_out")?;
        if !iterations_out.is_null() {
            iterations_out.write(rep.iterations);
        }
        Ok(())
    })
}

/// Loads a FUM model from its JSON serialisation.
///
/// # Safety
/// `json` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ue_fum_from_json(json: *const c_char, out: *mut *mut UeFumModel) -> UeStatus {
    guard(|| {
        let m = FumModel::from_json(text(json, "json")?)?;
        write_out(out, Box::into_raw(Box::new(UeFumModel { inner: m })), "out")
    })
}

/// An untrained FUM with `layers` layers for the scenario.
///
/// # Safety
/// `net` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ue_fum_new(net: *const UeNetwork, layers: usize, out: *mut *mut UeFumModel) -> UeStatus {
    guard(|| {
        let cfg = &borrow(net, "net")?.inner;
        if layers == 0 {
            return Err(Failure(UeStatus::InvalidInput, "layers must be at least 1".into()));
        }
        let m = FumModel::new(cfg, layers);
        write_out(out, Box::into_raw(Box::new(UeFumModel { inner: m })), "out")
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ue_fum_free(m: *mut UeFumModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// One forward pass and the WSEE it achieves. The channel must match the
/// model's scenario.
///
/// # Safety
/// Handles must be live and the output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn ue_fum_infer(
    m: *const UeFumModel,
    ch: *const UeChannel,
    rho_out: *mut f64,
    len: usize,
    wsee_out: *mut f64,
) -> UeStatus {
    guard(|| {
        let m = &borrow(m, "model")?.inner;
        let g = channel_for(&m.cfg, &borrow(ch, "ch")?.inner)?;
        let (rho, _) = fum_infer(m, g)?;
        write_rho(&m.cfg, &rho, rho_out, len)?;
        write_out(wsee_out, wsee(g, &rho, &m.cfg)?, "wsee_out")
    })
}

/// Loads a MASUM model from its JSON serialisation.
///
/// # Safety
/// `json` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ue_masum_from_json(json: *const c_char, out: *mut *mut UeMasumModel) -> UeStatus {
    guard(|| {
        let m = MasumModel::from_json(text(json, "json")?)?;
        write_out(out, Box::into_raw(Box::new(UeMasumModel { inner: m })), "out")
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ue_masum_free(m: *mut UeMasumModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// One forward pass and the WSEE it achieves. The channel must match the
/// model's scenario.
///
/// # Safety
/// Handles must be live and the output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn ue_masum_infer(
    m: *const UeMasumModel,
    ch: *const UeChannel,
    rho_out: *mut f64,
    len: usize,
    wsee_out: *mut f64,
) -> UeStatus {
    guard(|| {
        let m = &borrow(m, "model")?.inner;
        let g = channel_for(&m.cfg, &borrow(ch, "ch")?.inner)?;
        let (rho, _) = masum_infer(m, g)?;
        write_rho(&m.cfg, &rho, rho_out, len)?;
        write_out(wsee_out, wsee(g, &rho, &m.cfg)?, "wsee_out")
    })
}
