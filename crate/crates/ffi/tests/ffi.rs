use std::ffi::{CStr, CString};
use std::ptr;

use unfold_ee::fp_closedform::solve_algorithm2;
use unfold_ee::fp_numerical::SolverOptions;
use unfold_ee::netmodel::{generate_channels_with_seed, wsee};
use unfold_ee::unfold_fum::{fum_infer, FumModel};
use unfold_ee::NetworkConfig;
use unfold_ee_ffi::*;

fn last_error() -> String {
    let p = ue_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn network(m: usize, k: usize) -> *mut UeNetwork {
    let mut net = ptr::null_mut();
    assert_eq!(unsafe { ue_network_new(m, k, &mut net) }, UeStatus::Ok);
    net
}

fn channel(net: *const UeNetwork, seed: u64) -> *mut UeChannel {
    let mut ch = ptr::null_mut();
    assert_eq!(unsafe { ue_channel_generate(net, seed, &mut ch) }, UeStatus::Ok);
    ch
}

#[test]
fn solve_matches_the_library() {
    let net = network(3, 2);
    let ch = channel(net, 11);
    let n = unsafe { ue_network_num_links(net) };
    assert_eq!(n, 6);
    let mut rho = vec![0.0; n];
    let (mut w, mut iters) = (0.0, 0usize);
    let st = unsafe { ue_solve(net, ch, UeAlgorithm::ClosedForm, rho.as_mut_ptr(), n, &mut w, &mut iters) };
    assert_eq!(st, UeStatus::Ok);
    assert!(ue_last_error_message().is_null());

    let cfg = NetworkConfig::scenario(3, 2);
    let g = generate_channels_with_seed(&cfg, 11).unwrap();
    let rep = solve_algorithm2(&g, &cfg, &SolverOptions::default()).unwrap();
    assert_eq!(w, rep.final_wsee());
    assert_eq!(iters, rep.iterations);
    assert_eq!(rho, rep.rho_final.grid().as_slice());

    let mut w2 = 0.0;
    assert_eq!(unsafe { ue_wsee(net, ch, rho.as_ptr(), n, &mut w2) }, UeStatus::Ok);
    assert!((w2 - w).abs() <= 1e-12 * w);
    unsafe {
        ue_channel_free(ch);
        ue_network_free(net);
    }
}

#[test]
fn errors_are_reported() {
    let net = network(2, 2);
    let ch = channel(net, 1);
    let mut rho = vec![0.0; 3];
    let mut w = 0.0;
    let st = unsafe { ue_solve(net, ch, UeAlgorithm::Numerical, rho.as_mut_ptr(), 3, &mut w, ptr::null_mut()) };
    assert_eq!(st, UeStatus::ShapeMismatch);
    assert!(last_error().contains("expected 4"));

    let st = unsafe { ue_solve(ptr::null(), ch, UeAlgorithm::Numerical, rho.as_mut_ptr(), 4, &mut w, ptr::null_mut()) };
    assert_eq!(st, UeStatus::NullPointer);

    let bad = [0.9, 0.9, 0.1, 0.1];
    assert_eq!(unsafe { ue_wsee(net, ch, bad.as_ptr(), 4, &mut w) }, UeStatus::InvalidInput);

    assert_eq!(unsafe { ue_network_set_p_max(net, -1.0) }, UeStatus::InvalidInput);

    let other = network(3, 2);
    let ch3 = channel(other, 1);
    let mut r6 = vec![0.0; 6];
    let st = unsafe { ue_solve(net, ch3, UeAlgorithm::ClosedForm, r6.as_mut_ptr(), 6, &mut w, ptr::null_mut()) };
    assert_ne!(st, UeStatus::Ok);

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ue_network_new(0, 2, &mut out) }, UeStatus::InvalidInput);
    assert!(out.is_null());

    let json = CString::new("{not json").unwrap();
    assert_eq!(unsafe { ue_network_from_json(json.as_ptr(), &mut out) }, UeStatus::InvalidInput);
    unsafe {
        ue_channel_free(ch);
        ue_channel_free(ch3);
        ue_network_free(net);
        ue_network_free(other);
        ue_network_free(ptr::null_mut());
    }
}

#[test]
fn network_json_round_trip() {
    let cfg = NetworkConfig::scenario(2, 3).with_p_max(0.05);
    let json = CString::new(serde_json::to_string(&cfg).unwrap()).unwrap();
    let mut net = ptr::null_mut();
    assert_eq!(unsafe { ue_network_from_json(json.as_ptr(), &mut net) }, UeStatus::Ok);
    assert_eq!(unsafe { ue_network_num_links(net) }, 6);
    unsafe { ue_network_free(net) };
}

#[test]
fn fum_handles() {
    let cfg = NetworkConfig::scenario(2, 2);
    let model = FumModel::new(&cfg, 3);
    let json = CString::new(model.to_json().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ue_fum_from_json(json.as_ptr(), &mut m) }, UeStatus::Ok);

    let net = network(2, 2);
    let ch = channel(net, 5);
    let mut rho = [0.0; 4];
    let mut w = 0.0;
    assert_eq!(unsafe { ue_fum_infer(m, ch, rho.as_mut_ptr(), 4, &mut w) }, UeStatus::Ok);
    let g = generate_channels_with_seed(&cfg, 5).unwrap();
    let (expect, _) = fum_infer(&model, &g).unwrap();
    assert_eq!(rho, expect.grid().as_slice());
    assert_eq!(w, wsee(&g, &expect, &cfg).unwrap());

    let mut fresh = ptr::null_mut();
    assert_eq!(unsafe { ue_fum_new(net, 0, &mut fresh) }, UeStatus::InvalidInput);
    assert_eq!(unsafe { ue_fum_new(net, 2, &mut fresh) }, UeStatus::Ok);

    let garbage = CString::new(r#"{"type":"masum"}"#).unwrap();
    let mut mm = ptr::null_mut();
    assert_eq!(unsafe { ue_masum_from_json(garbage.as_ptr(), &mut mm) }, UeStatus::InvalidInput);
    assert!(!last_error().is_empty());
    unsafe {
        ue_fum_free(m);
        ue_fum_free(fresh);
        ue_channel_free(ch);
        ue_network_free(net);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(ue_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
