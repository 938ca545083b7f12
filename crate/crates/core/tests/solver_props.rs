use proptest::prelude::*;

use unfold_ee::fp_closedform::{
    objective_cf, rate_lagrange, rate_quadratic, rho_surrogate, solve_algorithm2, update_gamma,
    update_rho_closedform, update_z_cf, CfState,
};
use unfold_ee::fp_numerical::{
    objective_fp, solve_algorithm1, transformed_rate, update_y, update_z, RhoRule, SolverOptions,
};
use unfold_ee::netmodel::{generate_channels_with_seed, rate, sinr, wsee};
use unfold_ee::{ChannelRealization, NetworkConfig, PowerAllocation, UserGrid};

fn instance(max_bs: usize, max_users: usize) -> impl Strategy<Value = (NetworkConfig, ChannelRealization)> {
    (1..=max_bs, 1..=max_users, any::<u64>()).prop_map(|(m, k, seed)| {
        let cfg = NetworkConfig::scenario(m, k);
        let g = generate_channels_with_seed(&cfg, seed).unwrap();
        (cfg, g)
    })
}

fn interior(m: usize, k: usize, raw: &[f64]) -> PowerAllocation {
    let grid = UserGrid::from_fn(m, k, |b, u| raw[(b * k + u) % raw.len()] / (k as f64 + 0.5));
    PowerAllocation::new(grid).unwrap()
}

fn assert_monotone(trace: &[f64]) -> Result<(), TestCaseError> {
    for w in trace.windows(2) {
        prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{} then {}", w[0], w[1]);
    }
    Ok(())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn algorithm2_trace_is_monotone_and_feasible((cfg, g) in instance(4, 3)) {
        let rep = solve_algorithm2(&g, &cfg, &SolverOptions::default()).unwrap();
        assert_monotone(&rep.objective_trace)?;
        prop_assert!(rep.rho_final.is_feasible());
        prop_assert!(close(rep.final_wsee(), wsee(&g, &rep.rho_final, &cfg).unwrap(), 1e-12));
        prop_assert!(rep.iterations <= SolverOptions::default().max_outer_iters);
    }

    #[test]
    fn tight_state_reproduces_wsee(
        (cfg, g) in instance(4, 3),
        raw in prop::collection::vec(0.01f64..1.0, 12),
    ) {
        let rho = interior(cfg.num_bs, cfg.users_per_bs, &raw);
        let state = CfState::tight(&g, &rho, &cfg).unwrap();
        let w = wsee(&g, &rho, &cfg).unwrap();
        prop_assert!(close(objective_cf(&g, &state, &cfg).unwrap(), w, 1e-9));

        let r = rate(&sinr(&g, &rho, &cfg).unwrap(), &cfg);
        let lag = rate_lagrange(&g, &rho, &state.gamma, &cfg).unwrap();
        let quad = rate_quadratic(&g, &rho, &state.gamma, &state.z, &cfg).unwrap();
        for ((&a, &b), &c) in r.as_slice().iter().zip(lag.as_slice()).zip(quad.as_slice()) {
            prop_assert!(close(a, b, 1e-9));
            prop_assert!(close(a, c, 1e-9));
        }

        let z = update_z(&g, &rho, &cfg).unwrap();
        let y = update_y(&g, &rho, &cfg).unwrap();
        prop_assert!(close(objective_fp(&g, &rho, &y, &z, &cfg).unwrap(), w, 1e-9));
    }

    #[test]
    fn auxiliary_updates_are_pointwise_maximisers(
        (cfg, g) in instance(3, 3),
        raw in prop::collection::vec(0.01f64..1.0, 9),
        scale in prop::sample::select(vec![0.5, 0.9, 0.99, 1.01, 1.1, 1.5]),
    ) {
        let rho = interior(cfg.num_bs, cfg.users_per_bs, &raw);
        let gamma = update_gamma(&g, &rho, &cfg).unwrap();
        let zc = update_z_cf(&g, &rho, &gamma, &cfg).unwrap();
        let z = update_z(&g, &rho, &cfg).unwrap();

        let best_lag = rate_lagrange(&g, &rho, &gamma, &cfg).unwrap();
        let other_lag = rate_lagrange(&g, &rho, &gamma.map(|v| v * scale), &cfg).unwrap();
        let best_quad = rate_quadratic(&g, &rho, &gamma, &zc, &cfg).unwrap();
        let other_quad = rate_quadratic(&g, &rho, &gamma, &zc.map(|v| v * scale), &cfg).unwrap();
        let best_fp = transformed_rate(&g, &rho, &z, &cfg).unwrap();
        let other_fp = transformed_rate(&g, &rho, &z.map(|v| v * scale), &cfg);
        for e in 0..best_lag.as_slice().len() {
            let slack = 1e-12 * best_lag.as_slice()[e].abs();
            prop_assert!(other_lag.as_slice()[e] <= best_lag.as_slice()[e] + slack);
            prop_assert!(other_quad.as_slice()[e] <= best_quad.as_slice()[e] + slack);
            if let Ok(other_fp) = &other_fp {
                prop_assert!(other_fp.as_slice()[e] <= best_fp.as_slice()[e] + slack);
            }
        }

        let y = update_y(&g, &rho, &cfg).unwrap();
        let best = objective_fp(&g, &rho, &y, &z, &cfg).unwrap();
        let other = objective_fp(&g, &rho, &y.map(|v| v * scale), &z, &cfg).unwrap();
        prop_assert!(other <= best + 1e-12 * best.abs());
    }

    #[test]
    fn closed_form_rho_maximises_its_surrogate(
        (cfg, g) in instance(3, 3),
        raw in prop::collection::vec(0.01f64..1.0, 9),
        probe in prop::collection::vec(0.0f64..1.0, 9),
    ) {
        let (m, k) = (cfg.num_bs, cfg.users_per_bs);
        let rho = interior(m, k, &raw);
        let state = CfState::tight(&g, &rho, &cfg).unwrap();
        let step = update_rho_closedform(&g, &state, &cfg, RhoRule::Derived).unwrap();
        prop_assert!(step.rho.is_feasible());
        let best = rho_surrogate(&g, &state, &cfg, &step.rho).unwrap();
        let rival = interior(m, k, &probe);
        for cand in [&rho, &rival] {
            let v = rho_surrogate(&g, &state, &cfg, cand).unwrap();
            prop_assert!(v <= best + 1e-9 * best.abs().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn algorithm1_trace_is_monotone_and_feasible((cfg, g) in instance(3, 2)) {
        let rep = solve_algorithm1(&g, &cfg, &SolverOptions::default()).unwrap();
        assert_monotone(&rep.objective_trace)?;
        prop_assert!(rep.rho_final.is_feasible());
    }
}

#[test]
fn invalid_options_are_rejected() {
    let cfg = NetworkConfig::scenario(2, 2);
    let g = generate_channels_with_seed(&cfg, 3).unwrap();
    let opts = SolverOptions {
        epsilon: 0.0,
        ..SolverOptions::default()
    };
    assert!(solve_algorithm2(&g, &cfg, &opts).is_err());
    assert!(solve_algorithm1(&g, &cfg, &opts).is_err());
    let other = NetworkConfig::scenario(3, 2);
    assert!(solve_algorithm2(&g, &other, &SolverOptions::default()).is_err());
}

#[test]
fn report_serialises() {
    let cfg = NetworkConfig::scenario(2, 2);
    let g = generate_channels_with_seed(&cfg, 4).unwrap();
    let rep = solve_algorithm2(&g, &cfg, &SolverOptions::default()).unwrap();
    let json: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
    assert_eq!(json["iterations"].as_u64().unwrap() as usize, rep.iterations);
}
