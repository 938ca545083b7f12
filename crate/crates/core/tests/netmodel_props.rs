use proptest::prelude::*;

use unfold_ee::netmodel::{
    generate_channels_with_seed, interference, project_feasible, sinr, wsee, FEASIBILITY_TOL,
};
use unfold_ee::{ChannelRealization, NetworkConfig, PowerAllocation, UserGrid};

fn scenario() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..5, 1usize..4, any::<u64>())
}

fn allocation(m: usize, k: usize) -> impl Strategy<Value = PowerAllocation> {
    prop::collection::vec((0.0f64..1.0, 0.01f64..1.0), m * k).prop_map(move |v| {
        let mut grid = UserGrid::zeros(m, k);
        for b in 0..m {
            let row = &v[b * k..(b + 1) * k];
            let total: f64 = row.iter().map(|(r, _)| r).sum::<f64>().max(1e-12);
            let budget = row[0].1;
            for (u, (r, _)) in row.iter().enumerate() {
                grid.set(b, u, r / total * budget);
            }
        }
        PowerAllocation::new(grid).unwrap()
    })
}

fn instance() -> impl Strategy<Value = (NetworkConfig, ChannelRealization, PowerAllocation)> {
    scenario().prop_flat_map(|(m, k, seed)| {
        let cfg = NetworkConfig::scenario(m, k);
        let g = generate_channels_with_seed(&cfg, seed).unwrap();
        (Just(cfg), Just(g), allocation(m, k))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn more_foreign_power_never_raises_sinr(
        (cfg, g, rho) in instance(),
        pick in any::<prop::sample::Index>(),
        extra in 0.0f64..1.0,
    ) {
        prop_assume!(cfg.num_bs > 1);
        let (m, k) = (cfg.num_bs, cfg.users_per_bs);
        let link = pick.index(m * k);
        let (n, kk) = (link / k, link % k);
        let mut bumped = rho.grid().clone();
        let room = 1.0 - bumped.row_sum(n);
        bumped.set(n, kk, bumped.get(n, kk) + extra * room);
        let bumped = PowerAllocation::new(bumped).unwrap();
        let before = sinr(&g, &rho, &cfg).unwrap();
        let after = sinr(&g, &bumped, &cfg).unwrap();
        for mm in (0..m).filter(|&mm| mm != n) {
            for u in 0..k {
                prop_assert!(after.get(mm, u) <= before.get(mm, u) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn sic_order_sets_intra_cell_interference((cfg, g, rho) in instance()) {
        let (m, k) = (cfg.num_bs, cfg.users_per_bs);
        // Silence every other cell so only intra-cell terms remain.
        for cell in 0..m {
            let grid = UserGrid::from_fn(m, k, |b, u| if b == cell { rho.get(b, u) } else { 0.0 });
            let i = interference(&g, &grid, &cfg).unwrap();
            prop_assert_eq!(i.get(cell, 0), 0.0);
            let earlier: f64 = (0..k - 1).map(|u| rho.get(cell, u)).sum();
            let expect = cfg.p_max * g.direct(cell, k - 1) * earlier;
            prop_assert!((i.get(cell, k - 1) - expect).abs() <= 1e-12 * expect.abs().max(1e-300));
        }
    }

    #[test]
    fn wsee_ignores_bs_labels(
        (cfg, g, rho) in instance(),
        perm in Just(()).prop_perturb(|_, mut rng| rng.random::<u64>()),
        weights in prop::collection::vec(0.1f64..3.0, 16),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let (m, k) = (cfg.num_bs, cfg.users_per_bs);
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm));
        let mut cfg = cfg;
        cfg.weights = UserGrid::from_fn(m, k, |b, u| weights[(b * k + u) % weights.len()]);

        // New cell `b` is old cell `order[b]`, on the channel and source axes alike.
        let nested = g.to_nested();
        let moved: Vec<Vec<Vec<f64>>> = (0..m)
            .map(|b| {
                nested[order[b]]
                    .iter()
                    .map(|user| (0..m).map(|n| user[order[n]]).collect())
                    .collect()
            })
            .collect();
        let g2 = ChannelRealization::from_gains(g.seed(), moved).unwrap();
        let rho2 = PowerAllocation::new(UserGrid::from_fn(m, k, |b, u| rho.get(order[b], u))).unwrap();
        let mut cfg2 = cfg.clone();
        cfg2.weights = UserGrid::from_fn(m, k, |b, u| cfg.weights.get(order[b], u));

        let a = wsee(&g, &rho, &cfg).unwrap();
        let b = wsee(&g2, &rho2, &cfg2).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn projection_is_idempotent_and_bounded(
        m in 1usize..5,
        k in 1usize..5,
        raw in prop::collection::vec(-2.0f64..3.0, 25),
    ) {
        let grid = UserGrid::from_fn(m, k, |b, u| raw[b * k + u]);
        let p = project_feasible(&grid).unwrap();
        prop_assert!(p.is_feasible());
        for (&v, &r) in p.grid().as_slice().iter().zip(grid.as_slice()) {
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!(v <= r.abs().max(0.0) + FEASIBILITY_TOL);
        }
        let again = project_feasible(p.grid()).unwrap();
        prop_assert_eq!(again.grid(), p.grid());
    }

    #[test]
    fn generation_is_deterministic_and_sic_ordered((m, k, seed) in scenario()) {
        let cfg = NetworkConfig::scenario(m, k);
        let a = generate_channels_with_seed(&cfg, seed).unwrap();
        let b = generate_channels_with_seed(&cfg, seed).unwrap();
        prop_assert_eq!(&a, &b);
        for cell in 0..m {
            for u in 1..k {
                prop_assert!(a.direct(cell, u) <= a.direct(cell, u - 1));
            }
        }
        prop_assert!(a.raw().iter().all(|v| v.is_finite() && *v > 0.0));
    }
}

#[test]
fn json_line_round_trip() {
    let cfg = NetworkConfig::scenario(3, 2);
    let g = generate_channels_with_seed(&cfg, 9).unwrap();
    let line = g.to_json_line().unwrap();
    assert_eq!(ChannelRealization::from_json_line(&line).unwrap(), g);
}

#[test]
fn rejects_unsorted_cells() {
    let unsorted = vec![vec![vec![1e-12], vec![2e-12]]];
    assert!(ChannelRealization::from_gains(0, unsorted).is_err());
    assert!(ChannelRealization::from_gains(0, vec![vec![vec![0.0]]]).is_err());
}
