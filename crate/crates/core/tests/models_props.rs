use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use unfold_ee::fp_closedform::solve_algorithm2_from;
use unfold_ee::fp_numerical::SolverOptions;
use unfold_ee::netmodel::{generate_channels_with_seed, wsee};
use unfold_ee::unfold_fum::{fum_forward, fum_infer, FumLayer, FumModel};
use unfold_ee::unfold_masum::layers::{invert_permutation, permutation_augment, refine};
use unfold_ee::unfold_masum::{masum_attention_maps, masum_infer, MasumLayout, MasumModel};
use unfold_ee::{ChannelRealization, NetworkConfig, UserGrid};

fn instance() -> impl Strategy<Value = (NetworkConfig, ChannelRealization)> {
    (1usize..4, 1usize..4, any::<u64>()).prop_map(|(m, k, seed)| {
        let cfg = NetworkConfig::scenario(m, k);
        let g = generate_channels_with_seed(&cfg, seed).unwrap();
        (cfg, g)
    })
}

fn random_layer(m: usize, k: usize, raw: &[f64]) -> FumLayer {
    let at = |i: usize| raw[i % raw.len()];
    FumLayer {
        alpha_rho: UserGrid::from_fn(m, k, |b, u| at(b * k + u)),
        theta_rho: UserGrid::from_fn(m, k, |b, u| at(b * k + u + 3) * 2.0),
        alpha_gamma: UserGrid::from_fn(m, k, |b, u| at(b * k + u + 5)),
        theta_gamma: UserGrid::from_fn(m, k, |b, u| at(b * k + u + 7) * 10.0),
    }
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fum_output_is_feasible(
        (cfg, g) in instance(),
        layers in 1usize..6,
        raw in prop::collection::vec(0.0f64..1.0, 16),
    ) {
        let mut model = FumModel::new(&cfg, layers);
        for (i, layer) in model.layers.iter_mut().enumerate() {
            *layer = random_layer(cfg.num_bs, cfg.users_per_bs, &raw[i..]);
        }
        let (rho, _) = fum_infer(&model, &g).unwrap();
        prop_assert!(rho.is_feasible());
        prop_assert!(wsee(&g, &rho, &cfg).unwrap().is_finite());
    }

    #[test]
    fn undamped_layers_unroll_algorithm2((cfg, g) in instance(), layers in 1usize..=14) {
        let model = FumModel::undamped(&cfg, layers);
        let out = fum_forward(&model, &g).unwrap();
        let opts = SolverOptions {
            epsilon: f64::MIN_POSITIVE,
            max_outer_iters: layers,
            ..SolverOptions::default()
        };
        let rep = solve_algorithm2_from(&g, &cfg, &opts, &model.init_rho).unwrap();
        if rep.iterations == layers {
            prop_assert_eq!(out.rho.grid(), rep.rho_final.grid());
        } else {
            // Converged early onto an exact fixed point; later layers stay there.
            let diff = out
                .rho
                .grid()
                .as_slice()
                .iter()
                .zip(rep.rho_final.grid().as_slice())
                .fold(0.0f64, |w, (a, b)| w.max((a - b).abs()));
            prop_assert!(diff < 1e-12);
        }
    }

    #[test]
    fn refine_is_feasible(
        m in 1usize..4,
        k in 1usize..4,
        raw in prop::collection::vec(-4.0f64..4.0, 18),
    ) {
        let a = UserGrid::from_fn(m, k, |b, u| raw[b * k + u]);
        let b = UserGrid::from_fn(m, k, |x, u| raw[9 + x * k + u]);
        prop_assert!(refine(&a, &b).unwrap().is_feasible());
    }

    #[test]
    fn permutations_preserve_wsee_and_mse(
        (cfg, g) in instance(),
        seed in any::<u64>(),
        raw in prop::collection::vec(0.01f64..1.0, 18),
    ) {
        let (m, k) = (cfg.num_bs, cfg.users_per_bs);
        let scale = 1.0 / (k as f64 + 0.5);
        let rho = unfold_ee::PowerAllocation::new(UserGrid::from_fn(m, k, |b, u| raw[b * k + u] * scale)).unwrap();
        let target = unfold_ee::PowerAllocation::new(UserGrid::from_fn(m, k, |b, u| raw[9 + b * k + u] * scale)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arrangements = permutation_augment(&g, Some(&rho), 4, &mut rng).unwrap();
        let w0 = wsee(&g, &rho, &cfg).unwrap();
        let e0 = mse(rho.grid().as_slice(), target.grid().as_slice());
        for arr in &arrangements {
            let moved_rho = arr.target.as_ref().unwrap();
            let moved_target = UserGrid::from_fn(m, k, |b, u| target.get(b, arr.perms[b][u]));
            let w = wsee(&arr.channel, moved_rho, &cfg).unwrap();
            prop_assert!((w - w0).abs() <= 1e-12 * w0);
            prop_assert!((mse(moved_rho.grid().as_slice(), moved_target.as_slice()) - e0).abs() <= 1e-15);
            let inv = invert_permutation(&arr.perms);
            for b in 0..m {
                for u in 0..k {
                    prop_assert_eq!(arr.perms[b][inv[b][u]], u);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn masum_outputs_are_feasible_and_attention_is_stochastic(
        (cfg, g) in instance(),
        seed in any::<u64>(),
        blocks in 0usize..=3,
    ) {
        let layout = MasumLayout::desk(&cfg).with_attention(blocks);
        let model = MasumModel::init(&cfg, &layout, layout.stages, seed).unwrap();
        let (rho, _) = masum_infer(&model, &g).unwrap();
        prop_assert!(rho.is_feasible());
        let maps = masum_attention_maps(&model, &g).unwrap();
        prop_assert_eq!(maps.len(), blocks);
        for f_s in &maps {
            for r in 0..f_s.rows() {
                let row: Vec<f64> = (0..f_s.cols()).map(|c| f_s.get(r, c)).collect();
                prop_assert!(row.iter().all(|&v| v >= 0.0));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn model_json_round_trips() {
    let cfg = NetworkConfig::scenario(2, 2);
    let fum = FumModel::new(&cfg, 4);
    assert_eq!(FumModel::from_json(&fum.to_json().unwrap()).unwrap(), fum);
    let masum = MasumModel::init(&cfg, &MasumLayout::desk(&cfg), 5, 3).unwrap();
    assert_eq!(MasumModel::from_json(&masum.to_json().unwrap()).unwrap(), masum);
    assert!(MasumModel::from_json(&fum.to_json().unwrap()).is_err());
}
