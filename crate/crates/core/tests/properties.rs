use std::sync::Arc;

use proptest::prelude::*;
use shapx_core::amortized::{additive_efficient_normalization, Checkpoint};
use shapx_core::eval::{attribution_order, curve_for_order, curve_from_game};
use shapx_core::models::{masked_game, MaskingRule, TabularModel};
use shapx_core::nn::{Activation, Mlp};
use shapx_core::{
    estimate_kernelshap, estimate_permutation, exact_least_squares, exact_shapley, CoalitionGame, CurveMode,
    FeatureSubset, RandomSource,
};

fn table_game(d: usize, values: &[f64]) -> CoalitionGame {
    CoalitionGame::from_table(d, values[..1 << d].to_vec()).unwrap()
}

fn game_strategy() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..=7).prop_flat_map(|d| (Just(d), prop::collection::vec(-10.0f64..10.0, 1 << d)))
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn shapley_is_efficient((d, values) in game_strategy()) {
        let game = table_game(d, &values);
        let phi = exact_shapley(&game).unwrap();
        prop_assert!(phi.efficiency_gap(&game).abs() < 1e-9);
    }

    #[test]
    fn shapley_is_linear((d, a) in game_strategy(), b in prop::collection::vec(-10.0f64..10.0, 128), w in -3.0f64..3.0) {
        let ga = table_game(d, &a);
        let gb = table_game(d, &b);
        let mixed: Vec<f64> = (0..1 << d).map(|k| a[k] + w * b[k]).collect();
        let gm = table_game(d, &mixed);
        let (pa, pb, pm) = (exact_shapley(&ga).unwrap().phi, exact_shapley(&gb).unwrap().phi, exact_shapley(&gm).unwrap().phi);
        for i in 0..d {
            prop_assert!((pm[i] - pa[i] - w * pb[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn null_player_gets_zero((d, values) in game_strategy(), null in 0usize..7) {
        prop_assume!(d >= 2);
        let null = null % d;
        // Make `null` a dummy: v(S ∪ {null}) = v(S).
        let mut v = values[..1 << d].to_vec();
        for mask in 0..1usize << d {
            if mask & (1 << null) != 0 {
                v[mask] = v[mask & !(1 << null)];
            }
        }
        let game = CoalitionGame::from_table(d, v).unwrap();
        prop_assert!(exact_shapley(&game).unwrap().phi[null].abs() < 1e-10);
    }

    #[test]
    fn symmetric_players_share_equally((d, values) in game_strategy()) {
        prop_assume!(d >= 2);
        // Symmetrize players 0 and 1 by averaging v over the swap.
        let swap = |m: usize| {
            let (b0, b1) = (m & 1, (m >> 1) & 1);
            (m & !3) | (b0 << 1) | b1
        };
        let v: Vec<f64> = (0..1usize << d).map(|m| (values[m] + values[swap(m)]) / 2.0).collect();
        let phi = exact_shapley(&CoalitionGame::from_table(d, v).unwrap()).unwrap().phi;
        prop_assert!((phi[0] - phi[1]).abs() < 1e-10);
    }

    #[test]
    fn least_squares_matches_shapley((d, values) in game_strategy()) {
        let game = table_game(d, &values);
        let a = exact_shapley(&game).unwrap().phi;
        let b = exact_least_squares(&game).unwrap().phi;
        for i in 0..d {
            prop_assert!((a[i] - b[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn sampled_estimators_stay_efficient((d, values) in game_strategy(), seed in 0u64..1000, m in 1usize..40) {
        prop_assume!(d >= 2);
        let game = table_game(d, &values);
        let mut rng = RandomSource::new(seed, 0);
        let perm = estimate_permutation(&game, m, &mut rng, false).unwrap();
        prop_assert!(perm.efficiency_gap(&game).abs() < 1e-9);
        let ks = estimate_kernelshap(&game, 2 * (m + d), &mut rng, true).unwrap();
        prop_assert!(ks.efficiency_gap(&game).abs() < 1e-8);
    }

    #[test]
    fn normalization_is_efficient_and_idempotent(raw in prop::collection::vec(-1e3f64..1e3, 1..40), total in -1e3f64..1e3) {
        let once = additive_efficient_normalization(&raw, total);
        let twice = additive_efficient_normalization(&once, total);
        prop_assert!((once.iter().sum::<f64>() - total).abs() < 1e-8);
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn curve_depends_only_on_order((d, values) in game_strategy(), phi in prop::collection::vec(-5.0f64..5.0, 7), k in 0.1f64..10.0, c in -3.0f64..3.0) {
        let game = table_game(d, &values);
        let phi = &phi[..d];
        let warped: Vec<f64> = phi.iter().map(|p| k * p.powi(3) + c).collect();
        for mode in [CurveMode::Insertion, CurveMode::Deletion] {
            let a = curve_from_game(&game, phi, mode).unwrap();
            let b = curve_from_game(&game, &warped, mode).unwrap();
            prop_assert_eq!(attribution_order(phi), attribution_order(&warped));
            prop_assert_eq!(a.auc, b.auc);
        }
    }

    #[test]
    fn deletion_reaches_the_insertion_start((d, values) in game_strategy(), seed in 0u64..100) {
        let game = table_game(d, &values);
        let order = RandomSource::new(seed, 0).permutation(d);
        let reversed: Vec<usize> = order.iter().rev().copied().collect();
        let del = curve_for_order(&game, &order, CurveMode::Deletion).unwrap();
        let ins = curve_for_order(&game, &reversed, CurveMode::Insertion).unwrap();
        prop_assert_eq!(del.raw_scores[d], ins.raw_scores[0]);
        prop_assert_eq!(del.raw_scores[0], ins.raw_scores[d]);
        for k in 0..=d {
            prop_assert_eq!(del.raw_scores[k], ins.raw_scores[d - k]);
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact(widths in prop::collection::vec(1usize..6, 2..5), seed in any::<u64>()) {
        let mut rng = RandomSource::new(seed, 0);
        let mut net = Mlp::init(widths.clone(), Activation::Elu, &mut rng).unwrap();
        for p in net.params_mut() {
            *p = f64::from_bits(rng.next_u64() & 0x7FEF_FFFF_FFFF_FFFF) * if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
        }
        let ckpt = Checkpoint::new("test".into(), &net, widths[0], *widths.last().unwrap(), None, seed);
        let back = Checkpoint::from_json(&ckpt.to_json().unwrap()).unwrap();
        let a: Vec<u64> = ckpt.params.iter().map(|p| p.to_bits()).collect();
        let b: Vec<u64> = back.params.iter().map(|p| p.to_bits()).collect();
        prop_assert_eq!(a, b);
        prop_assert_eq!(back.seed, seed);
    }
}

#[test]
fn masked_linear_game_has_closed_form() {
    let model = Arc::new(TabularModel::linear(vec![vec![0.5, -1.0, 2.0, 0.0]], vec![3.0]).unwrap());
    let x = [2.0, 1.0, -1.0, 7.0];
    let game = masked_game(model, &x, 0, &MaskingRule::Fixed(vec![1.0, 1.0, 1.0, 1.0])).unwrap();
    let phi = exact_shapley(&game).unwrap().phi;
    for (p, e) in phi.iter().zip([0.5, 0.0, -4.0, 0.0]) {
        assert!((p - e).abs() < 1e-12, "{phi:?}");
    }
    assert_eq!(game.evaluate(FeatureSubset::from_indices(4, &[0]).unwrap()), 3.0 + 1.0 - 1.0 + 2.0);
}
