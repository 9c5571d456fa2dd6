use num_bigint::BigInt;
use num_rational::BigRational;
use shapx_core::models::{synthetic_game, SyntheticKind};
use shapx_core::{exact_random_order, exact_shapley, exact_unified_expectation, CoalitionGame, TableRow, UnifiedStochasticConfig};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn to_f64(r: &BigRational) -> f64 {
    r.numer().to_string().parse::<f64>().unwrap() / r.denom().to_string().parse::<f64>().unwrap()
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(d - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, d - 1);
            out.push(q);
        }
    }
    out
}

/// Average marginal contribution over all d! orders, in exact arithmetic.
fn rational_shapley(d: usize, v: &[BigRational]) -> Vec<BigRational> {
    let perms = permutations(d);
    let mut phi = vec![rat(0, 1); d];
    for p in &perms {
        let mut mask = 0usize;
        for &i in p {
            phi[i] += &v[mask | (1 << i)] - &v[mask];
            mask |= 1 << i;
        }
    }
    let n = BigRational::from_integer(BigInt::from(perms.len()));
    phi.into_iter().map(|x| x / &n).collect()
}

fn rational_game(d: usize, seed: u64) -> Vec<BigRational> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..1usize << d)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            rat(((state >> 33) % 2001) as i64 - 1000, 1 + ((state >> 20) % 97) as i64)
        })
        .collect()
}

#[test]
fn exact_shapley_matches_rational_permutation_oracle() {
    for d in 1..=7 {
        for seed in 0..3 {
            let v = rational_game(d, seed + 10 * d as u64);
            let truth = rational_shapley(d, &v);
            let game = CoalitionGame::from_table(d, v.iter().map(to_f64).collect()).unwrap();
            let phi = exact_shapley(&game).unwrap().phi;
            for (a, b) in phi.iter().zip(&truth) {
                assert!((a - to_f64(b)).abs() < 1e-9 * (1.0 + to_f64(b).abs()), "d={d}: {a} vs {b}");
            }
            if d >= 2 {
                let ro = exact_random_order(&game).unwrap().phi;
                for (a, b) in ro.iter().zip(&truth) {
                    assert!((a - to_f64(b)).abs() < 1e-9 * (1.0 + to_f64(b).abs()));
                }
            }
        }
    }
}

#[test]
fn table_rows_match_rational_oracle() {
    for d in 2..=6 {
        let v = rational_game(d, 99 + d as u64);
        let truth: Vec<f64> = rational_shapley(d, &v).iter().map(to_f64).collect();
        let game = CoalitionGame::from_table(d, v.iter().map(to_f64).collect()).unwrap();
        for row in [TableRow::Semivalue, TableRow::LeastSquares, TableRow::SimShap] {
            let cfg = UnifiedStochasticConfig::table_row(row, d).unwrap();
            let phi = exact_unified_expectation(&cfg, &game).unwrap().phi;
            for (a, b) in phi.iter().zip(&truth) {
                assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{row:?} d={d}");
            }
        }
    }
}

#[test]
fn fixture_closed_forms() {
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);

    let glove = exact_shapley(&synthetic_game(&SyntheticKind::Glove, 3, 0).unwrap()).unwrap().phi;
    assert!(close(&glove, &[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]), "{glove:?}");

    let unanimity = SyntheticKind::Unanimity { coalition: vec![1, 3, 4] };
    let phi = exact_shapley(&synthetic_game(&unanimity, 6, 0).unwrap()).unwrap().phi;
    assert!(close(&phi, &[0.0, 1.0 / 3.0, 0.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]), "{phi:?}");

    for d in [3, 4, 7] {
        let phi = exact_shapley(&synthetic_game(&SyntheticKind::Majority, d, 0).unwrap()).unwrap().phi;
        assert!(phi.iter().all(|p| (p - 1.0 / d as f64).abs() < 1e-12), "{phi:?}");
    }

    let additive = SyntheticKind::parse("additive", 5).unwrap();
    let phi = exact_shapley(&synthetic_game(&additive, 5, 0).unwrap()).unwrap().phi;
    assert!(close(&phi, &[1.0, 2.0, 3.0, 4.0, 5.0]));
}
