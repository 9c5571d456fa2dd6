//! Ground-truth oracles by full enumeration.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Result, ShapError};
use crate::game::{single_player, Attribution, CoalitionGame, Method};
use crate::kernel::kernel_normalizer;
use crate::numeric::KahanSum;
use crate::stochastic::UnifiedStochasticConfig;
use crate::subset::{binomial, enumerate_subsets, full_mask, FeatureSubset};

pub const MAX_EXACT_SHAPLEY: usize = 20;
pub const MAX_RANDOM_ORDER: usize = 8;
pub const MAX_LEAST_SQUARES: usize = 16;
pub const MAX_UNIFIED_EXPECTATION: usize = 14;

fn capacity(what: &str, d: usize, limit: usize) -> ShapError {
    ShapError::Capacity(format!("{what} enumerates too much for d={d} (limit {limit})"))
}

/// A permutation of `0..d`; `order[k]` is the player in position `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    order: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &p in &order {
            if p >= order.len() || std::mem::replace(&mut seen[p], true) {
                return Err(ShapError::Argument(format!("{order:?} is not a permutation")));
            }
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `H^i(π)`: the players that precede `i`.
    pub fn predecessors(&self, i: usize) -> FeatureSubset {
        let d = self.order.len();
        let mut s = FeatureSubset::empty(d);
        for &p in self.order.iter().take_while(|&&p| p != i) {
            s = s.with(p);
        }
        s
    }

    /// Adds every player's marginal contribution along this order into `acc`.
    pub(crate) fn accumulate_marginals(&self, game: &CoalitionGame, acc: &mut [f64]) {
        let d = self.order.len();
        let mut prefix = FeatureSubset::empty(d);
        let mut prev = game.v_empty();
        for &p in &self.order {
            prefix = prefix.with(p);
            let cur = game.evaluate(prefix);
            acc[p] += cur - prev;
            prev = cur;
        }
    }
}

/// Brute-force Shapley values from the weighted marginal-contribution sum.
pub fn exact_shapley(game: &CoalitionGame) -> Result<Attribution> {
    let d = game.players();
    if d > MAX_EXACT_SHAPLEY {
        return Err(capacity("exact Shapley", d, MAX_EXACT_SHAPLEY));
    }
    let table = game.value_table()?;
    // |S|!(d-|S|-1)!/d! = 1 / (d·C(d-1, |S|))
    let weights: Vec<f64> = (0..d)
        .map(|s| 1.0 / (d as f64 * binomial(d - 1, s).unwrap_or(1) as f64))
        .collect();
    let full = full_mask(d);
    let phi: Vec<f64> = (0..d)
        .into_par_iter()
        .map(|i| {
            let bit = 1u64 << i;
            let mut acc = KahanSum::new();
            for s in 0..=full {
                if s & bit == 0 {
                    let w = weights[s.count_ones() as usize];
                    acc.add(w * (table[(s | bit) as usize] - table[s as usize]));
                }
            }
            acc.value()
        })
        .collect();
    Attribution::exact(phi, Method::ExactShapley)
}

/// Average of marginal contributions over all `d!` orderings.
pub fn exact_random_order(game: &CoalitionGame) -> Result<Attribution> {
    let d = game.players();
    if d > MAX_RANDOM_ORDER {
        return Err(capacity("exact random-order value", d, MAX_RANDOM_ORDER));
    }
    let tabled = CoalitionGame::from_table(d, game.value_table()?)?;
    let mut order: Vec<usize> = (0..d).collect();
    let mut sums = vec![0.0; d];
    let mut count = 0u64;
    loop {
        Permutation { order: order.clone() }.accumulate_marginals(&tabled, &mut sums);
        count += 1;
        if !next_permutation(&mut order) {
            break;
        }
    }
    let phi = sums.into_iter().map(|s| s / count as f64).collect();
    Attribution::exact(phi, Method::ExactRandomOrder)
}

/// Lexicographic successor; returns `false` after the last permutation.
fn next_permutation(a: &mut [usize]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let Some(i) = (0..a.len() - 1).rev().find(|&i| a[i] < a[i + 1]) else {
        return false;
    };
    let j = (i + 1..a.len()).rev().find(|&j| a[j] > a[i]).expect("successor exists");
    a.swap(i, j);
    a[i + 1..].reverse();
    true
}

/// `t = UᵀWv = Σ_{∅⊊S⊊N} ω(S)·v(S)·1^S` by enumeration.
pub fn kernel_weighted_sum(game: &CoalitionGame) -> Result<Vec<f64>> {
    let d = game.players();
    let w = kernel_normalizer(d)?;
    let mut acc = vec![KahanSum::new(); d];
    for s in enumerate_subsets(d, false)? {
        let wv = w.omega(s.len()) * game.evaluate(s);
        for i in s.iter() {
            acc[i].add(wv);
        }
    }
    Ok(acc.iter().map(KahanSum::value).collect())
}

/// Closed-form least-squares value
/// `φ = ((dI - J)/(d-1))·UᵀWv + ((v(N) - v(∅))/d)·1`.
pub fn exact_least_squares(game: &CoalitionGame) -> Result<Attribution> {
    let d = game.players();
    if d == 1 {
        return single_player(game, 0);
    }
    if d > MAX_LEAST_SQUARES {
        return Err(capacity("exact least-squares value", d, MAX_LEAST_SQUARES));
    }
    let t = kernel_weighted_sum(game)?;
    let total: f64 = t.iter().sum();
    let df = d as f64;
    let bias = game.v_all() / df;
    let phi = t.iter().map(|ti| (df * ti - total) / (df - 1.0) + bias).collect();
    Attribution::exact(phi, Method::ExactLeastSquares)
}

/// `UᵀWU` assembled subset by subset.
pub fn kernel_gram_by_enumeration(d: usize) -> Result<DMatrix<f64>> {
    let w = kernel_normalizer(d)?;
    let mut g = DMatrix::zeros(d, d);
    for s in enumerate_subsets(d, false)? {
        let members: Vec<usize> = s.iter().collect();
        crate::numeric::add_outer_indicator(&mut g, &members, w.omega(s.len()));
    }
    Ok(g)
}

/// `T·(Σ_{S∈Ω} p^i(S)·a^i_S·v(S))_i + b` summed over the whole domain.
pub fn exact_unified_expectation(
    config: &UnifiedStochasticConfig,
    game: &CoalitionGame,
) -> Result<Attribution> {
    let d = game.players();
    config.check_game(game)?;
    if d > MAX_UNIFIED_EXPECTATION {
        return Err(capacity("unified expectation", d, MAX_UNIFIED_EXPECTATION));
    }
    let include_trivial = config.domain().includes_trivial();
    let mut acc = vec![KahanSum::new(); d];
    for s in enumerate_subsets(d, include_trivial)? {
        let v = game.evaluate(s);
        let k = s.len();
        for (i, a) in acc.iter_mut().enumerate() {
            let inside = s.contains(i);
            let p = config.probability(k, inside);
            if p != 0.0 {
                a.add(p * config.coefficient(k, inside) * v);
            }
        }
    }
    let tilde: Vec<f64> = acc.iter().map(KahanSum::value).collect();
    let phi = config.finish(&tilde, game.v_all());
    Attribution::exact(phi, Method::UnifiedExpectation)
}
