use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapError};
use crate::exact::Permutation;
use crate::game::{single_player, Attribution, CoalitionGame, Method};
use crate::kernel::{kernel_normalizer, KernelWeights};
use crate::numeric::{add_outer_indicator, solve_efficiency_constrained};
use crate::rng::RandomSource;
use crate::subset::{enumerate_subsets, FeatureSubset};

use super::config::{TableRow, UnifiedStochasticConfig};
use super::sampling::{sample_kernel_subset, ClassSampler};

fn need_samples(m: usize) -> Result<()> {
    if m == 0 {
        return Err(ShapError::Argument("sample count must be at least 1".into()));
    }
    Ok(())
}

fn need_even(m: usize, what: &str) -> Result<()> {
    if m % 2 == 1 {
        return Err(ShapError::Argument(format!(
            "{what} needs an even sample count (got {m})"
        )));
    }
    Ok(())
}

/// Monte Carlo estimate of one player's semivalue.
///
/// `S ~ p^sv` over `N \ {i}` is drawn as a size uniform in `0..d` followed
/// by a uniform subset of that size, which matches `|S|!(d-|S|-1)!/d!`
/// because every size class carries mass `1/d`.
pub fn estimate_semivalue_mc(
    game: &CoalitionGame,
    feature: usize,
    m: usize,
    rng: &mut RandomSource,
) -> Result<f64> {
    need_samples(m)?;
    let d = game.players();
    if feature >= d {
        return Err(ShapError::Argument(format!("feature {feature} out of range for d={d}")));
    }
    let mut pool: Vec<usize> = (0..d).filter(|&j| j != feature).collect();
    let mut sum = 0.0;
    for _ in 0..m {
        let size = rng.below(d);
        let s = rng.subset_from_pool(d, &mut pool, size);
        sum += game.evaluate(s.with(feature)) - game.evaluate(s);
    }
    Ok(sum / m as f64)
}

/// Semivalue estimates for every player, `m` samples each.
pub fn estimate_semivalue(game: &CoalitionGame, m: usize, rng: &mut RandomSource) -> Result<Attribution> {
    let phi = (0..game.players())
        .map(|i| estimate_semivalue_mc(game, i, m, rng))
        .collect::<Result<Vec<_>>>()?;
    Attribution::new(phi, Method::Semivalue, (m * game.players()) as u64, rng.seed())
}

/// Permutation sampling; with `antithetical`, each order is paired with its reversal.
pub fn estimate_permutation(
    game: &CoalitionGame,
    m: usize,
    rng: &mut RandomSource,
    antithetical: bool,
) -> Result<Attribution> {
    need_samples(m)?;
    if antithetical {
        need_even(m, "antithetical sampling")?;
    }
    let d = game.players();
    let method = if antithetical { Method::Antithetical } else { Method::Permutation };
    let mut sums = vec![0.0; d];
    let draws = if antithetical { m / 2 } else { m };
    for _ in 0..draws {
        let mut order = rng.permutation(d);
        Permutation::new(order.clone())?.accumulate_marginals(game, &mut sums);
        if antithetical {
            order.reverse();
            Permutation::new(order)?.accumulate_marginals(game, &mut sums);
        }
    }
    let phi = sums.into_iter().map(|s| s / m as f64).collect();
    Attribution::new(phi, method, m as u64, rng.seed())
}

/// How the sampled KernelSHAP regression enforces efficiency.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelSolve {
    /// Solve the efficiency-constrained problem through its KKT system.
    #[default]
    Constrained,
    /// Unconstrained regression followed by additive efficient normalization.
    UnconstrainedNormalized,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelShapOptions {
    pub paired: bool,
    pub solve: KernelSolve,
}

/// KernelSHAP: regression on `m` subsets drawn from `p^ls`.
pub fn estimate_kernelshap(
    game: &CoalitionGame,
    m: usize,
    rng: &mut RandomSource,
    paired: bool,
) -> Result<Attribution> {
    estimate_kernelshap_with(game, m, rng, KernelShapOptions { paired, ..Default::default() })
}

pub fn estimate_kernelshap_with(
    game: &CoalitionGame,
    m: usize,
    rng: &mut RandomSource,
    options: KernelShapOptions,
) -> Result<Attribution> {
    let d = game.players();
    let method = if options.paired { Method::KernelShapPaired } else { Method::KernelShap };
    if d == 1 {
        return single_player(game, rng.seed());
    }
    if m < d {
        return Err(ShapError::Argument(format!(
            "KernelSHAP needs at least d={d} samples (got {m})"
        )));
    }
    if options.paired {
        need_even(m, "paired KernelSHAP")?;
    }
    let weights = kernel_normalizer(d)?;
    let v0 = game.v_empty();
    let mut gram = DMatrix::zeros(d, d);
    let mut rhs = vec![0.0; d];
    let mut members = Vec::with_capacity(d);
    let draws = if options.paired { m / 2 } else { m };
    for _ in 0..draws {
        for s in sample_kernel_subset(&weights, rng, options.paired).subsets() {
            let y = game.evaluate(s) - v0;
            members.clear();
            members.extend(s.iter());
            add_outer_indicator(&mut gram, &members, 1.0);
            for &i in &members {
                rhs[i] += y;
            }
        }
    }
    let inv = 1.0 / m as f64;
    gram *= inv;
    rhs.iter_mut().for_each(|r| *r *= inv);
    let phi = match options.solve {
        KernelSolve::Constrained => solve_efficiency_constrained(&gram, &rhs, game.v_all())?,
        KernelSolve::UnconstrainedNormalized => {
            let raw = solve_unconstrained(&gram, &rhs)?;
            crate::amortized::additive_efficient_normalization(&raw, game.v_all())
        }
    };
    Attribution::new(phi, method, m as u64, rng.seed())
}

fn solve_unconstrained(gram: &DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let d = rhs.len();
    let b = nalgebra::DVector::from_column_slice(rhs);
    let chol = gram
        .clone()
        .cholesky()
        .or_else(|| {
            log::warn!("rank-deficient Gram matrix; adding ridge {:e}·I", crate::numeric::RIDGE);
            (gram + DMatrix::<f64>::identity(d, d) * crate::numeric::RIDGE).cholesky()
        })
        .ok_or_else(|| ShapError::Solver("singular regression; increase the sample count".into()))?;
    Ok(chol.solve(&b).iter().copied().collect())
}

/// KernelSHAP over every proper non-empty subset weighted by `p^ls`; no sampling.
pub fn kernelshap_full_enumeration(game: &CoalitionGame) -> Result<Attribution> {
    let d = game.players();
    if d == 1 {
        return single_player(game, 0);
    }
    let weights = kernel_normalizer(d)?;
    let v0 = game.v_empty();
    let mut gram = DMatrix::zeros(d, d);
    let mut rhs = vec![0.0; d];
    for s in enumerate_subsets(d, false)? {
        let p = weights.subset_probability(s.len());
        let members: Vec<usize> = s.iter().collect();
        add_outer_indicator(&mut gram, &members, p);
        let y = game.evaluate(s) - v0;
        for &i in &members {
            rhs[i] += p * y;
        }
    }
    let phi = solve_efficiency_constrained(&gram, &rhs, game.v_all())?;
    Attribution::exact(phi, Method::KernelShap)
}

/// `A = E[1^S (1^S)ᵀ]` under `p^ls`, from the size-class closed forms.
pub fn kernel_second_moment(weights: &KernelWeights) -> DMatrix<f64> {
    let d = weights.players();
    let diag = weights.inclusion_probability();
    let off = weights.pair_inclusion_probability();
    DMatrix::from_fn(d, d, |i, j| if i == j { diag } else { off })
}

/// `η = A⁻¹(b - 1·(1ᵀA⁻¹b - v(N) + v(∅))/(1ᵀA⁻¹1))` for a given `b`.
pub fn unbiased_kernelshap_solve(weights: &KernelWeights, b: &[f64], v_all: f64) -> Result<Vec<f64>> {
    solve_efficiency_constrained(&kernel_second_moment(weights), b, v_all)
}

/// Unbiased KernelSHAP: exact `A`, Monte Carlo `b̄_M`.
pub fn estimate_kernelshap_unbiased(
    game: &CoalitionGame,
    m: usize,
    rng: &mut RandomSource,
) -> Result<Attribution> {
    need_samples(m)?;
    let d = game.players();
    if d == 1 {
        return single_player(game, rng.seed());
    }
    let weights = kernel_normalizer(d)?;
    // (1/M)Σ 1^S (v(S) - v(∅)) has the same mean as (1/M)Σ 1^S v(S) - E[1^S]v(∅)
    // and vanishes identically on constant games.
    let v0 = game.v_empty();
    let mut b = vec![0.0; d];
    for _ in 0..m {
        let s = sample_kernel_subset(&weights, rng, false).first();
        let v = game.evaluate(s) - v0;
        for i in s.iter() {
            b[i] += v;
        }
    }
    b.iter_mut().for_each(|bi| *bi /= m as f64);
    let phi = unbiased_kernelshap_solve(&weights, &b, game.v_all())?;
    Attribution::new(phi, Method::KernelShapUnbiased, m as u64, rng.seed())
}

/// Monte Carlo form of the unified estimator: `T·((1/M)Σ a_{S_k} v(S_k)) + b`.
///
/// Index-independent configurations share one draw across coordinates and
/// use `m` game evaluations; otherwise each coordinate draws `m` subsets from
/// its own `p^i`. Paired draws count both subsets toward `m`.
pub fn estimate_unified(
    config: &UnifiedStochasticConfig,
    game: &CoalitionGame,
    m: usize,
    rng: &mut RandomSource,
) -> Result<Attribution> {
    need_samples(m)?;
    config.check_game(game)?;
    if config.paired() {
        need_even(m, "paired sampling")?;
    }
    let d = game.players();
    let draws = if config.paired() { m / 2 } else { m };
    let mut acc = vec![0.0; d];
    let samples_used = if config.is_index_independent() {
        let sampler = ClassSampler::shared(config);
        // Coefficients by (size, inside) are reused across the whole batch.
        let table: Vec<[f64; 2]> = (0..=d)
            .map(|s| [config.coefficient(s, false), config.coefficient(s, true)])
            .collect();
        let add = |s: FeatureSubset, acc: &mut [f64]| {
            let v = game.evaluate(s);
            let [out, inn] = table[s.len()];
            let (vo, vi) = (out * v, inn * v);
            let bits = s.bits();
            for (i, a) in acc.iter_mut().enumerate() {
                *a += if bits >> i & 1 == 1 { vi } else { vo };
            }
        };
        for _ in 0..draws {
            let s = sampler.draw_shared(rng);
            add(s, &mut acc);
            if config.paired() {
                add(s.complement(), &mut acc);
            }
        }
        m
    } else {
        let sampler = ClassSampler::per_coordinate(config);
        for (i, a) in acc.iter_mut().enumerate() {
            let mut pool: Vec<usize> = (0..d).filter(|&j| j != i).collect();
            for _ in 0..draws {
                let s = sampler.draw_for(i, &mut pool, rng);
                for t in std::iter::once(s).chain(config.paired().then(|| s.complement())) {
                    let inside = t.contains(i);
                    *a += config.coefficient(t.len(), inside) * game.evaluate(t);
                }
            }
        }
        m * d
    };
    let tilde: Vec<f64> = acc.into_iter().map(|a| a / m as f64).collect();
    let phi = config.finish(&tilde, game.v_all());
    Attribution::new(phi, Method::Unified, samples_used as u64, rng.seed())
}

/// The SimSHAP training target
/// `φ̂ = (1/M)Σ_k γ((d-|S|)·1[i∈S] - |S|·1[i∉S])·v(S_k) + ((v(N)-v(∅))/d)·1`.
pub fn simshap_target(
    game: &CoalitionGame,
    m: usize,
    rng: &mut RandomSource,
    paired: bool,
) -> Result<Attribution> {
    if game.players() == 1 {
        need_samples(m)?;
        return single_player(game, rng.seed());
    }
    let config = UnifiedStochasticConfig::table_row(TableRow::SimShap, game.players())?
        .with_pairing(paired)?;
    let mut out = estimate_unified(&config, game, m, rng)?;
    out.method = Method::SimShapTarget;
    Ok(out)
}

/// A named stochastic estimator with its sampling options.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "kebab-case")]
pub enum EstimatorSpec {
    Semivalue,
    Permutation,
    Antithetical,
    KernelShap { paired: bool },
    KernelShapUnbiased,
    SimShap { paired: bool },
    Unified { row: TableRow, paired: bool },
}

impl EstimatorSpec {
    /// Parses the method names accepted on the command line.
    pub fn parse(method: &str, paired: bool) -> Result<Self> {
        Ok(match method {
            "semivalue" => EstimatorSpec::Semivalue,
            "permutation" => EstimatorSpec::Permutation,
            "antithetical" => EstimatorSpec::Antithetical,
            "kernelshap" => EstimatorSpec::KernelShap { paired },
            "kernelshap-unbiased" => EstimatorSpec::KernelShapUnbiased,
            "simshap-sample" | "simshap" => EstimatorSpec::SimShap { paired },
            other => match other.strip_prefix("unified:") {
                Some(row) => EstimatorSpec::Unified { row: TableRow::parse(row)?, paired },
                None => {
                    return Err(ShapError::Argument(format!(
                        "unknown estimator '{other}' (expected semivalue, permutation, antithetical, \
                         kernelshap, kernelshap-unbiased, simshap-sample or unified:<sv|lsv|simshap>)"
                    )))
                }
            },
        })
    }

    pub fn label(&self) -> String {
        let pair = |p: bool| if p { "-paired" } else { "" };
        match self {
            EstimatorSpec::Semivalue => "semivalue".into(),
            EstimatorSpec::Permutation => "permutation".into(),
            EstimatorSpec::Antithetical => "antithetical".into(),
            EstimatorSpec::KernelShap { paired } => format!("kernelshap{}", pair(*paired)),
            EstimatorSpec::KernelShapUnbiased => "kernelshap-unbiased".into(),
            EstimatorSpec::SimShap { paired } => format!("simshap-sample{}", pair(*paired)),
            EstimatorSpec::Unified { row, paired } => format!("unified:{}{}", row.name(), pair(*paired)),
        }
    }

    pub fn run(&self, game: &CoalitionGame, m: usize, rng: &mut RandomSource) -> Result<Attribution> {
        match *self {
            EstimatorSpec::Semivalue => estimate_semivalue(game, m, rng),
            EstimatorSpec::Permutation => estimate_permutation(game, m, rng, false),
            EstimatorSpec::Antithetical => estimate_permutation(game, m, rng, true),
            EstimatorSpec::KernelShap { paired } => estimate_kernelshap(game, m, rng, paired),
            EstimatorSpec::KernelShapUnbiased => estimate_kernelshap_unbiased(game, m, rng),
            EstimatorSpec::SimShap { paired } => simshap_target(game, m, rng, paired),
            EstimatorSpec::Unified { row, paired } => {
                let cfg = UnifiedStochasticConfig::table_row(row, game.players())?.with_pairing(paired)?;
                estimate_unified(&cfg, game, m, rng)
            }
        }
    }
}
