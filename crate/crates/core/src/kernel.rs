//! Shapley kernel weights and their size-class aggregates.
//!
//! `ω(S)` depends on `S` only through `|S|`, so every quantity here is
//! computed per size class in `O(d)` terms.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapError};
use crate::rng::RandomSource;
use crate::subset::{binomial, MAX_PLAYERS};

/// `ω(d, s) = (d-1) / (C(d,s)·s·(d-s))` for `1 <= s <= d-1`.
pub fn shapley_kernel_weight(d: usize, s: usize) -> Result<f64> {
    if d < 2 {
        return Err(ShapError::Domain(format!(
            "the Shapley kernel needs d >= 2 (got d={d})"
        )));
    }
    if d > MAX_PLAYERS {
        return Err(ShapError::Capacity(format!("d={d} exceeds {MAX_PLAYERS} players")));
    }
    if s == 0 || s >= d {
        return Err(ShapError::Domain(format!(
            "kernel size {s} outside 1..={} (empty and full sets carry no weight)",
            d - 1
        )));
    }
    // Exact integer denominator; C(64,32)·32·32 < 2^128.
    let denom = binomial(d, s)? as u128 * s as u128 * (d - s) as u128;
    Ok((d - 1) as f64 / denom as f64)
}

/// Kernel weights for one player count together with their normalizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelWeights {
    d: usize,
    /// `omega_by_size[s - 1] = ω(d, s)`.
    omega_by_size: Vec<f64>,
    gamma: f64,
    /// `size_probs[s - 1] = C(d,s)·ω(d,s)/γ`.
    size_probs: Vec<f64>,
    cumulative: Vec<f64>,
}

/// Builds [`KernelWeights`] for `d >= 2`.
pub fn kernel_normalizer(d: usize) -> Result<KernelWeights> {
    if d < 2 {
        return Err(ShapError::Domain(format!(
            "kernel normalizer undefined for d={d}: no proper non-empty subset"
        )));
    }
    let omega_by_size = (1..d)
        .map(|s| shapley_kernel_weight(d, s))
        .collect::<Result<Vec<_>>>()?;
    // C(d,s)·ω(d,s) = (d-1)/(s(d-s)); summing that form avoids the large binomials.
    let class_mass: Vec<f64> = (1..d).map(|s| 1.0 / (s as f64 * (d - s) as f64)).collect();
    let unscaled: f64 = class_mass.iter().sum();
    let gamma = (d - 1) as f64 * unscaled;
    let size_probs: Vec<f64> = class_mass.iter().map(|m| m / unscaled).collect();
    let mut acc = 0.0;
    let mut cumulative: Vec<f64> = size_probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    if let Some(last) = cumulative.last_mut() {
        *last = 1.0;
    }
    Ok(KernelWeights { d, omega_by_size, gamma, size_probs, cumulative })
}

impl KernelWeights {
    pub fn players(&self) -> usize {
        self.d
    }

    /// `ω(d, s)`; zero outside `1..d`.
    pub fn omega(&self, s: usize) -> f64 {
        if s == 0 || s >= self.d {
            0.0
        } else {
            self.omega_by_size[s - 1]
        }
    }

    pub fn omega_by_size(&self) -> &[f64] {
        &self.omega_by_size
    }

    /// `γ = Σ_{∅ ⊊ S ⊊ N} ω(S)`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Normalizer of `1/(C(d,s)·s·(d-s))`, i.e. `γ / (d-1)`.
    ///
    /// This is the scale that multiplies the sampled sums in the
    /// least-squares and SimSHAP estimators: with `p(S) = ω(S)/γ`,
    /// `coef_scale()·p(S) = 1/(C(d,s)·s·(d-s))`.
    pub fn coef_scale(&self) -> f64 {
        self.gamma / (self.d - 1) as f64
    }

    /// Probability that a kernel draw has size `s`.
    pub fn size_probability(&self, s: usize) -> f64 {
        if s == 0 || s >= self.d {
            0.0
        } else {
            self.size_probs[s - 1]
        }
    }

    /// `p^ls(S) = ω(S)/γ` for a subset of size `s`.
    pub fn subset_probability(&self, s: usize) -> f64 {
        self.omega(s) / self.gamma
    }

    /// `P(i ∈ S)` under `p^ls`.
    pub fn inclusion_probability(&self) -> f64 {
        let d = self.d as f64;
        (1..self.d).map(|s| self.size_probability(s) * s as f64 / d).sum()
    }

    /// `P(i ∈ S, j ∈ S)` for `i != j` under `p^ls`.
    pub fn pair_inclusion_probability(&self) -> f64 {
        let d = self.d as f64;
        (1..self.d)
            .map(|s| self.size_probability(s) * (s * (s - 1)) as f64 / (d * (d - 1.0)))
            .sum()
    }

    /// Diagonal and off-diagonal entries of `UᵀWU = ((d-1)/d)·I + B·J`.
    ///
    /// Returns `(A, B)` with `A = ((d-1)/d)·Σ_{i=1}^{d-1} 1/(d-i)` the diagonal.
    pub fn gram_entries(&self) -> (f64, f64) {
        let d = self.d as f64;
        let harmonic: f64 = (1..self.d).map(|i| 1.0 / (self.d - i) as f64).sum();
        let a = (d - 1.0) / d * harmonic;
        (a, a - (d - 1.0) / d)
    }

    /// Draws a subset size from the kernel size distribution.
    pub fn sample_size(&self, rng: &mut RandomSource) -> usize {
        let u = rng.uniform();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.d - 2) + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subset::enumerate_subsets;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn rational_omega(d: usize, s: usize) -> BigRational {
        let fact = |n: usize| (1..=n).fold(BigInt::from(1), |a, k| a * BigInt::from(k));
        let c = fact(d) / (fact(s) * fact(d - s));
        BigRational::new(BigInt::from(d - 1), c * BigInt::from(s) * BigInt::from(d - s))
    }

    fn to_f64(r: &BigRational) -> f64 {
        let n: f64 = r.numer().to_string().parse().unwrap();
        let m: f64 = r.denom().to_string().parse().unwrap();
        n / m
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(shapley_kernel_weight(4, 1).unwrap(), 0.25);
        assert_eq!(shapley_kernel_weight(2, 1).unwrap(), 0.5);
        // 7 / (56·3·5) = 1/120
        let exact = to_f64(&rational_omega(8, 3));
        assert!((shapley_kernel_weight(8, 3).unwrap() - exact).abs() <= 1e-18);
        assert!((exact - 1.0 / 120.0).abs() < 1e-18);
    }

    #[test]
    fn kernel_matches_rational_oracle() {
        for d in 2..=20 {
            for s in 1..d {
                let exact = to_f64(&rational_omega(d, s));
                let got = shapley_kernel_weight(d, s).unwrap();
                assert!(((got - exact) / exact).abs() < 4.0 * f64::EPSILON, "d={d} s={s}");
            }
        }
    }

    #[test]
    fn kernel_domain_errors() {
        assert!(matches!(shapley_kernel_weight(1, 0), Err(ShapError::Domain(_))));
        assert!(matches!(shapley_kernel_weight(4, 0), Err(ShapError::Domain(_))));
        assert!(matches!(shapley_kernel_weight(4, 4), Err(ShapError::Domain(_))));
        assert!(matches!(kernel_normalizer(1), Err(ShapError::Domain(_))));
    }

    #[test]
    fn normalizer_examples() {
        assert!((kernel_normalizer(3).unwrap().gamma() - 2.0).abs() < 1e-15);
        assert!((kernel_normalizer(2).unwrap().gamma() - 1.0).abs() < 1e-15);
        let w = kernel_normalizer(12).unwrap();
        let brute: f64 = enumerate_subsets(12, false)
            .unwrap()
            .map(|s| shapley_kernel_weight(12, s.len()).unwrap())
            .sum();
        assert!((w.gamma() - brute).abs() < 1e-12 * brute);
    }

    #[test]
    fn size_classes_sum_to_gamma_and_one() {
        for d in 2..=16 {
            let w = kernel_normalizer(d).unwrap();
            let by_class: f64 = (1..d)
                .map(|s| binomial(d, s).unwrap() as f64 * w.omega(s))
                .sum();
            assert!((by_class - w.gamma()).abs() < 1e-12 * w.gamma(), "d={d}");
            let total: f64 = (1..d).map(|s| w.size_probability(s)).sum();
            assert!((total - 1.0).abs() < 1e-12, "d={d}");
            for s in 1..d {
                assert!(w.omega(s) > 0.0);
                assert!((w.omega(s) - w.omega(d - s)).abs() <= 1e-15 * w.omega(s));
            }
        }
    }

    #[test]
    fn inclusion_probabilities_by_enumeration() {
        for d in 2..=10 {
            let w = kernel_normalizer(d).unwrap();
            let (mut p1, mut p12) = (0.0, 0.0);
            for s in enumerate_subsets(d, false).unwrap() {
                let p = w.subset_probability(s.len());
                if s.contains(0) {
                    p1 += p;
                    if d > 1 && s.contains(1) {
                        p12 += p;
                    }
                }
            }
            assert!((w.inclusion_probability() - p1).abs() < 1e-13);
            assert!((w.pair_inclusion_probability() - p12).abs() < 1e-13);
        }
        let w2 = kernel_normalizer(2).unwrap();
        assert!((w2.inclusion_probability() - 0.5).abs() < 1e-15);
        assert_eq!(w2.pair_inclusion_probability(), 0.0);
    }

    #[test]
    fn sizes_are_in_range() {
        let w = kernel_normalizer(5).unwrap();
        let mut rng = RandomSource::new(3, 0);
        for _ in 0..1000 {
            let s = w.sample_size(&mut rng);
            assert!((1..5).contains(&s));
        }
    }
}
