use crate::kernel::KernelWeights;
use crate::rng::RandomSource;
use crate::subset::{binomial_f64, FeatureSubset};

use super::config::{class_count, UnifiedStochasticConfig};

/// One kernel draw, or a draw with its complement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelDraw {
    Single(FeatureSubset),
    Pair(FeatureSubset, FeatureSubset),
}

impl KernelDraw {
    pub fn first(&self) -> FeatureSubset {
        match *self {
            KernelDraw::Single(s) | KernelDraw::Pair(s, _) => s,
        }
    }

    pub fn subsets(&self) -> impl Iterator<Item = FeatureSubset> {
        let (a, b) = match *self {
            KernelDraw::Single(s) => (s, None),
            KernelDraw::Pair(s, c) => (s, Some(c)),
        };
        std::iter::once(a).chain(b)
    }
}

/// Draws `S ~ p^ls(S) = ω(S)/γ`: a size from the kernel size distribution,
/// then a uniform subset of that size. Paired draws add `N \ S`.
pub fn sample_kernel_subset(
    weights: &KernelWeights,
    rng: &mut RandomSource,
    paired: bool,
) -> KernelDraw {
    let d = weights.players();
    let size = weights.sample_size(rng);
    let s = rng.subset_of_size(d, size);
    if paired {
        KernelDraw::Pair(s, s.complement())
    } else {
        KernelDraw::Single(s)
    }
}

/// Categorical draw over size classes built from a unified configuration.
#[derive(Clone, Debug)]
pub(crate) struct ClassSampler {
    d: usize,
    /// `(size, inside, cumulative mass)`; `inside` is ignored in shared mode.
    classes: Vec<(usize, bool, f64)>,
}

impl ClassSampler {
    /// Shared sampler for index-independent configurations.
    pub(crate) fn shared(config: &UnifiedStochasticConfig) -> Self {
        let d = config.players();
        let masses = (0..=d).map(|s| (s, false, binomial_f64(d, s) * config.probability(s, false)));
        Self::from_masses(d, masses)
    }

    /// Sampler for the coordinate-specific distribution `p^i`.
    pub(crate) fn per_coordinate(config: &UnifiedStochasticConfig) -> Self {
        let d = config.players();
        let masses = (0..=d).flat_map(|s| {
            [true, false]
                .into_iter()
                .map(move |inside| (s, inside, class_count(d, s, inside) * config.probability(s, inside)))
        });
        Self::from_masses(d, masses)
    }

    fn from_masses(d: usize, masses: impl Iterator<Item = (usize, bool, f64)>) -> Self {
        let mut acc = 0.0;
        let mut classes: Vec<(usize, bool, f64)> = masses
            .filter(|&(_, _, m)| m > 0.0)
            .map(|(s, inside, m)| {
                acc += m;
                (s, inside, acc)
            })
            .collect();
        let total = acc;
        for c in &mut classes {
            c.2 /= total;
        }
        if let Some(last) = classes.last_mut() {
            last.2 = 1.0;
        }
        Self { d, classes }
    }

    fn class(&self, rng: &mut RandomSource) -> (usize, bool) {
        let u = rng.uniform();
        let idx = self.classes.partition_point(|c| c.2 <= u).min(self.classes.len() - 1);
        (self.classes[idx].0, self.classes[idx].1)
    }

    pub(crate) fn draw_shared(&self, rng: &mut RandomSource) -> FeatureSubset {
        let (s, _) = self.class(rng);
        rng.subset_of_size(self.d, s)
    }

    /// Draw from `p^i`; `pool` holds the other `d-1` players and is reused.
    pub(crate) fn draw_for(&self, i: usize, pool: &mut [usize], rng: &mut RandomSource) -> FeatureSubset {
        let (s, inside) = self.class(rng);
        let k = if inside { s - 1 } else { s };
        let sub = rng.subset_from_pool(self.d, pool, k);
        if inside {
            sub.with(i)
        } else {
            sub
        }
    }
}
