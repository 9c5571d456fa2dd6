use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapError};
use crate::subset::{full_mask, FeatureSubset, MAX_ENUMERATION_PLAYERS, MAX_PLAYERS};

type ValueFn = dyn Fn(FeatureSubset) -> f64 + Send + Sync;

/// A cooperative game `v: P(N) → R` with cached `v(∅)` and `v(N)`.
///
/// Clones share the value function and, when enabled, the memo table.
#[derive(Clone)]
pub struct CoalitionGame {
    d: usize,
    value: Arc<ValueFn>,
    v_empty: f64,
    v_full: f64,
    cache: Option<Arc<RwLock<HashMap<u64, f64>>>>,
}

impl fmt::Debug for CoalitionGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoalitionGame")
            .field("d", &self.d)
            .field("v_empty", &self.v_empty)
            .field("v_full", &self.v_full)
            .field("memoized", &self.cache.is_some())
            .finish()
    }
}

impl CoalitionGame {
    /// Wraps a deterministic value function over `d` players.
    pub fn new<F>(d: usize, value: F) -> Result<Self>
    where
        F: Fn(FeatureSubset) -> f64 + Send + Sync + 'static,
    {
        if d == 0 || d > MAX_PLAYERS {
            return Err(ShapError::Capacity(format!(
                "games need 1..={MAX_PLAYERS} players (got {d})"
            )));
        }
        let v_empty = value(FeatureSubset::empty(d));
        let v_full = value(FeatureSubset::full(d));
        if !v_empty.is_finite() || !v_full.is_finite() {
            return Err(ShapError::Domain("game values at ∅ or N are not finite".into()));
        }
        Ok(Self { d, value: Arc::new(value), v_empty, v_full, cache: None })
    }

    /// Game backed by a dense table indexed by subset mask.
    pub fn from_table(d: usize, table: Vec<f64>) -> Result<Self> {
        if d > MAX_ENUMERATION_PLAYERS || table.len() != 1usize << d {
            return Err(ShapError::Argument(format!(
                "value table of length {} does not cover 2^{d} subsets",
                table.len()
            )));
        }
        Self::new(d, move |s| table[s.bits() as usize])
    }

    /// Routes evaluations through a shared memo keyed by subset bits.
    pub fn memoized(mut self) -> Self {
        if self.cache.is_none() {
            self.cache = Some(Arc::new(RwLock::new(HashMap::new())));
        }
        self
    }

    #[inline]
    pub fn players(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn v_empty(&self) -> f64 {
        self.v_empty
    }

    #[inline]
    pub fn v_full(&self) -> f64 {
        self.v_full
    }

    /// `v(N) - v(∅)`.
    #[inline]
    pub fn v_all(&self) -> f64 {
        self.v_full - self.v_empty
    }

    pub fn evaluate(&self, s: FeatureSubset) -> f64 {
        debug_assert_eq!(s.players(), self.d);
        if s.is_empty() {
            return self.v_empty;
        }
        if s.is_full() {
            return self.v_full;
        }
        match &self.cache {
            None => (self.value)(s),
            Some(cache) => {
                if let Some(&v) = cache.read().get(&s.bits()) {
                    return v;
                }
                let v = (self.value)(s);
                cache.write().insert(s.bits(), v);
                v
            }
        }
    }

    /// Every value `v(S)` indexed by mask, for `d <= 24`.
    pub fn value_table(&self) -> Result<Vec<f64>> {
        if self.d > MAX_ENUMERATION_PLAYERS {
            return Err(ShapError::Capacity(format!(
                "value table of 2^{} entries exceeds the enumeration limit",
                self.d
            )));
        }
        let d = self.d;
        Ok((0..=full_mask(d))
            .map(|b| self.evaluate(FeatureSubset::from_bits_unchecked(d, b)))
            .collect())
    }
}

/// Which estimator produced an [`Attribution`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactShapley,
    ExactRandomOrder,
    ExactLeastSquares,
    UnifiedExpectation,
    Semivalue,
    Permutation,
    Antithetical,
    KernelShap,
    KernelShapPaired,
    KernelShapUnbiased,
    SimShapTarget,
    Unified,
    LinearClosedForm,
    AmortizedSimShap,
    AmortizedFastShap,
    AmortizedFastShapNormalized,
    SinglePlayer,
}

impl Method {
    /// Methods whose outputs are contracted to satisfy `Σφ = v(N) - v(∅)`.
    pub fn is_efficient(self) -> bool {
        !matches!(
            self,
            Method::Semivalue | Method::AmortizedSimShap | Method::AmortizedFastShap | Method::Unified
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::ExactShapley => "exact-shapley",
            Method::ExactRandomOrder => "exact-random-order",
            Method::ExactLeastSquares => "exact-least-squares",
            Method::UnifiedExpectation => "unified-expectation",
            Method::Semivalue => "semivalue",
            Method::Permutation => "permutation",
            Method::Antithetical => "antithetical",
            Method::KernelShap => "kernel-shap",
            Method::KernelShapPaired => "kernel-shap-paired",
            Method::KernelShapUnbiased => "kernel-shap-unbiased",
            Method::SimShapTarget => "sim-shap-target",
            Method::Unified => "unified",
            Method::LinearClosedForm => "linear-closed-form",
            Method::AmortizedSimShap => "amortized-sim-shap",
            Method::AmortizedFastShap => "amortized-fast-shap",
            Method::AmortizedFastShapNormalized => "amortized-fast-shap-normalized",
            Method::SinglePlayer => "single-player",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An attribution vector `φ ∈ R^d` with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub phi: Vec<f64>,
    pub method: Method,
    pub samples_used: u64,
    pub seed: u64,
}

impl Attribution {
    pub fn new(phi: Vec<f64>, method: Method, samples_used: u64, seed: u64) -> Result<Self> {
        if let Some(i) = phi.iter().position(|v| !v.is_finite()) {
            return Err(ShapError::Domain(format!(
                "{method} produced a non-finite attribution at feature {i}"
            )));
        }
        Ok(Self { phi, method, samples_used, seed })
    }

    pub(crate) fn exact(phi: Vec<f64>, method: Method) -> Result<Self> {
        Self::new(phi, method, 0, 0)
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.phi.iter().sum()
    }

    /// `Σφ - (v(N) - v(∅))`.
    pub fn efficiency_gap(&self, game: &CoalitionGame) -> f64 {
        self.total() - game.v_all()
    }
}

/// The unique attribution of a one-player game.
pub(crate) fn single_player(game: &CoalitionGame, seed: u64) -> Result<Attribution> {
    debug_assert_eq!(game.players(), 1);
    Attribution::new(vec![game.v_all()], Method::SinglePlayer, 0, seed)
}
