//! The quadruple `(p^i(S), a^i_S, T, b)` of the unified stochastic estimator.
//!
//! A configuration is built for a fixed player count. Probabilities and
//! coefficients are functions of `(|S|, i ∈ S)`, which covers every named
//! estimator and lets sampling proceed by size class.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapError};
use crate::game::CoalitionGame;
use crate::kernel::kernel_normalizer;
use crate::subset::binomial_f64;

type ClassFn = Arc<dyn Fn(usize, bool) -> f64 + Send + Sync>;

/// Tolerance for the per-coordinate probability mass check.
pub const MASS_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetDomain {
    AllSubsets,
    ProperNonempty,
}

impl SubsetDomain {
    pub fn includes_trivial(self) -> bool {
        matches!(self, SubsetDomain::AllSubsets)
    }

    fn admits(self, d: usize, s: usize) -> bool {
        match self {
            SubsetDomain::AllSubsets => s <= d,
            SubsetDomain::ProperNonempty => s >= 1 && s < d,
        }
    }
}

/// Linear map `T` applied to the sampled sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// `c·(dI - J)`.
    ScaledCentering(f64),
    /// Row-major `d×d` matrix.
    Custom(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bias {
    Zero,
    /// `((v(N) - v(∅))/d)·1`.
    Efficiency,
}

/// Named rows of the unified estimator table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableRow {
    /// Semivalue, with its mass-2 probability halved and coefficient doubled.
    Semivalue,
    LeastSquares,
    SimShap,
}

impl TableRow {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "sv" | "semivalue" => Ok(TableRow::Semivalue),
            "lsv" | "least-squares" => Ok(TableRow::LeastSquares),
            "simshap" | "sim-shap" => Ok(TableRow::SimShap),
            other => Err(ShapError::Argument(format!(
                "unknown table row '{other}' (expected sv, lsv or simshap)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TableRow::Semivalue => "sv",
            TableRow::LeastSquares => "lsv",
            TableRow::SimShap => "simshap",
        }
    }
}

#[derive(Clone)]
pub struct UnifiedStochasticConfig {
    d: usize,
    domain: SubsetDomain,
    prob: ClassFn,
    coeff: ClassFn,
    transform: Transform,
    bias: Bias,
    paired: bool,
    row: Option<TableRow>,
    index_independent: bool,
}

impl fmt::Debug for UnifiedStochasticConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UnifiedStochasticConfig")
            .field("d", &self.d)
            .field("domain", &self.domain)
            .field("transform", &self.transform)
            .field("bias", &self.bias)
            .field("paired", &self.paired)
            .field("row", &self.row)
            .finish()
    }
}

impl UnifiedStochasticConfig {
    /// A custom configuration; validated on construction.
    pub fn new<P, A>(
        d: usize,
        domain: SubsetDomain,
        prob: P,
        coeff: A,
        transform: Transform,
        bias: Bias,
    ) -> Result<Self>
    where
        P: Fn(usize, bool) -> f64 + Send + Sync + 'static,
        A: Fn(usize, bool) -> f64 + Send + Sync + 'static,
    {
        let mut cfg = Self {
            d,
            domain,
            prob: Arc::new(prob),
            coeff: Arc::new(coeff),
            transform,
            bias,
            paired: false,
            row: None,
            index_independent: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// One of the named table rows for `d` players.
    pub fn table_row(row: TableRow, d: usize) -> Result<Self> {
        let df = d as f64;
        let mut cfg = match row {
            TableRow::Semivalue => {
                if d == 0 {
                    return Err(ShapError::Domain("semivalue row needs d >= 1".into()));
                }
                // As tabulated, p^i has mass 1 on subsets containing i and 1 on
                // the rest. Halving p and doubling a keeps every product p·a.
                Self::new(
                    d,
                    SubsetDomain::AllSubsets,
                    move |s, inside| {
                        let c = binomial_f64(d, s);
                        match inside {
                            true if s >= 1 => 0.5 / (c * s as f64),
                            false if s < d => 0.5 / (c * (d - s) as f64),
                            _ => 0.0,
                        }
                    },
                    |_, inside| if inside { 2.0 } else { -2.0 },
                    Transform::Identity,
                    Bias::Zero,
                )?
            }
            TableRow::LeastSquares | TableRow::SimShap => {
                let scale = kernel_normalizer(d)?.coef_scale();
                let prob = move |s: usize, _inside: bool| {
                    if s == 0 || s >= d {
                        0.0
                    } else {
                        1.0 / (scale * binomial_f64(d, s) * s as f64 * (df - s as f64))
                    }
                };
                if row == TableRow::LeastSquares {
                    Self::new(
                        d,
                        SubsetDomain::ProperNonempty,
                        prob,
                        |_, inside| if inside { 1.0 } else { 0.0 },
                        Transform::ScaledCentering(scale),
                        Bias::Efficiency,
                    )?
                } else {
                    Self::new(
                        d,
                        SubsetDomain::ProperNonempty,
                        prob,
                        move |s, inside| {
                            if inside {
                                scale * (df - s as f64)
                            } else {
                                -scale * s as f64
                            }
                        },
                        Transform::Identity,
                        Bias::Efficiency,
                    )?
                }
            }
        };
        cfg.row = Some(row);
        Ok(cfg)
    }

    /// Evaluate each sampled subset together with its complement.
    pub fn with_pairing(mut self, paired: bool) -> Result<Self> {
        if paired {
            for s in 0..=self.d {
                for inside in [true, false] {
                    let here = self.probability(s, inside);
                    let there = self.probability(self.d - s, !inside);
                    if (here - there).abs() > 1e-12 * here.abs().max(there.abs()) {
                        return Err(ShapError::Config(
                            "paired sampling needs p(S) = p(N\\S) for every subset".into(),
                        ));
                    }
                }
            }
        }
        self.paired = paired;
        Ok(self)
    }

    fn validate(&mut self) -> Result<()> {
        let d = self.d;
        if d == 0 || d > crate::subset::MAX_PLAYERS {
            return Err(ShapError::Config(format!("config player count {d} out of range")));
        }
        if let Transform::Custom(m) = &self.transform {
            if m.len() != d * d || m.iter().any(|v| !v.is_finite()) {
                return Err(ShapError::Config(format!(
                    "custom transform must be a finite {d}x{d} matrix"
                )));
            }
        }
        if let Transform::ScaledCentering(c) = self.transform {
            if !c.is_finite() {
                return Err(ShapError::Config("non-finite transform scale".into()));
            }
        }
        let mut mass = 0.0;
        let mut independent = true;
        for s in 0..=d {
            for inside in [true, false] {
                let count = class_count(d, s, inside);
                let p = self.probability(s, inside);
                if count == 0.0 {
                    continue;
                }
                if !self.domain.admits(d, s) {
                    if p != 0.0 {
                        return Err(ShapError::Config(format!(
                            "probability mass on size {s} outside the subset domain"
                        )));
                    }
                    continue;
                }
                if !p.is_finite() || p < 0.0 {
                    return Err(ShapError::Config(format!("invalid probability {p} at size {s}")));
                }
                if !self.coefficient(s, inside).is_finite() {
                    return Err(ShapError::Config(format!("non-finite coefficient at size {s}")));
                }
                mass += count * p;
            }
            let other = self.probability(s, false);
            let this = self.probability(s, true);
            let both_possible = s >= 1 && s < d;
            if both_possible && (this - other).abs() > 1e-15 * this.abs().max(other.abs()) {
                independent = false;
            }
        }
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(ShapError::Config(format!(
                "per-coordinate probability mass is {mass}, expected 1"
            )));
        }
        self.index_independent = independent;
        Ok(())
    }

    pub fn players(&self) -> usize {
        self.d
    }

    pub fn domain(&self) -> SubsetDomain {
        self.domain
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn bias(&self) -> Bias {
        self.bias
    }

    pub fn paired(&self) -> bool {
        self.paired
    }

    pub fn row(&self) -> Option<TableRow> {
        self.row
    }

    /// `true` when one shared draw serves every coordinate.
    pub fn is_index_independent(&self) -> bool {
        self.index_independent
    }

    /// `p^i(S)` for a subset of size `s` with `inside = (i ∈ S)`.
    #[inline]
    pub fn probability(&self, s: usize, inside: bool) -> f64 {
        (self.prob)(s, inside)
    }

    /// `a^i_S` for a subset of size `s` with `inside = (i ∈ S)`.
    #[inline]
    pub fn coefficient(&self, s: usize, inside: bool) -> f64 {
        (self.coeff)(s, inside)
    }

    pub(crate) fn check_game(&self, game: &CoalitionGame) -> Result<()> {
        if game.players() != self.d {
            return Err(ShapError::Config(format!(
                "config built for d={} applied to a game with d={}",
                self.d,
                game.players()
            )));
        }
        Ok(())
    }

    /// `T·tilde + b`.
    pub(crate) fn finish(&self, tilde: &[f64], v_all: f64) -> Vec<f64> {
        let d = self.d;
        let df = d as f64;
        let mut out = match &self.transform {
            Transform::Identity => tilde.to_vec(),
            Transform::ScaledCentering(c) => {
                let total: f64 = tilde.iter().sum();
                tilde.iter().map(|t| c * (df * t - total)).collect()
            }
            Transform::Custom(m) => (0..d)
                .map(|r| (0..d).map(|k| m[r * d + k] * tilde[k]).sum())
                .collect(),
        };
        if self.bias == Bias::Efficiency {
            for o in &mut out {
                *o += v_all / df;
            }
        }
        out
    }
}

/// Number of subsets of size `s` that do (or do not) contain a fixed player.
pub(crate) fn class_count(d: usize, s: usize, inside: bool) -> f64 {
    match inside {
        true if s >= 1 => binomial_f64(d - 1, s - 1),
        false if s < d => binomial_f64(d - 1, s),
        _ => 0.0,
    }
}
