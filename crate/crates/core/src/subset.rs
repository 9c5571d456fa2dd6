//! Coalitions as fixed-width bit-sets over at most 64 players.
//!
//! Players are indexed `0..d`. Bit `i` of the mask is set when player `i`
//! belongs to the coalition.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapError};

/// Largest player count representable by [`FeatureSubset`].
pub const MAX_PLAYERS: usize = 64;

/// Largest `d` for which [`enumerate_subsets`] will run.
pub const MAX_ENUMERATION_PLAYERS: usize = 24;

/// A coalition `S ⊂ N` with `N = {0, .., d-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureSubset {
    bits: u64,
    d: u8,
}

#[inline]
pub(crate) fn full_mask(d: usize) -> u64 {
    if d >= 64 {
        u64::MAX
    } else {
        (1u64 << d) - 1
    }
}

impl FeatureSubset {
    /// Builds a subset from a raw mask. Bits at or above `d` are rejected.
    pub fn from_bits(d: usize, bits: u64) -> Result<Self> {
        if d == 0 || d > MAX_PLAYERS {
            return Err(ShapError::Capacity(format!(
                "player count {d} outside 1..={MAX_PLAYERS}"
            )));
        }
        if bits & !full_mask(d) != 0 {
            return Err(ShapError::Argument(format!(
                "mask {bits:#x} has bits outside {d} players"
            )));
        }
        Ok(Self { bits, d: d as u8 })
    }

    /// Caller guarantees `1 <= d <= 64` and `bits` within the mask.
    #[inline]
    pub(crate) fn from_bits_unchecked(d: usize, bits: u64) -> Self {
        debug_assert!((1..=MAX_PLAYERS).contains(&d) && bits & !full_mask(d) == 0);
        Self { bits, d: d as u8 }
    }

    pub fn empty(d: usize) -> Self {
        Self::from_bits_unchecked(d, 0)
    }

    pub fn full(d: usize) -> Self {
        Self::from_bits_unchecked(d, full_mask(d))
    }

    pub fn from_indices(d: usize, indices: &[usize]) -> Result<Self> {
        let mut s = Self::from_bits(d, 0)?;
        for &i in indices {
            if i >= d {
                return Err(ShapError::Argument(format!("index {i} out of range for d={d}")));
            }
            s.bits |= 1 << i;
        }
        Ok(s)
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn players(&self) -> usize {
        self.d as usize
    }

    /// `|S|`.
    #[inline]
    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    #[inline]
    pub fn is_full(&self) -> bool {
        self.bits == full_mask(self.players())
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.players() && self.bits >> i & 1 == 1
    }

    #[inline]
    pub fn with(&self, i: usize) -> Self {
        debug_assert!(i < self.players());
        Self { bits: self.bits | 1 << i, d: self.d }
    }

    #[inline]
    pub fn without(&self, i: usize) -> Self {
        debug_assert!(i < self.players());
        Self { bits: self.bits & !(1 << i), d: self.d }
    }

    /// `N \ S`.
    #[inline]
    pub fn complement(&self) -> Self {
        Self { bits: !self.bits & full_mask(self.players()), d: self.d }
    }

    /// Indicator vector `1^S` as reals.
    pub fn indicator(&self) -> Vec<f64> {
        (0..self.players())
            .map(|i| if self.contains(i) { 1.0 } else { 0.0 })
            .collect()
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        let mut rest = self.bits;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }
}

/// Every subset of `d` players in ascending mask order.
///
/// With `include_trivial = false` the empty set and `N` are skipped.
pub fn enumerate_subsets(
    d: usize,
    include_trivial: bool,
) -> Result<impl Iterator<Item = FeatureSubset>> {
    if d == 0 {
        return Err(ShapError::Domain("enumeration needs at least one player".into()));
    }
    if d > MAX_ENUMERATION_PLAYERS {
        return Err(ShapError::Capacity(format!(
            "refusing to enumerate 2^{d} subsets (limit d <= {MAX_ENUMERATION_PLAYERS})"
        )));
    }
    let full = full_mask(d);
    let (start, end) = if include_trivial { (0, full) } else { (1, full - 1) };
    // `end` is inclusive; for d = 1 without trivial subsets the range is empty.
    Ok((start..end + 1).map(move |b| FeatureSubset::from_bits_unchecked(d, b)))
}

/// Exact binomial coefficient `C(d, s)` for `d <= 64`.
pub fn binomial(d: usize, s: usize) -> Result<u64> {
    if d > MAX_PLAYERS {
        return Err(ShapError::Capacity(format!("binomial({d}, {s}) exceeds d <= 64")));
    }
    if s > d {
        return Err(ShapError::Domain(format!("binomial({d}, {s}) needs s <= d")));
    }
    let k = s.min(d - s) as u128;
    let n = d as u128;
    let mut c: u128 = 1;
    for j in 0..k {
        // c * (n - j) / (j + 1) is always integral at this point
        c = c * (n - j) / (j + 1);
    }
    u64::try_from(c).map_err(|_| ShapError::Capacity(format!("binomial({d}, {s}) overflows u64")))
}

/// `C(d, s)` as a float, for callers that already validated the range.
#[inline]
pub(crate) fn binomial_f64(d: usize, s: usize) -> f64 {
    binomial(d, s).map(|c| c as f64).unwrap_or(0.0)
}
