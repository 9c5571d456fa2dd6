//! Small numeric helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, ShapError};

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Ridge added to a rank-deficient Gram matrix before retrying the solve.
pub const RIDGE: f64 = 1e-9;

/// Minimizes `ηᵀAη - 2ηᵀb` subject to `1ᵀη = total` for symmetric PSD `A`.
///
/// Closed-form KKT solution
/// `η = A⁻¹(b - 1·(1ᵀA⁻¹b - total)/(1ᵀA⁻¹1))`.
/// A failed Cholesky factorization is retried once with `A + RIDGE·I`.
pub fn solve_efficiency_constrained(a: &DMatrix<f64>, b: &[f64], total: f64) -> Result<Vec<f64>> {
    let d = b.len();
    if a.nrows() != d || a.ncols() != d {
        return Err(ShapError::Argument(format!(
            "Gram matrix is {}x{}, expected {d}x{d}",
            a.nrows(),
            a.ncols()
        )));
    }
    let chol = match a.clone().cholesky() {
        Some(c) if well_conditioned(&c) => c,
        _ => {
            log::warn!("rank-deficient Gram matrix; adding ridge {RIDGE:e}·I");
            let ridged = a + DMatrix::<f64>::identity(d, d) * RIDGE;
            ridged.cholesky().ok_or_else(|| {
                ShapError::Solver(
                    "singular least-squares system even with ridge; increase the sample count".into(),
                )
            })?
        }
    };
    let b = DVector::from_column_slice(b);
    let ones = DVector::from_element(d, 1.0);
    let x = chol.solve(&b);
    let y = chol.solve(&ones);
    let denom = y.sum();
    if !denom.is_finite() || denom.abs() < f64::MIN_POSITIVE {
        return Err(ShapError::Solver("degenerate constraint direction in KKT solve".into()));
    }
    let lambda = (x.sum() - total) / denom;
    let eta: Vec<f64> = (0..d).map(|i| x[i] - lambda * y[i]).collect();
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(ShapError::Solver("non-finite solution; increase the sample count".into()));
    }
    Ok(eta)
}

/// Rejects factorizations whose pivots span more than ~13 decades.
fn well_conditioned(c: &nalgebra::Cholesky<f64, nalgebra::Dyn>) -> bool {
    let l = c.l_dirty();
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)]).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    min > 0.0 && (min * min) > 1e-13 * (max * max)
}

/// Symmetric rank-one update `A += w·zzᵀ` restricted to the support of `z`.
pub(crate) fn add_outer_indicator(a: &mut DMatrix<f64>, members: &[usize], w: f64) {
    for &i in members {
        for &j in members {
            a[(i, j)] += w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_cancellation() {
        let mut k = KahanSum::new();
        let xs = [1e16, 1.0, -1e16, 1.0];
        for x in xs {
            k.add(x);
        }
        assert_eq!(k.value(), 2.0);
    }

    #[test]
    fn constrained_solve_hits_total() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.5, 0.2, 0.1, 0.2, 1.0]);
        let eta = solve_efficiency_constrained(&a, &[1.0, -2.0, 0.5], 4.0).unwrap();
        assert!((eta.iter().sum::<f64>() - 4.0).abs() < 1e-12);
        // Stationarity: Aη - b must be parallel to 1.
        let r: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| a[(i, j)] * eta[j]).sum::<f64>() - [1.0, -2.0, 0.5][i])
            .collect();
        assert!((r[0] - r[1]).abs() < 1e-12 && (r[1] - r[2]).abs() < 1e-12);
    }

    #[test]
    fn singular_system_falls_back_to_ridge() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let eta = solve_efficiency_constrained(&a, &[1.0, 1.0], 1.0).unwrap();
        assert!((eta[0] + eta[1] - 1.0).abs() < 1e-6);
    }
}
