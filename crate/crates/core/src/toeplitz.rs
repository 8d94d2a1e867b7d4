//! Hermitian Toeplitz systems: Levinson-Durbin recursion and a dense
//! Cholesky solve for general (non-Toeplitz) covariance patterns.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Order-by-order Levinson-Durbin recursion for the forward predictor
/// `x[n] ≈ Σ_{j=1..m} a_j x[n-j]` of a stationary sequence with
/// autocorrelation `R(τ) = E[x[n+τ] conj(x[n])]`.
#[derive(Debug, Clone)]
pub struct LevinsonRecursion {
    coeffs: Vec<Complex64>,
    error_variance: f64,
}

impl LevinsonRecursion {
    pub fn new(r0: f64) -> Self {
        Self {
            coeffs: Vec::new(),
            error_variance: r0,
        }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// `a_1..a_m` of the current order.
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn error_variance(&self) -> f64 {
        self.error_variance
    }

    /// Raises the order by one. `r` must hold `R(0..=m)` where `m` is the
    /// new order. Returns the reflection coefficient.
    pub fn extend(&mut self, r: &[Complex64]) -> Result<Complex64> {
        let m = self.coeffs.len() + 1;
        debug_assert!(r.len() > m);
        if self.error_variance <= 0.0 {
            return Err(Error::NumericalRank(format!(
                "prediction error vanished before order {m}"
            )));
        }
        let mut acc = r[m];
        for (j, a) in self.coeffs.iter().enumerate() {
            acc -= a * r[m - 1 - j];
        }
        let k = acc / self.error_variance;

        // a_j <- a_j - k conj(a_{m-j}) for j = 1..m-1, done pairwise in place.
        let (mut lo, mut hi) = (0usize, m.saturating_sub(2));
        while lo < hi {
            let (al, ah) = (self.coeffs[lo], self.coeffs[hi]);
            self.coeffs[lo] = al - k * ah.conj();
            self.coeffs[hi] = ah - k * al.conj();
            lo += 1;
            hi -= 1;
        }
        if lo == hi && m >= 2 {
            let a = self.coeffs[lo];
            self.coeffs[lo] = a - k * a.conj();
        }
        self.coeffs.push(k);

        let shrink = 1.0 - k.norm_sqr();
        if shrink < -1e-12 {
            return Err(Error::NotPositiveSemidefinite(format!(
                "reflection coefficient |k_{m}| = {:.6} exceeds one",
                k.norm()
            )));
        }
        self.error_variance *= shrink.max(0.0);
        Ok(k)
    }
}

/// Solution of the order-`p` prediction normal equations.
#[derive(Debug, Clone)]
pub struct LevinsonSolution {
    pub coefficients: Vec<Complex64>,
    pub error_variance: f64,
}

/// Solves `Σ_j R(i-j) a_j = R(i)`, `i = 1..p`, for `p = r.len() - 1`.
pub fn levinson_durbin(r: &[Complex64]) -> Result<LevinsonSolution> {
    if r.is_empty() {
        return Err(Error::invalid("autocorrelation", "needs at least R(0)"));
    }
    let mut rec = LevinsonRecursion::new(r[0].re);
    for _ in 1..r.len() {
        rec.extend(r)?;
    }
    Ok(LevinsonSolution {
        coefficients: rec.coeffs,
        error_variance: rec.error_variance,
    })
}

/// Hermitian Toeplitz matrix with first column `r` (`T[i][j] = r(i-j)`,
/// `r(-τ) = conj(r(τ))`).
pub fn hermitian_toeplitz(r: &[Complex64]) -> DMatrix<Complex64> {
    let n = r.len();
    DMatrix::from_fn(n, n, |i, j| if i >= j { r[i - j] } else { r[j - i].conj() })
}

/// Cholesky factor of a Hermitian matrix, or `None` if it is not positive
/// definite. nalgebra takes complex square roots of negative pivots instead
/// of failing, so the diagonal of the factor is checked here.
fn hermitian_cholesky(a: DMatrix<Complex64>) -> Option<Cholesky<Complex64, Dyn>> {
    let chol = a.cholesky()?;
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.im.abs() <= 1e-12 * d.re
    });
    ok.then_some(chol)
}

/// Solves `A x = b` for Hermitian positive definite `A` by Cholesky.
pub fn hermitian_solve(a: DMatrix<Complex64>, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    let chol = hermitian_cholesky(a).ok_or_else(|| {
        Error::NumericalRank(format!("{n}x{n} covariance is not positive definite"))
    })?;
    let x = chol.solve(&DVector::from_column_slice(b));
    Ok(x.iter().copied().collect())
}

/// Whether the Hermitian Toeplitz matrix built from `r` admits a Cholesky
/// factorization after adding `loading` to the diagonal.
pub fn is_positive_semidefinite(r: &[Complex64], loading: f64) -> bool {
    let mut t = hermitian_toeplitz(r);
    for i in 0..t.nrows() {
        t[(i, i)] += loading;
    }
    hermitian_cholesky(t).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn order_one_ar1() {
        let sol = levinson_durbin(&[c(1.0, 0.0), c(0.9, 0.0)]).unwrap();
        assert!((sol.coefficients[0] - c(0.9, 0.0)).norm() < 1e-15);
        assert!((sol.error_variance - 0.19).abs() < 1e-15);
    }

    #[test]
    fn ar1_higher_orders_are_sparse() {
        let r: Vec<_> = (0..6).map(|k| c(0.8f64.powi(k), 0.0)).collect();
        let sol = levinson_durbin(&r).unwrap();
        assert!((sol.coefficients[0].re - 0.8).abs() < 1e-14);
        for a in &sol.coefficients[1..] {
            assert!(a.norm() < 1e-14);
        }
    }

    #[test]
    fn complex_case_matches_dense() {
        // Rotating AR(1): R(τ) = 0.7^τ e^{i 0.4 τ}, plus white loading on R(0).
        let r: Vec<_> = (0..5)
            .map(|k| {
                Complex64::from_polar(0.7f64.powi(k), 0.4 * k as f64)
                    + if k == 0 { c(0.3, 0.0) } else { c(0.0, 0.0) }
            })
            .collect();
        let lev = levinson_durbin(&r).unwrap();
        let dense = hermitian_solve(hermitian_toeplitz(&r[..4]), &r[1..]).unwrap();
        for (a, b) in lev.coefficients.iter().zip(&dense) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_non_psd() {
        let r = [c(1.0, 0.0), c(1.2, 0.0)];
        assert!(matches!(
            levinson_durbin(&r),
            Err(Error::NotPositiveSemidefinite(_))
        ));
        assert!(!is_positive_semidefinite(&r, 1e-10));
        assert!(is_positive_semidefinite(&[c(1.0, 0.0), c(1.0, 0.0)], 1e-10));
    }
}
