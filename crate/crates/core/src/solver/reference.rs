//! ADMM reference decoder for small instances.
//!
//! Splits `min ‖z‖₁ + ι_C(x)` with `x = z`, where `C = {x : ‖Ax − y‖ ≤ η}`.
//! The projection onto `C` is computed exactly from the eigendecomposition
//! of `AᴴA`, with the Lagrange multiplier found by bisection.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::Complex64;

pub const REFERENCE_MAX_DIM: usize = 64;

struct FeasibleSet {
    q: CMatrix,
    lambda: Vec<f64>,
    /// `Qᴴ Aᴴ y`
    h: CVector,
    /// Active eigenpairs (nonzero eigenvalues).
    active: Vec<bool>,
    /// `η² − ‖y_⊥‖²`
    slack: f64,
}

impl FeasibleSet {
    fn project(&self, v: &CVector) -> CVector {
        let g = self.q.ad_mul(v);
        // Residual coordinates at multiplier `mu`: (√Λ g − h/√Λ)/(1 + μΛ).
        let residual_sq = |mu: f64| -> f64 {
            self.lambda
                .iter()
                .zip(g.iter().zip(self.h.iter()))
                .zip(&self.active)
                .filter(|(_, &on)| on)
                .map(|((&l, (gi, hi)), _)| {
                    let s = l.sqrt();
                    ((gi * s - hi / s) / (1.0 + mu * l)).norm_sqr()
                })
                .sum()
        };
        let coords = |mu: Option<f64>| -> CVector {
            CVector::from_iterator(
                g.len(),
                (0..g.len()).map(|i| {
                    if !self.active[i] {
                        return g[i];
                    }
                    match mu {
                        Some(mu) => (g[i] + self.h[i] * mu) / (1.0 + mu * self.lambda[i]),
                        None => self.h[i] / self.lambda[i],
                    }
                }),
            )
        };
        if residual_sq(0.0) <= self.slack {
            return v.clone();
        }
        let hat = if self.slack <= 0.0 {
            coords(None)
        } else {
            // Bisection on log μ; residual_sq is decreasing in μ.
            let (mut lo, mut hi) = (-60.0f64, 0.0f64);
            while residual_sq(hi.exp()) > self.slack && hi < 200.0 {
                lo = hi;
                hi += 10.0;
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if residual_sq(mid.exp()) > self.slack {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            coords(Some(hi.exp()))
        };
        &self.q * hat
    }
}

/// Solves the QCBP program by ADMM to tolerance `tol` (at most `1e-10` is
/// meaningful for test comparisons). Only for `m, N ≤ 64`.
pub fn reference_decode(a: &CMatrix, y: &CVector, eta: f64, tol: f64) -> Result<CVector> {
    let (m, n) = a.shape();
    if m > REFERENCE_MAX_DIM || n > REFERENCE_MAX_DIM {
        return Err(Error::TooLarge { m, n });
    }
    if y.len() != m {
        return Err(Error::Dimension(format!("y has length {} but A has {m} rows", y.len())));
    }
    if !(tol > 0.0) || !(eta >= 0.0) {
        return Err(Error::InvalidArgument(format!("need tol > 0 and eta >= 0, got {tol}, {eta}")));
    }
    if y.norm() <= eta {
        return Ok(CVector::zeros(n));
    }

    let eig = SymmetricEigen::new(a.ad_mul(a));
    let lambda: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let lmax = lambda.iter().copied().fold(0.0, f64::max);
    let active: Vec<bool> = lambda.iter().map(|&l| l > 1e-12 * lmax && l > 0.0).collect();
    let q = eig.eigenvectors;
    let h = q.ad_mul(&a.ad_mul(y));
    // Least-squares fit through the active eigenpairs gives ‖y_⊥‖ without cancellation.
    let ls_coords = CVector::from_iterator(n, (0..n).map(|i| if active[i] { h[i] / lambda[i] } else { Complex64::new(0.0, 0.0) }));
    let floor_sq = (a * (&q * ls_coords) - y).norm_squared();
    if floor_sq.sqrt() > eta + 1e-9 * y.norm().max(1.0) {
        return Ok(CVector::zeros(n));
    }
    let set = FeasibleSet {
        q,
        lambda,
        h,
        active,
        slack: eta * eta - floor_sq,
    };

    let mut rho = 1.0f64;
    let mut z = CVector::zeros(n);
    let mut u = CVector::zeros(n);
    let mut x = set.project(&z);
    for k in 0..2_000_000 {
        x = set.project(&(&z - &u));
        let z_old = std::mem::replace(&mut z, &x + &u);
        linalg::soft_threshold(&mut z, 1.0 / rho);
        u += &x - &z;
        let primal = (&x - &z).norm();
        let dual = rho * (&z - &z_old).norm();
        if primal <= tol * x.norm().max(1.0) && dual <= tol * (rho * u.norm()).max(1.0) {
            break;
        }
        if k % 20 == 19 {
            if primal > 10.0 * dual {
                rho *= 2.0;
                u /= Complex64::new(2.0, 0.0);
            } else if dual > 10.0 * primal {
                rho /= 2.0;
                u *= Complex64::new(2.0, 0.0);
            }
        }
    }
    Ok(x)
}
