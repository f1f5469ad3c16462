use crate::linalg::CVector;

/// Euclidean projection of `v` onto `{w : ‖diag(σ)(w − c)‖₂ ≤ ρ}`.
///
/// Outside the ellipsoid the projection is `c + (v − c)/(1 + λσ²)` with the
/// multiplier `λ > 0` fixed by the boundary condition. Newton's method on
/// `λ ↦ 1/‖σ(w(λ) − c)‖ − 1/ρ`, which is concave and increasing, converges
/// monotonically from `λ = 0`.
pub fn project_onto_ellipsoid(v: &CVector, center: &CVector, sigma: &[f64], radius: f64) -> CVector {
    let d = v - center;
    let weighted_sq = |lambda: f64| -> (f64, f64) {
        let mut phi = 0.0;
        let mut dphi = 0.0;
        for (di, s) in d.iter().zip(sigma) {
            let s2 = s * s;
            let g2 = s2 * di.norm_sqr();
            let denom = 1.0 + lambda * s2;
            phi += g2 / (denom * denom);
            dphi -= 2.0 * s2 * g2 / (denom * denom * denom);
        }
        (phi, dphi)
    };
    let (phi0, _) = weighted_sq(0.0);
    if phi0 <= radius * radius {
        return v.clone();
    }
    if radius == 0.0 {
        return center.clone();
    }
    let mut lambda = 0.0f64;
    for _ in 0..200 {
        let (phi, dphi) = weighted_sq(lambda);
        let norm = phi.sqrt();
        let psi = 1.0 / norm - 1.0 / radius;
        if psi.abs() * radius <= 1e-15 {
            break;
        }
        let dpsi = -0.5 * dphi / (phi * norm);
        if !(dpsi > 0.0) {
            break;
        }
        let next = lambda - psi / dpsi;
        if !(next > lambda) {
            break;
        }
        lambda = next;
    }
    CVector::from_iterator(
        d.len(),
        d.iter()
            .zip(center.iter())
            .zip(sigma)
            .map(|((di, ci), s)| ci + di / (1.0 + lambda * s * s)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Complex64;

    fn cv(v: &[(f64, f64)]) -> CVector {
        CVector::from_iterator(v.len(), v.iter().map(|&(a, b)| Complex64::new(a, b)))
    }

    fn weighted_norm(w: &CVector, c: &CVector, s: &[f64]) -> f64 {
        w.iter().zip(c.iter()).zip(s).map(|((a, b), s)| ((a - b) * *s).norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn interior_points_are_fixed() {
        let c = cv(&[(0.0, 0.0), (1.0, 0.0)]);
        let v = cv(&[(0.1, 0.0), (1.0, 0.1)]);
        assert_eq!(project_onto_ellipsoid(&v, &c, &[1.0, 2.0], 1.0), v);
    }

    #[test]
    fn ball_case_matches_radial_scaling() {
        let c = cv(&[(1.0, 1.0), (0.0, 0.0), (0.0, -1.0)]);
        let v = cv(&[(4.0, 1.0), (0.0, 4.0), (0.0, -1.0)]);
        let w = project_onto_ellipsoid(&v, &c, &[1.0; 3], 2.0);
        let expect = &c + (&v - &c) * Complex64::new(2.0 / 5.0, 0.0);
        assert!((w - expect).norm() < 1e-13);
    }

    #[test]
    fn boundary_and_optimality() {
        // Ill-conditioned weights; check the boundary condition and that no
        // nearby boundary point is closer to v.
        let s = [1e4, 1.0, 1e-3];
        let c = cv(&[(0.2, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        let v = cv(&[(1.0, 0.5), (3.0, 0.0), (-2.0, 1.0)]);
        let rho = 0.7;
        let w = project_onto_ellipsoid(&v, &c, &s, rho);
        assert!((weighted_norm(&w, &c, &s) - rho).abs() < 1e-9 * rho);
        let dist = (&w - &v).norm();
        for k in 0..200 {
            let t = k as f64 * 0.031;
            let mut probe = w.clone();
            probe[0] += Complex64::new(1e-6 * t.cos(), 0.0);
            probe[1] += Complex64::new(0.0, 1e-3 * t.sin());
            let scale = rho / weighted_norm(&probe, &c, &s);
            let probe = &c + (probe - &c) * Complex64::new(scale, 0.0);
            assert!((probe - &v).norm() >= dist - 1e-12);
        }
    }

    #[test]
    fn zero_radius_collapses_to_center() {
        let c = cv(&[(1.0, 2.0)]);
        assert_eq!(project_onto_ellipsoid(&cv(&[(0.0, 0.0)]), &c, &[3.0], 0.0), c);
    }
}
