//! Sparse Chebyshev approximation of a scalar function from noisy samples.
//!
//! The basis is the orthonormal Chebyshev system `φ₀ = 1`, `φ_j = √2 T_j`
//! on `[−1, 1]` with the arcsine measure `ν`.

use serde::{Deserialize, Serialize};

use crate::ensembles::{build_matrix, noise_vector, EnsembleSpec, SensingMatrix};
use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::rng::{derive_stream_id, RandomStream};
use crate::solver::{DecodeOptions, DecodeStatus, Decoder};
use num_complex::Complex64;
use std::f64::consts::{PI, SQRT_2};

const PROBLEM_STREAM_TAG: u64 = 0x901a;

/// Panels of the composite Simpson rule used by [`L2Mode::Unweighted`].
pub const UNWEIGHTED_PANELS: usize = 2048;

/// `cos(πt)·e^{−t}`.
pub fn target_function(t: f64) -> f64 {
    (PI * t).cos() * (-t).exp()
}

/// `(φ₀(t), …, φ_{N−1}(t))` by the three-term recurrence.
pub fn chebyshev_basis(t: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let (mut prev, mut cur) = (1.0, t);
    for j in 0..n {
        out.push(if j == 0 { 1.0 } else { SQRT_2 * cur });
        if j > 0 {
            (prev, cur) = (cur, 2.0 * t * cur - prev);
        }
    }
    out
}

/// `c_j = ∫ f φ_j dν`, `j < N`, by Gauss–Chebyshev quadrature on `nodes ≥ 2N`
/// points.
pub fn reference_coefficients(f: impl Fn(f64) -> f64, n: usize, nodes: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    if nodes < 2 * n {
        return Err(Error::InvalidArgument(format!("need at least 2N = {} nodes, got {nodes}", 2 * n)));
    }
    let mut c = vec![0.0; n];
    for k in 1..=nodes {
        let t = ((2 * k - 1) as f64 * PI / (2 * nodes) as f64).cos();
        let v = f(t);
        for (cj, phi) in c.iter_mut().zip(chebyshev_basis(t, n)) {
            *cj += v * phi;
        }
    }
    for cj in &mut c {
        *cj /= nodes as f64;
    }
    Ok(c)
}

/// `Σ_j x_j φ_j(t)` by Clenshaw's recurrence.
pub fn evaluate_expansion(coefficients: &CVector, t: f64) -> Complex64 {
    let zero = Complex64::new(0.0, 0.0);
    let n = coefficients.len();
    if n == 0 {
        return zero;
    }
    let (mut b1, mut b2) = (zero, zero);
    for j in (1..n).rev() {
        let b0 = coefficients[j] * SQRT_2 + b1 * (2.0 * t) - b2;
        (b1, b2) = (b0, b1);
    }
    coefficients[0] + b1 * t - b2
}

/// Samples of `f` at Chebyshev-distributed points, with noise of exact norm.
#[derive(Clone, Debug)]
pub struct SampledProblem {
    pub matrix: SensingMatrix,
    /// `y = m^{-1/2} (f(t_i))_i + e`.
    pub measurements: CVector,
    pub noise: CVector,
}

impl SampledProblem {
    /// Draws `m` points and the noise from `seed`; the draw depends on
    /// `(seed, N, m)` only, so every threshold sees the same problem.
    pub fn draw(f: impl Fn(f64) -> f64, n: usize, m: usize, noise_magnitude: f64, seed: u64) -> Result<Self> {
        let mut stream = RandomStream::new(seed, derive_stream_id(&[PROBLEM_STREAM_TAG, n as u64, m as u64]));
        Self::draw_from(f, n, m, noise_magnitude, &mut stream)
    }

    /// As [`SampledProblem::draw`], consuming `stream`. The noise direction
    /// is drawn even when `noise_magnitude` is zero, so problems drawn from
    /// equal streams share their points at every noise level.
    pub fn draw_from(
        f: impl Fn(f64) -> f64,
        n: usize,
        m: usize,
        noise_magnitude: f64,
        stream: &mut RandomStream,
    ) -> Result<Self> {
        let matrix = build_matrix(&EnsembleSpec::chebyshev(), m, n, stream)?;
        let noise = noise_vector(m, noise_magnitude, stream)?;
        let scale = 1.0 / (m as f64).sqrt();
        let points = matrix.sample_points().expect("chebyshev draws record their points");
        let clean = CVector::from_iterator(m, points.iter().map(|&t| Complex64::new(f(t) * scale, 0.0)));
        Ok(Self { measurements: clean + &noise, noise, matrix })
    }

    pub fn sample_points(&self) -> &[f64] {
        self.matrix.sample_points().expect("chebyshev draws record their points")
    }

    /// Decodes at every threshold in `etas`, factorising the matrix once.
    pub fn solve(&self, etas: &[f64], opts: &DecodeOptions) -> Result<Vec<ExpansionApproximation>> {
        let decoder = Decoder::new(self.matrix.entries())?;
        etas.iter()
            .map(|&eta| {
                let res = decoder.decode(&self.measurements, eta, opts)?;
                Ok(ExpansionApproximation {
                    coefficients: res.solution,
                    eta,
                    sample_points: self.sample_points().to_vec(),
                    noise_magnitude: self.noise.norm(),
                    status: res.status,
                    iterations: res.iterations,
                })
            })
            .collect()
    }
}

/// A decoded Chebyshev expansion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionApproximation {
    #[serde(with = "complex_pairs")]
    pub coefficients: CVector,
    pub eta: f64,
    pub sample_points: Vec<f64>,
    pub noise_magnitude: f64,
    pub status: DecodeStatus,
    pub iterations: usize,
}

impl ExpansionApproximation {
    pub fn evaluate(&self, t: f64) -> Complex64 {
        evaluate_expansion(&self.coefficients, t)
    }
}

mod complex_pairs {
    use super::{CVector, Complex64};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &CVector, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|z| (z.re, z.im)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVector, D::Error> {
        let pairs: Vec<(f64, f64)> = Vec::deserialize(d)?;
        Ok(CVector::from_iterator(pairs.len(), pairs.into_iter().map(|(re, im)| Complex64::new(re, im))))
    }
}

/// Samples `f` at `m` Chebyshev points, adds noise of norm `noise_magnitude`
/// and decodes at threshold `eta`. Requires `m ≤ N`.
pub fn approximate(
    f: impl Fn(f64) -> f64,
    n: usize,
    m: usize,
    eta: f64,
    noise_magnitude: f64,
    seed: u64,
    opts: &DecodeOptions,
) -> Result<ExpansionApproximation> {
    let problem = SampledProblem::draw(f, n, m, noise_magnitude, seed)?;
    Ok(problem.solve(&[eta], opts)?.remove(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L2Mode {
    /// `L²_ν` norm via Parseval against a `4N`-term reference expansion.
    Weighted,
    /// Plain `L²(−1, 1)` norm by composite Simpson quadrature.
    Unweighted,
}

/// The `4N`-term reference expansion of `f` on `8N` nodes used for weighted
/// errors of `N`-term approximations.
pub fn reference_expansion(f: impl Fn(f64) -> f64, n: usize) -> Result<Vec<f64>> {
    reference_coefficients(f, 4 * n, 8 * n)
}

/// Weighted error by Parseval: `√(Σ_{j<N} |c_j − x_j|² + Σ_{j≥N} c_j²)`,
/// treating `reference` as the full expansion of `f`.
pub fn weighted_l2_error(coefficients: &CVector, reference: &[f64]) -> f64 {
    let n = coefficients.len().min(reference.len());
    let head: f64 = coefficients.iter().zip(reference).map(|(x, &c)| (x - c).norm_sqr()).sum();
    let extra: f64 = coefficients.iter().skip(n).map(|x| x.norm_sqr()).sum();
    let tail: f64 = reference[n..].iter().map(|v| v * v).sum();
    (head + extra + tail).sqrt()
}

/// `‖f − Σ x_j φ_j‖_{L²}` in the chosen measure.
pub fn l2_error(coefficients: &CVector, f: impl Fn(f64) -> f64, mode: L2Mode) -> Result<f64> {
    let n = coefficients.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty expansion".into()));
    }
    match mode {
        L2Mode::Weighted => Ok(weighted_l2_error(coefficients, &reference_expansion(f, n)?)),
        L2Mode::Unweighted => {
            let h = 2.0 / UNWEIGHTED_PANELS as f64;
            let sq = |t: f64| (evaluate_expansion(coefficients, t) - f(t)).norm_sqr();
            let mut total = 0.0;
            for k in 0..UNWEIGHTED_PANELS {
                let a = -1.0 + k as f64 * h;
                total += h / 6.0 * (sq(a) + 4.0 * sq(a + h / 2.0) + sq(a + h));
            }
            Ok(total.sqrt())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize, j: usize) -> CVector {
        let mut v = CVector::zeros(n);
        v[j] = Complex64::new(1.0, 0.0);
        v
    }

    #[test]
    fn target_values() {
        assert!((target_function(0.0) - 1.0).abs() < 1e-15);
        assert!(target_function(0.5).abs() < 1e-15);
        assert!((target_function(-1.0) + std::f64::consts::E).abs() < 1e-14);
    }

    #[test]
    fn reference_coefficients_of_basis_functions() {
        let c = reference_coefficients(|t| SQRT_2 * t, 6, 12).unwrap();
        for (j, v) in c.iter().enumerate() {
            assert!((v - if j == 1 { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
        let c = reference_coefficients(|_| 1.0, 4, 8).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-15 && c[1..].iter().all(|v| v.abs() < 1e-15));
        assert!(reference_coefficients(|_| 1.0, 4, 7).is_err());
    }

    #[test]
    fn clenshaw_examples() {
        assert!((evaluate_expansion(&unit(5, 0), 0.3) - 1.0).norm() < 1e-15);
        assert!((evaluate_expansion(&unit(5, 1), 1.0) - SQRT_2).norm() < 1e-15);
        assert!((evaluate_expansion(&unit(5, 2), 0.0) + SQRT_2).norm() < 1e-15);
    }

    #[test]
    fn basis_matches_cosine_form() {
        let t = 0.37f64;
        for (j, v) in chebyshev_basis(t, 10).iter().enumerate() {
            let want = if j == 0 { 1.0 } else { SQRT_2 * (j as f64 * t.acos()).cos() };
            assert!((v - want).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_expansion_when_threshold_covers_data() {
        let problem = SampledProblem::draw(target_function, 30, 10, 0.0, 1).unwrap();
        let eta = problem.measurements.norm() * 1.01;
        let approx = problem.solve(&[eta], &DecodeOptions::default()).unwrap().remove(0);
        assert!(approx.coefficients.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn problem_draw_is_exact_noise_norm() {
        let p = SampledProblem::draw(target_function, 40, 12, 1e-3, 7).unwrap();
        assert!((p.noise.norm() - 1e-3).abs() < 1e-15);
        assert_eq!(p.sample_points().len(), 12);
    }

    #[test]
    fn weighted_error_of_polynomial_is_zero() {
        let coeffs = CVector::from_iterator(4, [0.5, -1.0, 0.25, 2.0].map(|v| Complex64::new(v, 0.0)));
        let c = coeffs.clone();
        let f = move |t: f64| evaluate_expansion(&c, t).re;
        assert!(l2_error(&coeffs, &f, L2Mode::Weighted).unwrap() < 1e-10);
        assert!(l2_error(&coeffs, &f, L2Mode::Unweighted).unwrap() < 1e-10);
    }

    #[test]
    fn json_uses_pairs() {
        let a = ExpansionApproximation {
            coefficients: CVector::from_vec(vec![Complex64::new(1.0, -2.0)]),
            eta: 0.0,
            sample_points: vec![0.5],
            noise_magnitude: 0.0,
            status: DecodeStatus::Converged,
            iterations: 3,
        };
        let s = serde_json::to_string(&a).unwrap();
        assert!(s.contains("\"coefficients\":[[1.0,-2.0]]"), "{s}");
        assert_eq!(serde_json::from_str::<ExpansionApproximation>(&s).unwrap(), a);
    }
}
