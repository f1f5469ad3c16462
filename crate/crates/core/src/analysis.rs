//! Recovery certificates and the constant formulas that feed the error bounds.
//!
//! Monte-Carlo estimators draw trial `t` from its own stream, derived from
//! the master seed and the grid point, and aggregate in trial order. Results
//! therefore do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{build_matrix, EnsembleSpec, SensingMatrix};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, lq_norm, singular_values, CMatrix, CVector, RANK_TOL};
use crate::rng::{derive_stream_id, RandomStream};
use crate::solver::{DecodeOptions, DecodeStatus, Decoder};
use num_complex::Complex64;

/// Largest number of supports [`rip_constant`] enumerates in exhaustive mode.
pub const RIP_SUPPORT_BUDGET: u128 = 1_000_000;

/// `δ_{2s}` must stay below this for the null space constants to exist.
pub fn rip_threshold() -> f64 {
    4.0 / 41f64.sqrt()
}

/// Stand-in for the unspecified universal constant of the singular value
/// deviation estimate.
pub const SV_DEVIATION_CONSTANT: f64 = 10.0;

const MATRIX_STREAM_TAG: u64 = 0xa11a;

/// `σ_s(x)_q`: the `ℓ^q` norm of `x` without its `s` largest entries.
///
/// Ties in modulus keep the lower index.
pub fn best_s_term_error(x: &CVector, s: usize, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::InvalidArgument(format!("q must be >= 1, got {q}")));
    }
    if s >= x.len() {
        return Ok(0.0);
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[j].norm().total_cmp(&x[i].norm()).then(i.cmp(&j)));
    let rest = CVector::from_iterator(x.len() - s, order[s..].iter().map(|&i| x[i]));
    Ok(lq_norm(&rest, q))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RipMode {
    Exhaustive,
    /// Maximum over this many uniformly drawn supports; a lower bound.
    Sampled { trials: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RipReport {
    pub s: usize,
    pub delta: f64,
    pub mode: RipMode,
    pub supports_examined: u128,
}

/// Number of `k`-subsets of `n` items, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

fn support_deviation(gram: &CMatrix, support: &[usize]) -> f64 {
    let sub = CMatrix::from_fn(support.len(), support.len(), |r, c| gram[(support[r], support[c])]);
    let ev = hermitian_eigenvalues(sub);
    let lo = ev.first().copied().unwrap_or(1.0);
    let hi = ev.last().copied().unwrap_or(1.0);
    (hi - 1.0).max(1.0 - lo).max(0.0)
}

/// Advances `idx` to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
        return false;
    };
    idx[i] += 1;
    for j in i + 1..k {
        idx[j] = idx[j - 1] + 1;
    }
    true
}

/// Restricted isometry constant `δ_s(A) = max_{|S|=s} ‖A_Sᴴ A_S − I‖₂`.
///
/// The stream is only consumed in sampled mode.
pub fn rip_constant(a: &CMatrix, s: usize, mode: RipMode, stream: &mut RandomStream) -> Result<RipReport> {
    let n = a.ncols();
    if s > n {
        return Err(Error::InvalidArgument(format!("sparsity {s} exceeds N = {n}")));
    }
    let gram = a.adjoint() * a;
    let (delta, examined) = match mode {
        RipMode::Exhaustive => {
            let supports = binomial(n, s);
            if supports > RIP_SUPPORT_BUDGET {
                return Err(Error::BudgetExceeded { supports, budget: RIP_SUPPORT_BUDGET });
            }
            let mut idx: Vec<usize> = (0..s).collect();
            let mut delta = 0.0f64;
            loop {
                delta = delta.max(support_deviation(&gram, &idx));
                if !next_combination(&mut idx, n) {
                    break;
                }
            }
            (delta, supports)
        }
        RipMode::Sampled { trials } => {
            if trials == 0 {
                return Err(Error::InvalidArgument("sampled mode needs at least one trial".into()));
            }
            let delta = (0..trials)
                .map(|_| support_deviation(&gram, &stream.subset(n, s)))
                .fold(0.0, f64::max);
            (delta, trials as u128)
        }
    };
    Ok(RipReport { s, delta, mode, supports_examined: examined })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NspConstants {
    pub rho: f64,
    pub tau: f64,
}

/// Robust null space constants implied by `δ_{2s} < 4/√41`.
pub fn nsp_from_rip(delta2s: f64) -> Result<NspConstants> {
    if !(delta2s >= 0.0) {
        return Err(Error::InvalidArgument(format!("delta_2s must be >= 0, got {delta2s}")));
    }
    if delta2s >= rip_threshold() {
        return Err(Error::RipConditionViolated(delta2s));
    }
    let den = (1.0 - delta2s * delta2s).sqrt() - delta2s / 4.0;
    Ok(NspConstants { rho: delta2s / den, tau: (1.0 + delta2s).sqrt() / den })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetConstants {
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

fn check_nsp(rho: f64, tau: f64, q1: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("rho must lie in [0, 1), got {rho}")));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if !(q1 >= 0.0) || !q1.is_finite() {
        return Err(Error::InvalidArgument(format!("Q1 must be nonnegative, got {q1}")));
    }
    Ok(())
}

/// Upper bound `(ρ+2)·Q₁ + τ` on the simultaneous `(ℓ^q, ℓ¹)`-quotient.
pub fn simultaneous_quotient_upper(rho: f64, tau: f64, q1: f64) -> f64 {
    (rho + 2.0) * q1 + tau
}

/// `C = 2(1+ρ)²/(1−ρ)`, `D = 2(3+ρ)τ/(1−ρ)` and `E = C[(ρ+2)Q₁ + τ]`.
pub fn budget_constants(rho: f64, tau: f64, q1: f64) -> Result<BudgetConstants> {
    check_nsp(rho, tau, q1)?;
    let c = 2.0 * (1.0 + rho).powi(2) / (1.0 - rho);
    let d = 2.0 * (3.0 + rho) * tau / (1.0 - rho);
    Ok(BudgetConstants { c, d, e: c * simultaneous_quotient_upper(rho, tau, q1) })
}

/// `C σ_s(x)₁ / s^{1−1/p} + s^{1/p−1/2} (D η + E max{‖e‖₂ − η, 0})`.
pub fn error_budget(
    consts: &BudgetConstants,
    sigma_s1: f64,
    s: usize,
    p: f64,
    eta: f64,
    err_norm: f64,
) -> Result<f64> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p must lie in [1, 2], got {p}")));
    }
    if s == 0 {
        return Err(Error::InvalidArgument("s must be >= 1".into()));
    }
    let s = s as f64;
    let excess = (err_norm - eta).max(0.0);
    Ok(consts.c * sigma_s1 / s.powf(1.0 - 1.0 / p) + s.powf(1.0 / p - 0.5) * (consts.d * eta + consts.e * excess))
}

/// Smallest singular value of `√(m/N)·Aᴴ`, snapped to zero below
/// `RANK_TOL · σ_max`.
pub fn sigma_min_scaled(a: &CMatrix) -> f64 {
    scaled_sigma_min(a, a.nrows())
}

/// As [`sigma_min_scaled`], on the nonzero rows and with the nominal `m`.
pub fn sigma_min_scaled_matrix(a: &SensingMatrix) -> f64 {
    scaled_sigma_min(&a.active_rows(), a.nominal_m())
}

fn scaled_sigma_min(a: &CMatrix, m: usize) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let sv = singular_values(a);
    let top = sv[0];
    let low = *sv.last().expect("nonempty");
    if low <= RANK_TOL * top {
        return 0.0;
    }
    low * (m as f64 / a.ncols() as f64).sqrt()
}

/// Bounds on the `ℓ¹`-quotient `Q_λ(A)₁`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientBounds {
    pub lambda: f64,
    /// `(1/K)√(m/λ)`, present only when every entry obeys `|A_ij| ≤ K/√m`.
    pub lower: Option<f64>,
    /// `√(m/λ)/σ_min`; `None` when `σ_min = 0` and the bound is infinite.
    pub upper: Option<f64>,
    pub empirical: Option<f64>,
    pub sigma_min: f64,
}

pub fn quotient_bounds(a: &CMatrix, lambda: f64, k: Option<f64>) -> Result<QuotientBounds> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let m = a.nrows() as f64;
    let root = (m / lambda).sqrt();
    let sigma_min = sigma_min_scaled(a);
    let lower = match k {
        Some(k) if k > 0.0 => {
            let max = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
            (max <= k / m.sqrt() * (1.0 + 1e-12)).then(|| root / k)
        }
        _ => None,
    };
    let upper = (sigma_min > 0.0).then(|| root / sigma_min);
    Ok(QuotientBounds { lambda, lower, upper, empirical: None, sigma_min })
}

/// Lower estimate of `Q_λ(A)₁`: the largest `min{‖z‖₁ : Az = e}/√λ` over
/// `n_directions` random unit vectors and the `m` canonical vectors.
///
/// The true quotient is a supremum over all directions, so the returned
/// value can only underestimate it.
pub fn quotient_empirical(
    a: &CMatrix,
    lambda: f64,
    n_directions: usize,
    stream: &mut RandomStream,
    opts: &DecodeOptions,
) -> Result<f64> {
    quotient_empirical_threshold(a, lambda, 0.0, n_directions, stream, opts)
}

/// Threshold-`η` variant of [`quotient_empirical`]. Each unit direction `u`
/// is scaled to `e = t·u` with `t = max(1, 2η)`, and the inner value is
/// `min{‖z‖₁ : ‖Az − e‖₂ ≤ η} / (√λ (t − η))`.
///
/// For the same stream this never exceeds the `η = 0` estimate beyond the
/// solver tolerance.
pub fn quotient_empirical_threshold(
    a: &CMatrix,
    lambda: f64,
    eta: f64,
    n_directions: usize,
    stream: &mut RandomStream,
    opts: &DecodeOptions,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidArgument(format!("eta must be finite and >= 0, got {eta}")));
    }
    let sigma_min = sigma_min_scaled(a);
    if sigma_min <= RANK_TOL {
        return Err(Error::RankDeficient(sigma_min));
    }
    let m = a.nrows();
    let mut directions: Vec<CVector> = (0..n_directions)
        .map(|_| {
            let v = CVector::from_fn(m, |_, _| stream.complex_normal());
            let norm = v.norm();
            v / Complex64::new(norm, 0.0)
        })
        .collect();
    for i in 0..m {
        let mut e = CVector::zeros(m);
        e[i] = Complex64::new(1.0, 0.0);
        directions.push(e);
    }
    let t = 1f64.max(2.0 * eta);
    let decoder = Decoder::new(a)?;
    let values = directions
        .par_iter()
        .map(|u| {
            let res = decoder.decode(&(u * Complex64::new(t, 0.0)), eta, opts)?;
            Ok(match res.status {
                DecodeStatus::InfeasibleSetEmpty => f64::INFINITY,
                _ => res.objective / (t - eta),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.into_iter().fold(0.0, f64::max) / lambda.sqrt())
}

/// Monte-Carlo estimate with its standard error `sample_std/√trials`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub trials: usize,
    pub std_error: f64,
}

impl MomentEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let trials = samples.len();
        if trials == 0 {
            return Self { value: 0.0, trials, std_error: 0.0 };
        }
        let mean = samples.iter().sum::<f64>() / trials as f64;
        let std_error = if trials > 1 {
            let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
            (var / trials as f64).sqrt()
        } else {
            0.0
        };
        Self { value: mean, trials, std_error }
    }
}

/// The matrix of trial `trial` at grid point `(m, N)`; shared by all
/// estimators so they see the same draws.
pub fn trial_matrix(spec: &EnsembleSpec, m: usize, n: usize, seed: u64, trial: usize) -> Result<SensingMatrix> {
    let id = derive_stream_id(&[MATRIX_STREAM_TAG, spec.kind().code(), m as u64, n as u64, trial as u64]);
    build_matrix(spec, m, n, &mut RandomStream::new(seed, id))
}

fn per_trial<T, F>(spec: &EnsembleSpec, m: usize, n: usize, trials: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&SensingMatrix) -> T + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    (0..trials)
        .into_par_iter()
        .map(|t| trial_matrix(spec, m, n, seed, t).map(|a| f(&a)))
        .collect()
}

/// `(m/N)² max_k Σ_{j≠k} |⟨a_j, a_k⟩|²` for one matrix, over its rows.
pub fn cross_coherence_sample(a: &SensingMatrix) -> f64 {
    let rows = a.active_rows();
    let gram = &rows * rows.adjoint();
    let worst = (0..gram.nrows())
        .map(|k| (0..gram.ncols()).filter(|&j| j != k).map(|j| gram[(k, j)].norm_sqr()).sum::<f64>())
        .fold(0.0, f64::max);
    (a.nominal_m() as f64 / a.cols() as f64).powi(2) * worst
}

/// `max_k |(m/N)‖a_k‖₂² − 1|` for one matrix.
pub fn distortion_sample(a: &SensingMatrix) -> f64 {
    let scale = a.nominal_m() as f64 / a.cols() as f64;
    a.active_rows()
        .row_iter()
        .map(|r| (scale * r.norm_squared() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// `max_k |σ_k(√(m/N)Aᴴ) − 1|` for one matrix.
pub fn sv_deviation_sample(a: &SensingMatrix) -> f64 {
    let rows = a.active_rows();
    let scale = (a.nominal_m() as f64 / a.cols() as f64).sqrt();
    singular_values(&rows)
        .iter().map(|s| (scale * s - 1.0).abs()).fold(0.0, f64::max)
}

/// Cross coherence `μ` of the ensemble.
pub fn cross_coherence(spec: &EnsembleSpec, m: usize, n: usize, trials: usize, seed: u64) -> Result<MomentEstimate> {
    Ok(MomentEstimate::from_samples(&per_trial(spec, m, n, trials, seed, cross_coherence_sample)?))
}

/// Distortion `ξ` of the ensemble.
pub fn distortion(spec: &EnsembleSpec, m: usize, n: usize, trials: usize, seed: u64) -> Result<MomentEstimate> {
    Ok(MomentEstimate::from_samples(&per_trial(spec, m, n, trials, seed, distortion_sample)?))
}

/// Empirical singular value deviation next to `ξ̂ + C₀√((1+ξ̂)μ̂ ln m)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvDeviation {
    pub deviation: f64,
    pub bound: f64,
    pub mu: f64,
    pub xi: f64,
    pub trials: usize,
}

pub fn sv_deviation_empirical(spec: &EnsembleSpec, m: usize, n: usize, trials: usize, seed: u64) -> Result<SvDeviation> {
    let samples = per_trial(spec, m, n, trials, seed, |a| {
        (sv_deviation_sample(a), cross_coherence_sample(a), distortion_sample(a))
    })?;
    let mean = |f: fn(&(f64, f64, f64)) -> f64| samples.iter().map(f).sum::<f64>() / trials as f64;
    let (deviation, mu, xi) = (mean(|s| s.0), mean(|s| s.1), mean(|s| s.2));
    let log_m = (m as f64).ln().max(0.0);
    let bound = xi + SV_DEVIATION_CONSTANT * ((1.0 + xi) * mu * log_m).sqrt();
    Ok(SvDeviation { deviation, bound, mu, xi, trials })
}

/// Normalised Christoffel function `C_N(t) = (1/N) Σ_{j<N} |φ_j(t)|²` of the
/// orthonormal Chebyshev system, by direct summation.
pub fn christoffel_chebyshev(t: f64, n: usize) -> f64 {
    assert!(n >= 1, "N must be positive");
    let (mut prev, mut cur) = (1.0, t);
    let mut sum = 1.0;
    for _ in 1..n {
        sum += 2.0 * cur * cur;
        (prev, cur) = (cur, 2.0 * t * cur - prev);
    }
    sum / n as f64
}

/// Closed form `1 − 1/(2N) + sin((2N−1)x)/(2N sin x)` with `x = arccos t`;
/// falls back to the sum at the endpoints.
pub fn christoffel_chebyshev_closed(t: f64, n: usize) -> f64 {
    let x = t.clamp(-1.0, 1.0).acos();
    let sx = x.sin();
    if sx.abs() < 1e-300 || t.abs() >= 1.0 {
        return christoffel_chebyshev(t, n);
    }
    let nf = n as f64;
    1.0 - 1.0 / (2.0 * nf) + ((2.0 * nf - 1.0) * x).sin() / (2.0 * nf * sx)
}

/// `(9√6 / (2π^{1/4})) · √(m/N)`, the Chebyshev distortion bound.
pub fn chebyshev_distortion_bound(m: usize, n: usize) -> Result<f64> {
    if m <= 1 || m > n {
        return Err(Error::InvalidArgument(format!("need 1 < m <= N, got m={m}, N={n}")));
    }
    let constant = 9.0 * 6f64.sqrt() / (2.0 * std::f64::consts::PI.powf(0.25));
    Ok(constant * (m as f64 / n as f64).sqrt())
}

/// `s* = m / ln(eN/m)`, for `1 ≤ m ≤ N`.
pub fn s_star(m: usize, n: usize) -> f64 {
    let m = m as f64;
    m / (1.0 + (n as f64 / m).ln())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogFactor {
    Primary,
    Alternative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementBound {
    pub log_factor: f64,
    pub m: u64,
}

fn positive_log(x: f64, what: &str) -> Result<f64> {
    let l = x.ln();
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::InvalidArgument(format!("ln({what}) = {l} is not positive")));
    }
    Ok(l)
}

/// Polylogarithmic factor `L(N, s, ε, δ, K)` and `m = ⌈c·s·L⌉` for RIP of a
/// bounded orthonormal system. `c` stands in for the unspecified universal
/// constant.
pub fn bos_measurement_bound(
    n: usize,
    s: usize,
    eps: f64,
    delta: f64,
    k: f64,
    variant: LogFactor,
    c: f64,
) -> Result<MeasurementBound> {
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("need eps, delta in (0,1), got {eps}, {delta}")));
    }
    if !(k >= 1.0) || !k.is_finite() {
        return Err(Error::InvalidArgument(format!("K must be >= 1, got {k}")));
    }
    if s < 2 {
        return Err(Error::InvalidArgument(format!("s must be >= 2, got {s}")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("c must be positive, got {c}")));
    }
    let (sf, d2) = (s as f64, delta * delta);
    let a = k * k * sf / d2;
    let ln_n = positive_log(n as f64, "N")?;
    let l = match variant {
        LogFactor::Primary => {
            let ln_a = positive_log(a, "K²s/δ²")?;
            let first = positive_log(a * ln_a, "K²s/δ² ln(K²s/δ²)")? * ln_n / (d2 * d2);
            let second = positive_log(ln_a / (eps * delta), "ln(K²s/δ²)/(εδ)")? / delta;
            k * k / d2 * ln_a * first.max(second)
        }
        LogFactor::Alternative => {
            let ln_s = positive_log(sf, "s")?;
            let inner = positive_log(a * ln_n, "K²s/δ² ln N")?;
            let ln_eps = positive_log(1.0 / eps, "1/ε")?;
            k * k / d2 * (ln_s * ln_s * inner * ln_n).max(ln_eps)
        }
    };
    Ok(MeasurementBound { log_factor: l, m: (c * sf * l).ceil() as u64 })
}

/// Any certificate in its JSON form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "certificate", rename_all = "snake_case")]
pub enum CertificateReport {
    Rip(RipReport),
    Quotient(QuotientBounds),
    CrossCoherence(MomentEstimate),
    Distortion(MomentEstimate),
    SvDeviation(SvDeviation),
    Christoffel { n: usize, t: f64, sum: f64, closed_form: f64 },
}

impl CertificateReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleKind;

    fn real(v: &[f64]) -> CVector {
        crate::linalg::real_vector(v)
    }

    #[test]
    fn best_s_term_examples() {
        assert_eq!(best_s_term_error(&real(&[3.0, 1.0, 2.0]), 1, 1.0).unwrap(), 3.0);
        assert_eq!(best_s_term_error(&real(&[3.0, 4.0, 0.0]), 1, 2.0).unwrap(), 3.0);
        assert_eq!(best_s_term_error(&real(&[3.0, 0.0, 2.0]), 2, 1.0).unwrap(), 0.0);
        assert!(best_s_term_error(&real(&[1.0]), 0, 0.5).is_err());
    }

    #[test]
    fn best_s_term_ties_keep_lower_index() {
        let x = real(&[1.0, -1.0, 1.0]);
        assert_eq!(best_s_term_error(&x, 1, 1.0).unwrap(), 2.0);
        assert_eq!(best_s_term_error(&x, 2, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn combinations_cover_all_subsets() {
        let mut idx = vec![0, 1];
        let mut count = 1;
        while next_combination(&mut idx, 5) {
            count += 1;
        }
        assert_eq!(count, 10);
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(64, 32), 1_832_624_140_942_590_534);
        assert_eq!(binomial(3, 4), 0);
    }

    #[test]
    fn rip_of_identity_and_duplicates() {
        let mut r = RandomStream::new(0, 0);
        let eye = CMatrix::identity(6, 6);
        assert_eq!(rip_constant(&eye, 3, RipMode::Exhaustive, &mut r).unwrap().delta, 0.0);
        let mut a = CMatrix::identity(4, 4);
        a.set_column(1, &a.column(0).clone_owned());
        let rep = rip_constant(&a, 2, RipMode::Exhaustive, &mut r).unwrap();
        assert!((rep.delta - 1.0).abs() < 1e-15);
        assert_eq!(rep.supports_examined, 6);
    }

    #[test]
    fn rip_budget_is_enforced() {
        let a = CMatrix::identity(40, 40);
        let err = rip_constant(&a, 20, RipMode::Exhaustive, &mut RandomStream::new(0, 0)).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn nsp_constants() {
        assert_eq!(nsp_from_rip(0.0).unwrap(), NspConstants { rho: 0.0, tau: 1.0 });
        let c = nsp_from_rip(0.6).unwrap();
        // 0.6 / (0.8 − 0.15) and √1.6 / 0.65
        assert!((c.rho - 0.6 / 0.65).abs() < 1e-14);
        assert!((c.tau - 1.6f64.sqrt() / 0.65).abs() < 1e-14);
        assert!(matches!(nsp_from_rip(0.63), Err(Error::RipConditionViolated(_))));
        assert!(matches!(nsp_from_rip(rip_threshold()), Err(Error::RipConditionViolated(_))));
        assert!(nsp_from_rip(rip_threshold() - 1e-12).is_ok());
    }

    #[test]
    fn budget_examples() {
        let b = budget_constants(0.0, 1.0, 1.0).unwrap();
        assert_eq!((b.c, b.d, b.e), (2.0, 6.0, 6.0));
        assert_eq!(budget_constants(0.0, 1.0, 0.0).unwrap().e, 2.0);
        let b = budget_constants(0.5, 2.0, 3.0).unwrap();
        assert_eq!((b.c, b.d, b.e), (9.0, 28.0, 85.5));
        assert!(budget_constants(1.0, 1.0, 1.0).is_err());
        assert!(budget_constants(0.5, 0.0, 1.0).is_err());
        assert_eq!(simultaneous_quotient_upper(0.5, 2.0, 4.0), 12.0);
    }

    #[test]
    fn error_budget_examples() {
        let b = BudgetConstants { c: 2.0, d: 6.0, e: 6.0 };
        assert_eq!(error_budget(&b, 0.0, 3, 1.0, 0.0, 0.0).unwrap(), 0.0);
        assert!((error_budget(&b, 1.0, 4, 2.0, 0.1, 0.1).unwrap() - 1.6).abs() < 1e-15);
        assert!(error_budget(&b, 1.0, 4, 2.5, 0.1, 0.1).is_err());
    }

    #[test]
    fn sigma_min_of_scaled_coordinate_rows() {
        let (m, n) = (3, 8);
        let a = CMatrix::from_fn(m, n, |i, j| Complex64::new(if i == j { (n as f64 / m as f64).sqrt() } else { 0.0 }, 0.0));
        assert!((sigma_min_scaled(&a) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quotient_bound_degenerate_cases() {
        let a = CMatrix::from_element(2, 4, Complex64::new(0.5, 0.0));
        let q = quotient_bounds(&a, 1.0, Some(1.0)).unwrap();
        assert_eq!(q.sigma_min, 0.0);
        assert_eq!(q.upper, None);
        let eye = CMatrix::identity(3, 3);
        let q = quotient_bounds(&eye, 3.0, None).unwrap();
        assert!((q.upper.unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(q.lower, None);
    }

    #[test]
    fn empirical_quotient_of_identity() {
        let eye = CMatrix::identity(5, 5);
        let q = quotient_empirical(&eye, 1.0, 10, &mut RandomStream::new(1, 0), &DecodeOptions::default()).unwrap();
        // Random unit directions reach ‖e‖₁ up to √5; canonical ones give 1.
        assert!(q >= 1.0 - 1e-8 && q <= 5f64.sqrt() + 1e-8);
        let q = quotient_empirical(&eye, 1.0, 0, &mut RandomStream::new(1, 0), &DecodeOptions::default()).unwrap();
        assert!((q - 1.0).abs() < 1e-8);
    }

    #[test]
    fn empirical_quotient_rejects_rank_deficiency() {
        let a = CMatrix::from_element(2, 4, Complex64::new(0.5, 0.0));
        let err = quotient_empirical(&a, 1.0, 1, &mut RandomStream::new(0, 0), &DecodeOptions::default());
        assert!(matches!(err, Err(Error::RankDeficient(_))));
    }

    #[test]
    fn moment_estimate_standard_error() {
        let m = MomentEstimate::from_samples(&[1.0, 2.0, 3.0]);
        assert_eq!(m.value, 2.0);
        assert!((m.std_error - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(MomentEstimate::from_samples(&[4.0]).std_error, 0.0);
    }

    #[test]
    fn single_row_has_no_cross_coherence() {
        let spec = EnsembleSpec::from(EnsembleKind::PartialDftIndependent);
        assert_eq!(cross_coherence(&spec, 1, 8, 5, 0).unwrap().value, 0.0);
        assert!(sv_deviation_empirical(&spec, 1, 8, 5, 0).unwrap().deviation < 1e-12);
    }

    #[test]
    fn christoffel_small_cases() {
        for t in [-0.9, 0.0, 0.3] {
            assert_eq!(christoffel_chebyshev(t, 1), 1.0);
        }
        assert_eq!(christoffel_chebyshev(0.0, 2), 0.5);
        assert!((christoffel_chebyshev_closed(0.0, 2) - 0.5).abs() < 1e-15);
        assert_eq!(christoffel_chebyshev_closed(1.0, 3), christoffel_chebyshev(1.0, 3));
    }

    #[test]
    fn distortion_bound_constant() {
        assert!((chebyshev_distortion_bound(7, 7).unwrap() - 8.279434425191878).abs() < 1e-12);
        assert!(chebyshev_distortion_bound(1, 7).is_err());
        assert!(chebyshev_distortion_bound(8, 7).is_err());
    }

    #[test]
    fn s_star_values() {
        assert!((s_star(64, 64) - 64.0).abs() < 1e-12);
        assert!((s_star(100, 512) - 37.98).abs() < 5e-3);
    }

    #[test]
    fn measurement_bound_domain() {
        assert!(bos_measurement_bound(512, 1, 0.01, 0.5, 1.0, LogFactor::Primary, 1.0).is_err());
        assert!(bos_measurement_bound(512, 15, 0.0, 0.5, 1.0, LogFactor::Primary, 1.0).is_err());
        assert!(bos_measurement_bound(512, 15, 0.01, 0.5, 0.5, LogFactor::Alternative, 1.0).is_err());
        let b = bos_measurement_bound(512, 15, 0.01, 0.5, 1.0, LogFactor::Alternative, 1.0).unwrap();
        assert_eq!(b.m, (15.0 * b.log_factor).ceil() as u64);
    }

    #[test]
    fn certificate_json_field_names() {
        let q = QuotientBounds { lambda: 4.0, lower: Some(1.0), upper: None, empirical: None, sigma_min: 0.0 };
        let v: serde_json::Value = serde_json::from_str(&CertificateReport::Quotient(q).to_json().unwrap()).unwrap();
        assert_eq!(v["certificate"], "quotient");
        assert_eq!(v["lower"], 1.0);
        assert!(v["upper"].is_null());
        let m = CertificateReport::Distortion(MomentEstimate { value: 0.5, trials: 3, std_error: 0.1 });
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert_eq!(v["trials"], 3);
        assert_eq!(v["std_error"], 0.1);
    }
}
