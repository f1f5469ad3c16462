//! The QCBP decoder `Δ_η(y) ∈ argmin ‖z‖₁ s.t. ‖Az − y‖₂ ≤ η`.
//!
//! [`qcbp_decode`] runs a Chambolle–Pock primal-dual iteration on a whitened
//! copy of the constraint: with the thin SVD `A = U Σ Vᴴ` of rank `r`, the
//! residual splits as `‖Ax − y‖² = ‖Σ(Vᴴx − Σ⁻¹Uᴴy)‖² + ‖y_⊥‖²`, so the
//! operator seen by the iteration has orthonormal rows and the constraint
//! becomes an ellipsoid. The empty-feasible-set case (`‖y_⊥‖ > η`) returns
//! the zero vector, unless the excess is within ten times the feasibility
//! tolerance: singular values below the rank cutoff then count as zero and
//! the constraint is solved with radius `‖y_⊥‖`.
//!
//! The iteration restarts from its current point whenever the fixed-point
//! residual has dropped enough, and rebalances the primal and dual steps at
//! each restart (their product stays at `0.99/‖B‖²`). Termination requires a
//! feasible point whose `ℓ¹` norm is within `tol_rel` of a dual lower bound.
//! Every so often the current support is used to sharpen both sides: the
//! dual iterate is corrected to match `sign(x)` on the support, and a
//! feasible point is solved for in closed form on that support.
//!
//! [`reference_decode`] is an ADMM solver with exact projections onto the
//! feasible set, meant only as a test oracle on small instances.

mod ellipsoid;
mod reference;

use serde::{Deserialize, Serialize};

use crate::ensembles::{EnsembleKind, SensingMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, ThinSvd};
use crate::Complex64;

pub use ellipsoid::project_onto_ellipsoid;
pub use reference::{reference_decode, REFERENCE_MAX_DIM};

/// Iterations between convergence checks.
const CHECK_EVERY: usize = 10;
/// Iterations between attempts to sharpen the dual bound.
const POLISH_EVERY: usize = 50;
/// Relative sizes below which entries are left out of a guessed support.
/// Zero keeps every nonzero entry (up to the rank).
const SUPPORT_CUTOFFS: [f64; 3] = [1e-3, 1e-6, 0.0];
/// Largest change of `ln ω` at a single restart.
const MAX_WEIGHT_STEP: f64 = 4.6;
/// Iterations between restart checks.
const RESTART_CHECK_EVERY: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeOptions {
    /// Absolute feasibility slack; `None` means `1e-6 · max(1, ‖y‖₂)`.
    pub tol_feas: Option<f64>,
    /// Stop once `‖x‖₁ − dual bound ≤ tol_rel · max(1, ‖x‖₁)`.
    pub tol_rel: f64,
    pub max_iter: usize,
    /// Initial ratio of primal to dual step size; adapted at restarts.
    pub step_ratio: f64,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            tol_feas: None,
            tol_rel: 1e-9,
            max_iter: 50_000,
            step_ratio: 1.0,
        }
    }
}

impl DecodeOptions {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.tol_feas {
            if !(t >= 0.0) {
                return Err(Error::InvalidArgument(format!("tol_feas must be >= 0, got {t}")));
            }
        }
        if !(self.tol_rel >= 0.0) {
            return Err(Error::InvalidArgument(format!("tol_rel must be >= 0, got {}", self.tol_rel)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
        }
        if !(self.step_ratio > 0.0 && self.step_ratio.is_finite()) {
            return Err(Error::InvalidArgument(format!("step_ratio must be positive, got {}", self.step_ratio)));
        }
        Ok(())
    }

    pub fn feasibility_tolerance(&self, y_norm: f64) -> f64 {
        self.tol_feas.unwrap_or(1e-6 * y_norm.max(1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeStatus {
    Converged,
    MaxIter,
    InfeasibleSetEmpty,
}

impl DecodeStatus {
    pub fn name(self) -> &'static str {
        match self {
            DecodeStatus::Converged => "converged",
            DecodeStatus::MaxIter => "max_iter",
            DecodeStatus::InfeasibleSetEmpty => "infeasible_set_empty",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    pub solution: CVector,
    pub residual_norm: f64,
    pub objective: f64,
    pub status: DecodeStatus,
    pub iterations: usize,
}

/// A matrix prepared for repeated decoding with different `y` and `η`.
pub struct Decoder<'a> {
    a: &'a CMatrix,
    u: CMatrix,
    sigma: Vec<f64>,
    whitened: CMatrix,
    step: f64,
}

impl<'a> Decoder<'a> {
    pub fn new(a: &'a CMatrix) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::Dimension(format!("empty matrix {}x{}", a.nrows(), a.ncols())));
        }
        if !linalg::is_finite_mat(a) {
            return Err(Error::NonFinite("sensing matrix"));
        }
        let svd = ThinSvd::new(a);
        let r = svd.rank();
        let u = svd.u.columns(0, r).into_owned();
        let whitened = svd.v_t.rows(0, r).into_owned();
        let sigma = svd.s[..r].to_vec();
        Self::assemble(a, u, sigma, whitened)
    }

    /// Uses the known structure of distinct-row partial DFT matrices,
    /// whose rows are orthogonal with squared norm `N/m`, to skip the SVD.
    pub fn for_matrix(a: &'a SensingMatrix) -> Result<Self> {
        if a.spec().kind() != EnsembleKind::PartialDftSubset {
            return Self::new(a.entries());
        }
        let entries = a.entries();
        let (m, n) = entries.shape();
        let scale = (n as f64 / a.nominal_m() as f64).sqrt();
        let whitened = entries.map(|z| z / scale);
        Self::assemble(entries, CMatrix::identity(m, m), vec![scale; m], whitened)
    }

    fn assemble(a: &'a CMatrix, u: CMatrix, sigma: Vec<f64>, whitened: CMatrix) -> Result<Self> {
        let step = if sigma.is_empty() {
            1.0
        } else {
            0.99f64.sqrt() / operator_norm(&whitened, 1e-4)?
        };
        Ok(Self { a, u, sigma, whitened, step })
    }

    pub fn matrix(&self) -> &CMatrix {
        self.a
    }

    /// Nonzero singular values of `A`, descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.sigma
    }

    /// `min_z ‖Az − y‖₂`.
    pub fn range_distance(&self, y: &CVector) -> f64 {
        let c = self.u.ad_mul(y);
        (y - &self.u * c).norm()
    }

    pub fn decode(&self, y: &CVector, eta: f64, opts: &DecodeOptions) -> Result<DecodeResult> {
        opts.validate()?;
        let (m, n) = self.a.shape();
        if y.len() != m {
            return Err(Error::Dimension(format!("y has length {} but A has {m} rows", y.len())));
        }
        if !linalg::is_finite_vec(y) {
            return Err(Error::NonFinite("measurement vector"));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be finite and >= 0, got {eta}")));
        }
        let y_norm = y.norm();
        let tol_feas = opts.feasibility_tolerance(y_norm);
        let zero = |status, residual_norm| DecodeResult {
            solution: CVector::zeros(n),
            residual_norm,
            objective: 0.0,
            status,
            iterations: 0,
        };
        if y_norm <= eta {
            return Ok(zero(DecodeStatus::Converged, y_norm));
        }

        let c = self.u.ad_mul(y);
        let y_perp = (y - &self.u * &c).norm();
        if y_perp > eta + 10.0 * tol_feas {
            return Ok(zero(DecodeStatus::InfeasibleSetEmpty, y_norm));
        }
        let radius = (eta * eta - y_perp * y_perp).max(0.0).sqrt();
        let center = CVector::from_iterator(c.len(), c.iter().zip(&self.sigma).map(|(ci, s)| ci / *s));

        let problem = Whitened {
            b: &self.whitened,
            sigma: &self.sigma,
            center: &center,
            radius,
            y_perp,
        };
        // A sliver of `y` outside the numerical range cannot be fitted, so
        // the threshold is read as at least `‖y_⊥‖`.
        let limit = eta.max(y_perp);
        // Residual excess small enough not to move the objective measurably.
        let polish_slack = 1e-3 * tol_feas;
        let r = self.sigma.len();
        let mut state = PdhgState::new(n, r);
        let mut weight = 1.0 / opts.step_ratio.sqrt();
        let mut anchor = state.clone();
        let mut anchor_residual = f64::INFINITY;
        let mut last_check_residual = f64::INFINITY;
        let mut since_restart = 0usize;
        let mut next_polish = POLISH_EVERY;
        let mut status = DecodeStatus::MaxIter;
        let mut iterations = opts.max_iter;
        let mut next = state.clone();

        for k in 1..=opts.max_iter {
            let tau = self.step / weight;
            let dual_step = self.step * weight;
            self.pdhg_step(&state, &mut next, tau, dual_step, &center, radius);
            since_restart += 1;
            let movement = next.fixed_point_residual(&state, weight, self.step);
            std::mem::swap(&mut state, &mut next);
            if since_restart == 1 {
                anchor_residual = movement;
            }

            let last = k == opts.max_iter;
            if k % CHECK_EVERY == 0 || last {
                let residual = problem.residual(&state.bx);
                let mut dual = problem.dual_value(&state.p, &state.bh_p);
                let certified = |candidate: &CVector, dual: f64| {
                    let objective = linalg::l1_norm(candidate);
                    objective - dual <= opts.tol_rel * objective.max(1.0)
                        && (self.a * candidate - y).norm() <= limit + tol_feas
                };
                // Iterates in the slack band `η < residual ≤ η + tol_feas` can
                // undercut the optimum, so they are replaced by a boundary point.
                let mut done = None;
                if residual <= limit + polish_slack && certified(&state.x, dual) {
                    done = Some(state.x.clone());
                } else if k >= next_polish || last {
                    next_polish = k + POLISH_EVERY.max(k / 4);
                    let mut supports: Vec<Vec<usize>> = Vec::new();
                    for cutoff in SUPPORT_CUTOFFS {
                        if let Some(support) = self.support(&state.x, cutoff) {
                            if !supports.contains(&support) {
                                supports.push(support);
                            }
                        }
                    }
                    for support in &supports {
                        if let Some((p, bh_p)) = self.support_corrected_dual(support, &state.x, &state.p, &state.bh_p) {
                            dual = dual.max(problem.dual_value(&p, &bh_p));
                        }
                    }
                    done = supports.iter().find_map(|support| {
                        self.polished_primal(&problem, support, &state.x, eta, polish_slack)
                            .filter(|x| certified(x, dual))
                    });
                }
                if let Some(x) = done {
                    state.x = x;
                    status = DecodeStatus::Converged;
                    iterations = k;
                    break;
                }
            }

            if since_restart.is_multiple_of(RESTART_CHECK_EVERY) {
                let restart = movement <= 0.2 * anchor_residual
                    || (movement <= 0.8 * anchor_residual && movement > last_check_residual)
                    || since_restart as f64 >= 0.36 * k as f64;
                last_check_residual = movement;
                if restart {
                    let dx = (&state.x - &anchor.x).norm();
                    let dp = (&state.p - &anchor.p).norm();
                    if dx > 0.0 || dp > 0.0 {
                        let tiny = 1e-12 * (1.0 + state.x.norm() + state.p.norm());
                        let target = (dp.max(tiny) / dx.max(tiny)).ln();
                        let change = (0.5 * (target - weight.ln())).clamp(-MAX_WEIGHT_STEP, MAX_WEIGHT_STEP);
                        weight *= change.exp();
                    }
                    anchor.clone_from(&state);
                    since_restart = 0;
                    last_check_residual = f64::INFINITY;
                }
            }
        }

        let x = state.x;
        let residual_norm = (self.a * &x - y).norm();
        let objective = linalg::l1_norm(&x);
        Ok(DecodeResult {
            solution: x,
            residual_norm,
            objective,
            status,
            iterations,
        })
    }
}

impl Decoder<'_> {
    /// A feasible point supported on `support`: the minimiser of the
    /// linearised objective `Re⟨sign(x), z⟩` over the constraint restricted
    /// to the support. It is optimal once support and phases are right.
    fn polished_primal(&self, problem: &Whitened, support: &[usize], x: &CVector, eta: f64, slack: f64) -> Option<CVector> {
        let r = self.sigma.len();
        let weighted = CMatrix::from_fn(r, support.len(), |i, c| self.whitened[(i, support[c])] * self.sigma[i]);
        let target = CVector::from_iterator(r, problem.center.iter().zip(&self.sigma).map(|(c, s)| c * *s));
        let qr = weighted.clone().qr();
        let (q, rr) = (qr.q(), qr.r());
        let fit = rr.solve_upper_triangular(&q.ad_mul(&target))?;
        let misfit = (&weighted * &fit - &target).norm_squared();
        let budget = (eta * eta - problem.y_perp * problem.y_perp).max(0.0);
        if misfit.sqrt() > budget.sqrt() + slack {
            return None;
        }
        let phases = CVector::from_iterator(support.len(), support.iter().map(|&j| x[j] / x[j].norm()));
        let h = rr.adjoint().solve_lower_triangular(&phases)?;
        let g = rr.solve_upper_triangular(&h)?;
        let room = (budget - misfit).max(0.0).sqrt();
        let h_norm = h.norm();
        let z = if h_norm > 0.0 { fit - g * Complex64::new(room / h_norm, 0.0) } else { fit };
        if !linalg::is_finite_vec(&z) {
            return None;
        }
        let mut out = CVector::zeros(x.len());
        for (c, &j) in support.iter().enumerate() {
            out[j] = z[c];
        }
        Some(out)
    }

    /// Indices of the significant entries of `x`, at most `rank` of them.
    fn support(&self, x: &CVector, cutoff: f64) -> Option<Vec<usize>> {
        let cutoff = cutoff * linalg::linf_norm(x);
        let mut support: Vec<usize> = (0..x.len()).filter(|&j| x[j].norm() > cutoff).collect();
        if support.is_empty() {
            return None;
        }
        if support.len() > self.sigma.len() {
            support.sort_by(|&i, &j| x[j].norm().total_cmp(&x[i].norm()));
            support.truncate(self.sigma.len());
            support.sort_unstable();
        }
        Some(support)
    }

    /// Moves `p` by the least change that makes `−Bᴴp` equal `sign(x)` on the
    /// support of `x`. Returns the new `p` and `Bᴴp`.
    fn support_corrected_dual(&self, support: &[usize], x: &CVector, p: &CVector, bh_p: &CVector) -> Option<(CVector, CVector)> {
        let b_s = linalg::select_columns(&self.whitened, support);
        let gap = CVector::from_iterator(
            support.len(),
            support.iter().map(|&j| -x[j] / x[j].norm() - bh_p[j]),
        );
        // With B_S = QR the least-norm shift solving B_Sᴴ·shift = gap is Q R⁻ᴴ gap.
        let qr = b_s.qr();
        let w = qr.r().adjoint().solve_lower_triangular(&gap)?;
        if !linalg::is_finite_vec(&w) {
            return None;
        }
        let shift = qr.q() * w;
        let bh_shift = self.whitened.ad_mul(&shift);
        Some((p + shift, bh_p + bh_shift))
    }

    fn pdhg_step(&self, cur: &PdhgState, next: &mut PdhgState, tau: f64, dual_step: f64, center: &CVector, radius: f64) {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        // x⁺ = prox_{τ‖·‖₁}(x − τ Bᴴp)
        next.x.copy_from(&cur.x);
        next.x.axpy(Complex64::new(-tau, 0.0), &cur.bh_p, one);
        linalg::soft_threshold(&mut next.x, tau);
        next.bx.gemv(one, &self.whitened, &next.x, zero);
        // v = p + σ B(2x⁺ − x), p⁺ = v − σ P_E(v/σ)
        let mut v = cur.p.clone();
        v.axpy(Complex64::new(2.0 * dual_step, 0.0), &next.bx, one);
        v.axpy(Complex64::new(-dual_step, 0.0), &cur.bx, one);
        let w = project_onto_ellipsoid(&(&v / Complex64::new(dual_step, 0.0)), center, &self.sigma, radius);
        next.p.copy_from(&v);
        next.p.axpy(Complex64::new(-dual_step, 0.0), &w, one);
        next.bh_p.gemv_ad(one, &self.whitened, &next.p, zero);
    }
}

/// Primal and dual iterates together with their images under `B` and `Bᴴ`.
#[derive(Clone)]
struct PdhgState {
    x: CVector,
    bx: CVector,
    p: CVector,
    bh_p: CVector,
}

impl PdhgState {
    fn new(n: usize, r: usize) -> Self {
        Self {
            x: CVector::zeros(n),
            bx: CVector::zeros(r),
            p: CVector::zeros(r),
            bh_p: CVector::zeros(n),
        }
    }

    /// Length of the step from `prev` in the norm induced by the iteration.
    fn fixed_point_residual(&self, prev: &PdhgState, weight: f64, step: f64) -> f64 {
        let dx: f64 = self.x.iter().zip(prev.x.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
        let dp: f64 = self.p.iter().zip(prev.p.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
        let cross: f64 = self
            .p
            .iter()
            .zip(prev.p.iter())
            .zip(self.bx.iter().zip(prev.bx.iter()))
            .map(|((p1, p0), (b1, b0))| ((p1 - p0).conj() * (b1 - b0)).re)
            .sum();
        (weight / step * dx + dp / (step * weight) - 2.0 * cross).max(0.0).sqrt()
    }
}

/// The constraint `‖Σ(Bx − b)‖² + ‖y_⊥‖² ≤ η²` in whitened coordinates.
struct Whitened<'p> {
    b: &'p CMatrix,
    sigma: &'p [f64],
    center: &'p CVector,
    radius: f64,
    y_perp: f64,
}

impl Whitened<'_> {
    fn residual(&self, b_x: &CVector) -> f64 {
        let inner: f64 = b_x
            .iter()
            .zip(self.center.iter())
            .zip(self.sigma)
            .map(|((bx, c), s)| ((bx - c) * *s).norm_sqr())
            .sum();
        (inner + self.y_perp * self.y_perp).sqrt()
    }

    /// Dual objective `Re⟨b, q⟩ − ρ‖Σ⁻¹q‖` at `q = −p / max(1, ‖Bᴴp‖_∞)`.
    fn dual_value(&self, p: &CVector, bh_p: &CVector) -> f64 {
        debug_assert_eq!(p.len(), self.b.nrows());
        let scale = linalg::linf_norm(bh_p).max(1.0);
        let lin: f64 = self.center.iter().zip(p.iter()).map(|(c, pi)| (c.conj() * pi).re).sum();
        let weighted: f64 = p
            .iter()
            .zip(self.sigma)
            .map(|(pi, s)| (pi / *s).norm_sqr())
            .sum::<f64>()
            .sqrt();
        (-lin - self.radius * weighted) / scale
    }
}

/// Decodes `y` with threshold `eta`. See [`Decoder`] to reuse the
/// factorisation across several right-hand sides.
pub fn qcbp_decode(a: &CMatrix, y: &CVector, eta: f64, opts: &DecodeOptions) -> Result<DecodeResult> {
    Decoder::new(a)?.decode(y, eta, opts)
}

/// `σ_max(A)` by power iteration on `AᴴA`, to relative accuracy about `tol`.
pub fn operator_norm(a: &CMatrix, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 || a.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::ZeroMatrix);
    }
    // Deterministic start with no special alignment to any basis vector.
    let mut v = CVector::from_fn(n, |j, _| {
        let t = (j as f64 + 1.0) * 0.618_033_988_749_894_9;
        Complex64::new(1.0 + t.fract(), (t * 1.7).fract() - 0.5)
    });
    v /= Complex64::new(v.norm(), 0.0);
    let mut estimate = 0.0f64;
    for _ in 0..10_000 {
        let av = a * &v;
        let w = a.ad_mul(&av);
        let lambda = av.norm_squared();
        let w_norm = w.norm();
        if w_norm == 0.0 {
            // Start vector in the null space; perturb deterministically.
            v = CVector::from_fn(n, |j, _| Complex64::new(((j * 7919) % 13) as f64 - 6.0, 1.0));
            v /= Complex64::new(v.norm(), 0.0);
            continue;
        }
        v = w / Complex64::new(w_norm, 0.0);
        let next = lambda.sqrt();
        if (next - estimate).abs() <= 1e-3 * tol * next {
            return Ok(next);
        }
        estimate = next;
    }
    Ok(estimate)
}

/// `min_z ‖Az − y‖₂`, zero when `A` has full row rank.
pub fn range_distance(a: &CMatrix, y: &CVector) -> Result<f64> {
    if y.len() != a.nrows() {
        return Err(Error::Dimension(format!("y has length {} but A has {} rows", y.len(), a.nrows())));
    }
    if a.ncols() == 0 || a.iter().all(|z| z.norm_sqr() == 0.0) {
        return Ok(y.norm());
    }
    let svd = ThinSvd::new(a);
    let u = svd.u.columns(0, svd.rank());
    let c = u.ad_mul(y);
    Ok((y - u * c).norm())
}
