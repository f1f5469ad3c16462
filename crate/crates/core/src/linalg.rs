//! Dense complex linear algebra helpers. Matrices are `nalgebra` types;
//! spectral decompositions are delegated to `faer`.

use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative cutoff below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-8;

pub fn l1_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

pub fn l2_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn linf_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn lq_norm(v: &CVector, q: f64) -> f64 {
    if q == 1.0 {
        return l1_norm(v);
    }
    if q == 2.0 {
        return l2_norm(v);
    }
    if q.is_infinite() {
        return linf_norm(v);
    }
    v.iter().map(|z| z.norm().powf(q)).sum::<f64>().powf(1.0 / q)
}

/// Complex soft thresholding `z ↦ z·max(0, 1 − t/|z|)`, in place.
pub fn soft_threshold(v: &mut CVector, t: f64) {
    for z in v.iter_mut() {
        let r = z.norm();
        *z = if r <= t { Complex64::new(0.0, 0.0) } else { *z * (1.0 - t / r) };
    }
}

pub fn is_finite_vec(v: &CVector) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn is_finite_mat(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn real_vector(values: &[f64]) -> CVector {
    CVector::from_iterator(values.len(), values.iter().map(|&x| Complex64::new(x, 0.0)))
}

/// Thin SVD `A = U diag(s) Vᴴ` with singular values in descending order.
pub struct ThinSvd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v_t: CMatrix,
}

fn to_faer(a: &CMatrix) -> Mat<Complex64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

impl ThinSvd {
    /// Panics if the iteration fails to converge, which requires non-finite
    /// entries.
    pub fn new(a: &CMatrix) -> Self {
        let svd = to_faer(a).thin_svd().expect("SVD of a finite matrix converges");
        let (u, s, v) = (svd.U(), svd.S(), svd.V());
        let k = s.dim();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| s[j].re.total_cmp(&s[i].re));
        Self {
            u: CMatrix::from_fn(a.nrows(), k, |r, c| u[(r, order[c])]),
            s: order.iter().map(|&i| s[i].re).collect(),
            v_t: CMatrix::from_fn(k, a.ncols(), |r, c| v[(c, order[r])].conj()),
        }
    }

    pub fn sigma_max(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }

    /// Numerical rank with cutoff `RANK_TOL · σ_max`.
    pub fn rank(&self) -> usize {
        let cut = RANK_TOL * self.sigma_max();
        self.s.iter().take_while(|&&x| x > cut && x > 0.0).count()
    }
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s = to_faer(a).singular_values().expect("SVD of a finite matrix converges");
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: CMatrix) -> Vec<f64> {
    if h.is_empty() {
        return Vec::new();
    }
    let mut ev = to_faer(&h).self_adjoint_eigenvalues(Side::Lower).expect("Hermitian eigensolver converges");
    ev.sort_by(f64::total_cmp);
    ev
}

/// Columns `cols` of `a`, in the given order.
pub fn select_columns(a: &CMatrix, cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(a.nrows(), cols.len(), |r, c| a[(r, cols[c])])
}
