//! Random sensing matrices, sparse signals and noise.
//!
//! Every bounded-orthonormal-system (BOS) ensemble builds
//! `A_ij = m^{-1/2} φ_j(τ_i)` from independently drawn sample points `τ_i`;
//! the subsampled-isometry models instead select rows of a unitary `U` and
//! rescale them by `√(N/m)`.

mod container;

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::rng::RandomStream;

pub use container::{read_matrix, sidecar_path, write_matrix, MatrixMetadata, MATRIX_MAGIC};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Gaussian,
    PartialDftIndependent,
    PartialDftBernoulli,
    PartialDftSubset,
    NonharmonicFourier,
    ChebyshevBos,
    CustomIsometry,
}

impl EnsembleKind {
    pub const ALL: [EnsembleKind; 7] = [
        EnsembleKind::Gaussian,
        EnsembleKind::PartialDftIndependent,
        EnsembleKind::PartialDftBernoulli,
        EnsembleKind::PartialDftSubset,
        EnsembleKind::NonharmonicFourier,
        EnsembleKind::ChebyshevBos,
        EnsembleKind::CustomIsometry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnsembleKind::Gaussian => "gaussian",
            EnsembleKind::PartialDftIndependent => "partial_dft_independent",
            EnsembleKind::PartialDftBernoulli => "partial_dft_bernoulli",
            EnsembleKind::PartialDftSubset => "partial_dft_subset",
            EnsembleKind::NonharmonicFourier => "nonharmonic_fourier",
            EnsembleKind::ChebyshevBos => "chebyshev_bos",
            EnsembleKind::CustomIsometry => "custom_isometry",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn is_bos(self) -> bool {
        self != EnsembleKind::Gaussian
    }

    fn is_partial_dft(self) -> bool {
        matches!(
            self,
            EnsembleKind::PartialDftIndependent
                | EnsembleKind::PartialDftBernoulli
                | EnsembleKind::PartialDftSubset
        )
    }

    /// Stable numeric id used when deriving random streams.
    pub fn code(self) -> u64 {
        self as u64
    }
}

impl std::fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug)]
struct Isometry {
    u: CMatrix,
    k: f64,
}

/// A random measurement model.
#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    kind: EnsembleKind,
    isometry: Option<Arc<Isometry>>,
}

impl EnsembleSpec {
    /// Any kind that needs no extra data (everything except a custom isometry).
    pub fn standard(kind: EnsembleKind) -> Result<Self> {
        if kind == EnsembleKind::CustomIsometry {
            return Err(Error::InvalidArgument(
                "custom_isometry needs a unitary matrix; use EnsembleSpec::custom_isometry".into(),
            ));
        }
        Ok(Self { kind, isometry: None })
    }

    pub fn gaussian() -> Self {
        Self { kind: EnsembleKind::Gaussian, isometry: None }
    }

    pub fn chebyshev() -> Self {
        Self { kind: EnsembleKind::ChebyshevBos, isometry: None }
    }

    /// Subsampled isometry built from the unitary `u`, whose entries must obey
    /// `max |U_ij| ≤ K/√N`.
    pub fn custom_isometry(u: CMatrix, k: f64) -> Result<Self> {
        let n = u.nrows();
        if n == 0 || u.ncols() != n {
            return Err(Error::Dimension(format!(
                "isometry must be square and nonempty, got {}x{}",
                u.nrows(),
                u.ncols()
            )));
        }
        if !(k >= 1.0) {
            return Err(Error::InvalidArgument(format!("BOS constant K must be >= 1, got {k}")));
        }
        let gram_err = (u.adjoint() * &u - CMatrix::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if gram_err > 1e-8 {
            return Err(Error::InvalidArgument(format!(
                "matrix is not unitary (max |UᴴU − I| = {gram_err:e})"
            )));
        }
        let max = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let bound = k / (n as f64).sqrt();
        if max > bound * (1.0 + 1e-12) {
            return Err(Error::EntryBound { max, bound });
        }
        Ok(Self {
            kind: EnsembleKind::CustomIsometry,
            isometry: Some(Arc::new(Isometry { u, k })),
        })
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    /// The BOS constant `K`, or `None` for the Gaussian model.
    pub fn bos_constant(&self) -> Option<f64> {
        match self.kind {
            EnsembleKind::Gaussian => None,
            EnsembleKind::ChebyshevBos => Some(SQRT_2),
            EnsembleKind::CustomIsometry => self.isometry.as_ref().map(|iso| iso.k),
            _ => Some(1.0),
        }
    }

    fn unitary(&self) -> Option<&CMatrix> {
        self.isometry.as_ref().map(|iso| &iso.u)
    }
}

impl From<EnsembleKind> for EnsembleSpec {
    /// Panics for [`EnsembleKind::CustomIsometry`].
    fn from(kind: EnsembleKind) -> Self {
        Self::standard(kind).expect("custom_isometry needs a unitary matrix")
    }
}

/// A realised sensing matrix together with the metadata of its draw.
#[derive(Clone, Debug)]
pub struct SensingMatrix {
    entries: CMatrix,
    spec: EnsembleSpec,
    nominal_m: usize,
    sample_points: Option<Vec<f64>>,
    rows_distinct: bool,
    seed: u64,
    stream_id: u64,
}

impl SensingMatrix {
    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    /// The `m` the matrix was built for. Differs from `rows()` only for
    /// Bernoulli selectors, where `m` is the expected number of kept rows.
    pub fn nominal_m(&self) -> usize {
        self.nominal_m
    }

    pub fn sample_points(&self) -> Option<&[f64]> {
        self.sample_points.as_deref()
    }

    pub fn rows_distinct(&self) -> bool {
        self.rows_distinct
    }

    pub fn seed(&self) -> (u64, u64) {
        (self.seed, self.stream_id)
    }

    /// The nonzero rows (all rows except for Bernoulli selectors).
    pub fn active_rows(&self) -> CMatrix {
        if self.spec.kind != EnsembleKind::PartialDftBernoulli {
            return self.entries.clone();
        }
        let keep: Vec<usize> = (0..self.rows())
            .filter(|&i| self.entries.row(i).iter().any(|z| z.norm_sqr() > 0.0))
            .collect();
        CMatrix::from_fn(keep.len(), self.cols(), |r, c| self.entries[(keep[r], c)])
    }
}

fn dft_row(row: usize, n: usize, scale: f64) -> impl Iterator<Item = Complex64> {
    (0..n).map(move |j| {
        let phase = 2.0 * PI * ((row * j) % n) as f64 / n as f64;
        Complex64::from_polar(scale, phase)
    })
}

fn rows_are_distinct(points: &[f64]) -> bool {
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).all(|w| w[0] != w[1])
}

/// Draws one matrix from `spec` with `m` (expected) measurements and `n` columns.
pub fn build_matrix(spec: &EnsembleSpec, m: usize, n: usize, stream: &mut RandomStream) -> Result<SensingMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::Dimension(format!("need m >= 1 and N >= 1, got m={m}, N={n}")));
    }
    if m > n && spec.kind != EnsembleKind::Gaussian {
        return Err(Error::Dimension(format!("{} requires m <= N, got m={m}, N={n}", spec.kind)));
    }
    if let Some(u) = spec.unitary() {
        if u.nrows() != n {
            return Err(Error::Dimension(format!("isometry is {0}x{0} but N={n}", u.nrows())));
        }
    }
    let inv_sqrt_m = 1.0 / (m as f64).sqrt();
    let mut sample_points = None;
    let mut rows_distinct = true;

    let entries = match spec.kind {
        EnsembleKind::Gaussian => {
            // Filled column by column.
            CMatrix::from_fn(m, n, |_, _| Complex64::new(stream.normal() * inv_sqrt_m, 0.0))
        }
        EnsembleKind::PartialDftIndependent | EnsembleKind::PartialDftSubset => {
            let rows: Vec<usize> = if spec.kind == EnsembleKind::PartialDftSubset {
                stream.subset(n, m)
            } else {
                (0..m).map(|_| stream.index(n)).collect()
            };
            let mut a = CMatrix::zeros(m, n);
            for (i, &r) in rows.iter().enumerate() {
                for (j, z) in dft_row(r, n, inv_sqrt_m).enumerate() {
                    a[(i, j)] = z;
                }
            }
            let pts: Vec<f64> = rows.iter().map(|&r| (r + 1) as f64).collect();
            rows_distinct = rows_are_distinct(&pts);
            sample_points = Some(pts);
            a
        }
        EnsembleKind::PartialDftBernoulli => {
            let p = m as f64 / n as f64;
            let selected: Vec<usize> = (0..n).filter(|_| stream.bernoulli(p)).collect();
            let mut a = CMatrix::zeros(n, n);
            for &r in &selected {
                for (j, z) in dft_row(r, n, inv_sqrt_m).enumerate() {
                    a[(r, j)] = z;
                }
            }
            sample_points = Some(selected.iter().map(|&r| (r + 1) as f64).collect());
            a
        }
        EnsembleKind::CustomIsometry => {
            let u = spec.unitary().expect("custom isometry carries its matrix");
            let rows: Vec<usize> = (0..m).map(|_| stream.index(n)).collect();
            let scale = (n as f64 / m as f64).sqrt();
            let a = CMatrix::from_fn(m, n, |i, j| u[(rows[i], j)] * scale);
            let pts: Vec<f64> = rows.iter().map(|&r| (r + 1) as f64).collect();
            rows_distinct = rows_are_distinct(&pts);
            sample_points = Some(pts);
            a
        }
        EnsembleKind::NonharmonicFourier | EnsembleKind::ChebyshevBos => {
            let pts: Vec<f64> = if spec.kind == EnsembleKind::ChebyshevBos {
                sample_chebyshev_points(m, stream)
            } else {
                (0..m).map(|_| stream.uniform()).collect()
            };
            let mut a = CMatrix::zeros(m, n);
            for (i, &t) in pts.iter().enumerate() {
                let row = evaluate_bos(spec, t, n)?;
                for j in 0..n {
                    a[(i, j)] = row[j] * inv_sqrt_m;
                }
            }
            rows_distinct = rows_are_distinct(&pts);
            sample_points = Some(pts);
            a
        }
    };

    Ok(SensingMatrix {
        entries,
        spec: spec.clone(),
        nominal_m: m,
        sample_points,
        rows_distinct,
        seed: stream.master_seed(),
        stream_id: stream.stream_id(),
    })
}

/// Maps `u ∈ (0,1)` to `cos(πu)`, the pushforward onto the arcsine law.
pub fn chebyshev_point(u: f64) -> f64 {
    (PI * u).cos()
}

/// `count` independent draws from the Chebyshev measure `π⁻¹(1−t²)^{-1/2} dt`.
pub fn sample_chebyshev_points(count: usize, stream: &mut RandomStream) -> Vec<f64> {
    (0..count).map(|_| chebyshev_point(stream.uniform_open())).collect()
}

/// `(φ₁(t), …, φ_N(t))` for a BOS ensemble, without the `m^{-1/2}` factor.
///
/// Sample locations: `t ∈ {1, …, N}` for the partial DFT and custom isometry
/// (row index, one-based), `t ∈ [0, 1]` for nonharmonic Fourier and
/// `t ∈ [−1, 1]` for Chebyshev.
pub fn evaluate_bos(spec: &EnsembleSpec, t: f64, n: usize) -> Result<CVector> {
    let out_of_domain = || Error::InvalidArgument(format!("sample location {t} outside the domain of {}", spec.kind));
    if !t.is_finite() {
        return Err(Error::NonFinite("sample location"));
    }
    let kind = spec.kind;
    if kind == EnsembleKind::Gaussian {
        return Err(Error::InvalidArgument("the Gaussian ensemble is not a BOS".into()));
    }
    if kind.is_partial_dft() || kind == EnsembleKind::CustomIsometry {
        if t.fract() != 0.0 || t < 1.0 || t > n as f64 {
            return Err(out_of_domain());
        }
        let row = t as usize - 1;
        if let Some(u) = spec.unitary() {
            if u.nrows() != n {
                return Err(Error::Dimension(format!("isometry is {0}x{0} but N={n}", u.nrows())));
            }
            let scale = (n as f64).sqrt();
            return Ok(CVector::from_iterator(n, u.row(row).iter().map(|z| z * scale)));
        }
        return Ok(CVector::from_iterator(n, dft_row(row, n, 1.0)));
    }
    if kind == EnsembleKind::NonharmonicFourier {
        if !(0.0..=1.0).contains(&t) {
            return Err(out_of_domain());
        }
        let shift = n.div_ceil(2) as f64;
        return Ok(CVector::from_iterator(
            n,
            (1..=n).map(|j| Complex64::from_polar(1.0, 2.0 * PI * (j as f64 - shift) * t)),
        ));
    }
    if !(-1.0..=1.0).contains(&t) {
        return Err(out_of_domain());
    }
    let theta = t.acos();
    Ok(CVector::from_iterator(
        n,
        (0..n).map(|j| {
            let v = if j == 0 { 1.0 } else { SQRT_2 * (j as f64 * theta).cos() };
            Complex64::new(v, 0.0)
        }),
    ))
}

/// An `s`-sparse vector with uniformly random support and standard normal values.
pub fn sparse_signal(n: usize, s: usize, stream: &mut RandomStream) -> Result<CVector> {
    if s > n {
        return Err(Error::InvalidArgument(format!("sparsity {s} exceeds dimension {n}")));
    }
    let mut x = CVector::zeros(n);
    for i in stream.subset(n, s) {
        x[i] = Complex64::new(stream.normal(), 0.0);
    }
    Ok(x)
}

/// `magnitude · f/‖f‖₂` with `f` standard Gaussian.
pub fn noise_vector(dim: usize, magnitude: f64, stream: &mut RandomStream) -> Result<CVector> {
    if dim == 0 {
        return Err(Error::Dimension("noise dimension must be positive".into()));
    }
    if !(magnitude >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise magnitude must be nonnegative, got {magnitude}")));
    }
    let f: Vec<f64> = (0..dim).map(|_| stream.normal()).collect();
    let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if magnitude == 0.0 || norm == 0.0 { 0.0 } else { magnitude / norm };
    Ok(CVector::from_iterator(dim, f.iter().map(|&v| Complex64::new(v * scale, 0.0))))
}
