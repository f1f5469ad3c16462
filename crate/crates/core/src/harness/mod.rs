//! Declarative experiment sweeps reproducing the recovery, coherence,
//! distortion and approximation studies.
//!
//! A sweep is split into independent units, one per grid point (without
//! the threshold) and trial. Each unit draws its matrix, signal and noise
//! from a stream keyed by the unit, then decodes once per threshold, so all
//! thresholds see the same `(A, y, e)`. Units run in parallel and their
//! records are concatenated in key order.

mod output;
mod summary;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{cross_coherence_sample, distortion_sample, sigma_min_scaled_matrix};
use crate::ensembles::{build_matrix, noise_vector, sparse_signal, EnsembleKind, EnsembleSpec};
use crate::error::{Error, Result};
use crate::polyapprox::{reference_expansion, target_function, weighted_l2_error, SampledProblem};
use crate::rng::{derive_stream_id, RandomStream};
use crate::solver::{DecodeOptions, Decoder};

pub use output::{
    read_csv, render_svg, write_csv, write_records, write_summary, write_summary_csv, write_svg, RECORD_COLUMNS,
};
pub use summary::{summarize, Stat, SummaryRow, SummaryTable, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Recovery error versus `m` for BP and QCBP.
    Fig1,
    /// Cross coherence versus `m`.
    Fig2,
    /// Recovery error and scaled `σ_min` versus `s` at `m = ⌈s ln N⌉`.
    Fig3,
    /// Distortion over the `(m/N, N)` grid.
    Fig4,
    /// Polynomial approximation error versus `η`.
    Fig5,
    /// Recovery sweep over an arbitrary grid.
    Custom,
}

impl Experiment {
    pub const ALL: [Experiment; 6] =
        [Experiment::Fig1, Experiment::Fig2, Experiment::Fig3, Experiment::Fig4, Experiment::Fig5, Experiment::Custom];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
            Experiment::Fig5 => "fig5",
            Experiment::Custom => "custom",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    fn is_recovery(self) -> bool {
        matches!(self, Experiment::Fig1 | Experiment::Fig3 | Experiment::Custom)
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the measurement counts are derived from `N` (and `s`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MRule {
    Explicit(Vec<usize>),
    /// `⌈kN/10⌉` for each listed `k`.
    Tenths(Vec<usize>),
    /// `⌈s ln N⌉`.
    SLogN,
    /// `2^k ≤ N`, `k ≥ 1`.
    PowersOfTwo,
    /// `⌈C·N⌉` for each listed ratio `C`.
    Ratios(Vec<f64>),
}

impl MRule {
    pub fn values(&self, n: usize, s: usize) -> Vec<usize> {
        let nf = n as f64;
        let up = |v: f64| (v - 1e-9).ceil().max(1.0) as usize;
        match self {
            MRule::Explicit(ms) => ms.clone(),
            MRule::Tenths(ks) => ks.iter().map(|&k| up(k as f64 * nf / 10.0)).collect(),
            MRule::SLogN => vec![up(s as f64 * nf.ln())],
            MRule::PowersOfTwo => (1..).map(|k| 1usize << k).take_while(|&m| m <= n).collect(),
            MRule::Ratios(cs) => cs.iter().map(|&c| up(c * nf)).collect(),
        }
    }

    fn depends_on_s(&self) -> bool {
        matches!(self, MRule::SLogN)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: Vec<usize>,
    pub m_rule: MRule,
    #[serde(default)]
    pub s: Vec<usize>,
    #[serde(default)]
    pub eta: Vec<f64>,
    #[serde(default)]
    pub noise_magnitude: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub ensembles: Vec<EnsembleKind>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

/// The fig5 threshold grid `10^k`, `k` on 12 uniform points of `[−8, 1]`.
pub fn fig5_eta_grid() -> Vec<f64> {
    (0..12).map(|k| 10f64.powf(-8.0 + 9.0 * k as f64 / 11.0)).collect()
}

impl ExperimentConfig {
    /// The shipped defaults of each experiment.
    pub fn preset(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            n: vec![512],
            m_rule: MRule::Tenths((1..=10).collect()),
            s: vec![15],
            eta: vec![0.0, 1e-3],
            noise_magnitude: vec![1e-3],
            trials: 25,
            master_seed: 0,
            ensembles: vec![EnsembleKind::Gaussian, EnsembleKind::PartialDftSubset, EnsembleKind::NonharmonicFourier],
            output_path: None,
        };
        match experiment {
            Experiment::Fig1 | Experiment::Custom => base,
            Experiment::Fig2 => Self {
                n: vec![4, 8, 16, 32, 64, 128],
                m_rule: MRule::PowersOfTwo,
                s: vec![],
                eta: vec![],
                noise_magnitude: vec![],
                trials: 500,
                ensembles: vec![EnsembleKind::PartialDftIndependent],
                ..base
            },
            Experiment::Fig3 => Self {
                n: vec![1024],
                m_rule: MRule::SLogN,
                s: vec![5, 10, 20, 40],
                eta: vec![0.0],
                trials: 100,
                ensembles: vec![EnsembleKind::NonharmonicFourier],
                ..base
            },
            Experiment::Fig4 => Self {
                n: (1..=10).map(|k| 10 * k).collect(),
                m_rule: MRule::Ratios((1..=10).map(|k| k as f64 / 10.0).collect()),
                s: vec![],
                eta: vec![],
                noise_magnitude: vec![],
                trials: 2000,
                ensembles: vec![EnsembleKind::ChebyshevBos],
                ..base
            },
            Experiment::Fig5 => Self {
                n: vec![500],
                m_rule: MRule::Explicit(vec![100]),
                s: vec![],
                eta: fig5_eta_grid(),
                noise_magnitude: vec![0.0, 1e-3],
                trials: 50,
                ensembles: vec![EnsembleKind::ChebyshevBos],
                ..base
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return bad("n must be a nonempty list of positive sizes".into());
        }
        if self.ensembles.is_empty() {
            return bad("ensembles must be nonempty".into());
        }
        if self.ensembles.contains(&EnsembleKind::CustomIsometry) {
            return bad("custom_isometry cannot be configured from a file".into());
        }
        let e = self.experiment;
        let needs_s = e.is_recovery() || self.m_rule.depends_on_s();
        if needs_s && (self.s.is_empty() || self.s.contains(&0)) {
            return bad(format!("{e} needs a nonempty list of positive s"));
        }
        if (e.is_recovery() || e == Experiment::Fig5) && (self.eta.is_empty() || self.noise_magnitude.is_empty()) {
            return bad(format!("{e} needs nonempty eta and noise_magnitude lists"));
        }
        if self.eta.iter().chain(&self.noise_magnitude).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("eta and noise_magnitude must be finite and >= 0".into());
        }
        if e == Experiment::Fig5 && self.ensembles != [EnsembleKind::ChebyshevBos] {
            return bad("fig5 samples the Chebyshev system only".into());
        }
        if let MRule::Ratios(cs) = &self.m_rule {
            if cs.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
                return bad("m ratios must be positive".into());
            }
        }
        let s_grid: &[usize] = if self.m_rule.depends_on_s() { &self.s } else { &[1] };
        for &n in &self.n {
            for &s in s_grid {
                let ms = self.m_rule.values(n, s);
                if ms.is_empty() || ms.contains(&0) {
                    return bad(format!("m grid is empty or contains 0 for N={n}"));
                }
                for &kind in &self.ensembles {
                    if let Some(&m) = ms.iter().find(|&&m| m > n && kind != EnsembleKind::Gaussian) {
                        return bad(format!("{kind} needs m <= N, got m={m} for N={n}"));
                    }
                }
                if e.is_recovery() {
                    if let Some(&s) = self.s.iter().find(|&&s| s > n) {
                        return bad(format!("s={s} exceeds N={n}"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One row of experiment output. Metric columns not produced by an
/// experiment stay empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: Experiment,
    pub ensemble: EnsembleKind,
    pub trial: usize,
    pub n: usize,
    pub m: usize,
    pub s: Option<usize>,
    pub eta: Option<f64>,
    pub noise: Option<f64>,
    pub recovery_error: Option<f64>,
    pub sigma_min: Option<f64>,
    pub mu_hat: Option<f64>,
    pub xi_hat: Option<f64>,
    pub l2_error: Option<f64>,
    /// Decoder status, or `failed: <reason>` when decoding errored.
    pub status: Option<String>,
    pub iterations: Option<usize>,
    pub seed: u64,
    pub stream: u64,
}

#[derive(Clone, Copy, Debug)]
struct Unit {
    ensemble: EnsembleKind,
    n: usize,
    m: usize,
    s: Option<usize>,
    noise: Option<f64>,
    trial: usize,
}

fn units(cfg: &ExperimentConfig) -> Vec<Unit> {
    let e = cfg.experiment;
    let s_grid: Vec<Option<usize>> = if e.is_recovery() || cfg.m_rule.depends_on_s() {
        cfg.s.iter().map(|&s| Some(s)).collect()
    } else {
        vec![None]
    };
    let noise_grid: Vec<Option<f64>> = if e.is_recovery() || e == Experiment::Fig5 {
        cfg.noise_magnitude.iter().map(|&v| Some(v)).collect()
    } else {
        vec![None]
    };
    let mut out = Vec::new();
    for &ensemble in &cfg.ensembles {
        for &n in &cfg.n {
            for &s in &s_grid {
                for m in cfg.m_rule.values(n, s.unwrap_or(1)) {
                    for &noise in &noise_grid {
                        for trial in 0..cfg.trials {
                            out.push(Unit { ensemble, n, m, s, noise, trial });
                        }
                    }
                }
            }
        }
    }
    out
}

impl Unit {
    /// Independent of the noise level and threshold, so those grids share
    /// their random draws.
    fn stream_id(&self, experiment: Experiment) -> u64 {
        derive_stream_id(&[
            experiment as u64,
            self.ensemble.code(),
            self.n as u64,
            self.m as u64,
            self.s.unwrap_or(0) as u64,
            self.trial as u64,
        ])
    }

    fn record(&self, cfg: &ExperimentConfig, stream: u64) -> ResultRecord {
        ResultRecord {
            experiment: cfg.experiment,
            ensemble: self.ensemble,
            trial: self.trial,
            n: self.n,
            m: self.m,
            s: self.s,
            eta: None,
            noise: self.noise,
            recovery_error: None,
            sigma_min: None,
            mu_hat: None,
            xi_hat: None,
            l2_error: None,
            status: None,
            iterations: None,
            seed: cfg.master_seed,
            stream,
        }
    }
}

fn run_unit(cfg: &ExperimentConfig, unit: &Unit, reference: Option<&[f64]>, opts: &DecodeOptions) -> Result<Vec<ResultRecord>> {
    let id = unit.stream_id(cfg.experiment);
    let mut stream = RandomStream::new(cfg.master_seed, id);
    let base = unit.record(cfg, id);
    let spec = EnsembleSpec::standard(unit.ensemble)?;
    match cfg.experiment {
        Experiment::Fig2 => {
            let a = build_matrix(&spec, unit.m, unit.n, &mut stream)?;
            Ok(vec![ResultRecord { mu_hat: Some(cross_coherence_sample(&a)), ..base }])
        }
        Experiment::Fig4 => {
            let a = build_matrix(&spec, unit.m, unit.n, &mut stream)?;
            Ok(vec![ResultRecord { xi_hat: Some(distortion_sample(&a)), ..base }])
        }
        Experiment::Fig5 => {
            let problem =
                SampledProblem::draw_from(target_function, unit.n, unit.m, unit.noise.unwrap_or(0.0), &mut stream)?;
            let reference = reference.expect("fig5 precomputes reference expansions");
            let decoder = Decoder::new(problem.matrix.entries())?;
            Ok(cfg
                .eta
                .iter()
                .map(|&eta| match decoder.decode(&problem.measurements, eta, opts) {
                    Ok(res) => ResultRecord {
                        eta: Some(eta),
                        l2_error: Some(weighted_l2_error(&res.solution, reference)),
                        status: Some(res.status.name().into()),
                        iterations: Some(res.iterations),
                        ..base.clone()
                    },
                    Err(e) => ResultRecord { eta: Some(eta), status: Some(format!("failed: {e}")), ..base.clone() },
                })
                .collect())
        }
        Experiment::Fig1 | Experiment::Fig3 | Experiment::Custom => {
            let a = build_matrix(&spec, unit.m, unit.n, &mut stream)?;
            let x = sparse_signal(unit.n, unit.s.expect("recovery units carry s"), &mut stream)?;
            let e = noise_vector(a.rows(), unit.noise.unwrap_or(0.0), &mut stream)?;
            let y = a.entries() * &x + e;
            let sigma_min = (cfg.experiment != Experiment::Fig1).then(|| sigma_min_scaled_matrix(&a));
            let decoder = Decoder::for_matrix(&a)?;
            Ok(cfg
                .eta
                .iter()
                .map(|&eta| match decoder.decode(&y, eta, opts) {
                    Ok(res) => ResultRecord {
                        eta: Some(eta),
                        recovery_error: Some((&res.solution - &x).norm()),
                        sigma_min,
                        status: Some(res.status.name().into()),
                        iterations: Some(res.iterations),
                        ..base.clone()
                    },
                    Err(err) => ResultRecord {
                        eta: Some(eta),
                        sigma_min,
                        status: Some(format!("failed: {err}")),
                        ..base.clone()
                    },
                })
                .collect())
        }
    }
}

/// Runs every unit of the sweep with the default decoder options.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    run_experiment_with(cfg, &DecodeOptions::default())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, opts: &DecodeOptions) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let references: Vec<(usize, Vec<f64>)> = if cfg.experiment == Experiment::Fig5 {
        cfg.n
            .iter()
            .map(|&n| Ok((n, reference_expansion(target_function, n)?)))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let units = units(cfg);
    let chunks = units
        .par_iter()
        .map(|unit| {
            let reference = references.iter().find(|(n, _)| *n == unit.n).map(|(_, r)| r.as_slice());
            run_unit(cfg, unit, reference, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// The summary each experiment is usually read through.
pub fn default_summary(experiment: Experiment) -> (Vec<&'static str>, &'static str, Stat) {
    match experiment {
        Experiment::Fig1 | Experiment::Custom => (vec!["ensemble", "eta", "m"], "recovery_error", Stat::Median),
        Experiment::Fig2 => (vec!["n", "m"], "mu_hat", Stat::Mean),
        Experiment::Fig3 => (vec!["s"], "recovery_error", Stat::Median),
        Experiment::Fig4 => (vec!["n", "m"], "xi_hat", Stat::Mean),
        Experiment::Fig5 => (vec!["noise", "eta"], "l2_error", Stat::Median),
    }
}
