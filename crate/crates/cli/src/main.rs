//! `qcbp`: command-line access to the decoder, the certificates and the
//! experiment sweeps.
//!
//! Exit status is 0 on success, 1 for invalid arguments or configuration
//! and 2 for filesystem failures.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use qcbp_core::analysis::{
    bos_measurement_bound, budget_constants, christoffel_chebyshev, christoffel_chebyshev_closed, cross_coherence,
    distortion, error_budget, nsp_from_rip, quotient_bounds, quotient_empirical, rip_constant, sv_deviation_empirical,
    CertificateReport, LogFactor, RipMode,
};
use qcbp_core::ensembles::{
    build_matrix, noise_vector, read_matrix, sparse_signal, write_matrix, EnsembleKind, EnsembleSpec, MatrixMetadata,
};
use qcbp_core::harness::{
    default_summary, run_experiment, summarize, write_records, write_summary, write_svg, Experiment,
    ExperimentConfig,
};
use qcbp_core::polyapprox::{approximate, l2_error, target_function, L2Mode};
use qcbp_core::rng::{derive_stream_id, RandomStream};
use qcbp_core::solver::{qcbp_decode, DecodeOptions, DecodeResult};
use qcbp_core::{CVector, Error};

#[derive(Parser)]
#[command(name = "qcbp", version, about = "Sparse recovery by quadratically-constrained basis pursuit")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted (required by gen-matrix).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Number of Monte-Carlo trials.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write an SVG chart of the default summary.
    #[arg(long, global = true)]
    svg: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sensing matrix and store it with its JSON sidecar.
    GenMatrix(MatrixArgs),
    /// Decode measurements, or a synthetic sparse instance when `--y` is omitted.
    Decode(DecodeArgs),
    /// Compute a recovery certificate.
    #[command(subcommand)]
    Certify(Certify),
    /// Evaluate the constant formulas and measurement bounds.
    #[command(subcommand)]
    Bound(Bound),
    /// Approximate the builtin function from random Chebyshev samples.
    Approx(ApproxArgs),
    /// Run an experiment sweep and write its records as CSV.
    Experiment {
        #[arg(value_enum)]
        name: ExperimentName,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentName {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Custom,
}

impl From<ExperimentName> for Experiment {
    fn from(e: ExperimentName) -> Self {
        match e {
            ExperimentName::Fig1 => Experiment::Fig1,
            ExperimentName::Fig2 => Experiment::Fig2,
            ExperimentName::Fig3 => Experiment::Fig3,
            ExperimentName::Fig4 => Experiment::Fig4,
            ExperimentName::Fig5 => Experiment::Fig5,
            ExperimentName::Custom => Experiment::Custom,
        }
    }
}

#[derive(Args)]
struct MatrixArgs {
    /// Ensemble name, e.g. gaussian, partial_dft_subset, chebyshev_bos.
    #[arg(long, value_parser = parse_kind)]
    ensemble: EnsembleKind,
    #[arg(short)]
    m: usize,
    #[arg(short = 'n', long = "dim")]
    n: usize,
}

#[derive(Args)]
struct DecodeArgs {
    /// Matrix container written by gen-matrix.
    #[arg(long)]
    matrix: PathBuf,
    /// JSON array of reals or of [re, im] pairs.
    #[arg(long)]
    y: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// Sparsity of the synthetic signal when `--y` is omitted.
    #[arg(short, default_value_t = 5)]
    s: usize,
    /// Noise norm of the synthetic instance.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol_rel: Option<f64>,
}

#[derive(Subcommand)]
enum Certify {
    /// Restricted isometry constant of a stored matrix.
    Rip {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(short)]
        s: usize,
        /// Sample this many supports instead of enumerating all of them.
        #[arg(long)]
        sampled: Option<usize>,
    },
    /// Bounds and an empirical estimate of the l1-quotient.
    Quotient {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        lambda: f64,
        /// Entry bound K; read from the sidecar when omitted.
        #[arg(long)]
        k: Option<f64>,
        #[arg(long, default_value_t = 16)]
        directions: usize,
    },
    /// Monte-Carlo cross coherence.
    Mu(MatrixArgs),
    /// Monte-Carlo distortion.
    Xi(MatrixArgs),
    /// Singular value deviation against its coherence bound.
    SvDeviation(MatrixArgs),
    /// Christoffel function of the Chebyshev system.
    Christoffel {
        #[arg(short = 'n', long = "dim")]
        n: usize,
        #[arg(short)]
        t: f64,
    },
}

#[derive(Subcommand)]
enum Bound {
    /// Null space constants from a restricted isometry constant.
    Nsp {
        #[arg(long)]
        delta: f64,
    },
    /// Error budget constants, and the budget itself when `--sigma` is given.
    Budget {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        q1: f64,
        /// Best s-term l1 error of the signal.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(short, default_value_t = 1)]
        s: usize,
        #[arg(short, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        /// Noise norm.
        #[arg(long, default_value_t = 0.0)]
        err: f64,
    },
    /// Measurements sufficient for RIP of a bounded orthonormal system.
    Measurements {
        #[arg(short = 'n', long = "dim")]
        n: usize,
        #[arg(short)]
        s: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(short, default_value_t = 1.0)]
        k: f64,
        #[arg(long, value_enum, default_value = "primary")]
        variant: Variant,
        /// Stand-in for the universal constant.
        #[arg(short, default_value_t = 1.0)]
        c: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Primary,
    Alternative,
}

#[derive(Args)]
struct ApproxArgs {
    #[arg(short = 'n', long = "dim", default_value_t = 500)]
    n: usize,
    #[arg(short, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 1e-3)]
    eta: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
}

fn parse_kind(name: &str) -> Result<EnsembleKind, String> {
    EnsembleKind::from_name(name).ok_or_else(|| {
        let known: Vec<_> = EnsembleKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown ensemble '{name}' (known: {})", known.join(", "))
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Error::Io { path: "<stdout>".into(), source: e })
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Error> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Measurements {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

fn read_measurements(path: &Path) -> Result<CVector, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    let values: Vec<Complex64> = match serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    {
        Measurements::Real(v) => v.into_iter().map(|re| Complex64::new(re, 0.0)).collect(),
        Measurements::Complex(v) => v,
    };
    Ok(CVector::from_vec(values))
}

#[derive(Serialize)]
struct DecodeReport {
    #[serde(flatten)]
    result: DecodeResultJson,
    /// Present for synthetic instances.
    recovery_error: Option<f64>,
}

#[derive(Serialize)]
struct DecodeResultJson {
    solution: Vec<Complex64>,
    residual_norm: f64,
    objective: f64,
    status: String,
    iterations: usize,
}

impl From<DecodeResult> for DecodeResultJson {
    fn from(r: DecodeResult) -> Self {
        Self {
            solution: r.solution.iter().copied().collect(),
            residual_norm: r.residual_norm,
            objective: r.objective,
            status: r.status.name().into(),
            iterations: r.iterations,
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.as_deref();
    match cli.command {
        Command::GenMatrix(args) => {
            let path = out.ok_or_else(|| Error::Config("gen-matrix needs --out".into()))?;
            let spec = EnsembleSpec::standard(args.ensemble)?;
            let id = derive_stream_id(&[args.ensemble.code(), args.m as u64, args.n as u64]);
            let a = build_matrix(&spec, args.m, args.n, &mut RandomStream::new(seed, id))?;
            write_matrix(path, &a)?;
            emit(None, &to_json(&MatrixMetadata::of(&a))?)
        }
        Command::Decode(args) => {
            let (a, _) = read_matrix(&args.matrix)?;
            let mut opts = DecodeOptions::default();
            if let Some(k) = args.max_iter {
                opts.max_iter = k;
            }
            if let Some(t) = args.tol_rel {
                opts.tol_rel = t;
            }
            let (y, x) = match &args.y {
                Some(path) => (read_measurements(path)?, None),
                None => {
                    let mut stream = RandomStream::new(seed, derive_stream_id(&[0xdec0, a.nrows() as u64, a.ncols() as u64]));
                    let x = sparse_signal(a.ncols(), args.s, &mut stream)?;
                    let e = noise_vector(a.nrows(), args.noise, &mut stream)?;
                    (&a * &x + e, Some(x))
                }
            };
            let res = qcbp_decode(&a, &y, args.eta, &opts)?;
            let recovery_error = x.map(|x| (&res.solution - x).norm());
            emit(out, &to_json(&DecodeReport { result: res.into(), recovery_error })?)
        }
        Command::Certify(c) => {
            let trials = cli.trials.unwrap_or(500);
            let report = certify(c, seed, trials)?;
            emit(out, &(report.to_json()? + "\n"))
        }
        Command::Bound(b) => emit(out, &bound(b)?),
        Command::Approx(args) => {
            let res = approximate(target_function, args.n, args.m, args.eta, args.noise, seed, &DecodeOptions::default())?;
            #[derive(Serialize)]
            struct Report<'a> {
                #[serde(flatten)]
                approximation: &'a qcbp_core::polyapprox::ExpansionApproximation,
                l2_error_weighted: f64,
                l2_error_unweighted: f64,
            }
            let report = Report {
                l2_error_weighted: l2_error(&res.coefficients, target_function, L2Mode::Weighted)?,
                l2_error_unweighted: l2_error(&res.coefficients, target_function, L2Mode::Unweighted)?,
                approximation: &res,
            };
            emit(out, &to_json(&report)?)
        }
        Command::Experiment { name } => {
            let experiment = Experiment::from(name);
            let mut cfg = match &cli.config {
                Some(path) => {
                    let text =
                        std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
                    let cfg = ExperimentConfig::from_json(&text)
                        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                    if cfg.experiment != experiment {
                        return Err(Error::Config(format!(
                            "config is for {} but {experiment} was requested",
                            cfg.experiment
                        )));
                    }
                    cfg
                }
                None => ExperimentConfig::preset(experiment),
            };
            if let Some(t) = cli.trials {
                cfg.trials = t;
            }
            if let Some(s) = cli.seed {
                cfg.master_seed = s;
            }
            if let Some(path) = &cli.out {
                cfg.output_path = Some(path.clone());
            }
            cfg.validate()?;
            let records = run_experiment(&cfg)?;
            match &cfg.output_path {
                Some(path) => {
                    qcbp_core::harness::write_csv(path, &records)?;
                    let (group, metric, stat) = default_summary(experiment);
                    if !records.is_empty() {
                        let table = summarize(&records, &group, metric, stat)?;
                        write_summary(std::io::stdout().lock(), &table)
                            .map_err(|e| Error::Csv { path: "<stdout>".into(), source: e })?;
                    }
                }
                None => write_records(std::io::stdout().lock(), &records)
                    .map_err(|e| Error::Csv { path: "<stdout>".into(), source: e })?,
            }
            if let Some(svg) = &cli.svg {
                let (group, metric, stat) = default_summary(experiment);
                write_svg(svg, &summarize(&records, &group, metric, stat)?)?;
            }
            Ok(())
        }
    }
}

fn certify(c: Certify, seed: u64, trials: usize) -> Result<CertificateReport, Error> {
    let spec_of = |args: &MatrixArgs| EnsembleSpec::standard(args.ensemble);
    Ok(match c {
        Certify::Rip { matrix, s, sampled } => {
            let (a, _) = read_matrix(&matrix)?;
            let mode = sampled.map_or(RipMode::Exhaustive, |trials| RipMode::Sampled { trials });
            CertificateReport::Rip(rip_constant(&a, s, mode, &mut RandomStream::new(seed, 0x71b))?)
        }
        Certify::Quotient { matrix, lambda, k, directions } => {
            let (a, meta) = read_matrix(&matrix)?;
            let k = k.or(meta.and_then(|m| m.k));
            let mut bounds = quotient_bounds(&a, lambda, k)?;
            let mut stream = RandomStream::new(seed, 0x9e0);
            bounds.empirical = Some(quotient_empirical(&a, lambda, directions, &mut stream, &DecodeOptions::default())?);
            CertificateReport::Quotient(bounds)
        }
        Certify::Mu(args) => CertificateReport::CrossCoherence(cross_coherence(&spec_of(&args)?, args.m, args.n, trials, seed)?),
        Certify::Xi(args) => CertificateReport::Distortion(distortion(&spec_of(&args)?, args.m, args.n, trials, seed)?),
        Certify::SvDeviation(args) => {
            CertificateReport::SvDeviation(sv_deviation_empirical(&spec_of(&args)?, args.m, args.n, trials, seed)?)
        }
        Certify::Christoffel { n, t } => {
            if n == 0 || !(-1.0..=1.0).contains(&t) {
                return Err(Error::InvalidArgument(format!("need N >= 1 and t in [-1, 1], got N={n}, t={t}")));
            }
            CertificateReport::Christoffel {
                n,
                t,
                sum: christoffel_chebyshev(t, n),
                closed_form: christoffel_chebyshev_closed(t, n),
            }
        }
    })
}

fn bound(b: Bound) -> Result<String, Error> {
    match b {
        Bound::Nsp { delta } => to_json(&nsp_from_rip(delta)?),
        Bound::Budget { rho, tau, q1, sigma, s, p, eta, err } => {
            let consts = budget_constants(rho, tau, q1)?;
            let budget = sigma.map(|sigma| error_budget(&consts, sigma, s, p, eta, err)).transpose()?;
            #[derive(Serialize)]
            struct Report {
                #[serde(rename = "C")]
                c: f64,
                #[serde(rename = "D")]
                d: f64,
                #[serde(rename = "E")]
                e: f64,
                budget: Option<f64>,
            }
            to_json(&Report { c: consts.c, d: consts.d, e: consts.e, budget })
        }
        Bound::Measurements { n, s, eps, delta, k, variant, c } => {
            let variant = match variant {
                Variant::Primary => LogFactor::Primary,
                Variant::Alternative => LogFactor::Alternative,
            };
            to_json(&bos_measurement_bound(n, s, eps, delta, k, variant, c)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
