//! Command-line front end.
//!
//! Four subcommands: `simulate` writes a synthetic data set, `denoise` runs
//! the pipeline on a matrix file, `evaluate` scores a reconstruction and
//! `experiment` sweeps the benchmark grid described by a JSON config.
//!
//! Exit codes: 0 success, 1 I/O or run failure, 2 invalid arguments.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::diffusion::Bandwidth;
use crate::error::{Error, Result};
use crate::eval::{self, ExperimentReport};
use crate::io;
use crate::numerics::DataMatrix;
use crate::pipeline::{self, GlobalMode, PipelineConfig};
use crate::shrinkage;
use crate::synth::{self, Latent, ManifoldKind, ManifoldSpec, NoiseKind, NoiseSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

/// Environment variable holding the default output directory.
pub const OUTPUT_DIR_ENV: &str = "ROSDOS_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "rosdos",
    version,
    about = "Manifold denoising under high-dimensional noise"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a noisy synthetic manifold data set.
    Simulate(SimulateArgs),
    /// Denoise the samples in a matrix file.
    Denoise(DenoiseArgs),
    /// Score a reconstruction against the clean samples.
    Evaluate(EvaluateArgs),
    /// Run the benchmark grid described by a JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ManifoldArg {
    M1,
    M3,
}

impl From<ManifoldArg> for ManifoldKind {
    fn from(m: ManifoldArg) -> Self {
        match m {
            ManifoldArg::M1 => ManifoldKind::M1,
            ManifoldArg::M3 => ManifoldKind::M3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Gaussian,
    Separable,
}

impl From<NoiseArg> for NoiseKind {
    fn from(m: NoiseArg) -> Self {
        match m {
            NoiseArg::Gaussian => NoiseKind::Gaussian,
            NoiseArg::Separable => NoiseKind::Separable,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Roseland,
    GlobalShrink,
    ShrinkOnly,
}

impl From<ModeArg> for GlobalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Roseland => GlobalMode::Roseland,
            ModeArg::GlobalShrink => GlobalMode::GlobalShrink,
            ModeArg::ShrinkOnly => GlobalMode::ShrinkOnly,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "m1")]
    pub manifold: ManifoldArg,
    #[arg(long, default_value_t = 200)]
    pub p: usize,
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub noise: NoiseArg,
    /// Noise enters as Ξ / p^alpha.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = OUTPUT_DIR_ENV, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct DenoiseArgs {
    /// Matrix file, one sample per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Denoised matrix; defaults to denoised.csv in the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Diagnostics JSON; defaults to diagnostics.json next to the output.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    #[arg(long, env = OUTPUT_DIR_ENV, default_value = ".")]
    pub output_dir: PathBuf,
    #[arg(long, value_enum, default_value = "roseland")]
    pub mode: ModeArg,
    /// Candidate neighbors from the global metric.
    #[arg(long = "K", default_value_t = 100)]
    pub big_k: usize,
    /// Neighbors averaged (by median) into each output point.
    #[arg(long = "k", default_value_t = 20)]
    pub k: usize,
    /// Kernel bandwidth: `auto` or a positive number.
    #[arg(long = "h", default_value = "auto", value_parser = parse_bandwidth)]
    pub h: Bandwidth,
    /// Landmark exponent.
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// Embedding dimension.
    #[arg(long, default_value_t = 10)]
    pub q: usize,
    /// Diffusion time.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Imputed noise eigenvalues per shrinkage call.
    #[arg(long = "k-imp", default_value_t = 10)]
    pub k_imp: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Remove the column mean before shrinking.
    #[arg(long)]
    pub center: bool,
}

impl DenoiseArgs {
    pub fn config(&self) -> PipelineConfig {
        PipelineConfig {
            global_mode: self.mode.into(),
            bandwidth: self.h,
            gamma: self.gamma,
            embed_dim: self.q,
            diffusion_time: self.t,
            global_neighbors: self.big_k,
            local_neighbors: self.k,
            imputation_count: self.k_imp,
            center: self.center,
            seed: self.seed,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long)]
    pub denoised: PathBuf,
    /// Noisy input; enables the noise ratio and mSNR fields.
    #[arg(long)]
    pub noisy: Option<PathBuf>,
    /// Report JSON; defaults to report.json in the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, env = OUTPUT_DIR_ENV, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long, env = OUTPUT_DIR_ENV)]
    pub output_dir: Option<PathBuf>,
}

fn parse_bandwidth(s: &str) -> std::result::Result<Bandwidth, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Bandwidth::Auto);
    }
    match s.parse::<f64>() {
        Ok(h) if h > 0.0 && h.is_finite() => Ok(Bandwidth::Fixed(h)),
        _ => Err(format!("expected `auto` or a positive number, got {s:?}")),
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Parse(_) | Error::Json(_) | Error::Numerical(_) => EXIT_IO,
        _ => EXIT_INVALID,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Denoise(a) => cmd_denoise(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Deterministic 64-bit seed for a labelled sub-task.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b)
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn read_matrix(path: &Path) -> Result<DataMatrix> {
    with_path(path, io::read_matrix_file(path))
}

fn echo_header(command: &str, echo: &serde_json::Value) -> Vec<String> {
    vec![format!("rosdos {command}"), echo.to_string()]
}

fn write_latent(path: &Path, latent: &Latent, header: &[String]) -> Result<()> {
    let m = match latent {
        Latent::Angles(a) => DataMatrix::from_row_major(1, a.len(), a)?,
        Latent::Klein(ts) => {
            let mut v: Vec<f64> = ts.iter().map(|t| t.0).collect();
            v.extend(ts.iter().map(|t| t.1));
            DataMatrix::from_row_major(2, ts.len(), &v)?
        }
    };
    io::write_matrix_file(path, &m, header)
}

/// Metadata written next to a simulated data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationMetadata {
    pub manifold: ManifoldSpec,
    pub noise: NoiseSpec,
    pub msnr_db: f64,
    pub seed: u64,
    pub files: Vec<String>,
}

/// Manifold and noise specs used by `simulate` for a master seed.
pub fn simulation_specs(
    manifold: ManifoldKind,
    noise: NoiseKind,
    p: usize,
    n: usize,
    alpha: f64,
    seed: u64,
) -> (ManifoldSpec, NoiseSpec) {
    (
        ManifoldSpec {
            kind: manifold,
            p,
            n,
            seed: derive_seed(seed, "manifold"),
        },
        NoiseSpec {
            kind: noise,
            alpha,
            seed: derive_seed(seed, "noise"),
        },
    )
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let (ms, ns) = simulation_specs(a.manifold.into(), a.noise.into(), a.p, a.n, a.alpha, a.seed);
    let data = synth::make_dataset(&ms, &ns)?;
    std::fs::create_dir_all(&a.output_dir)?;
    let files = ["clean.csv", "noisy.csv", "latent.csv"];
    let meta = SimulationMetadata {
        manifold: ms,
        noise: ns,
        msnr_db: data.msnr_db,
        seed: a.seed,
        files: files.iter().map(|s| s.to_string()).collect(),
    };
    let header = echo_header("simulate", &serde_json::to_value(&meta)?);
    io::write_matrix_file(&a.output_dir.join(files[0]), &data.clean, &header)?;
    io::write_matrix_file(&a.output_dir.join(files[1]), &data.noisy, &header)?;
    write_latent(&a.output_dir.join(files[2]), &data.latent, &header)?;
    io::write_json(&a.output_dir.join("metadata.json"), &meta)?;
    println!("mSNR {:.2} dB", data.msnr_db);
    Ok(())
}

fn cmd_denoise(a: &DenoiseArgs) -> Result<()> {
    let cfg = a.config();
    // Reject bad flags before touching the input.
    if !(1 <= cfg.local_neighbors && cfg.local_neighbors < cfg.global_neighbors) {
        return Err(Error::InvalidArgument(format!(
            "neighbor counts must satisfy 1 <= k < K, got k = {}, K = {}",
            cfg.local_neighbors, cfg.global_neighbors
        )));
    }
    let x = read_matrix(&a.input)?;
    let out = pipeline::rosdos(&x, &cfg)?;
    let output = a
        .output
        .clone()
        .unwrap_or_else(|| a.output_dir.join("denoised.csv"));
    let diagnostics = a.diagnostics.clone().unwrap_or_else(|| {
        output
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("diagnostics.json")
    });
    for path in [&output, &diagnostics] {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
    }
    let echo = json!({ "input": a.input, "pipeline": cfg });
    io::write_matrix_file(&output, &out.denoised, &echo_header("denoise", &echo))?;
    io::write_json(
        &diagnostics,
        &json!({ "config_echo": echo, "diagnostics": out.diagnostics }),
    )?;
    let d = &out.diagnostics;
    println!(
        "denoised {} samples in {:.2}s ({} fallbacks)",
        x.cols(),
        d.total_seconds,
        d.fallback_count
    );
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let start = Instant::now();
    let clean = read_matrix(&a.clean)?;
    let denoised = read_matrix(&a.denoised)?;
    let noise = match &a.noisy {
        Some(path) => {
            let noisy = read_matrix(path)?;
            if noisy.rows() != clean.rows() || noisy.cols() != clean.cols() {
                return Err(Error::DimensionMismatch(format!(
                    "noisy is {}x{}, clean is {}x{}",
                    noisy.rows(),
                    noisy.cols(),
                    clean.rows(),
                    clean.cols()
                )));
            }
            Some(DataMatrix::new(noisy.as_matrix() - clean.as_matrix())?)
        }
        None => None,
    };
    let echo = json!({ "clean": a.clean, "denoised": a.denoised, "noisy": a.noisy });
    let report = eval::summarize(
        &clean,
        &denoised,
        noise.as_ref(),
        start.elapsed().as_secs_f64(),
        echo,
    )?;
    let output = a
        .output
        .clone()
        .unwrap_or_else(|| a.output_dir.join("report.json"));
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    io::write_json(&output, &report)?;
    println!("median NRMSE {:.4}", report.nrmse_median);
    Ok(())
}

/// Reference methods run alongside the denoiser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// The noisy samples themselves.
    Raw,
    /// Truncated SVD at the effective rank found by global shrinkage.
    Tsvd,
    /// Global eOptShrink estimate.
    GlobalShrink,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::Raw => "raw",
            Baseline::Tsvd => "tsvd",
            Baseline::GlobalShrink => "global-shrink",
        }
    }
}

/// JSON config for `experiment`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub p: usize,
    pub n: usize,
    pub manifolds: Vec<ManifoldKind>,
    pub noises: Vec<NoiseKind>,
    pub alphas: Vec<f64>,
    pub pipeline: PipelineConfig,
    pub baselines: Vec<Baseline>,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            p: 200,
            n: 5000,
            manifolds: vec![ManifoldKind::M1, ManifoldKind::M3],
            noises: vec![NoiseKind::Gaussian, NoiseKind::Separable],
            alphas: vec![1.0, 0.5, 1.0 / 3.0],
            pipeline: PipelineConfig::default(),
            baselines: vec![Baseline::Raw, Baseline::Tsvd, Baseline::GlobalShrink],
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.manifolds.is_empty() || self.noises.is_empty() || self.alphas.is_empty() {
            return Err(Error::invalid(
                "manifolds, noises and alphas must be non-empty",
            ));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return Err(Error::invalid(format!(
                "alpha must be finite and >= 0, got {a}"
            )));
        }
        if self.p < 5 {
            return Err(Error::invalid(format!(
                "p must be at least 5, got {}",
                self.p
            )));
        }
        self.pipeline.validate(self.n)
    }

    /// Grid cells in a fixed order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &manifold in &self.manifolds {
            for &noise in &self.noises {
                for &alpha in &self.alphas {
                    cells.push(Cell {
                        manifold,
                        noise,
                        alpha,
                    });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub manifold: ManifoldKind,
    pub noise: NoiseKind,
    pub alpha: f64,
}

impl Cell {
    /// Directory-safe identifier, also the seed label.
    pub fn id(&self) -> String {
        format!(
            "{}-{}-a{:.4}",
            self.manifold.name(),
            self.noise.name(),
            self.alpha
        )
    }
}

struct MethodRow {
    method: &'static str,
    report: Option<ExperimentReport>,
}

fn run_cell(cfg: &ExperimentConfig, cell: &Cell, dir: &Path) -> Result<Vec<MethodRow>> {
    let cell_seed = derive_seed(cfg.seed, &cell.id());
    let (ms, ns) = simulation_specs(
        cell.manifold,
        cell.noise,
        cfg.p,
        cfg.n,
        cell.alpha,
        cell_seed,
    );
    let data = synth::make_dataset(&ms, &ns)?;
    let pipe = PipelineConfig {
        seed: cell_seed,
        ..cfg.pipeline.clone()
    };
    let echo = |method: &str| {
        json!({
            "cell": cell.id(),
            "method": method,
            "manifold": ms,
            "noise": ns,
            "pipeline": pipe,
            "master_seed": cfg.seed,
        })
    };
    std::fs::create_dir_all(dir)?;
    let mut rows = Vec::new();

    let start = Instant::now();
    let out = pipeline::rosdos(&data.noisy, &pipe)?;
    let report = eval::summarize(
        &data.clean,
        &out.denoised,
        Some(&data.noise),
        start.elapsed().as_secs_f64(),
        echo("rosdos"),
    )?;
    io::write_json(&dir.join("rosdos.json"), &report)?;
    io::write_json(&dir.join("diagnostics.json"), &out.diagnostics)?;
    rows.push(MethodRow {
        method: "rosdos",
        report: Some(report),
    });

    let mut global: Option<shrinkage::ShrinkageOutput> = None;
    for &b in &cfg.baselines {
        let start = Instant::now();
        let estimate = match b {
            Baseline::Raw => Ok(data.noisy.clone()),
            Baseline::Tsvd | Baseline::GlobalShrink => {
                if global.is_none() {
                    global = shrinkage::eoptshrink(&data.noisy, pipe.imputation_count, pipe.center)
                        .map_err(|e| log::warn!("{}: global shrinkage failed: {e}", cell.id()))
                        .ok();
                }
                match (&global, b) {
                    (Some(g), Baseline::Tsvd) => eval::baseline_tsvd(&data.noisy, g.effective_rank),
                    (Some(g), _) => Ok(g.denoised.clone()),
                    (None, _) => Err(Error::Numerical("global shrinkage failed".into())),
                }
            }
        };
        let report = estimate.and_then(|est| {
            eval::summarize(
                &data.clean,
                &est,
                Some(&data.noise),
                start.elapsed().as_secs_f64(),
                echo(b.name()),
            )
        });
        match report {
            Ok(r) => {
                io::write_json(&dir.join(format!("{}.json", b.name())), &r)?;
                rows.push(MethodRow {
                    method: b.name(),
                    report: Some(r),
                });
            }
            Err(e) => {
                log::warn!("{}: baseline {} failed: {e}", cell.id(), b.name());
                rows.push(MethodRow {
                    method: b.name(),
                    report: None,
                });
            }
        }
    }
    Ok(rows)
}

fn methods(cfg: &ExperimentConfig) -> Vec<&'static str> {
    std::iter::once("rosdos")
        .chain(cfg.baselines.iter().map(|b| b.name()))
        .collect()
}

fn csv_field(v: Option<f64>) -> String {
    v.map(io::format_value).unwrap_or_default()
}

/// Runs every cell of `cfg` into `out_dir`; returns the number of cells
/// that succeeded.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<usize> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    io::write_json(&out_dir.join("config.json"), cfg)?;

    let mut summary = String::from(
        "manifold,noise,alpha,method,status,nrmse_median,nrmse_mean,noise_ratio_median,msnr_db\n",
    );
    let mut failures = Vec::new();
    let mut ok = 0;
    for cell in cfg.cells() {
        let id = cell.id();
        log::info!("running cell {id}");
        let prefix = format!(
            "{},{},{},",
            cell.manifold.name(),
            cell.noise.name(),
            io::format_value(cell.alpha)
        );
        match run_cell(cfg, &cell, &out_dir.join(&id)) {
            Ok(rows) => {
                ok += 1;
                for row in rows {
                    match row.report {
                        Some(r) => writeln!(
                            summary,
                            "{prefix}{},ok,{},{},{},{}",
                            row.method,
                            io::format_value(r.nrmse_median),
                            io::format_value(r.nrmse_mean),
                            csv_field(r.noise_ratio_median),
                            csv_field(r.msnr_db),
                        ),
                        None => writeln!(summary, "{prefix}{},failed,,,,", row.method),
                    }
                    .expect("writing to a String");
                }
            }
            Err(e) => {
                eprintln!("cell {id} failed: {e}");
                failures.push(json!({ "cell": id, "error": e.to_string() }));
                for m in methods(cfg) {
                    writeln!(summary, "{prefix}{m},failed,,,,").expect("writing to a String");
                }
            }
        }
    }
    std::fs::write(out_dir.join("summary.csv"), summary)?;
    io::write_json(&out_dir.join("failures.json"), &failures)?;
    Ok(ok)
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<()> {
    let cfg: ExperimentConfig =
        with_path(&a.config, io::read_json(&a.config)).map_err(|e| match e {
            Error::Json(j) => Error::InvalidArgument(format!("bad experiment config: {j}")),
            other => other,
        })?;
    let out_dir = a
        .output_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let total = cfg.cells().len();
    let ok = run_experiment(&cfg, &out_dir)?;
    println!("{ok} of {total} cells succeeded");
    if ok == 0 {
        return Err(Error::Numerical("every experiment cell failed".into()));
    }
    Ok(())
}
