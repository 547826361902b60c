//! `qite` command-line front end.
//!
//! Every command writes plain CSV files plus one `manifest.json` into its output
//! directory. Exit codes: 0 success, 1 algorithmic failure, 2 usage or I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{self, CHEMICAL_ACCURACY};
use crate::error::Error;
use crate::ham_io::ProblemDocument;
use crate::measurement::ShotSettings;
use crate::pauli::PauliSum;
use crate::pool::{build_uccsd_pool, OperatorPool};
use crate::qite::{
    self, ChannelRun, Method, Normalization, QiteConfig, RunStatus, ShotMode, Trajectory,
};
use crate::statevector::{exact_diagonalize_capped, StateVector};

pub const OUT_DIR_ENV: &str = "QITE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "qite",
    version,
    about = "Quantum imaginary time evolution experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trajectory (or a drift channel) on a problem file.
    Run(RunCmd),
    /// Repeat runs over bond lengths, truncation thresholds or time steps.
    Sweep(SweepCmd),
    /// Diagnostics of the linear system along a finished run.
    Analyze(AnalyzeCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ite,
    Qite,
    Drift,
    DriftChannel,
    Deterministic,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ite => Method::ExactIte,
            MethodArg::Qite => Method::FullQite,
            MethodArg::Drift => Method::DriftSinglePath,
            MethodArg::DriftChannel => Method::DriftChannel,
            MethodArg::Deterministic => Method::Deterministic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShotModeArg {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    Auto,
    FirstOrder,
    Exact,
}

/// Algorithm settings shared by `run` and `sweep`.
#[derive(Debug, Clone, Args)]
pub struct AlgoArgs {
    #[arg(long, value_enum, default_value = "qite")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    /// Singular values of S at or below this are discarded.
    #[arg(long = "truncate", default_value_t = 0.05)]
    pub truncate: f64,
    /// Trajectories averaged by drift-channel.
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "exact")]
    pub shot_mode: ShotModeArg,
    /// Precision target for the per-step shot budget (sampled mode).
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub shots_s: u64,
    #[arg(long, default_value_t = 100_000)]
    pub shots_b: u64,
    #[arg(long, default_value_t = 10_000)]
    pub shots_c: u64,
    #[arg(long, default_value_t = 10_000)]
    pub shots_observable: u64,
    /// Energy-tracker reduction ratio; 0 disables the tracker.
    #[arg(long, default_value_t = 0)]
    pub gamma: usize,
    #[arg(long, value_enum, default_value = "auto")]
    pub normalization: NormalizationArg,
    #[arg(long, default_value_t = crate::pauli::DEFAULT_ORACLE_CAP)]
    pub oracle_cap: usize,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl AlgoArgs {
    fn config(&self) -> Result<QiteConfig, CliError> {
        let method: Method = self.method.into();
        if self.paths.is_some() && method != Method::DriftChannel {
            return Err(CliError::Usage(
                "--paths only applies to --method drift-channel".into(),
            ));
        }
        if self.epsilon.is_some() && self.shot_mode != ShotModeArg::Sampled {
            return Err(CliError::Usage(
                "--epsilon requires --shot-mode sampled".into(),
            ));
        }
        let cfg = QiteConfig {
            dt: self.dt,
            n_steps: self.steps,
            truncation_threshold: self.truncate,
            method,
            n_paths: self.paths.unwrap_or(if method == Method::DriftChannel {
                10
            } else {
                1
            }),
            seed: self.seed,
            shot_mode: match self.shot_mode {
                ShotModeArg::Exact => ShotMode::Exact,
                ShotModeArg::Sampled => ShotMode::Sampled,
            },
            shots: ShotSettings {
                epsilon: self.epsilon,
                n_shots_s: self.shots_s,
                n_shots_b: self.shots_b,
                n_shots_c: self.shots_c,
                n_shots_observable: self.shots_observable,
            },
            gamma: self.gamma,
            normalization: match self.normalization {
                NormalizationArg::Auto => Normalization::Auto,
                NormalizationArg::FirstOrder => Normalization::FirstOrder,
                NormalizationArg::Exact => Normalization::Exact,
            },
            oracle_cap: self.oracle_cap,
            ..QiteConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct RunCmd {
    #[arg(long)]
    pub hamiltonian: PathBuf,
    #[command(flatten)]
    pub algo: AlgoArgs,
    #[arg(long, env = OUT_DIR_ENV, default_value = "qite-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Bondlength,
    Threshold,
    Dt,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    #[arg(long, value_enum)]
    pub sweep: SweepKind,
    /// Problem files; patterns such as `fixtures/lih_*.json` are expanded.
    #[arg(long, required = true, num_args = 1..)]
    pub hamiltonian: Vec<String>,
    /// Thresholds for `--sweep threshold`.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<f64>,
    /// Time steps for `--sweep dt`; the total time `--dt × --steps` is held fixed.
    #[arg(long, value_delimiter = ',')]
    pub dts: Vec<f64>,
    #[command(flatten)]
    pub algo: AlgoArgs,
    #[arg(long, env = OUT_DIR_ENV, default_value = "qite-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalysisKind {
    Spectrum,
    Correlation,
    Sensitivity,
}

#[derive(Debug, Args)]
pub struct AnalyzeCmd {
    #[arg(long, value_enum)]
    pub analyze: AnalysisKind,
    /// Output directory of a previous `run`.
    #[arg(long)]
    pub run: PathBuf,
    /// Step whose state is analysed; defaults to the last recorded step.
    #[arg(long)]
    pub step: Option<usize>,
    /// Defaults to `<run>/analysis-<kind>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Algorithm(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Algorithm(_) => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Algorithm(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::SingularSystem { .. } | Error::FixedPoint | Error::SeriesNonConvergence(_) => {
                CliError::Algorithm(e.to_string())
            }
            Error::Io(_) | Error::Schema { .. } => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub inputs: Vec<InputRecord>,
    pub config: QiteConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<serde_json::Value>,
    pub seed: u64,
    pub outputs: Vec<String>,
    pub status: String,
    pub summary: serde_json::Value,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    /// SHA-256 over `blob <len>\0<bytes>`, as git hashes file contents.
    pub content_hash: String,
}

/// Git-style content hash (SHA-256 object format).
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

struct Problem {
    path: PathBuf,
    doc: ProblemDocument,
    hash: String,
    h: PauliSum,
    pool: OperatorPool,
    reference: StateVector,
}

impl Problem {
    fn load(path: &Path) -> Result<Self, CliError> {
        let bytes =
            std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| CliError::Io(format!("{}: not UTF-8", path.display())))?;
        let doc = ProblemDocument::parse(&text).map_err(|e| match e {
            Error::Schema { path: p, message } => {
                CliError::Io(format!("{}: {p}: {message}", path.display()))
            }
            other => other.into(),
        })?;
        let h = doc.hamiltonian()?;
        let reference = doc.reference()?;
        let pool = match doc.pool()? {
            Some(p) => p,
            None => {
                let n_e = doc.reference_state.chars().filter(|c| *c == '1').count();
                build_uccsd_pool(doc.n_qubits, n_e)?
            }
        };
        Ok(Self {
            path: path.to_path_buf(),
            doc,
            hash: content_hash(&bytes),
            h,
            pool,
            reference,
        })
    }

    fn record(&self) -> InputRecord {
        InputRecord {
            path: self.path.display().to_string(),
            content_hash: self.hash.clone(),
        }
    }

    /// Exact ground energy when the register fits the oracle, else the file's FCI value.
    fn reference_energy(&self, cap: usize) -> Result<f64, CliError> {
        if self.doc.n_qubits <= cap {
            Ok(exact_diagonalize_capped(&self.h, cap)?.0)
        } else {
            Ok(self.doc.metadata.fci_energy.unwrap_or(f64::NAN))
        }
    }
}

/// Locale-independent shortest round-trip formatting.
fn num(x: f64) -> String {
    format!("{x}")
}

struct CsvOut {
    dir: PathBuf,
    files: Vec<String>,
}

impl CsvOut {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn write(
        &mut self,
        name: &str,
        header: &[&str],
        rows: Vec<Vec<String>>,
    ) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.dir)?;
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn manifest(&self, m: &Manifest) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(m).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(self.dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

const TRAJECTORY_HEADER: [&str; 9] = [
    "step",
    "time",
    "energy",
    "chosen_pauli",
    "angle",
    "a_l1_norm",
    "c",
    "kappa",
    "n_truncated",
];

fn trajectory_rows(t: &Trajectory) -> Vec<Vec<String>> {
    t.records
        .iter()
        .map(|r| {
            vec![
                r.step.to_string(),
                num(r.time),
                num(r.energy),
                r.chosen.to_string(),
                num(r.angle),
                num(r.a_l1_norm),
                num(r.c),
                num(r.kappa),
                r.n_truncated.to_string(),
            ]
        })
        .collect()
}

fn status_name(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Completed => "completed",
        RunStatus::Converged => "converged",
        RunStatus::Singular => "singular",
    }
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    #[cfg(feature = "parallel")]
    {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            if n == 0 {
                return Err(CliError::Usage("--threads must be at least 1".into()));
            }
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        pool.install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

enum RunResult {
    Single(Trajectory),
    Channel(ChannelRun),
}

impl RunResult {
    fn primary(&self) -> &Trajectory {
        match self {
            RunResult::Single(t) => t,
            RunResult::Channel(c) => &c.paths[0],
        }
    }

    fn final_energy(&self) -> f64 {
        match self {
            RunResult::Single(t) => t.final_energy(),
            RunResult::Channel(c) => c.final_mean_energy(),
        }
    }

    fn status(&self) -> RunStatus {
        match self {
            RunResult::Single(t) => t.status,
            RunResult::Channel(c) => {
                if c.paths.iter().any(|p| p.status == RunStatus::Singular) {
                    RunStatus::Singular
                } else {
                    c.paths[0].status
                }
            }
        }
    }
}

fn execute_config(p: &Problem, cfg: &QiteConfig) -> Result<RunResult, CliError> {
    Ok(if cfg.method == Method::DriftChannel {
        RunResult::Channel(qite::run_channel(&p.h, &p.pool, &p.reference, cfg)?)
    } else {
        RunResult::Single(qite::run_trajectory(&p.h, &p.pool, &p.reference, cfg)?)
    })
}

fn cmd_run(cmd: &RunCmd) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = cmd.algo.config()?;
    let problem = Problem::load(&cmd.hamiltonian)?;
    let result = with_threads(cmd.algo.threads, || execute_config(&problem, &cfg))?;
    let e_ref = problem.reference_energy(cfg.oracle_cap)?;

    let mut out = CsvOut::new(&cmd.out);
    match &result {
        RunResult::Single(t) => {
            out.write("trajectory.csv", &TRAJECTORY_HEADER, trajectory_rows(t))?;
        }
        RunResult::Channel(c) => {
            out.write(
                "trajectory.csv",
                &TRAJECTORY_HEADER,
                trajectory_rows(&c.paths[0]),
            )?;
            for (k, t) in c.paths.iter().enumerate().skip(1) {
                out.write(
                    &format!("trajectory_path{k:03}.csv"),
                    &TRAJECTORY_HEADER,
                    trajectory_rows(t),
                )?;
            }
            let rows = c
                .summary
                .iter()
                .map(|p| {
                    vec![
                        p.step.to_string(),
                        num(p.time),
                        num(p.mean_energy),
                        num(p.std_energy),
                    ]
                })
                .collect();
            out.write(
                "channel.csv",
                &["step", "time", "mean_energy", "std_energy"],
                rows,
            )?;
        }
    }
    let primary = result.primary();
    if !primary.tracker.is_empty() {
        let rows = primary
            .tracker
            .iter()
            .map(|r| {
                vec![
                    r.step.to_string(),
                    num(r.estimate),
                    num(r.exact),
                    cfg.gamma.to_string(),
                ]
            })
            .collect();
        out.write(
            "tracker.csv",
            &["step", "tracker_estimate", "exact_value", "gamma"],
            rows,
        )?;
    }
    let final_energy = result.final_energy();
    let status = result.status();
    let summary = serde_json::json!({
        "final_energy": final_energy,
        "reference_energy": finite_or_null(e_ref),
        "error_vs_reference": finite_or_null(final_energy - e_ref),
        "steps_taken": primary.records.last().map(|r| r.step).unwrap_or(0),
        "steps_to_chemical_accuracy": primary.steps_to_accuracy(e_ref, CHEMICAL_ACCURACY),
        "c_floor_hits": primary.c_floor_hits,
    });
    out.manifest(&Manifest {
        command: "run".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        inputs: vec![problem.record()],
        config: cfg.clone(),
        sweep: None,
        seed: cfg.seed,
        outputs: out.files.clone(),
        status: status_name(status).into(),
        summary,
        wall_time_s: start.elapsed().as_secs_f64(),
    })?;
    println!(
        "{}: final energy {final_energy:.10} Ha ({})",
        problem.path.display(),
        status_name(status)
    );
    if status == RunStatus::Singular {
        return Err(CliError::Algorithm(
            "every singular value fell below the truncation threshold".into(),
        ));
    }
    Ok(())
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        serde_json::Value::Null
    }
}

fn expand_inputs(patterns: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for pat in patterns {
        if pat.contains(['*', '?', '[']) {
            let mut hits: Vec<PathBuf> = glob::glob(pat)
                .map_err(|e| CliError::Usage(format!("bad pattern `{pat}`: {e}")))?
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| CliError::Io(e.to_string()))?;
            hits.sort();
            out.extend(hits);
        } else {
            out.push(PathBuf::from(pat));
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("the sweep matched no problem files".into()));
    }
    Ok(out)
}

struct SweepRow {
    parameter: f64,
    energy: f64,
    error: f64,
    steps_to_ca: Option<usize>,
    extra: Vec<f64>,
}

fn cmd_sweep(cmd: &SweepCmd) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = cmd.algo.config()?;
    let paths = expand_inputs(&cmd.hamiltonian)?;
    let problems = paths
        .iter()
        .map(|p| Problem::load(p))
        .collect::<Result<Vec<_>, _>>()?;

    let (rows, header_extra, sweep_meta): (Vec<SweepRow>, Vec<&str>, serde_json::Value) =
        with_threads(cmd.algo.threads, || match cmd.sweep {
            SweepKind::Bondlength => {
                let mut rows = Vec::new();
                for (i, p) in problems.iter().enumerate() {
                    let e_ref = p.reference_energy(cfg.oracle_cap)?;
                    let r = execute_config(p, &cfg)?;
                    rows.push(SweepRow {
                        parameter: p.doc.metadata.bond_length.unwrap_or(i as f64),
                        energy: r.final_energy(),
                        error: (r.final_energy() - e_ref).abs(),
                        steps_to_ca: r.primary().steps_to_accuracy(e_ref, CHEMICAL_ACCURACY),
                        extra: vec![],
                    });
                }
                rows.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
                Ok((rows, vec![], serde_json::json!({"kind": "bondlength"})))
            }
            SweepKind::Threshold => {
                let [p] = problems.as_slice() else {
                    return Err(CliError::Usage(
                        "a threshold sweep takes one problem file".into(),
                    ));
                };
                if cmd.thresholds.is_empty() {
                    return Err(CliError::Usage("--thresholds is empty".into()));
                }
                let e_ref = p.reference_energy(cfg.oracle_cap)?;
                let mut rows = Vec::new();
                for &t in &cmd.thresholds {
                    let c = QiteConfig {
                        truncation_threshold: t,
                        ..cfg.clone()
                    };
                    let r = execute_config(p, &c)?;
                    rows.push(SweepRow {
                        parameter: t,
                        energy: r.final_energy(),
                        error: (r.final_energy() - e_ref).abs(),
                        steps_to_ca: r.primary().steps_to_accuracy(e_ref, CHEMICAL_ACCURACY),
                        extra: vec![],
                    });
                }
                Ok((
                    rows,
                    vec![],
                    serde_json::json!({"kind": "threshold", "thresholds": cmd.thresholds}),
                ))
            }
            SweepKind::Dt => {
                let [p] = problems.as_slice() else {
                    return Err(CliError::Usage("a dt sweep takes one problem file".into()));
                };
                if cmd.dts.is_empty() {
                    return Err(CliError::Usage("--dts is empty".into()));
                }
                let e_ref = p.reference_energy(cfg.oracle_cap)?;
                let total = cfg.total_time();
                let mut rows = Vec::new();
                for &dt in &cmd.dts {
                    let n_steps = (total / dt).round() as usize;
                    let c = QiteConfig {
                        dt,
                        n_steps,
                        ..cfg.clone()
                    };
                    c.validate()?;
                    let r = execute_config(p, &c)?;
                    let q = QiteConfig {
                        method: Method::FullQite,
                        n_paths: 1,
                        gamma: 0,
                        ..c.clone()
                    };
                    let e_qite =
                        qite::run_trajectory(&p.h, &p.pool, &p.reference, &q)?.final_energy();
                    rows.push(SweepRow {
                        parameter: dt,
                        energy: r.final_energy(),
                        error: (r.final_energy() - e_ref).abs(),
                        steps_to_ca: r.primary().steps_to_accuracy(e_ref, CHEMICAL_ACCURACY),
                        extra: vec![e_qite, (r.final_energy() - e_qite).abs()],
                    });
                }
                Ok((
                    rows,
                    vec!["qite_energy", "discrepancy"],
                    serde_json::json!({"kind": "dt", "dts": cmd.dts, "total_time": total}),
                ))
            }
        })?;

    let mut header = vec![
        "parameter",
        "final_energy",
        "error_vs_ed",
        "steps_to_chemical_accuracy",
    ];
    header.extend(header_extra);
    let csv_rows = rows
        .iter()
        .map(|r| {
            let mut v = vec![
                num(r.parameter),
                num(r.energy),
                num(r.error),
                r.steps_to_ca.map(|s| s as i64).unwrap_or(-1).to_string(),
            ];
            v.extend(r.extra.iter().map(|x| num(*x)));
            v
        })
        .collect();
    let mut out = CsvOut::new(&cmd.out);
    out.write("sweep.csv", &header, csv_rows)?;
    out.manifest(&Manifest {
        command: "sweep".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        inputs: problems.iter().map(Problem::record).collect(),
        config: cfg.clone(),
        sweep: Some(sweep_meta),
        seed: cfg.seed,
        outputs: out.files.clone(),
        status: "completed".into(),
        summary: serde_json::json!({"points": rows.len()}),
        wall_time_s: start.elapsed().as_secs_f64(),
    })?;
    println!(
        "{} sweep points written to {}",
        rows.len(),
        cmd.out.display()
    );
    Ok(())
}

fn cmd_analyze(cmd: &AnalyzeCmd) -> Result<(), CliError> {
    let start = Instant::now();
    let manifest_path = cmd.run.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| CliError::Io(format!("{}: {e}", manifest_path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Io(format!("{}: {e}", manifest_path.display())))?;
    if manifest.command != "run" {
        return Err(CliError::Usage(
            "analysis needs the output of `qite run`".into(),
        ));
    }
    let input = manifest
        .inputs
        .first()
        .ok_or_else(|| CliError::Io("manifest lists no input".into()))?;
    let problem = Problem::load(Path::new(&input.path))?;
    if problem.hash != input.content_hash {
        return Err(CliError::Io(format!(
            "{} changed since the run (hash mismatch)",
            input.path
        )));
    }
    let mut cfg = manifest.config.clone();
    if let Some(k) = cmd.step {
        if k > cfg.n_steps {
            return Err(CliError::Usage(format!(
                "--step {k} is beyond the run's {} steps",
                cfg.n_steps
            )));
        }
        cfg.n_steps = k;
    }
    // replay path 0 deterministically up to the requested step
    let single = QiteConfig {
        method: if cfg.method == Method::DriftChannel {
            Method::DriftSinglePath
        } else {
            cfg.method
        },
        n_paths: 1,
        ..cfg.clone()
    };
    let (p, threads) = (&problem, cmd.threads);
    let run = with_threads(threads, || {
        Ok(qite::run_trajectory(&p.h, &p.pool, &p.reference, &single)?)
    })?;
    let step = run.records.last().map(|r| r.step).unwrap_or(0);
    let state = &run.final_state;
    let kind = match cmd.analyze {
        AnalysisKind::Spectrum => "spectrum",
        AnalysisKind::Correlation => "correlation",
        AnalysisKind::Sensitivity => "sensitivity",
    };
    let out_dir = cmd
        .out
        .clone()
        .unwrap_or_else(|| cmd.run.join(format!("analysis-{kind}")));
    let mut out = CsvOut::new(&out_dir);
    let sys = qite::build_linear_system(state, &problem.pool, &problem.h, cfg.dt, false)?;
    let summary = match cmd.analyze {
        AnalysisKind::Spectrum => {
            let rep = analysis::spectrum_at_step(step, &sys);
            let rows = rep
                .singular_values
                .iter()
                .enumerate()
                .map(|(i, s)| vec![i.to_string(), num(*s)])
                .collect();
            out.write("spectrum.csv", &["index", "singular_value"], rows)?;
            serde_json::json!({
                "step": step,
                "kappa": finite_or_null(rep.kappa),
                "count_above_threshold": rep.count_above(cfg.truncation_threshold),
            })
        }
        AnalysisKind::Correlation => {
            let rep = analysis::correlation_matrix(state, &problem.pool)?;
            let rows = rep
                .pairs()
                .map(|(i, j, d, s)| vec![i.to_string(), j.to_string(), d.to_string(), num(s)])
                .collect();
            out.write("correlation.csv", &["i", "j", "d", "s_prime"], rows)?;
            match rep.fit {
                Some(f) => serde_json::json!({
                    "step": step, "alpha": f.alpha, "xi": finite_or_null(f.xi),
                    "slope": f.slope, "n_pairs": f.n_pairs,
                }),
                None => {
                    serde_json::json!({"step": step, "fit": "skipped: no pair at non-zero distance"})
                }
            }
        }
        AnalysisKind::Sensitivity => {
            let mut rng = qite::path_rng(cfg.seed, u64::MAX);
            let mut rows = Vec::new();
            let mut kappa = f64::NAN;
            for delta in [1e-10, 1e-8, 1e-6, 1e-4] {
                let rep = analysis::sensitivity_probe(&sys, delta, delta, cmd.trials, &mut rng)?;
                kappa = rep.kappa;
                rows.push(vec![
                    num(delta),
                    num(rep.kappa),
                    num(rep.max_random_ratio),
                    num(rep.adversarial_ratio),
                ]);
            }
            out.write(
                "sensitivity.csv",
                &[
                    "relative_perturbation",
                    "kappa",
                    "max_random_ratio",
                    "adversarial_ratio",
                ],
                rows,
            )?;
            serde_json::json!({"step": step, "kappa": finite_or_null(kappa)})
        }
    };
    out.manifest(&Manifest {
        command: format!("analyze {kind}"),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        inputs: vec![problem.record()],
        config: cfg.clone(),
        sweep: None,
        seed: cfg.seed,
        outputs: out.files.clone(),
        status: "completed".into(),
        summary,
        wall_time_s: start.elapsed().as_secs_f64(),
    })?;
    println!("{kind} analysis written to {}", out_dir.display());
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Analyze(c) => cmd_analyze(c),
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
