use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::boundary::{alpha_max, beta_max, build_grid, closed_form_reference, GridSpec};
use crate::datamodel::{generate_synthetic, load_libsvm, write_libsvm, Dataset, Params, SynthSpec};
use crate::error::SifsError;
use crate::estimation::ReferencePoint;
use crate::harness::{
    compute_metrics, read_records_jsonl, run_path, thread_cap, write_csvs, write_records_jsonl, Metrics, PathConfig,
    RunRecord,
};
use crate::numeric::log_space;
use crate::objective::duality_gap;
use crate::screening::{screen, ScreenOrder, ScreeningMode};
use crate::solver::{solve, SolverConfig};
use crate::verification::{certify, oracle_solve, CertificationReport};

#[derive(Debug, Parser)]
#[command(name = "sifs", version, about = "Safe simultaneous feature and sample screening for sparse SVMs")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve at a single (alpha, beta), optionally screening first.
    Train(Opts),
    /// Run the screening path over a parameter grid.
    Path(Opts),
    /// Run the path with an unscreened oracle and certify every screened set.
    Verify(Opts),
    /// Write a synthetic dataset in LibSVM format.
    Synth(SynthOpts),
    /// Recompute metrics and CSVs from a records file.
    Report(ReportOpts),
}

/// Flags shared by `train`, `path` and `verify`. A JSON file given with
/// `--config` may set any of them (snake_case keys); flags take precedence.
#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Opts {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// LibSVM input, plain or gzip. Without it a synthetic set is generated.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Number of features; inferred from the data when omitted.
    #[arg(long)]
    features: Option<usize>,
    /// Synthetic sample count (default 1000).
    #[arg(long)]
    synth_n: Option<usize>,
    /// Synthetic feature count (default 200).
    #[arg(long)]
    synth_p: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    /// Smoothing parameter of the hinge loss, in (0, 1). Default 0.5.
    #[arg(long)]
    gamma: Option<f64>,
    /// `log:START:END:COUNT` or a comma list of fractions of beta_max.
    #[arg(long)]
    beta_fracs: Option<String>,
    /// `log:START:END:COUNT` or a comma list of fractions of alpha_max(beta).
    #[arg(long)]
    alpha_fracs: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha_frac: Option<f64>,
    #[arg(long)]
    beta_frac: Option<f64>,
    /// Comma list of none, iss, ifs, sifs, or `all`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, value_parser = parse_order)]
    order: Option<ScreenOrder>,
    /// Duality-gap tolerance relative to the objective at zero.
    #[arg(long)]
    gap_tol: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output file (`train`) or directory (`path`, `verify`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    verify: bool,
}

macro_rules! prefer {
    ($a:expr, $b:expr, $($f:ident),*) => { $( if $a.$f.is_none() { $a.$f = $b.$f.clone(); } )* };
}

impl Opts {
    fn resolve(mut self) -> Result<Self, CliError> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let file: Opts =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        prefer!(
            self, file, data, features, synth_n, synth_p, eta, gamma, beta_fracs, alpha_fracs, alpha, beta,
            alpha_frac, beta_frac, mode, order, gap_tol, max_epochs, seed, threads, out
        );
        self.verify |= file.verify;
        Ok(self)
    }

    fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(0.5)
    }

    fn dataset(&self) -> Result<Dataset, SifsError> {
        match &self.data {
            Some(path) => load_libsvm(path, self.features),
            None => {
                let mut spec = SynthSpec::new(self.synth_n.unwrap_or(1000), self.synth_p.unwrap_or(200), self.seed.unwrap_or(0));
                if let Some(eta) = self.eta {
                    spec.eta = eta;
                }
                generate_synthetic(&spec)
            }
        }
    }

    fn solver(&self, gamma: f64) -> SolverConfig {
        let mut cfg = SolverConfig::relative(self.gap_tol.unwrap_or(1e-8), gamma);
        if let Some(m) = self.max_epochs {
            cfg.max_epochs = m;
        }
        cfg.shuffle_seed = self.seed.unwrap_or(cfg.shuffle_seed);
        cfg
    }

    fn modes(&self, default: ScreeningMode) -> Result<Vec<ScreeningMode>, CliError> {
        match self.mode.as_deref() {
            None => Ok(vec![default]),
            Some("all") => Ok(vec![ScreeningMode::None, ScreeningMode::Iss, ScreeningMode::Ifs, ScreeningMode::Sifs]),
            Some(s) => s.split(',').map(|m| parse_mode(m.trim()).map_err(CliError::Usage)).collect(),
        }
    }

    fn grid_spec(&self) -> Result<GridSpec, CliError> {
        let default = GridSpec::default();
        let beta_fracs = self.beta_fracs.as_deref().map(parse_fracs).transpose()?.unwrap_or(default.beta_fracs);
        let alpha_fracs = self.alpha_fracs.as_deref().map(parse_fracs).transpose()?.unwrap_or(default.alpha_fracs);
        let spec = GridSpec { beta_fracs, alpha_fracs };
        spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Args)]
struct SynthOpts {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    mu_scale: Option<f64>,
    #[arg(long)]
    informative_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Destination file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct ReportOpts {
    /// JSON-lines records written by `path`.
    #[arg(long)]
    records: PathBuf,
    /// Records from a verified run supplying oracle counts.
    #[arg(long)]
    oracle: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Run(SifsError),
    Failed(String),
}

impl From<SifsError> for CliError {
    fn from(e: SifsError) -> Self {
        match e {
            SifsError::InvalidParam(m) => CliError::Usage(m),
            other => CliError::Run(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.into())
    }
}

fn parse_mode(s: &str) -> Result<ScreeningMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown mode `{s}` (expected none, iss, ifs, sifs)"))
}

fn parse_order(s: &str) -> Result<ScreenOrder, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown order `{s}` (expected iss-first, ifs-first)"))
}

fn parse_fracs(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("bad fraction list `{s}`"));
    if let Some(rest) = s.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [a, b, c] = parts[..] else { return Err(bad()) };
        let start: f64 = a.parse().map_err(|_| bad())?;
        let end: f64 = b.parse().map_err(|_| bad())?;
        let count: usize = c.parse().map_err(|_| bad())?;
        if !(start > 0.0 && end > 0.0) || count == 0 {
            return Err(bad());
        }
        return Ok(log_space(start, end, count));
    }
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect()
}

/// Parses `argv` (including the program name), runs the command, and returns
/// the process exit code: 0 on success, 2 for usage errors, 1 otherwise.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();

    let result = match cli.command {
        Command::Train(o) => o.resolve().and_then(train),
        Command::Path(o) => o.resolve().and_then(|o| path(o, false)),
        Command::Verify(o) => o.resolve().and_then(|o| path(o, true)),
        Command::Synth(o) => synth(o),
        Command::Report(o) => report(o),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}\n\nFor more information, try '--help'.");
            2
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            1
        }
        Err(CliError::Failed(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(SifsError::from)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => writeln!(std::io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainOutput {
    alpha: f64,
    beta: f64,
    gamma: f64,
    mode: ScreeningMode,
    closed_form: bool,
    screened_features: usize,
    screened_samples: usize,
    triggers: usize,
    epochs: usize,
    primal: f64,
    dual: f64,
    gap: f64,
    /// Nonzero coefficients as `(feature, value)`.
    w: Vec<(usize, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certification: Option<CertificationReport>,
}

fn train(o: Opts) -> Result<(), CliError> {
    let gamma = o.gamma();
    let modes = o.modes(ScreeningMode::Sifs)?;
    let [mode] = modes[..] else { return Err(CliError::Usage("train takes a single mode".into())) };
    let d = o.dataset()?;
    let bmax = beta_max(&d);
    let beta = match (o.beta, o.beta_frac) {
        (Some(b), _) => b,
        (None, f) => f.unwrap_or(0.5) * bmax,
    };
    Params::new(1.0, beta, gamma)?;
    let amax = alpha_max(&d, beta, gamma);
    let alpha = match (o.alpha, o.alpha_frac) {
        (Some(a), _) => a,
        (None, f) => f.unwrap_or(0.5) * if amax > 0.0 { amax } else { 1.0 },
    };
    let prm = Params::new(alpha, beta, gamma)?;
    let cfg = o.solver(gamma);
    cfg.validate()?;

    let (pair, state, triggers, epochs, closed_form) = if alpha >= amax {
        let pair = closed_form_reference(&d, alpha, beta, gamma)?;
        (pair, None, 0, 0, true)
    } else {
        let reference = ReferencePoint { alpha: amax, beta, pair: closed_form_reference(&d, amax, beta, gamma)? };
        let (state, report) = screen(&d, &reference, alpha, gamma, mode, o.order.unwrap_or_default())?;
        let res = solve(&d, &prm, &state, Some(&reference.pair.theta), &cfg)?;
        (res.pair, Some(state), report.total_triggers, res.epochs, false)
    };
    let gap = duality_gap(&d, &pair, &prm)?;
    let certification = match (&state, o.verify) {
        (Some(s), true) => Some(certify(s, &oracle_solve(&d, &prm)?)),
        _ => None,
    };
    let out = TrainOutput {
        alpha,
        beta,
        gamma,
        mode,
        closed_form,
        screened_features: state.as_ref().map_or(0, |s| s.screened_features()),
        screened_samples: state.as_ref().map_or(0, |s| s.screened_samples()),
        triggers,
        epochs,
        primal: gap.primal_value,
        dual: -gap.dual_value,
        gap: gap.gap,
        w: pair.w.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect(),
        certification: certification.clone(),
    };
    emit_json(&out, o.out.as_deref())?;
    if certification.is_some_and(|c| !c.passed()) {
        return Err(CliError::Failed("screening certification found violations".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct PathSummary {
    n: usize,
    p: usize,
    gamma: f64,
    beta_max: f64,
    grid_points: usize,
    config: PathConfig,
    metrics: Metrics,
}

#[derive(Serialize)]
struct Certification {
    points: usize,
    violations: usize,
    failures: usize,
    violating_points: Vec<(ScreeningMode, usize, usize)>,
}

fn path(o: Opts, force_verify: bool) -> Result<(), CliError> {
    let gamma = o.gamma();
    let modes = o.modes(ScreeningMode::Sifs)?;
    let spec = o.grid_spec()?;
    let verify = o.verify || force_verify;
    let mut cfg = PathConfig::new(gamma);
    cfg.solver = o.solver(gamma);
    cfg.order = o.order.unwrap_or_default();
    cfg.verify = verify;
    cfg.threads = o.threads.or_else(thread_cap);
    cfg.solver.validate()?;
    crate::datamodel::validate_gamma(gamma)?;

    let d = o.dataset()?;
    let grid = build_grid(&d, &spec, gamma)?;
    let mut records: Vec<RunRecord> = Vec::new();
    for &mode in &modes {
        log::info!("running mode {mode} over {} points", grid.len());
        records.extend(run_path(&d, &grid, mode, &cfg, false)?);
    }
    let metrics = compute_metrics(&records, None);
    let summary = PathSummary {
        n: d.n(),
        p: d.p(),
        gamma,
        beta_max: grid.beta_max,
        grid_points: grid.len(),
        config: cfg,
        metrics,
    };
    let cert = verify.then(|| Certification {
        points: records.iter().filter(|r| r.oracle.is_some()).count(),
        violations: records.iter().filter_map(|r| r.oracle.as_ref()).map(|x| x.violations).sum(),
        failures: records.iter().filter(|r| r.error.is_some()).count(),
        violating_points: records
            .iter()
            .filter(|r| r.oracle.as_ref().is_some_and(|x| x.violations > 0))
            .map(|r| (r.mode, r.j, r.i))
            .collect(),
    });

    match &o.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            write_records_jsonl(dir.join("records.jsonl"), &records)?;
            write_csvs(dir, &summary.metrics)?;
            emit_json(&summary, Some(&dir.join("summary.json")))?;
            if let Some(c) = &cert {
                emit_json(c, Some(&dir.join("certification.json")))?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            for r in &records {
                serde_json::to_writer(&mut stdout, r).map_err(SifsError::from)?;
                writeln!(stdout)?;
            }
            drop(stdout);
            emit_json(&summary.metrics.modes, None)?;
            if let Some(c) = &cert {
                emit_json(c, None)?;
            }
        }
    }
    if let Some(c) = cert {
        if c.violations > 0 {
            return Err(CliError::Failed(format!("{} screening violations", c.violations)));
        }
    }
    Ok(())
}

fn synth(o: SynthOpts) -> Result<(), CliError> {
    let mut spec = match &o.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => SynthSpec::default(),
    };
    spec.n = o.n.unwrap_or(spec.n);
    spec.p = o.p.unwrap_or(spec.p);
    spec.eta = o.eta.unwrap_or(spec.eta);
    spec.mu_scale = o.mu_scale.unwrap_or(spec.mu_scale);
    spec.informative_fraction = o.informative_fraction.unwrap_or(spec.informative_fraction);
    spec.seed = o.seed.unwrap_or(spec.seed);
    let d = generate_synthetic(&spec)?;
    match &o.out {
        Some(p) => write_libsvm(p, &d)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(crate::datamodel::serialize_libsvm(&d).as_bytes())?;
        }
    }
    Ok(())
}

fn report(o: ReportOpts) -> Result<(), CliError> {
    let records = read_records_jsonl(&o.records)?;
    let oracle = o.oracle.as_ref().map(read_records_jsonl).transpose()?;
    let metrics = compute_metrics(&records, oracle.as_deref());
    match &o.out {
        Some(dir) => {
            write_csvs(dir, &metrics)?;
            emit_json(&metrics, Some(&dir.join("metrics.json")))?;
        }
        None => emit_json(&metrics, None)?,
    }
    Ok(())
}
