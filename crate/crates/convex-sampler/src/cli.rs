//! Argument parsing and the four run modes of the `convex-sampler` binary.
//!
//! Exit codes: 0 success, 1 runtime failure (including failed audits),
//! 2 usage error, 3 body violates `B(0,1) ⊆ K`, 4 iteration or rejection
//! budget exceeded.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use convex_sampler_core::bodies::{validate_geometry, BuiltinBody, ConvexBody};
use convex_sampler_core::linalg::norm_sq;
use convex_sampler_core::sampler::{
    chain_rng, default_iterations, warm_start, Divergence, FailurePolicy, RgoBackend,
    SamplerConfig, WarmStart,
};
use convex_sampler_core::walks::Walk;
use convex_sampler_core::Error as CoreError;
use thiserror::Error;

use crate::diagnostics::{
    analytic_marginals, audit_rejection_bounds, divergence_trend, CellGrid, DiagnosticsError,
    DiagnosticsReport, MIN_TREND_CHAINS,
};
use crate::formats::{load_body, write_jsonl, FormatError, RunSummary, TotalsJson};
use crate::runner::{parallel_map, run_chains, MultiChainRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Projection,
    Separation,
    #[value(name = "inandout")]
    InAndOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WarmArg {
    Exact,
    #[value(name = "unitball")]
    UnitBall,
    Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sample,
    Diagnose,
    Audit,
    BaselineCompare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Halt,
    Restart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DivergenceArg {
    Renyi,
    Chi2,
}

/// Uniform sampling from convex bodies with the proximal sampler.
#[derive(Debug, Clone, Parser)]
#[command(name = "convex-sampler", version)]
pub struct Args {
    /// Body file (JSON).
    #[arg(long)]
    pub body: PathBuf,
    /// Restricted Gaussian oracle backend.
    #[arg(long, value_enum, default_value_t = BackendArg::Projection)]
    pub rgo: BackendArg,
    /// Step size; defaults to 1/d².
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    /// Iterations per chain; defaults to the schedule for the requested accuracy.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub chains: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start distribution; defaults to exact when the body supports it, else unitball.
    #[arg(long, value_enum)]
    pub warm: Option<WarmArg>,
    /// Start point for `--warm point`, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub point: Option<Vec<f64>>,
    /// Warmness M of the start, when known to the caller.
    #[arg(long)]
    pub warmness: Option<f64>,
    /// Target accuracy for the default iteration count.
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = DivergenceArg::Chi2)]
    pub divergence: DivergenceArg,
    #[arg(long, default_value_t = 2.0)]
    pub renyi_order: f64,
    /// Constant c of the iteration schedule.
    #[arg(long, default_value_t = 1.0)]
    pub schedule_constant: f64,
    /// Output file: JSONL samples, or CSV in baseline-compare mode. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Diagnostics/audit JSON report. Defaults to stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Sample)]
    pub mode: ModeArg,
    /// Maximum rejections per RGO call.
    #[arg(long)]
    pub rejection_cap: Option<u64>,
    /// Maximum attempts per In-and-Out call; defaults to ceil(d² ln d) + 10.
    #[arg(long)]
    pub inandout_cap: Option<u64>,
    #[arg(long, value_enum, default_value_t = PolicyArg::Halt)]
    pub inandout_policy: PolicyArg,
    /// Grid cells per axis for binned tests.
    #[arg(long, default_value_t = 10)]
    pub cells: usize,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("body does not contain the unit ball (certified inradius {0})")]
    A1Violation(f64),
    #[error("budget exceeded: {0}")]
    Budget(CoreError),
    #[error(transparent)]
    Sampler(CoreError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("audit failed: {0}")]
    AuditFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::A1Violation(_) => 3,
            CliError::Budget(_) => 4,
            _ => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::A1Violation { inradius } => CliError::A1Violation(inradius),
            CoreError::BudgetExceeded { .. } | CoreError::RejectionBudgetExceeded { .. } => {
                CliError::Budget(e)
            }
            other => CliError::Sampler(other),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io_err(context: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        context: context.display().to_string(),
        source,
    }
}

/// Validated run description.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub body_path: PathBuf,
    pub body: BuiltinBody,
    pub config: SamplerConfig,
    pub chains: u64,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub mode: ModeArg,
    pub cells: usize,
}

impl RunManifest {
    pub fn from_args(args: &Args) -> Result<Self, CliError> {
        let body = load_body(&args.body).map_err(|e| match e {
            FormatError::Body(CoreError::A1Violation { inradius }) => {
                CliError::A1Violation(inradius)
            }
            other => usage(other.to_string()),
        })?;
        let dim = body.dim();
        let geometry = validate_geometry(&body)?;
        let mut config = SamplerConfig::for_dim(dim);

        if let Some(eta) = args.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(usage(format!("--eta must be positive, got {eta}")));
            }
            config.eta = eta;
        }
        if args.chains == 0 {
            return Err(usage("--chains must be at least 1"));
        }
        if args.cells == 0 {
            return Err(usage("--cells must be at least 1"));
        }
        config.backend = match args.rgo {
            BackendArg::Projection => RgoBackend::Projection,
            BackendArg::Separation => RgoBackend::Separation,
            BackendArg::InAndOut => RgoBackend::InAndOut,
        };
        let warm = args.warm.unwrap_or(if body.capabilities().exact_uniform {
            WarmArg::Exact
        } else {
            WarmArg::UnitBall
        });
        config.warm_start = match (warm, &args.point) {
            (WarmArg::Exact, _) => WarmStart::ExactUniform,
            (WarmArg::UnitBall, _) => WarmStart::UnitBallUniform,
            (WarmArg::Point, Some(p)) => WarmStart::FixedPoint(p.clone()),
            (WarmArg::Point, None) => return Err(usage("--warm point needs --point")),
        };
        if let Some(m) = args.warmness {
            if !(m >= 1.0 && m.is_finite()) {
                return Err(usage("--warmness must be at least 1"));
            }
            config.warmness = Some(m);
        }
        if !(args.epsilon > 0.0) {
            return Err(usage("--epsilon must be positive"));
        }
        config.epsilon = args.epsilon;
        config.divergence = match args.divergence {
            DivergenceArg::Renyi => Divergence::Renyi,
            DivergenceArg::Chi2 => Divergence::ChiSquared,
        };
        config.renyi_order = args.renyi_order;
        config.schedule_constant = args.schedule_constant;
        if let Some(cap) = args.rejection_cap {
            if cap == 0 {
                return Err(usage("--rejection-cap must be at least 1"));
            }
            config.rgo.rejection_cap = cap;
        }
        if let Some(cap) = args.inandout_cap {
            if cap == 0 {
                return Err(usage("--inandout-cap must be at least 1"));
            }
            config.inandout_cap = Some(cap);
        }
        config.inandout_policy = match args.inandout_policy {
            PolicyArg::Halt => FailurePolicy::Halt,
            PolicyArg::Restart => FailurePolicy::Restart,
        };
        config.seed = args.seed;
        config.iterations = match args.iters {
            Some(k) => k,
            None => default_iterations(&geometry, &config)
                .map_err(|e| usage(format!("{e}; pass --iters explicitly")))?,
        };
        config.validate_for(&body).map_err(|e| match e {
            CoreError::InvalidConfig(_)
            | CoreError::CapabilityMissing(_)
            | CoreError::DimensionMismatch { .. } => usage(e.to_string()),
            other => other.into(),
        })?;
        Ok(RunManifest {
            body_path: args.body.clone(),
            body,
            config,
            chains: args.chains,
            out: args.out.clone(),
            report: args.report.clone(),
            mode: args.mode,
            cells: args.cells,
        })
    }
}

/// Path of the telemetry summary written next to `out`.
pub fn summary_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".summary.json");
    PathBuf::from(s)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_err(p))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut w = open_output(path)?;
    let ctx = path.unwrap_or(Path::new("<stdout>"));
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(ctx)(e.into()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(ctx))
}

fn summary(m: &RunManifest, run: &MultiChainRun) -> RunSummary {
    RunSummary {
        body: m.body.kind().into(),
        dim: m.body.dim(),
        backend: m.config.backend.name().into(),
        eta: m.config.eta,
        iterations: m.config.iterations,
        chains: m.chains,
        seed: m.config.seed,
        warmness: m.config.known_warmness(),
        totals: TotalsJson::from(&run.totals),
        per_chain: run
            .chains
            .iter()
            .map(|c| TotalsJson::from(&c.totals))
            .collect(),
        wall_clock_seconds: run.wall_clock.as_secs_f64(),
    }
}

/// Writes the JSONL stream and, when it goes to a file, the summary next to it.
fn emit_samples(m: &RunManifest, run: &MultiChainRun, to_stdout: bool) -> Result<(), CliError> {
    let s = summary(m, run);
    match &m.out {
        Some(out) => {
            let mut w = open_output(Some(out))?;
            for c in &run.chains {
                write_jsonl(&mut w, &c.records).map_err(io_err(out))?;
            }
            w.flush().map_err(io_err(out))?;
            write_json(Some(&summary_path(out)), &s)?;
        }
        None if to_stdout => {
            let mut w = open_output(None)?;
            for c in &run.chains {
                write_jsonl(&mut w, &c.records).map_err(io_err(Path::new("<stdout>")))?;
            }
            w.flush().map_err(io_err(Path::new("<stdout>")))?;
        }
        None => {}
    }
    log::info!(
        "{} chains x {} iterations in {:.3}s, mean rejections {:.4}, oracle calls {}",
        m.chains,
        m.config.iterations,
        s.wall_clock_seconds,
        s.totals.mean_rejections,
        s.totals.oracle_calls
    );
    Ok(())
}

fn run_sampler(m: &RunManifest) -> Result<MultiChainRun, CliError> {
    log::info!(
        "{} body d={} backend={} eta={} iterations={} chains={}",
        m.body.kind(),
        m.body.dim(),
        m.config.backend.name(),
        m.config.eta,
        m.config.iterations,
        m.chains
    );
    Ok(run_chains(&m.body, &m.config, m.chains)?)
}

/// Goodness-of-fit tests on the final iterates, the rejection audits and,
/// with enough chains, the divergence trend over all iterations.
pub fn diagnose(m: &RunManifest, run: &MultiChainRun) -> Result<DiagnosticsReport, CliError> {
    let mut report = DiagnosticsReport {
        audits: audit_rejection_bounds(&run.totals, &m.config, m.body.dim()),
        ..Default::default()
    };
    let finals = run.final_points();
    match analytic_marginals(&m.body) {
        Ok(marg) => report.tests.extend(marg.ks_tests(&finals)?),
        Err(e) => log::warn!("skipping KS tests: {e}"),
    }
    let grid = match CellGrid::for_body(&m.body, m.cells) {
        Ok(g) => Some(g),
        Err(e) => {
            log::warn!("skipping binned tests: {e}");
            None
        }
    };
    if let Some(grid) = grid {
        let counts = grid.counts(&finals)?;
        let mut g = crate::diagnostics::pearson_chi2(&counts, grid.probabilities())?;
        g.test_name = "grid_chi2_uniformity".into();
        report.tests.push(g);
        if finals.len() >= MIN_TREND_CHAINS {
            let mut groups = vec![(0, run.chains.iter().map(|c| c.start.clone()).collect())];
            for k in 0..m.config.iterations {
                let pts = run.chains.iter().map(|c| c.records[k].x.clone()).collect();
                groups.push((k + 1, pts));
            }
            report.trend = divergence_trend(&groups, &grid)?;
        } else {
            log::warn!("skipping divergence trend: fewer than {MIN_TREND_CHAINS} chains");
        }
    }
    Ok(report)
}

/// One row of the baseline comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub walk: String,
    pub steps: u64,
    pub oracle_calls: u64,
    /// `|mean ‖X‖² − E‖X‖²|` over the second half of every chain; `None`
    /// without an analytic moment.
    pub moment_error: Option<f64>,
}

fn pooled_moment(chains: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for series in chains {
        for v in &series[series.len() / 2..] {
            sum += v;
            n += 1;
        }
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Runs the ASF chains and both baseline walks from the same start points
/// for the same number of steps.
pub fn baseline_compare(m: &RunManifest) -> Result<Vec<BaselineRow>, CliError> {
    let target = analytic_marginals(&m.body).ok().map(|a| a.second_moment());
    let err = |series: &[Vec<f64>]| target.map(|t| (pooled_moment(series) - t).abs());
    let steps = m.chains * m.config.iterations as u64;

    let run = run_sampler(m)?;
    let asf: Vec<Vec<f64>> = run
        .chains
        .iter()
        .map(|c| c.records.iter().map(|r| norm_sq(&r.x)).collect())
        .collect();
    let mut rows = vec![BaselineRow {
        walk: format!("asf-{}", m.config.backend.name()),
        steps,
        oracle_calls: run.totals.oracle_calls(),
        moment_error: err(&asf),
    }];

    for walk in [Walk::ball_walk(m.body.dim()), Walk::HitAndRun] {
        let per_chain = parallel_map(m.chains as usize, |i| {
            let mut rng = chain_rng(m.config.seed, i as u64);
            let mut x = warm_start(&m.body, &m.config, &mut rng)?;
            let mut series = Vec::with_capacity(m.config.iterations);
            let mut calls = 0;
            for _ in 0..m.config.iterations {
                let s = walk.step(&m.body, &x, &mut rng)?;
                calls += s.membership_calls;
                x = s.point;
                series.push(norm_sq(&x));
            }
            Ok::<_, CoreError>((series, calls))
        })?;
        let calls = per_chain.iter().map(|(_, c)| c).sum();
        let series: Vec<Vec<f64>> = per_chain.into_iter().map(|(s, _)| s).collect();
        rows.push(BaselineRow {
            walk: walk.name().into(),
            steps,
            oracle_calls: calls,
            moment_error: err(&series),
        });
    }
    Ok(rows)
}

pub fn write_baseline_csv<W: Write>(w: &mut W, rows: &[BaselineRow]) -> io::Result<()> {
    writeln!(w, "walk,steps,oracle_calls,moment_error")?;
    for r in rows {
        let e = r.moment_error.map(|e| e.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{}", r.walk, r.steps, r.oracle_calls, e)?;
    }
    Ok(())
}

pub fn run(m: &RunManifest) -> Result<(), CliError> {
    match m.mode {
        ModeArg::Sample => {
            let run = run_sampler(m)?;
            emit_samples(m, &run, true)
        }
        ModeArg::Diagnose => {
            let run = run_sampler(m)?;
            emit_samples(m, &run, false)?;
            let report = diagnose(m, &run)?;
            write_json(m.report.as_deref(), &report)
        }
        ModeArg::Audit => {
            let run = run_sampler(m)?;
            emit_samples(m, &run, false)?;
            let report = DiagnosticsReport {
                audits: audit_rejection_bounds(&run.totals, &m.config, m.body.dim()),
                ..Default::default()
            };
            write_json(m.report.as_deref(), &report)?;
            for a in &report.audits {
                match &a.skipped {
                    Some(reason) => log::warn!("audit skipped: {} ({reason})", a.claim),
                    None if !a.pass => {
                        return Err(CliError::AuditFailed(format!(
                            "{}: observed {} > bound {}",
                            a.claim,
                            a.observed_value,
                            a.bound_value.unwrap_or(f64::NAN)
                        )))
                    }
                    None => {}
                }
            }
            Ok(())
        }
        ModeArg::BaselineCompare => {
            let rows = baseline_compare(m)?;
            let mut w = open_output(m.out.as_deref())?;
            let ctx = m.out.clone().unwrap_or_else(|| "<stdout>".into());
            write_baseline_csv(&mut w, &rows)
                .and_then(|_| w.flush())
                .map_err(io_err(&ctx))
        }
    }
}

/// Parses `argv`, runs, and returns the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match RunManifest::from_args(&args).and_then(|m| run(&m)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
