mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fkpp_core::acceptance::Suite;
use fkpp_core::experiments::{emit_report, run_scenario, Scenario, ScenarioKind};
use fkpp_core::grid::GridFunction;
use fkpp_core::inputs::{build_domain, KernelSpec};
use fkpp_core::logistic::{minimize_e_with_eigen, threshold_report, LogisticProblem};
use fkpp_core::measure::check_hypotheses;
use fkpp_core::spectral::solve_principal;
use fkpp_core::Error;
use serde::Serialize;

use config::{Config, ConfigError, DEFAULT_OUT, DEFAULT_SEED};

const EXIT_FAILED: u8 = 1;
const EXIT_HYPOTHESIS: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "fkpp",
    version,
    about = "Eigenvalues and stationary logistic states for signed superpositions of fractional Laplacians"
)]
struct Cli {
    /// JSON run configuration (may also be given positionally).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports and tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid cells per unit length.
    #[arg(long, global = true)]
    n: Option<u32>,
    /// Suppress standard output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the structural hypotheses on the measure.
    CheckMeasure { file: Option<PathBuf> },
    /// Principal eigenpair of the signed operator.
    Eigen { file: Option<PathBuf> },
    /// Minimize the logistic energy.
    Solve { file: Option<PathBuf> },
    /// Run one experiment scenario and write its report directory.
    Scenario { kind: String, file: Option<PathBuf> },
    /// Run the full acceptance suite.
    Selftest,
}

enum Failure {
    Config(String),
    Core(Error),
    Failed(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Failed(_) => EXIT_FAILED,
            Failure::Core(e) => match e {
                Error::Hypothesis(_) | Error::NotCoercive { .. } => EXIT_HYPOTHESIS,
                Error::NonConvergence { .. } | Error::Numerical(_) => EXIT_NONCONVERGENCE,
                Error::InvalidInput(_) | Error::GridMismatch(_) | Error::Json(_) => EXIT_CONFIG,
                Error::Io { .. } => EXIT_FAILED,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(m) => format!("config error: {m}"),
            Failure::Failed(m) => m.clone(),
            Failure::Core(e) => e.to_string(),
        }
    }
}

struct Ctx {
    cfg: Config,
    out: PathBuf,
    seed: u64,
    quiet: bool,
}

impl Ctx {
    fn new(cli: &Cli, file: Option<&PathBuf>) -> Result<Self, Failure> {
        let path = match (cli.config.as_ref(), file) {
            (Some(a), Some(b)) if a != b => {
                return Err(Failure::Config("two different config files given".into()))
            }
            (a, b) => a.or(b),
        };
        let mut cfg = match path {
            Some(p) => Config::load(p)?,
            None => Config::empty(),
        };
        if let Some(n) = cli.n {
            cfg.n_per_unit = Some(n);
        }
        Ok(Self {
            out: cli
                .out
                .clone()
                .or_else(|| cfg.out.clone())
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            seed: cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
            quiet: cli.quiet,
            cfg,
        })
    }

    fn print(&self, text: &str) {
        if !self.quiet {
            println!("{text}");
        }
    }

    fn print_json<T: Serialize>(&self, value: &T) -> Result<(), Failure> {
        self.print(&serde_json::to_string_pretty(value).map_err(Error::from)?);
        Ok(())
    }

    fn out_dir(&self, sub: &str) -> Result<PathBuf, Failure> {
        let dir = self.out.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Failure::Failed(format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::Failed(format!("{}: {e}", path.display())))
}

fn check_measure(ctx: &Ctx) -> Result<(), Failure> {
    let mu = ctx.cfg.measure()?.build()?;
    let domain = build_domain(&ctx.cfg.domain())?;
    let report = check_hypotheses(&mu, domain.radius(), ctx.cfg.gamma_bar)?;
    ctx.print_json(&report)
}

fn eigen(ctx: &Ctx) -> Result<(), Failure> {
    let mu = ctx.cfg.measure()?.build()?;
    let domain = build_domain(&ctx.cfg.domain())?;
    let solved = solve_principal(&domain, &mu, ctx.cfg.n_per_unit(), ctx.cfg.quadrature())?;
    let summary = solved.pair.summary();
    let dir = ctx.out_dir("eigen")?;
    write_json(&dir.join("eigen.json"), &summary)?;
    solved.pair.write_csv(&dir.join("eigenfunction.csv"))?;
    ctx.print_json(&summary)
}

#[derive(Serialize)]
struct SolveOutput {
    lambda: f64,
    threshold: fkpp_core::logistic::ThresholdReport,
    solve: fkpp_core::logistic::SolveSummary,
}

fn solve(ctx: &Ctx) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let mu = cfg.measure()?.build()?;
    let domain = build_domain(&cfg.domain())?;
    let solved = solve_principal(&domain, &mu, cfg.n_per_unit(), cfg.quadrature())?;
    let grid = solved.grid.clone();
    let kernel = cfg.kernel.clone().unwrap_or_else(KernelSpec::default).build(&grid)?;
    let problem = LogisticProblem::new(
        GridFunction::constant(grid.clone(), cfg.sigma()?),
        GridFunction::constant(grid.clone(), cfg.nu.unwrap_or(1.0)),
        cfg.tau.unwrap_or(0.0),
        kernel.clone(),
        None,
    )?;
    let opts = cfg.tolerances().options(ctx.seed);
    let report = minimize_e_with_eigen(&problem, &solved.op, &solved.pair, &opts)?;
    let out = SolveOutput {
        lambda: solved.pair.lambda,
        threshold: threshold_report(&problem, &solved.pair, &kernel)?,
        solve: report.summary(),
    };
    let dir = ctx.out_dir("solve")?;
    write_json(&dir.join("solve.json"), &out)?;
    report.write_csv(&dir.join("solution.csv"))?;
    ctx.print_json(&out)?;
    if !report.converged {
        return Err(Error::NonConvergence {
            iterations: report.iterations,
            grad_norm: report.grad_norm,
        }
        .into());
    }
    Ok(())
}

fn scenario(ctx: &Ctx, kind: &str) -> Result<(), Failure> {
    let kind: ScenarioKind = kind.parse().map_err(|e: Error| Failure::Config(e.to_string()))?;
    let sc = Scenario::with_params(kind, ctx.cfg.scenario_params(), ctx.seed);
    let report = run_scenario(&sc)?;
    let files = emit_report(&report, &ctx.out)?;
    let verdict = match report.paper_consistent {
        Some(true) => "consistent",
        Some(false) => "INCONSISTENT",
        None => "inconclusive",
    };
    ctx.print(&format!("{kind}: {verdict} ({} checks)", report.checks.len()));
    for name in report.failures() {
        ctx.print(&format!("  failed check: {name}"));
    }
    for note in &report.notes {
        ctx.print(&format!("  note: {note}"));
    }
    ctx.print(&format!("wrote {} files under {}", files.len(), ctx.out.join(kind.name()).display()));
    Ok(())
}

fn selftest(ctx: &Ctx) -> Result<(), Failure> {
    let scratch = ctx.out_dir("selftest")?;
    let mut suite = Suite::new(ctx.seed, &scratch);
    let verdicts = suite.run_all();
    for v in &verdicts {
        ctx.print(&v.line());
    }
    suite.emit_reports(&ctx.out)?;
    write_json(&ctx.out.join("selftest.json"), &verdicts)?;
    let failed = verdicts.iter().filter(|v| !v.passed).count();
    ctx.print(&format!("{} of {} criteria passed", verdicts.len() - failed, verdicts.len()));
    if failed > 0 {
        return Err(Failure::Failed(format!("{failed} acceptance criteria failed")));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let file = match &cli.command {
        Command::CheckMeasure { file }
        | Command::Eigen { file }
        | Command::Solve { file }
        | Command::Scenario { file, .. } => file.as_ref(),
        Command::Selftest => None,
    };
    let ctx = Ctx::new(cli, file)?;
    match &cli.command {
        Command::CheckMeasure { .. } => check_measure(&ctx),
        Command::Eigen { .. } => eigen(&ctx),
        Command::Solve { .. } => solve(&ctx),
        Command::Scenario { kind, .. } => scenario(&ctx, kind),
        Command::Selftest => selftest(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fkpp: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
