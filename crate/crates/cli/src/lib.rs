//! Suite runner and reporting for the convex-measure transport
//! verification library: configuration, case execution, machine-readable
//! reports, and plan export.

pub mod config;
pub mod report;
pub mod suites;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{OutputFormat, SuiteConfig, SuiteId};
use report::VerificationReport;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED_CASES: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "ctv",
    version,
    about = "Numerical verification suites for transport and Brascamp-Lieb inequalities on convex measures"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run verification suites and write a machine-readable report.
    Verify(VerifyArgs),
    /// Solve one discrete transport problem and export the plan as
    /// sparse-triplet CSV (i, j, mass).
    ExportPlan(ExportPlanArgs),
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Suite to run: thm1|thm2|thm3|decomp|lemmas|bl|bl-quant|linearize|poincare|all
    #[arg(long)]
    suite: Option<String>,
    /// Density model ids (repeatable): ball:sigma=1,beta=2,n=1 |
    /// cauchy:beta=2,n=1 | custom:<file>. Default: the built-in battery.
    #[arg(long)]
    model: Vec<String>,
    /// Cells of the 1D verification grid.
    #[arg(long)]
    grid: Option<usize>,
    /// Comma-separated perturbation strengths; default depends on the suite.
    #[arg(long)]
    eps: Option<String>,
    /// Random seed; mandatory for randomized suites (lemmas).
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance override, either `suite=value` or a bare value applying to
    /// every selected suite (repeatable).
    #[arg(long)]
    tol: Vec<String>,
    /// Constant of the Cheeger-type bound feeding the Cauchy chain.
    #[arg(long = "c-kappa")]
    c_kappa: Option<f64>,
    /// User-supplied weighted Poincare constant (validated before use).
    #[arg(long)]
    h: Option<f64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: json|csv.
    #[arg(long)]
    format: Option<String>,
    /// Worker threads for case execution (default: CT_JOBS or 1).
    #[arg(long)]
    jobs: Option<usize>,
    /// Key-value config file mirroring these flags; flags win on conflict.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportPlanArgs {
    /// Source density model id.
    #[arg(long)]
    source: String,
    /// Target density model id.
    #[arg(long)]
    target: String,
    /// Grid cells per axis for the discretization.
    #[arg(long, default_value_t = 64)]
    cells: usize,
    /// Ground cost: w2 (squared distance) or bregman (the model cost).
    #[arg(long, default_value = "w2")]
    cost: String,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn resolve_verify_config(args: &VerifyArgs) -> Result<SuiteConfig, String> {
    let file: BTreeMap<String, String> = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("config file {}: {e}", path.display()))?;
            config::parse_config_file(&text)?
        }
        None => BTreeMap::new(),
    };
    let suite_arg = args
        .suite
        .clone()
        .or_else(|| file.get("suite").cloned())
        .ok_or("--suite is required (or set `suite =` in the config file)")?;
    let suites = SuiteId::parse(&suite_arg)?;
    let models = if !args.model.is_empty() {
        args.model.clone()
    } else if let Some(m) = file.get("model") {
        m.split(';').map(|s| s.trim().to_string()).collect()
    } else {
        Vec::new()
    };
    let grid = match (args.grid, file.get("grid")) {
        (Some(g), _) => g,
        (None, Some(g)) => g.parse().map_err(|e| format!("config grid: {e}"))?,
        _ => 4096,
    };
    let eps = match (&args.eps, file.get("eps")) {
        (Some(e), _) => config::parse_eps_list(e)?,
        (None, Some(e)) => config::parse_eps_list(e)?,
        _ => Vec::new(),
    };
    let seed = match (args.seed, file.get("seed")) {
        (Some(s), _) => Some(s),
        (None, Some(s)) => Some(s.parse().map_err(|e| format!("config seed: {e}"))?),
        _ => None,
    };
    let mut tol_overrides = BTreeMap::new();
    if let Some(t) = file.get("tol") {
        for part in t.split(';') {
            if part.trim().is_empty() {
                continue;
            }
            let (k, v) = config::parse_tol_override(part.trim())?;
            tol_overrides.insert(k, v);
        }
    }
    for t in &args.tol {
        let (k, v) = config::parse_tol_override(t)?;
        tol_overrides.insert(k, v);
    }
    let c_kappa = match (args.c_kappa, file.get("c-kappa")) {
        (Some(c), _) => c,
        (None, Some(c)) => c.parse().map_err(|e| format!("config c-kappa: {e}"))?,
        _ => 1.0,
    };
    let h_override = match (args.h, file.get("h")) {
        (Some(h), _) => Some(h),
        (None, Some(h)) => Some(h.parse().map_err(|e| format!("config h: {e}"))?),
        _ => None,
    };
    let out = args
        .out
        .clone()
        .or_else(|| file.get("out").map(PathBuf::from));
    let format = match (&args.format, file.get("format")) {
        (Some(f), _) => OutputFormat::parse(f)?,
        (None, Some(f)) => OutputFormat::parse(f)?,
        _ => OutputFormat::Json,
    };
    let jobs = match (args.jobs, file.get("jobs")) {
        (Some(j), _) => j,
        (None, Some(j)) => j.parse().map_err(|e| format!("config jobs: {e}"))?,
        _ => std::env::var("CT_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(1),
    };
    let cfg = SuiteConfig {
        suites,
        suite_arg,
        models,
        grid,
        eps,
        seed,
        tol_overrides,
        c_kappa,
        h_override,
        out,
        format,
        jobs,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write_report(report: &VerificationReport, config: &SuiteConfig) -> std::io::Result<()> {
    match &config.out {
        Some(path) => {
            let mut file = std::fs::File::create(path)?;
            report.write_to(config.format, &mut file)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            report.write_to(config.format, &mut lock)
        }
    }
}

fn run_verify(args: &VerifyArgs) -> i32 {
    let config = match resolve_verify_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("usage: ctv verify --suite <id> [--model <id>]... [--grid N] [--eps L] [--seed N] [--tol T] [--c-kappa C] [--h H] [--out PATH] [--format json|csv] [--jobs N] [--config FILE]");
            return EXIT_CONFIG;
        }
    };
    match suites::run_suites(&config) {
        Ok(cases) => {
            if let Some(bad) = cases.iter().find(|c| !c.finite()) {
                eprintln!("error: case {} produced a non-finite field", bad.case_id);
                return EXIT_RUNTIME;
            }
            let report = VerificationReport::new(&config, cases, false);
            if let Err(e) = write_report(&report, &config) {
                eprintln!("error: cannot write report: {e}");
                return EXIT_RUNTIME;
            }
            for s in &report.summary {
                eprintln!(
                    "suite {}: {}/{} passed, worst margin {:.3e}",
                    s.suite, s.passed, s.cases, s.worst_margin
                );
            }
            if report.all_pass() {
                EXIT_OK
            } else {
                EXIT_FAILED_CASES
            }
        }
        Err(suites::SuiteError::Setup(e)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(suites::SuiteError::Runtime(partial, e)) => {
            eprintln!("error: {e}");
            let report = VerificationReport::new(&config, partial, true);
            if let Err(we) = write_report(&report, &config) {
                eprintln!("error: cannot flush partial report: {we}");
            }
            EXIT_RUNTIME
        }
    }
}

fn run_export_plan(args: &ExportPlanArgs) -> i32 {
    use ctv_core::functionals::{cost_c, CostSpec};
    use ctv_core::measures::{discretize, GridSpec};
    use ctv_core::transport::{solve_discrete_ot, CostMatrix};

    let inner = || -> Result<(), String> {
        let src = config::parse_model_id(&args.source)?;
        let tgt = config::parse_model_id(&args.target)?;
        if src.dim() != tgt.dim() {
            return Err(String::from("source and target dimensions differ"));
        }
        let mu = discretize(&src, &GridSpec::cells(args.cells))
            .map_err(|e| e.to_string())?
            .measure;
        let nu = discretize(&tgt, &GridSpec::cells(args.cells))
            .map_err(|e| e.to_string())?
            .measure;
        let cost = match args.cost.as_str() {
            "w2" => CostMatrix::from_fn(&mu, &nu, |x, y| {
                x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
            })
            .map_err(|e| e.to_string())?,
            "bregman" => {
                let spec = CostSpec::base(src.kp(), src.w().clone());
                CostMatrix::from_fn(&mu, &nu, |x, y| cost_c(x, y, &spec).unwrap_or(0.0))
                    .map_err(|e| e.to_string())?
            }
            other => return Err(format!("unknown cost '{other}' (expected w2|bregman)")),
        };
        let plan = solve_discrete_ot(&mu, &nu, &cost).map_err(|e| e.to_string())?;
        let mut file = std::fs::File::create(&args.out).map_err(|e| e.to_string())?;
        writeln!(file, "i,j,mass").map_err(|e| e.to_string())?;
        for &(i, j, m) in plan.triplets() {
            writeln!(file, "{i},{j},{}", report::fmt17(m)).map_err(|e| e.to_string())?;
        }
        eprintln!(
            "total cost {} (dual gap {:.3e}), {} triplets",
            report::fmt17(plan.total_cost()),
            plan.dual_gap(),
            plan.triplets().len()
        );
        Ok(())
    };
    match inner() {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

/// Parses the command line and runs; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match &cli.command {
        Command::Verify(args) => run_verify(args),
        Command::ExportPlan(args) => run_export_plan(args),
    }
}
