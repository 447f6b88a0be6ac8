//! `segccr`: segmented correspondence-curve regression from the command line.
//!
//! Subcommands: `fit` (segmented and homogeneous fits with optional
//! bootstrap standard errors), `test` (per-workflow change-point existence
//! test), `simulate` (synthetic scenario generators), `curve` (empirical
//! curves only), and `benchmark` (the Monte Carlo study harness).
//!
//! Exit codes: 0 on success, 2 for input problems (unreadable or malformed
//! files, invalid flags), 3 for numerical failures.

mod document;
mod io;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use segccr_core::{
    bootstrap, default_tau_grid, default_test_tau_grid, empirical_curve, fit_segmented,
    qlr_null_pvalue, run_benchmark, standard_rows, to_uniform_ranks, wald_tests, BenchmarkConfig,
    CutoffGrid, DesignSet, EmpiricalCurve, Orientation, ScenarioSpec, ScorePairs, SeededRng,
};

/// Errors split by exit code: input problems (2) versus numerical failures
/// during fitting (3).
#[derive(Debug)]
pub enum AppError {
    Input(String),
    Numeric(String),
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Input(msg) | AppError::Numeric(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<segccr_core::Error> for AppError {
    fn from(e: segccr_core::Error) -> Self {
        if e.is_input_error() {
            AppError::Input(e.to_string())
        } else {
            AppError::Numeric(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(
    name = "segccr",
    version,
    about = "Segmented correspondence-curve regression for replicate rank concordance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the segmented and homogeneous models, optionally with bootstrap
    /// standard errors; writes a JSON result document and plot data.
    Fit(FitArgs),
    /// Test each workflow for the existence of a change point.
    Test(TestArgs),
    /// Generate synthetic replicate scores from a mixture scenario.
    Simulate(SimulateArgs),
    /// Export empirical correspondence curves without fitting.
    Curve(CurveArgs),
    /// Run the Monte Carlo benchmark suite and write its report.
    Benchmark(BenchmarkArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OrientationArg {
    /// Smaller scores are stronger (p-value-like).
    Low,
    /// Larger scores are stronger.
    High,
}

#[derive(Args)]
struct FitArgs {
    /// Scores file with header `workflow<TAB>y1<TAB>y2`.
    #[arg(long)]
    scores: PathBuf,
    /// Optional covariate file with header `workflow<TAB>x1<TAB>...`.
    #[arg(long)]
    covariates: Option<PathBuf>,
    /// Score polarity; defaults to `low` (smaller scores are stronger).
    #[arg(long, value_enum)]
    orientation: Option<OrientationArg>,
    /// Number of equally spaced cutoffs; defaults to min(100, smallest
    /// workflow size).
    #[arg(long)]
    cutoffs: Option<usize>,
    /// Change-point candidates: `auto` (cutoffs in [0.02, 0.98]), a comma
    /// list like `0.3,0.5,0.7`, or a range like `0.1:0.9:0.01`.
    #[arg(long, default_value = "auto")]
    tau_grid: String,
    /// Bootstrap replicates for standard errors; 0 disables the bootstrap.
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Result document path; plot data is written next to it with extension
    /// `curves.tsv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TestArgs {
    /// Scores file with header `workflow<TAB>y1<TAB>y2`.
    #[arg(long)]
    scores: PathBuf,
    /// Score polarity; defaults to `low` (smaller scores are stronger).
    #[arg(long, value_enum)]
    orientation: Option<OrientationArg>,
    /// Number of equally spaced cutoffs; defaults per workflow to
    /// min(100, workflow size).
    #[arg(long)]
    cutoffs: Option<usize>,
    /// Change-point candidates: `auto` (cutoffs in [0.1, 0.9]), a comma
    /// list, or `lo:hi:step`.
    #[arg(long, default_value = "auto")]
    tau_grid: String,
    /// Multiplier draws for the simulated null distribution (at least 10).
    #[arg(long, default_value_t = 1000)]
    nb: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Result document path (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Mixture scenario: 1 (Gumbel copula components) or 2 (bivariate
    /// normal components).
    #[arg(long)]
    scenario: u8,
    /// Number of candidate pairs.
    #[arg(long)]
    n: usize,
    /// Mixing weight of the weak component.
    #[arg(long)]
    pi1: f64,
    /// Weak-component dependence: Gumbel parameter (scenario 1, default 1)
    /// or correlation (scenario 2, default 0).
    #[arg(long)]
    theta1: Option<f64>,
    /// Strong-component dependence: Gumbel parameter (scenario 1, required)
    /// or correlation (scenario 2, default 0.9).
    #[arg(long)]
    theta2: Option<f64>,
    /// Weak-component mean shift (default 0).
    #[arg(long)]
    mu1: Option<f64>,
    /// Strong-component mean shift (default 3 for scenario 1, 2.5 for
    /// scenario 2).
    #[arg(long)]
    mu2: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output scores file (tab-separated).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CurveArgs {
    /// Scores file with header `workflow<TAB>y1<TAB>y2`.
    #[arg(long)]
    scores: PathBuf,
    /// Score polarity; defaults to `low` (smaller scores are stronger).
    #[arg(long, value_enum)]
    orientation: Option<OrientationArg>,
    /// Number of equally spaced cutoffs; defaults to min(100, smallest
    /// workflow size).
    #[arg(long)]
    cutoffs: Option<usize>,
    /// Output plot-data file (tab-separated).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Which rows to run: copula, normal, covariate, power, or all.
    #[arg(long, default_value = "all")]
    rows: String,
    /// Study size: `fast` (25 replicates of n=4000) or `full`
    /// (100 replicates of n=10000).
    #[arg(long, default_value = "fast")]
    profile: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output report file (tab-separated).
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Curve(args) => cmd_curve(args),
        Command::Benchmark(args) => cmd_benchmark(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

/// Applies the SEGCCR_THREADS cap to the global worker pool. Unset means the
/// default pool size.
fn configure_threads() -> Result<(), AppError> {
    let Ok(raw) = std::env::var("SEGCCR_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| {
        AppError::Input(format!("SEGCCR_THREADS must be a positive integer, got `{raw}`"))
    })?;
    if threads == 0 {
        return Err(AppError::Input(
            "SEGCCR_THREADS must be a positive integer, got `0`".to_string(),
        ));
    }
    // A second initialization (e.g. in-process reuse) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

/// Resolves the orientation flag, noting the documented default on stderr
/// when the flag is absent.
fn resolve_orientation(flag: Option<OrientationArg>) -> Orientation {
    match flag {
        Some(OrientationArg::Low) => Orientation::LowerIsStronger,
        Some(OrientationArg::High) => Orientation::HigherIsStronger,
        None => {
            eprintln!(
                "note: no --orientation given; assuming `low` (smaller scores are stronger)"
            );
            Orientation::LowerIsStronger
        }
    }
}

fn resolve_grid(cutoffs: Option<usize>, pairs: &[ScorePairs]) -> Result<CutoffGrid, AppError> {
    match cutoffs {
        Some(0) => Err(AppError::Input(
            "--cutoffs must be a positive integer".to_string(),
        )),
        Some(m) => CutoffGrid::uniform(m).map_err(AppError::from),
        None => {
            let min_n = pairs.iter().map(|p| p.n()).min().unwrap_or(1);
            Ok(CutoffGrid::default_for(min_n))
        }
    }
}

/// Parses the --tau-grid flag: `auto`, a comma list, or `lo:hi:step`. The
/// value of `auto` depends on the subcommand (estimation searches a wider
/// window than the existence test), so the caller supplies it.
fn parse_tau_grid(spec: &str, auto: impl FnOnce() -> Vec<f64>) -> Result<Vec<f64>, AppError> {
    let spec = spec.trim();
    if spec.eq_ignore_ascii_case("auto") {
        return Ok(auto());
    }
    let parse_one = |raw: &str| -> Result<f64, AppError> {
        raw.trim()
            .parse::<f64>()
            .map_err(|_| AppError::Input(format!("--tau-grid: cannot parse `{raw}` as a number")))
    };
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(AppError::Input(
                "--tau-grid range must have the form lo:hi:step".to_string(),
            ));
        }
        let lo = parse_one(parts[0])?;
        let hi = parse_one(parts[1])?;
        let step = parse_one(parts[2])?;
        if !(step > 0.0) || !(hi >= lo) {
            return Err(AppError::Input(
                "--tau-grid range needs hi >= lo and step > 0".to_string(),
            ));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|i| lo + i as f64 * step).collect());
    }
    spec.split(',').map(parse_one).collect()
}

fn write_file(path: &Path, contents: &str) -> Result<(), AppError> {
    fs::write(path, contents).map_err(|e| AppError::Input(format!("{}: {e}", path.display())))
}

fn write_document(path: &Path, doc: &serde_json::Value) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| AppError::Numeric(format!("serializing result document: {e}")))?;
    text.push('\n');
    write_file(path, &text)
}

fn empirical_curves(
    pairs: &[ScorePairs],
    orientation: Orientation,
    grid: &CutoffGrid,
) -> Result<Vec<EmpiricalCurve>, AppError> {
    pairs
        .iter()
        .map(|p| {
            let ranks = to_uniform_ranks(p, orientation)?;
            Ok(empirical_curve(&ranks, grid))
        })
        .collect()
}

fn cmd_fit(args: FitArgs) -> Result<(), AppError> {
    let orientation = resolve_orientation(args.orientation);
    let scores = io::read_scores(&args.scores)?;
    let covariates = args
        .covariates
        .as_deref()
        .map(io::read_covariates)
        .transpose()?;
    let pairs = io::assemble(&scores, covariates.as_ref())?;
    let grid = resolve_grid(args.cutoffs, &pairs)?;
    let tau_grid = parse_tau_grid(&args.tau_grid, || default_tau_grid(&grid))?;

    let data = DesignSet::from_score_pairs(&pairs, orientation, &grid)?;
    let fit = fit_segmented(&data, &grid, &tau_grid)?;
    let boot = if args.bootstrap > 0 {
        Some(bootstrap(
            &pairs,
            orientation,
            &grid,
            &tau_grid,
            args.bootstrap,
            SeededRng::new(args.seed),
        )?)
    } else {
        None
    };
    let wald = match &boot {
        Some(b) if data.n_covariates() > 0 => Some(wald_tests(&fit, b)),
        _ => None,
    };
    let empirical = empirical_curves(&pairs, orientation, &grid)?;

    let provenance = document::Provenance {
        seed: args.seed,
        scores_sha256: scores.sha256.clone(),
        covariates_sha256: covariates.as_ref().map(|c| c.sha256.clone()),
    };
    let covariate_names = covariates.map(|c| c.names).unwrap_or_default();
    let doc = document::fit_document(
        orientation_label(orientation),
        &grid,
        &tau_grid,
        &pairs,
        &covariate_names,
        &fit,
        boot.as_ref(),
        wald.as_deref(),
        &empirical,
        &provenance,
    );
    write_document(&args.out, &doc)?;
    let plot_path = args.out.with_extension("curves.tsv");
    write_file(
        &plot_path,
        &document::plot_data(&pairs, &empirical, Some(&fit.fitted_curves)),
    )?;
    eprintln!(
        "wrote {} and {}",
        args.out.display(),
        plot_path.display()
    );
    Ok(())
}

fn orientation_label(orientation: Orientation) -> &'static str {
    match orientation {
        Orientation::LowerIsStronger => "lower_is_stronger",
        Orientation::HigherIsStronger => "higher_is_stronger",
    }
}

fn cmd_test(args: TestArgs) -> Result<(), AppError> {
    if args.nb < 10 {
        return Err(AppError::Input(format!(
            "--nb must be at least 10, got {}",
            args.nb
        )));
    }
    let orientation = resolve_orientation(args.orientation);
    let scores = io::read_scores(&args.scores)?;
    let pairs = io::assemble(&scores, None)?;

    let mut entries = Vec::with_capacity(pairs.len());
    for (w, workflow) in pairs.iter().enumerate() {
        let grid = resolve_grid(args.cutoffs, std::slice::from_ref(workflow))?;
        let tau_grid = parse_tau_grid(&args.tau_grid, || default_test_tau_grid(&grid))?;
        let seed = SeededRng::new(args.seed).derive(500 + w as u64);
        let result = qlr_null_pvalue(workflow, orientation, &grid, &tau_grid, args.nb, seed)?;
        // Refit once for the reported estimates; cheap next to the draws.
        let (_, fit) = segccr_core::qlr_statistic(workflow, orientation, &grid, &tau_grid)?;
        entries.push(document::QlrEntry {
            workflow: workflow.workflow_id.clone(),
            cutoffs: grid.m(),
            tau_hat: fit.params.tau,
            segment_slopes: fit.params.beta[0],
            homogeneous_slope: fit.homogeneous.slopes[0],
            result,
        });
    }

    let provenance = document::Provenance {
        seed: args.seed,
        scores_sha256: scores.sha256,
        covariates_sha256: None,
    };
    let doc = document::test_document(orientation_label(orientation), &entries, &provenance);
    write_document(&args.out, &doc)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), AppError> {
    let mut spec = match args.scenario {
        1 => {
            let theta2 = args.theta2.ok_or_else(|| {
                AppError::Input("--theta2 is required for scenario 1".to_string())
            })?;
            ScenarioSpec::scenario1(args.n, args.pi1, theta2)
        }
        2 => ScenarioSpec::scenario2(args.n, args.pi1, args.theta1.unwrap_or(0.0)),
        other => {
            return Err(AppError::Input(format!(
                "--scenario must be 1 or 2, got {other}"
            )))
        }
    };
    if args.scenario == 1 {
        if let Some(theta1) = args.theta1 {
            spec.theta1 = theta1;
        }
    }
    if let Some(theta2) = args.theta2 {
        spec.theta2 = theta2;
    }
    if let Some(mu1) = args.mu1 {
        spec.mu1 = mu1;
    }
    if let Some(mu2) = args.mu2 {
        spec.mu2 = mu2;
    }

    let seed = SeededRng::new(args.seed);
    let pairs = match args.scenario {
        1 => segccr_core::generate_scenario1(&spec, seed)?,
        _ => segccr_core::generate_scenario2(&spec, seed)?,
    };

    let mut out = String::from("workflow\ty1\ty2\n");
    for (y1, y2) in pairs.y1.iter().zip(&pairs.y2) {
        out.push_str(&format!("{}\t{y1}\t{y2}\n", pairs.workflow_id));
    }
    write_file(&args.out, &out)?;
    eprintln!("wrote {} ({} rows)", args.out.display(), pairs.n());
    Ok(())
}

fn cmd_curve(args: CurveArgs) -> Result<(), AppError> {
    let orientation = resolve_orientation(args.orientation);
    let scores = io::read_scores(&args.scores)?;
    let pairs = io::assemble(&scores, None)?;
    let grid = resolve_grid(args.cutoffs, &pairs)?;
    let empirical = empirical_curves(&pairs, orientation, &grid)?;
    write_file(&args.out, &document::plot_data(&pairs, &empirical, None))?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<(), AppError> {
    let rows = standard_rows(&args.rows)?;
    let config = match args.profile.as_str() {
        "fast" => BenchmarkConfig::fast(rows, args.seed),
        "full" => BenchmarkConfig::full(rows, args.seed),
        other => {
            return Err(AppError::Input(format!(
                "--profile must be `fast` or `full`, got `{other}`"
            )))
        }
    };
    let report = run_benchmark(&config)?;
    write_file(&args.out, &report.to_tsv())?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}
