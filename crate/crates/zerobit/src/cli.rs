//! Command-line front end: flags to configuration, configuration to report, report to file.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::config::{parse_index_list, parse_span, ExperimentConfig, Format};
use crate::experiments;
use crate::report::Report;

/// Exit status when `--check` finds a violated tolerance.
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "zerobit", version, about = "Fundamental solutions of zero-bit watermarking: experiment runner")]
pub struct Cli {
    /// JSON configuration file; command-line values override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (required, here or in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo loops.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Exit with status 2 if any acceptance tolerance is violated.
    #[arg(long, global = true)]
    check: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone)]
struct IndexList(Vec<usize>);

impl FromStr for IndexList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_index_list(s).map(IndexList)
    }
}

#[derive(Debug, Clone, Copy)]
struct Span([f64; 2]);

impl FromStr for Span {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_span(s).map(Span)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Hermite detector and embedder coefficients, efficacies and H₁ variance terms.
    Table1(Table1Args),
    /// Curves t_k(r) of the polynomial family.
    HermitePlot(HermitePlotArgs),
    /// Scalar Costa scheme efficacy versus noise, with partial sums and the pure sinusoid.
    ScsCurve(ScsArgs),
    /// Voronoi moments and DC-DM efficacies of lattices.
    LatticeEff(LatticeArgs),
    /// Residuals of the fundamental equation and LMP round trips.
    PdeCheck(PdeArgs),
    /// Gram matrices of detector families.
    Ortho(OrthoArgs),
    /// Monte Carlo efficacy under attack.
    Efficacy(EfficacyArgs),
    /// Empirical ROC curves.
    Roc(RocArgs),
    /// Variance-shaping embedder.
    Asymmetric(AsymmetricArgs),
    /// Pitman regularity ratios.
    Regularity(RegularityArgs),
}

#[derive(Debug, Args)]
struct Table1Args {
    /// Orders, as `a..b` or a comma list.
    #[arg(long)]
    k: Option<IndexList>,
    /// Orders with a Monte Carlo variance column.
    #[arg(long)]
    mc_k: Option<IndexList>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Debug, Args)]
struct HermitePlotArgs {
    #[arg(long)]
    k: Option<IndexList>,
    /// Abscissa span `a:b`.
    #[arg(long, allow_hyphen_values = true)]
    range: Option<Span>,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Debug, Args)]
struct ScsArgs {
    /// Nominal efficacy fixing the quantizer step.
    #[arg(long)]
    eta: Option<f64>,
    /// Noise span `a:b`.
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<Span>,
    /// Truncation orders of the partial sums.
    #[arg(long)]
    jmax: Option<IndexList>,
    #[arg(long)]
    points: Option<usize>,
    /// Nominal efficacy of the comparison sinusoid.
    #[arg(long)]
    pure_eta: Option<f64>,
}

#[derive(Debug, Args)]
struct LatticeArgs {
    /// Monte Carlo moment budget.
    #[arg(long)]
    budget: Option<usize>,
    /// Scale factors for the β-scaling check.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct PdeArgs {
    /// `residual` or `lmp`.
    #[arg(long)]
    suite: Option<String>,
    /// Host-distributed evaluation points per scheme.
    #[arg(long)]
    count: Option<usize>,
    /// Quadrature nodes.
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Debug, Args)]
struct OrthoArgs {
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Debug, Args)]
struct EfficacyArgs {
    /// `decay`, `fixed-wnr`, `mixture` or `custom`.
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    theta_grid: Option<Vec<f64>>,
    /// Random weight vectors in the mixture suite.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Debug, Args)]
struct RocArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<f64>>,
    /// Fixed amplitude; overrides the scale.
    #[arg(long)]
    theta: Option<f64>,
    /// θ√n.
    #[arg(long)]
    theta_scale: Option<f64>,
}

#[derive(Debug, Args)]
struct AsymmetricArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    /// Variance-shaping strengths.
    #[arg(long, value_delimiter = ',')]
    c: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    theta_grid: Option<Vec<f64>>,
    /// Polynomial order.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Debug, Args)]
struct RegularityArgs {
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long)]
    budget: Option<usize>,
    /// θ_n√n of the vanishing schedule.
    #[arg(long)]
    k_scale: Option<f64>,
    /// Amplitude of the fixed schedule.
    #[arg(long)]
    theta: Option<f64>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Table1(_) => "table1",
            Command::HermitePlot(_) => "hermite-plot",
            Command::ScsCurve(_) => "scs-curve",
            Command::LatticeEff(_) => "lattice-eff",
            Command::PdeCheck(_) => "pde-check",
            Command::Ortho(_) => "ortho",
            Command::Efficacy(_) => "efficacy",
            Command::Roc(_) => "roc",
            Command::Asymmetric(_) => "asymmetric",
            Command::Regularity(_) => "regularity",
        }
    }

    /// Subcommand flags as a configuration layer.
    fn overrides(&self) -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        match self {
            Command::Table1(a) => {
                c.k = a.k.clone().map(|l| l.0);
                c.mc_k = a.mc_k.clone().map(|l| l.0);
                c.theta = a.theta;
                c.n = a.n;
                c.budget = a.budget;
            }
            Command::HermitePlot(a) => {
                c.k = a.k.clone().map(|l| l.0);
                c.range = a.range.map(|s| s.0);
                c.points = a.points;
            }
            Command::ScsCurve(a) => {
                c.eta = a.eta;
                c.sigma_range = a.sigma.map(|s| s.0);
                c.jmax = a.jmax.clone().map(|l| l.0);
                c.points = a.points;
                c.pure_eta = a.pure_eta;
            }
            Command::LatticeEff(a) => {
                c.budget = a.budget;
                c.beta = a.beta.clone();
            }
            Command::PdeCheck(a) => {
                c.suite = a.suite.clone();
                c.count = a.count;
                c.nodes = a.nodes;
            }
            Command::Ortho(a) => c.nodes = a.nodes,
            Command::Efficacy(a) => {
                c.suite = a.suite.clone();
                c.n = a.n;
                c.budget = a.budget;
                c.theta_grid = a.theta_grid.clone();
                c.trials = a.trials;
            }
            Command::Roc(a) => {
                c.n = a.n;
                c.budget = a.budget;
                c.alpha_grid = a.alpha_grid.clone();
                c.theta = a.theta;
                c.theta_scale = a.theta_scale;
            }
            Command::Asymmetric(a) => {
                c.n = a.n;
                c.budget = a.budget;
                c.c = a.c.clone();
                c.theta_grid = a.theta_grid.clone();
                c.k = a.k.map(|k| vec![k]);
            }
            Command::Regularity(a) => {
                c.n_list = a.n_list.clone();
                c.budget = a.budget;
                c.k_scale = a.k_scale;
                c.theta = a.theta;
            }
        }
        c
    }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let file = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    let mut top = cli.command.overrides();
    top.seed = cli.seed;
    top.workers = cli.workers;
    top.out = cli.out.as_ref().map(|p| p.display().to_string());
    top.format = cli.format;
    Ok(top.overlay(file))
}

fn write_report(report: &Report, format: Format, out: impl Write) -> Result<()> {
    let mut out = BufWriter::new(out);
    match format {
        Format::Csv => report.table.write_csv(&mut out)?,
        Format::Json => report.write_json(&mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn execute(cli: &Cli) -> Result<bool> {
    let cfg = resolve(cli)?;
    if let Some(w) = cfg.workers {
        crate::config::positive(w, "workers")?;
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let name = cli.command.name();
    let started = Instant::now();
    let report = experiments::run(name, &cfg)?;
    let elapsed = started.elapsed().as_secs_f64();
    let format = cfg.format.unwrap_or(Format::Csv);
    let line = report.summary_line();
    match &cfg.out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {path}"))?;
            write_report(&report, format, f)?;
            println!("{line}");
        }
        None => {
            write_report(&report, format, io::stdout().lock())?;
            eprintln!("{line}");
        }
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("check failed: {} (value {}, limit {})", c.name, c.value, c.limit);
    }
    eprintln!("{name}: {elapsed:.2} s");
    Ok(report.all_passed())
}

/// Runs the command line and returns the process exit status.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) if cli.check => EXIT_CHECK_FAILED,
        Ok(false) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
