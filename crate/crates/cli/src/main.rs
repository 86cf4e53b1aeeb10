//! Batch experiment runner: extremal solves, reference tables, Monte Carlo
//! risk estimation, and the phase diagram, emitting CSV/JSON reports.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fanova_select::error::Error;
use fanova_select::extremal::{solve_extremal, ExtremalProfile};
use fanova_select::model::{benchmark_instance, benchmark_scaled_subset, ModelInstance, Orders};
use fanova_select::report;
use fanova_select::risk;
use fanova_select::selector::{
    build_grid, build_grid_with_epsilon, EpsilonRule, SelectorConfig, SparsityRegime, TauRule,
};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "fanova-select", version, about = "Adaptive almost-full component selection experiments")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory for relative paths (env: FANOVA_SELECT_OUT).
    #[arg(long, global = true, env = "FANOVA_SELECT_OUT", default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SelectorArgs {
    /// Sparsity grid start b.
    #[arg(long, default_value_t = 0.001)]
    grid_start: f64,
    /// Sparsity grid end B.
    #[arg(long, default_value_t = 0.999)]
    grid_end: f64,
    /// Number of grid nodes M.
    #[arg(long, default_value_t = 20)]
    grid_size: usize,
    /// Explicit threshold slack ϵ (default: the (log binom)^{-1/2} rule).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Explicit Lepski denominator τ (default: the log rule).
    #[arg(long)]
    tau: Option<f64>,
    /// Regime for default rules: fixed-s or growing-s.
    #[arg(long, default_value = "fixed-s")]
    regime: String,
}

impl SelectorArgs {
    fn build(&self) -> Result<SelectorConfig, Error> {
        let regime = match self.regime.as_str() {
            "fixed-s" => SparsityRegime::FixedS,
            "growing-s" => SparsityRegime::GrowingS,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "regime must be fixed-s or growing-s, got {other}"
                )))
            }
        };
        let config = SelectorConfig {
            grid_start: self.grid_start,
            grid_end: self.grid_end,
            grid_size: self.grid_size,
            epsilon_rule: self.epsilon.map_or(EpsilonRule::LogInvSqrt, EpsilonRule::Explicit),
            tau_rule: self.tau.map_or(TauRule::LogRule, TauRule::Explicit),
            regime,
            keep_statistics: false,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the extremal problem at one radius and emit the profile as JSON.
    SolveExtremal {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Noise intensity ε.
        #[arg(long)]
        eps: f64,
        /// Separation radius r.
        #[arg(long)]
        r: f64,
        /// Include the per-frequency expansion of the support.
        #[arg(long)]
        expand: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Emit both selection boundary curves on a β grid.
    Boundary {
        #[arg(long, default_value_t = 200)]
        beta_steps: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Classify a (β, γ) grid and emit the region grid plus boundary curves.
    PhaseDiagram {
        #[arg(long, default_value_t = 100)]
        beta_steps: usize,
        #[arg(long, default_value_t = 100)]
        gamma_steps: usize,
        #[arg(long, default_value_t = 4.0)]
        gamma_max: f64,
        /// Output file prefix.
        #[arg(long, default_value = "phase")]
        prefix: String,
    },
    /// Design table: β, binom, log binom, ε^{-2k/(2σ+k)} per (d, k).
    Table1 {
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_delimiter = ',')]
        d: Vec<u32>,
        #[arg(long, value_delimiter = ',')]
        k: Vec<u32>,
        /// Number of active components defining the sparsity index.
        #[arg(long, default_value_t = 6)]
        actives: u64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Estimated risk of the benchmark instance across signal scales.
    Table2 {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        /// Monte Carlo replicates per scale.
        #[arg(long = "J", default_value_t = 20)]
        replicates: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        selector: SelectorArgs,
        /// Validate and print derived quantities without sampling.
        #[arg(long)]
        dry_run: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Also write the full per-replicate reports as JSON.
        #[arg(long)]
        report_json: Option<PathBuf>,
    },
    /// Run the experiment described by a JSON config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config replicate count.
        #[arg(long = "J")]
        replicates: Option<u32>,
        #[arg(long)]
        dry_run: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Synthetic above/below-boundary experiment.
    Dichotomy {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        d: u32,
        #[arg(long)]
        beta: f64,
        /// Relative offset of the signal level from the boundary; sign picks the side.
        #[arg(long, allow_hyphen_values = true)]
        margin: f64,
        #[arg(long = "J", default_value_t = 50)]
        replicates: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        selector: SelectorArgs,
        #[arg(long)]
        dry_run: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // ignore "already initialized" when tests drive main() repeatedly
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = error_kind(&err);
            eprintln!("error: kind={kind} message=\"{err}\"");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::InvalidArgument(_) => "invalid-argument",
        Error::InfeasibleRadius { .. } => "infeasible-radius",
        Error::TargetUnattainable { .. } => "target-unattainable",
        Error::NoConvergence(_) => "no-convergence",
        Error::MissingFrequency(_) => "missing-frequency",
        Error::DimensionMismatch { .. } => "dimension-mismatch",
        Error::IndexMismatch(_) => "index-mismatch",
        Error::UnknownSubset(_) => "unknown-subset",
        Error::AtOrder { inner, .. } => error_kind(inner),
    }
}

/// 2 for configuration errors, 3 for numerical infeasibility.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::TargetUnattainable { .. }
        | Error::InfeasibleRadius { .. }
        | Error::NoConvergence(_) => 3,
        Error::AtOrder { inner, .. } => exit_code(inner),
        _ => 2,
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::SolveExtremal {
            k,
            sigma,
            eps,
            r,
            expand,
            output,
        } => {
            let profile = solve_extremal(*k, *sigma, *eps, *r)?;
            let json = report::to_json_pretty(&ProfileReport::new(&profile, *expand)?);
            emit(&cli.out_dir, output.as_deref(), &json)
        }
        Command::Boundary { beta_steps, output } => {
            let betas = interior_grid(*beta_steps, 1.0);
            let curves = risk::boundary_curves(&betas)?;
            emit(&cli.out_dir, output.as_deref(), &report::boundary_csv(&curves))
        }
        Command::PhaseDiagram {
            beta_steps,
            gamma_steps,
            gamma_max,
            prefix,
        } => {
            if *gamma_max <= 0.0 {
                return Err(Error::InvalidArgument("gamma-max must be positive".into()));
            }
            let betas = interior_grid(*beta_steps, 1.0);
            let gammas = interior_grid(*gamma_steps, *gamma_max);
            let mut points = Vec::with_capacity(betas.len() * gammas.len());
            for &beta in &betas {
                for &gamma in &gammas {
                    points.push((beta, gamma, risk::phase_classify(beta, gamma)?));
                }
            }
            let curves = risk::boundary_curves(&betas)?;
            let af: String = std::iter::once("beta,gamma\n".to_string())
                .chain(curves.iter().map(|p| format!("{:.6},{:.6}\n", p.beta, p.gamma_almost_full)))
                .collect();
            let ex: String = std::iter::once("beta,gamma\n".to_string())
                .chain(curves.iter().map(|p| format!("{:.6},{:.6}\n", p.beta, p.gamma_exact)))
                .collect();
            write_file(&cli.out_dir.join(format!("{prefix}_grid.csv")), &report::phase_grid_csv(&points))?;
            write_file(&cli.out_dir.join(format!("{prefix}_boundary_almost_full.csv")), &af)?;
            write_file(&cli.out_dir.join(format!("{prefix}_boundary_exact.csv")), &ex)?;
            Ok(())
        }
        Command::Table1 {
            sigma,
            eps,
            d,
            k,
            actives,
            output,
        } => {
            let rows = report::design_table(d, k, *sigma, *eps, *actives)?;
            emit(&cli.out_dir, output.as_deref(), &report::design_table_csv(&rows))
        }
        Command::Table2 {
            d,
            k,
            sigma,
            eps,
            alpha,
            replicates,
            seed,
            selector,
            dry_run,
            output,
            report_json,
        } => {
            let config = selector.build()?;
            let instance = benchmark_instance(*d, *k, *sigma, *eps)?;
            if *dry_run {
                print!("{}", dry_run_summary(&instance, &config)?);
                return Ok(());
            }
            if alpha.is_empty() {
                return Err(Error::InvalidArgument("need at least one --alpha".into()));
            }
            let scaled = benchmark_scaled_subset(*d, *k)?;
            let reports =
                risk::sweep_signal_scale(&instance, &scaled, alpha, &config, *replicates, *seed)?;
            let wall: f64 = reports.iter().map(|r| r.wall_time).sum();
            eprintln!("# wall_time_s={wall:.3}");
            let beta = instance.beta(*k)?;
            let csv = report::risk_table_csv(&[(*k as u32, *d, beta, reports.clone())]);
            if let Some(path) = report_json {
                write_file(&resolve(&cli.out_dir, path), &report::to_json_pretty(&reports))?;
            }
            emit(&cli.out_dir, output.as_deref(), &csv)
        }
        Command::Simulate {
            config,
            seed,
            replicates,
            dry_run,
            output,
        } => {
            let text = std::fs::read_to_string(config)
                .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", config.display())))?;
            let mut experiment = ExperimentConfig::parse(&text)?;
            if let Some(s) = seed {
                experiment.seed = *s;
            }
            if let Some(j) = replicates {
                experiment.replicates = *j;
            }
            let instance = experiment.build_instance()?;
            if *dry_run {
                print!("{}", dry_run_summary(&instance, &experiment.selector)?);
                // normalized config echo; parse(emit(c)) == c
                print!("{}", experiment.emit());
                return Ok(());
            }
            let json = match experiment.sweep_subset()? {
                Some((subset, alphas)) => {
                    let reports = risk::sweep_signal_scale(
                        &instance,
                        &subset,
                        &alphas,
                        &experiment.selector,
                        experiment.replicates,
                        experiment.seed,
                    )?;
                    eprintln!(
                        "# wall_time_s={:.3}",
                        reports.iter().map(|r| r.wall_time).sum::<f64>()
                    );
                    report::to_json_pretty(&reports)
                }
                None => {
                    let report = risk::estimate_risk(
                        &instance,
                        &experiment.selector,
                        experiment.replicates,
                        experiment.seed,
                    )?;
                    eprintln!("# wall_time_s={:.3}", report.wall_time);
                    report::to_json_pretty(&report)
                }
            };
            emit(&cli.out_dir, output.as_deref(), &json)
        }
        Command::Dichotomy {
            k,
            sigma,
            eps,
            d,
            beta,
            margin,
            replicates,
            seed,
            selector,
            dry_run,
            output,
        } => {
            let config = selector.build()?;
            if *dry_run {
                let grid = build_grid(*d, *k, *sigma, *eps, &config)?;
                print!("{}", grid_summary(&grid));
                return Ok(());
            }
            let report = risk::boundary_dichotomy_experiment(
                *k, *sigma, *eps, *d, *beta, *margin, &config, *replicates, *seed,
            )?;
            eprintln!("# wall_time_s={:.3}", report.wall_time);
            emit(&cli.out_dir, output.as_deref(), &report::to_json_pretty(&report))
        }
    }
}

/// Extremal profile with summary diagnostics (the closed-form small-radius
/// value alongside the exact one) and an optional per-frequency expansion.
#[derive(Serialize)]
struct ProfileReport<'a> {
    #[serde(flatten)]
    profile: &'a ExtremalProfile,
    support_size: u64,
    a_value_asymptotic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    frequencies: Option<Vec<(Vec<i32>, f64, f64)>>,
}

impl<'a> ProfileReport<'a> {
    fn new(profile: &'a ExtremalProfile, expand: bool) -> Result<Self, Error> {
        let support_size = profile.support_size();
        let frequencies = if expand {
            if support_size > 200_000 {
                return Err(Error::InvalidArgument(format!(
                    "support of {support_size} frequencies is too large to expand"
                )));
            }
            Some(
                profile
                    .frequencies()
                    .into_iter()
                    .map(|(f, theta_sq, weight)| (f.entries().to_vec(), theta_sq, weight))
                    .collect(),
            )
        } else {
            None
        };
        Ok(ProfileReport {
            profile,
            support_size,
            a_value_asymptotic: fanova_select::extremal::a_asymptotic(
                profile.k,
                profile.sigma,
                profile.epsilon_noise,
                profile.r,
                fanova_select::extremal::AsymptoticRegime::FixedK,
            ),
            frequencies,
        })
    }
}

/// β, ϵ, τ, and the per-node grid of an instance, without sampling.
fn dry_run_summary(instance: &ModelInstance, config: &SelectorConfig) -> Result<String, Error> {
    let mut out = String::new();
    let eps_override = match instance.orders() {
        Orders::Single(_) => None,
        Orders::UpTo(s) => Some(config.aggregate_epsilon(instance.d(), s)),
    };
    for k in instance.orders().iter() {
        let beta = instance.beta(k)?;
        let grid = build_grid_with_epsilon(
            instance.d(),
            k,
            instance.sigma(),
            instance.epsilon_noise(),
            config,
            eps_override,
        )?;
        out.push_str(&format!(
            "order k={k}: d={} beta={beta:.4} log_binom={:.4} epsilon={:.4} tau={:.4}\n",
            instance.d(),
            grid.log_binom,
            grid.epsilon,
            grid.tau
        ));
        for (m, node) in grid.nodes.iter().enumerate() {
            out.push_str(&format!(
                "  node {:2}: beta={:.4} r_star={:.6e} threshold={:.4} support={}\n",
                m + 1,
                node.beta,
                node.r_star,
                node.threshold,
                grid.node_support_size(m)
            ));
        }
    }
    Ok(out)
}

fn grid_summary(grid: &fanova_select::selector::SelectorGrid) -> String {
    let mut out = format!(
        "grid: d={} k={} epsilon={:.4} tau={:.4}\n",
        grid.d, grid.k, grid.epsilon, grid.tau
    );
    for (m, node) in grid.nodes.iter().enumerate() {
        out.push_str(&format!(
            "  node {:2}: beta={:.4} r_star={:.6e} threshold={:.4} support={}\n",
            m + 1,
            node.beta,
            node.r_star,
            node.threshold,
            grid.node_support_size(m)
        ));
    }
    out
}

/// Evenly spaced points strictly inside (0, upper).
fn interior_grid(steps: usize, upper: f64) -> Vec<f64> {
    (1..=steps)
        .map(|i| upper * i as f64 / (steps + 1) as f64)
        .collect()
}

fn resolve(out_dir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        out_dir.join(path)
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::InvalidArgument(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, content)
        .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))?;
    eprintln!("# wrote {}", path.display());
    Ok(())
}

/// Write to the resolved path, or to stdout when no path was given.
fn emit(out_dir: &Path, output: Option<&Path>, content: &str) -> Result<(), Error> {
    match output {
        Some(path) => write_file(&resolve(out_dir, path), content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}
