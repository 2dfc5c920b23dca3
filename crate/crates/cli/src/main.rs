//! `riskcal`: loss-calibrated prior analysis for Bayesian model selection.
//!
//! One subcommand per pipeline; JSON for structured reports, CSV for
//! tables; logs on stderr, stdout clean for piping. Every run writes a
//! `<command>.meta.json` recording the version, full argument list, and
//! seed next to its artifacts.

mod parse;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use riskcal_bca::{
    coclustering_matrix, dpmm_sample, galaxy_pipeline, galaxy_velocities, read_velocities,
    DpmmConfig, NigBase, PipelineConfig,
};
use riskcal_bvs::{run_simulation, LikelihoodConfig, SimulationConfig};
use riskcal_core::estimator::{
    greedy_minimizer, highest_probability_model, quantile_probability_model, CoClustering,
    GammaPosterior, PartitionObjective, PartitionPosterior, SearchConfig,
};
use riskcal_core::loss::LossSpec;
use riskcal_core::model::{refinement_chain, Model, SpaceKind};
use riskcal_core::prior::calibrate;
use riskcal_core::risk::{
    chain_risk, check_equilibrium, check_penalization, prior_risk, solve_equilibrium, RiskMethod,
    RouteChoice,
};

#[derive(Parser)]
#[command(name = "riskcal", version, about = "Loss-calibrated prior analysis for Bayesian model selection")]
struct Cli {
    /// Master seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Output format for risk profiles.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Prior risk profile over the full model space.
    Risk {
        /// Prior (JSON or shorthand like crp:1).
        #[arg(long)]
        prior: String,
        /// Loss (01, GH, GB, VI, VI-LB, or a matrix CSV path).
        #[arg(long)]
        loss: String,
        /// Loss weight when not inline in --loss.
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        p: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
        method: MethodArg,
        /// Monte-Carlo sample count (monte-carlo method only).
        #[arg(long, default_value_t = 100_000)]
        mc_samples: usize,
    },
    /// Certify risk-equilibrium / risk-penalization status.
    Check {
        #[arg(long)]
        prior: String,
        #[arg(long)]
        loss: String,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = CheckKind::Both)]
        kind: CheckKind,
        #[arg(long, value_enum, default_value_t = RouteArg::Auto)]
        route: RouteArg,
    },
    /// Solve for the risk-equilibrium prior of an explicit loss matrix.
    SolvePrior {
        /// Loss matrix CSV (header of model ids, square body).
        #[arg(long)]
        loss: PathBuf,
    },
    /// Solve for the hyperparameter matching a target summary.
    Calibrate {
        /// Family: crp, crp2:<sigma>, beta-binomial, dir-mult:<alpha>,
        /// balance-neutral, hierarchical-uniform:<p>.
        #[arg(long)]
        family: String,
        /// Target marginal summary in (0,1).
        #[arg(long)]
        target: f64,
    },
    /// Bayes estimator from a posterior summary on disk.
    Estimate {
        #[arg(long, value_parser = parse::parse_space)]
        space: SpaceKind,
        /// Hypercube: CSV rows of (model, probability).
        #[arg(long)]
        posterior: Option<PathBuf>,
        /// Partitions: CSV of canonical draws, one per line.
        #[arg(long)]
        draws: Option<PathBuf>,
        /// Partitions: header-free square co-clustering CSV; enough for
        /// GB(a) and VI-LB when no draws are available.
        #[arg(long)]
        coclustering: Option<PathBuf>,
        #[arg(long)]
        loss: String,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long, default_value_t = 16)]
        restarts: usize,
    },
    /// Replicated variable-selection study (distance and size tables).
    BvsSim {
        /// Full simulation config JSON; overrides the other flags.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        p: usize,
        #[arg(long, default_value_t = 200)]
        replicates: usize,
        #[arg(long, default_value_t = 9.0)]
        sigma2: f64,
        /// True coefficients, comma-separated; default: three +1, three -1,
        /// zeros elsewhere.
        #[arg(long)]
        beta: Option<String>,
        /// Loss weights; each also fixes a matched beta-binomial prior
        /// column. A zero-one row and a uniform-prior column are appended.
        #[arg(long, default_value = "0.7,0.8,0.9,1.0,1.1,1.2,1.3")]
        weights: String,
        /// Weight of the reference (prior, loss) pair.
        #[arg(long, default_value_t = 1.0)]
        reference_weight: f64,
        /// Fixed g for the coefficient prior (default: g = n).
        #[arg(long)]
        g: Option<f64>,
        /// Integrate g over the heavy-tailed mixture instead of fixing it.
        #[arg(long, default_value_t = false)]
        zellner_siow: bool,
    },
    /// Fit the Dirichlet-process mixture and write posterior draws.
    BcaFit {
        /// Velocity file (newline-separated); defaults to the bundled
        /// galaxy data, or $RISKCAL_DATA_DIR/galaxy.txt when set.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 20_000)]
        iterations: usize,
        #[arg(long, default_value_t = 5_000)]
        burn_in: usize,
        #[arg(long, default_value_t = 5)]
        thinning: usize,
        /// Sample the prior instead of the posterior.
        #[arg(long, default_value_t = false)]
        prior_only: bool,
    },
    /// Full clustering analysis (distance and cluster-count tables).
    BcaReport {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Generalized-Binder weights, comma-separated.
        #[arg(long, default_value = "0.7,0.8,0.9,1.0,1.1,1.2,1.3")]
        weights: String,
        #[arg(long, default_value_t = 20_000)]
        iterations: usize,
        #[arg(long, default_value_t = 5_000)]
        burn_in: usize,
        #[arg(long, default_value_t = 5)]
        thinning: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 16)]
        restarts: usize,
    },
    /// Prior risks along a refinement chain.
    Chain {
        #[arg(long)]
        prior: String,
        #[arg(long)]
        p: usize,
        /// Comma-separated losses, e.g. GB:1,VI,VI-LB.
        #[arg(long, default_value = "GB:1,VI,VI-LB")]
        losses: String,
        #[arg(long, default_value = "balanced-split")]
        strategy: String,
        #[arg(long, default_value_t = 100_000)]
        mc_samples: usize,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Exact,
    ClosedForm,
    MonteCarlo,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckKind {
    Equilibrium,
    Penalization,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RouteArg {
    Auto,
    Characterization,
    Enumeration,
}

impl From<RouteArg> for RouteChoice {
    fn from(r: RouteArg) -> Self {
        match r {
            RouteArg::Auto => RouteChoice::Auto,
            RouteArg::Characterization => RouteChoice::Characterization,
            RouteArg::Enumeration => RouteChoice::Enumeration,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("riskcal: failed to size thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("riskcal: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[derive(Serialize)]
struct RunMeta {
    version: &'static str,
    command: Vec<String>,
    seed: u64,
    timestamp_unix: u64,
}

fn write_meta(out: &Path, name: &str, seed: u64) -> Result<()> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let meta = RunMeta {
        version: env!("CARGO_PKG_VERSION"),
        command: std::env::args().collect(),
        seed,
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let path = out.join(format!("{name}.meta.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn emit_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(out.join(format!("{name}.json")), &text)?;
    println!("{text}");
    Ok(())
}

fn resolve_velocities(data: &Option<PathBuf>) -> Result<Vec<f64>> {
    if let Some(path) = data {
        return read_velocities(path).map_err(|e| anyhow::anyhow!("{e}"));
    }
    if let Ok(dir) = std::env::var("RISKCAL_DATA_DIR") {
        let path = PathBuf::from(dir).join("galaxy.txt");
        return read_velocities(&path)
            .map_err(|e| anyhow::anyhow!("loading {}: {e}", path.display()));
    }
    Ok(galaxy_velocities())
}

fn run(cli: &Cli) -> Result<()> {
    let out = &cli.out;
    match &cli.command {
        Command::Risk { prior, loss, a, p, method, mc_samples } => {
            write_meta(out, "risk", cli.seed)?;
            let prior = parse::parse_prior(prior)?;
            let loss = parse::parse_loss(loss, *a)?;
            let method = match method {
                MethodArg::Exact => RiskMethod::ExactEnumeration,
                MethodArg::ClosedForm => RiskMethod::ClosedForm,
                MethodArg::MonteCarlo => {
                    RiskMethod::MonteCarlo { n: *mc_samples, seed: cli.seed }
                }
            };
            let profile = prior_risk(&prior, &loss, *p, method)?;
            match cli.format {
                Format::Csv => {
                    let path = out.join("risk_profile.csv");
                    profile.to_csv(&path)?;
                    eprintln!("riskcal: wrote {}", path.display());
                }
                Format::Json => emit_json(out, "risk_profile", &profile)?,
            }
            Ok(())
        }
        Command::Check { prior, loss, a, p, tol, kind, route } => {
            write_meta(out, "check", cli.seed)?;
            let prior = parse::parse_prior(prior)?;
            let loss = parse::parse_loss(loss, *a)?;
            #[derive(Serialize)]
            struct CheckReport {
                prior: String,
                loss: String,
                p: usize,
                tol: f64,
                #[serde(skip_serializing_if = "Option::is_none")]
                equilibrium: Option<riskcal_core::risk::EquilibriumReport>,
                #[serde(skip_serializing_if = "Option::is_none")]
                penalization: Option<riskcal_core::risk::PenalizationReport>,
            }
            let mut report = CheckReport {
                prior: prior.to_string(),
                loss: loss.name(),
                p: *p,
                tol: *tol,
                equilibrium: None,
                penalization: None,
            };
            if matches!(kind, CheckKind::Equilibrium | CheckKind::Both) {
                report.equilibrium =
                    Some(check_equilibrium(&prior, &loss, *p, *tol, (*route).into())?);
            }
            if matches!(kind, CheckKind::Penalization | CheckKind::Both) {
                report.penalization =
                    Some(check_penalization(&prior, &loss, *p, *tol, (*route).into())?);
            }
            emit_json(out, "check", &report)
        }
        Command::SolvePrior { loss } => {
            write_meta(out, "solve-prior", cli.seed)?;
            let matrix = riskcal_core::loss::LossMatrix::from_csv(loss)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let solution = solve_equilibrium(&LossSpec::Matrix(matrix))?;
            emit_json(out, "solve_prior", &solution)
        }
        Command::Calibrate { family, target } => {
            write_meta(out, "calibrate", cli.seed)?;
            let family = parse::parse_calibration_family(family)?;
            let value = calibrate(&family, *target)?;
            #[derive(Serialize)]
            struct CalibrateReport {
                family: String,
                target: f64,
                hyperparameter: f64,
                achieved: f64,
            }
            emit_json(
                out,
                "calibrate",
                &CalibrateReport {
                    family: format!("{family:?}"),
                    target: *target,
                    hyperparameter: value,
                    achieved: family.summary(value)?,
                },
            )
        }
        Command::Estimate { space, posterior, draws, coclustering, loss, a, restarts } => {
            write_meta(out, "estimate", cli.seed)?;
            let loss = parse::parse_loss(loss, *a)?;
            #[derive(Serialize)]
            struct EstimateReport {
                model: Model,
                complexity: usize,
                risk: f64,
                loss: String,
            }
            let report = match space {
                SpaceKind::Hypercube => {
                    let path = posterior
                        .as_ref()
                        .context("--posterior is required for the hypercube space")?;
                    let table = GammaPosterior::from_csv(path)?;
                    let estimate = match &loss {
                        LossSpec::Gh { a } => {
                            quantile_probability_model(&table.inclusion_probabilities(), *a)?
                        }
                        LossSpec::ZeroOne => highest_probability_model(&table),
                        other => bail!("hypercube estimation supports GH(a) and 01, not {other}"),
                    };
                    EstimateReport {
                        risk: table.risk(&loss, &estimate)?,
                        complexity: estimate.size(),
                        model: Model::Gamma(estimate),
                        loss: loss.name(),
                    }
                }
                SpaceKind::Partitions => {
                    let posterior = match draws {
                        Some(path) => Some(PartitionPosterior::from_csv(path)?),
                        None => None,
                    };
                    let matrix = match (coclustering, &posterior) {
                        (Some(path), _) => CoClustering::from_csv(path)?,
                        (None, Some(posterior)) => posterior.coclustering(),
                        (None, None) => {
                            bail!("--draws or --coclustering is required for the partition space")
                        }
                    };
                    let objective = match &loss {
                        LossSpec::Gb { a } => {
                            PartitionObjective::GbCoClustering { c: matrix, a: *a }
                        }
                        LossSpec::Vi => PartitionObjective::ViDraws {
                            draws: posterior
                                .as_ref()
                                .context("the VI risk needs --draws, not just a matrix")?
                                .draws()
                                .to_vec(),
                        },
                        LossSpec::ViLb => PartitionObjective::ViLbCoClustering { c: matrix },
                        other => {
                            bail!("partition estimation supports GB(a), VI, and VI-LB, not {other}")
                        }
                    };
                    let cfg =
                        SearchConfig { restarts: *restarts, seed: cli.seed, ..Default::default() };
                    let estimate = greedy_minimizer(&objective, &cfg)?;
                    EstimateReport {
                        risk: objective.risk(&estimate)?,
                        complexity: estimate.n_clusters(),
                        model: Model::Partition(estimate),
                        loss: loss.name(),
                    }
                }
            };
            emit_json(out, "estimate", &report)
        }
        Command::BvsSim {
            config,
            n,
            p,
            replicates,
            sigma2,
            beta,
            weights,
            reference_weight,
            g,
            zellner_siow,
        } => {
            write_meta(out, "bvs-sim", cli.seed)?;
            let cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str::<SimulationConfig>(&text)?
                }
                None => {
                    let weights = parse::parse_number_list(weights)?;
                    let reference = weights
                        .iter()
                        .position(|w| (w - reference_weight).abs() < 1e-12)
                        .context("--reference-weight must appear in --weights")?;
                    let mut priors: Vec<_> = weights
                        .iter()
                        .map(|&a| {
                            parse::parse_prior(&format!(
                                "beta-binomial:{a},{}",
                                ((2.0 - a) * 1e6).round() / 1e6
                            ))
                        })
                        .collect::<Result<_>>()?;
                    priors.push(riskcal_core::prior::PriorSpec::UniformGamma);
                    let mut losses: Vec<LossSpec> = weights
                        .iter()
                        .map(|&a| LossSpec::gh(a))
                        .collect::<riskcal_core::Result<_>>()?;
                    losses.push(LossSpec::ZeroOne);
                    let likelihood = if *zellner_siow {
                        LikelihoodConfig::ZellnerSiow { nodes: 128 }
                    } else {
                        LikelihoodConfig::GPrior { g: g.unwrap_or(*n as f64) }
                    };
                    SimulationConfig {
                        n: *n,
                        p: *p,
                        beta: match beta {
                            Some(text) => parse::parse_number_list(text)?,
                            None => {
                                let mut b = vec![0.0; *p];
                                for (j, v) in b.iter_mut().enumerate().take(6.min(*p)) {
                                    *v = if j < 3 { 1.0 } else { -1.0 };
                                }
                                b
                            }
                        },
                        sigma2: *sigma2,
                        replicates: *replicates,
                        priors,
                        losses,
                        reference_prior: reference,
                        reference_loss: reference,
                        likelihood,
                        master_seed: cli.seed,
                    }
                }
            };
            std::fs::write(out.join("bvs_sim_config.json"), serde_json::to_string_pretty(&cfg)?)?;
            let report = run_simulation(&cfg)?;
            report.distance.to_csv(&out.join("bvs_distance.csv"))?;
            report.size.to_csv(&out.join("bvs_size.csv"))?;
            let se_table = |t: &riskcal_core::report::ReportTable| riskcal_core::report::ReportTable {
                row_names: t.row_names.clone(),
                col_names: t.col_names.clone(),
                mean: t.se.clone(),
                se: t.se.clone(),
            };
            se_table(&report.distance).to_csv(&out.join("bvs_distance_se.csv"))?;
            se_table(&report.size).to_csv(&out.join("bvs_size_se.csv"))?;
            eprintln!("riskcal: wrote bvs_distance.csv / bvs_size.csv to {}", out.display());
            Ok(())
        }
        Command::BcaFit { data, theta, iterations, burn_in, thinning, prior_only } => {
            write_meta(out, "bca-fit", cli.seed)?;
            let values = resolve_velocities(data)?;
            let cfg = DpmmConfig {
                theta: *theta,
                base: NigBase::empirical(&values),
                iterations: *iterations,
                burn_in: *burn_in,
                thinning: *thinning,
                seed: cli.seed,
                prior_only: *prior_only,
            };
            let draws = dpmm_sample(&values, &cfg)?;
            let path = out.join("draws.csv");
            draws.to_csv(&path)?;
            coclustering_matrix(&draws).to_csv(&out.join("coclustering.csv"))?;
            eprintln!(
                "riskcal: wrote {} draws to {} (and coclustering.csv)",
                draws.draws().len(),
                path.display()
            );
            Ok(())
        }
        Command::BcaReport { data, weights, iterations, burn_in, thinning, repeats, restarts } => {
            write_meta(out, "bca-report", cli.seed)?;
            let values = resolve_velocities(data)?;
            let cfg = PipelineConfig {
                weights: parse::parse_number_list(weights)?,
                iterations: *iterations,
                burn_in: *burn_in,
                thinning: *thinning,
                restarts: *restarts,
                repeats: *repeats,
                seed: cli.seed,
                base: None,
            };
            let report = galaxy_pipeline(&values, &cfg)?;
            report.distance.to_csv(&out.join("bca_distance.csv"))?;
            report.clusters.to_csv(&out.join("bca_clusters.csv"))?;
            eprintln!("riskcal: wrote bca_distance.csv / bca_clusters.csv to {}", out.display());
            Ok(())
        }
        Command::Chain { prior, p, losses, strategy, mc_samples } => {
            write_meta(out, "chain", cli.seed)?;
            if *p < 2 {
                bail!("refinement chains need p >= 2, got {p}");
            }
            let prior = parse::parse_prior(prior)?;
            let losses = parse::parse_losses(losses)?;
            let strategy = parse::parse_strategy(strategy, cli.seed)?;
            let chain = refinement_chain(*p, strategy);
            let table = chain_risk(&prior, &chain, &losses, *mc_samples, cli.seed)?;
            let path = out.join("chain.csv");
            table.to_csv(&path)?;
            eprintln!("riskcal: wrote {}", path.display());
            Ok(())
        }
    }
}
