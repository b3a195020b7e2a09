// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;
mod output;
mod stages;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rdsdim::bound::BoundInputs;
use rdsdim::geometry::NormKind;

use config::RunConfig;
use error::CliError;
use output::{sha256_hex, OutDir, Provenance};
use stages::Run;

/// Default output directory when neither `--out` nor `output_dir` is given.
const OUT_ENV: &str = "RDSDIM_OUT";
const DEFAULT_OUT: &str = "rdsdim-out";

#[derive(Parser, Debug)]
#[command(
    name = "rdsdim",
    version,
    about = "Simulation, spectral data and dimension bounds for a stochastic delayed reaction-diffusion equation"
)]
struct Cli {
    /// Run configuration (JSON or TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides `numerics.seeds` with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: `output_dir`, then $RDSDIM_OUT, then ./rdsdim-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Ten times smaller ensembles and runs.
    #[arg(long, global = true)]
    quick: bool,
    /// Worker threads for ensemble work (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Characteristic roots, spectral projection and the constants K, M.
    Spectrum,
    /// One trajectory from a zero history, written as CSV.
    Simulate,
    /// Time averages of R and R² along the noise path.
    Ergodic,
    /// Feasibility condition and Hausdorff-dimension bound.
    Bound {
        /// Evaluate these bound inputs directly instead of estimating them.
        #[arg(long)]
        inputs: Option<PathBuf>,
    },
    /// Pullback sample of the attractor.
    Pullback,
    /// Box-counting and correlation dimension of a cloud.
    Boxdim {
        /// Existing cloud file; a fresh pullback sample is used otherwise.
        #[arg(long)]
        cloud: Option<PathBuf>,
    },
    /// Audit of the covering lemma with an explicit grid cover.
    Cover {
        /// Dimension; audits m = 1..=4 when absent.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        r1: f64,
        /// Outer radius; audits r2/r1 ∈ {1, 2, 5} when absent.
        #[arg(long)]
        r2: Option<f64>,
        #[arg(long, value_enum, default_value_t = Norm::Sup)]
        norm: Norm,
    },
    /// Checks the squeezing inequalities on pairs of cloud points.
    VerifySqueeze,
    /// All stages in dependency order.
    Pipeline,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Norm {
    Sup,
    Euclidean,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Spectrum => "spectrum",
        Command::Simulate => "simulate",
        Command::Ergodic => "ergodic",
        Command::Bound { .. } => "bound",
        Command::Pullback => "pullback",
        Command::Boxdim { .. } => "boxdim",
        Command::Cover { .. } => "cover",
        Command::VerifySqueeze => "verify-squeeze",
        Command::Pipeline => "pipeline",
    }
}

fn out_dir(flag: Option<PathBuf>, from_config: Option<PathBuf>) -> PathBuf {
    flag.or(from_config)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::config("--workers", "must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError { code: error::EXIT_INTERNAL, message: format!("thread pool: {e}") })?;
    }
    let command = command_name(&cli.command);
    let provenance = |hash: String, seed: u64| Provenance {
        tool: "rdsdim",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        config_sha256: hash,
        seed,
        quick: cli.quick,
    };

    // Subcommands that can run without a configuration file.
    match &cli.command {
        Command::Bound { inputs: Some(path) } => {
            let bytes = read_file(path)?;
            let inputs: BoundInputs = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::parse(format!("bound inputs {}: {e}", path.display())))?;
            let out = OutDir::create(out_dir(cli.out, None), provenance(sha256_hex(&bytes), cli.seed.unwrap_or(0)))?;
            let report = stages::bound_from_inputs(&out, &inputs)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).map_err(|e| CliError::io("encoding report".into(), e))?
            );
            return Ok(());
        }
        Command::Cover { m, r1, r2, norm } if cli.config.is_none() => {
            let cases = cover_cases(*m, *r1, *r2);
            let out = OutDir::create(out_dir(cli.out, None), provenance(sha256_hex(b""), cli.seed.unwrap_or(0)))?;
            let kind = match norm {
                Norm::Sup => NormKind::Sup,
                Norm::Euclidean => NormKind::Euclidean,
            };
            return run_cover(&out, &cases, kind);
        }
        _ => {}
    }

    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::config("--config", "this subcommand needs a configuration file"))?;
    let cfg = RunConfig::load(path)?.resolve(cli.seed, cli.quick)?;
    let mut hashed = cfg.clone();
    hashed.output_dir = None;
    let canonical = serde_json::to_vec(&hashed).map_err(|e| CliError::io("encoding config".into(), e))?;
    let out = OutDir::create(out_dir(cli.out, cfg.output_dir.clone()), provenance(sha256_hex(&canonical), cfg.seed()))?;
    out.write_report("config.json", &hashed)?;
    let mut run = Run::new(cfg, out);
    match cli.command {
        Command::Spectrum => drop(run.spectrum()?),
        Command::Simulate => run.simulate()?,
        Command::Ergodic => drop(run.ergodic()?),
        Command::Bound { .. } => drop(run.bound()?),
        Command::Pullback => drop(run.pullback()?),
        Command::Boxdim { cloud } => drop(run.boxdim(cloud)?),
        Command::Cover { m, r1, r2, norm } => {
            let kind = match norm {
                Norm::Sup => NormKind::Sup,
                Norm::Euclidean => NormKind::Euclidean,
            };
            run_cover(&run.out, &cover_cases(m, r1, r2), kind)?
        }
        Command::VerifySqueeze => drop(run.verify_squeeze()?),
        Command::Pipeline => run.pipeline()?,
    }
    Ok(())
}

fn cover_cases(m: Option<usize>, r1: f64, r2: Option<f64>) -> Vec<(usize, f64, f64)> {
    let ms: Vec<usize> = m.map_or_else(|| (1..=4).collect(), |m| vec![m]);
    let r2s: Vec<f64> = r2.map_or_else(|| [1.0, 2.0, 5.0].iter().map(|q| q * r1).collect(), |r| vec![r]);
    ms.iter().flat_map(|&m| r2s.iter().map(move |&r2| (m, r1, r2))).collect()
}

fn run_cover(out: &OutDir, cases: &[(usize, f64, f64)], kind: NormKind) -> Result<(), CliError> {
    if stages::cover_audit(out, cases, kind)? {
        Ok(())
    } else {
        Err(CliError {
            code: error::EXIT_INTERNAL,
            message: "covering lemma bound exceeded by the constructed cover".into(),
        })
    }
}
