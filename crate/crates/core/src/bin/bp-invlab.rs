use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bp_invlab::acceptance::run_criteria;
use bp_invlab::bench::protocols::{STREAM_SENSING, STREAM_SUPPORTS};
use bp_invlab::bench::{emit_csv, run_experiment, ExperimentConfig};
use bp_invlab::rate_lab::{estimate_restricted_rates, DEFAULT_NUM_SUPPORTS};
use bp_invlab::transforms::gaussian_sensing;
use bp_invlab::{Error, SeededRng};

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "bp-invlab", version, about = "LS vs BP fidelity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Apply the config's [paper_scale] overrides.
        #[arg(long)]
        paper_scale: bool,
        /// Output CSV; overrides `output` in the config, stdout if neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo restricted rates for one Gaussian operator.
    Rates {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_NUM_SUPPORTS)]
        supports: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the acceptance suite; optional criterion numbers restrict it.
    Check { criteria: Vec<u32> },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            paper_scale,
            out,
        } => run(config, paper_scale, out),
        Command::Rates {
            n,
            m,
            k,
            supports,
            seed,
        } => rates(n, m, k, supports, seed),
        Command::Check { criteria } => {
            let outcomes = run_criteria(&criteria, |o| println!("{o}"));
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
            exit(failed == 0)
        }
    }
}

fn exit(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILED)
    }
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("bp-invlab: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn run(config: PathBuf, paper_scale: bool, out: Option<PathBuf>) -> ExitCode {
    let cfg = match ExperimentConfig::load(&config) {
        Ok(c) if paper_scale => c.at_paper_scale(),
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let report = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => return config_error(e),
        Err(e) => {
            eprintln!("bp-invlab: {e}");
            return ExitCode::from(EXIT_FAILED);
        }
    };
    for f in &report.failures {
        let fidelity = f.fidelity.map(|k| k.to_string()).unwrap_or_else(|| "-".into());
        let param = f.param.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
        eprintln!(
            "failed cell: seed={} image={} solver={} fidelity={fidelity} param={param}: {}",
            f.seed, f.image, f.solver, f.message
        );
    }
    let written = match out.or(cfg.output.clone()) {
        Some(path) => emit_csv(&report.table, &path).map(|_| {
            eprintln!("wrote {} rows to {}", report.table.len(), path.display());
        }),
        None => report.table.write_csv(std::io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("bp-invlab: {e}");
        return ExitCode::from(EXIT_FAILED);
    }
    exit(report.ok())
}

fn rates(n: usize, m: usize, k: usize, supports: usize, seed: u64) -> ExitCode {
    let op = match gaussian_sensing(m, n, &SeededRng::new(seed, STREAM_SENSING)) {
        Ok(op) => op,
        Err(e) => return config_error(e),
    };
    match estimate_restricted_rates(&op, k, supports, &SeededRng::new(seed, STREAM_SUPPORTS)) {
        Ok(est) => {
            println!("n={n} m={m} k={k} supports={} seed={seed}", est.num_supports);
            println!("p_ls_hat={:.6}", est.p_ls_hat);
            println!("p_bp_hat={:.6}", est.p_bp_hat);
            println!("ratio={:.6}", est.ratio);
            println!("condition_ratio={:.6}", op.spectral_summary().condition_ratio);
            ExitCode::SUCCESS
        }
        Err(e) => config_error(e),
    }
}
