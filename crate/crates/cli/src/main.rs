use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use magmlmc::experiments::{cmd_convergence, cmd_mc_baseline, cmd_mlmc, cmd_mse_study, cmd_oracle, Check};
use magmlmc::{Error, ExperimentConfig, Strategy};

/// Multilevel Monte Carlo studies of the magnetic energy of a coaxial cable.
#[derive(Debug, Parser)]
#[command(name = "magmlmc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment configuration; the shipped defaults are used otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Comma-separated tolerances in J, e.g. 5e-4,2e-4.
    #[arg(long, global = true, value_delimiter = ',')]
    eps: Option<Vec<f64>>,

    #[arg(long, global = true)]
    strategy: Option<Strategy>,

    /// Worker threads for sample evaluation.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory for the CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Nominal energies, Richardson errors and fitted rates per level.
    Convergence,
    /// Adaptive MLMC estimate for every tolerance.
    Mlmc,
    /// Plain Monte Carlo on the finest level required by each tolerance.
    McBaseline,
    /// Mean-square error over repeated runs for both hierarchy strategies.
    MseStudy,
    /// Print reference values of the configured problem.
    Oracle,
    /// Print the effective configuration as JSON.
    ShowConfig,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(eps) = &cli.eps {
        cfg.eps = eps.clone();
    }
    if let Some(strategy) = cli.strategy {
        cfg.hierarchy.strategy = strategy;
    }
    if let Some(workers) = cli.workers {
        cfg.mlmc.workers = Some(workers);
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(checks: &[Check]) -> bool {
    let mut ok = true;
    for c in checks {
        let status = if c.passed() { "ok" } else { "VIOLATED" };
        println!("check {}: {:.6e} in [{:e}, {:e}] {status}", c.name, c.value, c.lower, c.upper);
        ok &= c.passed();
    }
    ok
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let cfg = load(cli)?;
    let ok = match cli.command {
        Command::Convergence => {
            let r = cmd_convergence(&cfg)?;
            for row in &r.rows {
                println!(
                    "level {} n_dof {} W {:.12e} err_fem {:.3e} err_richardson {:.3e}",
                    row.level, row.n_dof, row.w_nominal, row.err_fem, row.err_richardson
                );
            }
            report(&r.checks)
        }
        Command::Mlmc => {
            let r = cmd_mlmc(&cfg)?;
            for res in &r.results {
                println!(
                    "eps {:e}: mean {:.12e} +- {:.3e} (3 sigma), L {}, cost {:.4e}, samples {:?}",
                    res.eps,
                    res.mean,
                    res.confidence_halfwidth,
                    res.finest_level,
                    res.total_cost,
                    res.samples()
                );
            }
            if let Some(e) = r.reference {
                println!("reference mean {e:.12e}");
            }
            report(&r.checks)
        }
        Command::McBaseline => {
            let (rows, checks) = cmd_mc_baseline(&cfg)?;
            for row in &rows {
                println!(
                    "eps {:e}: mean {:.12e}, L {}, N {}, cost {:.4e}",
                    row.eps, row.mean, row.level, row.n, row.cost
                );
            }
            report(&checks)
        }
        Command::MseStudy => {
            let (rows, checks) = cmd_mse_study(&cfg)?;
            for row in &rows {
                println!("{} eps {:e}: mse {:.4e} (eps^2 {:.4e})", row.strategy, row.eps, row.mse, row.eps * row.eps);
            }
            report(&checks)
        }
        Command::Oracle => {
            for (name, value) in cmd_oracle(&cfg)? {
                println!("{name} {value:.16e}");
            }
            true
        }
        Command::ShowConfig => {
            println!("{}", cfg.to_json());
            true
        }
    };
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
