//! Batch driver: named verification scenarios, flat-file configs,
//! deterministic reports, CSV tables and SVG heatmaps.
//!
//! Exit codes: 0 when every check passes, 1 with the first failing
//! invariant named on stderr, 2 on configuration errors (nothing is
//! written in that case). The `SPARSEGRAD_OUT` environment variable
//! prefixes every output directory.

mod config;
mod report;
mod scenarios;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_coeff, RawConfig, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "sparsegrad",
    about = "Sparse domination toolkit for gradients of divergence-form elliptic problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario described by a flat key-value config file.
    Run {
        /// Path to the config file.
        config: PathBuf,
    },
    /// List the shipped scenarios.
    List,
    /// Calibrate the measured constants of a coefficient on a domain.
    Calibrate {
        /// Coefficient name: identity, checkerboard, rotation, dini,
        /// log-oscillation, nonlinear, scalar.
        coefficient: String,
        /// Domain name: full-cube, square, disk, l-shape.
        domain: String,
        /// Grid level (cells per unit side = 2^level).
        #[arg(long, default_value_t = 4)]
        level: u32,
        /// Probe count.
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            println!("{:<20} verifies", "scenario");
            for s in scenarios::catalog() {
                println!("{:<20} {}", s.name, s.verifies);
            }
            ExitCode::SUCCESS
        }
        Command::Run { config } => {
            // configuration problems exit 2 before anything is written
            let raw = match RawConfig::load(&config) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(2);
                }
            };
            let cfg = match ScenarioConfig::from_raw(&raw) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(2);
                }
            };
            if !scenarios::catalog().iter().any(|s| s.name == cfg.scenario) {
                eprintln!("config error: unknown scenario `{}`", cfg.scenario);
                return ExitCode::from(2);
            }
            match scenarios::run(&cfg) {
                Ok(outcome) if outcome.pass => {
                    println!(
                        "{}: all checks passed, outputs in {}",
                        cfg.scenario,
                        cfg.resolved_out_dir().display()
                    );
                    ExitCode::SUCCESS
                }
                Ok(outcome) => {
                    eprintln!(
                        "{}: failed invariant `{}`",
                        cfg.scenario,
                        outcome.first_failure.unwrap_or_else(|| "unknown".into())
                    );
                    ExitCode::from(1)
                }
                Err(e) => {
                    eprintln!("{}: run error: {e}", cfg.scenario);
                    ExitCode::from(1)
                }
            }
        }
        Command::Calibrate {
            coefficient,
            domain,
            level,
            trials,
            seed,
        } => match calibrate(&coefficient, &domain, level, trials, seed) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("calibrate error: {e}");
                ExitCode::from(2)
            }
        },
    }
}

fn calibrate(
    coefficient: &str,
    domain: &str,
    level: u32,
    trials: usize,
    seed: u64,
) -> sparsegrad_core::Result<()> {
    use sparsegrad_core::*;
    let grid = Grid::new(2, level)?;
    let spec = parse_coeff(coefficient, 1.0, 4.0, 0.125, 0.5, 0.5, [0.5, 0.5])?;
    let dom_kind = match domain {
        "full-cube" | "cube" => DomainKind::FullCube,
        "square" => DomainKind::Square,
        "disk" => DomainKind::Disk,
        "l-shape" | "lshape" => DomainKind::LShape,
        other => return Err(Error::Parse(format!("unknown domain `{other}`"))),
    };
    let cfg = SolverConfig::for_grid(&grid);
    println!("grid: {0}x{0} (level {level})", grid.side());
    println!("c_n (discrete Sobolev): {:.6}", cfg.sobolev_constant);
    println!(
        "K_M certified: {} / measured: {:.6}",
        maximal_weak_norm_bound(2),
        measure_weak_norm_ratio(&grid, trials.max(20), seed)?
    );
    let rh = estimate_reverse_holder(
        &grid,
        &spec,
        Some(dom_kind),
        4.0,
        RhMode::Boundary,
        trials,
        seed,
        &cfg,
    )?;
    println!(
        "B = N_h (q = 4, boundary): {:.6} (refined {:.6}, stable: {})",
        rh.constant, rh.refined_constant, rh.stable
    );
    let cal = calibrate_dini_constants(&grid, &spec, Some(dom_kind), trials, 3, seed, &cfg)?;
    println!(
        "C_w: {:.6} (refined {:.6}, stable: {})",
        cal.c_w, cal.c_w_refined, cal.c_w_stable
    );
    println!(
        "C_S: {:.6} (refined {:.6}, stable: {})",
        cal.c_s, cal.c_s_refined, cal.c_s_stable
    );
    println!(
        "C_inf: {:.6} (refined {:.6}, stable: {})",
        cal.c_inf, cal.c_inf_refined, cal.c_inf_stable
    );
    Ok(())
}
