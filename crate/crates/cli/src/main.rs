use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use asd_core::density::KernelSpec;
use asd_core::harness::commands::{self, DensifyArgs};
use asd_core::AsdError;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "asd",
    version,
    about = "Density-map crowd counting with adaptive scenario discovery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Adaptive,
    Fixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Render a ground-truth density map from point annotations
    Densify {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, value_enum, default_value = "adaptive")]
        mode: Mode,
        #[arg(long, default_value_t = 0.3)]
        beta: f64,
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Kernel width in fixed mode, and the fallback for a lone head in adaptive mode
        #[arg(long, default_value_t = 15.0)]
        sigma: f64,
        #[arg(long, value_enum, default_value = "on")]
        normalize: Switch,
        #[arg(long)]
        out: PathBuf,
        /// Also write the map as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also write the map as a PGM heatmap
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
    /// Generate a synthetic dataset directory
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train a model and write a checkpoint plus its training log
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-image counts and MAE/MSE of a checkpoint
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Experiment config whose kernel section rebuilds the ground truth
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for PGM heatmaps of the predicted maps
        #[arg(long)]
        heatmaps: Option<PathBuf>,
    },
    /// Group images by the bin their gate response falls in
    Scenarios {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        bins: usize,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train every (variant, bins) cell and tabulate MAE/MSE
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Finite-difference checks of the autodiff graph
    Gradcheck {
        #[arg(long)]
        op: Option<String>,
        #[arg(long)]
        seed: u64,
    },
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Densify {
            annotations,
            mode,
            beta,
            k,
            sigma,
            normalize,
            out,
            csv,
            pgm,
        } => {
            let kernel = KernelSpec {
                mode: match mode {
                    Mode::Adaptive => "geometry_adaptive",
                    Mode::Fixed => "fixed",
                }
                .to_string(),
                beta,
                k,
                fixed_sigma: sigma,
                normalize_mass: matches!(normalize, Switch::On),
                ..KernelSpec::default()
            };
            let map = commands::densify(&DensifyArgs {
                annotations,
                kernel,
                out: out.clone(),
                csv,
                pgm,
            })?;
            println!(
                "{}x{} map, count {:.6} -> {}",
                map.height(),
                map.width(),
                map.count(),
                out.display()
            );
        }
        Command::Synth { config, out_dir } => {
            let n = commands::synth(&config, &out_dir)?;
            println!("{n} images -> {}", out_dir.display());
        }
        Command::Train {
            data,
            config,
            seed,
            out,
        } => {
            let outcome = commands::train(&data, &config, seed, &out)?;
            let last = outcome.log.last().context("training produced no epochs")?;
            println!(
                "epoch {} loss {:.6} mae {:.4} mse {:.4} -> {}",
                last.epoch,
                last.loss,
                last.mae,
                last.mse,
                out.display()
            );
        }
        Command::Eval {
            data,
            model,
            report,
            config,
            heatmaps,
        } => {
            let kernel = commands::kernel_from(config.as_deref())?;
            let (m, rows) = commands::eval(&data, &model, &report, &kernel, heatmaps.as_deref())?;
            println!("{} images: mae {:.4} mse {:.4}", rows.len(), m.mae, m.mse);
        }
        Command::Scenarios {
            data,
            model,
            bins,
            report,
            config,
        } => {
            let kernel = commands::kernel_from(config.as_deref())?;
            let r = commands::scenarios(&data, &model, bins, &report, &kernel)?;
            println!("{} of {} bins occupied", r.occupied_bin_count, r.bins);
            for (bin, ids) in &r.members {
                println!("  bin {bin}: {} images", ids.len());
            }
        }
        Command::Ablate {
            data,
            config,
            report,
        } => {
            let table = commands::ablate(&data, &config, &report)?;
            for c in &table.cells {
                match (&c.error, c.mae, c.mse) {
                    (None, Some(mae), Some(mse)) => {
                        println!(
                            "{:<12} bins {:>4}  mae {mae:.4}  mse {mse:.4}",
                            c.variant, c.bins
                        )
                    }
                    (e, _, _) => println!(
                        "{:<12} bins {:>4}  failed: {}",
                        c.variant,
                        c.bins,
                        e.as_deref().unwrap_or("?")
                    ),
                }
            }
        }
        Command::Gradcheck { op, seed } => {
            let outcomes = commands::gradcheck(op.as_deref(), seed)?;
            let mut ok = true;
            for o in &outcomes {
                println!(
                    "{:<4} {:<28} max rel err {:.3e} (tol {:.0e})",
                    if o.passed { "ok" } else { "FAIL" },
                    o.name,
                    o.max_rel_error,
                    o.tolerance
                );
                ok &= o.passed;
            }
            if !ok {
                return Ok(ExitCode::from(4));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<AsdError>().map_or(1, AsdError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
