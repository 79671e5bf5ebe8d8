use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use multirate::experiment::{
    boundcheck, cost_dry_run, gendata, gradcheck, load_config, run_experiment, BoundCheckFile,
};
use multirate::{Error, Result};

#[derive(Parser)]
#[command(name = "multirate", version, about = "Multirate SGD experiments and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed and sweep point of a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run this seed only.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Output directory; defaults to the config's `output`, then
        /// `$MULTIRATE_OUT/<name>`, then `runs/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of the configured model.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Empirical check of the multirate convergence bound.
    Boundcheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Counted vs analytic backward-cost ratio. Lists are comma separated.
    Costmodel {
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 5, 10])]
        k: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [4, 8, 16])]
        layers: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2])]
        fast: Vec<usize>,
    },
    /// Write the generated datasets of a config as binary files.
    Gendata {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed_override: Option<u64>,
        /// Root of the `data/` directory; resolved like `run --out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn single_config(path: &PathBuf) -> Result<multirate::experiment::ExperimentConfig> {
    let mut points = load_config(path)?;
    Ok(points.swap_remove(0).config)
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            seed_override,
            out,
        } => {
            let points = load_config(&config)?;
            let (summary, path) = run_experiment(&points, out.as_deref(), seed_override)?;
            for p in &summary.points {
                let label = if p.label.is_empty() { "base" } else { &p.label };
                for (key, stat) in &p.last {
                    println!("{label}\t{key}\tmean {:.6}\tmin {:.6}\tmax {:.6}", stat.mean, stat.min, stat.max);
                }
            }
            println!("summary written to {}", path.display());
            Ok(true)
        }
        Command::Gradcheck { config } => {
            let report = gradcheck(&single_config(&config)?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.passed)
        }
        Command::Boundcheck { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::Io { path: config.clone(), source: e })?;
            let report = boundcheck(&BoundCheckFile::parse(&text)?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.holds)
        }
        Command::Costmodel { k, layers, fast } => {
            println!("k\tL\tfast\tfull\tmultirate\tcounted\tanalytic\texact");
            let mut all = true;
            for &k in &k {
                for &l in &layers {
                    for &f in fast.iter().filter(|&&f| f <= l) {
                        let row = cost_dry_run(k, l, f)?;
                        all &= row.exact;
                        println!(
                            "{k}\t{l}\t{f}\t{}\t{}\t{}\t{}\t{}",
                            row.full.layer_visits(),
                            row.multirate.layer_visits(),
                            row.counted,
                            row.analytic,
                            row.exact
                        );
                    }
                }
            }
            Ok(all)
        }
        Command::Gendata {
            config,
            seed_override,
            out,
        } => {
            let cfg = single_config(&config)?;
            let seeds = seed_override.map_or_else(|| cfg.seeds.clone(), |s| vec![s]);
            let dir = cfg.output_dir(out.as_deref()).join("data");
            for path in gendata(&cfg, &dir, &seeds)? {
                println!("{}", path.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
