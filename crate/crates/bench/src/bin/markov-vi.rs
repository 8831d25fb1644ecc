use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use markov_vi::gridworld;
use markov_vi_bench::config::{parse_seeds, BudgetKind, GridConfig, Overrides};
use markov_vi_bench::harness::{prepare, resolve, run_experiment, write_outputs, RunOptions};
use markov_vi_bench::report::{compare_report, format_summary, load_records};
use markov_vi_bench::{mdp_io, BenchError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "markov-vi", version, about = "Run TD/CTD/FTD experiment matrices and report on them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every (algorithm, seed) cell of a config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
        /// Worker threads (0 = one per core).
        #[arg(long, env = "MARKOV_VI_WORKERS", default_value_t = 0)]
        workers: usize,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Check a config and print the resolved run plan.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Summarize the record CSVs in a results directory.
    Report { dir: PathBuf },
    /// Write a Grid-World MDP and its policy in the text format.
    ExportMdp {
        /// TOML Grid-World spec; every field is optional.
        spec: PathBuf,
        path: PathBuf,
    },
}

#[derive(Clone)]
struct Seeds(Vec<u64>);

#[derive(Args)]
struct RunFlags {
    /// `N` (seeds 0..N), `a..b`, or `a,b,c`.
    #[arg(long, value_parser = |s: &str| parse_seeds(s).map(Seeds))]
    seeds: Option<Seeds>,
    #[arg(long)]
    budget: Option<u64>,
    /// Count the budget in updates instead of samples.
    #[arg(long)]
    iterations: bool,
    #[arg(long = "override-L")]
    override_l: Option<f64>,
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seeds: self.seeds.as_ref().map(|s| s.0.clone()),
            budget: self.budget,
            budget_kind: self.iterations.then_some(BudgetKind::Iterations),
            lip: self.override_l,
            tau: self.tau,
            batch: self.batch,
            output: self.out.clone(),
        }
    }
}

fn load(config: &Path, flags: &RunFlags) -> Result<ExperimentConfig, BenchError> {
    let mut cfg = ExperimentConfig::load(config)?;
    cfg.apply(&flags.overrides())?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode, BenchError> {
    match cli.command {
        Command::Run { config, flags, workers, quiet } => {
            let cfg = load(&config, &flags)?;
            let opts = RunOptions {
                workers: (workers > 0).then_some(workers),
                verbose: !quiet,
            };
            let out = run_experiment(&cfg, &opts)?;
            write_outputs(&cfg.output, &out)?;
            print!("{}", format_summary(&out.summary));
            let failures = out.failures().count();
            if failures > 0 {
                eprintln!("{failures} run(s) failed; see failures.csv");
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config, flags } => {
            let cfg = load(&config, &flags)?;
            let prep = prepare(&cfg)?;
            let p = prep.params;
            println!("dim {} mu {:e} L {:e} sigma {:e} varsigma {:e}", prep.dim(), p.mu, p.lip, p.sigma, p.varsigma);
            println!("algorithm,schedule,tau,batch,budget");
            for a in resolve(&cfg, &prep)? {
                let batch = a.batch_at(1)?;
                println!("{},{},{},{},{:?}", a.name, a.schedule.name(), a.tau, batch, a.budget);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { dir } => {
            let records = load_records(&dir)?;
            print!("{}", format_summary(&compare_report(&records)));
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportMdp { spec, path } => {
            let text = std::fs::read_to_string(&spec)
                .map_err(|e| BenchError::config("<file>", format!("{}: {e}", spec.display())))?;
            let grid: GridConfig = toml::from_str(&text).map_err(|e| BenchError::config("spec", e.message().to_string()))?;
            let world = gridworld::build(&grid.to_spec()).map_err(|e| BenchError::config("spec", e.to_string()))?;
            let policy_path = mdp_io::write_mdp(&path, &world.mdp, &world.policy)?;
            println!("wrote {} and {}", path.display(), policy_path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
