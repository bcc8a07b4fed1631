use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dmc_core::ssd::{self, BoundaryLaw};
use dmc_core::{stats, steady, Config};
use dmc_harness::experiment::PBS_RECORD_EVERY;
use dmc_harness::{
    compare, env_threads, load_config_with, run_experiment, ExperimentSpec, HarnessError, Model,
    Result, DEFAULT_CONFIG,
};
use dmc_pbs::{calibrate_homogenization, ensemble, CalibrationSettings, RunPlan};

/// Saturating synaptic channel: solver, particle simulation and experiments.
#[derive(Parser, Debug)]
#[command(name = "dmc", version)]
struct Cli {
    /// Worker threads. Defaults to DMC_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Configuration document (JSON). Defaults to the reference synapse.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override one field, e.g. `--set receptor_count=406`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Law {
    Saturating,
    Linear,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Equilibrium bound count for the total released amount (no degradation).
    SteadyState {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Expected signal from the state-space solver, as CSV.
    Ssd {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value = "saturating")]
        law: Law,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Particle-simulation ensemble: mean trace and histograms at the sample times.
    Pbs {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory; the mean trace goes to stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hypergeometric and binomial received-signal PMFs at one instant.
    Stats {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Time in µs; defaults to the peak of the expected signal.
        #[arg(long)]
        time: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment spec (or a previous run's metadata.json).
    Experiment {
        spec: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pairwise comparison of models.
    Compare {
        /// Comma-separated subset of ssd, linear, steady, hypergeom, binomN, binomC, pbs.
        #[arg(long, value_delimiter = ',', required = true)]
        models: Vec<String>,
        /// Experiment spec whose sweep points are compared.
        #[arg(long, conflicts_with = "config")]
        spec: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the homogenized binding rate to particle-simulated steady states.
    Calibrate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Release sizes, comma-separated.
        #[arg(long, value_delimiter = ',')]
        releases: Option<Vec<u64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(format!("reading {}", path.display()), e))
}

fn load(args: &ConfigArgs) -> Result<Config> {
    let text = match &args.config {
        Some(p) => read(p)?,
        None => DEFAULT_CONFIG.to_string(),
    };
    load_config_with(&text, &args.set)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| HarnessError::io(format!("writing {}", p.display()), e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| HarnessError::io("writing stdout", e)),
    }
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("value serializes") + "\n"
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SteadyState { cfg } => {
            let c = load(&cfg)?;
            let n = c.schedule.total_released();
            let r = steady::steady_state(&c.channel, n as f64)?;
            let scaled = steady::steady_state_scaled(&c.channel, 2 * n, n)?;
            emit(
                None,
                &pretty(&json!({
                    "released": n,
                    "bound_equilibrium": r.bound_equilibrium,
                    "solute_equilibrium_conc": r.solute_equilibrium_conc,
                    "lambda": r.lambda,
                    "scaled_from_double_release": scaled,
                })),
            )
        }
        Command::Ssd { cfg, law, out } => {
            let c = load(&cfg)?;
            let law = match law {
                Law::Saturating => BoundaryLaw::Saturating,
                Law::Linear => BoundaryLaw::Linear,
            };
            let trace = ssd::run_with_law(&c.channel, &c.schedule, &c.solver, law)?;
            emit(out.as_deref(), &trace.to_csv())
        }
        Command::Pbs { cfg, out } => {
            let c = load(&cfg)?;
            let plan = RunPlan {
                time_step: c.pbs.time_step,
                horizon: c.solver.horizon,
                record_every: Some(PBS_RECORD_EVERY),
                sample_times: c.pbs.sample_times.clone(),
            };
            let e = ensemble(&c.channel, &c.schedule, &plan, c.pbs.runs as u64, c.pbs.seed)?;
            let Some(dir) = out else {
                return emit(None, &e.trace_csv());
            };
            std::fs::create_dir_all(&dir)
                .map_err(|err| HarnessError::io(format!("creating {}", dir.display()), err))?;
            emit(Some(&dir.join("trace.csv")), &e.trace_csv())?;
            for (j, t) in e.sample_times.iter().enumerate() {
                emit(Some(&dir.join(format!("hist_t={t}.csv"))), &e.histogram_csv(j))?;
            }
            emit(
                Some(&dir.join("metadata.json")),
                &pretty(&json!({
                    "tool": "dmc",
                    "version": env!("CARGO_PKG_VERSION"),
                    "seed": c.pbs.seed,
                    "config": c.to_document(),
                })),
            )
        }
        Command::Stats { cfg, time, out } => {
            let c = load(&cfg)?;
            let trace = ssd::run(&c.channel, &c.schedule, &c.solver)?;
            let t = time.unwrap_or_else(|| trace.peak_time());
            let i = trace.bound_at(t);
            let (n, cap) = (c.schedule.total_released(), c.channel.receptor_count());
            let h = stats::hypergeom_from_mean(n, cap, i)?;
            let (bn, bc) = stats::binomial_comparators(n, cap, i)?;
            let hi = h.support().1.max(bn.support().1).max(bc.support().1);
            let mut csv = String::from("n,hypergeom,binom_n,binom_c\n");
            for k in 0..=hi {
                let _ = writeln!(csv, "{k},{},{},{}", h.pmf_at(k), bn.pmf_at(k), bc.pmf_at(k));
            }
            log::info!("t = {t} µs, i = {i}");
            emit(out.as_deref(), &csv)
        }
        Command::Experiment { spec, set, out } => {
            let spec = ExperimentSpec::from_json(&read(&spec)?)?.resolve(&set)?;
            run_experiment(&spec)?.write(&out)
        }
        Command::Compare { models, spec, cfg, out } => {
            let models = models.iter().map(|m| m.parse()).collect::<Result<Vec<Model>>>()?;
            let spec = match spec {
                Some(p) => ExperimentSpec::from_json(&read(&p)?)?.resolve(&cfg.set)?,
                None => {
                    let text = match &cfg.config {
                        Some(p) => read(p)?,
                        None => DEFAULT_CONFIG.to_string(),
                    };
                    let config = serde_json::from_str(&text)
                        .map_err(|e| HarnessError::invalid(format!("failed to parse configuration: {e}")))?;
                    ExperimentSpec {
                        name: dmc_harness::ExperimentName::Custom,
                        config,
                        overrides: vec![],
                        outputs: vec![dmc_harness::OutputKind::Traces],
                        pbs: None,
                        notes: None,
                    }
                    .resolve(&cfg.set)?
                }
            };
            emit(out.as_deref(), &pretty(&compare(&models, &spec)?))
        }
        Command::Calibrate { cfg, releases, out } => {
            let c = load(&cfg)?;
            let mut settings = CalibrationSettings {
                runs: c.pbs.runs as u64,
                seed: c.pbs.seed,
                time_step: c.pbs.time_step,
                ..Default::default()
            };
            if let Some(r) = releases {
                settings.releases = r;
            }
            let r = calibrate_homogenization(&c.channel, &settings)?;
            emit(out.as_deref(), &pretty(&r))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let threads = match cli.threads.map(Some).map_or_else(env_threads, Ok) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
