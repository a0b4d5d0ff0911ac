//! `lifelong`: runs batches of lifetimes and writes their logs.
//!
//! Output directory layout:
//!
//! * `run-<seed>.csv`: episode records of one lifetime
//! * `aggregate.csv`: learning curves pooled over all runs, every start state
//! * `manifest.toml`: tool version, the full configuration (layout and any
//!   machine file inlined) and content hashes; `--config manifest.toml`
//!   reproduces the run exactly.

mod manifest;
mod progress;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use lifelong_core::experiment::{ExperimentConfig, MachineRegistry, PRESETS};
use lifelong_core::gridworld::CANONICAL_LAYOUT;
use lifelong_core::learner::GeneratorRegistry;
use lifelong_core::lifetime::{write_curve_csv, CurveAccumulator, MetricsCsvWriter};

use crate::manifest::Manifest;
use crate::progress::Progress;

#[derive(Debug, Parser)]
#[command(
    name = "lifelong",
    version,
    about = "Run lifelong-learning experiments in the food-gathering gridworld"
)]
struct Args {
    /// Experiment preset (base, progress-unbiased, progress-biased,
    /// suboptimal-unbiased, suboptimal-biased).
    #[arg(long)]
    preset: Option<String>,
    /// Start from an experiment config or a previous run's manifest.toml;
    /// other flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Layout file (11 lines of 11 characters) [default: built-in layout].
    #[arg(long, value_name = "FILE")]
    layout: Option<PathBuf>,
    /// Reward machine TOML replacing the preset's design.
    #[arg(long, value_name = "FILE")]
    machine: Option<PathBuf>,
    /// Number of runs [default: 20].
    #[arg(long)]
    runs: Option<u32>,
    /// Timesteps per lifetime [default: 100000000].
    #[arg(long)]
    lifespan: Option<u64>,
    /// Seed of the first run; run i uses seed + i [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Learning-curve window in timesteps [default: 1000000].
    #[arg(long)]
    window: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Pool capacity [default: 10].
    #[arg(long)]
    d: Option<usize>,
    /// Probability of mutating a pool policy [default: 0.6].
    #[arg(long)]
    p1: Option<f64>,
    /// Probability of re-evaluating a pool policy [default: 0.2].
    #[arg(long)]
    p2: Option<f64>,
    /// Probability of a fresh policy [default: 0.2].
    #[arg(long)]
    p3: Option<f64>,
    #[arg(long, help = "Mutation rate [default: 0.05]")]
    mutation_rate: Option<f64>,
    #[arg(long, help = "Region growth probability of biased generation [default: 0.9]")]
    region_growth_prob: Option<f64>,
    #[arg(long, help = "Probability of a progress-guidance value [default: 0.8]")]
    guidance_p: Option<f64>,
    #[arg(long, help = "Progress-guidance value per cell of displacement [default: 0.01]")]
    guidance_coef: Option<f64>,
    /// Worker threads [default: available parallelism].
    #[arg(long)]
    jobs: Option<usize>,
    /// Suppress progress output.
    #[arg(long, short)]
    quiet: bool,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn resolve_config(args: &Args) -> Result<ExperimentConfig> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = read(path)?;
            let mut config = Manifest::parse_config(&text).with_context(|| format!("in {}", path.display()))?;
            if let Some(preset) = &args.preset {
                config.preset = preset.clone();
            }
            config
        }
        (None, Some(preset)) => ExperimentConfig::for_preset(preset).with_context(|| {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
            format!("known presets: {}", names.join(", "))
        })?,
        (None, None) => bail!("either --preset or --config is required"),
    };
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = args.$flag.clone() { config.$($field).+ = v; })*
        };
    }
    set! {
        runs => runs,
        lifespan => lifespan,
        seed => seed,
        window => window,
        d => learner.d,
        p1 => learner.p1,
        p2 => learner.p2,
        p3 => learner.p3,
        mutation_rate => learner.mutation_rate,
        region_growth_prob => learner.region_growth_prob,
        guidance_p => guidance.p,
        guidance_coef => guidance.coef,
    }
    if let Some(path) = &args.layout {
        config.layout = Some(read(path)?);
    }
    if let Some(path) = &args.machine {
        config.machine = Some(read(path)?);
    }
    config.layout.get_or_insert_with(|| CANONICAL_LAYOUT.to_string());
    Ok(config)
}

fn run(args: Args) -> Result<()> {
    let config = resolve_config(&args)?;
    let experiment = config
        .build(&MachineRegistry::builtin())
        .context("invalid experiment")?;
    if experiment.runs == 0 {
        bail!("--runs must be at least 1");
    }
    if args.jobs == Some(0) {
        bail!("--jobs must be at least 1");
    }

    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let manifest = Manifest::new(config);
    fs::write(args.out.join("manifest.toml"), manifest.to_toml()).context("cannot write manifest")?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().context("cannot start worker pool")?;
    let quiet = args.quiet;
    if !quiet {
        eprintln!(
            "{}: {} runs x {} steps on {} threads -> {}",
            manifest.experiment.preset,
            experiment.runs,
            experiment.lifespan,
            pool.current_num_threads(),
            args.out.display()
        );
    }

    let machine = &experiment.machine;
    let out = &args.out;
    let results = pool.install(|| {
        experiment.run_all(&GeneratorRegistry::builtin(), |run| {
            let seed = experiment.lifetime_config(run).seed;
            let file = File::create(out.join(format!("run-{seed}.csv")))?;
            Ok((
                MetricsCsvWriter::new(BufWriter::new(file), machine)?,
                (
                    CurveAccumulator::new(experiment.window, experiment.lifespan),
                    Progress::new(run, seed, experiment.lifespan, quiet),
                ),
            ))
        })
    })?;

    let mut aggregate = CurveAccumulator::new(experiment.window, experiment.lifespan);
    for (run, ((writer, (curves, _)), end)) in results.into_iter().enumerate() {
        writer.finish().with_context(|| format!("writing run {run}"))?;
        aggregate.merge(&curves);
        if !quiet {
            eprintln!(
                "run {run}: {} episodes, {} trailing steps discarded",
                end.episodes, end.discarded_tail
            );
        }
    }
    let file = File::create(out.join("aggregate.csv")).context("cannot create aggregate.csv")?;
    write_curve_csv(BufWriter::new(file), &aggregate.all_points(), machine)?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
