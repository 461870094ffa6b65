use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use imdp_synth::abstraction::{abstract_model, AbstractionParams};
use imdp_synth::benchmarks::{self, AnesthesiaParams, BenchmarkName, TemperatureParams};
use imdp_synth::config::RunConfig;
use imdp_synth::imdp::export_interval_model;
use imdp_synth::pipeline::{run_pipeline, Synthesis};
use imdp_synth::runtime::{
    safety_fraction_experiment, safety_table_csv, ClosedLoop, TrueDynamics,
};
use imdp_synth::{Error, Result};
use nalgebra::DVector;

#[derive(Parser)]
#[command(name = "imdp-synth", version, about = "Robust controller synthesis via interval MDP abstractions")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the interval MDP and write it with a summary.
    Abstract(RunArgs),
    /// Build the interval MDP, solve it and write policy and bounds.
    Synthesize(RunArgs),
    /// Synthesize, then estimate the success probability from one state.
    Simulate(SimulateArgs),
    /// Run one of the built-in benchmarks and its experiment.
    Benchmark(BenchmarkArgs),
    /// Write the interval MDP in text form to a file or stdout.
    Export(RunArgs),
}

#[derive(Args, Clone)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    /// Noise samples per action.
    #[arg(long)]
    samples: Option<usize>,
    /// Overall confidence 1 - β̃.
    #[arg(long)]
    confidence: Option<f64>,
    #[arg(long)]
    merge_radius: Option<f64>,
    /// Output directory (a file for `export`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.samples {
            cfg.samples = n;
        }
        if let Some(c) = self.confidence {
            cfg.confidence = c;
        }
        if let Some(r) = self.merge_radius {
            cfg.merge_radius = r;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        cfg.validate()
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Vec<f64>,
    /// True parameter weights, comma separated (default: the nominal ones).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Write one sample trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// drone, drone-2param, temperature or anesthesia.
    name: String,
    #[command(flatten)]
    overrides: Overrides,
    /// Ignore parameter uncertainty (drones and temperature).
    #[arg(long)]
    baseline: bool,
    /// Monte Carlo trials per state in the drone experiments.
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    /// Grid cell counts for the temperature benchmark.
    #[arg(long, value_delimiter = ',', default_values_t = [15, 25])]
    counts: Vec<usize>,
    /// Parameter file: required for anesthesia, optional for temperature.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Skip the Monte Carlo experiment.
    #[arg(long)]
    no_experiment: bool,
    /// Write the benchmark's run configuration to this file and stop.
    #[arg(long)]
    dump_config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_default_env()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .init();
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: cannot set worker count: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_path(&args.config)?;
    args.overrides.apply(&mut cfg)?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Abstract(args) => {
            let cfg = load(&args)?;
            let abstraction = build_abstraction(&cfg)?;
            let dir = out_dir(&cfg);
            fs::create_dir_all(&dir)?;
            let mut sink = io::BufWriter::new(fs::File::create(dir.join("imdp.txt"))?);
            export_interval_model(&abstraction.imdp, &mut sink)?;
            sink.flush()?;
            println!(
                "{} states, {} enabled pairs, {} transitions, {} intervals, certified confidence {}",
                abstraction.imdp.num_states(),
                abstraction.imdp.num_choices(),
                abstraction.imdp.num_transitions(),
                abstraction.ledger.interval_count,
                abstraction.ledger.certified_confidence()
            );
            Ok(())
        }
        Command::Export(args) => {
            let cfg = load(&args)?;
            let abstraction = build_abstraction(&cfg)?;
            match &args.overrides.out {
                Some(path) => {
                    let mut sink = io::BufWriter::new(fs::File::create(path)?);
                    export_interval_model(&abstraction.imdp, &mut sink)?;
                    sink.flush()?;
                }
                None => {
                    let stdout = io::stdout();
                    let mut sink = io::BufWriter::new(stdout.lock());
                    export_interval_model(&abstraction.imdp, &mut sink)?;
                    sink.flush()?;
                }
            }
            Ok(())
        }
        Command::Synthesize(args) => {
            let cfg = load(&args)?;
            let dir = out_dir(&cfg);
            let (synthesis, _) = run_pipeline(&cfg, Some(&dir))?;
            print!("{}", synthesis.report());
            Ok(())
        }
        Command::Simulate(args) => simulate(args),
        Command::Benchmark(args) => benchmark(args),
    }
}

fn build_abstraction(cfg: &RunConfig) -> Result<imdp_synth::abstraction::Abstraction> {
    let model = cfg.build_model()?;
    let partition = cfg.build_partition()?;
    let targets = cfg.build_targets(&partition)?;
    abstract_model(
        &model,
        &partition,
        &targets,
        &AbstractionParams {
            samples: cfg.samples,
            merge_radius: cfg.merge_radius,
            confidence: cfg.confidence,
            seed: cfg.seed,
            objective: cfg.objective,
        },
    )
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = load(&args.run)?;
    let dir = out_dir(&cfg);
    let (synthesis, _) = run_pipeline(&cfg, Some(&dir))?;
    let x0 = DVector::from_vec(args.x0);
    if x0.len() != synthesis.model.n() {
        return Err(Error::DimensionMismatch {
            expected: synthesis.model.n(),
            got: x0.len(),
        });
    }
    let alpha = args
        .alpha
        .map(DVector::from_vec)
        .unwrap_or_else(|| synthesis.model.alpha_hat().clone());
    let dynamics = TrueDynamics::extrapolated(&synthesis.model, &alpha)?;
    let closed = closed_loop(&synthesis, cfg.objective);
    let estimate = closed.monte_carlo(&dynamics, &x0, args.trials, cfg.seed)?;
    let s = synthesis.partition.state_of(x0.as_slice());
    let lambda = synthesis.policy.initial_values()[s];
    println!(
        "state {s}: bound {lambda}, estimate {} ({} of {}), 99% interval [{}, {}]",
        estimate.estimate, estimate.successes, estimate.trials, estimate.lower, estimate.upper
    );
    if let Some(path) = args.trace {
        let mut noise = synthesis.model.noise().source(cfg.seed, u64::MAX)?;
        let disturbance = closed.centered_disturbance();
        let trace = closed.simulate(&dynamics, &x0, &mut noise, &disturbance)?;
        fs::write(path, trace.to_csv())?;
    }
    Ok(())
}

fn closed_loop(synthesis: &Synthesis, objective: imdp_synth::imdp::Objective) -> ClosedLoop<'_> {
    ClosedLoop {
        model: &synthesis.model,
        partition: &synthesis.partition,
        policy: &synthesis.policy,
        controller: &synthesis.controller,
        objective,
    }
}

fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let name: BenchmarkName = args.name.parse()?;
    let mut cfg = match name {
        BenchmarkName::Drone if args.baseline => benchmarks::drone_baseline_config(),
        BenchmarkName::Drone => benchmarks::drone_config(),
        BenchmarkName::Drone2Param if args.baseline => {
            let mut c = benchmarks::drone_2param_config();
            let model = c.build_model()?.nominal_only();
            let (a, b) = model.nominal();
            c.model.a = vec![imdp_synth::config::matrix_to_rows(a)];
            c.model.b = vec![imdp_synth::config::matrix_to_rows(b)];
            c.model.alpha_hat = vec![1.0];
            c
        }
        BenchmarkName::Drone2Param => benchmarks::drone_2param_config(),
        BenchmarkName::Temperature => {
            let params = match &args.params {
                Some(p) => toml::from_str::<TemperatureParams>(&fs::read_to_string(p)?)
                    .map_err(|e| Error::Config(e.to_string()))?,
                None => TemperatureParams::default(),
            };
            let counts: [usize; 2] = args.counts.as_slice().try_into().map_err(|_| {
                Error::Config("temperature needs two cell counts, e.g. --counts 15,25".into())
            })?;
            benchmarks::temperature_config(&params, counts, !args.baseline)?
        }
        BenchmarkName::Anesthesia => {
            let path = args.params.as_ref().ok_or_else(|| {
                Error::Config(
                    "anesthesia needs --params <file> with k10, k12, k13, k21, k31, v1 and \
                     input_range; these patient constants are not part of the model and \
                     have no defaults"
                        .into(),
                )
            })?;
            let params = AnesthesiaParams::from_toml_str(&fs::read_to_string(path)?)?;
            benchmarks::anesthesia_config(&params)?
        }
    };
    args.overrides.apply(&mut cfg)?;
    if let Some(path) = &args.dump_config {
        fs::write(path, cfg.to_toml_string()?)?;
        return Ok(());
    }
    let dir = out_dir(&cfg);
    let (synthesis, _) = run_pipeline(&cfg, Some(&dir))?;
    print!("{}", synthesis.report());

    match name {
        BenchmarkName::Drone | BenchmarkName::Drone2Param if !args.no_experiment => {
            let robust = benchmarks::drone_config().build_model()?;
            let robust2 = benchmarks::drone_2param_config().build_model()?;
            let (names, grid): (Vec<&str>, Vec<(Vec<f64>, TrueDynamics)>) =
                if name == BenchmarkName::Drone {
                    let grid = (0..=14)
                        .map(|i| {
                            let m = (60 + 5 * i) as f64 / 100.0;
                            let dyn_ =
                                TrueDynamics::extrapolated(&robust, &benchmarks::drone_alpha(m))?;
                            Ok((vec![m], dyn_))
                        })
                        .collect::<Result<_>>()?;
                    (vec!["mass"], grid)
                } else {
                    let mut grid = Vec::new();
                    for m in [0.9, 1.0, 1.1] {
                        for z in [0.4, 0.5, 0.6] {
                            let d = TrueDynamics::extrapolated(
                                &robust2,
                                &benchmarks::drone_2param_alpha(m, z),
                            )?;
                            grid.push((vec![m, z], d));
                        }
                    }
                    (vec!["mass", "spring"], grid)
                };
            let rows = safety_fraction_experiment(
                &closed_loop(&synthesis, cfg.objective),
                &grid,
                args.trials,
                cfg.seed,
            )?;
            let table = safety_table_csv(&names, &rows);
            write_table(&dir, "safety.csv", &table)?;
            print!("{table}");
        }
        BenchmarkName::Temperature => {
            println!(
                "reported states: {}",
                benchmarks::reported_state_count(synthesis.partition.len())
            );
            write_table(&dir, "heatmap.csv", &synthesis.bounds_csv())?;
        }
        BenchmarkName::Anesthesia => {
            write_table(&dir, "heatmap.csv", &synthesis.bounds_csv())?;
        }
        _ => {}
    }
    Ok(())
}

fn write_table(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::write(dir.join(name), text)?;
    Ok(())
}
