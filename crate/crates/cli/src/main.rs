use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hytsp_core::bench::{run_bench, ExperimentSpec, Preset, SampleSize, DEFAULT_REPS};
use hytsp_core::hybrid::{
    run_hybrid, Backend, ExternalConfig, HybridConfig, RefineMode, RunReport,
};
use hytsp_core::pimc::{GammaDecay, PimcDefaults};
use hytsp_core::qubo::{
    build_qubo, export_qubo, solve_anneal, solve_exhaustive, AnnealParams, QuboModel,
    DEFAULT_LAMBDA_SCALE,
};
use hytsp_core::tsp::{held_karp_exact, DistanceMatrix, HELD_KARP_MAX_NODES};
use hytsp_core::tsplib::{lookup_optimum, resolve_instance, Instance};
use hytsp_core::Scalar;

/// Hybrid backbone-contraction TSP solver.
#[derive(Parser, Debug)]
#[command(name = "hytsp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the hybrid loop once on an instance.
    Solve(SolveArgs),
    /// Run a parameter grid and write runs.csv and summary.csv.
    Bench(BenchArgs),
    /// Held-Karp optimum for instances with at most 20 nodes.
    Exact {
        /// Path, bundled name, or name under $HYTSP_TSPLIB_DIR.
        instance: String,
    },
    /// Build, solve or export the permutation-matrix QUBO.
    Qubo {
        #[command(subcommand)]
        action: QuboCommand,
    },
}

#[derive(Args, Debug, Clone)]
struct LoopArgs {
    #[arg(long, value_enum, default_value = "pimc")]
    backend: BackendArg,
    /// Do not refine the pool between iterations.
    #[arg(long, conflicts_with = "refine_sampled")]
    no_refine: bool,
    /// Refine only the sampled members.
    #[arg(long)]
    refine_sampled: bool,
    /// Start the sub-solver from a random reduced tour.
    #[arg(long)]
    cold_start: bool,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// PIMC schedule family.
    #[arg(long, value_enum, default_value = "tuned")]
    pimc_schedule: ScheduleArg,
    #[arg(long)]
    replicas: Option<usize>,
    /// P*T relative to the schedule's energy scale.
    #[arg(long)]
    pt_factor: Option<f64>,
    /// Sweeps per reduced node.
    #[arg(long)]
    sweeps_per_node: Option<usize>,
    #[arg(long, value_enum, default_value = "linear")]
    gamma_decay: DecayArg,
    /// Seed PIMC replicas from the best N pool members instead of one tour.
    #[arg(long, default_value_t = 0)]
    pimc_pool_seeds: usize,
    /// QUBO multipliers as a multiple of the largest reduced distance
    /// (default: n_sub for qubo-exhaustive, 0.8 otherwise).
    #[arg(long)]
    lambda_scale: Option<f64>,
    /// Reads for qubo-anneal.
    #[arg(long, default_value_t = 25)]
    reads: usize,
    /// Sweeps per read for qubo-anneal.
    #[arg(long, default_value_t = 1000)]
    anneal_sweeps: usize,
    /// Handshake directory for qubo-external.
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Seconds to wait for an external sample file.
    #[arg(long, default_value_t = 600.0)]
    timeout: f64,
}

#[derive(Args, Debug)]
struct SolveArgs {
    instance: String,
    #[arg(long, default_value_t = 0.75)]
    tau: f64,
    #[arg(long, default_value_t = 500)]
    pool: usize,
    #[arg(long, default_value_t = 250)]
    sample: usize,
    #[arg(long, default_value_t = 1)]
    gamma: usize,
    #[arg(long, default_value_t = 3)]
    max_fails: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stream the per-iteration log to this CSV file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the best tour (0-based node order) to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
    #[command(flatten)]
    common: LoopArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Grid preset; explicit grid flags override its axes.
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    /// Comma separated instances (defaults to the preset's list).
    #[arg(long, value_delimiter = ',')]
    instances: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    tau: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pool: Vec<usize>,
    /// Sample sizes, as counts or percentages of the pool (`20%`).
    #[arg(long, value_delimiter = ',', value_parser = parse_sample)]
    sample: Vec<SampleSize>,
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    #[command(flatten)]
    common: LoopArgs,
}

#[derive(Subcommand, Debug)]
enum QuboCommand {
    /// Report the model size and multipliers.
    Build(QuboArgs),
    /// Minimise the model and decode the best feasible sample.
    Solve {
        #[command(flatten)]
        args: QuboArgs,
        #[arg(long, value_enum, default_value = "exhaustive")]
        sampler: SamplerArg,
        #[arg(long, default_value_t = 25)]
        reads: usize,
        #[arg(long, default_value_t = 1000)]
        sweeps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the model in the interchange text format.
    Export {
        #[command(flatten)]
        args: QuboArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct QuboArgs {
    instance: String,
    /// Multipliers as a multiple of the largest distance (default 0.8;
    /// `solve` defaults to the city count, which forces a feasible minimum).
    #[arg(long)]
    lambda_scale: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BackendArg {
    Pimc,
    QuboExhaustive,
    QuboAnneal,
    QuboExternal,
    Identity,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Pimc => Backend::Pimc,
            BackendArg::QuboExhaustive => Backend::QuboExhaustive,
            BackendArg::QuboAnneal => Backend::QuboAnneal,
            BackendArg::QuboExternal => Backend::QuboExternal,
            BackendArg::Identity => Backend::Identity,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScheduleArg {
    /// Energy scale from the seed tour.
    Tuned,
    /// Energy scale from the mean distance, `P T = 2 <d>`.
    MeanDistance,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DecayArg {
    Linear,
    Geometric,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SamplerArg {
    Exhaustive,
    Anneal,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Precision {
    F32,
    F64,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse()
}

fn parse_sample(s: &str) -> Result<SampleSize, String> {
    if let Some(p) = s.strip_suffix('%') {
        let v: f64 = p.parse().map_err(|_| format!("bad percentage {s:?}"))?;
        if !(v > 0.0 && v <= 100.0) {
            return Err(format!("percentage {s:?} outside (0, 100]"));
        }
        Ok(SampleSize::Fraction(v / 100.0))
    } else {
        s.parse()
            .map(SampleSize::Count)
            .map_err(|_| format!("bad sample size {s:?}"))
    }
}

enum CliError {
    Usage(String),
    Input(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Runtime(m) => m,
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn load(spec: &str) -> Result<Instance, CliError> {
    resolve_instance(spec).map_err(input)
}

fn hybrid_config(common: &LoopArgs) -> Result<HybridConfig, CliError> {
    if matches!(common.lambda_scale, Some(l) if !(l > 0.0)) {
        return Err(CliError::Usage("--lambda-scale must be positive".into()));
    }
    let mut pimc = match common.pimc_schedule {
        ScheduleArg::Tuned => PimcDefaults::default(),
        ScheduleArg::MeanDistance => PimcDefaults::mean_distance(),
    };
    if let Some(p) = common.replicas {
        pimc.replicas = p;
    }
    if let Some(f) = common.pt_factor {
        pimc.pt_factor = f;
    }
    if let Some(s) = common.sweeps_per_node {
        pimc.sweeps_per_node = s;
    }
    let backend: Backend = common.backend.into();
    let external = match (&common.run_dir, backend) {
        (Some(dir), _) => Some(ExternalConfig {
            run_dir: dir.clone(),
            timeout: Duration::from_secs_f64(common.timeout.max(0.0)),
            poll_interval: Duration::from_millis(200),
        }),
        (None, Backend::QuboExternal) => {
            return Err(CliError::Usage(
                "--backend qubo-external needs --run-dir".into(),
            ));
        }
        (None, _) => None,
    };
    Ok(HybridConfig {
        backend,
        pimc,
        pimc_pool_seeds: common.pimc_pool_seeds,
        pimc_decay: match common.gamma_decay {
            DecayArg::Linear => GammaDecay::Linear,
            DecayArg::Geometric => GammaDecay::Geometric,
        },
        anneal: AnnealParams {
            reads: common.reads,
            sweeps: common.anneal_sweeps,
            beta_range: None,
        },
        lambda_scale: common.lambda_scale,
        external,
        refine: if common.no_refine {
            RefineMode::Off
        } else if common.refine_sampled {
            RefineMode::Sampled
        } else {
            RefineMode::All
        },
        warm_start: !common.cold_start,
        max_iterations: common.max_iterations,
        ..HybridConfig::default()
    })
}

fn print_report<T: Scalar>(inst: &Instance, r: &RunReport<T>) {
    println!("instance    {} ({} nodes)", inst.name, inst.n);
    println!("best_len    {}", r.best_length);
    match r.optimality_gap_pct {
        Some(g) => println!("gap         {g:.2}%"),
        None => println!("gap         n/a (no reference optimum)"),
    }
    println!(
        "n_sub       {:.2} (compression {:.2}%)",
        r.mean_n_sub, r.compression_pct
    );
    println!("iterations  {}", r.iterations);
    println!(
        "time        {:.3}s total, {:.3}s sub-solver, {:.3}s classical",
        r.total_time_s, r.subsolver_time_s, r.classical_time_s
    );
}

fn solve_with<T: Scalar>(
    inst: &Instance,
    args: &SolveArgs,
    cfg: &HybridConfig,
) -> Result<(), CliError> {
    let d: DistanceMatrix<T> = inst.distance_matrix().map_err(input)?;
    let optimum = lookup_optimum(&inst.name).map(|r| r.optimum_length);
    let report = run_hybrid(&d, cfg, optimum).map_err(|e| match e {
        hytsp_core::hybrid::HybridError::InvalidConfig(m) => CliError::Usage(m),
        other => runtime(other),
    })?;
    print_report(inst, &report);
    if let Some(out) = &args.out {
        fs::write(out, format!("{}\n", report.best_tour))
            .map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    }
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    let inst = load(&args.instance)?;
    let mut cfg = hybrid_config(&args.common)?;
    cfg.tau = args.tau;
    cfg.n_pool = args.pool;
    cfg.n_sample = args.sample;
    cfg.sa.gamma = args.gamma;
    cfg.max_fails = args.max_fails;
    cfg.rng_seed = args.seed;
    cfg.iteration_log = args.trace.clone();
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    match args.precision {
        Precision::F64 => solve_with::<f64>(&inst, &args, &cfg),
        Precision::F32 => solve_with::<f32>(&inst, &args, &cfg),
    }
}

fn override_axis<V: Clone>(given: &[V], axis: &mut Vec<V>) {
    if !given.is_empty() {
        *axis = given.to_vec();
    }
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let preset = args.preset.unwrap_or(Preset::Table1);
    let mut grid = preset.grid();
    override_axis(&args.tau, &mut grid.taus);
    override_axis(&args.pool, &mut grid.n_pools);
    override_axis(&args.sample, &mut grid.n_samples);
    override_axis(&args.gamma, &mut grid.gammas);
    override_axis(&args.k, &mut grid.ks);
    let instances = if args.instances.is_empty() {
        preset.instances().into_iter().map(String::from).collect()
    } else {
        args.instances.clone()
    };
    let base = hybrid_config(&args.common)?;
    let mut spec = ExperimentSpec::new(instances, grid, &args.out);
    spec.repetitions = args.reps;
    spec.backend = base.backend;
    spec.master_seed = args.seed;
    spec.workers = args.workers;
    spec.base = base;
    spec.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let outcome = run_bench(&spec).map_err(|e| match e {
        hytsp_core::bench::BenchError::Instance(e) => input(e),
        other => runtime(other),
    })?;
    println!(
        "{:<12} {:>5} {:>5} {:>5} {:>9} {:>9} {:>14} {:>8} {:>9}",
        "instance", "tau", "N_I", "N_S", "n_sub", "compr%", "gap%", "best%", "total_s"
    );
    for a in &outcome.aggregates {
        let gap = a
            .gap_pct
            .map_or("n/a".to_string(), |s| format!("{:.2}±{:.2}", s.mean, s.std));
        let best = a
            .best_gap_pct
            .map_or("n/a".to_string(), |b| format!("{b:.2}"));
        println!(
            "{:<12} {:>5} {:>5} {:>5} {:>9.2} {:>9.2} {:>14} {:>8} {:>9.3}",
            a.instance,
            a.cell.tau,
            a.cell.n_pool,
            a.cell.n_sample,
            a.n_sub.mean,
            a.compression_pct.mean,
            gap,
            best,
            a.total_s.mean
        );
    }
    println!(
        "{} runs executed, {} failures; results in {}",
        outcome.executed,
        outcome.failures.len(),
        spec.out_dir.display()
    );
    Ok(())
}

fn cmd_exact(instance: &str) -> Result<(), CliError> {
    let inst = load(instance)?;
    if inst.n > HELD_KARP_MAX_NODES {
        return Err(CliError::Input(format!(
            "{} has {} nodes; the exact solver handles at most {HELD_KARP_MAX_NODES}",
            inst.name, inst.n
        )));
    }
    let d: DistanceMatrix<f64> = inst.distance_matrix().map_err(input)?;
    let t = held_karp_exact(&d).map_err(runtime)?;
    println!("optimum     {}", t.length());
    println!("tour        {t}");
    if let Some(r) = lookup_optimum(&inst.name) {
        let agrees = (r.optimum_length - t.length()).abs() < 1e-9;
        println!(
            "registry    {} ({})",
            r.optimum_length,
            if agrees { "agrees" } else { "DISAGREES" }
        );
    }
    Ok(())
}

fn qubo_model(
    args: &QuboArgs,
    solving: bool,
) -> Result<(DistanceMatrix<f64>, QuboModel<f64>), CliError> {
    if matches!(args.lambda_scale, Some(l) if !(l > 0.0)) {
        return Err(CliError::Usage("--lambda-scale must be positive".into()));
    }
    let inst = load(&args.instance)?;
    let d: DistanceMatrix<f64> = inst.distance_matrix().map_err(input)?;
    let scale = args.lambda_scale.unwrap_or(if solving {
        d.n() as f64
    } else {
        DEFAULT_LAMBDA_SCALE
    });
    let lam = scale * d.max_distance();
    let m = build_qubo(&d, lam, lam).map_err(input)?;
    Ok((d, m))
}

fn cmd_qubo(action: QuboCommand) -> Result<(), CliError> {
    match action {
        QuboCommand::Build(args) => {
            let (d, m) = qubo_model(&args, false)?;
            println!("cities      {}", d.n());
            println!("variables   {}", m.num_vars());
            println!(
                "linear      {}",
                m.linear().iter().filter(|c| **c != 0.0).count()
            );
            println!("quadratic   {}", m.quadratic().len());
            println!("lambda1     {}", m.lambda1());
            println!("lambda2     {}", m.lambda2());
            println!("offset      {}", m.offset());
        }
        QuboCommand::Solve {
            args,
            sampler,
            reads,
            sweeps,
            seed,
        } => {
            let (d, m) = qubo_model(&args, true)?;
            let set = match sampler {
                SamplerArg::Exhaustive => solve_exhaustive(&m).map_err(input)?,
                SamplerArg::Anneal => solve_anneal(
                    &m,
                    &AnnealParams {
                        reads,
                        sweeps,
                        beta_range: None,
                    },
                    seed,
                )
                .map_err(input)?,
            };
            if let Some(e) = set.lowest_energy() {
                println!("lowest      {} (energy + offset {})", e, e + m.offset());
            }
            match set.best_feasible(&m, &d) {
                Some(t) => {
                    println!("length      {}", t.length());
                    println!("tour        {t}");
                }
                None => return Err(CliError::Runtime("no feasible sample".into())),
            }
        }
        QuboCommand::Export { args, out } => {
            let (_, m) = qubo_model(&args, false)?;
            let path = out.unwrap_or_else(|| {
                let stem = std::path::Path::new(&args.instance)
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "model".into());
                PathBuf::from(format!("{stem}.qubo"))
            });
            export_qubo(&m, &path).map_err(runtime)?;
            println!("variables   {}", m.num_vars());
            println!("lambda1     {}", m.lambda1());
            println!("lambda2     {}", m.lambda2());
            println!("wrote       {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Exact { instance } => cmd_exact(&instance),
        Command::Qubo { action } => cmd_qubo(action),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
