//! The hybrid loop: refine the pool, sample it, contract the confident
//! backbone, solve the reduced instance, expand, and insert the result.
//! The loop stops after `max_fails` consecutive iterations whose expanded
//! tour does not beat the best one found so far.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::contraction::{
    build_backbone, compression_rate, contract, derive_seed_subtour, edge_frequencies, expand_tour,
    ContractedInstance, ContractionError,
};
use crate::pimc::{pimc_run, GammaDecay, PimcDefaults, PimcError};
use crate::pool::{random_tour, sample_indices, PoolError, SaParams, SolutionPool};
use crate::qubo::{
    build_qubo, export_qubo, import_samples, solve_anneal, solve_exhaustive, AnnealParams,
    QuboError, DEFAULT_LAMBDA_SCALE,
};
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::tsp::{DistanceMatrix, Tour, TspError};
use crate::tsplib::{lookup_optimum, Instance, TsplibError};

const STREAM_POOL: u64 = 1;
const STREAM_ITER: u64 = 2;
const STREAM_SAMPLE: u64 = 3;
const STREAM_REFINE: u64 = 4;
const STREAM_SUB: u64 = 5;
const TAU_RETRIES: usize = 3;
const IMPROVEMENT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HybridError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Contraction(#[from] ContractionError),
    #[error(transparent)]
    Pimc(#[from] PimcError),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Tour(#[from] TspError),
    #[error(transparent)]
    Instance(#[from] TsplibError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no samples appeared at {0} before the timeout")]
    ExternalTimeout(String),
}

/// Reduced-instance solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Pimc,
    QuboExhaustive,
    QuboAnneal,
    QuboExternal,
    /// Returns the warm-start tour unchanged; contraction-only baseline.
    Identity,
}

impl Backend {
    pub const ALL: [Backend; 5] = [
        Backend::Pimc,
        Backend::QuboExhaustive,
        Backend::QuboAnneal,
        Backend::QuboExternal,
        Backend::Identity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Pimc => "pimc",
            Backend::QuboExhaustive => "qubo-exhaustive",
            Backend::QuboAnneal => "qubo-anneal",
            Backend::QuboExternal => "qubo-external",
            Backend::Identity => "identity",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Backend::ALL
            .iter()
            .copied()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown backend {s:?}"))
    }
}

/// Which pool members are refined at the top of each iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefineMode {
    All,
    /// Only the members drawn into the sample.
    Sampled,
    Off,
}

/// File handshake with an external sampler.
#[derive(Clone, Debug, PartialEq)]
pub struct ExternalConfig {
    pub run_dir: PathBuf,
    pub timeout: Duration,
    pub poll_interval: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridConfig {
    pub tau: f64,
    pub n_pool: usize,
    pub n_sample: usize,
    /// Pool refinement settings; `sa.gamma` is the local-search weight.
    pub sa: SaParams,
    pub max_fails: usize,
    pub backend: Backend,
    pub pimc: PimcDefaults,
    pub pimc_decay: GammaDecay,
    /// Seed the replicas from this many best pool members instead of one tour.
    pub pimc_pool_seeds: usize,
    pub anneal: AnnealParams,
    /// QUBO multipliers as a multiple of the reduced matrix's largest distance.
    /// `None` picks `n_sub` for the exhaustive solver (feasible ground state
    /// guaranteed) and `0.8` for samplers.
    pub lambda_scale: Option<f64>,
    pub external: Option<ExternalConfig>,
    pub refine: RefineMode,
    /// Start the sub-solver from the pool best (otherwise from a random tour).
    pub warm_start: bool,
    /// Stop after this many iterations even without `max_fails` failures.
    pub max_iterations: Option<usize>,
    /// Stream one CSV row per iteration to this file.
    pub iteration_log: Option<PathBuf>,
    pub rng_seed: u64,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            tau: 0.75,
            n_pool: 500,
            n_sample: 250,
            sa: SaParams::default(),
            max_fails: 3,
            backend: Backend::Pimc,
            pimc: PimcDefaults::default(),
            pimc_decay: GammaDecay::Linear,
            pimc_pool_seeds: 0,
            anneal: AnnealParams::default(),
            lambda_scale: None,
            external: None,
            refine: RefineMode::All,
            warm_start: true,
            max_iterations: None,
            iteration_log: None,
            rng_seed: 0,
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<(), HybridError> {
        let bad = |m: String| Err(HybridError::InvalidConfig(m));
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau {} outside (0, 1]", self.tau));
        }
        if self.n_pool == 0 {
            return bad("pool size must be at least 1".into());
        }
        if self.n_sample == 0 || self.n_sample > self.n_pool {
            return bad(format!(
                "sample size {} must be in 1..={}",
                self.n_sample, self.n_pool
            ));
        }
        if self.max_fails == 0 {
            return bad("max fails must be at least 1".into());
        }
        if self.backend == Backend::QuboExternal && self.external.is_none() {
            return bad("qubo-external needs a run directory".into());
        }
        if matches!(self.lambda_scale, Some(l) if !(l > 0.0 && l.is_finite())) {
            return bad("lambda must be positive".into());
        }
        self.sa.validate()?;
        Ok(())
    }
}

/// One row of the per-iteration log.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Threshold actually used after any relaxation.
    pub tau_used: f64,
    /// `None` when contraction failed.
    pub n_sub: Option<usize>,
    pub sub_time_s: f64,
    pub candidate_length: Option<f64>,
    pub best_length: f64,
    pub new_best: bool,
    pub note: String,
}

impl IterationRecord {
    pub const CSV_HEADER: &'static str =
        "iteration,tau_used,n_sub,sub_time_s,candidate_length,best_length,new_best,note";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{},{},{},{}",
            self.iteration,
            self.tau_used,
            self.n_sub.map_or(String::new(), |v| v.to_string()),
            self.sub_time_s,
            self.candidate_length
                .map_or(String::new(), |v| v.to_string()),
            self.best_length,
            self.new_best,
            self.note.replace(',', ";"),
        )
    }
}

#[derive(Clone, Debug)]
pub struct RunReport<T> {
    pub best_tour: Tour<T>,
    pub best_length: f64,
    pub optimality_gap_pct: Option<f64>,
    /// Best length produced by the expand step alone.
    pub loop_best_length: f64,
    pub initial_pool_best: f64,
    pub iterations: usize,
    pub mean_n_sub: f64,
    pub compression_pct: f64,
    pub total_time_s: f64,
    pub subsolver_time_s: f64,
    pub classical_time_s: f64,
    pub per_iteration_log: Vec<IterationRecord>,
}

/// Percentage above `optimum`.
pub fn optimality_gap(length: f64, optimum: f64) -> f64 {
    100.0 * (length - optimum) / optimum
}

struct IterLog {
    file: Option<(String, std::io::BufWriter<fs::File>)>,
}

impl IterLog {
    fn open(path: Option<&Path>) -> Result<Self, HybridError> {
        let file = match path {
            None => None,
            Some(p) => {
                let f = fs::File::create(p).map_err(|e| io_err(p, e))?;
                let mut w = std::io::BufWriter::new(f);
                writeln!(w, "{}", IterationRecord::CSV_HEADER).map_err(|e| io_err(p, e))?;
                Some((p.display().to_string(), w))
            }
        };
        Ok(Self { file })
    }

    fn push(&mut self, rec: &IterationRecord) -> Result<(), HybridError> {
        if let Some((path, w)) = self.file.as_mut() {
            writeln!(w, "{}", rec.csv_row())
                .and_then(|_| w.flush())
                .map_err(|e| HybridError::Io {
                    path: path.clone(),
                    source: e,
                })?;
        }
        Ok(())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> HybridError {
    HybridError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads the matrix of `inst`, looks up a reference optimum by name and runs.
pub fn run_hybrid_instance(
    inst: &Instance,
    cfg: &HybridConfig,
) -> Result<RunReport<f64>, HybridError> {
    let d = inst.distance_matrix::<f64>()?;
    let optimum = lookup_optimum(&inst.name).map(|r| r.optimum_length);
    run_hybrid(&d, cfg, optimum)
}

pub fn run_hybrid<T: Scalar>(
    d: &DistanceMatrix<T>,
    cfg: &HybridConfig,
    optimum: Option<f64>,
) -> Result<RunReport<T>, HybridError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut sub_time = Duration::ZERO;
    let mut log = IterLog::open(cfg.iteration_log.as_deref())?;
    let master = cfg.rng_seed;

    let mut pool =
        SolutionPool::initialize(d, cfg.n_pool, &cfg.sa, derive_seed(master, STREAM_POOL, 0))?;
    let initial_pool_best = pool.best().length().as_f64();
    let mut x_best = pool.best().clone();
    let mut fails = 0;
    let mut iteration = 0;
    let mut records = Vec::new();
    let mut n_subs = Vec::new();

    while fails < cfg.max_fails {
        if cfg.max_iterations.is_some_and(|m| iteration >= m) {
            break;
        }
        iteration += 1;
        let it_seed = derive_seed(master, STREAM_ITER, iteration as u64);

        let sample = match cfg.refine {
            RefineMode::All => {
                pool.refine_all(d, &cfg.sa, derive_seed(it_seed, STREAM_REFINE, 0));
                sample_indices(
                    pool.len(),
                    cfg.n_sample,
                    derive_seed(it_seed, STREAM_SAMPLE, 0),
                )?
            }
            RefineMode::Sampled => {
                let s = sample_indices(
                    pool.len(),
                    cfg.n_sample,
                    derive_seed(it_seed, STREAM_SAMPLE, 0),
                )?;
                pool.refine_subset(&s, d, &cfg.sa, derive_seed(it_seed, STREAM_REFINE, 0));
                s
            }
            RefineMode::Off => sample_indices(
                pool.len(),
                cfg.n_sample,
                derive_seed(it_seed, STREAM_SAMPLE, 0),
            )?,
        };
        let freqs = edge_frequencies(sample.iter().map(|&i| &pool.members()[i]))?;

        let mut tau = cfg.tau;
        let mut contracted = None;
        for attempt in 0..=TAU_RETRIES {
            let bb = build_backbone(&freqs, tau, d)?;
            match contract(d, &bb) {
                Ok(ci) => {
                    contracted = Some(ci);
                    break;
                }
                Err(ContractionError::TooFewEntities { n_sub }) if attempt < TAU_RETRIES => {
                    log::debug!("iteration {iteration}: {n_sub} entities at tau {tau}, relaxing");
                    tau = (1.0 + tau) / 2.0;
                }
                Err(ContractionError::TooFewEntities { .. }) => break,
                Err(e) => return Err(e.into()),
            }
        }

        let mut rec = IterationRecord {
            iteration,
            tau_used: tau,
            n_sub: None,
            sub_time_s: 0.0,
            candidate_length: None,
            best_length: x_best.length().as_f64(),
            new_best: false,
            note: String::new(),
        };
        let Some(ci) = contracted else {
            fails += 1;
            rec.note = "contraction degenerate".into();
            log.push(&rec)?;
            records.push(rec);
            continue;
        };
        rec.n_sub = Some(ci.n_sub());
        n_subs.push(ci.n_sub());

        let sub_seed = derive_seed(it_seed, STREAM_SUB, 0);
        let seed_tour = if cfg.warm_start {
            derive_seed_subtour(pool.best(), &ci)?
        } else {
            random_tour(ci.d_sub(), sub_seed)?
        };
        let extra_seeds: Vec<Tour<T>> = if cfg.backend == Backend::Pimc && cfg.pimc_pool_seeds > 1 {
            let mut ranked: Vec<&Tour<T>> = pool.members().iter().collect();
            ranked.sort_by(|a, b| a.length().partial_cmp(&b.length()).expect("finite"));
            ranked
                .into_iter()
                .skip(1)
                .take(cfg.pimc_pool_seeds - 1)
                .map(|t| derive_seed_subtour(t, &ci))
                .collect::<Result<_, _>>()?
        } else {
            Vec::new()
        };

        let t0 = Instant::now();
        let solved = sub_solve(&ci, &seed_tour, &extra_seeds, cfg, iteration, sub_seed);
        let elapsed = t0.elapsed();
        sub_time += elapsed;
        rec.sub_time_s = elapsed.as_secs_f64();

        let sub = match solved {
            Ok(SubSolution { tour, note }) => {
                rec.note = note;
                tour
            }
            Err(HybridError::ExternalTimeout(p)) => {
                fails += 1;
                rec.note = format!("timeout waiting for {p}");
                log.push(&rec)?;
                records.push(rec);
                continue;
            }
            Err(e) => return Err(e),
        };
        let x_new = expand_tour(&sub, &ci, d)?;
        rec.candidate_length = Some(x_new.length().as_f64());
        let improved = x_new.length().as_f64() < x_best.length().as_f64() - IMPROVEMENT_TOL;
        pool.update(x_new.clone())?;
        if improved {
            x_best = x_new;
            fails = 0;
            rec.new_best = true;
        } else {
            fails += 1;
        }
        rec.best_length = x_best.length().as_f64();
        log.push(&rec)?;
        records.push(rec);
    }

    let loop_best_length = x_best.length().as_f64();
    // refinement can leave a pool member shorter than anything the loop expanded
    if pool.best().length() < x_best.length() {
        x_best = pool.best().clone();
    }
    let n = d.n();
    let mean_n_sub = if n_subs.is_empty() {
        n as f64
    } else {
        n_subs.iter().sum::<usize>() as f64 / n_subs.len() as f64
    };
    let total = start.elapsed();
    let best_length = x_best.length().as_f64();
    Ok(RunReport {
        optimality_gap_pct: optimum.map(|o| optimality_gap(best_length, o)),
        best_tour: x_best,
        best_length,
        loop_best_length,
        initial_pool_best,
        iterations: iteration,
        mean_n_sub,
        compression_pct: 100.0 * (n as f64 - mean_n_sub) / n as f64,
        total_time_s: total.as_secs_f64(),
        subsolver_time_s: sub_time.as_secs_f64(),
        classical_time_s: (total - sub_time).as_secs_f64(),
        per_iteration_log: records,
    })
}

/// Sub-solver output, with a log note (e.g. a fallback warning).
#[derive(Clone, Debug)]
pub struct SubSolution<T> {
    pub tour: Tour<T>,
    pub note: String,
}

/// Solves the reduced instance with the configured backend. The result is
/// never longer than `seed` on the reduced matrix; when no feasible sample
/// exists the seed comes back with a note.
pub fn sub_solve<T: Scalar>(
    ci: &ContractedInstance<T>,
    seed: &Tour<T>,
    extra_seeds: &[Tour<T>],
    cfg: &HybridConfig,
    iteration: usize,
    rng_seed: u64,
) -> Result<SubSolution<T>, HybridError> {
    let d_sub = ci.d_sub();
    if seed.len() != ci.n_sub() {
        return Err(ContractionError::DimensionMismatch {
            expected: ci.n_sub(),
            found: seed.len(),
        }
        .into());
    }
    let keep = |note: &str| SubSolution {
        tour: seed.clone(),
        note: note.to_string(),
    };
    if ci.n_sub() == 3 || cfg.backend == Backend::Identity {
        return Ok(keep(""));
    }
    let better = |cand: Option<Tour<T>>, note: &str| -> SubSolution<T> {
        match cand {
            Some(t) if t.length() < seed.length() => SubSolution {
                tour: t,
                note: String::new(),
            },
            Some(_) => keep(""),
            None => {
                log::warn!("iteration {iteration}: {note}; keeping the seed");
                keep(note)
            }
        }
    };
    match cfg.backend {
        Backend::Identity => unreachable!(),
        Backend::Pimc => {
            let mut sched = cfg.pimc.schedule(d_sub, seed, rng_seed);
            sched.decay = cfg.pimc_decay;
            let mut seeds: Vec<&Tour<T>> = vec![seed];
            seeds.extend(extra_seeds.iter());
            let out = pimc_run(d_sub, &seeds, &sched)?;
            Ok(better(Some(out.best), ""))
        }
        Backend::QuboExhaustive | Backend::QuboAnneal | Backend::QuboExternal => {
            let scale = cfg.lambda_scale.unwrap_or(match cfg.backend {
                Backend::QuboExhaustive => ci.n_sub() as f64,
                _ => DEFAULT_LAMBDA_SCALE,
            });
            let lam = T::of(scale) * d_sub.max_distance();
            let model = build_qubo(d_sub, lam, lam)?;
            let set = match cfg.backend {
                Backend::QuboExhaustive => solve_exhaustive(&model)?,
                Backend::QuboAnneal => solve_anneal(&model, &cfg.anneal, rng_seed)?,
                _ => {
                    let ext = cfg.external.as_ref().expect("validated");
                    external_round_trip(&model, ext, iteration)?
                }
            };
            Ok(better(
                set.best_feasible(&model, d_sub),
                "no feasible sample",
            ))
        }
    }
}

fn external_round_trip<T: Scalar>(
    model: &crate::qubo::QuboModel<T>,
    ext: &ExternalConfig,
    iteration: usize,
) -> Result<crate::qubo::SampleSet<T>, HybridError> {
    fs::create_dir_all(&ext.run_dir).map_err(|e| io_err(&ext.run_dir, e))?;
    let qubo_path = ext.run_dir.join(format!("iter{iteration}.qubo"));
    let samples_path = ext.run_dir.join(format!("iter{iteration}.samples"));
    export_qubo(model, &qubo_path)?;
    let deadline = Instant::now() + ext.timeout;
    loop {
        if samples_path.exists() {
            return Ok(import_samples(model, &samples_path)?);
        }
        if Instant::now() >= deadline {
            return Err(HybridError::ExternalTimeout(
                samples_path.display().to_string(),
            ));
        }
        std::thread::sleep(ext.poll_interval);
    }
}

/// Compression of a single contraction, for reporting.
pub fn contraction_compression<T: Scalar>(ci: &ContractedInstance<T>) -> f64 {
    compression_rate(ci.n(), ci.n_sub())
}
