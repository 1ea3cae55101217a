//! Parameter-grid benchmark harness.
//!
//! Every (instance, cell, repetition) triple gets a seed derived from the
//! master seed and a text key of the triple, so results do not depend on grid
//! order and an interrupted sweep can resume from `runs.csv`. Rows are flushed
//! per cell; `summary.csv` is rewritten after every cell in grid order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use thiserror::Error;

use crate::hybrid::{optimality_gap, run_hybrid, Backend, HybridConfig, HybridError};
use crate::rng::{derive_seed, hash_str};
use crate::tsplib::{lookup_optimum, resolve_instance, Instance, TsplibError};

pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const TIMING_CAVEAT: &str =
    "# total_s and subsolver_s are wall-clock seconds and machine-dependent";
pub const DEFAULT_REPS: usize = 20;

pub const RUN_COLUMNS: [&str; 15] = [
    "instance",
    "tau",
    "n_pool",
    "n_sample",
    "gamma",
    "k",
    "backend",
    "rep",
    "best_len",
    "gap_pct",
    "n_sub",
    "compression_pct",
    "iterations",
    "total_s",
    "subsolver_s",
];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Instance(#[from] TsplibError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> BenchError {
    BenchError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Sample size given directly or as a share of the pool.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SampleSize {
    Count(usize),
    Fraction(f64),
}

impl SampleSize {
    pub fn resolve(&self, n_pool: usize) -> usize {
        match *self {
            SampleSize::Count(c) => c,
            SampleSize::Fraction(f) => ((f * n_pool as f64).round() as usize).clamp(1, n_pool),
        }
    }
}

/// One parameter combination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub tau: f64,
    pub n_pool: usize,
    pub n_sample: usize,
    pub gamma: usize,
    pub k: usize,
}

impl Cell {
    fn key(&self, instance: &str, backend: Backend) -> String {
        format!(
            "{instance}|{}|{}|{}|{}|{}|{backend}",
            self.tau, self.n_pool, self.n_sample, self.gamma, self.k
        )
    }
}

/// Cartesian grid; sample sizes are resolved per pool size.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrid {
    pub taus: Vec<f64>,
    pub n_pools: Vec<usize>,
    pub n_samples: Vec<SampleSize>,
    pub gammas: Vec<usize>,
    pub ks: Vec<usize>,
}

impl ParamGrid {
    /// Cells in nested order pool, sample, tau, gamma, k.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n_pool in &self.n_pools {
            for s in &self.n_samples {
                for &tau in &self.taus {
                    for &gamma in &self.gammas {
                        for &k in &self.ks {
                            out.push(Cell {
                                tau,
                                n_pool,
                                n_sample: s.resolve(n_pool),
                                gamma,
                                k,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
            || self.n_pools.is_empty()
            || self.n_samples.is_empty()
            || self.gammas.is_empty()
            || self.ks.is_empty()
    }
}

/// Grids of the published sensitivity and overall-performance tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Threshold sweep at `N_I = 100`, `N_S = 50`.
    Table1,
    /// Pool and sample sweep at `tau = 0.8`.
    Table2,
    /// Selected configuration `tau = 0.75`, `N_I = 500`, `N_S = 250`.
    Table3,
}

impl Preset {
    pub fn grid(&self) -> ParamGrid {
        match self {
            Preset::Table1 => ParamGrid {
                taus: vec![1.0, 0.9, 0.75, 0.5],
                n_pools: vec![100],
                n_samples: vec![SampleSize::Count(50)],
                gammas: vec![1],
                ks: vec![3],
            },
            Preset::Table2 => ParamGrid {
                taus: vec![0.8],
                n_pools: vec![50, 500],
                n_samples: vec![
                    SampleSize::Fraction(0.2),
                    SampleSize::Fraction(0.5),
                    SampleSize::Fraction(1.0),
                ],
                gammas: vec![1],
                ks: vec![3],
            },
            Preset::Table3 => ParamGrid {
                taus: vec![0.75],
                n_pools: vec![500],
                n_samples: vec![SampleSize::Count(250)],
                gammas: vec![1],
                ks: vec![3],
            },
        }
    }

    /// Instances named in the table that can be resolved locally by default.
    pub fn instances(&self) -> Vec<&'static str> {
        match self {
            Preset::Table1 | Preset::Table2 => vec!["berlin52", "pr439", "pr1002"],
            Preset::Table3 => vec![
                "burma14",
                "ulysses22",
                "berlin52",
                "pr264",
                "pr439",
                "pr1002",
                "pr2392",
            ],
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table1" => Ok(Preset::Table1),
            "table2" => Ok(Preset::Table2),
            "table3" => Ok(Preset::Table3),
            _ => Err(format!("unknown preset {s:?} (table1, table2, table3)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    /// Paths, bundled names, or names under `$HYTSP_TSPLIB_DIR`.
    pub instances: Vec<String>,
    pub grid: ParamGrid,
    pub repetitions: usize,
    pub backend: Backend,
    pub out_dir: PathBuf,
    pub master_seed: u64,
    /// Settings not covered by the grid.
    pub base: HybridConfig,
    /// Cells run concurrently.
    pub workers: usize,
}

impl ExperimentSpec {
    pub fn new(instances: Vec<String>, grid: ParamGrid, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            instances,
            grid,
            repetitions: DEFAULT_REPS,
            backend: Backend::Pimc,
            out_dir: out_dir.into(),
            master_seed: 0,
            base: HybridConfig::default(),
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::InvalidSpec(m.to_string()));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.instances.is_empty() || self.grid.is_empty() {
            return bad("grid and instance list must be non-empty");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        for cell in self.grid.cells() {
            self.config(&cell, 0)
                .validate()
                .map_err(|e| BenchError::InvalidSpec(format!("{cell:?}: {e}")))?;
        }
        Ok(())
    }

    /// Seed of one repetition; independent of grid position.
    pub fn run_seed(&self, instance: &str, cell: &Cell, rep: usize) -> u64 {
        let key = cell.key(instance, self.backend);
        derive_seed(self.master_seed, hash_str(&key), rep as u64)
    }

    fn config(&self, cell: &Cell, seed: u64) -> HybridConfig {
        let mut cfg = self.base.clone();
        cfg.tau = cell.tau;
        cfg.n_pool = cell.n_pool;
        cfg.n_sample = cell.n_sample;
        cfg.sa.gamma = cell.gamma;
        cfg.max_fails = cell.k;
        cfg.backend = self.backend;
        cfg.rng_seed = seed;
        cfg.iteration_log = None;
        cfg
    }
}

/// One repetition, as stored in `runs.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRow {
    pub instance: String,
    pub tau: f64,
    pub n_pool: usize,
    pub n_sample: usize,
    pub gamma: usize,
    pub k: usize,
    pub backend: String,
    pub rep: usize,
    pub best_len: f64,
    pub gap_pct: Option<f64>,
    pub n_sub: f64,
    pub compression_pct: f64,
    pub iterations: usize,
    pub total_s: f64,
    pub subsolver_s: f64,
}

fn opt_field(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn parse_field<V: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<V, String> {
    let raw = rec
        .get(i)
        .ok_or_else(|| format!("missing column {}", RUN_COLUMNS[i]))?;
    raw.parse()
        .map_err(|_| format!("bad {} value {raw:?}", RUN_COLUMNS[i]))
}

impl RunRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.instance.clone(),
            self.tau.to_string(),
            self.n_pool.to_string(),
            self.n_sample.to_string(),
            self.gamma.to_string(),
            self.k.to_string(),
            self.backend.clone(),
            self.rep.to_string(),
            self.best_len.to_string(),
            opt_field(self.gap_pct),
            self.n_sub.to_string(),
            self.compression_pct.to_string(),
            self.iterations.to_string(),
            self.total_s.to_string(),
            self.subsolver_s.to_string(),
        ]
    }

    pub fn from_record(rec: &csv::StringRecord) -> Result<Self, String> {
        if rec.len() != RUN_COLUMNS.len() {
            return Err(format!(
                "expected {} columns, found {}",
                RUN_COLUMNS.len(),
                rec.len()
            ));
        }
        let gap = match rec.get(9) {
            Some("") | None => None,
            Some(_) => Some(parse_field(rec, 9)?),
        };
        Ok(Self {
            instance: rec[0].to_string(),
            tau: parse_field(rec, 1)?,
            n_pool: parse_field(rec, 2)?,
            n_sample: parse_field(rec, 3)?,
            gamma: parse_field(rec, 4)?,
            k: parse_field(rec, 5)?,
            backend: rec[6].to_string(),
            rep: parse_field(rec, 7)?,
            best_len: parse_field(rec, 8)?,
            gap_pct: gap,
            n_sub: parse_field(rec, 10)?,
            compression_pct: parse_field(rec, 11)?,
            iterations: parse_field(rec, 12)?,
            total_s: parse_field(rec, 13)?,
            subsolver_s: parse_field(rec, 14)?,
        })
    }

    fn matches(&self, instance: &str, cell: &Cell, backend: &str) -> bool {
        self.instance == instance
            && self.tau == cell.tau
            && self.n_pool == cell.n_pool
            && self.n_sample == cell.n_sample
            && self.gamma == cell.gamma
            && self.k == cell.k
            && self.backend == backend
    }

    /// Row with the timing columns zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            total_s: 0.0,
            subsolver_s: 0.0,
            ..self.clone()
        }
    }
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Statistics of one (instance, cell) over its repetitions.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub instance: String,
    pub cell: Cell,
    pub backend: String,
    pub runs: usize,
    pub n_sub: Stat,
    pub compression_pct: Stat,
    /// `None` when the instance has no reference optimum.
    pub gap_pct: Option<Stat>,
    pub best_gap_pct: Option<f64>,
    pub total_s: Stat,
    pub subsolver_s: Stat,
}

impl AggregateRow {
    pub const CSV_HEADER: [&'static str; 19] = [
        "instance",
        "tau",
        "n_pool",
        "n_sample",
        "gamma",
        "k",
        "backend",
        "runs",
        "n_sub_mean",
        "n_sub_std",
        "compression_pct_mean",
        "compression_pct_std",
        "gap_pct_mean",
        "gap_pct_std",
        "best_gap_pct",
        "total_s_mean",
        "total_s_std",
        "subsolver_s_mean",
        "subsolver_s_std",
    ];

    /// Aggregates `rows`, which must all belong to one cell.
    pub fn from_rows(rows: &[RunRow]) -> Option<Self> {
        let first = rows.first()?;
        let col = |f: fn(&RunRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
        let gaps: Option<Vec<f64>> = rows.iter().map(|r| r.gap_pct).collect();
        Some(Self {
            instance: first.instance.clone(),
            cell: Cell {
                tau: first.tau,
                n_pool: first.n_pool,
                n_sample: first.n_sample,
                gamma: first.gamma,
                k: first.k,
            },
            backend: first.backend.clone(),
            runs: rows.len(),
            n_sub: Stat::of(&col(|r| r.n_sub)),
            compression_pct: Stat::of(&col(|r| r.compression_pct)),
            best_gap_pct: gaps
                .as_ref()
                .map(|g| g.iter().copied().fold(f64::INFINITY, f64::min)),
            gap_pct: gaps.as_deref().map(Stat::of),
            total_s: Stat::of(&col(|r| r.total_s)),
            subsolver_s: Stat::of(&col(|r| r.subsolver_s)),
        })
    }

    pub fn to_record(&self) -> Vec<String> {
        let c = &self.cell;
        vec![
            self.instance.clone(),
            c.tau.to_string(),
            c.n_pool.to_string(),
            c.n_sample.to_string(),
            c.gamma.to_string(),
            c.k.to_string(),
            self.backend.clone(),
            self.runs.to_string(),
            self.n_sub.mean.to_string(),
            self.n_sub.std.to_string(),
            self.compression_pct.mean.to_string(),
            self.compression_pct.std.to_string(),
            opt_field(self.gap_pct.map(|s| s.mean)),
            opt_field(self.gap_pct.map(|s| s.std)),
            opt_field(self.best_gap_pct),
            self.total_s.mean.to_string(),
            self.total_s.std.to_string(),
            self.subsolver_s.mean.to_string(),
            self.subsolver_s.std.to_string(),
        ]
    }
}

/// A repetition that returned an error.
#[derive(Clone, Debug, PartialEq)]
pub struct RunFailure {
    pub instance: String,
    pub cell: Cell,
    pub rep: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct BenchOutcome {
    /// Every row in `runs.csv`, including ones loaded on resume.
    pub rows: Vec<RunRow>,
    pub aggregates: Vec<AggregateRow>,
    pub failures: Vec<RunFailure>,
    /// Repetitions actually executed by this call.
    pub executed: usize,
}

/// Reads a `runs.csv` written by [`run_bench`].
pub fn read_runs(path: impl AsRef<Path>) -> Result<Vec<RunRow>, BenchError> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        rows.push(RunRow::from_record(&rec).map_err(|e| io_err(path, e))?);
    }
    Ok(rows)
}

fn execute(
    spec: &ExperimentSpec,
    inst: &Instance,
    d: &crate::tsp::DistanceMatrix<f64>,
    optimum: Option<f64>,
    cell: &Cell,
    rep: usize,
) -> Result<RunRow, HybridError> {
    let cfg = spec.config(cell, spec.run_seed(&inst.name, cell, rep));
    let report = run_hybrid(d, &cfg, optimum)?;
    Ok(RunRow {
        instance: inst.name.clone(),
        tau: cell.tau,
        n_pool: cell.n_pool,
        n_sample: cell.n_sample,
        gamma: cell.gamma,
        k: cell.k,
        backend: spec.backend.name().to_string(),
        rep,
        best_len: report.best_length,
        gap_pct: optimum.map(|o| optimality_gap(report.best_length, o)),
        n_sub: report.mean_n_sub,
        compression_pct: report.compression_pct,
        iterations: report.iterations,
        total_s: report.total_time_s,
        subsolver_s: report.subsolver_time_s,
    })
}

struct Sinks {
    runs: csv::Writer<fs::File>,
    runs_path: PathBuf,
    failures: csv::Writer<fs::File>,
    failures_path: PathBuf,
}

fn open_append(
    path: &Path,
    header: &[&str],
    caveat: Option<&str>,
) -> Result<csv::Writer<fs::File>, BenchError> {
    let fresh = !path.exists() || fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    if fresh {
        if let Some(c) = caveat {
            writeln!(file, "{c}").map_err(|e| io_err(path, e))?;
        }
    }
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file);
    if fresh {
        w.write_record(header).map_err(|e| io_err(path, e))?;
        w.flush().map_err(|e| io_err(path, e))?;
    }
    Ok(w)
}

fn write_summary(path: &Path, aggregates: &[AggregateRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(AggregateRow::CSV_HEADER)
        .map_err(|e| io_err(path, e))?;
    for a in aggregates {
        w.write_record(a.to_record()).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Runs the full grid, skipping repetitions already present in `runs.csv`.
pub fn run_bench(spec: &ExperimentSpec) -> Result<BenchOutcome, BenchError> {
    spec.validate()?;
    fs::create_dir_all(&spec.out_dir).map_err(|e| io_err(&spec.out_dir, e))?;
    let runs_path = spec.out_dir.join(RUNS_FILE);
    let existing = if runs_path.exists() {
        read_runs(&runs_path)?
    } else {
        Vec::new()
    };

    let mut loaded = Vec::new();
    for name in &spec.instances {
        let inst = resolve_instance(name)?;
        let d = inst.distance_matrix::<f64>()?;
        let optimum = lookup_optimum(&inst.name).map(|r| r.optimum_length);
        loaded.push((inst, d, optimum));
    }
    let cells = spec.grid.cells();
    let backend = spec.backend.name();
    let jobs: Vec<(usize, Cell)> = (0..loaded.len())
        .flat_map(|i| cells.iter().map(move |c| (i, *c)))
        .collect();

    let failures_path = spec.out_dir.join(FAILURES_FILE);
    let sinks = Mutex::new(Sinks {
        runs: open_append(&runs_path, &RUN_COLUMNS, Some(TIMING_CAVEAT))?,
        runs_path: runs_path.clone(),
        failures: open_append(
            &failures_path,
            &[
                "instance", "tau", "n_pool", "n_sample", "gamma", "k", "rep", "message",
            ],
            None,
        )?,
        failures_path,
    });
    // job index -> rows of that cell, in repetition order
    let done: Mutex<BTreeMap<usize, Vec<RunRow>>> = Mutex::new(BTreeMap::new());
    let failures = Mutex::new(Vec::new());
    let executed = Mutex::new(0usize);
    let summary_path = spec.out_dir.join(SUMMARY_FILE);

    let run_job = |job: usize| -> Result<(), BenchError> {
        let (ii, cell) = jobs[job];
        let (inst, d, optimum) = &loaded[ii];
        let have: BTreeSet<usize> = existing
            .iter()
            .filter(|r| r.matches(&inst.name, &cell, backend))
            .map(|r| r.rep)
            .collect();
        let mut rows: Vec<RunRow> = existing
            .iter()
            .filter(|r| r.matches(&inst.name, &cell, backend) && r.rep < spec.repetitions)
            .cloned()
            .collect();
        let mut fresh = Vec::new();
        let mut cell_failures = Vec::new();
        for rep in (0..spec.repetitions).filter(|r| !have.contains(r)) {
            log::info!("{} {:?} rep {rep}", inst.name, cell);
            match execute(spec, inst, d, *optimum, &cell, rep) {
                Ok(row) => fresh.push(row),
                Err(e) => {
                    log::warn!("{} {:?} rep {rep}: {e}", inst.name, cell);
                    cell_failures.push(RunFailure {
                        instance: inst.name.clone(),
                        cell,
                        rep,
                        message: e.to_string(),
                    });
                }
            }
        }
        {
            let mut s = sinks.lock().unwrap();
            let Sinks {
                runs,
                runs_path,
                failures: fw,
                failures_path,
            } = &mut *s;
            for row in &fresh {
                runs.write_record(row.to_record())
                    .map_err(|e| io_err(runs_path, e))?;
            }
            runs.flush().map_err(|e| io_err(runs_path, e))?;
            for f in &cell_failures {
                let c = &f.cell;
                fw.write_record([
                    f.instance.clone(),
                    c.tau.to_string(),
                    c.n_pool.to_string(),
                    c.n_sample.to_string(),
                    c.gamma.to_string(),
                    c.k.to_string(),
                    f.rep.to_string(),
                    f.message.clone(),
                ])
                .map_err(|e| io_err(failures_path, e))?;
            }
            fw.flush().map_err(|e| io_err(failures_path, e))?;
        }
        *executed.lock().unwrap() += fresh.len() + cell_failures.len();
        failures.lock().unwrap().extend(cell_failures);
        rows.extend(fresh);
        rows.sort_by_key(|r| r.rep);
        let mut done = done.lock().unwrap();
        done.insert(job, rows);
        let aggregates: Vec<AggregateRow> = done
            .values()
            .filter_map(|r| AggregateRow::from_rows(r))
            .collect();
        write_summary(&summary_path, &aggregates)
    };

    if spec.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| BenchError::InvalidSpec(e.to_string()))?;
        pool.install(|| (0..jobs.len()).into_par_iter().try_for_each(run_job))?;
    } else {
        (0..jobs.len()).try_for_each(run_job)?;
    }

    let done = done.into_inner().unwrap();
    let failures = failures.into_inner().unwrap();
    let aggregates = done
        .values()
        .filter_map(|r| AggregateRow::from_rows(r))
        .collect();
    let rows = done.into_values().flatten().collect();
    Ok(BenchOutcome {
        rows,
        aggregates,
        failures,
        executed: executed.into_inner().unwrap(),
    })
}

/// Re-aggregates rows grouped by (instance, cell, backend), in first-seen order.
pub fn aggregate(rows: &[RunRow]) -> Vec<AggregateRow> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<RunRow>> = BTreeMap::new();
    for r in rows {
        let key = format!(
            "{}|{}|{}|{}|{}|{}|{}",
            r.instance, r.tau, r.n_pool, r.n_sample, r.gamma, r.k, r.backend
        );
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r.clone());
    }
    order
        .iter()
        .filter_map(|k| {
            let mut g = groups.remove(k)?;
            g.sort_by_key(|r| r.rep);
            AggregateRow::from_rows(&g)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(rep: usize, gap: f64) -> RunRow {
        RunRow {
            instance: "x".into(),
            tau: 0.5,
            n_pool: 10,
            n_sample: 5,
            gamma: 1,
            k: 3,
            backend: "pimc".into(),
            rep,
            best_len: 100.0 + gap,
            gap_pct: Some(gap),
            n_sub: 4.0 + rep as f64,
            compression_pct: 60.0,
            iterations: 4,
            total_s: 0.1,
            subsolver_s: 0.05,
        }
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(Preset::Table1.grid().cells().len(), 4);
        let t2 = Preset::Table2.grid().cells();
        let pairs: Vec<(usize, usize)> = t2.iter().map(|c| (c.n_pool, c.n_sample)).collect();
        assert_eq!(
            pairs,
            vec![
                (50, 10),
                (50, 25),
                (50, 50),
                (500, 100),
                (500, 250),
                (500, 500)
            ]
        );
        assert!(t2.iter().all(|c| c.tau == 0.8));
        let t3 = Preset::Table3.grid().cells();
        assert_eq!((t3[0].tau, t3[0].n_pool, t3[0].n_sample), (0.75, 500, 250));
    }

    #[test]
    fn stats() {
        let one = AggregateRow::from_rows(&[row(0, 1.0)]).unwrap();
        assert_eq!(one.gap_pct.unwrap().std, 0.0);
        assert_eq!(one.n_sub.std, 0.0);
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let agg = AggregateRow::from_rows(&[row(0, 2.0), row(1, 0.5)]).unwrap();
        assert_eq!(agg.best_gap_pct, Some(0.5));
        assert!(agg.best_gap_pct.unwrap() <= agg.gap_pct.unwrap().mean);
    }

    #[test]
    fn record_round_trip() {
        let mut r = row(3, 0.123456789);
        let rec = csv::StringRecord::from(r.to_record());
        assert_eq!(RunRow::from_record(&rec).unwrap(), r);
        r.gap_pct = None;
        let rec = csv::StringRecord::from(r.to_record());
        assert_eq!(RunRow::from_record(&rec).unwrap(), r);
    }

    #[test]
    fn seeds_depend_on_cell_not_position() {
        let spec =
            ExperimentSpec::new(vec!["burma14".into()], Preset::Table1.grid(), "/tmp/unused");
        let cells = spec.grid.cells();
        let a = spec.run_seed("burma14", &cells[0], 0);
        assert_eq!(a, spec.run_seed("burma14", &cells[0], 0));
        assert_ne!(a, spec.run_seed("burma14", &cells[0], 1));
        assert_ne!(a, spec.run_seed("burma14", &cells[1], 0));
        assert_ne!(a, spec.run_seed("ulysses22", &cells[0], 0));
    }
}
