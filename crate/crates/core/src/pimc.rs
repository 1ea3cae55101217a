//! Path-integral Monte Carlo annealing over tours.
//!
//! `P` replicas of the tour are coupled along imaginary time. Each replica is
//! described by its symmetric adjacency indicator `U`; a 2-opt move flips four
//! entries of one replica's `U`. The move energy is
//! `dE = dH / P + J * dK`, where `dH` is the length change and `dK` the change
//! in disagreement between the flipped entries and the same entries in the two
//! neighbouring replicas (periodic, so with `P = 2` the single neighbour counts
//! twice). The coupling is `J = (P T / 2) ln coth(gamma / (P T))`.
//!
//! With `J = 0` the acceptance rule `exp(-dH / (P T))` is plain Metropolis at
//! temperature `P T` on each replica.

use std::io::Write;

use rand::Rng;
use thiserror::Error;

use crate::pool::random_move;
use crate::rng::{rng_from_seed, SolverRng};
use crate::scalar::Scalar;
use crate::tsp::{
    check_move, cycle_length, move_delta, reverse_cyclic, DistanceMatrix, Tour, TspError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PimcError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("coupling needs positive field and temperature (gamma {gamma}, P*T {pt})")]
    NonPositive { gamma: f64, pt: f64 },
    #[error("no seed tour given")]
    NoSeed,
    #[error(transparent)]
    Tour(#[from] TspError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaDecay {
    Linear,
    Geometric,
}

/// Annealing schedule. `temperature`, `gamma0` and `gammaf` share the units of
/// the distance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PimcSchedule {
    pub replicas: usize,
    pub temperature: f64,
    pub gamma0: f64,
    pub gammaf: f64,
    /// One sweep is `replicas * n` proposals.
    pub sweeps: usize,
    pub decay: GammaDecay,
    /// Replaces the field-derived coupling with a constant (e.g. `0.0`).
    pub coupling_override: Option<f64>,
    /// Record one trace row per sweep.
    pub trace: bool,
    pub seed: u64,
}

/// How the default schedule picks its energy scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PimcDefaults {
    pub replicas: usize,
    /// `P T` as a multiple of the energy scale.
    pub pt_factor: f64,
    pub gamma0_factor: f64,
    pub gammaf_factor: f64,
    pub sweeps_per_node: usize,
    pub scale: EnergyScale,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyScale {
    /// Mean off-diagonal distance.
    MeanDistance,
    /// Seed tour length divided by node count.
    MeanTourEdge,
}

impl Default for PimcDefaults {
    fn default() -> Self {
        Self {
            replicas: 20,
            pt_factor: 0.5,
            gamma0_factor: 3.0,
            gammaf_factor: 1e-3,
            sweeps_per_node: 200,
            scale: EnergyScale::MeanTourEdge,
        }
    }
}

impl PimcDefaults {
    /// Literal scale-free defaults: `P T = 2 <d>`, fields relative to `<d>`.
    pub fn mean_distance() -> Self {
        Self {
            pt_factor: 2.0,
            scale: EnergyScale::MeanDistance,
            ..Self::default()
        }
    }

    pub fn schedule<T: Scalar>(
        &self,
        d: &DistanceMatrix<T>,
        seed_tour: &Tour<T>,
        seed: u64,
    ) -> PimcSchedule {
        let n = d.n().max(1);
        let raw = match self.scale {
            EnergyScale::MeanDistance => d.mean_distance().as_f64(),
            EnergyScale::MeanTourEdge => seed_tour.length().as_f64() / n as f64,
        };
        let scale = if raw > 0.0 { raw } else { 1.0 };
        let p = self.replicas.max(2);
        PimcSchedule {
            replicas: p,
            temperature: self.pt_factor * scale / p as f64,
            gamma0: self.gamma0_factor * scale,
            gammaf: self.gammaf_factor * scale,
            sweeps: (self.sweeps_per_node * n).max(1),
            decay: GammaDecay::Linear,
            coupling_override: None,
            trace: false,
            seed,
        }
    }
}

impl PimcSchedule {
    pub fn validate(&self) -> Result<(), PimcError> {
        let bad = |m: String| Err(PimcError::InvalidSchedule(m));
        if self.replicas < 2 {
            return bad(format!("need at least 2 replicas, got {}", self.replicas));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature {} must be positive", self.temperature));
        }
        if !(self.gammaf > 0.0 && self.gamma0 >= self.gammaf && self.gamma0.is_finite()) {
            return bad(format!(
                "need gamma0 >= gammaf > 0, got {} and {}",
                self.gamma0, self.gammaf
            ));
        }
        if self.sweeps == 0 {
            return bad("sweeps must be at least 1".into());
        }
        Ok(())
    }

    /// Field at sweep `s` of `sweeps`.
    pub fn gamma_at(&self, s: usize) -> f64 {
        if self.sweeps <= 1 {
            return self.gamma0;
        }
        let frac = s as f64 / (self.sweeps - 1) as f64;
        match self.decay {
            GammaDecay::Linear => self.gamma0 + (self.gammaf - self.gamma0) * frac,
            GammaDecay::Geometric => self.gamma0 * (self.gammaf / self.gamma0).powf(frac),
        }
    }

    fn coupling_at(&self, s: usize) -> f64 {
        match self.coupling_override {
            Some(j) => j,
            None => replica_coupling(self.gamma_at(s), self.replicas, self.temperature)
                .expect("validated schedule"),
        }
    }
}

/// `J = (P T / 2) ln coth(gamma / (P T))`.
pub fn replica_coupling(gamma: f64, p: usize, t: f64) -> Result<f64, PimcError> {
    let pt = p as f64 * t;
    if !(gamma > 0.0 && pt > 0.0) {
        return Err(PimcError::NonPositive { gamma, pt });
    }
    let x = gamma / pt;
    // ln coth x = ln(1 + q) - ln(1 - q) with q = exp(-2x), stable at both ends
    let ln_coth = (-2.0 * x).exp().ln_1p() - (-(-2.0 * x).exp_m1()).ln();
    Ok(0.5 * pt * ln_coth)
}

/// Tour length written as half the sum of `d_ij U_ij` over the adjacency indicator.
pub fn potential_energy<T: Scalar>(t: &Tour<T>, d: &DistanceMatrix<T>) -> T {
    let n = t.len();
    let u = adjacency(t.order(), n);
    let mut total = T::zero();
    for i in 0..n {
        for j in 0..n {
            if u[i * n + j] == 1 {
                total += d.get(i, j);
            }
        }
    }
    total / T::of(2.0)
}

fn adjacency(order: &[usize], n: usize) -> Vec<u8> {
    let mut u = vec![0u8; n * n];
    for p in 0..n {
        let (a, b) = (order[p], order[(p + 1) % n]);
        u[a * n + b] = 1;
        u[b * n + a] = 1;
    }
    u
}

/// One sample of the annealing trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub sweep: usize,
    pub gamma: f64,
    pub coupling: f64,
    pub best_length: f64,
    pub mean_replica_length: f64,
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sweep", "gamma", "J", "best_length", "mean_replica_length"])?;
    for r in rows {
        w.write_record([
            r.sweep.to_string(),
            r.gamma.to_string(),
            r.coupling.to_string(),
            r.best_length.to_string(),
            r.mean_replica_length.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The coupled replicas, their adjacency indicators and the best tour seen.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicaSystem<T> {
    n: usize,
    orders: Vec<Vec<usize>>,
    lengths: Vec<T>,
    u: Vec<Vec<u8>>,
    best: Tour<T>,
}

impl<T: Scalar> ReplicaSystem<T> {
    /// `p` replicas filled round-robin from `seeds`; the shortest seed starts as best.
    pub fn new(seeds: &[&Tour<T>], p: usize) -> Result<Self, PimcError> {
        let first = seeds.first().ok_or(PimcError::NoSeed)?;
        let n = first.len();
        if let Some(bad) = seeds.iter().find(|s| s.len() != n) {
            return Err(PimcError::Tour(TspError::DimensionMismatch {
                expected: n,
                found: bad.len(),
            }));
        }
        let mut orders = Vec::with_capacity(p);
        let mut lengths = Vec::with_capacity(p);
        let mut u = Vec::with_capacity(p);
        for r in 0..p {
            let s = seeds[r % seeds.len()];
            orders.push(s.order().to_vec());
            lengths.push(s.length());
            u.push(adjacency(s.order(), n));
        }
        let best = (*seeds
            .iter()
            .min_by(|a, b| a.length().partial_cmp(&b.length()).expect("finite lengths"))
            .expect("non-empty"))
        .clone();
        Ok(Self {
            n,
            orders,
            lengths,
            u,
            best,
        })
    }

    pub fn replicas(&self) -> usize {
        self.orders.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn replica_order(&self, r: usize) -> &[usize] {
        &self.orders[r]
    }

    pub fn replica_length(&self, r: usize) -> T {
        self.lengths[r]
    }

    pub fn best_seen(&self) -> &Tour<T> {
        &self.best
    }

    pub fn mean_length(&self) -> f64 {
        self.lengths.iter().map(|l| l.as_f64()).sum::<f64>() / self.lengths.len() as f64
    }

    /// Adjacency indicator of replica `r`, row-major `n x n`.
    pub fn adjacency_of(&self, r: usize) -> &[u8] {
        &self.u[r]
    }

    /// True when every stored indicator matches its replica's tour.
    pub fn adjacency_consistent(&self) -> bool {
        (0..self.replicas()).all(|r| self.u[r] == adjacency(&self.orders[r], self.n))
    }

    fn flipped(&self, r: usize, i: usize, k: usize) -> [(usize, usize, u8); 4] {
        let o = &self.orders[r];
        let (a, b, c, e) = (o[i], o[i + 1], o[k], o[(k + 1) % self.n]);
        [(a, b, 0), (c, e, 0), (a, c, 1), (b, e, 1)]
    }

    /// Change in replica disagreement caused by move `(i, k)` on replica `r`.
    pub fn delta_kinetic(&self, r: usize, i: usize, k: usize) -> i32 {
        let p = self.replicas();
        let prev = (r + p - 1) % p;
        let next = (r + 1) % p;
        let mut dk = 0i32;
        for (x, y, new) in self.flipped(r, i, k) {
            let idx = x * self.n + y;
            let old = self.u[r][idx];
            for q in [prev, next] {
                let other = self.u[q][idx];
                dk += i32::from(new != other) - i32::from(old != other);
            }
        }
        dk
    }

    /// Applies move `(i, k)` to replica `r` unconditionally.
    pub fn apply_move(
        &mut self,
        r: usize,
        i: usize,
        k: usize,
        d: &DistanceMatrix<T>,
    ) -> Result<(), PimcError> {
        self.check(i, k)?;
        let delta = move_delta(&self.orders[r], i, k, d);
        self.commit(r, i, k, delta, d);
        Ok(())
    }

    fn check(&self, i: usize, k: usize) -> Result<(), PimcError> {
        check_move(self.n, i, k)?;
        if k - i < 2 || k - i > self.n - 2 {
            return Err(PimcError::Tour(TspError::PositionOutOfRange {
                i,
                k,
                n: self.n,
            }));
        }
        Ok(())
    }

    fn commit(&mut self, r: usize, i: usize, k: usize, delta: T, d: &DistanceMatrix<T>) {
        let n = self.n;
        for (x, y, new) in self.flipped(r, i, k) {
            self.u[r][x * n + y] = new;
            self.u[r][y * n + x] = new;
        }
        reverse_cyclic(&mut self.orders[r], i, k);
        self.lengths[r] += delta;
        if self.lengths[r] < self.best.length() - d.tolerance() {
            let exact = cycle_length(&self.orders[r], d);
            self.lengths[r] = exact;
            if exact < self.best.length() {
                self.best = Tour::from_parts(self.orders[r].clone(), exact);
            }
        }
    }

    /// Metropolis step for move `(i, k)` on replica `r`; returns acceptance.
    #[allow(clippy::too_many_arguments)]
    pub fn pimc_move<R: Rng + ?Sized>(
        &mut self,
        r: usize,
        i: usize,
        k: usize,
        d: &DistanceMatrix<T>,
        coupling: f64,
        temperature: f64,
        rng: &mut R,
    ) -> Result<bool, PimcError> {
        self.check(i, k)?;
        Ok(self.step(r, i, k, d, coupling, temperature, rng))
    }

    #[allow(clippy::too_many_arguments)]
    fn step<R: Rng + ?Sized>(
        &mut self,
        r: usize,
        i: usize,
        k: usize,
        d: &DistanceMatrix<T>,
        coupling: f64,
        temperature: f64,
        rng: &mut R,
    ) -> bool {
        let delta = move_delta(&self.orders[r], i, k, d);
        let p = self.replicas() as f64;
        let mut de = delta.as_f64() / p;
        if coupling != 0.0 {
            de += coupling * f64::from(self.delta_kinetic(r, i, k));
        }
        let accept = de <= 0.0 || rng.gen::<f64>() < (-de / temperature).exp();
        if accept {
            self.commit(r, i, k, delta, d);
        }
        accept
    }

    fn resync(&mut self, d: &DistanceMatrix<T>) {
        for r in 0..self.replicas() {
            self.lengths[r] = cycle_length(&self.orders[r], d);
        }
    }
}

/// Result of an annealing run.
#[derive(Clone, Debug)]
pub struct PimcOutcome<T> {
    pub best: Tour<T>,
    pub accepted: usize,
    pub proposed: usize,
    pub trace: Vec<TraceRow>,
}

/// Anneals from `seed_tour` and returns the shortest tour seen.
pub fn pimc_solve<T: Scalar>(
    d: &DistanceMatrix<T>,
    seed_tour: &Tour<T>,
    sched: &PimcSchedule,
) -> Result<Tour<T>, PimcError> {
    Ok(pimc_run(d, &[seed_tour], sched)?.best)
}

/// Full run; replicas are seeded round-robin from `seeds`.
pub fn pimc_run<T: Scalar>(
    d: &DistanceMatrix<T>,
    seeds: &[&Tour<T>],
    sched: &PimcSchedule,
) -> Result<PimcOutcome<T>, PimcError> {
    sched.validate()?;
    let first = seeds.first().ok_or(PimcError::NoSeed)?;
    if first.len() != d.n() {
        return Err(PimcError::Tour(TspError::DimensionMismatch {
            expected: d.n(),
            found: first.len(),
        }));
    }
    let mut sys = ReplicaSystem::new(seeds, sched.replicas)?;
    let n = sys.n();
    let mut outcome = PimcOutcome {
        best: sys.best_seen().clone(),
        accepted: 0,
        proposed: 0,
        trace: Vec::new(),
    };
    if n < 4 {
        // a 3-cycle is the only tour
        return Ok(outcome);
    }
    let mut rng: SolverRng = rng_from_seed(sched.seed);
    let p = sched.replicas;
    for s in 0..sched.sweeps {
        let coupling = sched.coupling_at(s);
        for _ in 0..p * n {
            let r = rng.gen_range(0..p);
            let (i, k) = random_move(n, &mut rng);
            if sys.step(r, i, k, d, coupling, sched.temperature, &mut rng) {
                outcome.accepted += 1;
            }
            outcome.proposed += 1;
        }
        if sched.trace {
            outcome.trace.push(TraceRow {
                sweep: s,
                gamma: sched.gamma_at(s),
                coupling,
                best_length: sys.best_seen().length().as_f64(),
                mean_replica_length: sys.mean_length(),
            });
        }
        // drift from accumulated deltas
        if s % 64 == 63 {
            sys.resync(d);
        }
    }
    outcome.best = sys.best_seen().clone();
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> DistanceMatrix<f64> {
        let s = 2f64.sqrt();
        DistanceMatrix::from_rows(&[
            vec![0.0, 1.0, s, 1.0],
            vec![1.0, 0.0, 1.0, s],
            vec![s, 1.0, 0.0, 1.0],
            vec![1.0, s, 1.0, 0.0],
        ])
        .unwrap()
    }

    fn circle(n: usize) -> DistanceMatrix<f64> {
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let a = i as f64 * 2.399_963; // golden-angle scatter
                (
                    (a).cos() * (1.0 + i as f64 * 0.1),
                    (a).sin() * (1.0 + i as f64 * 0.1),
                )
            })
            .collect();
        DistanceMatrix::from_fn(n, |i, j| {
            let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
            (dx * dx + dy * dy).sqrt()
        })
        .unwrap()
    }

    #[test]
    fn coupling_limits_and_monotonicity() {
        assert!(replica_coupling(1e3, 10, 0.1).unwrap() < 1e-12);
        assert!(replica_coupling(1e-9, 10, 0.1).unwrap() > 5.0);
        let mut last = f64::INFINITY;
        for g in [0.01, 0.1, 0.5, 1.0, 2.0, 5.0] {
            let j = replica_coupling(g, 4, 0.5).unwrap();
            assert!(j > 0.0 && j < last);
            last = j;
        }
        assert!(replica_coupling(0.0, 4, 1.0).is_err());
        assert!(replica_coupling(1.0, 4, 0.0).is_err());
    }

    #[test]
    fn potential_matches_length() {
        let d = circle(9);
        let t = Tour::new(vec![3, 1, 4, 0, 5, 8, 2, 6, 7], &d).unwrap();
        assert!((potential_energy(&t, &d) - t.length()).abs() < 1e-12);
        let sq = unit_square();
        let per = Tour::new(vec![0, 1, 2, 3], &sq).unwrap();
        assert_eq!(potential_energy(&per, &sq), 4.0);
    }

    #[test]
    fn shortening_move_accepted_despite_disagreement() {
        let d = unit_square();
        let crossing = Tour::new(vec![0, 2, 1, 3], &d).unwrap();
        let mut sys = ReplicaSystem::new(&[&crossing], 2).unwrap();
        let dk = sys.delta_kinetic(0, 0, 2);
        assert_eq!(dk, 8);
        let dh = move_delta(sys.replica_order(0), 0, 2, &d);
        let j = 0.01;
        assert!(dh / 2.0 + j * f64::from(dk) < 0.0);
        let mut rng = rng_from_seed(0);
        assert!(sys.pimc_move(0, 0, 2, &d, j, 1e-9, &mut rng).unwrap());
        assert!((sys.best_seen().length() - 4.0).abs() < 1e-12);
        assert!(sys.adjacency_consistent());
    }

    #[test]
    fn move_then_reverse_restores_state() {
        let d = circle(10);
        let t = Tour::new((0..10).collect(), &d).unwrap();
        let mut sys = ReplicaSystem::new(&[&t], 3).unwrap();
        let before = sys.clone();
        sys.apply_move(1, 2, 7, &d).unwrap();
        assert_ne!(sys.replica_order(1), before.replica_order(1));
        sys.apply_move(1, 2, 7, &d).unwrap();
        assert_eq!(sys.replica_order(1), before.replica_order(1));
        assert_eq!(sys.adjacency_of(1), before.adjacency_of(1));
        assert!((sys.replica_length(1) - before.replica_length(1)).abs() < 1e-12);
        assert!(sys.apply_move(1, 0, 1, &d).is_err());
        assert!(sys.apply_move(1, 0, 9, &d).is_err());
    }

    #[test]
    fn schedule_validation_and_gamma() {
        let d = circle(6);
        let t = Tour::new((0..6).collect(), &d).unwrap();
        let mut s = PimcDefaults::default().schedule(&d, &t, 1);
        assert!(s.validate().is_ok());
        assert_eq!(s.replicas, 20);
        assert_eq!(s.sweeps, 1200);
        assert_eq!(s.gamma_at(0), s.gamma0);
        assert!((s.gamma_at(s.sweeps - 1) - s.gammaf).abs() < 1e-12);
        s.decay = GammaDecay::Geometric;
        assert!((s.gamma_at(s.sweeps - 1) - s.gammaf).abs() < 1e-12);
        s.replicas = 1;
        assert!(s.validate().is_err());
        let literal = PimcDefaults::mean_distance().schedule(&d, &t, 1);
        assert!((literal.temperature * 20.0 - 2.0 * d.mean_distance()).abs() < 1e-9);
    }

    #[test]
    fn three_nodes_return_the_seed() {
        let d = circle(3);
        let t = Tour::new(vec![2, 0, 1], &d).unwrap();
        let s = PimcDefaults::default().schedule(&d, &t, 1);
        let out = pimc_solve(&d, &t, &s).unwrap();
        assert_eq!(out.order(), t.order());
    }

    #[test]
    fn deterministic_and_never_worse() {
        let d = circle(12);
        let t = Tour::new((0..12).collect(), &d).unwrap();
        let mut s = PimcDefaults::default().schedule(&d, &t, 77);
        s.sweeps = 50;
        s.trace = true;
        let a = pimc_run(&d, &[&t], &s).unwrap();
        let b = pimc_run(&d, &[&t], &s).unwrap();
        assert_eq!(a.best, b.best);
        assert!(a.best.length() <= t.length());
        assert_eq!(a.trace.len(), 50);
        assert!(a
            .trace
            .windows(2)
            .all(|w| w[1].best_length <= w[0].best_length));
        let mut buf = Vec::new();
        write_trace_csv(&a.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("sweep,gamma,J,best_length,mean_replica_length\n"));
        assert_eq!(text.lines().count(), 51);
    }
}
