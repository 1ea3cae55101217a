//! Classical side of the hybrid loop: random tours, simulated-annealing
//! refinement over 2-opt moves, and the solution pool whose edge statistics
//! drive contraction.
//!
//! Refinement budget: `gamma * n^2` random 2-opt proposals. The starting
//! temperature is calibrated from 100 sampled uphill deltas so that the
//! average uphill move is accepted with `initial_acceptance_target`, and is
//! multiplied by `cooling_factor` after every `n` proposals. The annealed
//! tour then goes through first-improvement 2-opt passes until no pass
//! improves it, and the shortest tour seen is returned.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::rng::{derive_seed, rng_from_seed, SolverRng};
use crate::scalar::Scalar;
use crate::tsp::{cycle_length, move_delta, DistanceMatrix, Tour, TspError};

const STREAM_INIT: u64 = 11;
const STREAM_REFINE: u64 = 12;
const CALIBRATION_SAMPLES: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoolError {
    #[error("need at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("pool size must be at least 1")]
    EmptyPool,
    #[error("sample of {sample} requested from a pool of {pool}")]
    SampleTooLarge { sample: usize, pool: usize },
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("invalid annealing parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Tour(#[from] TspError),
}

/// Simulated-annealing settings for pool construction and refinement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaParams {
    /// Local-search steps; scales the proposal budget (`gamma * n^2`).
    pub gamma: usize,
    pub cooling_factor: f64,
    pub initial_acceptance_target: f64,
}

impl Default for SaParams {
    fn default() -> Self {
        Self {
            gamma: 1,
            cooling_factor: 0.95,
            initial_acceptance_target: 0.5,
        }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<(), PoolError> {
        if !(self.cooling_factor > 0.0 && self.cooling_factor < 1.0) {
            return Err(PoolError::InvalidParams(format!(
                "cooling factor {} outside (0, 1)",
                self.cooling_factor
            )));
        }
        if !(self.initial_acceptance_target > 0.0 && self.initial_acceptance_target < 1.0) {
            return Err(PoolError::InvalidParams(format!(
                "acceptance target {} outside (0, 1)",
                self.initial_acceptance_target
            )));
        }
        Ok(())
    }
}

/// Uniform permutation of `0..n` by Fisher-Yates.
pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    order
}

pub fn random_tour<T: Scalar>(d: &DistanceMatrix<T>, seed: u64) -> Result<Tour<T>, PoolError> {
    if d.n() < 3 {
        return Err(PoolError::TooFewNodes(d.n()));
    }
    let mut rng = rng_from_seed(seed);
    Ok(Tour::new_unchecked(random_permutation(d.n(), &mut rng), d))
}

/// Uniformly random non-degenerate 2-opt move: two distinct, non-adjacent tour
/// edges, returned as positions `(i, k)` with `2 <= k - i <= n - 2`.
/// Requires `n >= 4`.
pub(crate) fn random_move<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (usize, usize) {
    debug_assert!(n >= 4);
    loop {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let (i, k) = if a < b { (a, b) } else { (b, a) };
        if k - i >= 2 && k - i <= n - 2 {
            return (i, k);
        }
    }
}

/// First-improvement 2-opt passes until no improving move remains.
/// Returns the number of passes made.
pub fn two_opt_local_search<T: Scalar>(t: &mut Tour<T>, d: &DistanceMatrix<T>) -> usize {
    let n = t.len();
    if n < 4 {
        return 0;
    }
    let tol = d.tolerance();
    let mut passes = 0;
    loop {
        passes += 1;
        let mut improved = false;
        for i in 0..n - 2 {
            let k_end = if i == 0 { n - 1 } else { n };
            for k in (i + 2)..k_end {
                let delta = move_delta(t.order(), i, k, d);
                if delta < -tol {
                    t.apply_move_cyclic(i, k, delta);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    let exact = cycle_length(t.order(), d);
    t.set_length(exact);
    passes
}

/// True when no single 2-opt move shortens `t`.
pub fn is_two_opt_local_optimum<T: Scalar>(t: &Tour<T>, d: &DistanceMatrix<T>) -> bool {
    let n = t.len();
    let tol = d.tolerance();
    for i in 0..n.saturating_sub(2) {
        for k in (i + 2)..n {
            if i == 0 && k == n - 1 {
                continue;
            }
            if move_delta(t.order(), i, k, d) < -tol {
                return false;
            }
        }
    }
    true
}

fn calibrate_temperature<T: Scalar>(
    t: &Tour<T>,
    d: &DistanceMatrix<T>,
    target: f64,
    rng: &mut SolverRng,
) -> f64 {
    let n = t.len();
    let mut uphill = 0.0;
    let mut count = 0usize;
    for _ in 0..CALIBRATION_SAMPLES {
        let (i, k) = random_move(n, rng);
        let delta = move_delta(t.order(), i, k, d).as_f64();
        if delta > 0.0 {
            uphill += delta;
            count += 1;
        }
    }
    if count == 0 {
        return d.tolerance().as_f64();
    }
    -(uphill / count as f64) / target.ln()
}

/// Anneals `t` and returns the shortest tour encountered; never longer than `t`.
pub fn refine_solution<T: Scalar>(
    t: &Tour<T>,
    d: &DistanceMatrix<T>,
    sa: &SaParams,
    seed: u64,
) -> Tour<T> {
    let n = t.len();
    if n < 4 {
        return t.clone();
    }
    let mut rng = rng_from_seed(seed);
    let tol = d.tolerance();
    let mut best = t.clone();
    let mut cur = t.clone();

    let budget = sa.gamma * n * n;
    if budget > 0 {
        let mut temp = calibrate_temperature(&cur, d, sa.initial_acceptance_target, &mut rng);
        for step in 0..budget {
            let (i, k) = random_move(n, &mut rng);
            let delta = move_delta(cur.order(), i, k, d);
            let dv = delta.as_f64();
            if dv <= 0.0 || rng.gen::<f64>() < (-dv / temp).exp() {
                cur.apply_move_cyclic(i, k, delta);
                if cur.length() < best.length() - tol {
                    best.clone_from(&cur);
                }
            }
            if (step + 1) % n == 0 {
                temp *= sa.cooling_factor;
            }
        }
        let exact = cycle_length(cur.order(), d);
        cur.set_length(exact);
    }

    two_opt_local_search(&mut cur, d);
    if best.length() < cur.length() - tol {
        // the annealer's running best sits in a different basin; polish it too
        let exact = cycle_length(best.order(), d);
        best.set_length(exact);
        two_opt_local_search(&mut best, d);
    }
    if cur.length() < best.length() {
        best = cur;
    }
    if best.length() > t.length() {
        return t.clone();
    }
    best
}

/// The pool of candidate tours driving edge statistics.
#[derive(Clone, Debug)]
pub struct SolutionPool<T> {
    members: Vec<Tour<T>>,
    best_index: usize,
}

impl<T: Scalar> SolutionPool<T> {
    /// `n_pool` random tours, each refined once.
    pub fn initialize(
        d: &DistanceMatrix<T>,
        n_pool: usize,
        sa: &SaParams,
        seed: u64,
    ) -> Result<Self, PoolError> {
        if n_pool == 0 {
            return Err(PoolError::EmptyPool);
        }
        if d.n() < 3 {
            return Err(PoolError::TooFewNodes(d.n()));
        }
        sa.validate()?;
        let members: Vec<Tour<T>> = (0..n_pool)
            .into_par_iter()
            .map(|idx| {
                let s = derive_seed(seed, STREAM_INIT, idx as u64);
                let start = random_tour(d, s).expect("n checked above");
                refine_solution(&start, d, sa, derive_seed(s, STREAM_REFINE, 0))
            })
            .collect();
        Ok(Self::from_members(members))
    }

    pub fn from_members(members: Vec<Tour<T>>) -> Self {
        assert!(!members.is_empty(), "pool needs at least one member");
        let mut pool = Self {
            members,
            best_index: 0,
        };
        pool.reindex();
        pool
    }

    fn reindex(&mut self) {
        let mut best = 0;
        for (i, m) in self.members.iter().enumerate() {
            if m.length() < self.members[best].length() {
                best = i;
            }
        }
        self.best_index = best;
    }

    pub fn members(&self) -> &[Tour<T>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn best_index(&self) -> usize {
        self.best_index
    }

    pub fn best(&self) -> &Tour<T> {
        &self.members[self.best_index]
    }

    pub fn worst_index(&self) -> usize {
        let mut worst = 0;
        for (i, m) in self.members.iter().enumerate() {
            if m.length() > self.members[worst].length() {
                worst = i;
            }
        }
        worst
    }

    pub fn mean_length(&self) -> f64 {
        self.members
            .iter()
            .map(|m| m.length().as_f64())
            .sum::<f64>()
            / self.len() as f64
    }

    /// Replaces the worst member when `candidate` is strictly shorter.
    /// Returns whether the pool changed.
    pub fn update(&mut self, candidate: Tour<T>) -> Result<bool, PoolError> {
        let n = self.members[0].len();
        if candidate.len() != n {
            return Err(PoolError::Tour(TspError::DimensionMismatch {
                expected: n,
                found: candidate.len(),
            }));
        }
        let worst = self.worst_index();
        if candidate.length() < self.members[worst].length() {
            self.members[worst] = candidate;
            self.reindex();
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Refines every member with its own derived seed.
    pub fn refine_all(&mut self, d: &DistanceMatrix<T>, sa: &SaParams, seed: u64) {
        self.members
            .par_iter_mut()
            .enumerate()
            .for_each(|(idx, m)| {
                *m = refine_solution(m, d, sa, derive_seed(seed, STREAM_REFINE, idx as u64));
            });
        self.reindex();
    }

    /// Refines only the members at `indices`.
    pub fn refine_subset(
        &mut self,
        indices: &[usize],
        d: &DistanceMatrix<T>,
        sa: &SaParams,
        seed: u64,
    ) {
        let refined: Vec<(usize, Tour<T>)> = indices
            .par_iter()
            .map(|&idx| {
                let s = derive_seed(seed, STREAM_REFINE, idx as u64);
                (idx, refine_solution(&self.members[idx], d, sa, s))
            })
            .collect();
        for (idx, t) in refined {
            self.members[idx] = t;
        }
        self.reindex();
    }
}

/// Distinct member indices drawn uniformly without replacement.
pub fn sample_indices(
    pool_len: usize,
    n_sample: usize,
    seed: u64,
) -> Result<Vec<usize>, PoolError> {
    if n_sample == 0 {
        return Err(PoolError::EmptySample);
    }
    if n_sample > pool_len {
        return Err(PoolError::SampleTooLarge {
            sample: n_sample,
            pool: pool_len,
        });
    }
    let mut rng = rng_from_seed(seed);
    Ok(index::sample(&mut rng, pool_len, n_sample).into_vec())
}

/// `n_sample` distinct pool members, uniform without replacement.
pub fn sample_solutions<T: Scalar>(
    pool: &SolutionPool<T>,
    n_sample: usize,
    seed: u64,
) -> Result<Vec<&Tour<T>>, PoolError> {
    Ok(sample_indices(pool.len(), n_sample, seed)?
        .into_iter()
        .map(|i| &pool.members[i])
        .collect())
}
