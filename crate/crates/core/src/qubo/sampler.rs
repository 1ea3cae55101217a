use rand::Rng;
use rayon::prelude::*;

use super::{QuboError, QuboModel, SampleSet, SampleSource};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scalar::Scalar;

/// Largest model the exhaustive enumerator accepts (`n = 6`).
pub const EXHAUSTIVE_MAX_VARS: usize = 25;
const MAX_TIES: usize = 4096;
const STREAM_READ: u64 = 31;

/// Neighbour list with coefficients, per variable.
fn adjacency<T: Scalar>(m: &QuboModel<T>) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); m.num_vars()];
    for &(a, b, c) in m.quadratic() {
        adj[a].push((b, c.as_f64()));
        adj[b].push((a, c.as_f64()));
    }
    adj
}

/// Enumerates every assignment in Gray-code order and keeps all minimisers.
pub fn solve_exhaustive<T: Scalar>(m: &QuboModel<T>) -> Result<SampleSet<T>, QuboError> {
    let k = m.num_vars();
    if k > EXHAUSTIVE_MAX_VARS {
        return Err(QuboError::TooManyVariables {
            vars: k,
            max: EXHAUSTIVE_MAX_VARS,
        });
    }
    let adj = adjacency(m);
    let mut field: Vec<f64> = m.linear().iter().map(|c| c.as_f64()).collect();
    let mut bits = vec![0u8; k];
    let scale = field.iter().map(|f| f.abs()).fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let mut energy = 0.0f64;
    let mut best = 0.0f64;
    let mut ties: Vec<Vec<u8>> = vec![bits.clone()];
    for step in 1u64..(1u64 << k) {
        let v = step.trailing_zeros() as usize;
        let up = bits[v] == 0;
        energy += if up { field[v] } else { -field[v] };
        bits[v] ^= 1;
        let sign = if up { 1.0 } else { -1.0 };
        for &(w, c) in &adj[v] {
            field[w] += sign * c;
        }
        if energy < best - tol {
            best = energy;
            ties.clear();
            ties.push(bits.clone());
        } else if energy <= best + tol && ties.len() < MAX_TIES {
            ties.push(bits.clone());
        }
    }
    let reads = ties
        .into_iter()
        .map(|b| {
            let e = m.energy_unchecked(&b);
            (b, e)
        })
        .collect();
    Ok(SampleSet::from_reads(reads, SampleSource::Exhaustive))
}

/// Single-bit-flip Metropolis sampler settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnealParams {
    pub reads: usize,
    /// Full passes over all variables per read.
    pub sweeps: usize,
    /// Inverse-temperature range; derived from the coefficients when `None`.
    pub beta_range: Option<(f64, f64)>,
}

impl Default for AnnealParams {
    fn default() -> Self {
        Self {
            reads: 25,
            sweeps: 1000,
            beta_range: None,
        }
    }
}

/// Hot end accepts the largest single-flip change half the time, cold end
/// rejects the smallest one with probability 0.99.
fn default_beta_range<T: Scalar>(m: &QuboModel<T>, adj: &[Vec<(usize, f64)>]) -> (f64, f64) {
    let mut max_delta = 0.0f64;
    let mut min_delta = f64::INFINITY;
    for (k, row) in adj.iter().enumerate() {
        let lin = m.linear()[k].as_f64().abs();
        let total = lin + row.iter().map(|(_, c)| c.abs()).sum::<f64>();
        max_delta = max_delta.max(total);
        for v in std::iter::once(lin).chain(row.iter().map(|(_, c)| c.abs())) {
            if v > 0.0 {
                min_delta = min_delta.min(v);
            }
        }
    }
    if max_delta <= 0.0 || !min_delta.is_finite() {
        return (1.0, 1.0);
    }
    let hot = std::f64::consts::LN_2 / max_delta;
    let cold = (100.0f64).ln() / min_delta;
    (hot, cold.max(hot))
}

/// Independent anneals from random assignments; reads sorted by energy.
pub fn solve_anneal<T: Scalar>(
    m: &QuboModel<T>,
    params: &AnnealParams,
    seed: u64,
) -> Result<SampleSet<T>, QuboError> {
    if params.reads == 0 {
        return Err(QuboError::NoReads);
    }
    let adj = adjacency(m);
    let (b0, b1) = params
        .beta_range
        .unwrap_or_else(|| default_beta_range(m, &adj));
    let k = m.num_vars();
    let reads: Vec<(Vec<u8>, T)> = (0..params.reads)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(seed, STREAM_READ, r as u64));
            let mut bits: Vec<u8> = (0..k).map(|_| rng.gen_range(0..2u8)).collect();
            let mut field: Vec<f64> = m.linear().iter().map(|c| c.as_f64()).collect();
            for v in 0..k {
                if bits[v] == 1 {
                    for &(w, c) in &adj[v] {
                        field[w] += c;
                    }
                }
            }
            for s in 0..params.sweeps {
                let frac = if params.sweeps > 1 {
                    s as f64 / (params.sweeps - 1) as f64
                } else {
                    1.0
                };
                let beta = b0 * (b1 / b0).powf(frac);
                for v in 0..k {
                    let up = bits[v] == 0;
                    let delta = if up { field[v] } else { -field[v] };
                    if delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp() {
                        bits[v] ^= 1;
                        let sign = if up { 1.0 } else { -1.0 };
                        for &(w, c) in &adj[v] {
                            field[w] += sign * c;
                        }
                    }
                }
            }
            let e = m.energy_unchecked(&bits);
            (bits, e)
        })
        .collect();
    Ok(SampleSet::from_reads(reads, SampleSource::Anneal))
}
