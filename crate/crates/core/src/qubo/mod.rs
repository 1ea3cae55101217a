//! Position-encoded QUBO for the TSP with city 0 pinned to position 0.
//!
//! Variable `x(i, j)` (city `i`, position `j`, both in `1..n`) has flat index
//! `(i - 1) * (n - 1) + (j - 1)`. The objective is the tour length plus
//! `lambda1 * sum_i (sum_j x(i,j) - 1)^2 + lambda2 * sum_j (sum_i x(i,j) - 1)^2`.
//! Constant terms of the two penalties are kept in `offset`, so for a feasible
//! assignment `energy + offset` is exactly the tour length.

mod io;
mod sampler;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::tsp::{DistanceMatrix, Tour, TspError};

pub use io::{
    export_qubo, import_samples, read_qubo, read_qubo_str, read_samples_str, write_qubo,
    write_samples,
};
pub use sampler::{solve_anneal, solve_exhaustive, AnnealParams, EXHAUSTIVE_MAX_VARS};

#[derive(Debug, Error)]
pub enum QuboError {
    #[error("Lagrange multipliers must be positive (got {lambda1}, {lambda2})")]
    LambdaNonPositive { lambda1: f64, lambda2: f64 },
    #[error("need at least 3 cities, got {0}")]
    TooFewCities(usize),
    #[error("{vars} variables exceed the exhaustive limit of {max}")]
    TooManyVariables { vars: usize, max: usize },
    #[error("assignment has {found} bits, model has {expected} variables")]
    LengthMismatch { expected: usize, found: usize },
    #[error("need at least one read")]
    NoReads,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Tour(#[from] TspError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuboModel<T> {
    n: usize,
    lambda1: T,
    lambda2: T,
    linear: Vec<T>,
    /// `(k, k2, coefficient)` with `k < k2`, sorted, no zeros.
    quadratic: Vec<(usize, usize, T)>,
    offset: T,
}

impl<T: Scalar> QuboModel<T> {
    /// Assembles a model from raw parts; quadratic terms are canonicalised.
    pub fn from_parts(
        n: usize,
        lambda1: T,
        lambda2: T,
        linear: Vec<T>,
        quadratic: Vec<(usize, usize, T)>,
        offset: T,
    ) -> Result<Self, QuboError> {
        if n < 3 {
            return Err(QuboError::TooFewCities(n));
        }
        let vars = (n - 1) * (n - 1);
        if linear.len() != vars {
            return Err(QuboError::LengthMismatch {
                expected: vars,
                found: linear.len(),
            });
        }
        let mut terms: Vec<(usize, usize, T)> = quadratic
            .into_iter()
            .map(|(a, b, c)| if a < b { (a, b, c) } else { (b, a, c) })
            .collect();
        if let Some(&(a, b, _)) = terms.iter().find(|&&(a, b, _)| a == b || b >= vars) {
            return Err(QuboError::Malformed {
                line: 0,
                message: format!("bad quadratic term ({a}, {b})"),
            });
        }
        terms.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        let mut merged: Vec<(usize, usize, T)> = Vec::with_capacity(terms.len());
        for (a, b, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == a && last.1 == b => last.2 += c,
                _ => merged.push((a, b, c)),
            }
        }
        merged.retain(|t| t.2 != T::zero());
        Ok(Self {
            n,
            lambda1,
            lambda2,
            linear,
            quadratic: merged,
            offset,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn lambda1(&self) -> T {
        self.lambda1
    }

    pub fn lambda2(&self) -> T {
        self.lambda2
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn linear(&self) -> &[T] {
        &self.linear
    }

    pub fn quadratic(&self) -> &[(usize, usize, T)] {
        &self.quadratic
    }

    /// Flat index of city `i` at position `j`, both in `1..n`.
    pub fn var_index(&self, city: usize, pos: usize) -> usize {
        var_index(self.n, city, pos)
    }

    /// Inverse of [`var_index`](Self::var_index).
    pub fn var_city_pos(&self, k: usize) -> (usize, usize) {
        (k / (self.n - 1) + 1, k % (self.n - 1) + 1)
    }

    /// `x^T Q x` without the offset.
    pub fn energy(&self, bits: &[u8]) -> Result<T, QuboError> {
        self.check_len(bits)?;
        Ok(self.energy_unchecked(bits))
    }

    pub(crate) fn energy_unchecked(&self, bits: &[u8]) -> T {
        let mut e = T::zero();
        for (k, &c) in self.linear.iter().enumerate() {
            if bits[k] != 0 {
                e += c;
            }
        }
        for &(a, b, c) in &self.quadratic {
            if bits[a] != 0 && bits[b] != 0 {
                e += c;
            }
        }
        e
    }

    fn check_len(&self, bits: &[u8]) -> Result<(), QuboError> {
        if bits.len() != self.num_vars() {
            return Err(QuboError::LengthMismatch {
                expected: self.num_vars(),
                found: bits.len(),
            });
        }
        Ok(())
    }

    /// Visit order `[0, c1, ..., c(n-1)]` when every row and column is one-hot.
    pub fn decode(&self, bits: &[u8]) -> Option<Vec<usize>> {
        if bits.len() != self.num_vars() {
            return None;
        }
        let m = self.n - 1;
        let mut order = vec![0usize; self.n];
        let mut city_seen = vec![false; self.n];
        for pos in 1..self.n {
            let mut found = None;
            for city in 1..self.n {
                if bits[self.var_index(city, pos)] != 0 {
                    if found.is_some() {
                        return None;
                    }
                    found = Some(city);
                }
            }
            let city = found?;
            if city_seen[city] {
                return None;
            }
            city_seen[city] = true;
            order[pos] = city;
        }
        debug_assert_eq!(city_seen.iter().filter(|&&s| s).count(), m);
        Some(order)
    }

    /// Assignment for a visit order; the order is rotated so city 0 comes first.
    pub fn encode(&self, order: &[usize]) -> Result<Vec<u8>, QuboError> {
        crate::tsp::check_permutation(order, self.n)?;
        let start = order
            .iter()
            .position(|&c| c == 0)
            .expect("permutation contains 0");
        let mut bits = vec![0u8; self.num_vars()];
        for pos in 1..self.n {
            let city = order[(start + pos) % self.n];
            bits[self.var_index(city, pos)] = 1;
        }
        Ok(bits)
    }

    /// Decoded tour over `d`, if the assignment is feasible.
    pub fn decode_tour(&self, bits: &[u8], d: &DistanceMatrix<T>) -> Option<Tour<T>> {
        self.decode(bits).and_then(|o| Tour::new(o, d).ok())
    }
}

pub(crate) fn var_index(n: usize, city: usize, pos: usize) -> usize {
    debug_assert!((1..n).contains(&city) && (1..n).contains(&pos));
    (city - 1) * (n - 1) + (pos - 1)
}

/// Default multiplier, `0.8 * max_dist`.
pub const DEFAULT_LAMBDA_SCALE: f64 = 0.8;

pub fn default_lambda<T: Scalar>(d: &DistanceMatrix<T>) -> T {
    T::of(DEFAULT_LAMBDA_SCALE) * d.max_distance()
}

pub fn build_qubo<T: Scalar>(
    d: &DistanceMatrix<T>,
    lambda1: T,
    lambda2: T,
) -> Result<QuboModel<T>, QuboError> {
    let n = d.n();
    if n < 3 {
        return Err(QuboError::TooFewCities(n));
    }
    if !(lambda1 > T::zero() && lambda2 > T::zero()) {
        return Err(QuboError::LambdaNonPositive {
            lambda1: lambda1.as_f64(),
            lambda2: lambda2.as_f64(),
        });
    }
    let m = n - 1;
    let mut linear = vec![-(lambda1 + lambda2); m * m];
    for i in 1..n {
        linear[var_index(n, i, 1)] += d.get(0, i);
        linear[var_index(n, i, m)] += d.get(i, 0);
    }
    let two = T::of(2.0);
    let mut quad = Vec::new();
    for i in 1..n {
        for j in 1..n {
            let k = var_index(n, i, j);
            // same city at two positions, same position for two cities
            for j2 in (j + 1)..n {
                quad.push((k, var_index(n, i, j2), two * lambda1));
            }
            for i2 in (i + 1)..n {
                quad.push((k, var_index(n, i2, j), two * lambda2));
            }
            if j + 1 < n {
                for i2 in 1..n {
                    if i2 != i {
                        quad.push((k, var_index(n, i2, j + 1), d.get(i, i2)));
                    }
                }
            }
        }
    }
    let offset = (lambda1 + lambda2) * T::of(m as f64);
    QuboModel::from_parts(n, lambda1, lambda2, linear, quad, offset)
}

/// Where a sample set came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleSource {
    Exhaustive,
    Anneal,
    External,
}

impl SampleSource {
    pub fn tag(&self) -> &'static str {
        match self {
            SampleSource::Exhaustive => "exhaustive",
            SampleSource::Anneal => "anneal",
            SampleSource::External => "external",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord<T> {
    pub bits: Vec<u8>,
    pub energy: T,
    pub multiplicity: usize,
    /// Set when an imported line stated an energy that disagrees with the model.
    pub energy_mismatch: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet<T> {
    pub records: Vec<SampleRecord<T>>,
    pub source: SampleSource,
}

impl<T: Scalar> SampleSet<T> {
    /// Lowest-energy feasible record decoded to a tour.
    pub fn best_feasible(&self, m: &QuboModel<T>, d: &DistanceMatrix<T>) -> Option<Tour<T>> {
        self.records
            .iter()
            .filter_map(|r| m.decode_tour(&r.bits, d).map(|t| (r.energy, t)))
            .min_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| {
                        a.1.length()
                            .partial_cmp(&b.1.length())
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
            })
            .map(|(_, t)| t)
    }

    pub fn lowest_energy(&self) -> Option<T> {
        self.records
            .iter()
            .map(|r| r.energy)
            .min_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
    }

    pub fn any_mismatch(&self) -> bool {
        self.records.iter().any(|r| r.energy_mismatch)
    }

    pub(crate) fn from_reads(mut reads: Vec<(Vec<u8>, T)>, source: SampleSource) -> Self {
        reads.sort_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        let mut records: Vec<SampleRecord<T>> = Vec::new();
        for (bits, energy) in reads {
            match records.last_mut() {
                Some(last) if last.bits == bits => last.multiplicity += 1,
                _ => records.push(SampleRecord {
                    bits,
                    energy,
                    multiplicity: 1,
                    energy_mismatch: false,
                }),
            }
        }
        Self { records, source }
    }
}
