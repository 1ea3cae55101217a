use std::collections::BTreeSet;
use std::fmt;

use crate::scalar::Scalar;

use super::{DistanceMatrix, EdgeKey, TspError};

/// A Hamiltonian cycle as a visit order, with its cached closed length.
#[derive(Clone, Debug, PartialEq)]
pub struct Tour<T> {
    order: Vec<usize>,
    length: T,
}

impl<T: Scalar> Tour<T> {
    /// Validates `order` as a permutation of `0..d.n()` and computes its length.
    pub fn new(order: Vec<usize>, d: &DistanceMatrix<T>) -> Result<Self, TspError> {
        let length = tour_length(&order, d)?;
        Ok(Self { order, length })
    }

    /// Caller guarantees `order` is a permutation matching `d`.
    pub(crate) fn new_unchecked(order: Vec<usize>, d: &DistanceMatrix<T>) -> Self {
        let length = cycle_length(&order, d);
        Self { order, length }
    }

    pub(crate) fn from_parts(order: Vec<usize>, length: T) -> Self {
        Self { order, length }
    }

    /// Parses the one-line text format (space separated 0-based indices).
    pub fn parse(text: &str, d: &DistanceMatrix<T>) -> Result<Self, TspError> {
        Self::new(parse_order(text)?, d)
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn into_order(self) -> Vec<usize> {
        self.order
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Undirected edge set of the cycle.
    pub fn edges(&self) -> BTreeSet<EdgeKey> {
        tour_edges(self)
    }

    /// Reverses `order[i+1..=k]` in place and adds `delta` to the cached length.
    /// Positions are assumed valid.
    pub(crate) fn apply_move_unchecked(&mut self, i: usize, k: usize, delta: T) {
        self.order[i + 1..=k].reverse();
        self.length += delta;
    }

    /// Same cycle as [`Self::apply_move_unchecked`], but reverses whichever of the
    /// inner segment or its cyclic complement is shorter.
    pub(crate) fn apply_move_cyclic(&mut self, i: usize, k: usize, delta: T) {
        reverse_cyclic(&mut self.order, i, k);
        self.length += delta;
    }

    pub(crate) fn set_length(&mut self, length: T) {
        self.length = length;
    }
}

impl<T> fmt::Display for Tour<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for v in &self.order {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
            first = false;
        }
        Ok(())
    }
}

/// Parses space separated node indices.
pub fn parse_order(text: &str) -> Result<Vec<usize>, TspError> {
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| TspError::BadTourText(tok.to_string()))
        })
        .collect()
}

/// Returns an error unless `order` is a permutation of `0..n`.
pub fn check_permutation(order: &[usize], n: usize) -> Result<(), TspError> {
    if order.len() != n {
        return Err(TspError::DimensionMismatch {
            expected: n,
            found: order.len(),
        });
    }
    let mut seen = vec![false; n];
    for &v in order {
        if v >= n || seen[v] {
            return Err(TspError::NotPermutation);
        }
        seen[v] = true;
    }
    Ok(())
}

/// Closed-cycle cost `sum d[o[i]][o[i+1]] + d[o[n-1]][o[0]]`.
pub fn tour_length<T: Scalar>(order: &[usize], d: &DistanceMatrix<T>) -> Result<T, TspError> {
    check_permutation(order, d.n())?;
    Ok(cycle_length(order, d))
}

pub(crate) fn cycle_length<T: Scalar>(order: &[usize], d: &DistanceMatrix<T>) -> T {
    let n = order.len();
    if n < 2 {
        return T::zero();
    }
    let mut total = T::zero();
    for w in order.windows(2) {
        total += d.get(w[0], w[1]);
    }
    total + d.get(order[n - 1], order[0])
}

/// Length change of reversing `order[i+1..=k]`, from the four affected edges.
pub fn two_opt_delta<T: Scalar>(
    t: &Tour<T>,
    i: usize,
    k: usize,
    d: &DistanceMatrix<T>,
) -> Result<T, TspError> {
    check_move(t.len(), i, k)?;
    if d.n() != t.len() {
        return Err(TspError::DimensionMismatch {
            expected: d.n(),
            found: t.len(),
        });
    }
    Ok(move_delta(&t.order, i, k, d))
}

/// Returns a new tour with `order[i+1..=k]` reversed.
pub fn apply_two_opt<T: Scalar>(
    t: &Tour<T>,
    i: usize,
    k: usize,
    d: &DistanceMatrix<T>,
) -> Result<Tour<T>, TspError> {
    let delta = two_opt_delta(t, i, k, d)?;
    let mut out = t.clone();
    out.apply_move_unchecked(i, k, delta);
    Ok(out)
}

pub fn tour_edges<T>(t: &Tour<T>) -> BTreeSet<EdgeKey> {
    order_edges(&t.order).collect()
}

/// Iterates the `n` undirected edges of a visit order.
pub fn order_edges(order: &[usize]) -> impl Iterator<Item = EdgeKey> + '_ {
    let n = order.len();
    (0..n).map(move |p| EdgeKey::new(order[p], order[(p + 1) % n]))
}

pub(crate) fn check_move(n: usize, i: usize, k: usize) -> Result<(), TspError> {
    if i < k && k < n {
        Ok(())
    } else {
        Err(TspError::PositionOutOfRange { i, k, n })
    }
}

#[inline]
pub(crate) fn move_delta<T: Scalar>(
    order: &[usize],
    i: usize,
    k: usize,
    d: &DistanceMatrix<T>,
) -> T {
    let n = order.len();
    let a = order[i];
    let b = order[i + 1];
    let c = order[k];
    let e = order[(k + 1) % n];
    d.get(a, c) + d.get(b, e) - d.get(a, b) - d.get(c, e)
}

/// Reverses the shorter of `order[i+1..=k]` and its cyclic complement
/// `order[k+1..n] ++ order[0..=i]`; both give the same undirected cycle.
pub(crate) fn reverse_cyclic(order: &mut [usize], i: usize, k: usize) {
    let n = order.len();
    let inner = k - i;
    if inner <= n - inner {
        order[i + 1..=k].reverse();
    } else {
        let mut a = k + 1;
        let mut b = i;
        for _ in 0..(n - inner) / 2 {
            order.swap(a % n, b);
            a += 1;
            b = if b == 0 { n - 1 } else { b - 1 };
        }
    }
}
