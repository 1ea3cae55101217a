//! Tours, distance matrices, 2-opt primitives and the exact Held-Karp oracle.
//!
//! Move convention: positions `(i, k)` with `0 <= i < k < n` reverse
//! `order[i+1..=k]`, replacing edges `(o[i], o[i+1])` and `(o[k], o[k+1 mod n])`
//! by `(o[i], o[k])` and `(o[i+1], o[k+1 mod n])`.

mod held_karp;
mod matrix;
mod tour;

use thiserror::Error;

pub use held_karp::{held_karp_exact, HELD_KARP_MAX_NODES};
pub use matrix::DistanceMatrix;
pub use tour::{
    apply_two_opt, check_permutation, order_edges, parse_order, tour_edges, tour_length,
    two_opt_delta, Tour,
};

pub(crate) use tour::{check_move, cycle_length, move_delta, reverse_cyclic};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TspError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("visit order is not a permutation of the node indices")]
    NotPermutation,
    #[error("move positions ({i}, {k}) out of range for a {n}-node tour")]
    PositionOutOfRange { i: usize, k: usize, n: usize },
    #[error("instance has {n} nodes, exact solver supports at most {max}")]
    InstanceTooLarge { n: usize, max: usize },
    #[error("negative distance between {i} and {j}")]
    NegativeDistance { i: usize, j: usize },
    #[error("non-finite distance between {i} and {j}")]
    NonFinite { i: usize, j: usize },
    #[error("distance table is not symmetric at ({i}, {j})")]
    Asymmetric { i: usize, j: usize },
    #[error("non-zero diagonal entry at node {i}")]
    NonZeroDiagonal { i: usize },
    #[error("malformed tour text near {0:?}")]
    BadTourText(String),
}

/// Undirected edge with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub a: usize,
    pub b: usize,
}

impl EdgeKey {
    /// Orders the endpoints. Self-loops are not edges of any tour.
    pub fn new(x: usize, y: usize) -> Self {
        debug_assert_ne!(x, y, "self-loop");
        if x < y {
            Self { a: x, b: y }
        } else {
            Self { a: y, b: x }
        }
    }

    pub fn touches(&self, v: usize) -> bool {
        self.a == v || self.b == v
    }

    pub fn other(&self, v: usize) -> usize {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }
}
