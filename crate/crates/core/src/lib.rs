//! Hybrid classical/quantum-inspired TSP solver.
//!
//! A pool of annealed 2-opt tours yields edge frequencies; edges that appear
//! often enough form a backbone whose chains are contracted into super-nodes.
//! The smaller instance is solved by path-integral Monte Carlo or through a
//! QUBO encoding, expanded back, and fed into the pool until progress stalls.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common choice.

pub mod bench;
pub mod contraction;
pub mod hybrid;
pub mod pimc;
pub mod pool;
pub mod qubo;
pub mod rng;
pub mod scalar;
pub mod tsp;
pub mod tsplib;

pub use scalar::Scalar;

pub type DistanceMatrix64 = tsp::DistanceMatrix<f64>;
pub type DistanceMatrix32 = tsp::DistanceMatrix<f32>;
pub type Tour64 = tsp::Tour<f64>;
pub type Tour32 = tsp::Tour<f32>;
pub type SolutionPool64 = pool::SolutionPool<f64>;
pub type SolutionPool32 = pool::SolutionPool<f32>;
pub type ContractedInstance64 = contraction::ContractedInstance<f64>;
pub type ContractedInstance32 = contraction::ContractedInstance<f32>;
pub type QuboModel64 = qubo::QuboModel<f64>;
pub type QuboModel32 = qubo::QuboModel<f32>;
pub type RunReport64 = hybrid::RunReport<f64>;
