#![allow(dead_code)]

use std::path::PathBuf;

use hytsp_core::tsp::{DistanceMatrix, Tour};
use hytsp_core::tsplib::{parse_instance, Instance};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data/fixtures")
        .join(name)
}

pub fn figure1() -> (Instance, DistanceMatrix<f64>, Vec<Tour<f64>>) {
    let inst = parse_instance(fixture("figure1.tsp")).unwrap();
    let d = inst.distance_matrix::<f64>().unwrap();
    let text = std::fs::read_to_string(fixture("figure1.tours")).unwrap();
    let tours = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| Tour::parse(l, &d).unwrap())
        .collect();
    (inst, d, tours)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Integer-valued symmetric matrix with entries in `1..=max`.
pub fn random_matrix(n: usize, max: u32, rng: &mut impl Rng) -> DistanceMatrix<f64> {
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = f64::from(rng.gen_range(1..=max));
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
    }
    DistanceMatrix::from_fn(n, |i, j| w[i * n + j]).unwrap()
}

/// Rounded Euclidean distances over random points in a 1000 x 1000 box.
pub fn random_euclidean(n: usize, rng: &mut impl Rng) -> DistanceMatrix<f64> {
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0)))
        .collect();
    DistanceMatrix::from_fn(n, |i, j| {
        let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
        (dx * dx + dy * dy).sqrt().round()
    })
    .unwrap()
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Shortest cycle by enumerating every order that starts at node 0.
pub fn brute_force_optimum(d: &DistanceMatrix<f64>) -> f64 {
    let n = d.n();
    let mut rest: Vec<usize> = (1..n).collect();
    let mut best = f64::INFINITY;
    loop {
        let mut len = d.get(0, rest[0]) + d.get(*rest.last().unwrap(), 0);
        for w in rest.windows(2) {
            len += d.get(w[0], w[1]);
        }
        best = best.min(len);
        if !next_permutation(&mut rest) {
            return best;
        }
    }
}

/// Independent cycle length.
pub fn cycle_len(order: &[usize], d: &DistanceMatrix<f64>) -> f64 {
    let n = order.len();
    (0..n).map(|p| d.get(order[p], order[(p + 1) % n])).sum()
}

pub fn is_permutation(order: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    order.len() == n
        && order
            .iter()
            .all(|&v| v < n && !std::mem::replace(&mut seen[v], true))
}

/// A random instance, a pool with shared structure, and a threshold.
pub struct Triple {
    pub d: DistanceMatrix<f64>,
    pub pool: Vec<Tour<f64>>,
    pub tau: f64,
}

pub fn random_triple(seed: u64) -> Triple {
    use hytsp_core::pool::{random_tour, refine_solution, SaParams};
    let mut rng = rng(seed);
    let n = rng.gen_range(5..=24);
    let d = random_euclidean(n, &mut rng);
    let size = rng.gen_range(1..=12);
    let sa = SaParams {
        gamma: rng.gen_range(0..=1),
        ..SaParams::default()
    };
    let pool = (0..size)
        .map(|k| {
            let s = seed.wrapping_mul(31).wrapping_add(k);
            let t = random_tour(&d, s).unwrap();
            // mostly refined tours so edges repeat; some raw ones for noise
            if k % 4 == 3 {
                t
            } else {
                refine_solution(&t, &d, &sa, s)
            }
        })
        .collect();
    let tau = [0.2, 0.34, 0.5, 0.6, 0.75, 0.9, 1.0][rng.gen_range(0..7)];
    Triple { d, pool, tau }
}
