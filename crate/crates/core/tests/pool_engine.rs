mod common;

use std::collections::HashMap;

use hytsp_core::pool::{
    is_two_opt_local_optimum, random_permutation, random_tour, refine_solution, sample_solutions,
    PoolError, SaParams, SolutionPool,
};
use hytsp_core::tsp::{DistanceMatrix, Tour};
use hytsp_core::tsplib::{bundled_instance, lookup_optimum};
use proptest::prelude::*;

fn berlin() -> DistanceMatrix<f64> {
    bundled_instance("berlin52")
        .unwrap()
        .distance_matrix()
        .unwrap()
}

#[test]
fn fisher_yates_prefixes_are_uniform() {
    // 8 * 7 * 6 = 336 equally likely ordered prefixes
    let draws = 60_000usize;
    let mut rng = common::rng(2024);
    let mut counts: HashMap<[usize; 3], usize> = HashMap::new();
    for _ in 0..draws {
        let p = random_permutation(8, &mut rng);
        assert!(common::is_permutation(&p, 8));
        *counts.entry([p[0], p[1], p[2]]).or_default() += 1;
    }
    assert_eq!(counts.len(), 336);
    let prob = 1.0 / 336.0;
    let expected = draws as f64 * prob;
    let sigma = (draws as f64 * prob * (1.0 - prob)).sqrt();
    let mut chi2 = 0.0;
    for &c in counts.values() {
        assert!(
            (c as f64 - expected).abs() <= 5.0 * sigma,
            "count {c} vs {expected}"
        );
        chi2 += (c as f64 - expected).powi(2) / expected;
    }
    // 335 degrees of freedom: mean 335, sd about 25.9
    assert!(chi2 < 335.0 + 5.0 * (2.0f64 * 335.0).sqrt(), "chi2 {chi2}");
}

#[test]
fn single_member_sampling_is_uniform() {
    let d = berlin();
    let members: Vec<Tour<f64>> = (0..10).map(|s| random_tour(&d, s).unwrap()).collect();
    let pool = SolutionPool::from_members(members);
    let draws = 10_000;
    let mut counts = vec![0usize; 10];
    for s in 0..draws {
        let picked = sample_solutions(&pool, 1, s as u64).unwrap();
        let idx = pool
            .members()
            .iter()
            .position(|m| std::ptr::eq(m, picked[0]))
            .unwrap();
        counts[idx] += 1;
    }
    let p = 0.1;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - draws as f64 * p).abs() <= 5.0 * sigma, "{c}");
    }
}

#[test]
fn full_sample_is_the_whole_pool_and_oversampling_fails() {
    let d = berlin();
    let pool = SolutionPool::from_members((0..6).map(|s| random_tour(&d, s).unwrap()).collect());
    let all = sample_solutions(&pool, 6, 1).unwrap();
    let mut idx: Vec<usize> = all
        .iter()
        .map(|t| {
            pool.members()
                .iter()
                .position(|m| std::ptr::eq(m, *t))
                .unwrap()
        })
        .collect();
    idx.sort();
    assert_eq!(idx, (0..6).collect::<Vec<_>>());
    assert!(matches!(
        sample_solutions(&pool, 7, 1),
        Err(PoolError::SampleTooLarge { .. })
    ));
}

#[test]
fn repeated_insertion_replaces_once_per_event() {
    let d = berlin();
    let sa = SaParams::default();
    let members: Vec<Tour<f64>> = (0..5).map(|s| random_tour(&d, 100 + s).unwrap()).collect();
    let mut pool = SolutionPool::from_members(members);
    let good = refine_solution(&random_tour(&d, 7).unwrap(), &d, &sa, 7);
    for round in 1..=3 {
        assert!(pool.update(good.clone()).unwrap());
        assert_eq!(pool.len(), 5);
        let copies = pool
            .members()
            .iter()
            .filter(|m| m.order() == good.order())
            .count();
        assert_eq!(copies, round);
        assert_eq!(pool.best().length(), good.length());
    }
}

#[test]
fn refine_shortens_random_berlin_tours() {
    let d = berlin();
    let sa = SaParams::default();
    let mut shorter = 0;
    for seed in 0..100 {
        let t = random_tour(&d, seed).unwrap();
        let r = refine_solution(&t, &d, &sa, seed);
        assert!(r.length() <= t.length());
        if r.length() < t.length() {
            shorter += 1;
        }
    }
    assert!(shorter >= 99, "{shorter}/100");
}

#[test]
fn berlin_pool_mean_gap_regression_bound() {
    let d = berlin();
    let pool = SolutionPool::initialize(&d, 100, &SaParams::default(), 42).unwrap();
    let opt = lookup_optimum("berlin52").unwrap().optimum_length;
    let gap = 100.0 * (pool.mean_length() - opt) / opt;
    assert!(gap < 15.0, "mean pool gap {gap:.2}%");
    assert!(pool
        .members()
        .iter()
        .all(|m| m.length() > 0.0 && m.length().is_finite()));
}

#[test]
fn pool_of_one_solves_the_square() {
    let inst = hytsp_core::tsplib::parse_instance(common::fixture("sq4.tsp")).unwrap();
    let d: DistanceMatrix<f64> = inst.distance_matrix().unwrap();
    let sa = SaParams {
        gamma: 50,
        ..SaParams::default()
    };
    let pool = SolutionPool::initialize(&d, 1, &sa, 3).unwrap();
    assert_eq!(pool.best().length(), 4.0);
    assert!(matches!(
        SolutionPool::initialize(&d, 0, &sa, 3),
        Err(PoolError::EmptyPool)
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn refine_never_worsens(seed in any::<u64>(), n in 4usize..30, gamma in 0usize..4) {
        let mut rng = common::rng(seed);
        let d = common::random_euclidean(n, &mut rng);
        let t = random_tour(&d, seed).unwrap();
        let sa = SaParams { gamma, ..SaParams::default() };
        let r = refine_solution(&t, &d, &sa, seed ^ 1);
        prop_assert!(r.length() <= t.length());
        prop_assert!(common::is_permutation(r.order(), n));
        prop_assert!((r.length() - common::cycle_len(r.order(), &d)).abs() < 1e-9);
    }

    #[test]
    fn large_budget_reaches_two_opt_optimum(seed in any::<u64>(), n in 4usize..=8) {
        let mut rng = common::rng(seed);
        let d = common::random_matrix(n, 100, &mut rng);
        let sa = SaParams { gamma: 200, ..SaParams::default() };
        let r = refine_solution(&random_tour(&d, seed).unwrap(), &d, &sa, seed);
        prop_assert!(is_two_opt_local_optimum(&r, &d));
    }

    #[test]
    fn pool_best_is_monotone_and_size_constant(seed in any::<u64>(), inserts in 1usize..20) {
        let mut rng = common::rng(seed);
        let d = common::random_euclidean(12, &mut rng);
        let mut pool = SolutionPool::initialize(&d, 6, &SaParams { gamma: 0, ..SaParams::default() }, seed).unwrap();
        let mut best = pool.best().length();
        for i in 0..inserts {
            pool.update(random_tour(&d, seed.wrapping_add(i as u64)).unwrap()).unwrap();
            prop_assert_eq!(pool.len(), 6);
            prop_assert!(pool.best().length() <= best);
            best = pool.best().length();
        }
    }
}
