mod common;

use hytsp_core::contraction::{
    best_orientations, build_backbone, contains_backbone, contract, derive_seed_subtour,
    edge_frequencies, expand_tour, expand_with_orientations, Entity,
};
use hytsp_core::pool::random_tour;
use hytsp_core::tsp::EdgeKey;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn frequencies_are_bounded_counts(seed in any::<u64>()) {
        let t = common::random_triple(seed);
        let f = edge_frequencies(&t.pool).unwrap();
        for (e, c) in f.iter() {
            prop_assert!(c >= 1 && c <= t.pool.len());
            let direct = t.pool.iter().filter(|x| x.edges().contains(&e)).count();
            prop_assert_eq!(c, direct);
        }
    }

    #[test]
    fn lowering_tau_only_adds_raw_edges(seed in any::<u64>(), a in 0.05f64..1.0, b in 0.05f64..1.0) {
        let t = common::random_triple(seed);
        let f = edge_frequencies(&t.pool).unwrap();
        let (lo, hi) = (a.min(b), a.max(b));
        let strict = f.raw_fixed_edges(hi);
        let loose = f.raw_fixed_edges(lo);
        prop_assert!(strict.iter().all(|e| loose.contains(e)));
    }

    #[test]
    fn backbone_is_a_set_of_disjoint_paths(seed in any::<u64>()) {
        let t = common::random_triple(seed);
        let n = t.d.n();
        let f = edge_frequencies(&t.pool).unwrap();
        let bb = build_backbone(&f, t.tau, &t.d).unwrap();
        let mut degree = vec![0; n];
        for e in bb.edges() {
            degree[e.a] += 1;
            degree[e.b] += 1;
            prop_assert!(f.frequency(*e) >= t.tau - 1e-9);
        }
        prop_assert!(degree.iter().all(|&g| g <= 2));
        // forest: edges = covered nodes - chains
        let covered = bb.covered_nodes();
        prop_assert_eq!(bb.edges().len(), covered - bb.chains().len());
        let mut seen = vec![false; n];
        for c in bb.chains() {
            prop_assert!(c.len() >= 2);
            prop_assert_eq!(c.head(), c.nodes()[0]);
            prop_assert_eq!(c.tail(), *c.nodes().last().unwrap());
            let mut len = 0.0;
            for w in c.nodes().windows(2) {
                prop_assert!(bb.edges().contains(&EdgeKey::new(w[0], w[1])));
                len += t.d.get(w[0], w[1]);
            }
            prop_assert_eq!(len, c.internal_length());
            for &v in c.nodes() {
                prop_assert!(!seen[v]);
                seen[v] = true;
            }
        }
        prop_assert_eq!(seen.iter().filter(|&&s| s).count(), (0..n).filter(|&v| degree[v] > 0).count());
    }

    #[test]
    fn contraction_partitions_the_nodes(seed in any::<u64>()) {
        let t = common::random_triple(seed);
        let n = t.d.n();
        let f = edge_frequencies(&t.pool).unwrap();
        let bb = build_backbone(&f, t.tau, &t.d).unwrap();
        let Ok(ci) = contract(&t.d, &bb) else { return Ok(()); };
        let free = ci.entities().iter().filter(|e| matches!(e, Entity::Free(_))).count();
        prop_assert_eq!(ci.n_sub(), free + ci.chains().len());
        let mut hits = vec![0; n];
        for (idx, e) in ci.entities().iter().enumerate() {
            let members: Vec<usize> = match *e {
                Entity::Free(v) => vec![v],
                Entity::Super(c) => ci.chains()[c].nodes().to_vec(),
            };
            for v in members {
                hits[v] += 1;
                prop_assert_eq!(ci.entity_of(v), idx);
            }
        }
        prop_assert!(hits.iter().all(|&h| h == 1));
        for x in 0..ci.n_sub() {
            prop_assert_eq!(ci.d_sub().get(x, x), 0.0);
            for y in 0..ci.n_sub() {
                prop_assert_eq!(ci.d_sub().get(x, y), ci.d_sub().get(y, x));
            }
        }
    }

    #[test]
    fn expansion_is_a_valid_cycle_with_the_backbone(seed in any::<u64>()) {
        let t = common::random_triple(seed);
        let f = edge_frequencies(&t.pool).unwrap();
        let bb = build_backbone(&f, t.tau, &t.d).unwrap();
        let Ok(ci) = contract(&t.d, &bb) else { return Ok(()); };
        let sub = random_tour(ci.d_sub(), seed ^ 7).unwrap();
        let full = expand_tour(&sub, &ci, &t.d).unwrap();
        prop_assert!(common::is_permutation(full.order(), t.d.n()));
        prop_assert!(contains_backbone(&full, &ci));
        for e in bb.edges() {
            prop_assert!(full.edges().contains(e));
        }
        prop_assert!((full.length() - common::cycle_len(full.order(), &t.d)).abs() < 1e-9);
        // the pool best is consistent with the backbone when the backbone came from it
        let seed_sub = derive_seed_subtour(&t.pool[0], &ci).unwrap();
        prop_assert_eq!(seed_sub.len(), ci.n_sub());
    }

    #[test]
    fn orientation_dp_equals_brute_force(seed in any::<u64>()) {
        let t = common::random_triple(seed);
        let f = edge_frequencies(&t.pool).unwrap();
        let bb = build_backbone(&f, t.tau, &t.d).unwrap();
        let Ok(ci) = contract(&t.d, &bb) else { return Ok(()); };
        let c = ci.chains().len();
        prop_assume!(c <= 8);
        let sub = random_tour(ci.d_sub(), seed ^ 3).unwrap();
        let order = sub.order();
        let dp = expand_with_orientations(order, &best_orientations(order, &ci, &t.d).unwrap(), &ci, &t.d)
            .unwrap()
            .length();
        let chain_pos: Vec<usize> = (0..order.len())
            .filter(|&p| matches!(ci.entities()[order[p]], Entity::Super(_)))
            .collect();
        let mut brute = f64::INFINITY;
        for mask in 0u32..(1 << c) {
            let mut orient = vec![0; order.len()];
            for (bit, &p) in chain_pos.iter().enumerate() {
                orient[p] = ((mask >> bit) & 1) as usize;
            }
            brute = brute.min(expand_with_orientations(order, &orient, &ci, &t.d).unwrap().length());
        }
        prop_assert_eq!(dp, brute);
    }
}
