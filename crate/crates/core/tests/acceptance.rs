//! One line per acceptance criterion; exits non-zero when an enforced one fails.

mod common;

use std::time::Instant;

use hytsp_core::bench::{run_bench, ExperimentSpec, ParamGrid, SampleSize};
use hytsp_core::contraction::{
    best_orientations, build_backbone, contains_backbone, contract, edge_frequencies, expand_tour,
    expand_with_orientations, ContractionError, Entity,
};
use hytsp_core::hybrid::{run_hybrid, run_hybrid_instance, Backend, HybridConfig, RunReport};
use hytsp_core::pimc::{pimc_run, PimcDefaults, ReplicaSystem};
use hytsp_core::pool::{random_tour, SaParams};
use hytsp_core::qubo::{build_qubo, solve_exhaustive};
use hytsp_core::tsp::{held_karp_exact, two_opt_delta, DistanceMatrix, EdgeKey, Tour};
use hytsp_core::tsplib::{bundled_instance, lookup_optimum, resolve_instance, TSPLIB_DIR_ENV};
use rand::seq::SliceRandom;
use rand::Rng;

const RUNS: usize = 20;

#[derive(Default)]
struct Sheet {
    failed: Vec<String>,
}

impl Sheet {
    fn check(&mut self, id: &str, title: &str, pass: bool, detail: String) {
        println!(
            "{} {id:<4} {title}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            self.failed.push(id.to_string());
        }
    }

    /// Reported red but not enforced; the analysis lives next to the call.
    fn unattainable(&mut self, id: &str, title: &str, detail: String) {
        println!("FAIL {id:<4} {title}: {detail} [not reproducible here, not enforced]");
    }

    fn info(&self, id: &str, detail: String) {
        println!("INFO {id:<4} {detail}");
    }
}

fn table3_config(seed: u64) -> HybridConfig {
    HybridConfig {
        tau: 0.75,
        n_pool: 500,
        n_sample: 250,
        sa: SaParams {
            gamma: 1,
            ..SaParams::default()
        },
        max_fails: 3,
        backend: Backend::Pimc,
        rng_seed: seed,
        ..HybridConfig::default()
    }
}

fn runs(name: &str, cfg: impl Fn(u64) -> HybridConfig) -> Vec<RunReport<f64>> {
    let inst = bundled_instance(name).unwrap();
    (0..RUNS as u64)
        .map(|s| run_hybrid_instance(&inst, &cfg(s)).unwrap())
        .collect()
}

fn gaps(rs: &[RunReport<f64>]) -> Vec<f64> {
    rs.iter().map(|r| r.optimality_gap_pct.unwrap()).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn c1(sheet: &mut Sheet) {
    let t = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["burma14", "ulysses22"] {
        let exact = gaps(&runs(name, table3_config))
            .iter()
            .filter(|&&g| g == 0.0)
            .count();
        pass &= exact >= 18;
        parts.push(format!("{name} {exact}/{RUNS} at 0.00%"));
    }
    let detail = format!(
        "{} (need >= 18/20 each; {:.0}s)",
        parts.join(", "),
        t.elapsed().as_secs_f64()
    );
    sheet.check("C1", "small-instance exactness", pass, detail);
}

fn c2(sheet: &mut Sheet) {
    let t = Instant::now();
    let g = gaps(&runs("berlin52", table3_config));
    let best = g.iter().cloned().fold(f64::INFINITY, f64::min);
    let m = mean(&g);
    let detail = format!(
        "best {best:.2}% (<= 0.5), mean {m:.2}% (<= 1.5); {:.0}s",
        t.elapsed().as_secs_f64()
    );
    sheet.check("C2", "berlin52 quality", best <= 0.5 && m <= 1.5, detail);
}

fn c3_c4(sheet: &mut Sheet) {
    let t = Instant::now();
    let taus = [1.0, 0.9, 0.75, 0.5];
    let mut n_sub = Vec::new();
    let mut comp = Vec::new();
    let mut gap = Vec::new();
    for tau in taus {
        let rs = runs("berlin52", |s| HybridConfig {
            tau,
            n_pool: 100,
            n_sample: 50,
            ..table3_config(s)
        });
        n_sub.push(mean(&rs.iter().map(|r| r.mean_n_sub).collect::<Vec<_>>()));
        comp.push(mean(
            &rs.iter().map(|r| r.compression_pct).collect::<Vec<_>>(),
        ));
        gap.push(mean(&gaps(&rs)));
    }
    let decreasing = n_sub.windows(2).all(|w| w[1] < w[0]);
    let in_band = (70.0..=92.0).contains(&comp[3]);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.2}"))
            .collect::<Vec<_>>()
            .join(" > ")
    };
    sheet.check(
        "C3",
        "threshold monotonicity",
        decreasing && in_band,
        format!(
            "mean n_sub {} ; compression at 0.5 = {:.2}% (in [70, 92]); {:.0}s",
            fmt(&n_sub),
            comp[3],
            t.elapsed().as_secs_f64()
        ),
    );
    sheet.check(
        "C4",
        "gap-vs-compression trade-off",
        gap[3] >= gap[0],
        format!(
            "mean gap {:.3}% at 0.5 vs {:.3}% at 1.0 (need >=)",
            gap[3], gap[0]
        ),
    );
}

fn c5(sheet: &mut Sheet) {
    let mut rng = common::rng(505);
    let mut ok = 0;
    for i in 0..25 {
        let n = 4 + i % 2;
        let d = common::random_matrix(n, 100, &mut rng);
        let lam = n as f64 * d.max_distance();
        let m = build_qubo(&d, lam, lam).unwrap();
        let set = solve_exhaustive(&m).unwrap();
        let opt = held_karp_exact(&d).unwrap().length();
        let good = m.num_vars() == (n - 1) * (n - 1)
            && m.decode_tour(&set.records[0].bits, &d)
                .is_some_and(|t| t.length() == opt)
            && set.records[0].energy + m.offset() == opt;
        ok += usize::from(good);
    }
    sheet.check(
        "C5",
        "QUBO ground-truth equivalence",
        ok == 25,
        format!("{ok}/25 exact matches"),
    );
}

fn c6(sheet: &mut Sheet) {
    let mut rng = common::rng(606);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(3..=8);
        let d = common::random_euclidean(n, &mut rng);
        let lam = 0.8 * d.max_distance();
        let m = build_qubo(&d, lam, lam).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let e = m.energy(&m.encode(&order).unwrap()).unwrap() + m.offset();
        let len = common::cycle_len(&order, &d);
        worst = worst.max((e - len).abs() / len.max(1.0));
    }
    sheet.check(
        "C6",
        "feasible-energy identity",
        worst <= 1e-9,
        format!("max relative error {worst:.2e} over 1000"),
    );
}

fn c7(sheet: &mut Sheet) {
    let (mut contracted, mut valid, mut dp_checked, mut dp_equal) = (0, 0, 0, 0);
    let (mut degenerate, mut degenerate_ok) = (0, 0);
    let mut seed = 0u64;
    while contracted < 1000 {
        seed += 1;
        let t = common::random_triple(seed);
        let f = edge_frequencies(&t.pool).unwrap();
        let bb = build_backbone(&f, t.tau, &t.d).unwrap();
        let ci = match contract(&t.d, &bb) {
            Ok(ci) => ci,
            Err(e) => {
                degenerate += 1;
                degenerate_ok += usize::from(matches!(e, ContractionError::TooFewEntities { .. }));
                continue;
            }
        };
        contracted += 1;
        let sub = random_tour(ci.d_sub(), seed).unwrap();
        let full = expand_tour(&sub, &ci, &t.d).unwrap();
        let edges = full.edges();
        if common::is_permutation(full.order(), t.d.n())
            && contains_backbone(&full, &ci)
            && bb.edges().iter().all(|e| edges.contains(e))
        {
            valid += 1;
        }
        let c = ci.chains().len();
        if c <= 8 {
            dp_checked += 1;
            let order = sub.order();
            let dp = expand_with_orientations(
                order,
                &best_orientations(order, &ci, &t.d).unwrap(),
                &ci,
                &t.d,
            )
            .unwrap()
            .length();
            let pos: Vec<usize> = (0..order.len())
                .filter(|&p| matches!(ci.entities()[order[p]], Entity::Super(_)))
                .collect();
            let brute = (0u32..1 << c)
                .map(|mask| {
                    let mut o = vec![0; order.len()];
                    for (b, &p) in pos.iter().enumerate() {
                        o[p] = ((mask >> b) & 1) as usize;
                    }
                    expand_with_orientations(order, &o, &ci, &t.d)
                        .unwrap()
                        .length()
                })
                .fold(f64::INFINITY, f64::min);
            dp_equal += usize::from(dp == brute);
        }
    }
    sheet.check(
        "C7",
        "contraction/expansion soundness",
        valid == contracted && dp_equal == dp_checked && degenerate_ok == degenerate,
        format!(
            "{valid}/{contracted} valid expansions, DP = brute force {dp_equal}/{dp_checked}; \
             {degenerate} further draws reduced below 3 entities and were rejected as such"
        ),
    );
}

fn c8(sheet: &mut Sheet) {
    let (_, d, tours) = common::figure1();
    let f = edge_frequencies(&tours).unwrap();
    let lo = build_backbone(&f, 0.6, &d).unwrap();
    let n_sub = contract(&d, &lo).unwrap().n_sub();
    let hi = build_backbone(&f, 0.9, &d).unwrap();
    // nodes 9 and 10 of the figure
    let two_thirds = EdgeKey::new(7, 8);
    let pass = lo.chains().len() == 3
        && n_sub == 5
        && lo.edges().contains(&two_thirds)
        && !hi.edges().contains(&two_thirds);
    sheet.check(
        "C8",
        "Figure 1 fixture",
        pass,
        format!(
            "tau 0.6: {} chains, n_sub {n_sub}; tau 0.9 keeps the 2/3 edge: {}",
            lo.chains().len(),
            hi.edges().contains(&two_thirds)
        ),
    );
}

fn random_move(n: usize, rng: &mut impl Rng) -> (usize, usize) {
    loop {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let (i, k) = (a.min(b), a.max(b));
        if k - i >= 2 && k - i <= n - 2 {
            return (i, k);
        }
    }
}

fn c9(sheet: &mut Sheet) {
    let mut rng = common::rng(909);
    let d = common::random_euclidean(20, &mut rng);
    let seed = random_tour(&d, 1).unwrap();
    let p = 8;

    let mut sys = ReplicaSystem::new(&[&seed], p).unwrap();
    let mut valid = true;
    let mut monotone = true;
    let mut best = sys.best_seen().length();
    for _ in 0..10_000 {
        let r = rng.gen_range(0..p);
        let (i, k) = random_move(20, &mut rng);
        sys.pimc_move(r, i, k, &d, 1.5, 10.0, &mut rng).unwrap();
        valid &= (0..p).all(|q| common::is_permutation(sys.replica_order(q), 20));
        monotone &= sys.best_seen().length() <= best;
        best = sys.best_seen().length();
    }
    valid &= sys.adjacency_consistent();

    let temp = 20.0;
    let mut sys = ReplicaSystem::new(&[&seed], p).unwrap();
    let (mut obs, mut exp, mut var) = (0.0, 0.0, 0.0);
    for _ in 0..10_000 {
        let r = rng.gen_range(0..p);
        let (i, k) = random_move(20, &mut rng);
        let t = Tour::new(sys.replica_order(r).to_vec(), &d).unwrap();
        let q = (-two_opt_delta(&t, i, k, &d).unwrap() / (p as f64 * temp))
            .exp()
            .min(1.0);
        exp += q;
        var += q * (1.0 - q);
        obs += f64::from(u8::from(
            sys.pimc_move(r, i, k, &d, 0.0, temp, &mut rng).unwrap(),
        ));
    }
    let z = (obs - exp) / var.sqrt();

    let mut sched = PimcDefaults::default().schedule(&d, &seed, 3);
    sched.trace = true;
    let out = pimc_run(&d, &[&seed], &sched).unwrap();
    monotone &= out
        .trace
        .windows(2)
        .all(|w| w[1].best_length <= w[0].best_length);

    sheet.check(
        "C9",
        "PIMC limit behaviour",
        valid && monotone && z.abs() <= 3.0,
        format!(
            "replicas valid {valid}, best-seen non-increasing {monotone}, J=0 accepts {obs:.0} vs expected {exp:.1} (z = {z:.2})"
        ),
    );
}

fn strip(rows: &[hytsp_core::bench::RunRow]) -> Vec<hytsp_core::bench::RunRow> {
    rows.iter().map(|r| r.without_timing()).collect()
}

fn c10(sheet: &mut Sheet) {
    let grid = ParamGrid {
        taus: vec![0.75],
        n_pools: vec![30],
        n_samples: vec![SampleSize::Fraction(0.5)],
        gammas: vec![1],
        ks: vec![3],
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let outs: Vec<_> = dirs
        .iter()
        .map(|dir| {
            let mut s = ExperimentSpec::new(
                vec!["ulysses22".into(), "eil51".into()],
                grid.clone(),
                dir.path(),
            );
            s.repetitions = 2;
            run_bench(&s).unwrap()
        })
        .collect();
    let det = strip(&outs[0].rows) == strip(&outs[1].rows) && outs[0].rows.len() == 4;
    sheet.check(
        "C10a",
        "determinism (bench rows minus timing)",
        det,
        format!("{} rows compared", outs[0].rows.len()),
    );

    // pr439 is not bundled; it is picked up from the TSPLIB directory when one is configured
    match resolve_instance("pr439") {
        Ok(inst) => {
            let t = Instant::now();
            let r = run_hybrid_instance(&inst, &table3_config(0)).unwrap();
            let secs = t.elapsed().as_secs_f64();
            let gap = r.optimality_gap_pct.unwrap();
            sheet.check(
                "C10b",
                "pr439 smoke run",
                gap <= 3.0 && secs < 900.0,
                format!("gap {gap:.2}% (<= 3), {secs:.0}s (< 900)"),
            );
        }
        Err(e) => sheet.unattainable(
            "C10b",
            "pr439 smoke run",
            format!("instance unavailable ({e}); set {TSPLIB_DIR_ENV} to a TSPLIB directory"),
        ),
    }
    sheet.info(
        "C10",
        "absolute timings, pr2392/rl11849 rows, the OR-Tools column and QPU timings are out of scope".into(),
    );
    if std::env::var_os("HYTSP_ACCEPTANCE_PCB442").is_some() {
        let inst = bundled_instance("pcb442").unwrap();
        let opt = lookup_optimum("pcb442").unwrap().optimum_length;
        let t = Instant::now();
        let d: DistanceMatrix<f64> = inst.distance_matrix().unwrap();
        let r = run_hybrid(&d, &table3_config(0), Some(opt)).unwrap();
        sheet.info(
            "C10",
            format!(
                "pcb442 stand-in: gap {:.2}%, {:.0}s",
                r.optimality_gap_pct.unwrap(),
                t.elapsed().as_secs_f64()
            ),
        );
    }
}

fn main() {
    let mut sheet = Sheet::default();
    c5(&mut sheet);
    c6(&mut sheet);
    c7(&mut sheet);
    c8(&mut sheet);
    c9(&mut sheet);
    c10(&mut sheet);
    c1(&mut sheet);
    c2(&mut sheet);
    c3_c4(&mut sheet);
    if sheet.failed.is_empty() {
        println!("all enforced criteria passed");
    } else {
        println!("failed criteria: {:?}", sheet.failed);
        std::process::exit(1);
    }
}
