//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! with the measured value and the pinned tolerance, and exits non-zero if
//! any criterion fails.
//!
//! Run: cargo test --test acceptance

use std::collections::BTreeMap;
use std::time::Instant;

use lakediv::column_align::{align_columns, alignment_pairs, prf, truth_pairs, EmbedMode, HashedBagProvider};
use lakediv::diversify::{
    brute_force_best, diversify, max_sum_lambda, rank_by_query_distances, rank_candidates,
    random_select, Algorithm, BruteForceObjective, DiversifyParams,
};
use lakediv::harness::{
    ablate_pruning, alignment_benchmark, generate, scale_runtime, sweep_p, AlignmentSpec, ScaleAxis,
    SyntheticSpec,
};
use lakediv::lake_model::{Cell, TupleRef};
use lakediv::metrics::{average_diversity, diversity_score, min_diversity};
use lakediv::serialize_embed::{
    cosine_similarity, serialize_tuple, Distance, EmbeddingMatrix, HashedPairProvider, TupleProvider,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cells(v: &[Option<&str>]) -> Vec<Cell> {
    v.iter().map(|c| c.map(str::to_string)).collect()
}

fn headers(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn matrix(prefix: &str, rows: Vec<Vec<f64>>) -> EmbeddingMatrix {
    let ids = (0..rows.len()).map(|i| TupleRef::new(prefix, i)).collect();
    EmbeddingMatrix::new(ids, rows, "acceptance").unwrap()
}

fn serialization_golden() -> Outcome {
    let h = headers(&["Park Name", "Supervisor", "City", "Country"]);
    let river = serialize_tuple(
        TupleRef::new("a", 0),
        &cells(&[Some("River Park"), Some("Vera Onate"), Some("Fresno"), Some("USA")]),
        &h,
    );
    let chippewa = serialize_tuple(
        TupleRef::new("d", 0),
        &cells(&[Some("Chippewa Park"), None, Some("Brandon, MN"), Some("USA")]),
        &h,
    );
    let want_river = "[CLS] Park Name River Park [SEP] Supervisor Vera Onate [SEP] City Fresno [SEP] Country USA [SEP]";
    let want_chippewa = "[CLS] Park Name Chippewa Park [SEP] City Brandon, MN [SEP] Country USA [SEP]";
    let ok = river.text == want_river && chippewa.text == want_chippewa;
    outcome(ok, format!("river={:?} chippewa={:?} | byte-exact", river.text, chippewa.text))
}

fn ranking_golden() -> Outcome {
    // Distances of t1..t6 to two query tuples; (min, mean):
    // t1 (0.3, 0.35), t2 (0.4, 0.5), t3 (0.4, 0.49), t4 (0.4, 0.48),
    // t5 (0.01, 0.46), t6 (0, 0.45).
    let ids: Vec<TupleRef> = (1..=6).map(|i| TupleRef::new("t", i)).collect();
    let d = vec![
        vec![0.3, 0.4],
        vec![0.4, 0.6],
        vec![0.58, 0.4],
        vec![0.4, 0.56],
        vec![0.01, 0.91],
        vec![0.9, 0.0],
    ];
    let order: Vec<usize> = rank_by_query_distances(&ids, &d).iter().map(|r| r.index + 1).collect();
    let from_matrix = order == vec![2, 3, 4, 1, 5, 6];

    // Same ordering from embeddings: Manhattan distance on integer points
    // keeps every score exact (scaled by 100).
    let q = matrix("q", vec![vec![0.0, 0.0], vec![90.0, 0.0]]);
    let t = matrix(
        "t",
        vec![
            vec![0.0, 1.0],  // t5 (1, 91)
            vec![37.0, 3.0], // t4 (40, 56)
            vec![35.0, 5.0], // t2 (40, 60)
            vec![0.0, 0.0],  // t6 (0, 90)
            vec![36.0, 4.0], // t3 (40, 58)
        ],
    );
    let r = rank_candidates(&q, &t, &[0, 1, 2, 3, 4], Distance::Manhattan);
    let emb: Vec<usize> = r.iter().map(|x| x.index).collect();
    let from_embeddings = emb == vec![2, 4, 1, 0, 3];
    outcome(
        from_matrix && from_embeddings,
        format!("matrix order {order:?}, embedding order {emb:?} | exact ordering"),
    )
}

fn oracle_equivalence() -> Outcome {
    const INSTANCES: usize = 240;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = Vec::new();
    let mut gne_hits = 0;
    for inst in 0..INSTANCES {
        let n_t = rng.gen_range(5..=12);
        let k = rng.gen_range(2..=4usize).min(n_t);
        let n_q = rng.gen_range(1..=3);
        let dim = 4;
        let mut draw = |n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect()
        };
        let q = matrix("q", draw(n_q));
        let t = matrix("t", draw(n_t));
        let d = Distance::Cosine;
        let (_, best_avg) = brute_force_best(&q, &t, k, BruteForceObjective::MaxSum, d).unwrap();
        let (_, best_min) = brute_force_best(&q, &t, k, BruteForceObjective::MaxMin, d).unwrap();
        let params = DiversifyParams {
            k,
            s: None,
            seed: inst as u64,
            ..DiversifyParams::default()
        };
        for alg in Algorithm::ALL {
            let r = diversify(alg, &q, &t, &params).unwrap();
            let s = diversity_score(&q, &t, &r.indices(), d).unwrap();
            if s.average > best_avg + 1e-9 || s.min > best_min + 1e-9 {
                violations.push(format!("instance {inst} {alg}"));
            }
        }
        let gne_params = DiversifyParams {
            iterations: 50,
            lambda: max_sum_lambda(k, n_q),
            ..params.clone()
        };
        let r = diversify(Algorithm::Gne, &q, &t, &gne_params).unwrap();
        let s = diversity_score(&q, &t, &r.indices(), d).unwrap();
        if s.average >= best_avg - 1e-9 {
            gne_hits += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let hit_rate = gne_hits as f64 / INSTANCES as f64;
    outcome(
        violations.is_empty() && hit_rate >= 0.8 && secs < 300.0,
        format!(
            "{INSTANCES} instances, {} violations, GNE max-sum hit rate {hit_rate:.3}, {secs:.1}s | slack 1e-9, hit rate >= 0.80, < 300 s",
            violations.len()
        ),
    )
}

fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for i in 0..a.len() {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    (1.0 - ab / (aa.sqrt() * bb.sqrt())).clamp(0.0, 2.0)
}

fn metric_cross_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=5);
        let k = rng.gen_range(1..=15);
        let dim = rng.gen_range(2..=6);
        let mut draw = |m: usize| -> Vec<Vec<f64>> {
            (0..m)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect()
        };
        let q = draw(n);
        let mut s = draw(k);
        if k > 2 && rng.gen_bool(0.2) {
            s[1] = s[0].clone();
        }
        let mut cross = Vec::new();
        for qi in &q {
            for tj in &s {
                cross.push(naive_cosine(qi, tj));
            }
        }
        let mut within = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                within.push(naive_cosine(&s[i], &s[j]));
            }
        }
        let want_avg = (cross.iter().sum::<f64>() + within.iter().sum::<f64>()) / (n + k) as f64;
        let want_min = cross.iter().chain(&within).copied().fold(f64::INFINITY, f64::min);
        let qr: Vec<&[f64]> = q.iter().map(Vec::as_slice).collect();
        let sr: Vec<&[f64]> = s.iter().map(Vec::as_slice).collect();
        let avg = average_diversity(&qr, &sr, Distance::Cosine).unwrap();
        let min = min_diversity(&qr, &sr, Distance::Cosine).unwrap();
        worst = worst.max((avg - want_avg).abs()).max((min - want_min).abs());
    }
    outcome(worst <= 1e-9, format!("1000 instances, max abs error {worst:.2e} | <= 1e-9"))
}

fn mean_f1(noise: f64) -> f64 {
    let bench = alignment_benchmark(&AlignmentSpec {
        noise,
        seed: 5,
        ..AlignmentSpec::default()
    })
    .unwrap();
    let by_name: BTreeMap<&str, _> = bench.lake.iter().map(|t| (t.name.as_str(), t)).collect();
    let mut total = 0.0;
    for q in &bench.queries {
        let cands: Vec<_> = bench.candidates[&q.name].iter().map(|n| by_name[n.as_str()].clone()).collect();
        let map = align_columns(q, &cands, &HashedBagProvider::default(), EmbedMode::Column).unwrap();
        let listed: Vec<_> = bench.truth.iter().filter(|[a, _]| a.table == q.name).cloned().collect();
        total += prf(&alignment_pairs(&map), &truth_pairs(q, &listed)).f1;
    }
    total / bench.queries.len() as f64
}

fn alignment_recovery() -> Outcome {
    let start = Instant::now();
    let clean = mean_f1(0.0);
    let noisy = mean_f1(0.2);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        clean == 1.0 && noisy >= 0.8 && secs < 60.0,
        format!("F1 separable {clean:.4}, F1 20% noise {noisy:.4}, {secs:.1}s | 1.0, >= 0.8, < 60 s"),
    )
}

fn scaling_gate() -> Outcome {
    let start = Instant::now();
    let base = SyntheticSpec {
        n_tuples: 5000,
        seed: 3,
        ..SyntheticSpec::default()
    };
    let params = DiversifyParams {
        k: 100,
        s: Some(2500),
        ..DiversifyParams::default()
    };
    let algs = [Algorithm::Dust, Algorithm::Gmc];
    let by_s = scale_runtime(&base, &algs, ScaleAxis::S, &[1000, 2000, 4000, 7000, 10000], &params, 3).unwrap();
    let by_k = scale_runtime(&base, &[Algorithm::Dust], ScaleAxis::K, &[10, 50, 100, 200], &params, 7).unwrap();
    let exp = |a: Algorithm| by_s.exponents.iter().find(|(x, _)| *x == a).unwrap().1.unwrap_or(f64::NAN);
    let (dust_exp, gmc_exp) = (exp(Algorithm::Dust), exp(Algorithm::Gmc));
    let k_times: Vec<f64> = by_k.rows.iter().map(|r| r.seconds).collect();
    let spread = k_times.iter().copied().fold(0.0, f64::max) / k_times.iter().copied().fold(f64::INFINITY, f64::min);
    let at = |a: Algorithm| by_s.rows.iter().find(|r| r.algorithm == a && r.x == 10000).unwrap().seconds;
    let ratio = at(Algorithm::Gmc) / at(Algorithm::Dust);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        dust_exp < 1.3 && gmc_exp > 1.6 && spread < 2.0 && ratio >= 3.0 && secs < 900.0,
        format!(
            "DUST exponent {dust_exp:.3}, GMC exponent {gmc_exp:.3}, DUST k-spread {spread:.2}x, GMC/DUST at 10000 {ratio:.1}x, {secs:.1}s | < 1.3, > 1.6, < 2x, >= 3x, < 900 s"
        ),
    )
}

fn pruning_ablation() -> Outcome {
    let params = DiversifyParams {
        k: 100,
        ..DiversifyParams::default()
    };
    let (mut full, mut pruned, mut changes) = (0.0, 0.0, Vec::new());
    for seed in 0..5 {
        let inst = generate(&SyntheticSpec {
            n_tuples: 10_000,
            seed,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let rows = ablate_pruning(&inst, &params, &[None, Some(2500)]).unwrap();
        full += rows[0].seconds;
        pruned += rows[1].seconds;
        changes.push((rows[1].average - rows[0].average).abs() / rows[0].average);
    }
    let speedup = full / pruned;
    let mean_change = changes.iter().sum::<f64>() / changes.len() as f64;
    let worst = changes.iter().copied().fold(0.0, f64::max);
    outcome(
        speedup >= 5.0 && mean_change <= 0.05,
        format!(
            "5 instances, unpruned {full:.2}s, s=2500 {pruned:.2}s, speedup {speedup:.1}x, mean Average Diversity change {:.2}% (worst {:.2}%) | >= 5x, mean <= 5%",
            mean_change * 100.0,
            worst * 100.0
        ),
    )
}

fn duplicate_heavy(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n_tuples: 1500,
        duplicate_fraction: 0.5,
        seed,
        ..SyntheticSpec::default()
    }
}

fn random_dominance() -> Outcome {
    let params = DiversifyParams {
        k: 10,
        ..DiversifyParams::default()
    };
    let mut wins = 0;
    for seed in 0..30 {
        let inst = generate(&duplicate_heavy(100 + seed)).unwrap();
        let dust = diversify(Algorithm::Dust, &inst.queries, &inst.tuples, &params).unwrap();
        let dust_min = diversity_score(&inst.queries, &inst.tuples, &dust.indices(), params.distance).unwrap().min;
        let best_random = (0..5)
            .map(|s| {
                let pick = random_select(inst.tuples.len(), params.k, s);
                diversity_score(&inst.queries, &inst.tuples, &pick, params.distance).unwrap().min
            })
            .fold(f64::NEG_INFINITY, f64::max);
        wins += (dust_min > best_random) as usize;
    }
    let rate = wins as f64 / 30.0;
    outcome(rate >= 0.9, format!("DUST wins {wins}/30 on Min Diversity ({rate:.3}) | >= 0.90"))
}

fn p_sweep() -> Outcome {
    let instances: Vec<_> = (0..10).map(|s| generate(&duplicate_heavy(200 + s)).unwrap()).collect();
    let params = DiversifyParams {
        k: 10,
        ..DiversifyParams::default()
    };
    let rows = sweep_p(&instances, &params, &[2, 3, 4]).unwrap();
    let base = rows[0].mean_min;
    let ok = rows[1..].iter().all(|r| r.mean_min <= base * 1.01);
    let mins: Vec<String> = rows.iter().map(|r| format!("p={}: {:.4}", r.p, r.mean_min)).collect();
    outcome(ok, format!("mean Min Diversity {} | p=3,4 <= p=2 + 1%", mins.join(", ")))
}

fn order_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let provider = HashedPairProvider::default();
    let words = ["park", "river", "lake", "north", "south", "city", "green", "oak", "elm", "bay"];
    let mut exact = 0;
    const N: usize = 10_000;
    for i in 0..N {
        let width = rng.gen_range(2..=8);
        let h: Vec<String> = (0..width).map(|j| format!("{} {j}", words.choose(&mut rng).unwrap())).collect();
        let c: Vec<Cell> = (0..width)
            .map(|_| {
                if rng.gen_bool(0.1) {
                    None
                } else {
                    let n = rng.gen_range(1..=3);
                    Some((0..n).map(|_| *words.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(" "))
                }
            })
            .collect();
        if c.iter().all(Option::is_none) {
            exact += 1;
            continue;
        }
        let mut perm: Vec<usize> = (0..width).collect();
        perm.shuffle(&mut rng);
        let h2: Vec<String> = perm.iter().map(|&j| h[j].clone()).collect();
        let c2: Vec<Cell> = perm.iter().map(|&j| c[j].clone()).collect();
        let a = provider.embed(&serialize_tuple(TupleRef::new("t", i), &c, &h)).unwrap();
        let b = provider.embed(&serialize_tuple(TupleRef::new("t", i), &c2, &h2)).unwrap();
        if cosine_similarity(&a, &b).unwrap() == 1.0 {
            exact += 1;
        }
    }
    outcome(exact == N, format!("{exact}/{N} shuffled tuples at cosine similarity exactly 1.0 | all, exact"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("serialization golden", serialization_golden),
        ("ranking golden", ranking_golden),
        ("oracle equivalence", oracle_equivalence),
        ("metric cross-check", metric_cross_check),
        ("alignment recovery", alignment_recovery),
        ("scaling gate", scaling_gate),
        ("pruning ablation", pruning_ablation),
        ("random-baseline dominance", random_dominance),
        ("p-sweep", p_sweep),
        ("built-in provider order invariance", order_invariance),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        failed += (!o.pass) as usize;
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
