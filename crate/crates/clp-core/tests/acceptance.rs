//! Acceptance suite: one test per criterion, each printing a single
//! `criterion NN <name>: PASS|FAIL` line. Criteria marked FAIL panic so
//! the harness reports them red.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use clp_core::baseline::NcmModel;
use clp_core::data::{build_stream, Sample, StreamSpec};
use clp_core::metrics::{self, ScoredBinary};
use clp_core::pool::{CapacityPolicy, PoolConfig, PrototypePool};
use clp_core::scenarios::{
    kshot_unlabeled, run_openset_eval, run_semisupervised_fewshot, run_size_sweep,
    run_supervised_ocl,
};
use clp_core::synthetic::{generate_synthetic, DriftSpec, SyntheticSpec};

fn verdict(number: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {number:02} {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number:02} {name} failed: {detail}");
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn unit_rand(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-9 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn angle_deg(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos().to_degrees()
}

fn pool_config(d: usize, capacity: usize, tau: f64, alpha_min: f64) -> PoolConfig {
    PoolConfig {
        dimension: d,
        capacity,
        tau,
        cascade_width: 5,
        alpha_min,
        capacity_policy: CapacityPolicy::Skip,
    }
}

// ---------------------------------------------------------------------------
// criterion 1: invariant suite over randomized operation sequences
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_invariant_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut cases = 0usize;
    for _ in 0..600 {
        let d = rng.gen_range(2..=8);
        let capacity = rng.gen_range(2..=16);
        let tau = rng.gen_range(0.1..0.95);
        let alpha_min = [0.0, 0.01, 0.05][rng.gen_range(0..3)];
        let cfg = PoolConfig {
            dimension: d,
            capacity,
            tau,
            cascade_width: rng.gen_range(1..=5),
            alpha_min,
            capacity_policy: CapacityPolicy::Skip,
        };
        let mut pool = PrototypePool::new(cfg).unwrap();
        let mut prev_labels: Vec<i64> = Vec::new();
        let mut seen_pseudo: BTreeSet<i64> = BTreeSet::new();
        for _ in 0..25 {
            let x = unit_rand(&mut rng, d);
            match rng.gen_range(0..10) {
                0..=3 => {
                    pool.train_step(&x, Some(rng.gen_range(1..=4))).unwrap();
                }
                4..=6 => {
                    pool.train_step(&x, None).unwrap();
                }
                7..=8 => {
                    let label = if rng.gen_bool(0.5) {
                        Some(rng.gen_range(1..=4))
                    } else {
                        None
                    };
                    pool.allocate(&x, label).unwrap();
                }
                _ => {
                    // assign_label may legitimately error; only its success
                    // path mutates state
                    let _ = pool.assign_label(
                        rng.gen_range(0..capacity),
                        rng.gen_range(1..=4),
                    );
                }
            }
            cases += 1;

            // invariants after every operation
            assert!(pool.len() <= capacity, "capacity bound violated");
            assert!(pool.len() >= prev_labels.len(), "prototype count shrank");
            let mut pseudo_now: BTreeSet<i64> = BTreeSet::new();
            for (i, p) in pool.prototypes().iter().enumerate() {
                assert!(
                    (norm(&p.center) - 1.0).abs() <= 1e-6,
                    "prototype {i} not unit-norm"
                );
                assert!(p.goodness >= 1.0, "goodness below 1");
                let expected_alpha = (1.0 / p.goodness).max(alpha_min);
                assert_eq!(p.alpha(alpha_min), expected_alpha, "alpha formula");
                assert_ne!(p.label, 0, "prototype with label 0");
                if p.label < 0 {
                    assert!(pseudo_now.insert(p.label), "duplicate live pseudo-label");
                }
                if let Some(&prev) = prev_labels.get(i) {
                    if prev > 0 {
                        assert_eq!(p.label, prev, "positive label changed");
                    } else if p.label < 0 {
                        assert_eq!(p.label, prev, "pseudo-label changed to another pseudo");
                    }
                } else if p.label < 0 {
                    // freshly allocated pseudo-labels are globally unique
                    assert!(
                        seen_pseudo.insert(p.label),
                        "pseudo-label {} reused",
                        p.label
                    );
                }
            }
            prev_labels = pool.prototypes().iter().map(|p| p.label).collect();
        }
    }
    let elapsed = start.elapsed();
    let pass = cases >= 10_000 && elapsed.as_secs_f64() < 30.0;
    verdict(
        1,
        "invariant-suite",
        pass,
        &format!("{cases} cases in {:.2}s", elapsed.as_secs_f64()),
    );
}

// ---------------------------------------------------------------------------
// criterion 2: oracle equivalence against a naive transcription of the
// training loop, allocation rule and negative cascade
// ---------------------------------------------------------------------------

struct OracleProto {
    center: Vec<f64>,
    goodness: f64,
    label: i64,
}

struct Oracle {
    protos: Vec<OracleProto>,
    next_pseudo: i64,
    capacity: usize,
    tau: f64,
    m: usize,
    alpha_min: f64,
}

impl Oracle {
    fn update(&mut self, i: usize, x: &[f64], psi: f64) {
        let g = self.protos[i].goodness;
        let alpha = (1.0 / g).max(self.alpha_min);
        let moved: Vec<f64> = self.protos[i]
            .center
            .iter()
            .zip(x)
            .map(|(&c, &xi)| c + psi * alpha * xi)
            .collect();
        let n = norm(&moved);
        if n >= 1e-6 && n.is_finite() {
            self.protos[i].center = moved.iter().map(|&v| v / n).collect();
        }
        self.protos[i].goodness = (g + psi).max(1.0);
    }

    fn allocate(&mut self, x: &[f64], label: Option<i64>) {
        if self.protos.len() >= self.capacity {
            return;
        }
        let n = norm(x);
        let label = match label {
            Some(y) => y,
            None => {
                let p = self.next_pseudo;
                self.next_pseudo -= 1;
                p
            }
        };
        self.protos.push(OracleProto {
            center: x.iter().map(|&v| v / n).collect(),
            goodness: 2.0,
            label,
        });
    }

    fn step(&mut self, x: &[f64], label: Option<i64>) {
        let sims: Vec<f64> = self.protos.iter().map(|p| dot(&p.center, x)).collect();
        let mut winner: Option<(usize, f64)> = None;
        for (i, &s) in sims.iter().enumerate() {
            if winner.map_or(true, |(_, best)| s > best) {
                winner = Some((i, s));
            }
        }
        let novel = winner.map_or(true, |(_, s)| s < self.tau);
        if novel {
            self.allocate(x, label);
            return;
        }
        let (wi, _) = winner.unwrap();
        let Some(y) = label else {
            self.update(wi, x, 0.5);
            return;
        };
        if self.protos[wi].label < 0 {
            self.protos[wi].label = y;
        }
        if self.protos[wi].label == y {
            self.update(wi, x, 1.0);
            return;
        }
        self.update(wi, x, -1.0);
        let mut visited = vec![wi];
        let mut found = false;
        for _ in 0..self.m {
            let mut next: Option<(usize, f64)> = None;
            for (i, &s) in sims.iter().enumerate() {
                if visited.contains(&i) {
                    continue;
                }
                if next.map_or(true, |(_, best)| s > best) {
                    next = Some((i, s));
                }
            }
            let Some((k, _)) = next else { break };
            visited.push(k);
            if self.protos[k].label == y {
                found = true;
                self.update(k, x, 1.0);
            } else {
                self.update(k, x, -1.0);
            }
        }
        if !found {
            self.allocate(x, Some(y));
        }
    }
}

#[test]
fn criterion_02_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let mut max_dev: f64 = 0.0;
    for _ in 0..100 {
        let d = 8;
        let capacity = rng.gen_range(8..=64);
        let tau = rng.gen_range(0.1..0.9);
        let m = rng.gen_range(1..=5);
        let alpha_min = [0.0, 0.01, 0.1][rng.gen_range(0..3)];
        let mut cfg = pool_config(d, capacity, tau, alpha_min);
        cfg.cascade_width = m;
        let mut pool = PrototypePool::new(cfg).unwrap();
        let mut oracle = Oracle {
            protos: Vec::new(),
            next_pseudo: -1,
            capacity,
            tau,
            m,
            alpha_min,
        };
        for _ in 0..1000 {
            let x = unit_rand(&mut rng, d);
            let label = if rng.gen_bool(0.7) {
                Some(rng.gen_range(1..=6))
            } else {
                None
            };
            pool.train_step(&x, label).unwrap();
            oracle.step(&x, label);
        }
        assert_eq!(pool.len(), oracle.protos.len(), "prototype count diverged");
        assert_eq!(
            pool.next_pseudo_label(),
            oracle.next_pseudo,
            "pseudo counter diverged"
        );
        for (p, o) in pool.prototypes().iter().zip(&oracle.protos) {
            assert_eq!(p.goodness, o.goodness, "goodness diverged");
            assert_eq!(p.label, o.label, "label diverged");
            for (a, b) in p.center.iter().zip(&o.center) {
                let dev = (a - b).abs();
                max_dev = max_dev.max(dev);
                assert!(dev <= 1e-9, "center deviation {dev}");
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = elapsed.as_secs_f64() < 60.0;
    verdict(
        2,
        "oracle-equivalence",
        pass,
        &format!(
            "100 streams x 1000 steps, max center deviation {max_dev:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// criterion 3: memorization
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_memorization() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let mut pool = PrototypePool::new(pool_config(16, 1000, 0.7, 0.01)).unwrap();
    let mut vectors = Vec::new();
    for i in 0..1000 {
        let x = unit_rand(&mut rng, 16);
        pool.allocate(&x, Some(i + 1)).unwrap().unwrap();
        vectors.push(x);
    }
    let mut worst: f64 = 1.0;
    for (i, x) in vectors.iter().enumerate() {
        let p = pool.predict(x).unwrap();
        assert_eq!(p.label, i as i64 + 1, "allocation {i} not recalled");
        worst = worst.min(p.top_similarity);
        assert!(
            (p.top_similarity - 1.0).abs() <= 1e-9,
            "similarity {} at allocation {i}",
            p.top_similarity
        );
    }
    verdict(
        3,
        "memorization",
        true,
        &format!("1000 allocations recalled, worst similarity {worst:.12}"),
    );
}

// ---------------------------------------------------------------------------
// criterion 4: metrics against O(n^2) oracles plus the F1 spot check
// ---------------------------------------------------------------------------

fn auroc_pairwise_oracle(scored: &[ScoredBinary]) -> f64 {
    let mut hits = 0.0;
    let mut pairs = 0.0;
    for n in scored.iter().filter(|s| s.is_novel) {
        for k in scored.iter().filter(|s| !s.is_novel) {
            pairs += 1.0;
            if n.score < k.score {
                hits += 1.0;
            } else if n.score == k.score {
                hits += 0.5;
            }
        }
    }
    hits / pairs
}

fn auprc_exhaustive_oracle(scored: &[ScoredBinary]) -> f64 {
    let novel = scored.iter().filter(|s| s.is_novel).count() as f64;
    let mut thresholds: Vec<f64> = scored.iter().map(|s| s.score).collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for &t in &thresholds {
        // declare novel at or below this known-score threshold
        let detected = scored.iter().filter(|s| s.score <= t).count() as f64;
        let tp = scored.iter().filter(|s| s.score <= t && s.is_novel).count() as f64;
        let recall = tp / novel;
        area += (recall - prev_recall) * (tp / detected);
        prev_recall = recall;
    }
    area
}

#[test]
fn criterion_04_metrics_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let mut max_roc_dev: f64 = 0.0;
    let mut max_pr_dev: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=200);
        let mut scored: Vec<ScoredBinary> = (0..n)
            .map(|_| ScoredBinary {
                // discrete grid to force score ties
                score: rng.gen_range(0..=40) as f64 / 40.0,
                is_novel: rng.gen_bool(0.4),
            })
            .collect();
        scored[0].is_novel = true;
        scored[1].is_novel = false;
        let roc_dev = (metrics::auroc(&scored).unwrap() - auroc_pairwise_oracle(&scored)).abs();
        let pr_dev = (metrics::auprc(&scored).unwrap() - auprc_exhaustive_oracle(&scored)).abs();
        max_roc_dev = max_roc_dev.max(roc_dev);
        max_pr_dev = max_pr_dev.max(pr_dev);
        assert!(roc_dev <= 1e-9, "auroc deviates {roc_dev}");
        assert!(pr_dev <= 1e-9, "auprc deviates {pr_dev}");
    }
    // 85 of 100 novel samples below the threshold, no false positives
    let mut spot = Vec::new();
    spot.extend((0..85).map(|_| ScoredBinary { score: 0.3, is_novel: true }));
    spot.extend((0..15).map(|_| ScoredBinary { score: 0.8, is_novel: true }));
    spot.extend((0..100).map(|_| ScoredBinary { score: 0.9, is_novel: false }));
    let op = metrics::operating_point(&spot, 0.7);
    let f1_ok = op.precision == 1.0 && op.recall == 0.85 && (op.f1 - 0.9189).abs() <= 1e-4;
    verdict(
        4,
        "metrics-oracles",
        f1_ok,
        &format!(
            "200 sets, auroc dev {max_roc_dev:.2e}, auprc dev {max_pr_dev:.2e}, f1 {:.4}",
            op.f1
        ),
    );
}

// ---------------------------------------------------------------------------
// synthetic benchmark fixtures shared by criteria 5-7 and 11
// ---------------------------------------------------------------------------

fn benchmark_spec() -> SyntheticSpec {
    let mut spec = SyntheticSpec::new(10, 2, 16);
    spec.samples_per_cluster = 300; // 600 per class and split
    spec.concentration = 0.1;
    spec.max_mean_dot = 0.2;
    spec.same_class_dot = Some(0.5);
    spec.seed = 42;
    spec
}

fn split_by_class(samples: &[Sample], max_class: i64) -> (Vec<Sample>, Vec<Sample>) {
    let (base, novel): (Vec<Sample>, Vec<Sample>) = samples
        .iter()
        .cloned()
        .partition(|s| s.label.map_or(false, |l| l <= max_class));
    (base, novel)
}

// ---------------------------------------------------------------------------
// criterion 5: supervised one-pass accuracy, full-shot and low-shot
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_supervised_ocl() {
    let start = Instant::now();
    let data = generate_synthetic(&benchmark_spec()).unwrap();
    let cfg = pool_config(16, 512, 0.7, 0.01);

    let full_stream = build_stream(&data.train, &StreamSpec::instance()).unwrap();
    let (full, _) = run_supervised_ocl(&full_stream, &data.test, &cfg, json!({})).unwrap();
    let full_acc = full.accuracies["overall"];

    let low_stream = build_stream(&data.train, &StreamSpec::low_shot(1)).unwrap();
    let (low, _) = run_supervised_ocl(&low_stream, &data.test, &cfg, json!({})).unwrap();
    let low_acc = low.accuracies["overall"];

    let elapsed = start.elapsed();
    let pass = full_acc >= 0.90
        && low_acc >= 0.60
        && low_acc <= full_acc
        && elapsed.as_secs_f64() < 10.0;
    verdict(
        5,
        "supervised-ocl",
        pass,
        &format!(
            "full-shot {full_acc:.4}, low-shot {low_acc:.4}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// criterion 6: open-set novelty detection quality
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_openset() {
    let start = Instant::now();
    let data = generate_synthetic(&benchmark_spec()).unwrap();
    let cfg = pool_config(16, 512, 0.7, 0.01);
    let (base_train, _) = split_by_class(&data.train, 5);
    let base_stream = build_stream(&base_train, &StreamSpec::instance()).unwrap();
    let mixed: Vec<(Sample, bool)> = data
        .test
        .iter()
        .map(|s| (s.clone(), s.label.unwrap() > 5))
        .collect();
    let (report, _) = run_openset_eval(&base_stream, &mixed, &cfg, json!({})).unwrap();
    let curves = report.curves.unwrap();
    let elapsed = start.elapsed();
    let pass = curves.auroc >= 0.95
        && curves.operating_point.precision >= 0.9
        && elapsed.as_secs_f64() < 10.0;
    verdict(
        6,
        "openset",
        pass,
        &format!(
            "auroc {:.4}, precision {:.4} at tau 0.7, {:.2}s",
            curves.auroc,
            curves.operating_point.precision,
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// criterion 7: three-phase semi-supervised few-shot protocol
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_semisupervised_fewshot() {
    let start = Instant::now();
    let data = generate_synthetic(&benchmark_spec()).unwrap();
    let cfg = pool_config(16, 512, 0.7, 0.01);
    let (base_train, novel_train) = split_by_class(&data.train, 5);
    let (base_test, novel_test) = split_by_class(&data.test, 5);
    let base_stream = build_stream(&base_train, &StreamSpec::instance()).unwrap();

    let mut novel_accs = Vec::new();
    let mut worst_forgetting: f64 = 0.0;
    for shots in [1usize, 5, 10] {
        let (stream, truth) = kshot_unlabeled(&novel_train, shots).unwrap();
        let (report, _) = run_semisupervised_fewshot(
            &base_stream,
            &base_test,
            &stream,
            &truth,
            &novel_test,
            &cfg,
            json!({"shots": shots}),
        )
        .unwrap();
        worst_forgetting = worst_forgetting.max(report.accuracies["forgetting"]);
        novel_accs.push(report.accuracies["novel"]);
    }
    let monotone = novel_accs.windows(2).all(|w| w[1] >= w[0]);
    let elapsed = start.elapsed();
    let pass = worst_forgetting <= 0.01 && monotone && elapsed.as_secs_f64() < 20.0;
    verdict(
        7,
        "semisupervised-fewshot",
        pass,
        &format!(
            "forgetting {worst_forgetting:.4}, novel acc {novel_accs:.4?} over k=1/5/10, {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// criterion 8: concept-drift tracking with and without baseline plasticity
// ---------------------------------------------------------------------------

fn drift_final_angle(alpha_min: f64) -> f64 {
    let mut spec = SyntheticSpec::new(1, 1, 8);
    spec.samples_per_cluster = 5000;
    spec.concentration = 0.0;
    spec.seed = 8;
    spec.drift = Some(DriftSpec {
        angular_velocity: 0.001,
        target_clusters: vec![0],
    });
    let data = generate_synthetic(&spec).unwrap();
    let mut pool = PrototypePool::new(pool_config(8, 64, 0.7, alpha_min)).unwrap();
    for s in &data.train {
        pool.train_step(&s.features, None).unwrap();
    }
    angle_deg(&pool.get(0).unwrap().center, &data.truth.final_means[0])
}

#[test]
fn criterion_08_drift_tracking() {
    let tracked = drift_final_angle(0.01);
    let untracked = drift_final_angle(0.0);
    let pass = tracked <= 10.0 && untracked > 45.0;
    verdict(
        8,
        "drift-tracking",
        pass,
        &format!("alpha_min 0.01 -> {tracked:.2} deg, alpha_min 0 -> {untracked:.2} deg"),
    );
}

// ---------------------------------------------------------------------------
// criterion 9: multi-modality advantage over the NCM baseline
// ---------------------------------------------------------------------------

fn paired_accuracies(spec: &SyntheticSpec) -> (f64, f64) {
    let data = generate_synthetic(spec).unwrap();
    let stream = build_stream(&data.train, &StreamSpec::instance()).unwrap();
    let cfg = pool_config(spec.dimension, 512, 0.7, 0.01);
    let (report, _) = run_supervised_ocl(&stream, &data.test, &cfg, json!({})).unwrap();

    let mut ncm = NcmModel::new(spec.dimension);
    for s in &stream {
        ncm.train_step(&s.features, s.label.unwrap()).unwrap();
    }
    let hits = data
        .test
        .iter()
        .filter(|s| ncm.predict(&s.features).unwrap() == s.label.unwrap())
        .count();
    (
        report.accuracies["overall"],
        hits as f64 / data.test.len() as f64,
    )
}

#[test]
fn criterion_09_multimodality_advantage() {
    let mut bimodal = SyntheticSpec::new(5, 2, 16);
    bimodal.samples_per_cluster = 120;
    bimodal.concentration = 0.1;
    bimodal.max_mean_dot = 0.2;
    bimodal.same_class_dot = Some(-0.9);
    bimodal.seed = 9;
    let (clp_bi, ncm_bi) = paired_accuracies(&bimodal);

    let mut unimodal = SyntheticSpec::new(5, 1, 16);
    unimodal.samples_per_cluster = 240;
    unimodal.concentration = 0.1;
    unimodal.max_mean_dot = 0.2;
    unimodal.seed = 9;
    let (clp_uni, ncm_uni) = paired_accuracies(&unimodal);

    let pass = clp_bi - ncm_bi >= 0.20 && (clp_uni - ncm_uni).abs() <= 0.02;
    verdict(
        9,
        "multimodality-advantage",
        pass,
        &format!(
            "bi-modal clp {clp_bi:.4} vs ncm {ncm_bi:.4}; uni-modal clp {clp_uni:.4} vs ncm {ncm_uni:.4}"
        ),
    );
}

// ---------------------------------------------------------------------------
// criterion 10: determinism and persistence
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_determinism_persistence() {
    let mut spec = benchmark_spec();
    spec.samples_per_cluster = 60;
    let data = generate_synthetic(&spec).unwrap();
    let cfg = pool_config(16, 512, 0.7, 0.01);
    let stream = build_stream(&data.train, &StreamSpec::instance()).unwrap();

    let (report_a, pool_a) =
        run_supervised_ocl(&stream, &data.test, &cfg, json!({"seed": 42})).unwrap();
    let (report_b, pool_b) =
        run_supervised_ocl(&stream, &data.test, &cfg, json!({"seed": 42})).unwrap();
    let reports_identical =
        serde_json::to_string(&report_a).unwrap() == serde_json::to_string(&report_b).unwrap();
    let models_identical = pool_a.to_bytes() == pool_b.to_bytes();

    // centers round to the on-disk precision once; after that the
    // round trip is field-exact and byte-stable
    let bytes = pool_a.to_bytes();
    let reloaded = PrototypePool::from_bytes(&bytes).unwrap();
    let bytes_stable = reloaded.to_bytes() == bytes;
    let field_exact = PrototypePool::from_bytes(&reloaded.to_bytes()).unwrap() == reloaded;

    let pass = reports_identical && models_identical && bytes_stable && field_exact;
    verdict(
        10,
        "determinism-persistence",
        pass,
        &format!(
            "reports identical: {reports_identical}, models identical: {models_identical}, \
             round trip stable: {bytes_stable}, field-exact: {field_exact}"
        ),
    );
}

// ---------------------------------------------------------------------------
// criterion 11: prototype count monotone in tau
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_size_sweep_monotonicity() {
    // noisier than the benchmark spec so the sample-to-prototype
    // similarity spread straddles the tau grid and counts actually move
    let mut spec = benchmark_spec();
    spec.concentration = 0.3;
    spec.samples_per_cluster = 120;
    let data = generate_synthetic(&spec).unwrap();
    let cfg = pool_config(16, 4096, 0.7, 0.01);
    let (base_train, novel_train) = split_by_class(&data.train, 5);
    let (base_test, novel_test) = split_by_class(&data.test, 5);
    let base_stream = build_stream(&base_train, &StreamSpec::instance()).unwrap();
    let (novel_stream, truth) = kshot_unlabeled(&novel_train, 4).unwrap();
    let grid = [0.55, 0.60, 0.65, 0.70, 0.75];
    let reports = run_size_sweep(
        &base_stream,
        &base_test,
        &novel_stream,
        &truth,
        &novel_test,
        &grid,
        &cfg,
        json!({}),
    )
    .unwrap();
    let counts: Vec<usize> = reports.iter().map(|r| r.prototype_counts.total).collect();
    let pass = counts.windows(2).all(|w| w[1] >= w[0]);
    verdict(
        11,
        "size-sweep-monotonicity",
        pass,
        &format!("prototype totals {counts:?} over tau {grid:?}"),
    );
}
