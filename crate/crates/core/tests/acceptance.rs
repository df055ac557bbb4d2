//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dendro_core::baselines::{
    brute_force_clustering, brute_force_detection, generate_synthetic_matrix,
    torgo_size_threshold, SyntheticSpec,
};
use dendro_core::detection::{detect_outliers, outlier_threshold, DetectionConfig};
use dendro_core::hierarchy::{build_dendrogram, cluster_with, compute_threshold, cut_dendrogram, Clustering, CutThreshold};
use dendro_core::pipeline::analyze;
use dendro_core::similarity::{series_similarity, Event, EventSeries};
use dendro_core::SimilarityMatrix;

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i:02}")).collect()
}

/// Random matrix; every other one is drawn on a coarse grid so ties occur.
fn random_matrix(rng: &mut ChaCha8Rng, n: usize, coarse: bool) -> SimilarityMatrix {
    SimilarityMatrix::from_upper(ids(n), |_, _| {
        if coarse {
            f64::from(rng.gen_range(0u8..=8)) / 8.0
        } else {
            rng.gen::<f64>()
        }
    })
    .unwrap()
}

fn three_block_spec() -> SyntheticSpec {
    SyntheticSpec {
        block_sizes: vec![62, 34, 5],
        intra_similarity: 0.9,
        cross_similarity: 0.1,
        jitter: 0.02,
        seed: 6,
    }
}

fn a1() -> Outcome {
    let ot = outlier_threshold(0.372, 0.191, 0.4).map_err(|e| e.to_string())?;
    ensure!((ot - 0.624).abs() <= 1e-3, "OT = {ot}, expected 0.624 +/- 0.001");
    Ok(format!("OT = {ot:.5}"))
}

fn a2() -> Outcome {
    let ot = outlier_threshold(0.363, 0.162, 0.4).map_err(|e| e.to_string())?;
    ensure!((ot - 0.577).abs() <= 1e-3, "OT = {ot}, expected 0.577 +/- 0.001");
    Ok(format!("OT = {ot:.5}"))
}

fn three_block_clustering() -> Result<(SyntheticSpec, Clustering, BTreeSet<String>, Duration), String> {
    let start = Instant::now();
    let spec = three_block_spec();
    let matrix = generate_synthetic_matrix(&spec).map_err(|e| e.to_string())?;
    let outcome = analyze(matrix, 0.4, None).map_err(|e| e.to_string())?;
    Ok((spec, outcome.clustering, outcome.report.outliers, start.elapsed()))
}

fn a3() -> Outcome {
    let (spec, clustering, outliers, elapsed) = three_block_clustering()?;
    let blocks = spec.blocks();
    let expected: BTreeSet<BTreeSet<String>> =
        blocks.iter().map(|b| b.iter().cloned().collect()).collect();
    ensure!(clustering.k() == 3, "found {} clusters, expected 3", clustering.k());
    ensure!(clustering.canonical() == expected, "clusters do not match the planted blocks");
    let smallest: BTreeSet<String> = blocks[2].iter().cloned().collect();
    let fp = outliers.difference(&smallest).count();
    let fneg = smallest.difference(&outliers).count();
    ensure!(fp == 0 && fneg == 0, "{fp} false positives, {fneg} false negatives");
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!(
        "sizes {:?}, T = {:.4}, flagged {}, 0 FP / 0 FN, {elapsed:.2?}",
        clustering.sizes(),
        clustering.threshold().t,
        outliers.len()
    ))
}

fn a4() -> Outcome {
    let (spec, clustering, outliers, _) = three_block_clustering()?;
    let at6 = torgo_size_threshold(&clustering, 6);
    let at5 = torgo_size_threshold(&clustering, 5);
    ensure!(at6 == outliers, "t = 6 flagged {:?}", at6);
    let planted: BTreeSet<String> = spec.blocks()[2].iter().cloned().collect();
    let missed = planted.difference(&at5).count();
    ensure!(at5.is_empty() && missed == 5, "t = 5 flagged {:?}", at5);
    Ok("t = 6 flags the same 5 objects; t = 5 flags none (5 FN)".into())
}

/// A5 and A10 share the same 200 instances.
fn clustering_instances() -> Vec<(SimilarityMatrix, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    (0..200)
        .map(|i| {
            let n = rng.gen_range(2..=12);
            let m = random_matrix(&mut rng, n, i % 2 == 0);
            let overrides = (0..3).map(|_| rng.gen::<f64>()).collect();
            (m, overrides)
        })
        .collect()
}

fn a5() -> Outcome {
    let start = Instant::now();
    let mut checks = 0;
    for (case, (m, overrides)) in clustering_instances().iter().enumerate() {
        let t_eq2 = compute_threshold(m).map_err(|e| e.to_string())?.t;
        for t in std::iter::once(t_eq2).chain(overrides.iter().copied()) {
            let t = t.clamp(0.0, 1.0);
            let main = cluster_with(m, Some(t)).map_err(|e| e.to_string())?;
            let oracle = brute_force_clustering(m, t).map_err(|e| e.to_string())?;
            ensure!(
                main.canonical() == oracle.canonical(),
                "instance {case} (n = {}) differs at T = {t}",
                m.len()
            );
            checks += 1;
        }
        let auto = cluster_with(m, None).map_err(|e| e.to_string())?;
        let oracle = brute_force_clustering(m, t_eq2).map_err(|e| e.to_string())?;
        ensure!(auto.canonical() == oracle.canonical(), "instance {case} differs at the default cut");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("{checks} partitions identical to the oracle, {elapsed:.2?}"))
}

fn a10() -> Outcome {
    let mut pairs = 0usize;
    for (case, (m, overrides)) in clustering_instances().iter().enumerate() {
        let base = compute_threshold(m).map_err(|e| e.to_string())?;
        let d = build_dendrogram(m).map_err(|e| e.to_string())?;
        let mut levels: Vec<f64> = std::iter::once(base.t.clamp(0.0, 1.0))
            .chain(overrides.iter().copied())
            .collect();
        levels.sort_by(f64::total_cmp);
        let cuts: Vec<Clustering> = levels
            .iter()
            .map(|&t| cut_dendrogram(&d, CutThreshold { t, ..base }))
            .collect();
        for (c, &t) in cuts.iter().zip(&levels) {
            for members in c.clusters() {
                for a in members {
                    for b in members {
                        let s = m.similarity(a, b).unwrap();
                        ensure!(s >= t, "instance {case}: ({a}, {b}) = {s} < T = {t}");
                        pairs += 1;
                    }
                }
            }
        }
        for w in cuts.windows(2) {
            for fine in w[1].clusters() {
                ensure!(
                    w[0].clusters().iter().any(|g| fine.iter().all(|x| g.contains(x))),
                    "instance {case}: higher cut is not a refinement"
                );
            }
        }
    }
    Ok(format!("{pairs} intra-cluster pairs above T; all cuts nested"))
}

/// Matrix with a random number of blocks of random sizes and random noise.
fn random_detection_instance(rng: &mut ChaCha8Rng) -> (SimilarityMatrix, Clustering) {
    let n = rng.gen_range(3..=50);
    let matrix = if rng.gen_bool(0.5) {
        let coarse = rng.gen_bool(0.3);
        random_matrix(rng, n, coarse)
    } else {
        let k = rng.gen_range(1..=5usize).min(n);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let intra = rng.gen_range(0.6..1.0);
        let cross = rng.gen_range(0.0..0.4);
        let jitter = rng.gen_range(0.0..0.1);
        SimilarityMatrix::from_upper(ids(n), |i, j| {
            let base = if labels[i] == labels[j] { intra } else { cross };
            (base + jitter * (2.0 * rng.gen::<f64>() - 1.0)).clamp(0.0, 1.0)
        })
        .unwrap()
    };
    let clustering = if rng.gen_bool(0.7) {
        cluster_with(&matrix, None).unwrap()
    } else {
        // arbitrary partition, exercising the no-majority branch more often
        let k = rng.gen_range(1..=n.min(6));
        let mut groups = vec![Vec::new(); k];
        for (i, id) in matrix.ids().iter().enumerate() {
            let g = if i < k { i } else { rng.gen_range(0..k) };
            groups[g].push(id.clone());
        }
        Clustering::new(matrix.ids().to_vec(), groups, CutThreshold::midpoint(0.5, 0.0)).unwrap()
    };
    (matrix, clustering)
}

fn a6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut flagged = 0;
    let mut no_majority = 0;
    for case in 0..100 {
        let (m, c) = random_detection_instance(&mut rng);
        let d = rng.gen::<f64>();
        let report = detect_outliers(&c, &m, DetectionConfig::new(d).unwrap())
            .map_err(|e| e.to_string())?;
        let oracle = brute_force_detection(c.source_ids(), c.clusters(), &m, d);
        ensure!(
            report.outliers == oracle,
            "instance {case}: main {:?} vs oracle {:?}",
            report.outliers,
            oracle
        );
        flagged += oracle.len();
        if c.sizes().iter().all(|&s| 2 * s <= c.len()) {
            no_majority += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!(
        "100 instances agree ({flagged} outliers total, {no_majority} without a majority cluster), {elapsed:.2?}"
    ))
}

fn a7() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    for case in 0..100 {
        let (m, c) = random_detection_instance(&mut rng);
        let reports: Vec<_> = grid
            .iter()
            .map(|&d| detect_outliers(&c, &m, DetectionConfig::new(d).unwrap()).unwrap())
            .collect();
        for w in reports.windows(2) {
            ensure!(
                w[1].outliers.is_subset(&w[0].outliers),
                "instance {case}: d = {} flags more than d = {}",
                w[1].config.dispersion,
                w[0].config.dispersion
            );
        }
        let (first, last) = (&reports[0], &reports[4]);
        ensure!(first.ot == first.mu_of + first.sigma_of, "instance {case}: OT(d=0) != mu + sigma");
        ensure!(last.ot == last.mu_of + 3.0 * last.sigma_of, "instance {case}: OT(d=1) != mu + 3 sigma");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("nested outlier sets over the d grid on 100 instances, {elapsed:.2?}"))
}

fn random_events(rng: &mut ChaCha8Rng, sid: &str, count: usize, offset: f64, spread: f64) -> Vec<Event> {
    let mut t = 0.0;
    (0..count)
        .map(|i| {
            t += rng.gen_range(1.0..50.0);
            let len = rng.gen_range(1.0..40.0);
            let features = (0..3).map(|_| offset + rng.gen::<f64>() * spread).collect();
            let e = Event::new(sid, format!("{sid}-{i}"), t, t + len, features).unwrap();
            t += len;
            e
        })
        .collect()
}

fn a8() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let empty_a = EventSeries::new("empty-a", vec![]).unwrap();
    let empty_b = EventSeries::new("empty-b", vec![]).unwrap();
    let e = series_similarity(&empty_a, &empty_b).map_err(|e| e.to_string())?;
    ensure!(e == 1.0, "empty-event similarity = {e}");

    for case in 0..100 {
        let na = rng.gen_range(0..=7);
        let nb = rng.gen_range(0..=7);
        let a = EventSeries::new("a", random_events(&mut rng, "a", na, 0.0, 10.0)).unwrap();
        let b = EventSeries::new("b", random_events(&mut rng, "b", nb, 0.0, 10.0)).unwrap();
        let ab = series_similarity(&a, &b).map_err(|e| e.to_string())?;
        let ba = series_similarity(&b, &a).map_err(|e| e.to_string())?;
        ensure!(ab == ba, "case {case}: sim(a,b) = {ab} but sim(b,a) = {ba}");
        ensure!((0.0..=1.0).contains(&ab), "case {case}: similarity {ab} outside [0, 1]");

        let copy = a.relabeled("a-copy");
        let s = series_similarity(&a, &copy).map_err(|e| e.to_string())?;
        ensure!(s == 1.0, "case {case}: self-copy similarity = {s}");

        // Two tight groups far apart in feature space never share events.
        let ka = rng.gen_range(2..=6);
        let kb = rng.gen_range(2..=6);
        let near = EventSeries::new("near", random_events(&mut rng, "near", ka, 0.0, 1.0)).unwrap();
        let far = EventSeries::new("far", random_events(&mut rng, "far", kb, 100.0, 1.0)).unwrap();
        let s = series_similarity(&near, &far).map_err(|e| e.to_string())?;
        ensure!(s == 0.0, "case {case}: no-common-event similarity = {s}");

        let empty = EventSeries::new("none", vec![]).unwrap();
        let s = series_similarity(&empty, &empty_a).map_err(|e| e.to_string())?;
        ensure!(s == 1.0, "case {case}: empty-event similarity = {s}");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("symmetry, range, self-copy, disjoint and empty axioms hold on 100 pairs, {elapsed:.2?}"))
}

fn a9() -> Outcome {
    let sizes = [250usize, 500, 1000, 2000];
    let mut points = Vec::new();
    for &n in &sizes {
        let blocks = vec![n * 2 / 5, n * 3 / 10, n / 5, n / 10 - 3, 3];
        let spec = SyntheticSpec {
            block_sizes: blocks,
            intra_similarity: 0.8,
            cross_similarity: 0.2,
            jitter: 0.15,
            seed: n as u64,
        };
        let matrix = generate_synthetic_matrix(&spec).map_err(|e| e.to_string())?;
        let repeats = if n < 1000 { 3 } else { 1 };
        let mut best = Duration::MAX;
        for _ in 0..repeats {
            let start = Instant::now();
            let clustering = cluster_with(&matrix, None).map_err(|e| e.to_string())?;
            let report = detect_outliers(&clustering, &matrix, DetectionConfig::new(0.4).unwrap())
                .map_err(|e| e.to_string())?;
            std::hint::black_box(report);
            best = best.min(start.elapsed());
        }
        if n == 2000 {
            ensure!(best < Duration::from_secs(60), "n = 2000 took {best:?}");
        }
        points.push(((n as f64).ln(), best.as_secs_f64().ln(), best));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    let timings: Vec<String> = sizes
        .iter()
        .zip(&points)
        .map(|(n, p)| format!("n={n}: {:.1?}", p.2))
        .collect();
    ensure!(
        (1.6..=2.6).contains(&slope),
        "log-log slope {slope:.3} outside [1.6, 2.6] ({})",
        timings.join(", ")
    );
    Ok(format!("slope {slope:.3} ({})", timings.join(", ")))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("A1", "outlier threshold, reference scores I", a1),
        ("A2", "outlier threshold, reference scores II", a2),
        ("A3", "62/34/5 structural replay", a3),
        ("A4", "cluster-size baseline comparison", a4),
        ("A5", "clustering oracle equivalence", a5),
        ("A6", "detection oracle equivalence", a6),
        ("A7", "dispersion monotonicity", a7),
        ("A8", "similarity axioms", a8),
        ("A9", "quadratic scaling", a9),
        ("A10", "cut guarantees", a10),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        match check() {
            Ok(detail) => println!("{id:<4} PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("{id:<4} FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
