use std::collections::HashSet;

use proptest::prelude::*;

use dendro_core::baselines::{generate_synthetic_matrix, torgo_size_threshold, SyntheticSpec};
use dendro_core::detection::{detect_outliers, find_representative_cluster, DetectionConfig};
use dendro_core::hierarchy::{cluster_with, Clustering, CutThreshold};
use dendro_core::io::{format_sig9, read_similarity_matrix, write_similarity_matrix};
use dendro_core::similarity::{extract_common_events, series_similarity, Event, EventSeries};
use dendro_core::SimilarityMatrix;

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("id{i}")).collect()
}

fn arb_matrix(max_n: usize) -> impl Strategy<Value = SimilarityMatrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(0.0f64..=1.0, n * (n - 1) / 2).prop_map(move |cells| {
            let mut it = cells.into_iter();
            SimilarityMatrix::from_upper(ids(n), |_, _| it.next().unwrap()).unwrap()
        })
    })
}

fn arb_series(id: &'static str, max_events: usize) -> impl Strategy<Value = EventSeries> {
    prop::collection::vec(
        (0.0f64..500.0, 0.0f64..60.0, prop::collection::vec(-5.0f64..5.0, 2)),
        0..=max_events,
    )
    .prop_map(move |raw| {
        let events = raw
            .into_iter()
            .enumerate()
            .map(|(i, (start, len, f))| Event::new(id, format!("{id}{i}"), start, start + len, f).unwrap())
            .collect();
        EventSeries::new(id, events).unwrap()
    })
}

fn arb_partition(n: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..4, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrix_csv_round_trip_keeps_nine_digits(m in arb_matrix(8)) {
        let mut buf = Vec::new();
        write_similarity_matrix(&m, &mut buf).unwrap();
        let back = read_similarity_matrix(buf.as_slice()).unwrap();
        prop_assert_eq!(back.ids(), m.ids());
        for i in 0..m.len() {
            for j in 0..m.len() {
                prop_assert_eq!(format_sig9(back.get(i, j)), format_sig9(m.get(i, j)));
            }
        }
    }

    #[test]
    fn similarity_axioms(a in arb_series("a", 6), b in arb_series("b", 6)) {
        let ab = series_similarity(&a, &b).unwrap();
        prop_assert_eq!(ab, series_similarity(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));

        let pairs = extract_common_events(&a, &b).unwrap();
        let mut seen = HashSet::new();
        for p in &pairs {
            prop_assert_eq!(p.left.series_id.as_str(), "a");
            prop_assert_eq!(p.right.series_id.as_str(), "b");
            prop_assert!(seen.insert(p.left.event_id.clone()));
            prop_assert!(seen.insert(p.right.event_id.clone()));
        }
        let paired: f64 = pairs.iter().map(|p| p.length()).sum();
        let total: f64 = a.events().iter().chain(b.events()).map(Event::length).sum();
        prop_assert!(paired <= total + 1e-9);
        if seen.len() == a.events().len() + b.events().len() {
            prop_assert!((paired - total).abs() <= 1e-9);
        }

        if !a.events().is_empty() {
            prop_assert_eq!(series_similarity(&a, &a.relabeled("a2")).unwrap(), 1.0);
        }
    }

    #[test]
    fn detection_invariants(m in arb_matrix(30).prop_filter("n >= 2", |m| m.len() >= 2), d in 0.0f64..=1.0) {
        let c = cluster_with(&m, None).unwrap();
        let r = detect_outliers(&c, &m, DetectionConfig::new(d).unwrap()).unwrap();
        for s in &r.scores {
            prop_assert!((0.0..=1.0).contains(&s.of));
            prop_assert_eq!(s.of, (s.of_neighbors + s.of_location) / 2.0);
        }
        prop_assert_eq!(r.outliers.len(), r.scores.iter().filter(|s| s.of > r.ot).count());
        prop_assert_eq!(r.clusters.iter().map(|c| c.size).sum::<usize>(), m.len());
        if let Some(rep) = find_representative_cluster(&c) {
            let frac = c.clusters()[rep].len() as f64 / m.len() as f64;
            for id in &c.clusters()[rep] {
                let s = r.scores.iter().find(|s| &s.object_id == id).unwrap();
                prop_assert_eq!(s.of_location, 0.0);
                prop_assert!(s.of <= (1.0 - frac) / 2.0 && s.of < 0.25);
            }
        }
    }

    #[test]
    fn equal_scores_flag_nothing(n in 2usize..20, v in 0.0f64..=1.0, d in 0.0f64..=1.0) {
        let m = SimilarityMatrix::from_upper(ids(n), |_, _| v).unwrap();
        let c = cluster_with(&m, None).unwrap();
        let r = detect_outliers(&c, &m, DetectionConfig::new(d).unwrap()).unwrap();
        prop_assert_eq!(r.sigma_of, 0.0);
        prop_assert!(r.outliers.is_empty());
    }

    #[test]
    fn baseline_monotone_in_t(labels in (1usize..40).prop_flat_map(arb_partition)) {
        let n = labels.len();
        let mut groups: Vec<Vec<String>> = vec![Vec::new(); 4];
        for (i, &l) in labels.iter().enumerate() {
            groups[l].push(format!("id{i}"));
        }
        groups.retain(|g| !g.is_empty());
        let c = Clustering::new(ids(n), groups, CutThreshold::midpoint(0.5, 0.0)).unwrap();
        for t in 0..=n + 1 {
            prop_assert!(torgo_size_threshold(&c, t).is_subset(&torgo_size_threshold(&c, t + 1)));
        }
    }
}

#[test]
fn synthetic_blocks_are_recovered() {
    let spec = SyntheticSpec {
        block_sizes: vec![62, 34, 5],
        intra_similarity: 0.9,
        cross_similarity: 0.1,
        jitter: 0.02,
        seed: 2024,
    };
    let m = generate_synthetic_matrix(&spec).unwrap();
    let c = cluster_with(&m, None).unwrap();
    assert_eq!(c.clusters(), spec.blocks().as_slice());
    let t = c.threshold().t;
    assert!(t > 0.12 && t < 0.88, "T = {t}");
}
