mod common;

use common::{bounding_box, enumerate_conjunctions, fisher_greater_exact, greedy_reference, scan, scan_selectors, selectors_of, RefPattern};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vax_core::forest::mine;
use vax_core::jep::metrics::{confidence, fisher_exact, growth_rate, support, ContingencyTable};
use vax_core::jep::select_and_aggregate;
use vax_core::{synthetic, Conjunction, Dataset, Interval, JepSet, RawPattern, VaxError};

fn tiny() -> Dataset {
    Dataset::from_rows(
        vec![vec![0.0, 1.0], vec![1.0, 2.0], vec![2.0, 0.0], vec![3.0, 3.0]],
        vec![0, 0, 1, 1],
        vec!["a".into(), "b".into()],
    )
    .unwrap()
}

fn conj(sel: &[(usize, f64, f64)]) -> Conjunction {
    Conjunction::from_selectors(sel.iter().map(|&(v, lo, hi)| (v, Interval::new(lo, hi))))
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, m: usize, j: usize) -> Dataset {
    loop {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(0..6) as f64).collect()).collect();
        let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..j)).collect();
        // duplicates take the label of their first occurrence
        for b in 0..n {
            if let Some(a) = (0..b).find(|&a| rows[a] == rows[b]) {
                labels[b] = labels[a];
            }
        }
        if (0..j).all(|c| labels.contains(&c)) {
            let classes = (0..j).map(|c| format!("c{c}")).collect();
            return Dataset::from_rows(rows, labels, classes).unwrap();
        }
    }
}

fn assert_matches_reference(set: &JepSet, reference: &[RefPattern]) {
    assert_eq!(set.len(), reference.len());
    for (p, r) in set.patterns.iter().zip(reference) {
        assert_eq!(p.id, r.id);
        assert_eq!(p.class_id, r.class);
        assert_eq!(p.supported_rows, r.rows);
        assert_eq!(selectors_of(&p.selectors), r.selectors);
        assert_eq!(p.aggregated_from, r.aggregated_from);
    }
}

#[test]
fn support_examples() {
    let ds = synthetic::five_class(0);
    let e = ds.partition(4).unwrap();
    let box_e = conj(&[(0, 96.0, 120.0), (1, 78.0, 95.0)]);
    assert_eq!(support(&box_e, &ds, &e.members).unwrap(), 1.0);
    assert_eq!(support(&Conjunction::new(), &ds, &e.complement).unwrap(), 1.0);
    assert!(matches!(support(&box_e, &ds, &[]), Err(VaxError::EmptyPartition)));
    assert_eq!(growth_rate(&box_e, &ds, &e.members, &e.complement).unwrap(), f64::INFINITY);
    assert_eq!(confidence(&box_e, &ds, &e.members, &e.complement).unwrap(), 1.0);
}

#[test]
fn support_matches_scan_on_random_patterns() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ds = synthetic::gaussian_classes(3, 200, 3, 3, 0.5, 2).unwrap();
    for _ in 0..50 {
        let mut sel = Vec::new();
        for v in 0..3 {
            if rng.random_bool(0.6) {
                let (min, max) = ds.variable_range(v);
                let a = rng.random_range(min..=max);
                let b = rng.random_range(min..=max);
                sel.push((v, a.min(b), a.max(b)));
            }
        }
        let c = conj(&sel);
        let part = ds.partition(rng.random_range(0..3)).unwrap();
        let hits = scan(&c, &ds).into_iter().filter(|r| part.members.contains(r)).count();
        assert_eq!(support(&c, &ds, &part.members).unwrap(), hits as f64 / part.members.len() as f64);
    }
}

#[test]
fn growth_rate_cases() {
    let ds = tiny();
    let (a, b) = (vec![0, 1], vec![2, 3]);
    assert_eq!(growth_rate(&conj(&[(0, 10.0, 11.0)]), &ds, &a, &b).unwrap(), 0.0);
    assert_eq!(growth_rate(&conj(&[(0, 0.0, 1.0)]), &ds, &a, &b).unwrap(), f64::INFINITY);
    // target support 0.5, complement support 0.25
    let ds2 = Dataset::from_rows(
        (0..6).map(|i| vec![i as f64]).collect(),
        vec![0, 0, 1, 1, 1, 1],
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let gr = growth_rate(&conj(&[(0, 1.0, 2.0)]), &ds2, &[0, 1], &[2, 3, 4, 5]).unwrap();
    assert_eq!(gr, 2.0);
    assert!(matches!(
        growth_rate(&conj(&[]), &ds, &[0, 1], &[1, 2]),
        Err(VaxError::OverlappingPartitions)
    ));
}

#[test]
fn confidence_cases() {
    let ds = tiny();
    assert_eq!(confidence(&conj(&[(0, 1.0, 2.0)]), &ds, &[0, 1], &[2, 3]).unwrap(), 0.5);
    assert!(matches!(
        confidence(&conj(&[(0, 9.0, 9.0)]), &ds, &[0, 1], &[2, 3]),
        Err(VaxError::UndefinedConfidence)
    ));
}

#[test]
fn confidence_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let ds = random_dataset(&mut rng, 12, 2, 2);
        let part = ds.partition(0).unwrap();
        let c = conj(&[(0, 1.0, 4.0)]);
        let rows = scan(&c, &ds);
        if rows.is_empty() {
            continue;
        }
        let hit = rows.iter().filter(|&&r| ds.label(r) == 0).count();
        let got = confidence(&c, &ds, &part.members, &part.complement).unwrap();
        assert_eq!(got, hit as f64 / rows.len() as f64);
    }
}

#[test]
fn fisher_examples() {
    let p = ContingencyTable::new(10, 0, 0, 10).fisher_greater().unwrap();
    assert!((p - 1.0 / 184_756.0).abs() < 1e-15);
    assert!((p - 5.4128e-6).abs() < 1e-9);
    assert!(ContingencyTable::new(5, 5, 5, 5).fisher_greater().unwrap() > 0.05);
    assert!(ContingencyTable::new(0, 3, 0, 4).fisher_greater().is_err());
    assert!(ContingencyTable::new(3, 0, 4, 0).fisher_greater().is_err());
}

#[test]
fn fisher_matches_exact_rational_tail() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    while checked < 200 {
        let t: [u64; 4] = std::array::from_fn(|_| rng.random_range(0..=50));
        if t[0] + t[2] == 0 || t[1] + t[3] == 0 {
            continue;
        }
        let got = ContingencyTable::new(t[0], t[1], t[2], t[3]).fisher_greater().unwrap();
        let want = fisher_greater_exact(t[0], t[1], t[2], t[3]);
        assert!((got - want).abs() <= 1e-9, "{t:?}: {got} vs {want}");
        checked += 1;
    }
}

#[test]
fn fisher_on_dataset_patterns() {
    let ds = tiny();
    let p = fisher_exact(&conj(&[(0, 0.0, 1.0)]), &ds, &[0, 1], &[2, 3]).unwrap();
    assert!((p - fisher_greater_exact(2, 0, 0, 2)).abs() < 1e-12);
}

#[test]
fn aggregation_examples() {
    let ds = Dataset::from_rows(
        vec![vec![-5.0, 3.0], vec![50.0, 4.0], vec![5.0, 3.5]],
        vec![0, 1, 0],
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let merged = conj(&[(0, 0.0, 10.0)]).intersect(&conj(&[(0, 5.0, 20.0)]), &ds).unwrap();
    assert_eq!(merged, conj(&[(0, 5.0, 10.0)]));
    let filled = conj(&[(0, 0.0, 10.0)]).intersect(&conj(&[(1, 3.0, 4.0)]), &ds).unwrap();
    assert_eq!(filled, conj(&[(0, 0.0, 10.0), (1, 3.0, 4.0)]));
}

#[test]
fn aggregation_preserves_rows_for_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ds = synthetic::gaussian_classes(2, 150, 3, 3, 0.5, 1).unwrap();
    let mut checked = 0;
    while checked < 100 {
        // Two random boxes around the same random row subset's bounding box.
        let r = rng.random_range(0..ds.n_rows());
        let s = rng.random_range(0..ds.n_rows());
        let rows = scan_selectors(&bounding_box(&[r, s], &ds), &ds);
        let tight = bounding_box(&rows, &ds);
        let widen = |rng: &mut ChaCha8Rng| {
            let mut c = Conjunction::new();
            for (&v, &(lo, hi)) in &tight {
                if rng.random_bool(0.7) {
                    c.insert(v, Interval::new(lo - rng.random_range(0.0..0.05), hi + rng.random_range(0.0..0.05)));
                }
            }
            c
        };
        let a = widen(&mut rng);
        let b = widen(&mut rng);
        if scan(&a, &ds) != rows || scan(&b, &ds) != rows {
            continue;
        }
        let merged = a.intersect(&b, &ds).unwrap();
        assert_eq!(scan(&merged, &ds), rows);
        checked += 1;
    }
}

#[test]
fn selection_matches_straight_line_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..50 {
        let n = rng.random_range(4..=30);
        let m = rng.random_range(1..=3);
        let j = rng.random_range(2..=3);
        let ds = random_dataset(&mut rng, n, m, j);
        let raw = mine(&ds, rng.random_range(1..=12), case).unwrap();
        let (set, stats) = select_and_aggregate(&raw, &ds).unwrap();
        assert_matches_reference(&set, &greedy_reference(&raw, &ds));
        assert_eq!(stats.selected + stats.aggregated + stats.discarded, raw.len());
    }
}

#[test]
fn selection_matches_reference_on_impure_and_overlapping_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let ds = random_dataset(&mut rng, 15, 2, 2);
        let raw: Vec<RawPattern> = (0..40)
            .map(|id| {
                let r = rng.random_range(0..ds.n_rows());
                let s = rng.random_range(0..ds.n_rows());
                let bbox = bounding_box(&[r, s], &ds);
                let c = Conjunction::from_selectors(bbox.iter().map(|(&v, &(lo, hi))| (v, Interval::new(lo, hi))));
                let rows = scan(&c, &ds);
                RawPattern {
                    id,
                    class_id: ds.label(r),
                    supported_rows: rows,
                    selectors: c,
                    aggregated_from: 1,
                }
            })
            .collect();
        let (set, _) = select_and_aggregate(&raw, &ds).unwrap();
        assert_matches_reference(&set, &greedy_reference(&raw, &ds));
    }
}

#[test]
fn exhaustive_enumeration_yields_tight_disjoint_boxes() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        let n = rng.random_range(4..=12);
        let m = rng.random_range(1..=2);
        let ds = random_dataset(&mut rng, n, m, 2);
        let mut raw = Vec::new();
        for sel in enumerate_conjunctions(&ds) {
            let rows = scan_selectors(&sel, &ds);
            let Some(&first) = rows.first() else { continue };
            let class = ds.label(first);
            if rows.iter().any(|&r| ds.label(r) != class) {
                continue;
            }
            raw.push(RawPattern {
                id: raw.len(),
                class_id: class,
                supported_rows: rows,
                selectors: Conjunction::from_selectors(sel.iter().map(|(&v, &(lo, hi))| (v, Interval::new(lo, hi)))),
                aggregated_from: 1,
            });
        }
        let (set, _) = select_and_aggregate(&raw, &ds).unwrap();
        let reference = greedy_reference(&raw, &ds);
        assert_matches_reference(&set, &reference);
        for p in &set.patterns {
            assert_eq!(selectors_of(&p.selectors), bounding_box(&p.supported_rows, &ds));
        }
        assert_eq!(set.coverage(), 1.0);
    }
}

#[test]
fn selected_patterns_are_jeps_with_disjoint_rows() {
    for seed in 0..5 {
        let ds = synthetic::gaussian_classes(seed, 300, 4, 4, 0.6, 2).unwrap();
        let raw = mine(&ds, 16, seed).unwrap();
        let (set, _) = select_and_aggregate(&raw, &ds).unwrap();
        let mut owner = vec![0usize; ds.n_rows()];
        for p in &set.patterns {
            assert!(p.is_jep());
            assert_eq!(scan(&p.selectors, &ds), p.supported_rows);
            for &r in &p.supported_rows {
                owner[r] += 1;
            }
        }
        assert!(owner.iter().all(|&c| c <= 1));
        set.verify(&ds).unwrap();
    }
}

#[test]
fn pivot_supports_are_nonincreasing() {
    let ds = synthetic::five_class(3);
    let raw = mine(&ds, 32, 3).unwrap();
    let (set, _) = select_and_aggregate(&raw, &ds).unwrap();
    assert!(set.patterns.windows(2).all(|w| w[0].support >= w[1].support));
}

#[test]
fn selection_is_idempotent() {
    let ds = synthetic::five_class(6);
    let raw = mine(&ds, 16, 6).unwrap();
    let (set, _) = select_and_aggregate(&raw, &ds).unwrap();
    let (again, stats) = select_and_aggregate(&set.to_raw(), &ds).unwrap();
    assert_eq!(again, set);
    assert_eq!(stats.aggregated + stats.discarded, 0);
}

#[test]
fn empty_input_gives_an_empty_set() {
    let (set, stats) = select_and_aggregate(&[], &tiny()).unwrap();
    assert!(set.is_empty());
    assert_eq!(stats.raw, 0);
}

#[test]
fn fet_is_computed_for_selected_patterns() {
    let ds = synthetic::five_class(0);
    let raw = mine(&ds, 8, 0).unwrap();
    let (set, _) = select_and_aggregate(&raw, &ds).unwrap();
    let sizes = ds.class_sizes();
    for p in &set.patterns {
        let a = p.supported_rows.len() as u64;
        let target = sizes[p.class_id] as u64;
        let other = ds.n_rows() as u64 - target;
        assert!((p.fet_p - fisher_greater_exact(a, 0, target - a, other)).abs() < 1e-9);
    }
}
