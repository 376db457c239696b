//! Independent reference implementations used as test oracles. None of them
//! calls into the code paths they check.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use vax_core::{Conjunction, Dataset, RawPattern};

pub type Selectors = BTreeMap<usize, (f64, f64)>;

pub fn selectors_of(c: &Conjunction) -> Selectors {
    c.iter().map(|(v, iv)| (v, (iv.low, iv.high))).collect()
}

/// Rows satisfying every selector, by direct comparison.
pub fn scan_selectors(sel: &Selectors, ds: &Dataset) -> Vec<usize> {
    (0..ds.n_rows())
        .filter(|&r| sel.iter().all(|(&v, &(lo, hi))| lo <= ds.value(r, v) && ds.value(r, v) <= hi))
        .collect()
}

pub fn scan(c: &Conjunction, ds: &Dataset) -> Vec<usize> {
    scan_selectors(&selectors_of(c), ds)
}

fn choose(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `P(X >= a)` for the table `[[a, b], [c, d]]` with columns target/other,
/// summed exactly over rationals.
pub fn fisher_greater_exact(a: u64, b: u64, c: u64, d: u64) -> f64 {
    let n = a + b + c + d;
    let target = a + c;
    let drawn = a + b;
    let mut num = BigUint::zero();
    for x in a..=target.min(drawn) {
        if drawn - x <= n - target {
            num += choose(target, x) * choose(n - target, drawn - x);
        }
    }
    let p = BigRational::new(num.into(), choose(n, drawn).into());
    p.to_f64().unwrap()
}

/// Class-relative support as an exact fraction.
fn exact_support(rows: &[usize], class: usize, ds: &Dataset) -> Ratio<usize> {
    let size = ds.labels().iter().filter(|&&l| l == class).count();
    let hits = rows.iter().filter(|&&r| ds.label(r) == class).count();
    Ratio::new(hits, size)
}

fn merge(a: &Selectors, b: &Selectors, ds: &Dataset) -> Selectors {
    let mut out = Selectors::new();
    for v in a.keys().chain(b.keys()) {
        let (min, max) = ds.variable_range(*v);
        let (alo, ahi) = a.get(v).copied().unwrap_or((min, max));
        let (blo, bhi) = b.get(v).copied().unwrap_or((min, max));
        let lo = if alo > blo { alo } else { blo };
        let hi = if ahi < bhi { ahi } else { bhi };
        assert!(lo <= hi, "empty intersection in the reference");
        out.insert(*v, (lo, hi));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefPattern {
    pub id: usize,
    pub class: usize,
    pub rows: Vec<usize>,
    pub selectors: Selectors,
    pub aggregated_from: usize,
}

/// The greedy selection written exactly as the pseudocode reads: sort by
/// decreasing support, pop candidates, skip impure ones and ones touching
/// a claimed row, fold every later candidate with the same rows into the
/// pivot.
pub fn greedy_reference(raw: &[RawPattern], ds: &Dataset) -> Vec<RefPattern> {
    let mut queue: Vec<RefPattern> = raw
        .iter()
        .map(|p| RefPattern {
            id: p.id,
            class: p.class_id,
            rows: scan(&p.selectors, ds),
            selectors: selectors_of(&p.selectors),
            aggregated_from: p.aggregated_from,
        })
        .collect();
    queue.sort_by_key(|p| (Reverse(exact_support(&p.rows, p.class, ds)), Reverse(p.rows.len()), p.class, p.id));

    let mut claimed: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    while !queue.is_empty() {
        let mut pivot = queue.remove(0);
        let pure = !pivot.rows.is_empty() && pivot.rows.iter().all(|&r| ds.label(r) == pivot.class);
        if !pure {
            continue;
        }
        if pivot.rows.iter().any(|r| claimed.contains(r)) {
            continue;
        }
        let mut i = 0;
        while i < queue.len() {
            if queue[i].rows == pivot.rows {
                let other = queue.remove(i);
                pivot.selectors = merge(&pivot.selectors, &other.selectors, ds);
                pivot.aggregated_from += other.aggregated_from;
            } else {
                i += 1;
            }
        }
        claimed.extend(&pivot.rows);
        out.push(pivot);
    }
    out
}

/// Every conjunction of closed intervals with observed-value bounds, plus
/// "no selector", over every variable.
pub fn enumerate_conjunctions(ds: &Dataset) -> Vec<Selectors> {
    let mut all = vec![Selectors::new()];
    for v in 0..ds.n_vars() {
        let mut values: Vec<f64> = (0..ds.n_rows()).map(|r| ds.value(r, v)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let mut next = Vec::new();
        for base in &all {
            next.push(base.clone());
            for i in 0..values.len() {
                for j in i..values.len() {
                    let mut s = base.clone();
                    s.insert(v, (values[i], values[j]));
                    next.push(s);
                }
            }
        }
        all = next;
    }
    all
}

pub fn bounding_box(rows: &[usize], ds: &Dataset) -> Selectors {
    (0..ds.n_vars())
        .map(|v| {
            let lo = rows.iter().map(|&r| ds.value(r, v)).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|&r| ds.value(r, v)).fold(f64::NEG_INFINITY, f64::max);
            (v, (lo, hi))
        })
        .collect()
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean silhouette with singleton-group rows counted as 0, from per-point
/// mean intra- and nearest inter-group distances.
pub fn silhouette_reference(points: &[Vec<f64>], groups: &[usize]) -> f64 {
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut by_group: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for j in 0..n {
            if j != i {
                by_group.entry(groups[j]).or_default().push(euclid(&points[i], &points[j]));
            }
        }
        let Some(own) = by_group.get(&groups[i]) else {
            continue;
        };
        let a = own.iter().sum::<f64>() / own.len() as f64;
        let b = by_group
            .iter()
            .filter(|(g, _)| **g != groups[i])
            .map(|(_, d)| d.iter().sum::<f64>() / d.len() as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

/// Classical MDS by power iteration with deflation on the double-centered
/// Gram matrix, using plain nested vectors.
pub fn power_mds(points: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let n = points.len();
    let mut b = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            b[i][j] = euclid(&points[i], &points[j]).powi(2);
        }
    }
    let row: Vec<f64> = b.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let all = row.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            b[i][j] = -0.5 * (b[i][j] - row[i] - row[j] + all);
        }
    }
    let mut coords = vec![[0.0; 2]; n];
    for axis in 0..2 {
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.7).sin()).collect();
        let mut value = 0.0;
        for _ in 0..20_000 {
            let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| b[i][j] * v[j]).sum()).collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
            let delta: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
            v = next;
            value = norm;
            if delta < 1e-15 {
                break;
            }
        }
        for (c, x) in coords.iter_mut().zip(&v) {
            c[axis] = x * value.sqrt();
        }
        for i in 0..n {
            for j in 0..n {
                b[i][j] -= value * v[i] * v[j];
            }
        }
    }
    coords
}

pub fn condensed(points: &[Vec<f64>]) -> Vec<f64> {
    let mut d = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d.push(euclid(&points[i], &points[j]));
        }
    }
    d
}

pub fn stress_reference(high: &[f64], low: &[f64]) -> f64 {
    let num: f64 = high.iter().zip(low).map(|(h, l)| (h - l).powi(2)).sum();
    let den: f64 = high.iter().map(|h| h * h).sum();
    (num / den).sqrt()
}
