//! Patterns, their metrics, and greedy JEP selection with aggregation.

pub mod metrics;
pub mod selector;

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::dataset::Dataset;
use crate::error::{Result, VaxError};
use crate::forest::RawPattern;
use crate::scalar::Scalar;

use self::metrics::{confidence_from_counts, growth_rate_from_supports, ContingencyTable};
use self::selector::Conjunction;

/// A selected, aggregated pattern with cached metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern<T> {
    pub id: usize,
    pub selectors: Conjunction<T>,
    pub class_id: usize,
    /// Sorted row indices.
    pub supported_rows: Vec<usize>,
    /// Fraction of the class's rows supported.
    pub support: f64,
    pub growth_rate: f64,
    pub confidence: f64,
    pub fet_p: f64,
    pub aggregated_from: usize,
}

impl<T: Scalar> Pattern<T> {
    pub fn is_jep(&self) -> bool {
        self.confidence == 1.0 && self.growth_rate == f64::INFINITY
    }

    pub fn to_raw(&self) -> RawPattern<T> {
        RawPattern {
            id: self.id,
            selectors: self.selectors.clone(),
            class_id: self.class_id,
            supported_rows: self.supported_rows.clone(),
            aggregated_from: self.aggregated_from,
        }
    }
}

/// Ordered, pairwise-disjoint set of selected JEPs.
#[derive(Debug, Clone, PartialEq)]
pub struct JepSet<T> {
    pub patterns: Vec<Pattern<T>>,
    pub n_rows: usize,
    /// Prefix coverage in list order.
    pub cumulative_coverage: Vec<f64>,
}

impl<T: Scalar> JepSet<T> {
    pub fn new(patterns: Vec<Pattern<T>>, n_rows: usize) -> Self {
        let mut total = 0usize;
        let cumulative_coverage = patterns
            .iter()
            .map(|p| {
                total += p.supported_rows.len();
                total as f64 / n_rows as f64
            })
            .collect();
        JepSet {
            patterns,
            n_rows,
            cumulative_coverage,
        }
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Fraction of all rows supported by some pattern.
    pub fn coverage(&self) -> f64 {
        self.cumulative_coverage.last().copied().unwrap_or(0.0)
    }

    pub fn get(&self, id: usize) -> Option<&Pattern<T>> {
        self.patterns.iter().find(|p| p.id == id)
    }

    /// Pattern index per row, `None` for unsupported rows.
    pub fn row_assignment(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.n_rows];
        for (i, p) in self.patterns.iter().enumerate() {
            for &r in &p.supported_rows {
                out[r] = Some(i);
            }
        }
        out
    }

    pub fn to_raw(&self) -> Vec<RawPattern<T>> {
        self.patterns.iter().map(Pattern::to_raw).collect()
    }

    /// Re-derives every pattern's rows by scanning and checks purity and
    /// disjointness.
    pub fn verify(&self, ds: &Dataset<T>) -> Result<()> {
        let mut owner = vec![false; ds.n_rows()];
        for p in &self.patterns {
            if p.selectors.scan(ds) != p.supported_rows {
                return Err(VaxError::Inconsistent(format!(
                    "pattern {} selectors do not reproduce its supported rows",
                    p.id
                )));
            }
            if p.supported_rows.iter().any(|&r| ds.label(r) != p.class_id) {
                return Err(VaxError::Inconsistent(format!("pattern {} is not pure", p.id)));
            }
            for &r in &p.supported_rows {
                if std::mem::replace(&mut owner[r], true) {
                    return Err(VaxError::Inconsistent(format!("row {r} is supported twice")));
                }
            }
        }
        Ok(())
    }
}

/// Outcome counts of one selection run; `selected + aggregated + discarded`
/// equals the number of input patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct SelectionStats {
    pub raw: usize,
    pub selected: usize,
    pub aggregated: usize,
    pub discarded: usize,
}

/// Per-pattern counts needed for ordering and metrics.
#[derive(Debug, Clone, Copy)]
struct Counts {
    in_class: usize,
    out_class: usize,
    class_size: usize,
}

fn counts<T: Scalar>(p: &RawPattern<T>, ds: &Dataset<T>, class_sizes: &[usize]) -> Counts {
    let in_class = p
        .supported_rows
        .iter()
        .filter(|&&r| ds.label(r) == p.class_id)
        .count();
    Counts {
        in_class,
        out_class: p.supported_rows.len() - in_class,
        class_size: class_sizes[p.class_id],
    }
}

/// Candidate order: support descending, then row count descending, then
/// class index, then pattern id.
fn candidate_order<T>(a: (&RawPattern<T>, Counts), b: (&RawPattern<T>, Counts)) -> Ordering {
    let (pa, ca) = a;
    let (pb, cb) = b;
    let lhs = ca.in_class as u128 * cb.class_size as u128;
    let rhs = cb.in_class as u128 * ca.class_size as u128;
    rhs.cmp(&lhs)
        .then_with(|| pb.supported_rows.len().cmp(&pa.supported_rows.len()))
        .then_with(|| pa.class_id.cmp(&pb.class_id))
        .then_with(|| pa.id.cmp(&pb.id))
}

/// Greedy JEP selection: walk candidates by decreasing support, drop
/// non-pure ones and ones touching an already claimed row, and merge every
/// pattern with the pivot's exact row set into the pivot.
pub fn select_and_aggregate<T: Scalar>(raw: &[RawPattern<T>], ds: &Dataset<T>) -> Result<(JepSet<T>, SelectionStats)> {
    let class_sizes = ds.class_sizes();
    let n = ds.n_rows();
    let counts: Vec<Counts> = raw.iter().map(|p| counts(p, ds, &class_sizes)).collect();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| candidate_order((&raw[a], counts[a]), (&raw[b], counts[b])));

    // Same-row-set groups, members listed in candidate order.
    let mut groups: HashMap<&[usize], Vec<usize>> = HashMap::new();
    for &i in &order {
        groups.entry(raw[i].supported_rows.as_slice()).or_default().push(i);
    }

    let mut claimed = vec![false; n];
    let mut consumed = vec![false; raw.len()];
    let mut stats = SelectionStats {
        raw: raw.len(),
        ..Default::default()
    };
    let mut patterns = Vec::new();
    for &i in &order {
        if consumed[i] {
            continue;
        }
        consumed[i] = true;
        let c = counts[i];
        let p = &raw[i];
        if p.supported_rows.is_empty() || c.out_class != 0 || p.supported_rows.iter().any(|&r| claimed[r]) {
            stats.discarded += 1;
            continue;
        }
        for &r in &p.supported_rows {
            claimed[r] = true;
        }
        let mut selectors = p.selectors.clone();
        let mut aggregated_from = p.aggregated_from;
        for &j in &groups[p.supported_rows.as_slice()] {
            if consumed[j] {
                continue;
            }
            consumed[j] = true;
            selectors = selectors.intersect(&raw[j].selectors, ds).map_err(|v| {
                VaxError::Inconsistent(format!(
                    "patterns {} and {} share rows but their selectors on variable {v} are disjoint",
                    p.id, raw[j].id
                ))
            })?;
            aggregated_from += raw[j].aggregated_from;
            stats.aggregated += 1;
        }
        stats.selected += 1;
        patterns.push(finish(p, selectors, aggregated_from, c, n)?);
    }
    Ok((JepSet::new(patterns, n), stats))
}

fn finish<T: Scalar>(p: &RawPattern<T>, selectors: Conjunction<T>, aggregated_from: usize, c: Counts, n: usize) -> Result<Pattern<T>> {
    let complement = n - c.class_size;
    let support = c.in_class as f64 / c.class_size as f64;
    let complement_support = c.out_class as f64 / complement as f64;
    let table = ContingencyTable::new(
        c.in_class as u64,
        c.out_class as u64,
        (c.class_size - c.in_class) as u64,
        (complement - c.out_class) as u64,
    );
    Ok(Pattern {
        id: p.id,
        selectors,
        class_id: p.class_id,
        supported_rows: p.supported_rows.clone(),
        support,
        growth_rate: growth_rate_from_supports(support, complement_support),
        confidence: confidence_from_counts(c.in_class, c.out_class)?,
        fet_p: table.fisher_greater()?,
        aggregated_from,
    })
}

#[cfg(test)]
mod tests {
    use super::selector::Interval;
    use super::*;

    fn ds() -> Dataset<f64> {
        Dataset::from_rows(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![0, 0, 1, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    fn raw(id: usize, low: f64, high: f64, class_id: usize, rows: Vec<usize>) -> RawPattern<f64> {
        RawPattern {
            id,
            selectors: Conjunction::from_selectors([(0, Interval::new(low, high))]),
            class_id,
            supported_rows: rows,
            aggregated_from: 1,
        }
    }

    #[test]
    fn identical_patterns_merge() {
        let d = ds();
        let p = raw(0, 0.0, 1.5, 0, vec![0, 1]);
        let mut q = p.clone();
        q.id = 1;
        let (set, stats) = select_and_aggregate(&[p.clone(), q], &d).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.patterns[0].aggregated_from, 2);
        assert_eq!(set.patterns[0].selectors, p.selectors);
        assert_eq!(set.patterns[0].id, 0);
        assert_eq!(stats, SelectionStats { raw: 2, selected: 1, aggregated: 1, discarded: 0 });
    }

    #[test]
    fn impure_and_overlapping_candidates_are_discarded() {
        let d = ds();
        let raws = vec![
            raw(0, 0.0, 3.0, 0, vec![0, 1, 2, 3]),
            raw(1, 0.0, 1.0, 0, vec![0, 1]),
            raw(2, 1.0, 1.0, 0, vec![1]),
            raw(3, 2.0, 3.0, 1, vec![2, 3]),
        ];
        let (set, stats) = select_and_aggregate(&raws, &d).unwrap();
        assert_eq!(set.patterns.iter().map(|p| p.id).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(stats.discarded, 2);
        assert_eq!(set.coverage(), 1.0);
        assert!(set.patterns.iter().all(Pattern::is_jep));
        set.verify(&d).unwrap();
    }

    #[test]
    fn metrics_of_selected_pattern() {
        let d = ds();
        let (set, _) = select_and_aggregate(&[raw(5, 0.0, 0.0, 0, vec![0])], &d).unwrap();
        let p = &set.patterns[0];
        assert_eq!(p.support, 0.5);
        assert_eq!(p.confidence, 1.0);
        assert_eq!(p.growth_rate, f64::INFINITY);
        // P(X >= 1) drawing 1 of 4 with 2 successes
        assert!((p.fet_p - 0.5).abs() < 1e-12);
        assert_eq!(set.cumulative_coverage, vec![0.25]);
    }

    #[test]
    fn empty_input() {
        let (set, stats) = select_and_aggregate::<f64>(&[], &ds()).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.coverage(), 0.0);
        assert_eq!(stats.raw, 0);
    }

    #[test]
    fn disjoint_selectors_on_equal_rows_are_inconsistent() {
        let d = ds();
        let a = raw(0, 0.0, 0.5, 0, vec![0]);
        let b = raw(1, 0.7, 1.0, 0, vec![0]);
        let err = select_and_aggregate(&[a, b], &d).unwrap_err();
        assert!(err.is_internal());
    }
}
