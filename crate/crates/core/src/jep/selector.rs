//! Closed-interval selectors and their conjunctions.

use std::collections::BTreeMap;

use crate::dataset::Dataset;
use crate::scalar::Scalar;

/// Closed real interval `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub low: T,
    pub high: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(low: T, high: T) -> Self {
        Interval { low, high }
    }

    #[inline]
    pub fn contains(&self, x: T) -> bool {
        self.low <= x && x <= self.high
    }

    /// `None` when the intervals do not meet.
    pub fn intersect(&self, other: &Interval<T>) -> Option<Interval<T>> {
        let low = self.low.max(other.low);
        let high = self.high.min(other.high);
        (low <= high).then_some(Interval { low, high })
    }
}

/// Conjunction of per-variable interval selectors, keyed by variable index.
/// An empty conjunction is satisfied by every row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Conjunction<T> {
    selectors: BTreeMap<usize, Interval<T>>,
}

impl<T: Scalar> Conjunction<T> {
    pub fn new() -> Self {
        Conjunction {
            selectors: BTreeMap::new(),
        }
    }

    pub fn from_selectors(selectors: impl IntoIterator<Item = (usize, Interval<T>)>) -> Self {
        Conjunction {
            selectors: selectors.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, var: usize, interval: Interval<T>) {
        self.selectors.insert(var, interval);
    }

    pub fn get(&self, var: usize) -> Option<&Interval<T>> {
        self.selectors.get(&var)
    }

    pub fn has(&self, var: usize) -> bool {
        self.selectors.contains_key(&var)
    }

    pub fn len(&self) -> usize {
        self.selectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selectors.is_empty()
    }

    /// Selectors in ascending variable order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Interval<T>)> {
        self.selectors.iter().map(|(&v, i)| (v, i))
    }

    pub fn variables(&self) -> impl Iterator<Item = usize> + '_ {
        self.selectors.keys().copied()
    }

    #[inline]
    pub fn matches(&self, row: &[T]) -> bool {
        self.selectors.iter().all(|(&v, i)| i.contains(row[v]))
    }

    /// Rows of `rows` satisfying every selector.
    pub fn matching_rows(&self, ds: &Dataset<T>, rows: &[usize]) -> Vec<usize> {
        rows.iter().copied().filter(|&r| self.matches(ds.row(r))).collect()
    }

    pub fn count(&self, ds: &Dataset<T>, rows: &[usize]) -> usize {
        rows.iter().filter(|&&r| self.matches(ds.row(r))).count()
    }

    /// Rows of the whole dataset satisfying every selector.
    pub fn scan(&self, ds: &Dataset<T>) -> Vec<usize> {
        (0..ds.n_rows()).filter(|&r| self.matches(ds.row(r))).collect()
    }

    /// Per-variable intersection. A variable selected by only one side is
    /// intersected against the variable's observed `[min, max]`. Returns the
    /// first variable whose intersection is empty on failure.
    pub fn intersect(&self, other: &Conjunction<T>, ds: &Dataset<T>) -> Result<Conjunction<T>, usize> {
        let mut out = BTreeMap::new();
        let vars = self.selectors.keys().chain(other.selectors.keys());
        for &v in vars {
            if out.contains_key(&v) {
                continue;
            }
            let (min, max) = ds.variable_range(v);
            let full = Interval::new(min, max);
            let a = self.selectors.get(&v).unwrap_or(&full);
            let b = other.selectors.get(&v).unwrap_or(&full);
            let merged = a.intersect(b).ok_or(v)?;
            out.insert(v, merged);
        }
        Ok(Conjunction { selectors: out })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds() -> Dataset<f64> {
        Dataset::from_rows(
            vec![vec![-5.0, 3.0], vec![50.0, 4.0], vec![0.0, 0.0]],
            vec![0, 1, 0],
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    #[test]
    fn interval_intersection() {
        let a = Interval::new(0.0, 10.0);
        assert_eq!(a.intersect(&Interval::new(5.0, 20.0)), Some(Interval::new(5.0, 10.0)));
        assert_eq!(a.intersect(&Interval::new(11.0, 20.0)), None);
        assert_eq!(a.intersect(&Interval::new(10.0, 20.0)), Some(Interval::new(10.0, 10.0)));
    }

    #[test]
    fn same_variable_selectors_intersect() {
        let d = ds();
        let a = Conjunction::from_selectors([(0, Interval::new(0.0, 10.0))]);
        let b = Conjunction::from_selectors([(0, Interval::new(5.0, 20.0))]);
        let m = a.intersect(&b, &d).unwrap();
        assert_eq!(m, Conjunction::from_selectors([(0, Interval::new(5.0, 10.0))]));
    }

    #[test]
    fn missing_selector_uses_full_range() {
        let d = ds();
        let a = Conjunction::from_selectors([(0, Interval::new(0.0, 10.0))]);
        let b = Conjunction::from_selectors([(1, Interval::new(3.0, 4.0))]);
        let m = a.intersect(&b, &d).unwrap();
        assert_eq!(
            m,
            Conjunction::from_selectors([(0, Interval::new(0.0, 10.0)), (1, Interval::new(3.0, 4.0))])
        );
    }

    #[test]
    fn empty_conjunction_matches_everything() {
        let d = ds();
        assert_eq!(Conjunction::new().scan(&d), vec![0, 1, 2]);
    }
}
