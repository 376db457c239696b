//! Support, growth rate, confidence and Fisher's exact test for a pattern
//! against a pair of disjoint row partitions.

use crate::dataset::Dataset;
use crate::error::{Result, VaxError};
use crate::jep::selector::Conjunction;
use crate::scalar::Scalar;

/// Fraction of `rows` satisfying every selector.
pub fn support<T: Scalar>(pattern: &Conjunction<T>, ds: &Dataset<T>, rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Err(VaxError::EmptyPartition);
    }
    Ok(pattern.count(ds, rows) as f64 / rows.len() as f64)
}

fn check_disjoint(n: usize, a: &[usize], b: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    for &r in a {
        seen[r] = true;
    }
    if b.iter().any(|&r| seen[r]) {
        return Err(VaxError::OverlappingPartitions);
    }
    Ok(())
}

/// Ratio of target support to complement support; `0` when both are zero
/// and `f64::INFINITY` when only the complement support is zero.
pub fn growth_rate<T: Scalar>(
    pattern: &Conjunction<T>,
    ds: &Dataset<T>,
    target: &[usize],
    complement: &[usize],
) -> Result<f64> {
    check_disjoint(ds.n_rows(), target, complement)?;
    let st = support(pattern, ds, target)?;
    let sc = support(pattern, ds, complement)?;
    Ok(growth_rate_from_supports(st, sc))
}

pub fn growth_rate_from_supports(target: f64, complement: f64) -> f64 {
    match (target == 0.0, complement == 0.0) {
        (true, true) => 0.0,
        (false, true) => f64::INFINITY,
        _ => target / complement,
    }
}

/// `count(target) / (count(target) + count(complement))`.
pub fn confidence<T: Scalar>(
    pattern: &Conjunction<T>,
    ds: &Dataset<T>,
    target: &[usize],
    complement: &[usize],
) -> Result<f64> {
    check_disjoint(ds.n_rows(), target, complement)?;
    let ct = pattern.count(ds, target);
    let cc = pattern.count(ds, complement);
    confidence_from_counts(ct, cc)
}

pub fn confidence_from_counts(target: usize, complement: usize) -> Result<f64> {
    if target + complement == 0 {
        return Err(VaxError::UndefinedConfidence);
    }
    Ok(target as f64 / (target + complement) as f64)
}

/// 2×2 table of pattern support against class membership.
///
/// |               | target | other |
/// |---------------|--------|-------|
/// | supported     | `a`    | `b`   |
/// | not supported | `c`    | `d`   |
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContingencyTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        ContingencyTable { a, b, c, d }
    }

    /// One-sided p-value for over-representation of the target class among
    /// supported rows: `P(X >= a)` under the hypergeometric null with the
    /// table margins fixed.
    pub fn fisher_greater(&self) -> Result<f64> {
        let target = self.a + self.c;
        let other = self.b + self.d;
        if target == 0 {
            return Err(VaxError::DegenerateTable("target partition is empty"));
        }
        if other == 0 {
            return Err(VaxError::DegenerateTable("complement partition is empty"));
        }
        let total = target + other;
        let drawn = self.a + self.b;
        Ok(hypergeometric_upper_tail(total, target, drawn, self.a))
    }
}

/// Fisher's exact test of `pattern` for the `target` class against `complement`.
pub fn fisher_exact<T: Scalar>(
    pattern: &Conjunction<T>,
    ds: &Dataset<T>,
    target: &[usize],
    complement: &[usize],
) -> Result<f64> {
    check_disjoint(ds.n_rows(), target, complement)?;
    let a = pattern.count(ds, target) as u64;
    let b = pattern.count(ds, complement) as u64;
    ContingencyTable::new(a, b, target.len() as u64 - a, complement.len() as u64 - b).fisher_greater()
}

/// `ln C(n, k)` as a sum of logarithms of ratios.
fn ln_choose(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// `C(n, k)` when it fits in a `u128`.
fn choose_exact(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = acc.checked_mul((n - k) as u128 + i)? / i;
    }
    Some(acc)
}

/// Hypergeometric pmf. Correctly rounded while the integers involved are
/// exact in an `f64`, log-space otherwise.
fn hypergeometric_pmf(population: u64, successes: u64, draws: u64, k: u64) -> f64 {
    const EXACT: u128 = 1 << 53;
    let failures = population - successes;
    let exact = choose_exact(successes, k)
        .zip(choose_exact(failures, draws - k))
        .and_then(|(a, b)| a.checked_mul(b))
        .zip(choose_exact(population, draws));
    match exact {
        Some((num, den)) if num <= EXACT && den <= EXACT => num as f64 / den as f64,
        _ => (ln_choose(successes, k) + ln_choose(failures, draws - k) - ln_choose(population, draws)).exp(),
    }
}

/// `P(X >= x)` for `X ~ Hypergeometric(population, successes, draws)`.
pub fn hypergeometric_upper_tail(population: u64, successes: u64, draws: u64, x: u64) -> f64 {
    let failures = population - successes;
    let lo = draws.saturating_sub(failures);
    let hi = draws.min(successes);
    if x <= lo {
        return 1.0;
    }
    if x > hi {
        return 0.0;
    }
    let pmf = |k: u64| hypergeometric_pmf(population, successes, draws, k);
    // Sum from the far tail towards x using the pmf ratio recurrence, so the
    // smallest terms are added first.
    let mut term = pmf(hi);
    let mut total = term;
    let mut k = hi;
    while k > x {
        // pmf(k-1) / pmf(k)
        let ratio = (k as f64 * (failures + k - draws) as f64)
            / ((successes - k + 1) as f64 * (draws - k + 1) as f64);
        term *= ratio;
        if !term.is_finite() || term == 0.0 {
            // Underflow at the tail start; recompute directly.
            term = pmf(k - 1);
        }
        total += term;
        k -= 1;
    }
    total.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jep::selector::Interval;

    #[test]
    fn perfect_association() {
        let p = ContingencyTable::new(10, 0, 0, 10).fisher_greater().unwrap();
        let expected = 1.0 / 184_756.0;
        assert!((p - expected).abs() < 1e-15, "{p}");
    }

    #[test]
    fn symmetric_table_is_not_significant() {
        let p = ContingencyTable::new(5, 5, 5, 5).fisher_greater().unwrap();
        assert!(p > 0.05);
    }

    #[test]
    fn degenerate_tables() {
        assert!(ContingencyTable::new(0, 3, 0, 4).fisher_greater().is_err());
        assert!(ContingencyTable::new(3, 0, 4, 0).fisher_greater().is_err());
    }

    #[test]
    fn growth_rate_cases() {
        assert_eq!(growth_rate_from_supports(1.0, 0.0), f64::INFINITY);
        assert_eq!(growth_rate_from_supports(0.0, 0.0), 0.0);
        assert_eq!(growth_rate_from_supports(0.5, 0.25), 2.0);
    }

    #[test]
    fn confidence_cases() {
        assert_eq!(confidence_from_counts(100, 0).unwrap(), 1.0);
        assert_eq!(confidence_from_counts(7, 7).unwrap(), 0.5);
        assert!(matches!(confidence_from_counts(0, 0), Err(VaxError::UndefinedConfidence)));
    }

    #[test]
    fn partition_level_metrics() {
        let ds = Dataset::from_rows(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![0, 0, 1, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let p = Conjunction::from_selectors([(0, Interval::new(0.0, 1.5))]);
        let (t, c) = (vec![0, 1], vec![2, 3]);
        assert_eq!(support(&p, &ds, &t).unwrap(), 1.0);
        assert_eq!(growth_rate(&p, &ds, &c, &t).unwrap(), 0.0);
        assert_eq!(growth_rate(&p, &ds, &t, &c).unwrap(), f64::INFINITY);
        assert_eq!(confidence(&p, &ds, &t, &c).unwrap(), 1.0);
        assert!(matches!(support(&p, &ds, &[]), Err(VaxError::EmptyPartition)));
        assert!(matches!(
            growth_rate(&p, &ds, &[0, 1], &[1, 2]),
            Err(VaxError::OverlappingPartitions)
        ));
        let fet = fisher_exact(&p, &ds, &t, &c).unwrap();
        assert!((fet - 1.0 / 6.0).abs() < 1e-12);
    }
}
