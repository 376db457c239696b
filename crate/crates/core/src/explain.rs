//! Matrix view-model: histograms, variable importance, coverage, row
//! ordering and filtering.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Result, VaxError};
use crate::jep::{JepSet, Pattern};
use crate::scalar::Scalar;

pub const FET_ALPHA: f64 = 0.05;
pub const MATRIX_SCHEMA_VERSION: u32 = 1;

/// Quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Freedman–Diaconis bin count: width `2 IQR n^(-1/3)` over the value range.
pub fn freedman_diaconis_bins<T: Scalar>(values: &[T]) -> Result<usize> {
    if values.len() < 2 {
        return Err(VaxError::TooFewPoints {
            needed: 2,
            got: values.len(),
        });
    }
    let mut v: Vec<f64> = values.iter().map(|x| x.as_f64()).collect();
    v.sort_by(|a, b| a.total_cmp(b));
    let range = v[v.len() - 1] - v[0];
    let iqr = quantile(&v, 0.75) - quantile(&v, 0.25);
    if iqr <= 0.0 || range <= 0.0 {
        return Ok(1);
    }
    let width = 2.0 * iqr / (v.len() as f64).cbrt();
    Ok(((range / width).ceil() as usize).max(1))
}

/// Uniform bins over a variable's observed range.
#[derive(Debug, Clone, PartialEq)]
pub struct Binning {
    pub min: f64,
    pub max: f64,
    pub bins: usize,
}

impl Binning {
    pub fn new(min: f64, max: f64, bins: usize) -> Self {
        let bins = if max <= min { 1 } else { bins.max(1) };
        Binning { min, max, bins }
    }

    /// Strictly increasing edges, `bins + 1` of them. A constant variable
    /// gets one unit-wide bin centred on its value.
    pub fn edges(&self) -> Vec<f64> {
        if self.max <= self.min {
            return vec![self.min - 0.5, self.min + 0.5];
        }
        let w = (self.max - self.min) / self.bins as f64;
        let mut e: Vec<f64> = (0..self.bins).map(|i| self.min + i as f64 * w).collect();
        e.push(self.max);
        e
    }

    pub fn index(&self, x: f64) -> usize {
        if self.max <= self.min {
            return 0;
        }
        let w = (self.max - self.min) / self.bins as f64;
        (((x - self.min) / w).floor().max(0.0) as usize).min(self.bins - 1)
    }

    pub fn count<I: IntoIterator<Item = f64>>(&self, values: I) -> Vec<usize> {
        let mut counts = vec![0; self.bins];
        for x in values {
            counts[self.index(x)] += 1;
        }
        counts
    }
}

/// Binning per variable from the full column, optionally overridden or capped.
pub fn variable_binnings<T: Scalar>(ds: &Dataset<T>, options: &MatrixOptions) -> Result<Vec<Binning>> {
    (0..ds.n_vars())
        .map(|v| {
            let (min, max) = ds.variable_range(v);
            let bins = match options.bins {
                Some(b) => b,
                None => freedman_diaconis_bins(&ds.column(v))?,
            };
            let bins = options.max_bins.map_or(bins, |cap| bins.min(cap));
            Ok(Binning::new(min.as_f64(), max.as_f64(), bins))
        })
        .collect()
}

/// Counts of `rows` on variable `var`.
pub fn local_histogram<T: Scalar>(ds: &Dataset<T>, rows: &[usize], var: usize, binning: &Binning) -> Vec<usize> {
    binning.count(rows.iter().map(|&r| ds.value(r, var).as_f64()))
}

/// Sum of supports of patterns selecting each variable, min–max normalized.
/// When every variable scores the same, all get 1.
pub fn variable_importance<T: Scalar>(set: &JepSet<T>, n_vars: usize) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(VaxError::EmptyPatternSet);
    }
    let mut raw = vec![0.0; n_vars];
    for p in &set.patterns {
        for v in p.selectors.variables() {
            raw[v] += p.support;
        }
    }
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(vec![1.0; n_vars]);
    }
    Ok(raw.iter().map(|x| (x - min) / (max - min)).collect())
}

fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(VaxError::InvalidPermutation(n));
    }
    for &i in order {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(VaxError::InvalidPermutation(n));
        }
    }
    Ok(())
}

/// Running share of all rows covered by the patterns read in `order`.
pub fn cumulative_coverage<P: PatternView>(patterns: &[P], order: &[usize], n_rows: usize) -> Result<Vec<f64>> {
    check_permutation(order, patterns.len())?;
    let mut total = 0usize;
    Ok(order
        .iter()
        .map(|&i| {
            total += patterns[i].supported_rows().len();
            total as f64 / n_rows as f64
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowOrder {
    #[default]
    Support,
    Class,
    ClassAndSupport,
}

impl RowOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            RowOrder::Support => "support",
            RowOrder::Class => "class",
            RowOrder::ClassAndSupport => "class_and_support",
        }
    }
}

impl fmt::Display for RowOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RowOrder {
    type Err = VaxError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "support" => Ok(RowOrder::Support),
            "class" => Ok(RowOrder::Class),
            "class_and_support" => Ok(RowOrder::ClassAndSupport),
            other => Err(VaxError::InvalidParameter(format!("unknown order `{other}`"))),
        }
    }
}

/// Read access shared by in-memory patterns and deserialized artifacts.
pub trait PatternView {
    fn class_id(&self) -> usize;
    fn support(&self) -> f64;
    fn supported_rows(&self) -> &[usize];
}

impl<T: Scalar> PatternView for Pattern<T> {
    fn class_id(&self) -> usize {
        self.class_id
    }

    fn support(&self) -> f64 {
        self.support
    }

    fn supported_rows(&self) -> &[usize] {
        &self.supported_rows
    }
}

/// Stable permutation of `patterns` by `key`. Classes follow dataset order.
pub fn order_rows<P: PatternView>(patterns: &[P], key: RowOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..patterns.len()).collect();
    let by_support = |a: &usize, b: &usize| patterns[*b].support().total_cmp(&patterns[*a].support());
    match key {
        RowOrder::Support => idx.sort_by(by_support),
        RowOrder::Class => idx.sort_by_key(|&i| patterns[i].class_id()),
        RowOrder::ClassAndSupport => idx.sort_by(|a, b| {
            patterns[*a]
                .class_id()
                .cmp(&patterns[*b].class_id())
                .then_with(|| by_support(a, b))
        }),
    }
    idx
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterCriteria {
    pub min_support: Option<f64>,
    pub classes: Option<Vec<usize>>,
    pub coverage_target: Option<f64>,
    /// Row indices of instances of interest.
    pub instances: Option<Vec<usize>>,
}

/// Indices of the patterns kept by `criteria`, ascending.
///
/// `coverage_target` keeps the shortest support-ordered prefix whose
/// coverage reaches the target, plus the patterns of `instances`; with
/// `instances` alone only their patterns are kept. `min_support` and
/// `classes` then restrict the result.
pub fn filter_patterns<P: PatternView>(patterns: &[P], n_rows: usize, criteria: &FilterCriteria) -> Result<Vec<usize>> {
    let unit = |name: &str, x: Option<f64>| match x {
        Some(v) if !(0.0..=1.0).contains(&v) => {
            Err(VaxError::InvalidParameter(format!("{name} {v} is outside [0, 1]")))
        }
        _ => Ok(()),
    };
    unit("min_support", criteria.min_support)?;
    unit("coverage_target", criteria.coverage_target)?;

    let instance_patterns: Option<BTreeSet<usize>> = match &criteria.instances {
        Some(rows) => {
            let mut owner = vec![None; n_rows];
            for (i, p) in patterns.iter().enumerate() {
                for &r in p.supported_rows() {
                    owner[r] = Some(i);
                }
            }
            let mut set = BTreeSet::new();
            for &r in rows {
                let slot = owner
                    .get(r)
                    .ok_or_else(|| VaxError::UnknownInstance(r.to_string()))?;
                if let Some(i) = slot {
                    set.insert(*i);
                }
            }
            Some(set)
        }
        None => None,
    };

    let mut keep: BTreeSet<usize> = match (criteria.coverage_target, &instance_patterns) {
        (Some(target), extra) => {
            let mut kept: BTreeSet<usize> = extra.clone().unwrap_or_default();
            let needed = target * n_rows as f64 - 1e-9;
            let mut covered = 0usize;
            for i in order_rows(patterns, RowOrder::Support) {
                if covered as f64 >= needed {
                    break;
                }
                covered += patterns[i].supported_rows().len();
                kept.insert(i);
            }
            kept
        }
        (None, Some(set)) => set.clone(),
        (None, None) => (0..patterns.len()).collect(),
    };
    if let Some(min) = criteria.min_support {
        keep.retain(|&i| patterns[i].support() >= min);
    }
    if let Some(classes) = &criteria.classes {
        keep.retain(|&i| classes.contains(&patterns[i].class_id()));
    }
    Ok(keep.into_iter().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

impl Scale {
    /// Maps a value in `[0, 1]` onto `[0, 1]` for size and grayscale.
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Scale::Linear => x,
            Scale::Log => (1.0 + 9.0 * x).log10(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixOptions {
    pub order: RowOrder,
    /// Fixed bin count for every variable instead of Freedman–Diaconis.
    pub bins: Option<usize>,
    pub max_bins: Option<usize>,
    pub scale: Scale,
}

impl Default for MatrixOptions {
    fn default() -> Self {
        MatrixOptions {
            order: RowOrder::Support,
            bins: None,
            max_bins: Some(256),
            scale: Scale::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableColumn {
    pub name: String,
    pub importance: f64,
    pub importance_encoded: f64,
    pub edges: Vec<f64>,
    /// Category labels for integer-encoded variables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalHistogram {
    pub variable: usize,
    pub class: String,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub variable: usize,
    pub low: f64,
    pub high: f64,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub pattern_id: usize,
    pub class: String,
    pub support: f64,
    pub support_encoded: f64,
    pub support_count: usize,
    pub cumulative_coverage: f64,
    pub coverage_encoded: f64,
    pub fet_p: f64,
    pub fet_significant: bool,
    pub aggregated_from: usize,
    /// One cell per selector variable, ascending.
    pub cells: Vec<Cell>,
}

/// The matrix artifact: variables as columns, patterns as rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationModel {
    pub schema_version: u32,
    pub classes: Vec<String>,
    pub variables: Vec<VariableColumn>,
    pub global_histograms: Vec<GlobalHistogram>,
    pub rows: Vec<MatrixRow>,
    pub order: RowOrder,
    pub scale: Scale,
    pub coverage: f64,
}

impl ExplanationModel {
    pub fn global(&self, class: &str, variable: usize) -> Option<&GlobalHistogram> {
        self.global_histograms
            .iter()
            .find(|h| h.variable == variable && h.class == class)
    }
}

pub fn build_matrix_model<T: Scalar>(set: &JepSet<T>, ds: &Dataset<T>, options: &MatrixOptions) -> Result<ExplanationModel> {
    let binnings = variable_binnings(ds, options)?;
    let importance = if set.is_empty() {
        vec![0.0; ds.n_vars()]
    } else {
        variable_importance(set, ds.n_vars())?
    };
    let variables = binnings
        .iter()
        .enumerate()
        .map(|(v, b)| VariableColumn {
            name: ds.variable_names()[v].clone(),
            importance: importance[v],
            importance_encoded: options.scale.apply(importance[v]),
            edges: b.edges(),
            categories: ds.encoding(v).map(<[String]>::to_vec),
        })
        .collect();

    let mut global_histograms = Vec::with_capacity(ds.n_classes() * ds.n_vars());
    for (c, class) in ds.classes().iter().enumerate() {
        let members = ds.partition(c)?.members;
        for (v, b) in binnings.iter().enumerate() {
            global_histograms.push(GlobalHistogram {
                variable: v,
                class: class.clone(),
                counts: local_histogram(ds, &members, v, b),
            });
        }
    }

    let order = order_rows(&set.patterns, options.order);
    let coverage = cumulative_coverage(&set.patterns, &order, ds.n_rows())?;
    let rows = order
        .par_iter()
        .zip(coverage.par_iter())
        .map(|(&i, &cov)| {
            let p = &set.patterns[i];
            MatrixRow {
                pattern_id: p.id,
                class: ds.classes()[p.class_id].clone(),
                support: p.support,
                support_encoded: options.scale.apply(p.support),
                support_count: p.supported_rows.len(),
                cumulative_coverage: cov,
                coverage_encoded: options.scale.apply(cov),
                fet_p: p.fet_p,
                fet_significant: p.fet_p < FET_ALPHA,
                aggregated_from: p.aggregated_from,
                cells: p
                    .selectors
                    .iter()
                    .map(|(v, iv)| Cell {
                        variable: v,
                        low: iv.low.as_f64(),
                        high: iv.high.as_f64(),
                        counts: local_histogram(ds, &p.supported_rows, v, &binnings[v]),
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(ExplanationModel {
        schema_version: MATRIX_SCHEMA_VERSION,
        classes: ds.classes().to_vec(),
        variables,
        global_histograms,
        rows,
        order: options.order,
        scale: options.scale,
        coverage: set.coverage(),
    })
}
