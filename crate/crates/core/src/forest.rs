//! Random decision tree induction and decision-path pattern extraction.
//!
//! Trees are unpruned, CART-style with Gini impurity, and see every row of
//! the dataset (no bagging). Each internal node draws `ceil(log2 M)`
//! candidate variables; if none of them separates the node, further
//! variables are drawn until one does. Ambiguity-free input therefore always
//! yields class-pure leaves.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Result, VaxError};
use crate::jep::selector::{Conjunction, Interval};
use crate::scalar::{cmp, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub enum Node<T> {
    /// Rows with `value <= threshold` go left, the rest right.
    Split {
        variable: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf { class_id: usize, rows: Vec<usize> },
}

/// An unpruned random decision tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel<T> {
    pub nodes: Vec<Node<T>>,
    pub seed: u64,
    pub tree_index: u64,
}

impl<T: Scalar> TreeModel<T> {
    pub fn leaves(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { class_id, rows } => Some((*class_id, rows.as_slice())),
            Node::Split { .. } => None,
        })
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().count()
    }

    pub fn depth(&self) -> usize {
        fn go<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Leaf class reached by a row of values.
    pub fn classify(&self, row: &[T]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { class_id, .. } => return *class_id,
                Node::Split {
                    variable,
                    threshold,
                    left,
                    right,
                } => i = if row[*variable] <= *threshold { *left } else { *right },
            }
        }
    }
}

/// A pattern read off one decision path, before selection.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPattern<T> {
    pub id: usize,
    pub selectors: Conjunction<T>,
    pub class_id: usize,
    /// Sorted row indices of the source leaf.
    pub supported_rows: Vec<usize>,
    /// Number of source patterns merged into this one (1 for a fresh path).
    pub aggregated_from: usize,
}

/// Candidate-variable subset size: `ceil(log2 M)`, at least 1.
pub fn subset_size(n_vars: usize) -> usize {
    if n_vars <= 2 {
        1
    } else {
        (usize::BITS - (n_vars - 1).leading_zeros()) as usize
    }
}

/// RNG stream for tree `index` under a master seed.
pub fn tree_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Split score `sum_left k^2 / n_left + sum_right k^2 / n_right`, kept as an
/// exact fraction. Larger is better (lower weighted Gini impurity).
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(sq_left: u64, n_left: u64, sq_right: u64, n_right: u64) -> Self {
        Score {
            num: sq_left as u128 * n_right as u128 + sq_right as u128 * n_left as u128,
            den: n_left as u128 * n_right as u128,
        }
    }

    fn cmp(&self, other: &Score) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate<T> {
    variable: usize,
    threshold: T,
    score: Score,
}

fn midpoint<T: Scalar>(a: T, b: T) -> T {
    let mid = a + (b - a) / T::of(2.0);
    // keep `a <= mid < b` under rounding
    if mid >= b || mid < a {
        a
    } else {
        mid
    }
}

/// Best Gini split of `rows` on `var`, or `None` when `var` is constant there.
/// Ties keep the lowest threshold.
fn best_split_on<T: Scalar>(ds: &Dataset<T>, rows: &[usize], var: usize, scratch: &mut Vec<(T, usize)>) -> Option<Candidate<T>> {
    scratch.clear();
    scratch.extend(rows.iter().map(|&r| (ds.value(r, var), ds.label(r))));
    scratch.sort_by(|a, b| cmp(a.0, b.0));
    if scratch[0].0 == scratch[scratch.len() - 1].0 {
        return None;
    }
    let n_classes = ds.n_classes();
    let mut right = vec![0u64; n_classes];
    for &(_, l) in scratch.iter() {
        right[l] += 1;
    }
    let mut left = vec![0u64; n_classes];
    let mut sq_left = 0u64;
    let mut sq_right: u64 = right.iter().map(|c| c * c).sum();
    let n = scratch.len() as u64;
    let mut best: Option<Candidate<T>> = None;
    for i in 0..scratch.len() - 1 {
        let l = scratch[i].1;
        sq_left += 2 * left[l] + 1;
        left[l] += 1;
        sq_right -= 2 * right[l] - 1;
        right[l] -= 1;
        let (here, next) = (scratch[i].0, scratch[i + 1].0);
        if here == next {
            continue;
        }
        let n_left = i as u64 + 1;
        let score = Score::new(sq_left, n_left, sq_right, n - n_left);
        if best.is_none_or(|b| score.cmp(&b.score) == Ordering::Greater) {
            best = Some(Candidate {
                variable: var,
                threshold: midpoint(here, next),
                score,
            });
        }
    }
    best
}

fn is_pure<T: Scalar>(ds: &Dataset<T>, rows: &[usize]) -> bool {
    let first = ds.label(rows[0]);
    rows.iter().all(|&r| ds.label(r) == first)
}

/// Inducts one unpruned random tree over all rows of `ds`.
pub fn induct_tree<T: Scalar, R: Rng>(ds: &Dataset<T>, rng: &mut R) -> TreeModel<T> {
    let m = ds.n_vars();
    let k = subset_size(m);
    let mut nodes: Vec<Node<T>> = Vec::new();
    let mut scratch = Vec::with_capacity(ds.n_rows());
    let mut order: Vec<usize> = (0..m).collect();

    // (node slot, rows)
    let mut stack: Vec<(usize, Vec<usize>)> = vec![(0, (0..ds.n_rows()).collect())];
    nodes.push(Node::Leaf {
        class_id: 0,
        rows: Vec::new(),
    });
    while let Some((slot, rows)) = stack.pop() {
        if is_pure(ds, &rows) {
            nodes[slot] = Node::Leaf {
                class_id: ds.label(rows[0]),
                rows,
            };
            continue;
        }
        order.shuffle(rng);
        let mut drawn: Vec<usize> = order[..k].to_vec();
        drawn.sort_unstable();
        let mut best = pick_best(ds, &rows, &drawn, &mut scratch);
        // Rescue: keep adding variables in draw order until a split exists.
        let mut next = k;
        while best.is_none() && next < m {
            let extra = order[next];
            next += 1;
            best = best_split_on(ds, &rows, extra, &mut scratch);
        }
        let Some(split) = best else {
            // Only reachable with ambiguous rows, which Dataset rejects.
            unreachable!("impure node with identical rows");
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| ds.value(r, split.variable) <= split.threshold);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf {
            class_id: 0,
            rows: Vec::new(),
        });
        nodes.push(Node::Leaf {
            class_id: 0,
            rows: Vec::new(),
        });
        nodes[slot] = Node::Split {
            variable: split.variable,
            threshold: split.threshold,
            left,
            right,
        };
        stack.push((right, right_rows));
        stack.push((left, left_rows));
    }
    TreeModel {
        nodes,
        seed: 0,
        tree_index: 0,
    }
}

/// Best split among `vars` (ascending); ties go to the lower variable index.
fn pick_best<T: Scalar>(ds: &Dataset<T>, rows: &[usize], vars: &[usize], scratch: &mut Vec<(T, usize)>) -> Option<Candidate<T>> {
    let mut best: Option<Candidate<T>> = None;
    for &v in vars {
        if let Some(c) = best_split_on(ds, rows, v, scratch) {
            if best.is_none_or(|b| c.score.cmp(&b.score) == Ordering::Greater) {
                best = Some(c);
            }
        }
    }
    best
}

/// One pattern per leaf. Path constraints on a variable are intersected;
/// `v <= t` bounds the interval above by `t`, and `v > t` bounds it below by
/// the smallest observed value of `v` above `t`. Unconstrained ends are
/// clamped to the variable's observed range. Ids start at 0.
pub fn extract_patterns<T: Scalar>(tree: &TreeModel<T>, ds: &Dataset<T>) -> Vec<RawPattern<T>> {
    // Per-variable (greater-than, less-or-equal) bounds along the path.
    type Bounds<T> = Vec<(Option<T>, Option<T>)>;
    let mut out = Vec::new();
    let mut stack: Vec<(usize, Bounds<T>)> = vec![(0, vec![(None, None); ds.n_vars()])];
    while let Some((i, bounds)) = stack.pop() {
        match &tree.nodes[i] {
            Node::Leaf { class_id, rows } => {
                let mut selectors = Conjunction::new();
                for (v, &(gt, le)) in bounds.iter().enumerate() {
                    if gt.is_none() && le.is_none() {
                        continue;
                    }
                    let (min, max) = ds.variable_range(v);
                    let low = match gt {
                        Some(t) => ds.next_value_above(v, t).unwrap_or(max),
                        None => min,
                    };
                    selectors.insert(v, Interval::new(low, le.unwrap_or(max)));
                }
                let mut supported_rows = rows.clone();
                supported_rows.sort_unstable();
                out.push(RawPattern {
                    id: 0,
                    selectors,
                    class_id: *class_id,
                    supported_rows,
                    aggregated_from: 1,
                });
            }
            Node::Split {
                variable,
                threshold,
                left,
                right,
            } => {
                let (gt, le) = bounds[*variable];
                let mut lb = bounds.clone();
                lb[*variable].1 = Some(le.map_or(*threshold, |x| x.min(*threshold)));
                let mut rb = bounds;
                rb[*variable].0 = Some(gt.map_or(*threshold, |x| x.max(*threshold)));
                stack.push((*right, rb));
                stack.push((*left, lb));
            }
        }
    }
    for (id, p) in out.iter_mut().enumerate() {
        p.id = id;
    }
    out
}

/// Runs tree induction for a contiguous range of tree indices in parallel.
pub fn induct_trees<T: Scalar>(ds: &Dataset<T>, seed: u64, indices: std::ops::Range<u64>) -> Vec<TreeModel<T>> {
    indices
        .into_par_iter()
        .map(|i| {
            let mut tree = induct_tree(ds, &mut tree_rng(seed, i));
            tree.seed = seed;
            tree.tree_index = i;
            tree
        })
        .collect()
}

/// Patterns from `k` random trees, in tree order, with sequential ids.
pub fn mine<T: Scalar>(ds: &Dataset<T>, k: usize, seed: u64) -> Result<Vec<RawPattern<T>>> {
    if k == 0 {
        return Err(VaxError::ZeroTrees);
    }
    let mut miner = PatternMiner::new(ds, seed);
    miner.grow_to(k);
    Ok(miner.into_patterns())
}

/// Cumulative miner: growing from `k` to `k'` trees reuses the first `k`.
#[derive(Debug)]
pub struct PatternMiner<'a, T> {
    ds: &'a Dataset<T>,
    seed: u64,
    trees: usize,
    patterns: Vec<RawPattern<T>>,
}

impl<'a, T: Scalar> PatternMiner<'a, T> {
    pub fn new(ds: &'a Dataset<T>, seed: u64) -> Self {
        PatternMiner {
            ds,
            seed,
            trees: 0,
            patterns: Vec::new(),
        }
    }

    pub fn n_trees(&self) -> usize {
        self.trees
    }

    pub fn patterns(&self) -> &[RawPattern<T>] {
        &self.patterns
    }

    pub fn into_patterns(self) -> Vec<RawPattern<T>> {
        self.patterns
    }

    /// Inducts trees `n_trees()..k` and appends their patterns.
    pub fn grow_to(&mut self, k: usize) {
        if k <= self.trees {
            return;
        }
        let ds = self.ds;
        let batches: Vec<Vec<RawPattern<T>>> = induct_trees(ds, self.seed, self.trees as u64..k as u64)
            .par_iter()
            .map(|t| extract_patterns(t, ds))
            .collect();
        for batch in batches {
            for mut p in batch {
                p.id = self.patterns.len();
                self.patterns.push(p);
            }
        }
        self.trees = k;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RawPatternRecord {
    pub id: usize,
    pub class: String,
    pub selectors: Vec<(String, f64, f64)>,
    pub support_count: usize,
}

/// JSON-lines dump of raw patterns (selectors, class, support count).
pub fn write_raw_dump<T: Scalar, W: std::io::Write>(patterns: &[RawPattern<T>], ds: &Dataset<T>, mut w: W) -> std::io::Result<()> {
    for p in patterns {
        let rec = RawPatternRecord {
            id: p.id,
            class: ds.classes()[p.class_id].clone(),
            selectors: p
                .selectors
                .iter()
                .map(|(v, i)| (ds.variable_names()[v].clone(), i.low.as_f64(), i.high.as_f64()))
                .collect(),
            support_count: p.supported_rows.len(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
