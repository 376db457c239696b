//! Pattern-aware similarity maps.
//!
//! Each row is extended with the centroid of its JEP group, the two blocks
//! are z-scored and blended by `lambda`, and the result is projected with
//! classical MDS. Map quality is summarized by Kruskal stress and an
//! inverted silhouette over the JEP groups.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Result, VaxError};
use crate::forest::PatternMiner;
use crate::jep::{select_and_aggregate, JepSet, SelectionStats};
use crate::scalar::Scalar;

/// `[X | X~]` with group bookkeeping. Values are held as `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedDataset {
    pub base: DMatrix<f64>,
    pub extension: DMatrix<f64>,
    /// Pattern id per row, `None` for rows no JEP supports.
    pub patterns: Vec<Option<usize>>,
    /// Group index per row; unsupported rows get singleton groups.
    pub groups: Vec<usize>,
}

impl ExtendedDataset {
    pub fn n_rows(&self) -> usize {
        self.base.nrows()
    }

    pub fn n_groups(&self) -> usize {
        self.groups.iter().max().map_or(0, |g| g + 1)
    }
}

/// Extends every row with its JEP group centroid. Unsupported rows extend
/// with their own values.
pub fn extend<T: Scalar>(ds: &Dataset<T>, set: &JepSet<T>) -> ExtendedDataset {
    let (n, m) = (ds.n_rows(), ds.n_vars());
    let base = DMatrix::from_fn(n, m, |r, v| ds.value(r, v).as_f64());
    let mut extension = base.clone();
    let mut patterns = vec![None; n];
    let mut groups = vec![usize::MAX; n];
    for (g, p) in set.patterns.iter().enumerate() {
        let mut centroid = vec![0.0; m];
        for &r in &p.supported_rows {
            for (v, c) in centroid.iter_mut().enumerate() {
                *c += base[(r, v)];
            }
        }
        let size = p.supported_rows.len() as f64;
        for &r in &p.supported_rows {
            for (v, c) in centroid.iter().enumerate() {
                extension[(r, v)] = c / size;
            }
            patterns[r] = Some(p.id);
            groups[r] = g;
        }
    }
    for (g, next) in groups.iter_mut().filter(|g| **g == usize::MAX).zip(set.len()..) {
        *g = next;
    }
    ExtendedDataset {
        base,
        extension,
        patterns,
        groups,
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(VaxError::InvalidLambda(lambda));
    }
    Ok(())
}

/// Per-column z-score; constant columns become 0.
pub fn zscore(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() as f64;
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for x in col.iter_mut() {
            *x = if sd > 0.0 { (*x - mean) / sd } else { 0.0 };
        }
    }
    out
}

fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (a.nrows(), a.ncols());
    DMatrix::from_fn(n, m + b.ncols(), |r, c| if c < m { a[(r, c)] } else { b[(r, c - m)] })
}

/// `[(1-lambda) X | lambda X~]` without normalization.
pub fn weight_unnormalized(ext: &ExtendedDataset, lambda: f64) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    Ok(hstack(&(&ext.base * (1.0 - lambda)), &(&ext.extension * lambda)))
}

/// Z-scores `[X | X~]` column-wise, then scales the base block by
/// `1 - lambda` and the extension block by `lambda`.
pub fn weight(ext: &ExtendedDataset, lambda: f64) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    let mut z = zscore(&hstack(&ext.base, &ext.extension));
    let m = ext.base.ncols();
    for (c, mut col) in z.column_iter_mut().enumerate() {
        col *= if c < m { 1.0 - lambda } else { lambda };
    }
    Ok(z)
}

/// Euclidean distances over unordered row pairs `(i, j)`, `i < j`, row-major.
pub fn pairwise_distances(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|r| m.row(r).iter().copied().collect()).collect();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let rows = &rows;
            (i + 1..n).map(move |j| {
                rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
        })
        .collect()
}

/// Index of pair `(i, j)`, `i < j`, in a condensed distance vector.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Classical (Torgerson) MDS to two dimensions.
///
/// Each axis is oriented so that its first clearly nonzero coordinate is
/// positive. Identical rows yield all-zero coordinates.
pub fn mds(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n < 3 {
        return Err(VaxError::TooFewPoints { needed: 3, got: n });
    }
    let d = pairwise_distances(m);
    let mut sq = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let x = d[pair_index(n, i, j)].powi(2);
            sq[(i, j)] = x;
            sq[(j, i)] = x;
        }
    }
    mds_from_squared(sq)
}

/// Classical MDS from a full matrix of squared distances.
pub fn mds_from_squared(mut sq: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sq.nrows();
    if n < 3 {
        return Err(VaxError::TooFewPoints { needed: 3, got: n });
    }
    // B = -1/2 J D^2 J
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            sq[(i, j)] = -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand);
        }
    }
    let scale = sq.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut coords = DMatrix::zeros(n, 2);
    if scale == 0.0 {
        warn!("all rows are identical; MDS returns the origin for every point");
        return Ok(coords);
    }
    let eig = SymmetricEigen::new(sq);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    for (axis, &k) in order.iter().take(2).enumerate() {
        let value = eig.eigenvalues[k];
        if value <= scale * 1e-12 {
            continue;
        }
        let s = value.sqrt();
        let v = eig.eigenvectors.column(k);
        let peak = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let flip = v
            .iter()
            .find(|x| x.abs() > peak * 1e-6)
            .map_or(1.0, |x| x.signum());
        for i in 0..n {
            coords[(i, axis)] = v[i] * s * flip;
        }
    }
    Ok(coords)
}

/// `sqrt(sum (dh - dl)^2 / sum dh^2)`, clamped to 1.
pub fn kruskal_stress(high: &[f64], low: &[f64]) -> Result<f64> {
    if high.len() != low.len() {
        return Err(VaxError::LengthMismatch(high.len(), low.len()));
    }
    let den: f64 = high.iter().map(|d| d * d).sum();
    if den == 0.0 {
        return Err(VaxError::ZeroDistances);
    }
    let num: f64 = high.iter().zip(low).map(|(h, l)| (h - l).powi(2)).sum();
    let stress = (num / den).sqrt();
    if stress > 1.0 {
        warn!("Kruskal stress {stress} exceeds 1; reporting 1");
        return Ok(1.0);
    }
    Ok(stress)
}

/// Stress after rescaling `low` by the least-squares factor
/// `sum dh dl / sum dl^2`. All-zero `low` gives 1.
pub fn scaled_stress(high: &[f64], low: &[f64]) -> Result<f64> {
    if high.len() != low.len() {
        return Err(VaxError::LengthMismatch(high.len(), low.len()));
    }
    let ll: f64 = low.iter().map(|d| d * d).sum();
    if ll == 0.0 {
        return kruskal_stress(high, low);
    }
    let c = high.iter().zip(low).map(|(h, l)| h * l).sum::<f64>() / ll;
    let scaled: Vec<f64> = low.iter().map(|l| l * c).collect();
    kruskal_stress(high, &scaled)
}

/// Mean silhouette over all rows, rows of singleton groups counting 0.
pub fn silhouette(distances: &[f64], n: usize, groups: &[usize]) -> Result<f64> {
    if groups.len() != n {
        return Err(VaxError::LengthMismatch(groups.len(), n));
    }
    if distances.len() != n * n.saturating_sub(1) / 2 {
        return Err(VaxError::LengthMismatch(distances.len(), n * n.saturating_sub(1) / 2));
    }
    let n_groups = groups.iter().max().map_or(0, |g| g + 1);
    let mut sizes = vec![0usize; n_groups];
    for &g in groups {
        sizes[g] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(VaxError::SingleGroup);
    }
    // Collected before summing so the result does not depend on scheduling.
    let per_row: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = groups[i];
            if sizes[own] < 2 {
                return 0.0;
            }
            let mut sums = vec![0.0; n_groups];
            for j in 0..n {
                if j != i {
                    let d = if i < j {
                        distances[pair_index(n, i, j)]
                    } else {
                        distances[pair_index(n, j, i)]
                    };
                    sums[groups[j]] += d;
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..n_groups)
                .filter(|&g| g != own && sizes[g] > 0)
                .map(|g| sums[g] / sizes[g] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m == 0.0 {
                0.0
            } else {
                (b - a) / m
            }
        })
        .collect();
    Ok(per_row.iter().sum::<f64>() / n as f64)
}

/// `1 - (sc + 1) / 2`; lower is better.
pub fn invert_silhouette(sc: f64) -> f64 {
    1.0 - (sc + 1.0) / 2.0
}

pub fn silhouette_inverted(matrix: &DMatrix<f64>, groups: &[usize]) -> Result<f64> {
    let d = pairwise_distances(matrix);
    Ok(invert_silhouette(silhouette(&d, matrix.nrows(), groups)?))
}

/// Reference distances for stress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StressBasis {
    /// The lambda-weighted extended space itself.
    #[default]
    Weighted,
    /// Z-scored original data, with the map optimally rescaled.
    Original,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingResult {
    pub lambda: f64,
    /// `N x 2`, row order of the dataset.
    pub coordinates: Vec<[f64; 2]>,
    pub stress: f64,
    pub silhouette_inverted: f64,
}

/// Embeds at a single `lambda`. `reference` is the distance vector stress is
/// measured against when the basis is [`StressBasis::Original`].
fn embed_with(ext: &ExtendedDataset, lambda: f64, basis: StressBasis, reference: &[f64]) -> Result<EmbeddingResult> {
    let weighted = weight(ext, lambda)?;
    let coords = mds(&weighted)?;
    let high = pairwise_distances(&weighted);
    let low = pairwise_distances(&coords);
    let stress = match basis {
        StressBasis::Original => scaled_stress(reference, &low)?,
        StressBasis::Weighted => kruskal_stress(&high, &low)?,
    };
    let sc = silhouette(&high, ext.n_rows(), &ext.groups)?;
    Ok(EmbeddingResult {
        lambda,
        coordinates: coords.row_iter().map(|r| [r[0], r[1]]).collect(),
        stress,
        silhouette_inverted: invert_silhouette(sc),
    })
}

fn original_distances(ext: &ExtendedDataset) -> Vec<f64> {
    pairwise_distances(&zscore(&ext.base))
}

pub fn embed(ext: &ExtendedDataset, lambda: f64, basis: StressBasis) -> Result<EmbeddingResult> {
    embed_with(ext, lambda, basis, &original_distances(ext))
}

/// `0, 0.05, ..., 1`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweep {
    pub results: Vec<EmbeddingResult>,
    /// Grid value minimizing `stress + silhouette_inverted`; ties go to the
    /// smaller lambda.
    pub recommended: f64,
}

impl LambdaSweep {
    pub fn recommended_result(&self) -> &EmbeddingResult {
        self.nearest(self.recommended)
    }

    /// Result at the grid point closest to `lambda`.
    pub fn nearest(&self, lambda: f64) -> &EmbeddingResult {
        self.results
            .iter()
            .min_by(|a, b| (a.lambda - lambda).abs().total_cmp(&(b.lambda - lambda).abs()))
            .expect("sweep is never empty")
    }
}

pub fn sweep_lambda(ext: &ExtendedDataset, grid: &[f64], basis: StressBasis) -> Result<LambdaSweep> {
    if grid.is_empty() {
        return Err(VaxError::EmptyGrid);
    }
    for &l in grid {
        check_lambda(l)?;
    }
    let reference = original_distances(ext);
    let results = grid
        .par_iter()
        .map(|&l| embed_with(ext, l, basis, &reference))
        .collect::<Result<Vec<_>>>()?;
    let best = results
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            (a.stress + a.silhouette_inverted)
                .total_cmp(&(b.stress + b.silhouette_inverted))
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
        .expect("grid is nonempty");
    Ok(LambdaSweep {
        recommended: results[best].lambda,
        results,
    })
}

/// `1, 2, 4, ..., 2^(n-1)`.
pub fn power_schedule(n: u32) -> Vec<usize> {
    (0..n).map(|i| 1usize << i).collect()
}

pub fn default_tree_schedule() -> Vec<usize> {
    power_schedule(14)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub k: usize,
    pub coverage: f64,
    pub raw_patterns: usize,
    pub jeps: usize,
}

#[derive(Debug, Clone)]
pub struct TreeSweep<T> {
    pub curve: Vec<CoveragePoint>,
    pub chosen_k: usize,
    pub jep_set: JepSet<T>,
    pub stats: SelectionStats,
}

/// Mines cumulatively along `schedule` and stops at the first `k` whose JEPs
/// cover every row. Without full coverage the largest `k` is chosen.
pub fn sweep_trees<T: Scalar>(ds: &Dataset<T>, schedule: &[usize], seed: u64) -> Result<TreeSweep<T>> {
    if schedule.is_empty() {
        return Err(VaxError::InvalidParameter("tree schedule is empty".into()));
    }
    if schedule[0] == 0 {
        return Err(VaxError::ZeroTrees);
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(VaxError::InvalidParameter("tree schedule must be strictly increasing".into()));
    }
    let mut miner = PatternMiner::new(ds, seed);
    let mut curve = Vec::new();
    let mut last = None;
    for &k in schedule {
        miner.grow_to(k);
        let (set, stats) = select_and_aggregate(miner.patterns(), ds)?;
        let coverage = set.coverage();
        curve.push(CoveragePoint {
            k,
            coverage,
            raw_patterns: stats.raw,
            jeps: set.len(),
        });
        let done = set.patterns.iter().map(|p| p.supported_rows.len()).sum::<usize>() == ds.n_rows();
        last = Some((k, set, stats));
        if done {
            break;
        }
    }
    let (chosen_k, jep_set, stats) = last.expect("schedule is nonempty");
    if jep_set.coverage() < 1.0 {
        warn!("coverage {} after {chosen_k} trees; schedule exhausted", jep_set.coverage());
    }
    Ok(TreeSweep {
        curve,
        chosen_k,
        jep_set,
        stats,
    })
}
