//! Seeded generators for demonstration and testing datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::Dataset;
use crate::error::Result;

/// Five classes of 100 points over two variables: `A` and `B` overlap
/// heavily, `C` and `D` share a border, `E` is isolated.
pub fn five_class(seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(500);
    let mut labels = Vec::with_capacity(500);
    type Range = (f64, f64);
    // (class, var1 range, var2 range)
    let boxes: [(usize, Range, Range); 5] = [
        (0, (140.0, 190.0), (20.0, 70.0)),
        (1, (150.0, 200.0), (30.0, 80.0)),
        (2, (20.0, 70.0), (140.0, 180.0)),
        (3, (20.0, 70.0), (104.0, 144.0)),
        (4, (96.0, 120.0), (78.0, 95.0)),
    ];
    for (class, (x0, x1), (y0, y1)) in boxes {
        for _ in 0..100 {
            let x: f64 = rng.random_range(x0..x1);
            let y: f64 = rng.random_range(y0..y1);
            rows.push(vec![round2(x), round2(y)]);
            labels.push(class);
        }
    }
    let classes = ["A", "B", "C", "D", "E"].map(String::from).to_vec();
    let mut parts = crate::dataset::DatasetParts::new(rows, labels, classes);
    parts.variable_names = Some(vec!["var1".into(), "var2".into()]);
    dedup_into(parts).expect("generator produces a valid dataset")
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Drops rows that would make the dataset ambiguous.
fn dedup_into(mut parts: crate::dataset::DatasetParts<f64>) -> Result<Dataset<f64>> {
    let bad = crate::dataset::ambiguous_rows(&parts.rows, &parts.labels);
    if !bad.is_empty() {
        let drop: std::collections::HashSet<usize> = bad.into_iter().collect();
        let keep: Vec<usize> = (0..parts.rows.len()).filter(|i| !drop.contains(i)).collect();
        parts.rows = keep.iter().map(|&i| parts.rows[i].clone()).collect();
        parts.labels = keep.iter().map(|&i| parts.labels[i]).collect();
    }
    // Classes emptied by the removal are dropped.
    let mut remap = vec![None; parts.classes.len()];
    let mut classes = Vec::new();
    for &l in &parts.labels {
        if remap[l].is_none() {
            remap[l] = Some(l);
        }
    }
    for (old, slot) in remap.iter_mut().enumerate() {
        if slot.is_some() {
            *slot = Some(classes.len());
            classes.push(parts.classes[old].clone());
        }
    }
    parts.labels = parts.labels.iter().map(|&l| remap[l].expect("label present")).collect();
    parts.classes = classes;
    Dataset::from_parts(parts)
}

/// Random dataset of `n` rows, `m` variables and `j` classes. Each class is
/// a Gaussian cloud around its own centre; `spread` controls overlap.
/// Values are rounded to `decimals`, which makes ties (and thus ambiguous
/// rows, which are removed) possible at low precision.
pub fn gaussian_classes(seed: u64, n: usize, m: usize, j: usize, spread: f64, decimals: i32) -> Result<Dataset<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..j).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let scale = 10f64.powi(decimals);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = if i < j { i } else { rng.random_range(0..j) };
        let row = centres[class]
            .iter()
            .map(|c| {
                let z: f64 = rng.sample(StandardNormal);
                ((c + spread * z) * scale).round() / scale
            })
            .collect();
        rows.push(row);
        labels.push(class);
    }
    let classes = (0..j).map(|c| format!("c{c}")).collect();
    dedup_into(crate::dataset::DatasetParts::new(rows, labels, classes))
}
