//! On-disk artifact schemas.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, IngestReport};
use crate::embed::{CoveragePoint, EmbeddingResult, LambdaSweep, StressBasis};
use crate::error::{Result, VaxError};
use crate::explain::{ExplanationModel, PatternView};
use crate::jep::{JepSet, SelectionStats};
use crate::scalar::Scalar;

pub const SCHEMA_VERSION: u32 = 1;

pub const PATTERNS_FILE: &str = "patterns.json";
pub const MATRIX_FILE: &str = "matrix.json";
pub const MAP_FILE: &str = "map.json";
pub const SWEEP_FILE: &str = "sweep.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorRecord {
    pub variable: String,
    pub variable_index: usize,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRecord {
    pub id: usize,
    pub class: String,
    pub class_index: usize,
    pub selectors: Vec<SelectorRecord>,
    pub support: f64,
    pub confidence: f64,
    pub fet_p: f64,
    pub supported_instance_ids: Vec<String>,
    /// Row indices matching `supported_instance_ids`.
    pub supported_rows: Vec<usize>,
    pub aggregated_from: usize,
    pub cumulative_coverage: f64,
}

impl PatternView for PatternRecord {
    fn class_id(&self) -> usize {
        self.class_index
    }

    fn support(&self) -> f64 {
        self.support
    }

    fn supported_rows(&self) -> &[usize] {
        &self.supported_rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternsArtifact {
    pub schema_version: u32,
    pub classes: Vec<String>,
    pub variables: Vec<String>,
    /// Instance ids in row order.
    pub instance_ids: Vec<String>,
    pub patterns: Vec<PatternRecord>,
}

impl PatternsArtifact {
    pub fn new<T: Scalar>(set: &JepSet<T>, ds: &Dataset<T>) -> Self {
        let ids = ds.instance_ids();
        let patterns = set
            .patterns
            .iter()
            .zip(&set.cumulative_coverage)
            .map(|(p, &cov)| PatternRecord {
                id: p.id,
                class: ds.classes()[p.class_id].clone(),
                class_index: p.class_id,
                selectors: p
                    .selectors
                    .iter()
                    .map(|(v, iv)| SelectorRecord {
                        variable: ds.variable_names()[v].clone(),
                        variable_index: v,
                        low: iv.low.as_f64(),
                        high: iv.high.as_f64(),
                    })
                    .collect(),
                support: p.support,
                confidence: p.confidence,
                fet_p: p.fet_p,
                supported_instance_ids: p.supported_rows.iter().map(|&r| ids[r].clone()).collect(),
                supported_rows: p.supported_rows.clone(),
                aggregated_from: p.aggregated_from,
                cumulative_coverage: cov,
            })
            .collect();
        PatternsArtifact {
            schema_version: SCHEMA_VERSION,
            classes: ds.classes().to_vec(),
            variables: ds.variable_names().to_vec(),
            instance_ids: ids.to_vec(),
            patterns,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn get(&self, id: usize) -> Option<&PatternRecord> {
        self.patterns.iter().find(|p| p.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub instance_id: String,
    pub x: f64,
    pub y: f64,
    pub class: String,
    pub pattern_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapArtifact {
    pub schema_version: u32,
    pub lambda: f64,
    pub stress: f64,
    pub silhouette_inverted: f64,
    pub stress_basis: StressBasis,
    pub points: Vec<MapPoint>,
}

impl MapArtifact {
    pub fn new<T: Scalar>(e: &EmbeddingResult, ds: &Dataset<T>, patterns: &[Option<usize>], basis: StressBasis) -> Self {
        let points = e
            .coordinates
            .iter()
            .enumerate()
            .map(|(r, &[x, y])| MapPoint {
                instance_id: ds.instance_ids()[r].clone(),
                x,
                y,
                class: ds.classes()[ds.label(r)].clone(),
                pattern_id: patterns[r],
            })
            .collect();
        MapArtifact {
            schema_version: SCHEMA_VERSION,
            lambda: e.lambda,
            stress: e.stress,
            silhouette_inverted: e.silhouette_inverted,
            stress_basis: basis,
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPoint {
    pub lambda: f64,
    pub stress: f64,
    pub silhouette_inverted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepArtifact {
    pub schema_version: u32,
    pub stress_basis: StressBasis,
    pub lambda_curve: Vec<LambdaPoint>,
    pub recommended_lambda: f64,
    /// Empty when the tree count was fixed.
    pub tree_curve: Vec<CoveragePoint>,
    pub chosen_k: usize,
}

impl SweepArtifact {
    pub fn new(sweep: &LambdaSweep, basis: StressBasis, tree_curve: Vec<CoveragePoint>, chosen_k: usize) -> Self {
        SweepArtifact {
            schema_version: SCHEMA_VERSION,
            stress_basis: basis,
            lambda_curve: sweep
                .results
                .iter()
                .map(|r| LambdaPoint {
                    lambda: r.lambda,
                    stress: r.stress,
                    silhouette_inverted: r.silhouette_inverted,
                })
                .collect(),
            recommended_lambda: sweep.recommended,
            tree_curve,
            chosen_k,
        }
    }
}

/// Every grid embedding, for serving maps without recomputation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingsArtifact {
    pub schema_version: u32,
    pub grid: Vec<EmbeddingResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub fingerprint: String,
    pub label_column: String,
    pub n_rows: usize,
    pub n_vars: usize,
    pub classes: Vec<String>,
    pub class_sizes: Vec<usize>,
    pub variables: Vec<String>,
}

impl DatasetSummary {
    pub fn new<T: Scalar>(ds: &Dataset<T>) -> Self {
        DatasetSummary {
            fingerprint: ds.fingerprint(),
            label_column: ds.label_name().to_string(),
            n_rows: ds.n_rows(),
            n_vars: ds.n_vars(),
            classes: ds.classes().to_vec(),
            class_sizes: ds.class_sizes(),
            variables: ds.variable_names().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub trees_mode: String,
    pub lambda_mode: String,
    pub resolved_k: usize,
    pub resolved_lambda: Option<f64>,
    pub counts: SelectionStats,
    pub jep_count: usize,
    pub coverage: f64,
    pub dataset: DatasetSummary,
    pub ingest: IngestReport,
}

impl RunManifest {
    /// Selected, aggregated and discarded patterns add up to the raw count.
    pub fn accounting_holds(&self) -> bool {
        let c = self.counts;
        c.selected + c.aggregated + c.discarded == c.raw
    }
}

/// Everything `run` writes, loaded back.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub patterns: PatternsArtifact,
    pub matrix: ExplanationModel,
    /// Absent when the embedding stage was skipped.
    pub map: Option<MapArtifact>,
    pub sweep: Option<SweepArtifact>,
    pub embeddings: Option<EmbeddingsArtifact>,
    pub manifest: RunManifest,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| VaxError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|source| VaxError::Artifact {
        path: path.to_path_buf(),
        source,
    })
}

fn read_optional<T: DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    if path.exists() {
        read_json(path).map(Some)
    } else {
        Ok(None)
    }
}

impl Artifacts {
    pub fn load(dir: &Path) -> Result<Self> {
        let artifacts = Artifacts {
            dir: dir.to_path_buf(),
            patterns: read_json(&dir.join(PATTERNS_FILE))?,
            matrix: read_json(&dir.join(MATRIX_FILE))?,
            map: read_optional(&dir.join(MAP_FILE))?,
            sweep: read_optional(&dir.join(SWEEP_FILE))?,
            embeddings: read_optional(&dir.join(EMBEDDINGS_FILE))?,
            manifest: read_json(&dir.join(MANIFEST_FILE))?,
        };
        let n = artifacts.patterns.n_rows();
        for p in &artifacts.patterns.patterns {
            if p.supported_rows.iter().any(|&r| r >= n) || p.class_index >= artifacts.patterns.classes.len() {
                return Err(VaxError::Inconsistent(format!(
                    "pattern {} references rows or classes outside the artifact set",
                    p.id
                )));
            }
        }
        Ok(artifacts)
    }

    /// Row index of each instance id.
    pub fn instance_rows(&self, ids: &[String]) -> Result<Vec<usize>> {
        let index: std::collections::HashMap<&str, usize> = self
            .patterns
            .instance_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        ids.iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| VaxError::UnknownInstance(id.clone()))
            })
            .collect()
    }
}
