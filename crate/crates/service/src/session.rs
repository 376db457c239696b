use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use vax_core::embed::EmbeddingResult;
use vax_core::explain::{cumulative_coverage, filter_patterns, order_rows, FilterCriteria, MatrixRow, RowOrder, VariableColumn};
use vax_core::pipeline::{explain_instances, Artifacts, DatasetSummary, InstanceExplanation, MapPoint, RunManifest};
use vax_core::{Result, VaxError};

/// One loaded artifact set. Immutable once built.
#[derive(Debug)]
pub struct Session {
    pub artifacts: Artifacts,
    rows_by_pattern: HashMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub dataset: DatasetSummary,
    pub classes: Vec<String>,
    pub variables: Vec<VariableColumn>,
    pub coverage: f64,
    pub lambda_grid: Vec<f64>,
    pub recommended_lambda: Option<f64>,
    pub manifest: RunManifest,
}

/// Query of `GET /api/patterns`, with class names and instance ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PatternQuery {
    pub classes: Option<Vec<String>>,
    pub min_support: Option<f64>,
    pub coverage_target: Option<f64>,
    pub instances: Option<Vec<String>>,
    pub order: RowOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternsResponse {
    pub order: RowOrder,
    pub total: usize,
    pub rows: Vec<MatrixRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapResponse {
    pub requested: String,
    pub lambda: f64,
    pub stress: f64,
    pub silhouette_inverted: f64,
    pub points: Vec<MapPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRequest {
    pub instance_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestedFilter {
    pub instances: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResponse {
    #[serde(flatten)]
    pub explanation: InstanceExplanation,
    pub filter: SuggestedFilter,
}

impl Session {
    pub fn new(artifacts: Artifacts) -> Result<Self> {
        let rows_by_pattern: HashMap<usize, usize> = artifacts
            .matrix
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.pattern_id, i))
            .collect();
        if let Some(p) = artifacts.patterns.patterns.iter().find(|p| !rows_by_pattern.contains_key(&p.id)) {
            return Err(VaxError::Inconsistent(format!("pattern {} has no matrix row", p.id)));
        }
        Ok(Session {
            artifacts,
            rows_by_pattern,
        })
    }

    pub fn meta(&self) -> Meta {
        let a = &self.artifacts;
        Meta {
            dataset: a.manifest.dataset.clone(),
            classes: a.matrix.classes.clone(),
            variables: a.matrix.variables.clone(),
            coverage: a.matrix.coverage,
            lambda_grid: a
                .embeddings
                .as_ref()
                .map(|e| e.grid.iter().map(|g| g.lambda).collect())
                .unwrap_or_default(),
            recommended_lambda: a.sweep.as_ref().map(|s| s.recommended_lambda),
            manifest: a.manifest.clone(),
        }
    }

    /// Library-level criteria for `query`, resolving names and ids.
    pub fn criteria(&self, query: &PatternQuery) -> Result<FilterCriteria> {
        let classes = match &query.classes {
            Some(names) => Some(
                names
                    .iter()
                    .map(|n| {
                        self.artifacts
                            .patterns
                            .classes
                            .iter()
                            .position(|c| c == n)
                            .ok_or_else(|| VaxError::UnknownClass(n.clone()))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        let instances = match &query.instances {
            Some(ids) => Some(self.artifacts.instance_rows(ids)?),
            None => None,
        };
        Ok(FilterCriteria {
            min_support: query.min_support,
            classes,
            coverage_target: query.coverage_target,
            instances,
        })
    }

    /// Filtered, ordered matrix rows with coverage recomputed in served order.
    pub fn patterns(&self, query: &PatternQuery) -> Result<PatternsResponse> {
        let records = &self.artifacts.patterns.patterns;
        let criteria = self.criteria(query)?;
        let kept = filter_patterns(records, self.artifacts.patterns.n_rows(), &criteria)?;
        let subset: Vec<_> = kept.iter().map(|&i| records[i].clone()).collect();
        let order = order_rows(&subset, query.order);
        let coverage = cumulative_coverage(&subset, &order, self.artifacts.patterns.n_rows())?;
        let scale = self.artifacts.matrix.scale;
        let rows = order
            .iter()
            .zip(coverage)
            .map(|(&i, cov)| {
                let mut row = self.artifacts.matrix.rows[self.rows_by_pattern[&subset[i].id]].clone();
                row.cumulative_coverage = cov;
                row.coverage_encoded = scale.apply(cov);
                row
            })
            .collect();
        Ok(PatternsResponse {
            order: query.order,
            total: records.len(),
            rows,
        })
    }

    /// Grid embedding nearest to `lambda`, or the recommended one for `None`.
    pub fn map(&self, lambda: Option<f64>) -> Result<MapResponse> {
        let (Some(grid), Some(sweep), Some(map)) = (
            self.artifacts.embeddings.as_ref(),
            self.artifacts.sweep.as_ref(),
            self.artifacts.map.as_ref(),
        ) else {
            return Err(VaxError::InvalidParameter("this artifact set has no embeddings".into()));
        };
        if let Some(l) = lambda {
            if !(0.0..=1.0).contains(&l) || l.is_nan() {
                return Err(VaxError::InvalidLambda(l));
            }
        }
        let target = lambda.unwrap_or(sweep.recommended_lambda);
        let chosen: &EmbeddingResult = grid
            .grid
            .iter()
            .min_by(|a, b| (a.lambda - target).abs().total_cmp(&(b.lambda - target).abs()))
            .ok_or(VaxError::EmptyGrid)?;
        let points = map
            .points
            .iter()
            .zip(&chosen.coordinates)
            .map(|(p, &[x, y])| MapPoint { x, y, ..p.clone() })
            .collect();
        Ok(MapResponse {
            requested: lambda.map_or("auto".to_string(), |l| l.to_string()),
            lambda: chosen.lambda,
            stress: chosen.stress,
            silhouette_inverted: chosen.silhouette_inverted,
            points,
        })
    }

    pub fn selection(&self, request: &SelectionRequest) -> Result<SelectionResponse> {
        let explanation = explain_instances(&self.artifacts, &request.instance_ids)?;
        Ok(SelectionResponse {
            explanation,
            filter: SuggestedFilter {
                instances: request.instance_ids.clone(),
            },
        })
    }
}
