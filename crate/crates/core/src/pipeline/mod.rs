//! End-to-end run: ingest, mine, select, explain, embed, and write artifacts.

pub mod artifacts;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use crate::dataset::{ingest_csv, Dataset, IngestConfig};
use crate::embed::{self, EmbeddingResult, StressBasis};
use crate::error::{Result, VaxError};
use crate::explain::{build_matrix_model, MatrixOptions, MatrixRow, RowOrder, Scale};
use crate::forest;
use crate::jep::{select_and_aggregate, JepSet, SelectionStats};

pub use artifacts::*;

#[derive(Debug, Clone, PartialEq)]
pub enum Trees {
    Fixed(usize),
    /// Increasing tree counts tried in turn until coverage is complete.
    Auto(Vec<usize>),
}

impl Trees {
    fn describe(&self) -> String {
        match self {
            Trees::Fixed(k) => format!("fixed:{k}"),
            Trees::Auto(s) => format!("auto:{}", s.iter().map(usize::to_string).collect::<Vec<_>>().join(",")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Fixed(f64),
    Auto,
}

impl Lambda {
    fn describe(&self) -> String {
        match self {
            Lambda::Fixed(x) => format!("fixed:{x}"),
            Lambda::Auto => "auto".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub label_column: String,
    pub id_column: Option<String>,
    pub seed: u64,
    pub trees: Trees,
    pub lambda: Lambda,
    pub lambda_grid: Vec<f64>,
    pub stress_basis: StressBasis,
    pub discretize_bins: Option<usize>,
    pub drop_ambiguous: bool,
    pub histogram_bins: Option<usize>,
    pub order: RowOrder,
    pub scale: Scale,
    /// When false, map, sweep and embeddings artifacts are not produced.
    pub embed: bool,
    /// JSON-lines dump of the raw patterns.
    pub raw_dump: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, label_column: impl Into<String>, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            input: input.into(),
            label_column: label_column.into(),
            id_column: None,
            seed: 0,
            trees: Trees::Auto(embed::default_tree_schedule()),
            lambda: Lambda::Auto,
            lambda_grid: embed::default_lambda_grid(),
            stress_basis: StressBasis::default(),
            discretize_bins: None,
            drop_ambiguous: true,
            histogram_bins: None,
            order: RowOrder::Support,
            scale: Scale::Linear,
            embed: true,
            raw_dump: None,
            out_dir: out_dir.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub timings: Vec<StageTiming>,
}

struct Stopwatch(Vec<StageTiming>);

impl Stopwatch {
    fn time<R>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<R>) -> Result<R> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage))?;
        let millis = start.elapsed().as_secs_f64() * 1e3;
        info!("{stage}: {millis:.1} ms");
        self.0.push(StageTiming {
            stage: stage.into(),
            millis,
        });
        Ok(out)
    }
}

struct Mined {
    set: JepSet<f64>,
    stats: SelectionStats,
    k: usize,
    curve: Vec<embed::CoveragePoint>,
}

fn mine_and_select(ds: &Dataset<f64>, config: &RunConfig) -> Result<Mined> {
    match &config.trees {
        Trees::Fixed(k) => {
            let raw = forest::mine(ds, *k, config.seed)?;
            let (set, stats) = select_and_aggregate(&raw, ds)?;
            Ok(Mined {
                set,
                stats,
                k: *k,
                curve: Vec::new(),
            })
        }
        Trees::Auto(schedule) => {
            let sweep = embed::sweep_trees(ds, schedule, config.seed)?;
            Ok(Mined {
                set: sweep.jep_set,
                stats: sweep.stats,
                k: sweep.chosen_k,
                curve: sweep.curve,
            })
        }
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|e| VaxError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| VaxError::Artifact {
        path: path.clone(),
        source,
    })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| VaxError::io(&path, e))
}

/// Writes into a sibling staging directory and moves the files into
/// `out_dir` only once every write succeeded.
fn emit(out_dir: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let parent = match out_dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| VaxError::io(&parent, e))?;
    let name = out_dir.file_name().map_or("artifacts".into(), |n| n.to_string_lossy().into_owned());
    let staging = parent.join(format!(".{name}.staging-{}", std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| VaxError::io(&staging, e))?;
    }
    fs::create_dir(&staging).map_err(|e| VaxError::io(&staging, e))?;
    let result = write(&staging).and_then(|_| {
        if !out_dir.exists() {
            return fs::rename(&staging, out_dir).map_err(|e| VaxError::io(out_dir, e));
        }
        for entry in fs::read_dir(&staging).map_err(|e| VaxError::io(&staging, e))? {
            let entry = entry.map_err(|e| VaxError::io(&staging, e))?;
            let target = out_dir.join(entry.file_name());
            fs::rename(entry.path(), &target).map_err(|e| VaxError::io(&target, e))?;
        }
        fs::remove_dir(&staging).map_err(|e| VaxError::io(&staging, e))
    });
    if result.is_err() && staging.exists() {
        let _ = fs::remove_dir_all(&staging);
    }
    result
}

/// Runs the whole pipeline and writes the artifact set to `config.out_dir`.
/// Nothing is written when a stage fails.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let mut clock = Stopwatch(Vec::new());
    let ingest_cfg = IngestConfig {
        label_column: config.label_column.clone(),
        id_column: config.id_column.clone(),
        discretize_bins: config.discretize_bins,
        drop_ambiguous: config.drop_ambiguous,
    };
    let (ds, report) = clock.time("ingest", || ingest_csv::<f64>(&config.input, &ingest_cfg))?;
    let mined = clock.time("mine", || mine_and_select(&ds, config))?;
    clock.time("verify", || {
        mined.set.verify(&ds)?;
        let s = mined.stats;
        if s.selected + s.aggregated + s.discarded != s.raw {
            return Err(VaxError::Inconsistent("selection counts do not add up".into()));
        }
        Ok(())
    })?;
    let options = MatrixOptions {
        order: config.order,
        bins: config.histogram_bins,
        scale: config.scale,
        ..MatrixOptions::default()
    };
    let matrix = clock.time("explain", || build_matrix_model(&mined.set, &ds, &options))?;
    let patterns = PatternsArtifact::new(&mined.set, &ds);

    let embedding = if config.embed {
        Some(clock.time("embed", || {
            let ext = embed::extend(&ds, &mined.set);
            let sweep = embed::sweep_lambda(&ext, &config.lambda_grid, config.stress_basis)?;
            let chosen: EmbeddingResult = match config.lambda {
                Lambda::Auto => sweep.recommended_result().clone(),
                Lambda::Fixed(x) => match sweep.results.iter().find(|r| r.lambda == x) {
                    Some(r) => r.clone(),
                    None => embed::embed(&ext, x, config.stress_basis)?,
                },
            };
            let map = MapArtifact::new(&chosen, &ds, &ext.patterns, config.stress_basis);
            let sweep_artifact = SweepArtifact::new(&sweep, config.stress_basis, mined.curve.clone(), mined.k);
            let grid = EmbeddingsArtifact {
                schema_version: SCHEMA_VERSION,
                grid: sweep.results,
            };
            Ok((map, sweep_artifact, grid))
        })?)
    } else {
        None
    };

    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        trees_mode: config.trees.describe(),
        lambda_mode: config.lambda.describe(),
        resolved_k: mined.k,
        resolved_lambda: embedding.as_ref().map(|(m, _, _)| m.lambda),
        counts: mined.stats,
        jep_count: mined.set.len(),
        coverage: mined.set.coverage(),
        dataset: artifacts::DatasetSummary::new(&ds),
        ingest: report,
    };

    let raw_dump = match &config.raw_dump {
        Some(path) => Some((path.clone(), forest::mine(&ds, mined.k, config.seed)?)),
        None => None,
    };

    clock.time("emit", || {
        emit(&config.out_dir, |dir| {
            write_json(dir, PATTERNS_FILE, &patterns)?;
            write_json(dir, MATRIX_FILE, &matrix)?;
            if let Some((map, sweep, grid)) = &embedding {
                write_json(dir, MAP_FILE, map)?;
                write_json(dir, SWEEP_FILE, sweep)?;
                write_json(dir, EMBEDDINGS_FILE, grid)?;
            }
            write_json(dir, MANIFEST_FILE, &manifest)
        })?;
        if let Some((path, raw)) = &raw_dump {
            let file = fs::File::create(path).map_err(|e| VaxError::io(path, e))?;
            forest::write_raw_dump(raw, &ds, BufWriter::new(file)).map_err(|e| VaxError::io(path, e))?;
        }
        Ok(())
    })?;
    // Timings vary between runs, so they live outside the deterministic set.
    write_json(&config.out_dir, TIMINGS_FILE, &clock.0).map_err(|e| e.in_stage("emit"))?;
    Ok(RunOutcome {
        manifest,
        timings: clock.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSupport {
    pub instance_id: String,
    pub pattern_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceExplanation {
    pub instances: Vec<InstanceSupport>,
    /// Distinct supporting patterns, in matrix order.
    pub pattern_ids: Vec<usize>,
    pub unsupported: Vec<String>,
    pub rows: Vec<MatrixRow>,
}

/// The supporting pattern of each instance and their matrix rows.
pub fn explain_instances(artifacts: &Artifacts, instance_ids: &[String]) -> Result<InstanceExplanation> {
    let rows = artifacts.instance_rows(instance_ids)?;
    let mut owner = vec![None; artifacts.patterns.n_rows()];
    for p in &artifacts.patterns.patterns {
        for &r in &p.supported_rows {
            owner[r] = Some(p.id);
        }
    }
    let instances: Vec<InstanceSupport> = instance_ids
        .iter()
        .zip(&rows)
        .map(|(id, &r)| InstanceSupport {
            instance_id: id.clone(),
            pattern_id: owner[r],
        })
        .collect();
    let unsupported = instances
        .iter()
        .filter(|i| i.pattern_id.is_none())
        .map(|i| i.instance_id.clone())
        .collect();
    let wanted: std::collections::BTreeSet<usize> = instances.iter().filter_map(|i| i.pattern_id).collect();
    let matrix_rows: Vec<MatrixRow> = artifacts
        .matrix
        .rows
        .iter()
        .filter(|row| wanted.contains(&row.pattern_id))
        .cloned()
        .collect();
    Ok(InstanceExplanation {
        instances,
        pattern_ids: matrix_rows.iter().map(|r| r.pattern_id).collect(),
        unsupported,
        rows: matrix_rows,
    })
}
