//! Report files: JSON sections, JSON-lines violations, CSV summaries and
//! generated images with their manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use steercov_core::imgproc::{TransformKind, TransformSpec};
use steercov_core::nn::Network;
use steercov_core::oracle::{ErrorTable, SweepTable, ViolationRecord};
use steercov_core::search::{AuditEntry, SearchResult};

use crate::config::RunConfig;
use crate::experiments::{CoverageSection, GuidedSection, OracleSection, StudySection, GUIDED_GROUP};
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub toolkit_version: String,
    pub config_hash: String,
    /// The canonical config text the hash was computed over.
    pub config: String,
    pub model_name: String,
    pub model_fingerprint: String,
    pub total_neurons: usize,
    pub dataset_frames: usize,
    pub seeds: usize,
}

impl Meta {
    pub fn new<N: Network + ?Sized>(cfg: &RunConfig, model_name: &str, net: &N, frames: usize) -> Self {
        Self {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.hash(),
            config: cfg.canonical(),
            model_name: model_name.to_string(),
            model_fingerprint: format!("{:016x}", net.fingerprint()),
            total_neurons: net.total_neurons(),
            dataset_frames: frames,
            seeds: cfg.max_seeds.min(frames),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub meta: Meta,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study: Option<StudySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guided: Option<GuidedSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
}

impl Report {
    pub fn new(meta: Meta) -> Self {
        Self {
            meta,
            coverage: None,
            study: None,
            guided: None,
            oracle: None,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| HarnessError::io(path, e))?;
    finish(w, path)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n").map_err(|e| HarnessError::io(path, e))?;
    }
    finish(w, path)
}

pub fn read_violations(path: &Path) -> Result<Vec<ViolationRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Into::into))
        .collect()
}

/// Row order of the error table: simple kinds, then fog, rain and guided.
pub fn error_groups() -> Vec<String> {
    TransformKind::ALL
        .iter()
        .map(|k| k.name().to_string())
        .chain([GUIDED_GROUP.to_string()])
        .collect()
}

/// Rows are transformation groups, columns are models.
pub fn write_error_csv(path: &Path, table: &ErrorTable, models: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["transformation".to_string()];
    header.extend(models.iter().cloned());
    w.write_record(&header)?;
    for group in error_groups() {
        let mut row = vec![group.clone()];
        row.extend(models.iter().map(|m| table.get(&group, m).to_string()));
        w.write_record(&row)?;
    }
    let mut total = vec!["total".to_string()];
    total.extend(models.iter().map(|m| {
        error_groups()
            .iter()
            .map(|g| table.get(g, m))
            .sum::<usize>()
            .to_string()
    }));
    w.write_record(&total)?;
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// One row per λ: the gated simple counts for each ε, then one column per
/// composite group. The configured cell is marked with `*`.
pub fn write_sweep_csv(path: &Path, table: &SweepTable, default_cell: Option<[usize; 2]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["lambda".to_string()];
    header.extend(table.epsilons.iter().map(|e| format!("eps={e}")));
    header.extend(table.composite.keys().cloned());
    w.write_record(&header)?;
    for (li, lambda) in table.lambdas.iter().enumerate() {
        let mut row = vec![lambda.to_string()];
        for (ei, n) in table.simple[li].iter().enumerate() {
            let mark = if default_cell == Some([li, ei]) { "*" } else { "" };
            row.push(format!("{n}{mark}"));
        }
        row.extend(table.composite.values().map(|col| col[li].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub seed_id: String,
    pub provenance: Vec<String>,
    pub chain: Vec<TransformSpec>,
    pub prediction: f32,
    pub new_neurons: usize,
    pub covered_after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub start_covered: usize,
    pub final_covered: usize,
    pub images: Vec<ManifestEntry>,
}

/// Writes `<name>.ppm` (or `.pgm`) per generated image, `manifest.json`
/// and `audit.jsonl` under `dir`.
pub fn write_generated(dir: &Path, result: &SearchResult) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut images = Vec::with_capacity(result.generated.len());
    for g in &result.generated {
        let ext = if g.image.channels() == 3 { "ppm" } else { "pgm" };
        let file = format!("{}.{ext}", g.name);
        g.image.save(dir.join(&file))?;
        images.push(ManifestEntry {
            file,
            seed_id: g.seed_id.clone(),
            provenance: g.provenance.iter().map(ToString::to_string).collect(),
            chain: g.provenance.clone(),
            prediction: g.prediction,
            new_neurons: g.new_neurons,
            covered_after: g.covered_after,
        });
    }
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            start_covered: result.start_coverage.len(),
            final_covered: result.final_coverage.len(),
            images,
        },
    )?;
    write_jsonl::<AuditEntry>(&dir.join("audit.jsonl"), &result.audit)
}
