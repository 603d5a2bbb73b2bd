//! Labeled driving frames on disk.
//!
//! A dataset directory holds `labels.csv` with the header
//! `frame_id,angle_deg` and one `<frame_id>.ppm` or `<frame_id>.pgm` per row.
//! Angles are in degrees, positive meaning a left turn, and are scaled by
//! 1/25 into `[-1, 1]`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use steercov_core::imgproc::Image;

use crate::error::{HarnessError, Result};

pub const MAX_ANGLE_DEG: f64 = 25.0;
pub const LABELS_FILE: &str = "labels.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: String,
    pub path: PathBuf,
    /// Scaled steering label in `[-1, 1]`.
    pub label: f64,
    pub image: Image,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub root: PathBuf,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Deserialize)]
struct Row {
    frame_id: String,
    angle_deg: f64,
}

pub fn scale_angle(angle_deg: f64) -> f64 {
    angle_deg / MAX_ANGLE_DEG
}

impl Dataset {
    pub fn ingest(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        let labels = root.join(LABELS_FILE);
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(&labels)
            .map_err(|e| HarnessError::Dataset(format!("{}: {e}", labels.display())))?;
        let header = reader.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["frame_id", "angle_deg"] {
            return Err(HarnessError::Dataset(format!(
                "{}: header must be `frame_id,angle_deg`, found `{}`",
                labels.display(),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows: Vec<Row> = reader.deserialize().collect::<Result<_, _>>()?;
        rows.sort_by(|a, b| a.frame_id.cmp(&b.frame_id));
        let mut seen = BTreeSet::new();
        let mut frames = Vec::with_capacity(rows.len());
        for row in rows {
            if !seen.insert(row.frame_id.clone()) {
                return Err(HarnessError::Ingest {
                    frame: row.frame_id,
                    reason: "duplicate frame id".into(),
                });
            }
            if row.angle_deg.is_nan() || row.angle_deg.abs() > MAX_ANGLE_DEG {
                return Err(HarnessError::LabelRange {
                    frame: row.frame_id,
                    angle_deg: row.angle_deg,
                });
            }
            let path = ["ppm", "pgm"]
                .iter()
                .map(|ext| root.join(format!("{}.{ext}", row.frame_id)))
                .find(|p| p.is_file())
                .ok_or_else(|| HarnessError::Ingest {
                    frame: row.frame_id.clone(),
                    reason: "no .ppm or .pgm image".into(),
                })?;
            let image = Image::load(&path).map_err(|e| HarnessError::Ingest {
                frame: row.frame_id.clone(),
                reason: e.to_string(),
            })?;
            frames.push(Frame {
                label: scale_angle(row.angle_deg),
                id: row.frame_id,
                path,
                image,
            });
        }
        if frames.is_empty() {
            return Err(HarnessError::Dataset(format!("{} has no rows", labels.display())));
        }
        Ok(Self {
            root: root.to_path_buf(),
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, id: &str) -> Option<&Frame> {
        self.frames.iter().find(|f| f.id == id)
    }

    /// The first `n` frames in id order.
    pub fn seeds(&self, n: usize) -> &[Frame] {
        &self.frames[..n.min(self.frames.len())]
    }
}
