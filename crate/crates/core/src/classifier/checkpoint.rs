use std::path::Path;

use serde::{Deserialize, Serialize};

use super::embed::EmbeddingDescriptor;
use super::model::{ClassifierModel, CLASS_ORDER, NUM_CLASSES};
use super::train::{EpochStats, TrainConfig};
use super::ClassifierError;
use crate::history::ClassLabel;

pub const FORMAT_VERSION: u32 = 1;

/// On-disk checkpoint document. Matrices are nested row arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub format_version: u32,
    pub n: usize,
    pub class_order: Vec<ClassLabel>,
    pub embedding: EmbeddingDescriptor,
    #[serde(rename = "W1")]
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    #[serde(rename = "W2")]
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
    pub train_config: TrainConfig,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: ClassifierModel,
    pub embedding: EmbeddingDescriptor,
    pub train_config: TrainConfig,
    pub stats: EpochStats,
}

fn rows(flat: &[f64], width: usize) -> Vec<Vec<f64>> {
    flat.chunks(width).map(<[f64]>::to_vec).collect()
}

fn flatten(
    name: &str,
    m: &[Vec<f64>],
    height: usize,
    width: usize,
) -> Result<Vec<f64>, ClassifierError> {
    if m.len() != height || m.iter().any(|r| r.len() != width) {
        return Err(ClassifierError::Checkpoint(format!(
            "{name} must be {height}x{width}"
        )));
    }
    Ok(m.concat())
}

impl SavedModel {
    pub fn to_file(&self) -> CheckpointFile {
        let m = &self.model;
        CheckpointFile {
            format_version: FORMAT_VERSION,
            n: m.n,
            class_order: CLASS_ORDER.to_vec(),
            embedding: self.embedding.clone(),
            w1: rows(&m.w1, m.hidden),
            b1: m.b1.clone(),
            w2: rows(&m.w2, NUM_CLASSES),
            b2: m.b2.clone(),
            train_config: self.train_config.clone(),
            epoch: self.stats.epoch,
            train_loss: self.stats.train_loss,
            val_loss: self.stats.val_loss,
        }
    }

    pub fn from_file(f: CheckpointFile) -> Result<Self, ClassifierError> {
        if f.format_version != FORMAT_VERSION {
            return Err(ClassifierError::Checkpoint(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                f.format_version
            )));
        }
        if f.class_order != CLASS_ORDER {
            return Err(ClassifierError::Checkpoint(format!(
                "class_order {:?} does not match {:?}",
                f.class_order, CLASS_ORDER
            )));
        }
        let hidden = f.b1.len();
        if hidden == 0 {
            return Err(ClassifierError::Checkpoint("b1 is empty".into()));
        }
        let model = ClassifierModel {
            n: f.n,
            hidden,
            w1: flatten("W1", &f.w1, f.n, hidden)?,
            b1: f.b1,
            w2: flatten("W2", &f.w2, hidden, NUM_CLASSES)?,
            b2: f.b2,
        };
        if model.b2.len() != NUM_CLASSES {
            return Err(ClassifierError::Checkpoint(format!(
                "b2 must have {NUM_CLASSES} entries"
            )));
        }
        let dim = match &f.embedding {
            EmbeddingDescriptor::Hashing { dim, .. } | EmbeddingDescriptor::Remote { dim, .. } => *dim,
        };
        if dim != f.n {
            return Err(ClassifierError::Checkpoint(format!(
                "embedding dimension {dim} does not match n = {}",
                f.n
            )));
        }
        if !model.is_finite() {
            return Err(ClassifierError::Checkpoint("non-finite parameter".into()));
        }
        Ok(SavedModel {
            model,
            embedding: f.embedding,
            train_config: f.train_config,
            stats: EpochStats {
                epoch: f.epoch,
                train_loss: f.train_loss,
                val_loss: f.val_loss,
            },
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifierError> {
        let file: CheckpointFile = serde_json::from_str(text)
            .map_err(|e| ClassifierError::Checkpoint(format!("parse error: {e}")))?;
        Self::from_file(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassifierError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
