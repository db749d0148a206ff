//! Three-way utterance classifier: embedding, MLP, trainer and corpora.

pub mod checkpoint;
pub mod corpus;
pub mod embed;
pub mod model;
pub mod train;

use thiserror::Error;

use crate::history::ClassLabel;

pub use checkpoint::{CheckpointFile, SavedModel, FORMAT_VERSION};
pub use corpus::{generate_corpus, shipped_corpus, LabeledCorpus, LabeledExample, ProactiveKind, Provenance};
pub use embed::{EmbedError, EmbeddingDescriptor, EmbeddingProvider, HashingEmbedder, RemoteEmbedder};
pub use model::{ClassifierModel, Prediction, CLASS_ORDER, HIDDEN_UNITS, NUM_CLASSES};
pub use train::{train, AdamConfig, Checkpoint, EpochStats, Split, TrainConfig, TrainReport};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("input has dimension {got}, model expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("cannot classify empty text")]
    EmptyText,
    #[error("class {label} missing from {split} split")]
    MissingClass { label: ClassLabel, split: &'static str },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Embeds `text` and returns the argmax label with class probabilities in
/// [`CLASS_ORDER`].
pub fn classify(
    model: &ClassifierModel,
    provider: &dyn EmbeddingProvider,
    text: &str,
) -> Result<(ClassLabel, Prediction), ClassifierError> {
    if text.trim().is_empty() {
        return Err(ClassifierError::EmptyText);
    }
    let x = provider.embed(text)?;
    let p = model.forward(&x)?;
    Ok((p.label(), p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Rows are true classes, columns predictions, both in [`CLASS_ORDER`].
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
    pub total: usize,
}

impl EvalReport {
    pub fn render(&self) -> String {
        let mut out = format!("accuracy: {:.4} ({} examples)\n", self.accuracy, self.total);
        out.push_str("true \\ predicted");
        for l in CLASS_ORDER {
            out.push_str(&format!("\t{l}"));
        }
        out.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            out.push_str(CLASS_ORDER[i].as_str());
            for c in row {
                out.push_str(&format!("\t{c}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn evaluate<'a>(
    model: &ClassifierModel,
    provider: &dyn EmbeddingProvider,
    examples: impl IntoIterator<Item = &'a LabeledExample>,
) -> Result<EvalReport, ClassifierError> {
    let mut confusion = [[0usize; NUM_CLASSES]; NUM_CLASSES];
    let mut total = 0;
    for ex in examples {
        let (_, p) = classify(model, provider, &ex.text)?;
        confusion[model::class_index(ex.label)][p.argmax()] += 1;
        total += 1;
    }
    let correct: usize = (0..NUM_CLASSES).map(|k| confusion[k][k]).sum();
    Ok(EvalReport {
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        confusion,
        total,
    })
}

/// Test-split accuracy of a training run.
pub fn test_accuracy(
    report: &TrainReport,
    corpus: &LabeledCorpus,
    provider: &dyn EmbeddingProvider,
) -> Result<EvalReport, ClassifierError> {
    evaluate(
        &report.model,
        provider,
        report.split.test.iter().map(|&i| &corpus.examples[i]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_rejected() {
        let m = ClassifierModel::zeros(8, 4);
        let e = HashingEmbedder::new(8, 0);
        assert!(matches!(classify(&m, &e, "  "), Err(ClassifierError::EmptyText)));
        let (label, _) = classify(&m, &e, "hello").unwrap();
        assert_eq!(label, ClassLabel::ProactiveOpportunity);
    }

    #[test]
    fn confusion_render() {
        let r = EvalReport {
            accuracy: 0.5,
            confusion: [[1, 0, 0], [1, 0, 0], [0, 0, 0]],
            total: 2,
        };
        let s = r.render();
        assert!(s.starts_with("accuracy: 0.5000 (2 examples)"));
        assert_eq!(s.lines().count(), 5);
    }
}
