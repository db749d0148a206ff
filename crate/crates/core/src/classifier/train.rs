use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::LabeledCorpus;
use super::embed::EmbeddingProvider;
use super::model::{class_index, ClassifierModel, CLASS_ORDER, HIDDEN_UNITS, NUM_CLASSES};
use super::ClassifierError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Train / validation / test fractions.
    pub split: [f64; 3],
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            epochs: 20,
            batch_size: 32,
            split: [0.60, 0.20, 0.20],
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        TrainConfig {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let sum: f64 = self.split.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.split.iter().any(|f| *f < 0.0) {
            return Err(ClassifierError::Config(format!(
                "split fractions {:?} must be non-negative and sum to 1",
                self.split
            )));
        }
        if self.epochs == 0 {
            return Err(ClassifierError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ClassifierError::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ClassifierError::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    cfg: AdamConfig,
    step: i32,
    m: ClassifierModel,
    v: ClassifierModel,
}

impl Adam {
    pub fn new(model: &ClassifierModel, lr: f64, cfg: AdamConfig) -> Self {
        Adam {
            lr,
            cfg,
            step: 0,
            m: ClassifierModel::zeros(model.n, model.hidden),
            v: ClassifierModel::zeros(model.n, model.hidden),
        }
    }

    pub fn step(&mut self, params: &mut ClassifierModel, grad: &ClassifierModel) {
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        let groups = params
            .slices_mut()
            .into_iter()
            .zip(grad.slices())
            .zip(self.m.slices_mut().into_iter().zip(self.v.slices_mut()));
        for ((p, g), (m, v)) in groups {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Index partition of a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle followed by a train/validation/test cut.
pub fn split_indices(len: usize, fractions: [f64; 3], seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_train = ((len as f64) * fractions[0]).round() as usize;
    let n_val = (((len as f64) * fractions[1]).round() as usize).min(len - n_train);
    let test = idx.split_off(n_train + n_val);
    let validation = idx.split_off(n_train);
    Split {
        train: idx,
        validation,
        test,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ClassifierModel,
    pub stats: EpochStats,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Checkpoint with the lowest validation loss (earliest on ties).
    pub model: ClassifierModel,
    pub selected_epoch: usize,
    pub epochs: Vec<EpochStats>,
    pub checkpoints: Vec<Checkpoint>,
    pub split: Split,
    pub initial_train_loss: f64,
}

impl TrainReport {
    pub fn selected(&self) -> &EpochStats {
        &self.epochs[self.selected_epoch - 1]
    }
}

pub(crate) type Example = (Vec<f64>, usize);

pub(crate) fn embed_corpus(
    corpus: &LabeledCorpus,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<Example>, ClassifierError> {
    corpus
        .examples
        .iter()
        .map(|ex| Ok((provider.embed(&ex.text)?, class_index(ex.label))))
        .collect()
}

/// Average of per-batch mean losses over consecutive batches.
pub fn average_batch_loss(
    model: &ClassifierModel,
    examples: &[(&[f64], usize)],
    batch_size: usize,
) -> Result<f64, ClassifierError> {
    if examples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    let mut batches = 0;
    for chunk in examples.chunks(batch_size) {
        total += model.batch_loss(chunk)?;
        batches += 1;
    }
    Ok(total / batches as f64)
}

pub fn train(
    corpus: &LabeledCorpus,
    provider: &dyn EmbeddingProvider,
    cfg: &TrainConfig,
) -> Result<TrainReport, ClassifierError> {
    cfg.validate()?;
    for label in CLASS_ORDER {
        if !corpus.examples.iter().any(|e| e.label == label) {
            return Err(ClassifierError::MissingClass {
                label,
                split: "corpus",
            });
        }
    }
    let data = embed_corpus(corpus, provider)?;
    let split = split_indices(data.len(), cfg.split, cfg.seed);
    let mut present = [false; NUM_CLASSES];
    split.train.iter().for_each(|&i| present[data[i].1] = true);
    if let Some(k) = present.iter().position(|p| !p) {
        return Err(ClassifierError::MissingClass {
            label: CLASS_ORDER[k],
            split: "train",
        });
    }
    if split.validation.is_empty() {
        return Err(ClassifierError::Config(
            "validation split is empty; corpus too small".into(),
        ));
    }

    let view = |ids: &[usize]| -> Vec<(&[f64], usize)> {
        ids.iter().map(|&i| (data[i].0.as_slice(), data[i].1)).collect()
    };
    let val = view(&split.validation);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut model = ClassifierModel::init(provider.dimension(), HIDDEN_UNITS, cfg.seed.wrapping_add(2));
    let mut adam = Adam::new(&model, cfg.learning_rate, cfg.adam);
    let initial_train_loss = average_batch_loss(&model, &view(&split.train), cfg.batch_size)?;

    let mut order = split.train.clone();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut checkpoints = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = view(chunk);
            let (loss, grad) = model.loss_and_grad(&batch)?;
            if !loss.is_finite() {
                return Err(ClassifierError::NonFiniteLoss { epoch, batch: b });
            }
            adam.step(&mut model, &grad);
            total += loss;
            batches += 1;
        }
        let train_loss = total / batches as f64;
        let val_loss = average_batch_loss(&model, &val, cfg.batch_size)?;
        if !val_loss.is_finite() || !model.is_finite() {
            return Err(ClassifierError::NonFiniteLoss {
                epoch,
                batch: batches,
            });
        }
        let stats = EpochStats {
            epoch,
            train_loss,
            val_loss,
        };
        log::debug!("epoch {epoch}: train {train_loss:.4} val {val_loss:.4}");
        epochs.push(stats);
        checkpoints.push(Checkpoint {
            model: model.clone(),
            stats,
        });
    }

    let best = checkpoints
        .iter()
        .min_by(|a, b| a.stats.val_loss.total_cmp(&b.stats.val_loss))
        .expect("at least one epoch");
    Ok(TrainReport {
        model: best.model.clone(),
        selected_epoch: best.stats.epoch,
        epochs,
        checkpoints,
        split,
        initial_train_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let s = split_indices(1000, [0.6, 0.2, 0.2], 3);
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (600, 200, 200));
        let mut all: Vec<_> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        assert_eq!(s, split_indices(1000, [0.6, 0.2, 0.2], 3));

        let s = split_indices(1200, [0.6, 0.2, 0.2], 3);
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (720, 240, 240));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            split: [0.5, 0.2, 0.2],
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // With bias correction the first update is lr * sign(g) (up to eps).
        let mut p = ClassifierModel::zeros(1, 1);
        let mut g = ClassifierModel::zeros(1, 1);
        g.w1[0] = 0.5;
        g.b2[1] = -2.0;
        let mut adam = Adam::new(&p, 0.001, AdamConfig::default());
        adam.step(&mut p, &g);
        assert!((p.w1[0] + 0.001).abs() < 1e-10);
        assert!((p.b2[1] - 0.001).abs() < 1e-10);
        assert_eq!(p.b1[0], 0.0);
    }
}
