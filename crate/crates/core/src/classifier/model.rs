use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::history::ClassLabel;

pub const HIDDEN_UNITS: usize = 128;
pub const NUM_CLASSES: usize = 3;

/// Output order of the network.
pub const CLASS_ORDER: [ClassLabel; NUM_CLASSES] = [
    ClassLabel::ProactiveOpportunity,
    ClassLabel::ExplicitQuery,
    ClassLabel::NonQuery,
];

pub fn class_index(label: ClassLabel) -> usize {
    CLASS_ORDER.iter().position(|&l| l == label).unwrap()
}

/// Two-layer perceptron: `n -> hidden (ReLU) -> 3`.
///
/// `w1` is stored row-major as `n x hidden`, `w2` as `hidden x 3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub n: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub logits: [f64; NUM_CLASSES],
    pub probabilities: [f64; NUM_CLASSES],
}

impl Prediction {
    /// Index of the largest probability; the earliest class wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for k in 1..NUM_CLASSES {
            if self.probabilities[k] > self.probabilities[best] {
                best = k;
            }
        }
        best
    }

    pub fn label(&self) -> ClassLabel {
        CLASS_ORDER[self.argmax()]
    }
}

pub fn softmax(logits: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = logits.map(|z| (z - max).exp());
    let sum: f64 = exps.iter().sum();
    exps.map(|e| e / sum)
}

/// `-log softmax(logits)[target]`, computed stably.
pub fn cross_entropy(logits: &[f64; NUM_CLASSES], target: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[target]
}

impl ClassifierModel {
    pub fn zeros(n: usize, hidden: usize) -> Self {
        ClassifierModel {
            n,
            hidden,
            w1: vec![0.0; n * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * NUM_CLASSES],
            b2: vec![0.0; NUM_CLASSES],
        }
    }

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization for every
    /// weight and bias, as in a default fully connected layer.
    pub fn init(n: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros(n, hidden);
        let b_in = 1.0 / (n as f64).sqrt();
        let b_hid = 1.0 / (hidden as f64).sqrt();
        m.w1.iter_mut().for_each(|w| *w = rng.random_range(-b_in..b_in));
        m.b1.iter_mut().for_each(|w| *w = rng.random_range(-b_in..b_in));
        m.w2.iter_mut().for_each(|w| *w = rng.random_range(-b_hid..b_hid));
        m.b2.iter_mut().for_each(|w| *w = rng.random_range(-b_hid..b_hid));
        m
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn slices(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub(crate) fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    fn check_input(&self, x: &[f64]) -> Result<(), ClassifierError> {
        if x.len() != self.n {
            return Err(ClassifierError::Dimension {
                expected: self.n,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFiniteInput);
        }
        Ok(())
    }

    /// Hidden pre-activations `W1ᵀx + b1`. Zero inputs are skipped.
    fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.b1.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.w1[i * self.hidden..(i + 1) * self.hidden];
            for (zj, wij) in z.iter_mut().zip(row) {
                *zj += xi * wij;
            }
        }
        z
    }

    fn output(&self, h: &[f64]) -> [f64; NUM_CLASSES] {
        let mut logits = [self.b2[0], self.b2[1], self.b2[2]];
        for (j, &hj) in h.iter().enumerate() {
            if hj == 0.0 {
                continue;
            }
            for (k, l) in logits.iter_mut().enumerate() {
                *l += hj * self.w2[j * NUM_CLASSES + k];
            }
        }
        logits
    }

    pub fn forward(&self, x: &[f64]) -> Result<Prediction, ClassifierError> {
        self.check_input(x)?;
        let h: Vec<f64> = self.hidden_pre(x).into_iter().map(|z| z.max(0.0)).collect();
        let logits = self.output(&h);
        Ok(Prediction {
            logits,
            probabilities: softmax(&logits),
        })
    }

    /// Mean cross-entropy over a batch.
    pub fn batch_loss(&self, batch: &[(&[f64], usize)]) -> Result<f64, ClassifierError> {
        let mut total = 0.0;
        for (x, y) in batch {
            total += cross_entropy(&self.forward(x)?.logits, *y);
        }
        Ok(total / batch.len() as f64)
    }

    /// Mean cross-entropy over a batch and its gradient w.r.t. every parameter.
    pub fn loss_and_grad(
        &self,
        batch: &[(&[f64], usize)],
    ) -> Result<(f64, ClassifierModel), ClassifierError> {
        let mut grad = ClassifierModel::zeros(self.n, self.hidden);
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (x, y) in batch {
            self.check_input(x)?;
            let z = self.hidden_pre(x);
            let h: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
            let logits = self.output(&h);
            loss += cross_entropy(&logits, *y);

            let mut dlogits = softmax(&logits);
            dlogits[*y] -= 1.0;
            dlogits.iter_mut().for_each(|d| *d *= scale);

            for (k, d) in dlogits.iter().enumerate() {
                grad.b2[k] += d;
            }
            let mut dz = vec![0.0; self.hidden];
            for j in 0..self.hidden {
                let row = &self.w2[j * NUM_CLASSES..(j + 1) * NUM_CLASSES];
                let grow = &mut grad.w2[j * NUM_CLASSES..(j + 1) * NUM_CLASSES];
                for k in 0..NUM_CLASSES {
                    grow[k] += h[j] * dlogits[k];
                }
                if z[j] > 0.0 {
                    dz[j] = row.iter().zip(&dlogits).map(|(w, d)| w * d).sum();
                }
            }
            for (gb, d) in grad.b1.iter_mut().zip(&dz) {
                *gb += d;
            }
            for (i, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let grow = &mut grad.w1[i * self.hidden..(i + 1) * self.hidden];
                for (g, d) in grow.iter_mut().zip(&dz) {
                    *g += xi * d;
                }
            }
        }
        Ok((loss * scale, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_is_uniform() {
        let m = ClassifierModel::zeros(4, 8);
        let p = m.forward(&[0.3, -1.0, 2.0, 0.5]).unwrap();
        assert_eq!(p.logits, [0.0; 3]);
        for prob in p.probabilities {
            assert!((prob - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(p.label(), ClassLabel::ProactiveOpportunity);
        assert!((cross_entropy(&p.logits, 1) - 3f64.ln()).abs() < 1e-15);
        assert!((3f64.ln() - 1.0986).abs() < 1e-4);
    }

    #[test]
    fn dimension_mismatch() {
        let m = ClassifierModel::zeros(4, 8);
        assert!(matches!(
            m.forward(&[1.0, 2.0]),
            Err(ClassifierError::Dimension { expected: 4, got: 2 })
        ));
        assert!(matches!(
            m.forward(&[1.0, f64::NAN, 0.0, 0.0]),
            Err(ClassifierError::NonFiniteInput)
        ));
    }

    #[test]
    fn softmax_extremes_stay_finite() {
        let p = softmax(&[1000.0, -1000.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(cross_entropy(&[1000.0, -1000.0, 0.0], 1).is_finite());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = ClassifierModel::init(16, 8, 7);
        assert_eq!(a, ClassifierModel::init(16, 8, 7));
        assert_ne!(a, ClassifierModel::init(16, 8, 8));
        assert!(a.w1.iter().all(|w| w.abs() < 0.25));
        assert_eq!(a.parameter_count(), 16 * 8 + 8 + 8 * 3 + 3);
    }
}
