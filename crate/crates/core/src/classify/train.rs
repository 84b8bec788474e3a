use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::activation::{OutputMode, ProbabilityVector};
use super::model::{ResidualHead, DEFAULT_HIDDEN, INPUTS};
use super::optim::{OptimizerKind, OptimizerState};
use super::ClassifyError;
use crate::features::{extract_features, FeatureVector};
use crate::rng::{mix, seeded};
use crate::synth::{stratified_indices, Corpus, DegradationKind, LabelSet, K};

/// Default training protocol: 35 epochs, batch 64, Adam at 1e-3.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub momentum: f64,
    pub hidden: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            epochs: 35,
            batch_size: 64,
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.001,
            momentum: 0.9,
            hidden: DEFAULT_HIDDEN,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

impl Hyperparams {
    fn validate(&self) -> Result<(), ClassifyError> {
        if self.epochs == 0 || self.batch_size == 0 || self.hidden == 0 {
            return Err(ClassifyError::InvalidHyperparams("epochs, batch_size and hidden must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ClassifyError::InvalidHyperparams(format!("learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_accuracy\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_loss, e.val_loss, e.val_accuracy));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub features: [f64; INPUTS],
    pub labels: LabelSet,
}

impl Example {
    pub fn new(features: FeatureVector, labels: LabelSet) -> Self {
        Self { features: features.0, labels }
    }

    pub fn target(&self) -> [f64; K] {
        let mut y = [0.0; K];
        for k in &self.labels {
            y[k.index()] = 1.0;
        }
        y
    }
}

/// Featurizes every corpus image (in parallel; output order is corpus order).
pub fn featurize(corpus: &Corpus) -> Result<Vec<Example>, ClassifyError> {
    corpus
        .samples
        .par_iter()
        .map(|s| Ok(Example::new(extract_features(&s.image)?, s.labels.clone())))
        .collect()
}

/// Prediction rule used for validation accuracy: a single-label sample is
/// correct when its label is the argmax; any other sample is correct when the
/// set of classes with probability >= 0.5 equals its label set.
pub fn is_correct(probs: &ProbabilityVector, labels: &LabelSet) -> bool {
    if labels.len() == 1 {
        return labels.contains(&probs.argmax());
    }
    let predicted: LabelSet = DegradationKind::ALL.into_iter().filter(|k| probs.get(*k) >= 0.5).collect();
    &predicted == labels
}

fn evaluate(model: &ResidualHead, examples: &[&Example], mode: OutputMode) -> (f64, f64) {
    if examples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let targets: Vec<[f64; K]> = examples.iter().map(|e| e.target()).collect();
    let batch: Vec<_> = examples.iter().zip(&targets).map(|(e, t)| (&e.features, t)).collect();
    let loss = model.loss(&batch, mode);
    let correct = examples
        .iter()
        .filter(|e| {
            let z = model.logits(&e.features);
            is_correct(&ProbabilityVector::from_logits(&z, mode), &e.labels)
        })
        .count();
    (loss, correct as f64 / examples.len() as f64)
}

pub fn train(corpus: &Corpus, hyper: &Hyperparams, mode: OutputMode) -> Result<(ResidualHead, TrainingHistory), ClassifyError> {
    if corpus.is_empty() {
        return Err(ClassifyError::EmptyCorpus);
    }
    train_on_examples(&featurize(corpus)?, hyper, mode)
}

/// Trains on pre-computed features. A stratified `validation_fraction` of
/// the examples is held out; everything is deterministic in `hyper.seed`.
pub fn train_on_examples(
    examples: &[Example],
    hyper: &Hyperparams,
    mode: OutputMode,
) -> Result<(ResidualHead, TrainingHistory), ClassifyError> {
    if examples.is_empty() {
        return Err(ClassifyError::EmptyCorpus);
    }
    hyper.validate()?;
    let keys: Vec<&LabelSet> = examples.iter().map(|e| &e.labels).collect();
    let (train_idx, val_idx) = stratified_indices(&keys, hyper.validation_fraction, mix(hyper.seed, 0x7661_6c))?;
    let train_set: Vec<&Example> = train_idx.iter().map(|&i| &examples[i]).collect();
    let val_set: Vec<&Example> = val_idx.iter().map(|&i| &examples[i]).collect();
    let targets: Vec<[f64; K]> = train_set.iter().map(|e| e.target()).collect();

    let mut model = ResidualHead::init(hyper.hidden, mix(hyper.seed, 0x696e_6974));
    let n_params = model.params().len();
    let mut opt = match hyper.optimizer {
        OptimizerKind::Adam => OptimizerState::adam(n_params, hyper.learning_rate),
        OptimizerKind::SgdMomentum => OptimizerState::sgd_momentum(n_params, hyper.learning_rate, hyper.momentum)?,
    };

    let mut history = TrainingHistory::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut grad = vec![0.0; n_params];
    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut seeded(mix(hyper.seed, epoch as u64)));
        for chunk in order.chunks(hyper.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| (&train_set[i].features, &targets[i])).collect();
            grad.iter_mut().for_each(|g| *g = 0.0);
            model.loss_and_grad(&batch, mode, &mut grad);
            opt.step(model.params_mut(), &grad)?;
        }
        let (train_loss, _) = evaluate(&model, &train_set, mode);
        let (val_loss, val_accuracy) = evaluate(&model, &val_set, mode);
        log::debug!("epoch {epoch}: train {train_loss:.4} val {val_loss:.4} acc {val_accuracy:.3}");
        history.epochs.push(EpochRecord { epoch, train_loss, val_loss, val_accuracy });
    }
    Ok((model, history))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub val_accuracy: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter: String,
    pub best: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{},val_accuracy,val_loss,seconds\n", self.parameter);
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", r.value, r.val_accuracy, r.val_loss, r.seconds));
        }
        s
    }
}

/// Trains once per value with the same seed; the best value has the highest
/// final validation accuracy, ties going to the smallest value.
fn sweep(
    examples: &[Example],
    values: &[f64],
    parameter: &str,
    mode: OutputMode,
    configure: impl Fn(f64) -> Hyperparams,
) -> Result<SweepReport, ClassifyError> {
    if values.is_empty() {
        return Err(ClassifyError::EmptyRateSet);
    }
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let start = Instant::now();
        let (_, hist) = train_on_examples(examples, &configure(v), mode)?;
        let last = hist.last().expect("epochs >= 1");
        rows.push(SweepRow {
            value: v,
            val_accuracy: last.val_accuracy,
            val_loss: last.val_loss,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let best = rows
        .iter()
        .max_by(|a, b| {
            a.val_accuracy
                .total_cmp(&b.val_accuracy)
                .then_with(|| b.value.total_cmp(&a.value))
        })
        .map(|r| r.value)
        .expect("non-empty");
    Ok(SweepReport { parameter: parameter.into(), best, rows })
}

/// Adam learning-rate sweep.
pub fn lr_sweep(examples: &[Example], rates: &[f64], hyper: &Hyperparams, mode: OutputMode) -> Result<SweepReport, ClassifyError> {
    sweep(examples, rates, "learning_rate", mode, |lr| Hyperparams {
        learning_rate: lr,
        optimizer: OptimizerKind::Adam,
        ..hyper.clone()
    })
}

/// Momentum sweep for SGD at the configured learning rate.
pub fn momentum_sweep(
    examples: &[Example],
    momenta: &[f64],
    hyper: &Hyperparams,
    mode: OutputMode,
) -> Result<SweepReport, ClassifyError> {
    sweep(examples, momenta, "momentum", mode, |m| Hyperparams {
        momentum: m,
        optimizer: OptimizerKind::SgdMomentum,
        ..hyper.clone()
    })
}

pub const SWEEP_LEARNING_RATES: [f64; 3] = [0.001, 0.003, 0.01];
pub const SWEEP_MOMENTA: [f64; 3] = [0.9, 0.95, 0.98];
