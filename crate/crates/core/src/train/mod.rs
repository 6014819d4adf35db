//! Adam training loop, per-epoch logging and checkpointing, and split-level
//! inference.

mod adam;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, adam_update, AdamState};

use crate::data::{batches, AugmentConfig, DatasetIndex, LoadOptions, Split};
use crate::error::TrainError;
use crate::net::NetworkGraph;
use crate::ops::{cross_entropy, softmax_cross_entropy_grad, Mode};
use crate::rng::{stream, Stream};
use crate::tensor::{Scalar, Tensor};
use crate::weights::{self, ArchiveMetadata};

pub const LOG_FILE: &str = "train_log.jsonl";
pub const FINAL_FILE: &str = "final.wts";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self { learning_rate: 1e-4, batch_size: 8, epochs: 150, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, seed: 0 }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::InvalidHyperParams(msg.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        Ok(())
    }
}

/// One line of the training log. `secs` is wall time and is the only
/// non-deterministic field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub acc: f64,
    pub secs: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn to_jsonl(&self) -> String {
        self.epochs.iter().map(|r| serde_json::to_string(r).expect("record serializes") + "\n").collect()
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let epochs =
            text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect::<Result<_, _>>()?;
        Ok(Self { epochs })
    }
}

/// Loss and correct-prediction count of one optimizer step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub correct: usize,
}

/// Optimizer state and dropout stream for step-by-step training.
#[derive(Clone, Debug)]
pub struct Trainer<T: Scalar = f32> {
    pub hp: HyperParams,
    pub adam: AdamState<T>,
    dropout_rng: ChaCha8Rng,
    epoch: usize,
    step: usize,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(hp: HyperParams) -> Result<Self, TrainError> {
        hp.validate()?;
        let dropout_rng = stream(hp.seed, Stream::Dropout);
        Ok(Self { hp, adam: AdamState::new(), dropout_rng, epoch: 0, step: 0 })
    }

    /// Train-mode forward, cross-entropy on the batch, backward and one Adam
    /// update. `images` is `[b, 3, s, s]`, `labels` one-hot `[b, classes]`.
    pub fn step(
        &mut self,
        graph: &mut NetworkGraph<T>,
        images: &Tensor<T>,
        labels: &Tensor<T>,
    ) -> Result<StepStats, TrainError> {
        self.step += 1;
        let (probs, tape) = graph.forward_recorded(images, Mode::Train, &mut self.dropout_rng)?;
        let loss = cross_entropy(labels, &probs)?.as_f64();
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch: self.epoch, step: self.step });
        }
        let grad = softmax_cross_entropy_grad(labels, &probs)?;
        let grads = graph.backward_from_logits(&tape, &grad)?;
        adam_step(graph, &grads, &mut self.adam, &self.hp)?;
        let c = labels.shape()[1];
        let correct =
            probs.data().chunks(c).zip(labels.data().chunks(c)).filter(|(p, y)| argmax(p) == argmax(y)).count();
        Ok(StepStats { loss, correct })
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Where and how [`train`] reads images and writes artifacts.
#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    pub load: LoadOptions,
    pub augment: AugmentConfig,
    /// When set, epoch checkpoints, `final.wts` and the JSONL log go here.
    pub checkpoint_dir: Option<PathBuf>,
    /// Keep every epoch checkpoint instead of only the latest and the best
    /// (lowest training loss).
    pub keep_all_checkpoints: bool,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io { path: path.to_path_buf(), source }
}

fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join(format!("epoch_{epoch}.wts"))
}

/// Trains the trainable tensors of `graph` on the train split of `index`.
/// `on_epoch` sees each record as soon as the epoch finishes.
pub fn train<T: Scalar>(
    graph: &mut NetworkGraph<T>,
    index: &DatasetIndex,
    hp: &HyperParams,
    opts: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainLog, TrainError> {
    let mut trainer = Trainer::<T>::new(hp.clone())?;
    opts.augment.validate()?;
    let n = index.entries(Split::Train).len();
    let metadata = ArchiveMetadata::new(graph.arch(), index.class_names.clone(), opts.load.normalization);

    let mut log_file = match &opts.checkpoint_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            let path = dir.join(LOG_FILE);
            Some((BufWriter::new(File::create(&path).map_err(io_err(&path))?), path))
        }
        None => None,
    };

    let mut data_rng = stream(hp.seed, Stream::Data);
    let mut log = TrainLog::default();
    let mut best: Option<(usize, f64)> = None;
    let mut last_kept: Option<usize> = None;
    for epoch in 1..=hp.epochs {
        let start = Instant::now();
        trainer.epoch = epoch;
        trainer.step = 0;
        let (mut loss_sum, mut correct) = (0.0, 0);
        for batch in batches(index, Split::Train, hp.batch_size, true, &opts.augment, opts.load, &mut data_rng)? {
            let batch = batch?;
            let stats = trainer.step(graph, &batch.images.cast(), &batch.labels.cast())?;
            loss_sum += stats.loss * batch.len() as f64;
            correct += stats.correct;
        }
        let record = EpochRecord {
            epoch,
            loss: loss_sum / n as f64,
            acc: correct as f64 / n as f64,
            secs: start.elapsed().as_secs_f64(),
        };

        if let Some(dir) = &opts.checkpoint_dir {
            weights::save(graph, &checkpoint_path(dir, epoch), metadata.clone())?;
            let prev_best = best.map(|b| b.0);
            if best.is_none_or(|(_, l)| record.loss < l) {
                best = Some((epoch, record.loss));
            }
            if !opts.keep_all_checkpoints {
                let keep = [epoch, best.expect("set above").0];
                for old in [last_kept, prev_best].into_iter().flatten() {
                    if !keep.contains(&old) {
                        let path = checkpoint_path(dir, old);
                        if path.exists() {
                            fs::remove_file(&path).map_err(io_err(&path))?;
                        }
                    }
                }
            }
            last_kept = Some(epoch);
        }
        if let Some((w, path)) = &mut log_file {
            let line = serde_json::to_string(&record).expect("record serializes");
            writeln!(w, "{line}").and_then(|_| w.flush()).map_err(io_err(path))?;
        }
        on_epoch(&record);
        log.epochs.push(record);
    }
    if let Some(dir) = &opts.checkpoint_dir {
        weights::save(graph, &dir.join(FINAL_FILE), metadata)?;
    }
    Ok(log)
}

/// Class-probability rows for a split, in index order.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictions {
    pub probs: Vec<Vec<f32>>,
    pub labels: Vec<usize>,
    pub paths: Vec<PathBuf>,
}

impl Predictions {
    pub fn predicted(&self) -> Vec<usize> {
        self.probs.iter().map(|p| argmax(p)).collect()
    }
}

/// Eval-mode inference over a whole split (never shuffled or augmented).
pub fn predict_split<T: Scalar>(
    graph: &NetworkGraph<T>,
    index: &DatasetIndex,
    split: Split,
    load: LoadOptions,
    batch_size: usize,
) -> Result<Predictions, TrainError> {
    let mut rng = stream(0, Stream::Dropout);
    let mut unused = stream(0, Stream::Data);
    let mut out = Predictions { probs: Vec::new(), labels: Vec::new(), paths: Vec::new() };
    for batch in batches(index, split, batch_size.max(1), false, &AugmentConfig::disabled(), load, &mut unused)? {
        let batch = batch?;
        let probs = graph.forward(&batch.images.cast(), Mode::Eval, &mut rng)?;
        let c = probs.shape()[1];
        out.probs.extend(probs.data().chunks(c).map(|r| r.iter().map(|v| v.as_f64() as f32).collect::<Vec<_>>()));
        out.labels.extend(batch.classes);
        out.paths.extend(batch.paths);
    }
    Ok(out)
}

/// Mean clamped cross-entropy and accuracy of probability rows against labels.
pub fn loss_and_accuracy(probs: &[Vec<f32>], labels: &[usize]) -> Result<(f64, f64), TrainError> {
    let n = labels.len();
    if n == 0 || probs.len() != n {
        return Err(TrainError::InvalidHyperParams(format!("{} probability rows for {n} labels", probs.len())));
    }
    let c = probs[0].len();
    let p = Tensor::<f64>::new([n, c], probs.iter().flatten().map(|&v| v as f64).collect())?;
    let mut y = Tensor::<f64>::zeros([n, c]);
    for (i, &l) in labels.iter().enumerate() {
        y.data_mut()[i * c + l] = 1.0;
    }
    let loss = cross_entropy(&y, &p)?.as_f64();
    let correct = probs.iter().zip(labels).filter(|(p, &l)| argmax(p) == l).count();
    Ok((loss, correct as f64 / n as f64))
}

/// Eval-mode loss and accuracy of `graph` on `split`.
pub fn evaluate_loss<T: Scalar>(
    graph: &NetworkGraph<T>,
    index: &DatasetIndex,
    split: Split,
    load: LoadOptions,
    batch_size: usize,
) -> Result<(f64, f64), TrainError> {
    let preds = predict_split(graph, index, split, load, batch_size)?;
    loss_and_accuracy(&preds.probs, &preds.labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let hp = HyperParams::default();
        assert_eq!((hp.learning_rate, hp.batch_size, hp.epochs), (1e-4, 8, 150));
        hp.validate().unwrap();
        for bad in [
            HyperParams { learning_rate: 0.0, ..hp.clone() },
            HyperParams { batch_size: 0, ..hp.clone() },
            HyperParams { epochs: 0, ..hp.clone() },
            HyperParams { beta2: 1.0, ..hp.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(TrainError::InvalidHyperParams(_))));
        }
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn log_roundtrip_and_field_order() {
        let log = TrainLog { epochs: vec![EpochRecord { epoch: 1, loss: 0.5, acc: 0.25, secs: 1.0 }] };
        let text = log.to_jsonl();
        assert_eq!(text, "{\"epoch\":1,\"loss\":0.5,\"acc\":0.25,\"secs\":1.0}\n");
        assert_eq!(TrainLog::parse_jsonl(&text).unwrap(), log);
    }

    #[test]
    fn loss_and_accuracy_oracle() {
        let probs = vec![vec![0.5, 0.25, 0.25], vec![0.1, 0.8, 0.1]];
        let (loss, acc) = loss_and_accuracy(&probs, &[0, 2]).unwrap();
        let expected = -(0.5f64.ln() + (0.1f32 as f64).ln()) / 2.0;
        assert!((loss - expected).abs() < 1e-12);
        assert_eq!(acc, 0.5);
    }
}
