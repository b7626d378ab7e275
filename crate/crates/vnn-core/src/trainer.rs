//! Mini-batch gradient descent, evaluation metrics, and the
//! finite-difference gradient checker.
//!
//! Training is plain SGD with optional per-epoch learning-rate decay — no
//! momentum, no adaptive scaling — applied to the regularized objective
//! (mean cross-entropy plus `(λ/2)Σ‖W‖²`). Shuffling is Fisher–Yates from a
//! ChaCha8 stream seeded by the run seed, so a (seed, config, dataset)
//! triple reproduces the exact trajectory.
//!
//! Within a batch, per-sample forward/backward passes run in parallel and
//! are reduced in sample order afterwards, so results are independent of
//! the worker count.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VnnError};
use crate::model::{argmax, Dataset, Model, Sample};

/// Hyperparameters of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub lambda: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Epochs between held-out evaluations.
    pub eval_every: usize,
    /// Multiplicative learning-rate factor applied after each epoch.
    pub lr_decay: f64,
    /// Stop once running train accuracy reaches this value and a full
    /// evaluation pass confirms it.
    pub early_stop_train_acc: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            lambda: 0.0,
            batch_size: 8,
            epochs: 50,
            seed: 0,
            eval_every: 1,
            lr_decay: 0.99,
            early_stop_train_acc: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(VnnError::Config(format!(
                "learning rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(VnnError::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.eval_every == 0 {
            return Err(VnnError::Config(
                "batch size, epochs, and eval cadence must be at least 1".into(),
            ));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(VnnError::Config(format!(
                "lr decay must lie in (0, 1], got {}",
                self.lr_decay
            )));
        }
        Ok(())
    }
}

/// One epoch of metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_acc: Option<f64>,
    pub wall_ms: f64,
}

/// Run-level summary appended after the epoch records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSummary {
    pub seed: u64,
    pub epochs_run: usize,
    pub param_census: usize,
    /// Regularized objective over the training set before the first step.
    pub initial_objective: f64,
    /// Regularized objective over the training set after the last step.
    pub final_objective: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub summary: TrainSummary,
}

impl TrainReport {
    pub fn final_train_acc(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.train_acc)
    }

    pub fn final_eval_acc(&self) -> Option<f64> {
        self.epochs.iter().rev().find_map(|e| e.eval_acc)
    }

    /// Line-oriented JSON: one epoch record per line, then one summary line.
    pub fn write_jsonl(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut file = std::fs::File::create(path)?;
        for record in &self.epochs {
            writeln!(file, "{}", serde_json::to_string(record)?)?;
        }
        writeln!(
            file,
            "{}",
            serde_json::to_string(&serde_json::json!({ "summary": &self.summary }))?
        )?;
        Ok(())
    }
}

fn check_dataset<M: Model>(model: &M, dataset: &Dataset) -> Result<()> {
    if dataset.is_empty() {
        return Err(VnnError::Config("dataset is empty".into()));
    }
    for sample in &dataset.samples {
        if sample.label >= model.classes() {
            return Err(VnnError::Data {
                id: sample.id.clone(),
                message: format!(
                    "label {} out of range for {} classes",
                    sample.label,
                    model.classes()
                ),
            });
        }
    }
    Ok(())
}

/// Mean regularized objective of the model over a sample slice, evaluated
/// in parallel.
fn objective<M: Model>(model: &M, samples: &[Sample], lambda: f64) -> Result<f64> {
    let total: f64 = samples
        .par_iter()
        .map(|s| model.loss(s))
        .collect::<Result<Vec<_>>>()?
        .iter()
        .sum();
    Ok(total / samples.len() as f64 + 0.5 * lambda * model.decay_sq_norm())
}

/// Run mini-batch SGD. Deterministic given (seed, config, dataset): batch
/// gradients are reduced in sample order regardless of worker count.
pub fn train<M: Model>(
    model: &mut M,
    train_set: &Dataset,
    eval_set: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    check_dataset(model, train_set)?;
    if let Some(eval) = eval_set {
        check_dataset(model, eval)?;
    }

    let n = train_set.len();
    let initial_objective = objective(model, &train_set.samples, config.lambda)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut lr = config.learning_rate;
    let mut indices: Vec<usize> = (0..n).collect();
    let mut epochs = Vec::new();

    'epochs: for epoch in 1..=config.epochs {
        let started = Instant::now();
        indices.shuffle(&mut rng);
        let mut epoch_ce = 0.0;
        let mut epoch_correct = 0usize;

        for (step, batch) in indices.chunks(config.batch_size).enumerate() {
            let evals = batch
                .par_iter()
                .map(|&i| model.eval_with_grads(&train_set.samples[i]))
                .collect::<Result<Vec<_>>>()?;
            let batch_len = batch.len() as f64;
            let mut batch_ce = 0.0;
            let mut grads: Option<Vec<Vec<f64>>> = None;
            for eval in evals {
                batch_ce += eval.loss;
                epoch_correct += eval.correct as usize;
                match &mut grads {
                    None => grads = Some(eval.grads),
                    Some(acc) => {
                        for (dst, src) in acc.iter_mut().zip(&eval.grads) {
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    }
                }
            }
            epoch_ce += batch_ce;
            let batch_loss =
                batch_ce / batch_len + 0.5 * config.lambda * model.decay_sq_norm();
            if !batch_loss.is_finite() || batch_loss > 1e6 {
                return Err(VnnError::Divergence {
                    epoch,
                    step,
                    message: format!("batch objective reached {batch_loss:e}"),
                });
            }
            let grads = grads.expect("non-empty batch");
            for g in 0..model.group_count() {
                let decay = if model.group_decays(g) {
                    config.lambda
                } else {
                    0.0
                };
                let grad = &grads[g];
                for (w, &dw) in model.group_mut(g).iter_mut().zip(grad) {
                    *w -= lr * (dw / batch_len + decay * *w);
                }
            }
        }

        let train_loss = epoch_ce / n as f64 + 0.5 * config.lambda * model.decay_sq_norm();
        let train_acc = epoch_correct as f64 / n as f64;
        let is_last = epoch == config.epochs;
        let mut eval_acc = match eval_set {
            Some(eval) if epoch % config.eval_every == 0 || is_last => {
                Some(evaluate(model, eval)?.accuracy)
            }
            _ => None,
        };

        let mut stop = false;
        if let Some(target) = config.early_stop_train_acc {
            if train_acc >= target && evaluate(model, train_set)?.accuracy >= target {
                stop = true;
                if eval_acc.is_none() {
                    if let Some(eval) = eval_set {
                        eval_acc = Some(evaluate(model, eval)?.accuracy);
                    }
                }
            }
        }

        epochs.push(EpochRecord {
            epoch,
            train_loss,
            train_acc,
            eval_acc,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        lr *= config.lr_decay;
        if stop {
            break 'epochs;
        }
    }

    let final_objective = objective(model, &train_set.samples, config.lambda)?;
    let epochs_run = epochs.len();
    Ok(TrainReport {
        epochs,
        summary: TrainSummary {
            seed: config.seed,
            epochs_run,
            param_census: model.census(),
            initial_objective,
            final_objective,
        },
    })
}

/// Evaluation metrics: accuracy over videos (clips grouped by
/// [`Sample::video_key`], majority vote, ties broken by summed
/// probabilities) and a per-clip confusion matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    /// `confusion[true_label][predicted]`, counted per clip.
    pub confusion: Vec<Vec<usize>>,
    pub clips: usize,
    pub videos: usize,
}

pub fn evaluate<M: Model>(model: &M, dataset: &Dataset) -> Result<EvalReport> {
    check_dataset(model, dataset)?;
    let classes = model.classes();
    let probs = dataset
        .samples
        .par_iter()
        .map(|s| model.probs(s))
        .collect::<Result<Vec<_>>>()?;

    let mut confusion = vec![vec![0usize; classes]; classes];
    // (label, per-class votes, summed probabilities) per video
    let mut videos: Vec<(usize, Vec<usize>, Vec<f64>)> = Vec::new();
    let mut video_index: HashMap<String, usize> = HashMap::new();
    for (sample, p) in dataset.samples.iter().zip(&probs) {
        let predicted = argmax(p);
        confusion[sample.label][predicted] += 1;
        let key = sample.video_key().to_string();
        let slot = *video_index.entry(key).or_insert_with(|| {
            videos.push((sample.label, vec![0; classes], vec![0.0; classes]));
            videos.len() - 1
        });
        videos[slot].1[predicted] += 1;
        for (acc, x) in videos[slot].2.iter_mut().zip(p) {
            *acc += x;
        }
    }

    let mut correct = 0usize;
    let mut class_total = vec![0usize; classes];
    let mut class_correct = vec![0usize; classes];
    for (label, votes, prob_sums) in &videos {
        let top_votes = *votes.iter().max().unwrap();
        let tied = votes.iter().filter(|&&v| v == top_votes).count();
        let predicted = if tied > 1 {
            // tie: fall back to summed probabilities over the tied classes
            let mut best = usize::MAX;
            for (c, &v) in votes.iter().enumerate() {
                if v == top_votes && (best == usize::MAX || prob_sums[c] > prob_sums[best]) {
                    best = c;
                }
            }
            best
        } else {
            argmax(&votes.iter().map(|&v| v as f64).collect::<Vec<_>>())
        };
        class_total[*label] += 1;
        if predicted == *label {
            correct += 1;
            class_correct[*label] += 1;
        }
    }

    Ok(EvalReport {
        accuracy: correct as f64 / videos.len() as f64,
        per_class_accuracy: (0..classes)
            .map(|c| {
                if class_total[c] == 0 {
                    0.0
                } else {
                    class_correct[c] as f64 / class_total[c] as f64
                }
            })
            .collect(),
        confusion,
        clips: dataset.len(),
        videos: videos.len(),
    })
}

/// Finite-difference step for gradient checking.
const FD_STEP: f64 = 1e-6;
/// Coordinates sampled per parameter group.
const FD_COORDS_PER_GROUP: usize = 200;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupCheck {
    pub name: String,
    pub coords_checked: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub pass: bool,
    pub groups: Vec<GroupCheck>,
}

impl GradCheckReport {
    /// Names of groups whose worst relative error exceeds the tolerance.
    pub fn failing_groups(&self) -> Vec<&str> {
        self.groups
            .iter()
            .filter(|g| g.max_rel_err > self.tolerance)
            .map(|g| g.name.as_str())
            .collect()
    }
}

/// Compare the model's analytic gradients on one sample against central
/// finite differences of the cross-entropy, sampling up to 200 coordinates
/// per parameter group.
pub fn grad_check<M: Model>(
    model: &M,
    sample: &Sample,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let eval = model.eval_with_grads(sample)?;
    check_grads_against_fd(model, sample, &eval.grads, tolerance, seed)
}

/// Core of [`grad_check`], usable with externally supplied (possibly
/// corrupted) analytic gradients.
pub fn check_grads_against_fd<M: Model>(
    model: &M,
    sample: &Sample,
    analytic: &[Vec<f64>],
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    if !tolerance.is_finite() || tolerance <= 0.0 {
        return Err(VnnError::Domain(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    if analytic.len() != model.group_count() {
        return Err(VnnError::Shape(format!(
            "expected {} gradient groups, got {}",
            model.group_count(),
            analytic.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = model.clone();
    let mut groups = Vec::with_capacity(model.group_count());
    for g in 0..model.group_count() {
        let len = model.group(g).len();
        let coords: Vec<usize> = if len <= FD_COORDS_PER_GROUP {
            (0..len).collect()
        } else {
            rand::seq::index::sample(&mut rng, len, FD_COORDS_PER_GROUP).into_vec()
        };
        let mut max_rel_err = 0.0f64;
        for &i in &coords {
            let orig = work.group(g)[i];
            work.group_mut(g)[i] = orig + FD_STEP;
            let plus = work.loss(sample)?;
            work.group_mut(g)[i] = orig - FD_STEP;
            let minus = work.loss(sample)?;
            work.group_mut(g)[i] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let a = analytic[g][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4);
            max_rel_err = max_rel_err.max(rel);
        }
        groups.push(GroupCheck {
            name: model.group_name(g),
            coords_checked: coords.len(),
            max_rel_err,
        });
    }
    let pass = groups.iter().all(|g| g.max_rel_err <= tolerance);
    Ok(GradCheckReport {
        tolerance,
        pass,
        groups,
    })
}
