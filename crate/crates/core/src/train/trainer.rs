use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{featurize_manifest, lr_at_step, DatasetManifest, FeatureSet, TrainConfig, TrainError};
use crate::dsp::FrontEnd;
use crate::nn::{forward, loss_and_gradients, predict, Arch, ModelParams, Tensor};

/// One validation checkpoint in the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    /// Optimizer steps completed.
    pub step: u64,
    /// Learning rate of the most recent step.
    pub lr: f64,
    /// Mean batch loss since the previous row.
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the row with the best validation accuracy (earliest on
    /// ties), or the initialization when no row was recorded.
    pub params: ModelParams,
    pub history: Vec<HistoryRow>,
    pub best_step: Option<u64>,
}

/// Argmax class per input.
pub fn predict_all(params: &ModelParams, inputs: &[Tensor]) -> Result<Vec<usize>, TrainError> {
    inputs
        .par_iter()
        .map(|x| Ok(predict(&forward(x, params)?.probabilities)))
        .collect()
}

/// Fraction of examples classified correctly.
pub fn accuracy(params: &ModelParams, set: &FeatureSet) -> Result<f64, TrainError> {
    if set.is_empty() {
        return Err(TrainError::EmptyDataset("evaluation"));
    }
    let preds = predict_all(params, &set.inputs)?;
    let correct = preds.iter().zip(&set.labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / set.len() as f64)
}

/// Plain minibatch SGD. Each step draws `batch_size` examples uniformly with
/// replacement; initialization and batch draws come from two streams of one
/// ChaCha8 seed, so `(data, arch, config)` fixes the whole run.
pub fn train_model(
    train: &FeatureSet,
    val: &FeatureSet,
    arch: Arch,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyDataset("training"));
    }
    if val.is_empty() {
        return Err(TrainError::EmptyDataset("validation"));
    }
    if train.label_set != val.label_set || train.label_set.len() != arch.classes {
        return Err(TrainError::InvalidLabels(
            "training, validation and model class sets differ".into(),
        ));
    }

    let mut params = ModelParams::init(arch, config.seed)?;
    let mut best = params.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_step = None;
    let mut history = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let total = config.total_steps();
    let mut loss_sum = 0.0;
    let mut loss_count = 0u64;
    let mut batch = Vec::with_capacity(config.batch_size);

    for step in 0..total {
        let lr = lr_at_step(step, config)?;
        batch.clear();
        for _ in 0..config.batch_size {
            let i = rng.random_range(0..train.len());
            batch.push((&train.inputs[i], train.labels[i]));
        }
        let (loss, grads) = loss_and_gradients(&batch, &params)?;
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { step });
        }
        params.sgd_step(lr, &grads);
        loss_sum += loss;
        loss_count += 1;

        let done = step + 1;
        if done % config.eval_interval == 0 || done == total {
            let val_accuracy = accuracy(&params, val)?;
            history.push(HistoryRow {
                step: done,
                lr,
                train_loss: loss_sum / loss_count as f64,
                val_accuracy,
            });
            loss_sum = 0.0;
            loss_count = 0;
            if val_accuracy > best_acc {
                best_acc = val_accuracy;
                best = params.clone();
                best_step = Some(done);
            }
        }
    }

    Ok(TrainOutcome {
        params: best,
        history,
        best_step,
    })
}

/// Featurize both manifests with `frontend`, then [`train_model`].
pub fn train_from_manifests(
    train: &DatasetManifest,
    val: &DatasetManifest,
    frontend: &FrontEnd,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    let train_set = featurize_manifest(train, frontend)?;
    let val_set = featurize_manifest(val, frontend)?;
    let arch = Arch::new(frontend.input_shape()?, train.label_set.len());
    train_model(&train_set, &val_set, arch, config)
}

/// `step,lr,train_loss,val_accuracy` with a header row.
pub fn history_csv(history: &[HistoryRow]) -> String {
    let mut out = String::from("step,lr,train_loss,val_accuracy\n");
    for r in history {
        out.push_str(&format!("{},{},{},{}\n", r.step, r.lr, r.train_loss, r.val_accuracy));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::LabelSet;

    fn toy_set(n: usize, seed: u64) -> FeatureSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels = LabelSet::infer(["a", "b"]).unwrap();
        let mut inputs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let y = i % 2;
            let data: Vec<f64> = (0..42)
                .map(|k| rng.random_range(-0.1..0.1) + if (k % 6 < 3) == (y == 0) { 1.0 } else { 0.0 })
                .collect();
            inputs.push(Tensor::new(vec![7, 6, 1], data).unwrap());
            ys.push(y);
        }
        FeatureSet {
            inputs,
            labels: ys,
            label_set: labels,
        }
    }

    fn cfg(steps: u64) -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            eval_interval: 10,
            seed: 5,
            ..TrainConfig::default()
        }
        .scaled_to(steps)
    }

    #[test]
    fn zero_steps_returns_init() {
        let set = toy_set(8, 0);
        let arch = Arch::new((7, 6), 2);
        let out = train_model(&set, &set, arch.clone(), &cfg(0)).unwrap();
        assert!(out.history.is_empty());
        assert_eq!(out.best_step, None);
        assert_eq!(out.params, ModelParams::init(arch, 5).unwrap());
    }

    #[test]
    fn deterministic_history() {
        let set = toy_set(16, 1);
        let arch = Arch::new((7, 6), 2);
        let a = train_model(&set, &set, arch.clone(), &cfg(55)).unwrap();
        let b = train_model(&set, &set, arch, &cfg(55)).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
        // rows every 10 steps plus the final partial interval
        let steps: Vec<u64> = a.history.iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![10, 20, 30, 40, 50, 55]);
    }

    #[test]
    fn overfits_eight_examples() {
        let set = toy_set(8, 2);
        let arch = Arch::new((7, 6), 2);
        let mut c = cfg(500);
        for p in &mut c.schedule {
            p.lr = 0.05;
        }
        let out = train_model(&set, &set, arch, &c).unwrap();
        assert_eq!(accuracy(&out.params, &set).unwrap(), 1.0);
    }

    #[test]
    fn diverging_run_reports_step() {
        let set = toy_set(8, 3);
        let arch = Arch::new((7, 6), 2);
        let mut c = cfg(50);
        for p in &mut c.schedule {
            p.lr = 1e300;
        }
        assert!(matches!(
            train_model(&set, &set, arch, &c),
            Err(TrainError::NonFiniteLoss { .. }) | Err(TrainError::Nn(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let csv = history_csv(&[HistoryRow {
            step: 100,
            lr: 0.001,
            train_loss: 0.5,
            val_accuracy: 0.75,
        }]);
        assert_eq!(csv, "step,lr,train_loss,val_accuracy\n100,0.001,0.5,0.75\n");
    }
}
