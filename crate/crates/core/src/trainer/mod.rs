//! Quantization-aware training: Adam, cosine learning rate, temperature
//! schedule, evaluation and a finite-difference gradient checker.

mod adam;
mod gradcheck;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use adam::{adam_step, AdamState, SCALE_FLOOR};
pub use gradcheck::{gradcheck, gradcheck_params, relative_error, GradcheckReport, GRAD_FLOOR};

use crate::data::FrameTensor;
use crate::error::{Error, Result};
use crate::network::{mse_loss, Mode, Network, WeightSet};
use crate::neuron::SpikeFn;
use crate::quantizer::temperature_at;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Initial learning rate.
    pub lr0: f64,
    /// Cosine period in epochs.
    pub t_max: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Quantizer temperature at epoch 0.
    pub t0: f64,
    /// Temperature increase per epoch.
    pub rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            lr0: 1e-3,
            t_max: 64,
            batch_size: 16,
            seed: 0,
            t0: 1.0,
            rate: 2.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.t_max == 0 {
            return bad("t_max must be >= 1".into());
        }
        if !(self.lr0.is_finite() && self.lr0 >= 0.0) {
            return bad(format!(
                "lr0 must be finite and non-negative, got {}",
                self.lr0
            ));
        }
        if !(self.t0.is_finite() && self.rate.is_finite()) {
            return bad("t0 and rate must be finite".into());
        }
        temperature_at(0, self.t0, self.rate).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// `0.5 * lr0 * (1 + cos(pi * min(epoch, t_max) / t_max))`; a single
/// half-cycle that stays at zero once `t_max` is reached.
pub fn cosine_lr(epoch: usize, lr0: f64, t_max: usize) -> f64 {
    let t_max = t_max.max(1);
    let e = epoch.min(t_max) as f64;
    0.5 * lr0 * (1.0 + (PI * e / t_max as f64).cos())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub temperature: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub const CSV_HEADER: &'static str = "epoch,lr,temperature,train_loss,train_acc,test_acc";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epoch, r.lr, r.temperature, r.train_loss, r.train_acc, r.test_acc
            );
        }
        out
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// Best test accuracy over all epochs.
    pub fn best_test_acc(&self) -> f64 {
        self.records.iter().map(|r| r.test_acc).fold(0.0, f64::max)
    }
}

fn check_dataset(net: &Network, data: &[FrameTensor], what: &str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = net.n_classes();
    for (i, f) in data.iter().enumerate() {
        if f.shape() != net.spec().input || f.timesteps() != net.timesteps() {
            return Err(Error::ShapeMismatch(format!(
                "{what} sample {i} is {}x{:?}, network expects {}x{:?}",
                f.timesteps(),
                f.shape(),
                net.timesteps(),
                net.spec().input
            )));
        }
        if f.label >= n {
            return Err(Error::LabelOutOfRange {
                label: f.label,
                n_classes: n,
            });
        }
    }
    Ok(())
}

/// Hard-mode classification accuracy in `[0, 1]`.
pub fn evaluate(net: &Network, data: &[FrameTensor]) -> Result<f64> {
    check_dataset(net, data, "eval")?;
    let weights = Arc::new(net.effective_weights(Mode::InferHard));
    let hits = data
        .par_iter()
        .map(|f| {
            net.predict_with(&weights, f)
                .map(|p| usize::from(p == f.label))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / data.len() as f64)
}

/// Loss and `dL/dW_Q` for one sample against shared soft weights.
fn sample_grad(
    net: &Network,
    weights: &Arc<WeightSet>,
    f: &FrameTensor,
) -> Result<(f64, Vec<Option<Vec<f64>>>)> {
    let out = net.run(weights, f, SpikeFn::Heaviside, true)?;
    let loss = mse_loss(&out.voted, f.label, net.n_classes())?;
    let tape = out.tape.expect("recorded");
    Ok((loss, net.backward_quantized(&tape, f.label)?))
}

/// Mean loss and parameter gradients over one batch.
pub fn batch_gradients(
    net: &Network,
    batch: &[&FrameTensor],
) -> Result<(f64, crate::network::Gradients)> {
    let weights = Arc::new(net.effective_weights(Mode::TrainSoft));
    let per_sample = batch
        .par_iter()
        .map(|f| sample_grad(net, &weights, f))
        .collect::<Result<Vec<_>>>()?;
    let mut loss = 0.0;
    let mut sum: Vec<Option<Vec<f64>>> = Vec::new();
    for (l, g) in per_sample {
        loss += l;
        if sum.is_empty() {
            sum = g;
            continue;
        }
        for (a, b) in sum.iter_mut().zip(g) {
            if let (Some(a), Some(b)) = (a.as_mut(), b) {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            }
        }
    }
    let k = 1.0 / batch.len() as f64;
    for g in sum.iter_mut().flatten() {
        g.iter_mut().for_each(|x| *x *= k);
    }
    let grads = net.chain_quantizer(&weights, &sum)?;
    Ok((loss * k, grads))
}

pub fn train(
    net: &mut Network,
    train_set: &[FrameTensor],
    test_set: &[FrameTensor],
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    train_with(net, train_set, test_set, cfg, |_| {})
}

/// Like [`train`], calling `on_epoch` after every epoch.
pub fn train_with(
    net: &mut Network,
    train_set: &[FrameTensor],
    test_set: &[FrameTensor],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainHistory> {
    cfg.validate()?;
    check_dataset(net, train_set, "train")?;
    check_dataset(net, test_set, "test")?;
    let mut adam = AdamState::for_network(net);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory::default();

    for epoch in 0..cfg.epochs {
        let temperature = temperature_at(epoch, cfg.t0, cfg.rate)?;
        net.set_temperature(temperature)?;
        let lr = cosine_lr(epoch, cfg.lr0, cfg.t_max);
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&FrameTensor> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, grads) = batch_gradients(net, &batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            adam_step(net, &grads, &mut adam, lr)?;
            loss_sum += loss * batch.len() as f64;
        }

        let record = EpochRecord {
            epoch,
            lr,
            temperature,
            train_loss: loss_sum / train_set.len() as f64,
            train_acc: evaluate(net, train_set)?,
            test_acc: evaluate(net, test_set)?,
        };
        on_epoch(&record);
        history.records.push(record);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_lr(0, 1e-3, 64), 1e-3);
        assert!((cosine_lr(32, 1e-3, 64) - 5e-4).abs() < 1e-15);
        assert!(cosine_lr(64, 1e-3, 64).abs() < 1e-18);
        assert_eq!(cosine_lr(100, 1e-3, 64), cosine_lr(64, 1e-3, 64));
    }

    #[test]
    fn cosine_is_non_increasing() {
        let mut prev = f64::INFINITY;
        for e in 0..80 {
            let lr = cosine_lr(e, 0.01, 64);
            assert!(lr <= prev && lr >= 0.0);
            prev = lr;
        }
    }

    #[test]
    fn csv_header() {
        let h = TrainHistory {
            records: vec![EpochRecord {
                epoch: 0,
                lr: 0.001,
                temperature: 1.0,
                train_loss: 0.5,
                train_acc: 0.25,
                test_acc: 0.5,
            }],
        };
        let csv = h.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TrainHistory::CSV_HEADER));
        assert_eq!(lines.next(), Some("0,0.001,1,0.5,0.25,0.5"));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            t0: 0.0,
            rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
