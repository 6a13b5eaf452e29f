use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::model::{ArchConfig, Dropout, LiquidModel, ModelKind};
use super::tape::Tape;
use super::{LiquidError, Result};
use crate::flightdata::FeatureMatrix;
use crate::seed::{child_seed, indexed_seed};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Sequence windows per optimizer step.
    pub batch: usize,
    pub dropout: f64,
    pub seq_len: usize,
    /// Window stride; 0 means half of `seq_len`.
    pub stride: usize,
    pub seed: u64,
    pub unfold: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 1e-3, epochs: 300, batch: 64, dropout: 0.5, seq_len: 100, stride: 0, seed: 0, unfold: 6 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LiquidError::InvalidConfig(m.into()));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and non-negative");
        }
        if self.epochs == 0 || self.batch == 0 || self.seq_len == 0 || self.unfold == 0 {
            return bad("epochs, batch, seq_len and unfold must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn effective_stride(&self) -> usize {
        if self.stride == 0 {
            (self.seq_len / 2).max(1)
        } else {
            self.stride
        }
    }
}

/// Loss curves of one run. Losses are mean squared errors in target units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub initial_val_loss: f64,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch (1-based) whose parameters were kept; 0 means the initial parameters.
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl History {
    /// Running minimum of the validation loss, starting from the initial value.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = self.initial_val_loss;
        self.val_loss
            .iter()
            .map(|&v| {
                best = best.min(v);
                best
            })
            .collect()
    }
}

/// Training windows `(matrix, start, len)` covering every row of every matrix.
pub fn windows<T: Real>(data: &[FeatureMatrix<T>], seq_len: usize, stride: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for (m, x) in data.iter().enumerate() {
        let n = x.n_rows();
        if n == 0 {
            continue;
        }
        if n <= seq_len {
            out.push((m, 0, n));
            continue;
        }
        let mut s = 0;
        while s + seq_len <= n {
            out.push((m, s, seq_len));
            s += stride;
        }
        if s - stride + seq_len < n {
            out.push((m, n - seq_len, seq_len));
        }
    }
    out
}

/// Sum of squared errors over one sequence and its per-tensor gradients.
pub fn sequence_loss_grad<T: Real>(
    model: &LiquidModel<T>,
    rows: &[&[T]],
    targets: &[T],
    dt: T,
    dropout: Option<&mut Dropout>,
) -> Result<(T, Vec<Vec<T>>)> {
    if rows.len() != targets.len() {
        return Err(LiquidError::ShapeMismatch { expected: rows.len(), got: targets.len() });
    }
    let tape = Tape::new();
    let p = model.params().bind(&tape);
    let outs = model.record(&tape, &p, rows, dt, dropout);
    let loss = tape.sq_err(&outs, targets);
    let value = loss.value()[0];
    let grads = tape.backward(loss)?;
    Ok((value, model.params().collect_grads(&grads, &p)))
}

/// Sum of squared errors over one sequence, forward only.
pub fn sequence_loss<T: Real>(model: &LiquidModel<T>, rows: &[&[T]], targets: &[T], dt: T) -> T {
    let tape = Tape::new();
    let p = model.params().bind(&tape);
    let outs = model.record(&tape, &p, rows, dt, None);
    outs.iter().zip(targets).map(|(o, &y)| (o.value()[0] - y) * (o.value()[0] - y)).sum()
}

/// Mean squared error of stateful inference over each matrix.
pub fn mse<T: Real>(model: &LiquidModel<T>, data: &[FeatureMatrix<T>], dt: T) -> Result<f64> {
    let (mut sse, mut n) = (0.0, 0usize);
    for x in data {
        let pred = model.forward_sequence(x, dt)?;
        sse += pred.iter().zip(x.y()).map(|(p, y)| (*p - *y).as_f64().powi(2)).sum::<f64>();
        n += pred.len();
    }
    Ok(if n == 0 { f64::NAN } else { sse / n as f64 })
}

/// Builds a model of `kind` and trains it.
pub fn train<T: Real>(
    kind: ModelKind,
    train_data: &[FeatureMatrix<T>],
    val_data: &[FeatureMatrix<T>],
    arch: &ArchConfig,
    cfg: &TrainConfig,
    dt: T,
) -> Result<(LiquidModel<T>, History)> {
    let n_features = train_data
        .first()
        .map(FeatureMatrix::n_features)
        .ok_or_else(|| LiquidError::InvalidConfig("no training data".into()))?;
    let arch = ArchConfig { seq_len: cfg.seq_len, unfold: cfg.unfold, ..arch.clone() };
    let model = LiquidModel::build(kind, n_features, arch, cfg.seed)?;
    fit(model, train_data, val_data, cfg, dt)
}

/// Trains an existing model with Adam on shuffled mini-batches of sequence windows and
/// returns the parameters with the best validation loss (training loss when no
/// validation data is given).
pub fn fit<T: Real>(
    mut model: LiquidModel<T>,
    train_data: &[FeatureMatrix<T>],
    val_data: &[FeatureMatrix<T>],
    cfg: &TrainConfig,
    dt: T,
) -> Result<(LiquidModel<T>, History)> {
    cfg.validate()?;
    if !(dt > T::zero()) {
        return Err(LiquidError::InvalidConfig("dt must be positive".into()));
    }
    for x in train_data.iter().chain(val_data) {
        if x.n_features() != model.n_features() {
            return Err(LiquidError::ShapeMismatch { expected: model.n_features(), got: x.n_features() });
        }
    }
    let wins = windows(train_data, cfg.seq_len, cfg.effective_stride());
    if wins.is_empty() {
        return Err(LiquidError::InvalidConfig("no training windows".into()));
    }
    let shuffle_seed = child_seed(cfg.seed, "shuffle");
    let dropout_seed = child_seed(cfg.seed, "dropout");
    let mut opt = Adam::new(T::lit(cfg.lr), model.params());

    let score = |m: &LiquidModel<T>, fallback: f64| -> Result<f64> {
        if val_data.is_empty() {
            Ok(fallback)
        } else {
            mse(m, val_data, dt)
        }
    };
    let initial_val_loss = if val_data.is_empty() { mse(&model, train_data, dt)? } else { mse(&model, val_data, dt)? };
    let mut history = History {
        initial_val_loss,
        train_loss: Vec::with_capacity(cfg.epochs),
        val_loss: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        best_val_loss: initial_val_loss,
    };
    let mut best = model.params().clone();

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..wins.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(indexed_seed(shuffle_seed, &[epoch as u64])));
        // Per-window losses are summed in window order so the epoch loss ignores the shuffle.
        let mut window_sse = vec![0.0f64; wins.len()];
        for batch in order.chunks(cfg.batch) {
            let results: Vec<Result<(T, Vec<Vec<T>>)>> = batch
                .par_iter()
                .map(|&w| {
                    let (m, start, len) = wins[w];
                    let x = &train_data[m];
                    let rows: Vec<&[T]> = (start..start + len).map(|i| x.row(i)).collect();
                    let mut drop = Dropout::new(cfg.dropout, indexed_seed(dropout_seed, &[epoch as u64, w as u64]));
                    sequence_loss_grad(&model, &rows, &x.y()[start..start + len], dt, Some(&mut drop))
                })
                .collect();
            let n_samples: usize = batch.iter().map(|&w| wins[w].2).sum();
            let scale = T::one() / T::from_usize_lossy(n_samples);
            let mut total: Option<Vec<Vec<T>>> = None;
            let mut batch_sse = T::zero();
            for (&w, r) in batch.iter().zip(results) {
                let (sse, g) = r?;
                window_sse[w] = sse.as_f64();
                batch_sse = batch_sse + sse;
                match &mut total {
                    None => total = Some(g),
                    Some(acc) => {
                        for (a, b) in acc.iter_mut().zip(&g) {
                            for (x, y) in a.iter_mut().zip(b) {
                                *x = *x + *y;
                            }
                        }
                    }
                }
            }
            if !batch_sse.is_finite() {
                return Err(LiquidError::Diverged { epoch });
            }
            let mut grads = total.expect("non-empty batch");
            for g in grads.iter_mut().flatten() {
                *g = *g * scale;
            }
            opt.step(model.params_mut(), &grads)?;
            if !model.params().all_finite() {
                return Err(LiquidError::Diverged { epoch });
            }
        }
        let epoch_n: usize = wins.iter().map(|w| w.2).sum();
        let train_loss = window_sse.iter().sum::<f64>() / epoch_n as f64;
        let val_loss = score(&model, train_loss)?;
        if !val_loss.is_finite() {
            return Err(LiquidError::Diverged { epoch });
        }
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        if val_loss < history.best_val_loss {
            history.best_val_loss = val_loss;
            history.best_epoch = epoch;
            best = model.params().clone();
        }
    }
    *model.params_mut() = best;
    Ok((model, history))
}
