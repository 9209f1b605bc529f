//! Training and evaluation: batching, target normalization, MSE optimization,
//! best-checkpoint selection by validation MAE, and metric logging.
//!
//! Targets are z-normalized with training-split statistics before the loss;
//! every reported MAE is denormalized back to raw units. The test split never
//! enters here: callers pass train and validation records only.

use crate::chemio::DatasetRecord;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, ModelKind, Prepared};
use crate::nn::{load_checkpoint, mae, save_checkpoint, AdamState};
use crate::tensor::{Tape, Tensor, TensorId};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Forward-only batch size used for validation and evaluation. Shared so an
/// evaluate() on the validation split reproduces the logged value.
const EVAL_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub target_name: String,
    /// Epochs between validations; the final epoch is always validated.
    pub eval_every: usize,
    pub out_dir: PathBuf,
    /// Worker threads for gradient evaluation; 0 or 1 means the
    /// single-threaded deterministic mode.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 400,
            batch_size: 16,
            lr: 1e-4,
            seed: 0,
            target_name: "gap".into(),
            eval_every: 1,
            out_dir: PathBuf::from("runs"),
            threads: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return bad("lr must be finite and non-negative");
        }
        if self.target_name.is_empty() {
            return bad("target_name must be set");
        }
        Ok(())
    }
}

/// Training-split target statistics. `std` is the population standard
/// deviation (divide by n, not n-1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: f64,
    pub std: f64,
}

impl Normalizer {
    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        y * self.std + self.mean
    }
}

pub fn fit_normalizer(records: &[DatasetRecord], target: &str) -> Result<Normalizer> {
    if records.len() < 2 {
        return Err(Error::Data(format!(
            "need at least 2 records to fit a normalizer, got {}",
            records.len()
        )));
    }
    let values: Vec<f64> = records
        .iter()
        .map(|r| target_of(r, target))
        .collect::<Result<_>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 0.0) {
        return Err(Error::Data(format!(
            "target {target:?} has zero variance on the training split"
        )));
    }
    Ok(Normalizer { mean, std })
}

fn target_of(rec: &DatasetRecord, target: &str) -> Result<f64> {
    rec.targets.get(target).copied().ok_or_else(|| {
        Error::Data(format!(
            "molecule {:?} has no target {target:?}",
            rec.molecule.name
        ))
    })
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub best_checkpoint: PathBuf,
    pub best_val_mae: f64,
    pub metrics_path: PathBuf,
    /// (epoch, val MAE) at each persisted improvement; strictly decreasing.
    pub persisted: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub target: String,
    pub split: String,
    pub mae: f64,
    pub n: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Extra keys the trainer adds to the checkpoint metadata next to the model
/// config.
#[derive(Debug, Serialize, Deserialize)]
struct TrainMeta {
    target: String,
    normalizer: Normalizer,
}

pub fn train(
    model_cfg: ModelConfig,
    cfg: &TrainConfig,
    train_recs: &[DatasetRecord],
    val_recs: &[DatasetRecord],
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if val_recs.is_empty() {
        return Err(Error::Data("validation split is empty".into()));
    }
    let norm = fit_normalizer(train_recs, &cfg.target_name)?;
    let mut model = Model::new(model_cfg)?;

    let train_prep: Vec<Prepared> = train_recs
        .iter()
        .map(|r| model.prepare(&r.molecule))
        .collect::<Result<_>>()?;
    let train_norm_targets: Vec<f64> = train_recs
        .iter()
        .map(|r| target_of(r, &cfg.target_name).map(|v| norm.normalize(v)))
        .collect::<Result<_>>()?;
    let val_prep: Vec<Prepared> = val_recs
        .iter()
        .map(|r| model.prepare(&r.molecule))
        .collect::<Result<_>>()?;
    let val_raw_targets: Vec<f64> = val_recs
        .iter()
        .map(|r| target_of(r, &cfg.target_name))
        .collect::<Result<_>>()?;

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let metrics_path = cfg.out_dir.join("metrics.csv");
    let mut metrics = std::io::BufWriter::new(
        std::fs::File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?,
    );
    let wio = |e: std::io::Error| Error::io(&metrics_path, e);
    writeln!(metrics, "epoch,train_loss,val_mae").map_err(wio)?;

    let mut meta = model.meta();
    let extra = serde_json::to_value(TrainMeta {
        target: cfg.target_name.clone(),
        normalizer: norm,
    })
    .expect("meta serializes");
    for (k, v) in extra.as_object().expect("object").iter() {
        meta[k] = v.clone();
    }

    let ckpt_path = cfg.out_dir.join("best.ckpt");
    let mut adam = AdamState::new(&model.params, cfg.lr);
    let mut best_val = f64::INFINITY;
    let mut persisted: Vec<(usize, f64)> = Vec::new();
    let mut indices: Vec<usize> = (0..train_recs.len()).collect();

    let diverged = |epoch: usize, msg: String, persisted: &[(usize, f64)]| Error::Diverged {
        epoch,
        msg,
        checkpoint: (!persisted.is_empty()).then(|| ckpt_path.display().to_string()),
    };

    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        indices.shuffle(&mut rng);

        let mut epoch_sse = 0.0;
        for batch_ids in indices.chunks(cfg.batch_size) {
            let batch: Vec<&Prepared> = batch_ids.iter().map(|&i| &train_prep[i]).collect();
            let targets: Vec<f64> = batch_ids.iter().map(|&i| train_norm_targets[i]).collect();

            model.params.zero_grads();
            let parts = run_batch(&model, cfg.threads, &batch, &targets);
            for (tape, leaves, sse) in &parts {
                if !sse.is_finite() {
                    return Err(diverged(
                        epoch,
                        format!("non-finite training loss {sse}"),
                        &persisted,
                    ));
                }
                model.params.accumulate_grads_from(tape, leaves);
                epoch_sse += sse;
            }
            adam
                .step(&mut model.params)
                .map_err(|e| diverged(epoch, e.to_string(), &persisted))?;
        }
        let train_loss = epoch_sse / train_recs.len() as f64;

        if epoch % cfg.eval_every == 0 || epoch == cfg.epochs {
            let val_mae = split_mae(&model, &val_prep, &val_raw_targets, norm);
            if !val_mae.is_finite() {
                return Err(diverged(
                    epoch,
                    format!("non-finite validation MAE {val_mae}"),
                    &persisted,
                ));
            }
            writeln!(metrics, "{epoch},{train_loss},{val_mae}").map_err(wio)?;
            metrics.flush().map_err(wio)?;
            if val_mae < best_val {
                best_val = val_mae;
                save_checkpoint(&ckpt_path, &meta, &model.params, Some(&adam))?;
                persisted.push((epoch, val_mae));
            }
        }
    }

    Ok(TrainOutcome {
        best_checkpoint: ckpt_path,
        best_val_mae: best_val,
        metrics_path,
        persisted,
    })
}

/// Gradients for one batch of ≤ batch_size molecules, possibly split across
/// worker threads. Each chunk contributes `sum((pred - target)^2) / B` so the
/// accumulated gradient equals that of the batch MSE; chunks are accumulated
/// in order, so a fixed thread count gives reproducible results.
fn run_batch(
    model: &Model,
    threads: usize,
    batch: &[&Prepared],
    norm_targets: &[f64],
) -> Vec<(Tape, Vec<TensorId>, f64)> {
    let nchunks = threads.clamp(1, batch.len());
    let chunk_len = batch.len().div_ceil(nchunks);
    let inv_b = 1.0 / batch.len() as f64;

    let run_chunk = |mols: &[&Prepared], tgts: &[f64]| {
        let mut tape = Tape::new();
        let leaves = model.params.import_all(&mut tape);
        let pred = model.forward_batch(&mut tape, &leaves, mols);
        let target = tape.constant(Tensor::matrix(
            tgts.len(),
            1,
            tgts.to_vec(),
        ));
        let diff = tape.sub(pred, target);
        let sq = tape.square(diff);
        let sse = tape.sum_all(sq);
        let loss = tape.scale(sse, inv_b);
        let sse_value = tape.data(sse)[0];
        tape.backward(loss);
        (tape, leaves, sse_value)
    };

    if nchunks == 1 {
        return vec![run_chunk(batch, norm_targets)];
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = batch
            .chunks(chunk_len)
            .zip(norm_targets.chunks(chunk_len))
            .map(|(mols, tgts)| s.spawn(move || run_chunk(mols, tgts)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("gradient worker panicked"))
            .collect()
    })
}

/// Denormalized MAE of the model over a prepared split (forward only,
/// single-threaded, fixed batch size).
fn split_mae(model: &Model, prepared: &[Prepared], raw_targets: &[f64], norm: Normalizer) -> f64 {
    let mut preds = Vec::with_capacity(prepared.len());
    for chunk in prepared.chunks(EVAL_BATCH) {
        let refs: Vec<&Prepared> = chunk.iter().collect();
        let mut tape = Tape::new();
        let leaves = model.params.import_all(&mut tape);
        let y = model.forward_batch(&mut tape, &leaves, &refs);
        preds.extend(tape.data(y).iter().map(|&v| norm.denormalize(v)));
    }
    mae(&preds, raw_targets)
}

/// Loads a checkpoint and reports the denormalized MAE over `records`.
/// `expect_kind` guards against evaluating with the wrong architecture.
pub fn evaluate(
    checkpoint: &Path,
    records: &[DatasetRecord],
    split: &str,
    expect_kind: Option<ModelKind>,
) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::Data(format!("empty {split} split")));
    }
    let pstr = checkpoint.display().to_string();
    let ckpt = load_checkpoint(checkpoint)?;
    let train_meta: TrainMeta =
        serde_json::from_value(ckpt.meta.clone()).map_err(|e| Error::Checkpoint {
            path: pstr.clone(),
            msg: format!("missing training metadata: {e}"),
        })?;
    let model = Model::from_checkpoint(ckpt, &pstr)?;
    if let Some(kind) = expect_kind {
        if kind != model.cfg.kind {
            return Err(Error::Checkpoint {
                path: pstr,
                msg: format!(
                    "model kind mismatch: checkpoint has {}, requested {}",
                    model.cfg.kind.as_str(),
                    kind.as_str()
                ),
            });
        }
    }
    let prepared: Vec<Prepared> = records
        .iter()
        .map(|r| model.prepare(&r.molecule))
        .collect::<Result<_>>()?;
    let raw_targets: Vec<f64> = records
        .iter()
        .map(|r| target_of(r, &train_meta.target))
        .collect::<Result<_>>()?;
    let mae = split_mae(&model, &prepared, &raw_targets, train_meta.normalizer);
    Ok(EvalReport {
        target: train_meta.target,
        split: split.to_string(),
        mae,
        n: records.len(),
    })
}
