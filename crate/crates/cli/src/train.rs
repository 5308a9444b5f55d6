//! The training loop: BPE vocabulary from the training split, minibatch
//! Adam over teacher-forced loss, and best-validation checkpoint selection.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use remerge_core::merge2matrix::ReprMode;
use remerge_core::neural::{
    self, AdamHyper, AdamState, EncodedTuple, ModelConfig, ModelParams,
};
use remerge_core::tokenizer::Vocabulary;

use crate::checkpoint::Checkpoint;
use crate::dataset::CorpusRecord;

#[derive(Debug, Clone, Copy)]
pub struct TrainSettings {
    pub mode: ReprMode,
    pub dim: usize,
    pub hidden: usize,
    pub l_max: usize,
    pub vocab_size: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub valid_top1: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub skipped: usize,
}

/// Encodes records and maps their resolutions to combined indices. Records
/// that exceed L_max or (defensively) fail target mapping are dropped.
pub fn prepare(
    records: &[CorpusRecord],
    vocab: &Vocabulary,
    l_max: usize,
) -> (Vec<(EncodedTuple, Vec<usize>)>, usize) {
    let mut out = Vec::new();
    let mut skipped = 0usize;
    for rec in records {
        let tuple = EncodedTuple::from_lines(&rec.a, &rec.b, &rec.o, vocab);
        if !tuple.space(l_max).fits() {
            skipped += 1;
            continue;
        }
        match neural::map_target_refs(&rec.a, &rec.b, &rec.r) {
            Ok(targets) => out.push((tuple, targets)),
            Err(_) => skipped += 1,
        }
    }
    (out, skipped)
}

fn mean_loss(params: &ModelParams, data: &[(EncodedTuple, Vec<usize>)]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let total: f64 = data
        .iter()
        .map(|(t, r)| neural::loss(params, t, r))
        .sum();
    total / data.len() as f64
}

fn top1(params: &ModelParams, data: &[(EncodedTuple, Vec<usize>)]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let correct = data
        .iter()
        .filter(|(t, r)| {
            let hyp = neural::greedy_decode(params, t, neural::DEFAULT_MAX_DECODE);
            hyp.stopped && hyp.refs == *r
        })
        .count();
    correct as f64 / data.len() as f64
}

/// Trains on `train_recs`, selecting the epoch with the highest validation
/// top-1 (ties: lower validation loss, then earlier epoch). The initial
/// model is epoch 0, so `epochs = 0` yields an initialized checkpoint with
/// its validation loss reported. An empty validation split falls back to
/// validating on the training split.
pub fn train(
    train_recs: &[CorpusRecord],
    valid_recs: &[CorpusRecord],
    settings: &TrainSettings,
) -> anyhow::Result<TrainOutcome> {
    let corpus: Vec<&str> = train_recs
        .iter()
        .flat_map(|r| [&r.a, &r.b, &r.o])
        .flatten()
        .map(String::as_str)
        .collect();
    let vocab = Vocabulary::train(corpus, settings.vocab_size)
        .map_err(|e| anyhow::anyhow!("vocabulary training failed: {e:?}"))?;

    let (train_data, skipped_t) = prepare(train_recs, &vocab, settings.l_max);
    let (valid_data, skipped_v) = prepare(valid_recs, &vocab, settings.l_max);
    if train_data.is_empty() {
        anyhow::bail!("no usable training records");
    }
    let valid_data: &[(EncodedTuple, Vec<usize>)] = if valid_data.is_empty() {
        &train_data
    } else {
        &valid_data
    };

    let config = ModelConfig {
        dim: settings.dim,
        hidden: settings.hidden,
        l_max: settings.l_max,
        vocab_size: vocab.size(), // actual size; BPE may stop short of target
        mode: settings.mode,
    };
    let mut params = ModelParams::init(config, settings.seed);
    let mut adam = AdamState::new(&params);
    let hyper = AdamHyper {
        lr: settings.lr,
        ..AdamHyper::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let batch = settings.batch.max(1);

    let mut log = Vec::new();
    let mut best: Option<(usize, f64, f64, ModelParams)> = None;
    let record = |log: &mut Vec<EpochLog>,
                      best: &mut Option<(usize, f64, f64, ModelParams)>,
                      epoch: usize,
                      train_loss: f64,
                      params: &ModelParams| {
        let valid_loss = mean_loss(params, valid_data);
        let valid_top1 = top1(params, valid_data);
        log.push(EpochLog {
            epoch,
            train_loss,
            valid_loss,
            valid_top1,
        });
        let better = match best {
            None => true,
            Some((_, b_top1, b_loss, _)) => {
                valid_top1 > *b_top1 || (valid_top1 == *b_top1 && valid_loss < *b_loss)
            }
        };
        if better {
            *best = Some((epoch, valid_top1, valid_loss, params.clone()));
        }
    };

    record(&mut log, &mut best, 0, mean_loss(&params, &train_data), &params);

    let mut order: Vec<usize> = (0..train_data.len()).collect();
    for epoch in 1..=settings.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let refs: Vec<(&EncodedTuple, &[usize])> = chunk
                .iter()
                .map(|&i| (&train_data[i].0, train_data[i].1.as_slice()))
                .collect();
            let (loss, mut grads) = neural::batch_gradients(&params, &refs)
                .map_err(|e| anyhow::anyhow!("epoch {epoch}: {e}"))?;
            epoch_loss += loss;
            grads.scale(1.0 / chunk.len() as f64);
            neural::adam_step(&mut params, &grads, &mut adam, &hyper);
        }
        record(
            &mut log,
            &mut best,
            epoch,
            epoch_loss / train_data.len() as f64,
            &params,
        );
    }

    let (best_epoch, _, _, best_params) = best.expect("epoch 0 is always recorded");
    Ok(TrainOutcome {
        checkpoint: Checkpoint::new(best_params, vocab),
        log,
        best_epoch,
        skipped: skipped_t + skipped_v,
    })
}

pub fn write_log_csv(path: &Path, log: &[EpochLog]) -> anyhow::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "epoch,train_loss,valid_loss,valid_top1")?;
    for row in log {
        writeln!(
            out,
            "{},{},{},{}",
            row.epoch, row.train_loss, row.valid_loss, row.valid_top1
        )?;
    }
    out.flush()?;
    Ok(())
}
