//! Runs a resolver over a dataset split and folds each prediction into a
//! `SampleOutcome` for the metric suite. Samples are independent, so the
//! pass is parallelized over contiguous chunks with stable output order.

use remerge_core::baselines::{self, BracketBalance};
use remerge_core::evalharness::{self, ConcatClass, SampleOutcome};
use remerge_core::neural::{self, EncodedTuple};
use remerge_core::tokenizer::Vocabulary;

use crate::checkpoint::Checkpoint;
use crate::dataset::CorpusRecord;
use crate::par::parallel_map;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolver {
    Model,
    ScanMerge { trials: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy)]
pub struct EvalSettings {
    pub k: usize,
    pub max_len: usize,
    pub threads: usize,
}

/// Ranked candidate line sequences with confidences, however produced.
fn model_candidates(
    rec: &CorpusRecord,
    ckpt: &Checkpoint,
    settings: &EvalSettings,
) -> Vec<(Vec<String>, f64)> {
    let tuple = EncodedTuple::from_lines(&rec.a, &rec.b, &rec.o, &ckpt.vocab);
    let space = tuple.space(ckpt.params.config.l_max);
    if !space.fits() {
        return Vec::new();
    }
    neural::beam_search(&ckpt.params, &tuple, settings.k, settings.max_len)
        .into_iter()
        .map(|hyp| {
            let text: Vec<String> = hyp
                .refs
                .iter()
                .map(|&i| match space.to_ref(i) {
                    neural::LineRef::Line { index, side: neural::Side::A } => {
                        rec.a[index - 1].clone()
                    }
                    neural::LineRef::Line { index, side: neural::Side::B } => {
                        rec.b[index - 1].clone()
                    }
                    neural::LineRef::Stop => unreachable!("refs exclude STOP"),
                })
                .collect();
            // libm, not std::f64::exp: confidences must agree bit for bit
            // with the resolver's.
            (text, libm::exp(hyp.score))
        })
        .collect()
}

fn scan_candidates(rec: &CorpusRecord, trials: usize, seed: u64, k: usize) -> Vec<(Vec<String>, f64)> {
    baselines::scan_merge(&rec.a, &rec.b, trials, seed, &BracketBalance, k)
        .into_iter()
        .map(|cand| (cand, 1.0)) // the heuristic has no confidence signal
        .collect()
}

/// Scores one record: gold rank by whitespace-exact match, BLEU-4 of the
/// top candidate on the checkpoint's BPE tokens, CONCAT class, input size.
pub fn outcome_for_record(
    rec: &CorpusRecord,
    candidates: &[(Vec<String>, f64)],
    vocab: &Vocabulary,
) -> SampleOutcome {
    let gold_rank = candidates
        .iter()
        .position(|(text, _)| evalharness::exact_match(text, &rec.r))
        .map(|i| i + 1);
    let (top1_confidence, bleu4) = match candidates.first() {
        Some((text, conf)) => (
            Some(*conf),
            evalharness::bleu4(&vocab.encode_lines(text), &vocab.encode_lines(&rec.r)),
        ),
        None => (None, 0.0),
    };
    SampleOutcome {
        gold_rank,
        top1_confidence,
        input_lines: rec.a.len() + rec.b.len(),
        concat: evalharness::classify_concat(&rec.a, &rec.b, &rec.r) == ConcatClass::Concat,
        bleu4,
    }
}

pub fn run(
    records: &[CorpusRecord],
    ckpt: &Checkpoint,
    resolver: Resolver,
    settings: &EvalSettings,
) -> Vec<SampleOutcome> {
    parallel_map(records, settings.threads, |rec| {
        let candidates = match resolver {
            Resolver::Model => model_candidates(rec, ckpt, settings),
            Resolver::ScanMerge { trials, seed } => {
                scan_candidates(rec, trials, seed, settings.k)
            }
        };
        outcome_for_record(rec, &candidates, &ckpt.vocab)
    })
}
