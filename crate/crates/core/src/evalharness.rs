//! Metric suite: exact match, top-k accuracy, confidence threshold
//! sweeps, CONCAT/OTHER classes, size buckets, and BLEU-4.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::tokenizer::TokenId;

/// Whitespace-exact equality of full line sequences.
pub fn exact_match<S: AsRef<str>, T: AsRef<str>>(pred: &[S], gold: &[T]) -> bool {
    pred.len() == gold.len()
        && pred
            .iter()
            .zip(gold)
            .all(|(p, g)| p.as_ref() == g.as_ref())
}

/// Per-sample evaluation outcome, precomputed by the caller.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SampleOutcome {
    /// 1-based rank of the gold resolution among the candidates, if any.
    pub gold_rank: Option<usize>,
    /// Confidence of the top candidate; None when the resolver abstained.
    pub top1_confidence: Option<f64>,
    /// |a_lines| + |b_lines| — the size-bucket key.
    pub input_lines: usize,
    /// Whether the gold resolution is in the CONCAT class.
    pub concat: bool,
    /// BLEU-4 of the top candidate against gold (0 when abstained).
    pub bleu4: f64,
}

impl SampleOutcome {
    pub fn top1_correct(&self) -> bool {
        self.gold_rank == Some(1)
    }
}

/// Fraction of samples whose gold appears among the first k candidates.
pub fn topk_accuracy(results: &[SampleOutcome], k: usize) -> f64 {
    assert!(k >= 1);
    if results.is_empty() {
        return 0.0;
    }
    let hits = results
        .iter()
        .filter(|r| r.gold_rank.is_some_and(|rank| rank <= k))
        .count();
    hits as f64 / results.len() as f64
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ThresholdPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub issued: usize,
    pub correct: usize,
    /// False when issued = 0 and precision is reported as the pinned 1.0.
    pub precision_defined: bool,
}

/// Precision/recall/F1 at each threshold: a prediction is issued when its
/// top-1 confidence is ≥ t; it is correct when additionally the gold is
/// at rank 1.
pub fn threshold_sweep(results: &[SampleOutcome], grid: &[f64]) -> Vec<ThresholdPoint> {
    assert!(!grid.is_empty());
    let total = results.len();
    grid.iter()
        .map(|&t| {
            let issued = results
                .iter()
                .filter(|r| r.top1_confidence.is_some_and(|c| c >= t))
                .count();
            let correct = results
                .iter()
                .filter(|r| r.top1_confidence.is_some_and(|c| c >= t) && r.top1_correct())
                .count();
            let precision_defined = issued > 0;
            let precision = if precision_defined {
                correct as f64 / issued as f64
            } else {
                1.0
            };
            let recall = if total > 0 {
                correct as f64 / total as f64
            } else {
                0.0
            };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ThresholdPoint {
                threshold: t,
                precision,
                recall,
                f1,
                issued,
                correct,
                precision_defined,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ConcatClass {
    Concat,
    Other,
}

/// CONCAT iff r is exactly a followed by b, or b followed by a.
pub fn classify_concat<S: AsRef<str>>(a: &[S], b: &[S], r: &[S]) -> ConcatClass {
    let ab: Vec<&str> = a.iter().chain(b.iter()).map(|s| s.as_ref()).collect();
    let ba: Vec<&str> = b.iter().chain(a.iter()).map(|s| s.as_ref()).collect();
    let rr: Vec<&str> = r.iter().map(|s| s.as_ref()).collect();
    if rr == ab || rr == ba {
        ConcatClass::Concat
    } else {
        ConcatClass::Other
    }
}

pub const BUCKET_LABELS: [&str; 5] = ["[1,3]", "[4,5]", "[6,7]", "[8,10]", ">10"];

/// Bucket ordinal for an input of `lines` = |a| + |b| total lines.
pub fn size_bucket(lines: usize) -> usize {
    match lines {
        0..=3 => 0,
        4..=5 => 1,
        6..=7 => 2,
        8..=10 => 3,
        _ => 4,
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BucketStat {
    pub label: String,
    pub count: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Top-1 accuracy per input-size bucket; counts sum to the dataset size.
pub fn size_buckets(results: &[SampleOutcome]) -> Vec<BucketStat> {
    let mut stats: Vec<BucketStat> = BUCKET_LABELS
        .iter()
        .map(|&label| BucketStat {
            label: String::from(label),
            count: 0,
            correct: 0,
            accuracy: 0.0,
        })
        .collect();
    for r in results {
        let b = size_bucket(r.input_lines);
        stats[b].count += 1;
        if r.top1_correct() {
            stats[b].correct += 1;
        }
    }
    for s in &mut stats {
        if s.count > 0 {
            s.accuracy = s.correct as f64 / s.count as f64;
        }
    }
    stats
}

fn ngram_counts(tokens: &[TokenId], n: usize) -> BTreeMap<&[TokenId], usize> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// BLEU with n ≤ 4 and brevity penalty, over BPE tokens. Higher-order
/// precisions with zero matches are add-one smoothed; a zero unigram
/// precision makes the score zero.
pub fn bleu4(pred: &[TokenId], gold: &[TokenId]) -> f64 {
    if pred.is_empty() {
        return if gold.is_empty() { 1.0 } else { 0.0 };
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let pred_counts = ngram_counts(pred, n);
        let gold_counts = ngram_counts(gold, n);
        let total: usize = pred_counts.values().sum();
        if total == 0 {
            // Sequence shorter than n: vacuous order, p_n = 1.
            continue;
        }
        let matches: usize = pred_counts
            .iter()
            .map(|(gram, &c)| c.min(*gold_counts.get(gram).unwrap_or(&0)))
            .sum();
        let p = if matches > 0 {
            matches as f64 / total as f64
        } else if n == 1 {
            return 0.0;
        } else {
            (matches + 1) as f64 / (total + 1) as f64
        };
        log_sum += 0.25 * libm::log(p);
    }
    let bp = if pred.len() >= gold.len() {
        1.0
    } else {
        libm::exp(1.0 - gold.len() as f64 / pred.len() as f64)
    };
    bp * libm::exp(log_sum)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClassStat {
    pub count: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// The full metric report over one dataset split.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub top1: f64,
    pub top3: f64,
    pub bleu4_mean: f64,
    pub concat: ClassStat,
    pub other: ClassStat,
    pub buckets: Vec<BucketStat>,
    pub sweep: Vec<ThresholdPoint>,
}

pub fn build_report(results: &[SampleOutcome], grid: &[f64]) -> EvalReport {
    let class_stat = |want_concat: bool| {
        let subset: Vec<&SampleOutcome> =
            results.iter().filter(|r| r.concat == want_concat).collect();
        let correct = subset.iter().filter(|r| r.top1_correct()).count();
        ClassStat {
            count: subset.len(),
            correct,
            accuracy: if subset.is_empty() {
                0.0
            } else {
                correct as f64 / subset.len() as f64
            },
        }
    };
    let bleu4_mean = if results.is_empty() {
        0.0
    } else {
        results.iter().map(|r| r.bleu4).sum::<f64>() / results.len() as f64
    };
    EvalReport {
        total: results.len(),
        top1: topk_accuracy(results, 1),
        top3: topk_accuracy(results, 3),
        bleu4_mean,
        concat: class_stat(true),
        other: class_stat(false),
        buckets: size_buckets(results),
        sweep: threshold_sweep(results, grid).into_iter().collect(),
    }
}
