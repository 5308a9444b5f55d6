//! End-to-end inference: conflict region in, ranked textual resolutions
//! out, plus whole-file patching with abstention.

use alloc::string::String;
use alloc::vec::Vec;

use crate::neural::{self, EncodedTuple, LineRef, ModelParams, OutputSpace, Side};
use crate::textmerge::{ConflictDocument, ConflictRegion, Segment};
use crate::tokenizer::Vocabulary;

/// One candidate resolution: the decoded line references, their verbatim
/// text, and the sequence probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionCandidate {
    pub refs: Vec<LineRef>,
    pub text: Vec<String>,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolveError {
    RegionTooLarge {
        li_a: usize,
        li_b: usize,
        l_max: usize,
    },
}

impl core::fmt::Display for ResolveError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ResolveError::RegionTooLarge { li_a, li_b, l_max } => write!(
                f,
                "region has {li_a}+{li_b} lines, exceeding the per-side cap {l_max}"
            ),
        }
    }
}

/// Decoding and thresholding knobs for inference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolveOptions {
    pub k: usize,
    pub max_len: usize,
    pub threshold: f64,
}

impl Default for ResolveOptions {
    fn default() -> Self {
        Self {
            k: 3,
            max_len: neural::DEFAULT_MAX_DECODE,
            threshold: 0.5,
        }
    }
}

fn line_text(region: &ConflictRegion, r: LineRef) -> Option<&String> {
    match r {
        LineRef::Line { index, side: Side::A } => region.a_lines.get(index - 1),
        LineRef::Line { index, side: Side::B } => region.b_lines.get(index - 1),
        LineRef::Stop => None,
    }
}

/// Ranks resolutions for one region; an empty list means "abstain".
pub fn resolve_region(
    region: &ConflictRegion,
    params: &ModelParams,
    vocab: &Vocabulary,
    opts: &ResolveOptions,
) -> Result<Vec<ResolutionCandidate>, ResolveError> {
    let tuple = EncodedTuple::from_lines(
        &region.a_lines,
        &region.b_lines,
        &region.o_lines,
        vocab,
    );
    let space = tuple.space(params.config.l_max);
    if !space.fits() {
        return Err(ResolveError::RegionTooLarge {
            li_a: space.li_a,
            li_b: space.li_b,
            l_max: space.l_max,
        });
    }
    let hyps = neural::beam_search(params, &tuple, opts.k, opts.max_len);
    let mut out = Vec::new();
    for hyp in hyps {
        let confidence = libm::exp(hyp.score);
        if confidence < opts.threshold {
            continue;
        }
        let mut refs: Vec<LineRef> = hyp.refs.iter().map(|&i| space.to_ref(i)).collect();
        let text: Vec<String> = refs
            .iter()
            .filter_map(|&r| line_text(region, r).cloned())
            .collect();
        if hyp.stopped {
            refs.push(LineRef::Stop);
        }
        out.push(ResolutionCandidate {
            refs,
            text,
            confidence,
        });
    }
    Ok(out)
}

/// The decoder's index space for a region, for callers that need the
/// ref↔index mapping.
pub fn region_space(region: &ConflictRegion, params: &ModelParams) -> OutputSpace {
    OutputSpace::new(
        region.a_lines.len(),
        region.b_lines.len(),
        params.config.l_max,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegionOutcome {
    Resolved { candidate: ResolutionCandidate },
    Abstained { reason: AbstainReason },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AbstainReason {
    BelowThreshold,
    TooLarge,
    Declined,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResolveReport {
    pub outcomes: Vec<RegionOutcome>,
}

impl ResolveReport {
    pub fn resolved(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, RegionOutcome::Resolved { .. }))
            .count()
    }

    pub fn total(&self) -> usize {
        self.outcomes.len()
    }
}

/// Resolves every region of a document independently. `choose` picks a
/// candidate index (the interactive hook); passing `|_, _| Some(0)` gives
/// the conservative apply-top-1 behavior. Declined or abstained regions
/// stay conflicted; untouched segments are preserved byte-exactly.
pub fn resolve_file(
    doc: &ConflictDocument,
    params: &ModelParams,
    vocab: &Vocabulary,
    opts: &ResolveOptions,
    mut choose: impl FnMut(&ConflictRegion, &[ResolutionCandidate]) -> Option<usize>,
) -> (ConflictDocument, ResolveReport) {
    let mut report = ResolveReport::default();
    let mut segments: Vec<Segment> = Vec::with_capacity(doc.segments.len());
    let push = |segments: &mut Vec<Segment>, seg: Segment| match (segments.last_mut(), seg) {
        (Some(Segment::Plain(prev)), Segment::Plain(lines)) => prev.extend(lines),
        (_, seg) => segments.push(seg),
    };
    for seg in &doc.segments {
        match seg {
            Segment::Plain(lines) => push(&mut segments, Segment::Plain(lines.clone())),
            Segment::Conflict(region) => {
                let outcome = match resolve_region(region, params, vocab, opts) {
                    Err(ResolveError::RegionTooLarge { .. }) => RegionOutcome::Abstained {
                        reason: AbstainReason::TooLarge,
                    },
                    Ok(cands) if cands.is_empty() => RegionOutcome::Abstained {
                        reason: AbstainReason::BelowThreshold,
                    },
                    Ok(cands) => match choose(region, &cands) {
                        Some(i) => RegionOutcome::Resolved {
                            candidate: cands[i].clone(),
                        },
                        None => RegionOutcome::Abstained {
                            reason: AbstainReason::Declined,
                        },
                    },
                };
                match &outcome {
                    RegionOutcome::Resolved { candidate } => {
                        push(&mut segments, Segment::Plain(candidate.text.clone()))
                    }
                    RegionOutcome::Abstained { .. } => {
                        push(&mut segments, Segment::Conflict(region.clone()))
                    }
                }
                report.outcomes.push(outcome);
            }
        }
    }
    (
        ConflictDocument {
            segments,
            terminator: doc.terminator,
            trailing_newline: doc.trailing_newline,
        },
        report,
    )
}
