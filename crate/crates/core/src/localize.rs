//! Recovering ground-truth resolutions: given a conflict-marked file and the
//! file the developer committed, find the exact span that replaced each
//! conflict region.
//!
//! The strategy is to bookend each conflict with the text before and after
//! it, then locate the shortest prefix of each bookend that occurs exactly
//! once in the resolved file. Sentinel bytes anchor the beginning and end of
//! file so "start of file" is itself a unique bookend. If either bookend is
//! ambiguous the region is skipped rather than guessed.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::textmerge::{self, ConflictDocument, ConflictRegion, MalformedMarkers, Segment};

/// Lines of surrounding context captured with each extracted tuple.
pub const CONTEXT_LINES: usize = 5;

/// One labeled training/eval sample: the conflicting regions plus the
/// developer's resolution, with context and origin.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MergeTuple {
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub o: Vec<String>,
    pub r: Vec<String>,
    pub conflict_index: usize,
    pub context_prefix: Vec<String>,
    pub context_suffix: Vec<String>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct Provenance {
    pub repository: String,
    pub commit: String,
    pub file_path: String,
}

/// Start position in `y` of the shortest non-empty prefix of `x` occurring
/// exactly once in `y`; `-1` if no prefix of `x` is unique in `y` or `x` is
/// empty.
pub fn minimal_unique_prefix(x: &[u8], y: &[u8]) -> isize {
    if x.is_empty() {
        return -1;
    }
    // Candidate occurrence positions, filtered as the prefix grows.
    let mut candidates: Vec<usize> = (0..y.len()).filter(|&p| y[p] == x[0]).collect();
    let mut len = 1;
    loop {
        match candidates.len() {
            0 => return -1,
            1 => return candidates[0] as isize,
            _ => {}
        }
        if len == x.len() {
            return -1; // x exhausted while still ambiguous
        }
        let next = x[len];
        candidates.retain(|&p| p + len < y.len() && y[p + len] == next);
        len += 1;
    }
}

// Sentinels outside the text alphabet of well-formed source files; they make
// begin-of-file and end-of-file literal, matchable anchors.
const BOF: u8 = 0xFE;
const EOF: u8 = 0xFF;

fn reversed(bytes: &[u8]) -> Vec<u8> {
    bytes.iter().rev().copied().collect()
}

/// Byte offsets of the `i`-th conflict region in the serialized conflict
/// file: start of its `<<<<<<<` line and the offset just past its `>>>>>>>`
/// line (terminator included).
fn conflict_start_end(doc: &ConflictDocument, index: usize) -> Option<(usize, usize)> {
    let text = textmerge::serialize(doc);
    let term = doc.terminator.as_str();
    let mut pos = 0usize;
    let mut seen = 0usize;
    for seg in &doc.segments {
        match seg {
            Segment::Plain(lines) => {
                for line in lines {
                    pos += line.len() + term.len();
                }
            }
            Segment::Conflict(r) => {
                let start = pos;
                // marker lines + content lines
                let mut region_lines = 4 + r.a_lines.len() + r.o_lines.len() + r.b_lines.len();
                let mut len = 0usize;
                for line in region_serialized_lines(r) {
                    len += line.len() + term.len();
                    region_lines -= 1;
                }
                debug_assert_eq!(region_lines, 0);
                let end = start + len;
                if seen == index {
                    // A missing trailing terminator on the last line is not
                    // part of the region text.
                    return Some((start, end.min(text.len())));
                }
                seen += 1;
                pos = end;
            }
        }
    }
    None
}

fn region_serialized_lines(r: &ConflictRegion) -> Vec<String> {
    let single = ConflictDocument {
        segments: alloc::vec![Segment::Conflict(r.clone())],
        terminator: textmerge::LineEnding::Lf,
        trailing_newline: true,
    };
    textmerge::serialize(&single)
        .strip_suffix('\n')
        .unwrap_or_default()
        .split('\n')
        .map(|l| l.to_string())
        .collect()
}

/// Locates the resolution of the `i`-th conflict of `conflict_text` inside
/// `resolved_text`. Returns the resolved lines, or `None` when either
/// bookend fails to match uniquely or the matched span does not snap to
/// whole lines.
pub fn localize_res_region(
    conflict_text: &str,
    resolved_text: &str,
    index: usize,
) -> Result<Option<Vec<String>>, MalformedMarkers> {
    let doc = textmerge::parse_conflicts(conflict_text)?;
    Ok(localize_res_region_parsed(&doc, resolved_text, index))
}

pub fn localize_res_region_parsed(
    doc: &ConflictDocument,
    resolved_text: &str,
    index: usize,
) -> Option<Vec<String>> {
    let conflict_bytes = textmerge::serialize(doc).into_bytes();
    let (spos, epos) = conflict_start_end(doc, index)?;

    let mut prefix = alloc::vec![BOF];
    prefix.extend_from_slice(&conflict_bytes[..spos]);
    let mut suffix = conflict_bytes[epos..].to_vec();
    suffix.push(EOF);

    // Resolved file with the same sentinels attached.
    let mut resolved = alloc::vec![BOF];
    resolved.extend_from_slice(resolved_text.as_bytes());
    resolved.push(EOF);
    let n = resolved.len();

    let s = minimal_unique_prefix(&reversed(&prefix), &reversed(&resolved));
    let e = minimal_unique_prefix(&suffix, &resolved);
    if s < 0 || e < 0 {
        return None;
    }
    let start = n - s as usize; // prefix occupies resolved[..start]
    let end = e as usize;
    if start > end {
        return None;
    }

    // Map back to sentinel-free coordinates and snap to whole lines.
    let raw = resolved_text.as_bytes();
    let start = start - 1;
    let end = end - 1;
    let at_line_start = start == 0 || raw[start - 1] == b'\n';
    let at_line_end = end == raw.len() || end == 0 || raw[end - 1] == b'\n';
    if !at_line_start || !at_line_end {
        return None;
    }
    let span = core::str::from_utf8(&raw[start..end]).ok()?;
    if span.is_empty() {
        return Some(Vec::new());
    }
    Some(
        span.strip_suffix('\n')
            .map(|s| s.strip_suffix('\r').unwrap_or(s))
            .unwrap_or(span)
            .split('\n')
            .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
            .collect(),
    )
}

/// Runs localization and the dataset filters over every conflict region of a
/// (conflict file, resolved file) pair.
///
/// A region is kept only when its resolution was found unambiguously, is not
/// simply `A`, `B`, or `O` verbatim, and introduces no line absent from
/// `A ∪ B`.
pub fn localize_merge_tuples(
    conflict_text: &str,
    resolved_text: &str,
    provenance: &Provenance,
) -> Result<Vec<MergeTuple>, MalformedMarkers> {
    let doc = textmerge::parse_conflicts(conflict_text)?;
    let regions: Vec<&ConflictRegion> = doc.conflicts().collect();
    let mut tuples = Vec::new();
    for (i, region) in regions.iter().enumerate() {
        let Some(r) = localize_res_region_parsed(&doc, resolved_text, i) else {
            continue; // could not find resolution
        };
        if r == region.a_lines || r == region.b_lines || r == region.o_lines {
            continue; // trivial resolution
        }
        let line_pool = |l: &String| {
            region.a_lines.contains(l) || region.b_lines.contains(l)
        };
        if !r.iter().all(line_pool) {
            continue; // resolution writes new code
        }
        let (ctx_prefix, ctx_suffix) = context_around(&doc, i);
        tuples.push(MergeTuple {
            a: region.a_lines.clone(),
            b: region.b_lines.clone(),
            o: region.o_lines.clone(),
            r,
            conflict_index: i,
            context_prefix: ctx_prefix,
            context_suffix: ctx_suffix,
            provenance: provenance.clone(),
        });
    }
    Ok(tuples)
}

fn context_around(doc: &ConflictDocument, index: usize) -> (Vec<String>, Vec<String>) {
    let mut seen = 0usize;
    let mut pos = None;
    for (si, seg) in doc.segments.iter().enumerate() {
        if let Segment::Conflict(_) = seg {
            if seen == index {
                pos = Some(si);
                break;
            }
            seen += 1;
        }
    }
    let Some(si) = pos else {
        return (Vec::new(), Vec::new());
    };
    let prefix = match si.checked_sub(1).map(|p| &doc.segments[p]) {
        Some(Segment::Plain(lines)) => {
            let skip = lines.len().saturating_sub(CONTEXT_LINES);
            lines[skip..].to_vec()
        }
        _ => Vec::new(),
    };
    let suffix = match doc.segments.get(si + 1) {
        Some(Segment::Plain(lines)) => lines[..lines.len().min(CONTEXT_LINES)].to_vec(),
        _ => Vec::new(),
    };
    (prefix, suffix)
}
