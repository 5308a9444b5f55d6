//! Line-based three-way merge with diff3 semantics, plus bit-exact parsing
//! and serialization of conflict-marked files.
//!
//! The conflict format is the `git merge-file --diff3` one: seven-character
//! markers `<<<<<<<`, `|||||||`, `=======`, `>>>>>>>` at line start, with
//! optional labels after the first, second, and last marker. Parsing also
//! accepts six-character markers; serialization always emits seven.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::diffcore;

/// Line-ending convention, uniform per document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LineEnding {
    Lf,
    CrLf,
}

impl LineEnding {
    pub fn as_str(self) -> &'static str {
        match self {
            LineEnding::Lf => "\n",
            LineEnding::CrLf => "\r\n",
        }
    }
}

/// A text file as a sequence of lines (terminators excluded).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextDocument {
    pub lines: Vec<String>,
    pub terminator: LineEnding,
    /// Whether the final line carries a terminator. An empty document has no
    /// lines and serializes to zero bytes.
    pub trailing_newline: bool,
}

impl TextDocument {
    pub fn from_lines<S: Into<String>, I: IntoIterator<Item = S>>(lines: I) -> Self {
        Self {
            lines: lines.into_iter().map(Into::into).collect(),
            terminator: LineEnding::Lf,
            trailing_newline: true,
        }
    }

    /// Splits `text` into lines, detecting the terminator from the first
    /// newline. CRLF input is normalized: the `\r` goes into the recorded
    /// terminator, not the line text.
    pub fn parse(text: &str) -> Self {
        let (terminator, lines, trailing_newline) = split_lines(text);
        Self {
            lines,
            terminator,
            trailing_newline,
        }
    }

    pub fn serialize(&self) -> String {
        join_lines(&self.lines, self.terminator, self.trailing_newline)
    }
}

/// One marker-delimited conflict: A's lines, the affected base lines, and
/// B's lines, plus the marker labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConflictRegion {
    pub a_lines: Vec<String>,
    pub o_lines: Vec<String>,
    pub b_lines: Vec<String>,
    pub a_label: String,
    pub o_label: String,
    pub b_label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Plain(Vec<String>),
    Conflict(ConflictRegion),
}

/// A file interleaving plain line runs and conflict regions.
///
/// Invariant: two `Plain` segments are never adjacent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictDocument {
    pub segments: Vec<Segment>,
    pub terminator: LineEnding,
    pub trailing_newline: bool,
}

impl ConflictDocument {
    pub fn conflicts(&self) -> impl Iterator<Item = &ConflictRegion> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Conflict(r) => Some(r),
            Segment::Plain(_) => None,
        })
    }

    pub fn num_conflicts(&self) -> usize {
        self.conflicts().count()
    }

    pub fn is_clean(&self) -> bool {
        self.num_conflicts() == 0
    }

    /// The merged result when the document has no conflicts.
    pub fn into_clean(self) -> Option<TextDocument> {
        if !self.is_clean() {
            return None;
        }
        let mut lines = Vec::new();
        for seg in self.segments {
            if let Segment::Plain(ls) = seg {
                lines.extend(ls);
            }
        }
        Some(TextDocument {
            lines,
            terminator: self.terminator,
            trailing_newline: self.trailing_newline,
        })
    }
}

/// Marker structure violation, with the 1-based offending line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedMarkers {
    pub line: usize,
    pub found: MarkerKind,
    pub expected: &'static str,
}

impl fmt::Display for MalformedMarkers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "malformed conflict markers at line {}: found {:?}, expected {}",
            self.line, self.found, self.expected
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerKind {
    Start,
    Base,
    Separator,
    End,
    EndOfFile,
}

fn split_lines(text: &str) -> (LineEnding, Vec<String>, bool) {
    if text.is_empty() {
        return (LineEnding::Lf, Vec::new(), true);
    }
    let terminator = match text.find('\n') {
        Some(pos) if pos > 0 && text.as_bytes()[pos - 1] == b'\r' => LineEnding::CrLf,
        _ => LineEnding::Lf,
    };
    let trailing_newline = text.ends_with('\n');
    let body = text.strip_suffix('\n').unwrap_or(text);
    let body = match terminator {
        LineEnding::CrLf => body.strip_suffix('\r').unwrap_or(body),
        LineEnding::Lf => body,
    };
    let lines = body
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
        .collect();
    (terminator, lines, trailing_newline)
}

fn join_lines(lines: &[String], terminator: LineEnding, trailing_newline: bool) -> String {
    if lines.is_empty() {
        return String::new();
    }
    let mut out = String::new();
    for (i, line) in lines.iter().enumerate() {
        out.push_str(line);
        if i + 1 < lines.len() || trailing_newline {
            out.push_str(terminator.as_str());
        }
    }
    out
}

fn marker_label(line: &str, marker: char) -> Option<&str> {
    // Accept 6- or 7-character markers; the marker must be followed by
    // end-of-line or a space introducing the label.
    for width in [7usize, 6] {
        if line.len() >= width && line.chars().take(width).all(|c| c == marker) {
            let rest = &line[width..];
            if rest.is_empty() {
                return Some("");
            }
            if let Some(label) = rest.strip_prefix(' ') {
                return Some(label);
            }
        }
    }
    None
}

/// Parses a conflict-marked file into its plain/conflict segmentation.
/// Marker lines themselves belong to no segment.
pub fn parse_conflicts(text: &str) -> Result<ConflictDocument, MalformedMarkers> {
    let (terminator, lines, trailing_newline) = split_lines(text);

    enum State {
        Plain,
        InA,
        InO,
        InB,
    }

    let mut segments = Vec::new();
    let mut plain: Vec<String> = Vec::new();
    let mut region = ConflictRegion::default();
    let mut state = State::Plain;

    for (idx, line) in lines.iter().enumerate() {
        let lineno = idx + 1;
        let start = marker_label(line, '<');
        let base = marker_label(line, '|');
        let sep = if line == "=======" || line == "======" {
            Some("")
        } else {
            None
        };
        let end = marker_label(line, '>');
        let found = if start.is_some() {
            Some(MarkerKind::Start)
        } else if base.is_some() {
            Some(MarkerKind::Base)
        } else if sep.is_some() {
            Some(MarkerKind::Separator)
        } else if end.is_some() {
            Some(MarkerKind::End)
        } else {
            None
        };

        match state {
            State::Plain => match found {
                Some(MarkerKind::Start) => {
                    if !plain.is_empty() {
                        segments.push(Segment::Plain(core::mem::take(&mut plain)));
                    }
                    region = ConflictRegion {
                        a_label: start.unwrap().to_string(),
                        ..Default::default()
                    };
                    state = State::InA;
                }
                Some(kind) => {
                    return Err(MalformedMarkers {
                        line: lineno,
                        found: kind,
                        expected: "<<<<<<<",
                    })
                }
                None => plain.push(line.clone()),
            },
            State::InA => match found {
                Some(MarkerKind::Base) => {
                    region.o_label = base.unwrap().to_string();
                    state = State::InO;
                }
                Some(kind) => {
                    return Err(MalformedMarkers {
                        line: lineno,
                        found: kind,
                        expected: "|||||||",
                    })
                }
                None => region.a_lines.push(line.clone()),
            },
            State::InO => match found {
                Some(MarkerKind::Separator) => state = State::InB,
                Some(kind) => {
                    return Err(MalformedMarkers {
                        line: lineno,
                        found: kind,
                        expected: "=======",
                    })
                }
                None => region.o_lines.push(line.clone()),
            },
            State::InB => match found {
                Some(MarkerKind::End) => {
                    region.b_label = end.unwrap().to_string();
                    segments.push(Segment::Conflict(core::mem::take(&mut region)));
                    state = State::Plain;
                }
                Some(kind) => {
                    return Err(MalformedMarkers {
                        line: lineno,
                        found: kind,
                        expected: ">>>>>>>",
                    })
                }
                None => region.b_lines.push(line.clone()),
            },
        }
    }

    if !matches!(state, State::Plain) {
        return Err(MalformedMarkers {
            line: lines.len(),
            found: MarkerKind::EndOfFile,
            expected: "closing conflict marker",
        });
    }
    if !plain.is_empty() {
        segments.push(Segment::Plain(plain));
    }

    Ok(ConflictDocument {
        segments,
        terminator,
        trailing_newline,
    })
}

fn push_marker(out: &mut Vec<String>, marker: &str, label: &str) {
    if label.is_empty() {
        out.push(marker.to_string());
    } else {
        let mut line = String::with_capacity(marker.len() + 1 + label.len());
        line.push_str(marker);
        line.push(' ');
        line.push_str(label);
        out.push(line);
    }
}

/// Serializes a conflict document with canonical seven-character markers.
pub fn serialize(doc: &ConflictDocument) -> String {
    let mut lines: Vec<String> = Vec::new();
    for seg in &doc.segments {
        match seg {
            Segment::Plain(ls) => lines.extend(ls.iter().cloned()),
            Segment::Conflict(r) => {
                push_marker(&mut lines, "<<<<<<<", &r.a_label);
                lines.extend(r.a_lines.iter().cloned());
                push_marker(&mut lines, "|||||||", &r.o_label);
                lines.extend(r.o_lines.iter().cloned());
                lines.push("=======".to_string());
                lines.extend(r.b_lines.iter().cloned());
                push_marker(&mut lines, ">>>>>>>", &r.b_label);
            }
        }
    }
    join_lines(&lines, doc.terminator, doc.trailing_newline)
}

/// Labels stamped on the markers of emitted conflict regions.
#[derive(Debug, Clone, Default)]
pub struct MergeLabels {
    pub a: String,
    pub o: String,
    pub b: String,
}

/// Three-way merge of `a` and `b` over base `o`, producing conflict regions
/// wherever both sides change the same diff slot.
pub fn diff3_merge(a: &TextDocument, o: &TextDocument, b: &TextDocument) -> ConflictDocument {
    diff3_merge_with_labels(a, o, b, &MergeLabels::default())
}

pub fn diff3_merge_with_labels(
    a: &TextDocument,
    o: &TextDocument,
    b: &TextDocument,
    labels: &MergeLabels,
) -> ConflictDocument {
    debug_assert_eq!(a.terminator, o.terminator);
    debug_assert_eq!(o.terminator, b.terminator);

    // Match positions of each base line in A and in B.
    let mut o_in_a: Vec<Option<usize>> = alloc::vec![None; o.lines.len()];
    for (oi, ai) in diffcore::match_pairs(&o.lines, &a.lines) {
        o_in_a[oi] = Some(ai);
    }
    let mut o_in_b: Vec<Option<usize>> = alloc::vec![None; o.lines.len()];
    for (oi, bi) in diffcore::match_pairs(&o.lines, &b.lines) {
        o_in_b[oi] = Some(bi);
    }

    let mut segments: Vec<Segment> = Vec::new();
    let mut plain: Vec<String> = Vec::new();
    let emit_chunk = |a_sl: &[String], o_sl: &[String], b_sl: &[String], plain: &mut Vec<String>, segments: &mut Vec<Segment>| {
        let a_changed = a_sl != o_sl;
        let b_changed = b_sl != o_sl;
        match (a_changed, b_changed) {
            (false, false) => plain.extend_from_slice(o_sl),
            (true, false) => plain.extend_from_slice(a_sl),
            (false, true) => plain.extend_from_slice(b_sl),
            (true, true) => {
                if a_sl == b_sl {
                    plain.extend_from_slice(a_sl);
                } else {
                    if !plain.is_empty() {
                        segments.push(Segment::Plain(core::mem::take(plain)));
                    }
                    segments.push(Segment::Conflict(ConflictRegion {
                        a_lines: a_sl.to_vec(),
                        o_lines: o_sl.to_vec(),
                        b_lines: b_sl.to_vec(),
                        a_label: labels.a.clone(),
                        o_label: labels.o.clone(),
                        b_label: labels.b.clone(),
                    }));
                }
            }
        }
    };

    let (mut oi, mut ai, mut bi) = (0usize, 0usize, 0usize);
    loop {
        // Length of the stable run at the current offsets: base lines matched
        // in both variants at exactly the aligned positions.
        let mut run = 0;
        while oi + run < o.lines.len()
            && o_in_a[oi + run] == Some(ai + run)
            && o_in_b[oi + run] == Some(bi + run)
        {
            run += 1;
        }
        if run > 0 {
            plain.extend_from_slice(&o.lines[oi..oi + run]);
            oi += run;
            ai += run;
            bi += run;
            continue;
        }

        // Unstable chunk: extend to the next base line matched in both.
        let mut next = oi;
        while next < o.lines.len() && (o_in_a[next].is_none() || o_in_b[next].is_none()) {
            next += 1;
        }
        if next == o.lines.len() {
            if oi < o.lines.len() || ai < a.lines.len() || bi < b.lines.len() {
                emit_chunk(
                    &a.lines[ai..],
                    &o.lines[oi..],
                    &b.lines[bi..],
                    &mut plain,
                    &mut segments,
                );
            }
            break;
        }
        let a_next = o_in_a[next].unwrap();
        let b_next = o_in_b[next].unwrap();
        emit_chunk(
            &a.lines[ai..a_next],
            &o.lines[oi..next],
            &b.lines[bi..b_next],
            &mut plain,
            &mut segments,
        );
        oi = next;
        ai = a_next;
        bi = b_next;
    }

    if !plain.is_empty() {
        segments.push(Segment::Plain(plain));
    }
    ConflictDocument {
        segments,
        terminator: o.terminator,
        trailing_newline: if a.lines.is_empty() && b.lines.is_empty() && o.lines.is_empty() {
            true
        } else {
            a.trailing_newline && b.trailing_newline
        },
    }
}
