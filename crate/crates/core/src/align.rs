//! Edit-aware alignment of a variant token stream against the base.
//!
//! Produces padded streams (variant′, base′) of one common length together
//! with an edit sequence Δ over {=, +, −, ↔, ∅, |}. Token identity is
//! erased in Δ; only the kind of edit survives, which is what the aligned
//! input representations feed to the encoder.

use alloc::vec::Vec;

use crate::diffcore::{self, DiffOp};
use crate::tokenizer::{TokenId, NEWLINE, PAD};

/// One symbol of an edit sequence Δ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum EditSymbol {
    /// `=` — tokens equal at this position.
    Eq,
    /// `+` — variant-only token; base stream holds PAD here.
    Ins,
    /// `−` — base-only token; variant stream holds PAD here.
    Del,
    /// `↔` — both positions carry differing tokens.
    Repl,
    /// `∅` — alignment padding on both streams.
    Pad,
    /// `|` — matched newline boundary.
    Nl,
}

/// The number of distinct edit symbols; sizes the edit-symbol embedding.
pub const NUM_EDIT_SYMBOLS: usize = 6;

impl EditSymbol {
    /// Dense index for embedding lookup.
    pub fn index(self) -> usize {
        match self {
            EditSymbol::Eq => 0,
            EditSymbol::Ins => 1,
            EditSymbol::Del => 2,
            EditSymbol::Repl => 3,
            EditSymbol::Pad => 4,
            EditSymbol::Nl => 5,
        }
    }

    pub fn glyph(self) -> char {
        match self {
            EditSymbol::Eq => '=',
            EditSymbol::Ins => '+',
            EditSymbol::Del => '-',
            EditSymbol::Repl => '~',
            EditSymbol::Pad => '.',
            EditSymbol::Nl => '|',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EditSequence {
    pub symbols: Vec<EditSymbol>,
}

impl EditSequence {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Edit cost under ins = del = 1, repl = 2. Equal to the token edit
    /// distance when the alignment is minimal.
    pub fn cost(&self) -> usize {
        self.symbols
            .iter()
            .map(|s| match s {
                EditSymbol::Ins | EditSymbol::Del => 1,
                EditSymbol::Repl => 2,
                _ => 0,
            })
            .sum()
    }
}

/// A variant aligned against the base: equal-length padded streams plus Δ.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct AlignedPair {
    pub variant_padded: Vec<TokenId>,
    pub base_padded: Vec<TokenId>,
    pub delta: EditSequence,
}

impl AlignedPair {
    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    fn push(&mut self, variant: TokenId, base: TokenId, sym: EditSymbol) {
        self.variant_padded.push(variant);
        self.base_padded.push(base);
        self.delta.symbols.push(sym);
    }
}

/// Aligns `variant` against `base` with an LCS token diff. Unmatched
/// variant tokens become INS, unmatched base tokens DEL; where a DEL run
/// abuts an INS run the overlapping positions fuse into REPL. Matched
/// NEWLINE tokens emit NL (an edited newline keeps its edit symbol).
pub fn align_two_way(variant: &[TokenId], base: &[TokenId]) -> AlignedPair {
    let mut out = AlignedPair {
        variant_padded: Vec::new(),
        base_padded: Vec::new(),
        delta: EditSequence {
            symbols: Vec::new(),
        },
    };
    // diff old=base, new=variant: Delete hits base-only tokens, Insert
    // variant-only ones.
    let ops = diffcore::diff(base, variant);
    let mut i = 0;
    while i < ops.len() {
        match &ops[i] {
            DiffOp::Equal { a, b } => {
                for (bi, vi) in a.clone().zip(b.clone()) {
                    let t = variant[vi];
                    debug_assert_eq!(t, base[bi]);
                    let sym = if t == NEWLINE {
                        EditSymbol::Nl
                    } else {
                        EditSymbol::Eq
                    };
                    out.push(t, t, sym);
                }
                i += 1;
            }
            DiffOp::Delete { a } => {
                if let Some(DiffOp::Insert { b }) = ops.get(i + 1) {
                    fuse(&mut out, &base[a.clone()], &variant[b.clone()]);
                    i += 2;
                } else {
                    for &t in &base[a.clone()] {
                        out.push(PAD, t, EditSymbol::Del);
                    }
                    i += 1;
                }
            }
            DiffOp::Insert { b } => {
                if let Some(DiffOp::Delete { a }) = ops.get(i + 1) {
                    fuse(&mut out, &base[a.clone()], &variant[b.clone()]);
                    i += 2;
                } else {
                    for &t in &variant[b.clone()] {
                        out.push(t, PAD, EditSymbol::Ins);
                    }
                    i += 1;
                }
            }
        }
    }
    out
}

/// Pairs off a deleted base run with an inserted variant run: the first
/// min(|del|, |ins|) positions become REPL, the remainder stays DEL or INS.
fn fuse(out: &mut AlignedPair, deleted: &[TokenId], inserted: &[TokenId]) {
    let fused = deleted.len().min(inserted.len());
    for k in 0..fused {
        out.push(inserted[k], deleted[k], EditSymbol::Repl);
    }
    for &t in &deleted[fused..] {
        out.push(PAD, t, EditSymbol::Del);
    }
    for &t in &inserted[fused..] {
        out.push(t, PAD, EditSymbol::Ins);
    }
}

/// Aligns both variants against the base, then right-pads the shorter
/// alignment with PAD so the two deltas share one length.
pub fn align_merge(a: &[TokenId], b: &[TokenId], o: &[TokenId]) -> (AlignedPair, AlignedPair) {
    let mut ao = align_two_way(a, o);
    let mut bo = align_two_way(b, o);
    let target = ao.len().max(bo.len());
    pad_to(&mut ao, target);
    pad_to(&mut bo, target);
    (ao, bo)
}

fn pad_to(pair: &mut AlignedPair, target: usize) {
    while pair.len() < target {
        pair.push(PAD, PAD, EditSymbol::Pad);
    }
}
