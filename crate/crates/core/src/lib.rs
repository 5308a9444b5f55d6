//! Core algorithms for data-driven resolution of textual merge conflicts.
//!
//! The pipeline this crate implements:
//!
//! 1. [`textmerge`] — line-based three-way merge (diff3 semantics) and
//!    bit-exact parsing/serialization of conflict-marked files.
//! 2. [`localize`] — recovering the developer's resolution region for each
//!    conflict from the resolved file.
//! 3. [`tokenizer`] — byte-pair-encoding subword tokenization with newline
//!    structure preserved.
//! 4. [`align`] — edit sequences between each variant and the base over
//!    tokenized streams.
//! 5. [`merge2matrix`] — turning a merge tuple into a single real-valued
//!    input matrix (five representations).
//! 6. [`neural`] — a bi-directional GRU encoder with an attention decoder
//!    over line-copy indices, trained with cross-entropy and Adam.
//! 7. [`resolver`] — end-to-end inference: conflict region in, ranked
//!    textual resolutions out.
//! 8. [`baselines`] — the ScanMerge sampling heuristic.
//! 9. [`evalharness`] — exact-match, top-k, threshold sweeps, size buckets,
//!    CONCAT/OTHER classes, and BLEU-4.
//!
//! The crate is `no_std` + `alloc`; all IO lives in the companion CLI crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod align;
pub mod baselines;
pub mod diffcore;
pub mod evalharness;
pub mod localize;
pub mod merge2matrix;
pub mod neural;
pub mod resolver;
pub mod textmerge;
pub mod tokenizer;
