//! Merge2Matrix: assembling a merge tuple into one real-valued input
//! matrix for the encoder.
//!
//! Five representations are supported. The unaligned ones (NAIVE,
//! LINEARIZED) pad the three token streams to a common length; the aligned
//! ones work over the edit sequences Δ_AO, Δ_BO, whose lengths are already
//! equalized by `align_merge`. Edit symbols are embedded through a
//! dedicated 6-entry table — the Δ alphabet is disjoint from the token
//! vocabulary.

use alloc::vec::Vec;

use crate::align::{self, AlignedPair, NUM_EDIT_SYMBOLS};
use crate::neural::Matrix;
use crate::tokenizer::{TokenId, PAD};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EmbeddingTable {
    pub matrix: Matrix, // D × |V|
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn vocab_size(&self) -> usize {
        self.matrix.cols()
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinearizeParams {
    /// θ₁..θ_s followed by the bias θ_{s+1}.
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReprMode {
    Naive,
    Linearized,
    AlignedNaive,
    AlignedLinearized,
    Ltre,
}

impl ReprMode {
    /// Number of linearize θ parameters (s + 1), zero for non-linearized
    /// modes.
    pub fn theta_len(self) -> usize {
        match self {
            ReprMode::Linearized => 4,
            ReprMode::AlignedLinearized => 3,
            _ => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReprMode::Naive => "naive",
            ReprMode::Linearized => "linearized",
            ReprMode::AlignedNaive => "aligned_naive",
            ReprMode::AlignedLinearized => "aligned_linearized",
            ReprMode::Ltre => "ltre",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "naive" => ReprMode::Naive,
            "linearized" => ReprMode::Linearized,
            "aligned_naive" => ReprMode::AlignedNaive,
            "aligned_linearized" => ReprMode::AlignedLinearized,
            "ltre" => ReprMode::Ltre,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputMatrix {
    pub matrix: Matrix, // D × N
    pub mode: ReprMode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Merge2MatrixError {
    IndexOutOfVocabulary { index: TokenId, vocab: usize },
    ShapeMismatch,
}

impl core::fmt::Display for Merge2MatrixError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Merge2MatrixError::IndexOutOfVocabulary { index, vocab } => {
                write!(f, "token index {index} outside vocabulary of size {vocab}")
            }
            Merge2MatrixError::ShapeMismatch => write!(f, "matrix shapes differ"),
        }
    }
}

/// Column n of the result is column `tokens[n]` of the table.
pub fn embed(tokens: &[TokenId], table: &EmbeddingTable) -> Result<Matrix, Merge2MatrixError> {
    let d = table.dim();
    let v = table.vocab_size();
    let mut out = Matrix::zeros(d, tokens.len());
    for (n, &t) in tokens.iter().enumerate() {
        if t as usize >= v {
            return Err(Merge2MatrixError::IndexOutOfVocabulary { index: t, vocab: v });
        }
        for i in 0..d {
            out[(i, n)] = table.matrix[(i, t as usize)];
        }
    }
    Ok(out)
}

/// Horizontal concatenation of equally shaped parts, in argument order.
pub fn concat_s(parts: &[&Matrix]) -> Result<Matrix, Merge2MatrixError> {
    let shape = parts.first().map(|p| p.shape());
    if parts.iter().any(|p| Some(p.shape()) != shape) {
        return Err(Merge2MatrixError::ShapeMismatch);
    }
    Ok(Matrix::hcat(parts))
}

/// Pointwise θ₁·x₁ + ... + θ_s·x_s + θ_{s+1}, the bias broadcast to every
/// entry.
pub fn linearize(parts: &[&Matrix], theta: &LinearizeParams) -> Result<Matrix, Merge2MatrixError> {
    assert_eq!(theta.theta.len(), parts.len() + 1, "θ must have s+1 entries");
    let shape = parts.first().map(|p| p.shape());
    if parts.iter().any(|p| Some(p.shape()) != shape) {
        return Err(Merge2MatrixError::ShapeMismatch);
    }
    let (rows, cols) = shape.unwrap_or((0, 0));
    let bias = *theta.theta.last().unwrap();
    let mut out = Matrix::from_fn(rows, cols, |_, _| bias);
    for (part, &w) in parts.iter().zip(&theta.theta) {
        out.add_assign_scaled(part, w);
    }
    Ok(out)
}

fn pad_right(tokens: &[TokenId], len: usize) -> Vec<TokenId> {
    let mut v = tokens.to_vec();
    v.resize(len, PAD);
    v
}

fn embed_delta(pair: &AlignedPair, edit_table: &EmbeddingTable) -> Result<Matrix, Merge2MatrixError> {
    assert_eq!(edit_table.vocab_size(), NUM_EDIT_SYMBOLS);
    let indices: Vec<TokenId> = pair
        .delta
        .symbols
        .iter()
        .map(|s| s.index() as TokenId)
        .collect();
    embed(&indices, edit_table)
}

/// Assembles the input matrix for one merge tuple's token streams.
pub fn represent(
    a: &[TokenId],
    b: &[TokenId],
    o: &[TokenId],
    mode: ReprMode,
    token_table: &EmbeddingTable,
    edit_table: &EmbeddingTable,
    theta: &LinearizeParams,
) -> Result<InputMatrix, Merge2MatrixError> {
    let matrix = match mode {
        ReprMode::Naive | ReprMode::Linearized => {
            let l_max = a.len().max(b.len()).max(o.len());
            let ea = embed(&pad_right(a, l_max), token_table)?;
            let eb = embed(&pad_right(b, l_max), token_table)?;
            let eo = embed(&pad_right(o, l_max), token_table)?;
            if mode == ReprMode::Naive {
                concat_s(&[&ea, &eb, &eo])?
            } else {
                linearize(&[&ea, &eb, &eo], theta)?
            }
        }
        ReprMode::AlignedNaive | ReprMode::AlignedLinearized => {
            let (ao, bo) = align::align_merge(a, b, o);
            let dao = embed_delta(&ao, edit_table)?;
            let dbo = embed_delta(&bo, edit_table)?;
            if mode == ReprMode::AlignedNaive {
                concat_s(&[&dao, &dbo])?
            } else {
                linearize(&[&dao, &dbo], theta)?
            }
        }
        ReprMode::Ltre => {
            let (ao, bo) = align::align_merge(a, b, o);
            let dao = embed_delta(&ao, edit_table)?;
            let dbo = embed_delta(&bo, edit_table)?;
            let ap = embed(&ao.variant_padded, token_table)?;
            let aop = embed(&ao.base_padded, token_table)?;
            let bp = embed(&bo.variant_padded, token_table)?;
            let bop = embed(&bo.base_padded, token_table)?;
            concat_s(&[&dao, &ap, &aop, &dbo, &bp, &bop])?
        }
    };
    Ok(InputMatrix { matrix, mode })
}
