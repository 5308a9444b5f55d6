//! The sequence model: a bi-directional GRU encoder over the Merge2Matrix
//! input, an attention decoder over line-copy indices, cross-entropy
//! training with Adam, and beam-search decoding.
//!
//! The output space is pointer-style: index 0 is STOP, a combined index
//! i ∈ 1..=Li_A+Li_B copies line i of A when i ≤ Li_A and line i−Li_A of B
//! otherwise. Logits always have dimension 2·L_max+1; indices outside the
//! instance's line counts are masked to probability zero.

pub mod matrix;
pub mod tape;

pub use matrix::Matrix;
pub use tape::{masked_softmax, NodeId, Tape};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::align;
use crate::merge2matrix::ReprMode;
use crate::tokenizer::{TokenId, Vocabulary};

/// Default decode length bound.
pub const DEFAULT_MAX_DECODE: usize = 30;
/// Default per-side line cap.
pub const DEFAULT_L_MAX: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Side {
    A,
    B,
}

/// One decoded output symbol: a line copy or the stop marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum LineRef {
    /// 1-based line `index` of the given side.
    Line { index: usize, side: Side },
    Stop,
}

/// The instance-specific index space the decoder emits into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputSpace {
    pub li_a: usize,
    pub li_b: usize,
    pub l_max: usize,
}

impl OutputSpace {
    pub fn new(li_a: usize, li_b: usize, l_max: usize) -> Self {
        Self { li_a, li_b, l_max }
    }

    pub fn fits(&self) -> bool {
        self.li_a <= self.l_max && self.li_b <= self.l_max
    }

    pub fn logits_dim(&self) -> usize {
        2 * self.l_max + 1
    }

    /// Mask over logit indices: STOP plus the combined indices this
    /// instance actually has.
    pub fn valid_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.logits_dim()];
        mask[0] = true;
        for i in 1..=self.li_a + self.li_b {
            mask[i] = true;
        }
        mask
    }

    /// Combined logit index → line reference.
    pub fn to_ref(&self, i: usize) -> LineRef {
        if i == 0 {
            LineRef::Stop
        } else if i <= self.li_a {
            LineRef::Line {
                index: i,
                side: Side::A,
            }
        } else {
            LineRef::Line {
                index: i - self.li_a,
                side: Side::B,
            }
        }
    }

    pub fn from_ref(&self, r: LineRef) -> usize {
        match r {
            LineRef::Stop => 0,
            LineRef::Line { index, side: Side::A } => index,
            LineRef::Line { index, side: Side::B } => self.li_a + index,
        }
    }
}

/// A merge tuple lowered to token streams, ready for the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedTuple {
    pub a: Vec<TokenId>,
    pub b: Vec<TokenId>,
    pub o: Vec<TokenId>,
    pub li_a: usize,
    pub li_b: usize,
}

impl EncodedTuple {
    pub fn from_lines<S: AsRef<str>>(
        a_lines: &[S],
        b_lines: &[S],
        o_lines: &[S],
        vocab: &Vocabulary,
    ) -> Self {
        Self {
            a: vocab.encode_lines(a_lines),
            b: vocab.encode_lines(b_lines),
            o: vocab.encode_lines(o_lines),
            li_a: a_lines.len(),
            li_b: b_lines.len(),
        }
    }

    pub fn space(&self, l_max: usize) -> OutputSpace {
        OutputSpace::new(self.li_a, self.li_b, l_max)
    }
}

/// Maps resolution lines to combined indices, preferring A on lines
/// present in both sides.
pub fn map_target_refs<S: AsRef<str>>(
    a_lines: &[S],
    b_lines: &[S],
    r_lines: &[S],
) -> Result<Vec<usize>, NeuralError> {
    let li_a = a_lines.len();
    r_lines
        .iter()
        .map(|r| {
            let r = r.as_ref();
            if let Some(i) = a_lines.iter().position(|l| l.as_ref() == r) {
                Ok(i + 1)
            } else if let Some(i) = b_lines.iter().position(|l| l.as_ref() == r) {
                Ok(li_a + i + 1)
            } else {
                Err(NeuralError::UnmappableTarget {
                    line: String::from(r),
                })
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NeuralError {
    UnmappableTarget { line: String },
    NonFiniteGradient,
}

impl core::fmt::Display for NeuralError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            NeuralError::UnmappableTarget { line } => {
                write!(f, "resolution line {line:?} occurs in neither A nor B")
            }
            NeuralError::NonFiniteGradient => write!(f, "non-finite gradient"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GruWeights {
    pub wz: Matrix,
    pub wr: Matrix,
    pub wn: Matrix,
    pub uz: Matrix,
    pub ur: Matrix,
    pub un: Matrix,
    pub bz: Matrix,
    pub br: Matrix,
    pub bn: Matrix,
}

impl GruWeights {
    fn init(input: usize, hidden: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        Self {
            wz: Matrix::uniform(hidden, input, scale, rng),
            wr: Matrix::uniform(hidden, input, scale, rng),
            wn: Matrix::uniform(hidden, input, scale, rng),
            uz: Matrix::uniform(hidden, hidden, scale, rng),
            ur: Matrix::uniform(hidden, hidden, scale, rng),
            un: Matrix::uniform(hidden, hidden, scale, rng),
            bz: Matrix::zeros(hidden, 1),
            br: Matrix::zeros(hidden, 1),
            bn: Matrix::zeros(hidden, 1),
        }
    }

    fn visit(&self) -> [&Matrix; 9] {
        [
            &self.wz, &self.wr, &self.wn, &self.uz, &self.ur, &self.un, &self.bz, &self.br,
            &self.bn,
        ]
    }

    fn visit_mut(&mut self) -> [&mut Matrix; 9] {
        [
            &mut self.wz,
            &mut self.wr,
            &mut self.wn,
            &mut self.uz,
            &mut self.ur,
            &mut self.un,
            &mut self.bz,
            &mut self.br,
            &mut self.bn,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    pub hidden: usize,
    pub l_max: usize,
    pub vocab_size: usize,
    pub mode: ReprMode,
}

/// All learnable parameters, including the Merge2Matrix tables.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub token_embed: Matrix, // D × |V|
    pub edit_embed: Matrix,  // D × 6
    pub theta: Matrix,       // (s+1) × 1; zero-height for non-linearized modes
    pub enc_fwd: GruWeights, // input D, hidden H
    pub enc_bwd: GruWeights,
    pub dec: GruWeights, // input D + 2H, hidden 2H
    pub w_init: Matrix,  // 2H × 2H
    pub b_init: Matrix,  // 2H × 1
    pub out_embed: Matrix, // D × (2·L_max + 2); column 0 is START
    pub w_out: Matrix,   // (2·L_max + 1) × 2H
    pub b_out: Matrix,   // (2·L_max + 1) × 1
}

impl ModelParams {
    pub fn init(config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.dim;
        let h = config.hidden;
        let scale = 0.2;
        let theta_len = config.mode.theta_len();
        Self {
            config,
            token_embed: Matrix::uniform(d, config.vocab_size, scale, &mut rng),
            edit_embed: Matrix::uniform(d, align::NUM_EDIT_SYMBOLS, scale, &mut rng),
            theta: Matrix::uniform(theta_len, 1, scale, &mut rng),
            enc_fwd: GruWeights::init(d, h, scale, &mut rng),
            enc_bwd: GruWeights::init(d, h, scale, &mut rng),
            dec: GruWeights::init(d + 2 * h, 2 * h, scale, &mut rng),
            w_init: Matrix::uniform(2 * h, 2 * h, scale, &mut rng),
            b_init: Matrix::zeros(2 * h, 1),
            out_embed: Matrix::uniform(d, 2 * config.l_max + 2, scale, &mut rng),
            w_out: Matrix::uniform(2 * config.l_max + 1, 2 * h, scale, &mut rng),
            b_out: Matrix::zeros(2 * config.l_max + 1, 1),
        }
    }

    /// Every parameter matrix in a fixed order shared with `Gradients`.
    pub fn visit(&self) -> Vec<(&'static str, &Matrix)> {
        let gru_names = |prefix: &'static str| -> [&'static str; 9] {
            match prefix {
                "enc_fwd" => [
                    "enc_fwd.wz",
                    "enc_fwd.wr",
                    "enc_fwd.wn",
                    "enc_fwd.uz",
                    "enc_fwd.ur",
                    "enc_fwd.un",
                    "enc_fwd.bz",
                    "enc_fwd.br",
                    "enc_fwd.bn",
                ],
                "enc_bwd" => [
                    "enc_bwd.wz",
                    "enc_bwd.wr",
                    "enc_bwd.wn",
                    "enc_bwd.uz",
                    "enc_bwd.ur",
                    "enc_bwd.un",
                    "enc_bwd.bz",
                    "enc_bwd.br",
                    "enc_bwd.bn",
                ],
                _ => [
                    "dec.wz", "dec.wr", "dec.wn", "dec.uz", "dec.ur", "dec.un", "dec.bz",
                    "dec.br", "dec.bn",
                ],
            }
        };
        let mut out = vec![
            ("token_embed", &self.token_embed),
            ("edit_embed", &self.edit_embed),
            ("theta", &self.theta),
        ];
        for (prefix, gru) in [
            ("enc_fwd", &self.enc_fwd),
            ("enc_bwd", &self.enc_bwd),
            ("dec", &self.dec),
        ] {
            out.extend(gru_names(prefix).into_iter().zip(gru.visit()));
        }
        out.extend([
            ("w_init", &self.w_init),
            ("b_init", &self.b_init),
            ("out_embed", &self.out_embed),
            ("w_out", &self.w_out),
            ("b_out", &self.b_out),
        ]);
        out
    }

    pub fn visit_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = vec![
            &mut self.token_embed,
            &mut self.edit_embed,
            &mut self.theta,
        ];
        out.extend(self.enc_fwd.visit_mut());
        out.extend(self.enc_bwd.visit_mut());
        out.extend(self.dec.visit_mut());
        out.extend([
            &mut self.w_init,
            &mut self.b_init,
            &mut self.out_embed,
            &mut self.w_out,
            &mut self.b_out,
        ]);
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.visit().iter().map(|(_, m)| m.len()).sum()
    }
}

/// Gradients aligned with `ModelParams::visit` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub mats: Vec<Matrix>,
}

impl Gradients {
    pub fn zeros_like(p: &ModelParams) -> Self {
        Self {
            mats: p
                .visit()
                .into_iter()
                .map(|(_, m)| Matrix::zeros(m.rows(), m.cols()))
                .collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for m in &mut self.mats {
            for x in m.data_mut() {
                *x *= s;
            }
        }
    }
}

/// Parameter leaves registered on a tape, in `visit` order.
struct Leaves {
    all: Vec<NodeId>,
}

struct GruIds {
    wz: NodeId,
    wr: NodeId,
    wn: NodeId,
    uz: NodeId,
    ur: NodeId,
    un: NodeId,
    bz: NodeId,
    br: NodeId,
    bn: NodeId,
}

impl Leaves {
    // Offsets into `all`, mirroring ModelParams::visit order.
    const TOKEN_EMBED: usize = 0;
    const EDIT_EMBED: usize = 1;
    const THETA: usize = 2;
    const ENC_FWD: usize = 3;
    const ENC_BWD: usize = 12;
    const DEC: usize = 21;
    const W_INIT: usize = 30;
    const B_INIT: usize = 31;
    const OUT_EMBED: usize = 32;
    const W_OUT: usize = 33;
    const B_OUT: usize = 34;

    fn gru(&self, base: usize) -> GruIds {
        GruIds {
            wz: self.all[base],
            wr: self.all[base + 1],
            wn: self.all[base + 2],
            uz: self.all[base + 3],
            ur: self.all[base + 4],
            un: self.all[base + 5],
            bz: self.all[base + 6],
            br: self.all[base + 7],
            bn: self.all[base + 8],
        }
    }
}

/// One forward-graph construction context over a tape.
pub struct Graph<'p> {
    tape: Tape,
    params: &'p ModelParams,
    leaves: Leaves,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ModelParams) -> Self {
        let mut tape = Tape::new();
        let all = params
            .visit()
            .into_iter()
            .map(|(_, m)| tape.leaf(m.clone()))
            .collect();
        Self {
            tape,
            params,
            leaves: Leaves { all },
        }
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        self.tape.value(id)
    }

    fn gru_cell(&mut self, w: &GruIds, x: NodeId, h: NodeId) -> NodeId {
        let t = &mut self.tape;
        let zx = t.matmul(w.wz, x);
        let zh = t.matmul(w.uz, h);
        let z0 = t.add(zx, zh);
        let z1 = t.add(z0, w.bz);
        let z = t.sigmoid(z1);

        let rx = t.matmul(w.wr, x);
        let rh = t.matmul(w.ur, h);
        let r0 = t.add(rx, rh);
        let r1 = t.add(r0, w.br);
        let r = t.sigmoid(r1);

        let gated = t.hadamard(r, h);
        let nx = t.matmul(w.wn, x);
        let nh = t.matmul(w.un, gated);
        let n0 = t.add(nx, nh);
        let n1 = t.add(n0, w.bn);
        let n = t.tanh(n1);

        let keep = t.hadamard(z, h);
        let omz = t.one_minus(z);
        let fresh = t.hadamard(omz, n);
        t.add(keep, fresh)
    }

    /// Builds the Merge2Matrix input for the configured representation.
    pub fn input(&mut self, tuple: &EncodedTuple) -> NodeId {
        let mode = self.params.config.mode;
        let token = self.leaves.all[Leaves::TOKEN_EMBED];
        let edit = self.leaves.all[Leaves::EDIT_EMBED];
        let theta = self.leaves.all[Leaves::THETA];
        let as_idx = |ts: &[TokenId]| -> Vec<usize> { ts.iter().map(|&t| t as usize).collect() };
        match mode {
            ReprMode::Naive | ReprMode::Linearized => {
                let l_max = tuple.a.len().max(tuple.b.len()).max(tuple.o.len());
                let pad = |ts: &[TokenId]| {
                    let mut v = as_idx(ts);
                    v.resize(l_max, crate::tokenizer::PAD as usize);
                    v
                };
                let (pa, pb, po) = (pad(&tuple.a), pad(&tuple.b), pad(&tuple.o));
                if mode == ReprMode::Naive {
                    let mut all = pa;
                    all.extend(pb);
                    all.extend(po);
                    self.tape.gather_cols(token, &all)
                } else {
                    let ea = self.tape.gather_cols(token, &pa);
                    let eb = self.tape.gather_cols(token, &pb);
                    let eo = self.tape.gather_cols(token, &po);
                    let sa = self.tape.scale_entry(ea, theta, 0);
                    let sb = self.tape.scale_entry(eb, theta, 1);
                    let so = self.tape.scale_entry(eo, theta, 2);
                    let d = self.params.config.dim;
                    let bias = self.tape.broadcast_entry(theta, 3, d, l_max);
                    let s0 = self.tape.add(sa, sb);
                    let s1 = self.tape.add(s0, so);
                    self.tape.add(s1, bias)
                }
            }
            ReprMode::AlignedNaive | ReprMode::AlignedLinearized => {
                let (ao, bo) = align::align_merge(&tuple.a, &tuple.b, &tuple.o);
                let dao: Vec<usize> = ao.delta.symbols.iter().map(|s| s.index()).collect();
                let dbo: Vec<usize> = bo.delta.symbols.iter().map(|s| s.index()).collect();
                if mode == ReprMode::AlignedNaive {
                    let mut all = dao;
                    all.extend(dbo);
                    self.tape.gather_cols(edit, &all)
                } else {
                    let ea = self.tape.gather_cols(edit, &dao);
                    let eb = self.tape.gather_cols(edit, &dbo);
                    let sa = self.tape.scale_entry(ea, theta, 0);
                    let sb = self.tape.scale_entry(eb, theta, 1);
                    let d = self.params.config.dim;
                    let bias = self.tape.broadcast_entry(theta, 2, d, dao.len());
                    let s0 = self.tape.add(sa, sb);
                    self.tape.add(s0, bias)
                }
            }
            ReprMode::Ltre => {
                let (ao, bo) = align::align_merge(&tuple.a, &tuple.b, &tuple.o);
                let dao: Vec<usize> = ao.delta.symbols.iter().map(|s| s.index()).collect();
                let dbo: Vec<usize> = bo.delta.symbols.iter().map(|s| s.index()).collect();
                let e_dao = self.tape.gather_cols(edit, &dao);
                let e_ap = self.tape.gather_cols(token, &as_idx(&ao.variant_padded));
                let e_aop = self.tape.gather_cols(token, &as_idx(&ao.base_padded));
                let e_dbo = self.tape.gather_cols(edit, &dbo);
                let e_bp = self.tape.gather_cols(token, &as_idx(&bo.variant_padded));
                let e_bop = self.tape.gather_cols(token, &as_idx(&bo.base_padded));
                self.tape.hcat(&[e_dao, e_ap, e_aop, e_dbo, e_bp, e_bop])
            }
        }
    }

    /// Bi-GRU encoder: per-position states Z (2H × N) and the summary
    /// z_N = [fwd_N; bwd_1]. Zero-width input yields no Z and a zero z_N.
    pub fn encode(&mut self, x: NodeId) -> (Option<NodeId>, NodeId) {
        let n = self.value(x).cols();
        let h = self.params.config.hidden;
        if n == 0 {
            let z_n = self.tape.leaf(Matrix::zeros(2 * h, 1));
            return (None, z_n);
        }
        let fwd_w = self.leaves.gru(Leaves::ENC_FWD);
        let bwd_w = self.leaves.gru(Leaves::ENC_BWD);
        let cols: Vec<NodeId> = (0..n).map(|j| self.tape.gather_cols(x, &[j])).collect();

        let mut state = self.tape.leaf(Matrix::zeros(h, 1));
        let mut fwd = Vec::with_capacity(n);
        for &c in &cols {
            state = self.gru_cell(&fwd_w, c, state);
            fwd.push(state);
        }
        let mut state = self.tape.leaf(Matrix::zeros(h, 1));
        let mut bwd = vec![0; n];
        for j in (0..n).rev() {
            state = self.gru_cell(&bwd_w, cols[j], state);
            bwd[j] = state;
        }

        let z_cols: Vec<NodeId> = (0..n)
            .map(|j| self.tape.vcat(fwd[j], bwd[j]))
            .collect();
        let z = self.tape.hcat(&z_cols);
        let z_n = self.tape.vcat(fwd[n - 1], bwd[0]);
        (Some(z), z_n)
    }

    /// Decoder initial state: affine map of the encoder summary.
    pub fn decoder_init(&mut self, z_n: NodeId) -> NodeId {
        let w = self.leaves.all[Leaves::W_INIT];
        let b = self.leaves.all[Leaves::B_INIT];
        let wh = self.tape.matmul(w, z_n);
        self.tape.add(wh, b)
    }

    /// One decoder step. `prev` is the previous combined output index, or
    /// None for the reserved START embedding.
    pub fn decode_step(
        &mut self,
        prev: Option<usize>,
        h_prev: NodeId,
        z: Option<NodeId>,
    ) -> (NodeId, NodeId) {
        let out_embed = self.leaves.all[Leaves::OUT_EMBED];
        let col = prev.map_or(0, |p| {
            debug_assert!(p >= 1);
            p
        });
        let e = self.tape.gather_cols(out_embed, &[col]);

        let ctx = match z {
            Some(z) => {
                // Dot-product attention against the previous decoder state.
                let zt = self.tape.transpose(z);
                let scores = self.tape.matmul(zt, h_prev);
                let alpha = self.tape.softmax_col(scores);
                self.tape.matmul(z, alpha)
            }
            None => {
                let h2 = 2 * self.params.config.hidden;
                self.tape.leaf(Matrix::zeros(h2, 1))
            }
        };

        let u = self.tape.vcat(e, ctx);
        let dec_w = self.leaves.gru(Leaves::DEC);
        let h_next = self.gru_cell(&dec_w, u, h_prev);
        let w_out = self.leaves.all[Leaves::W_OUT];
        let b_out = self.leaves.all[Leaves::B_OUT];
        let wh = self.tape.matmul(w_out, h_next);
        let logits = self.tape.add(wh, b_out);
        (logits, h_next)
    }

    /// Teacher-forced negative log-likelihood of `targets` (combined
    /// indices, STOP excluded — it is appended here).
    pub fn loss(&mut self, tuple: &EncodedTuple, targets: &[usize]) -> NodeId {
        let space = tuple.space(self.params.config.l_max);
        debug_assert!(space.fits());
        let mask = space.valid_mask();
        let x = self.input(tuple);
        let (z, z_n) = self.encode(x);
        let mut h = self.decoder_init(z_n);
        let mut prev: Option<usize> = None;
        let mut total: Option<NodeId> = None;
        for step in targets.iter().copied().chain(core::iter::once(0)) {
            let (logits, h_next) = self.decode_step(prev, h, z);
            let nll = self.tape.masked_nll(logits, step, &mask);
            total = Some(match total {
                Some(t) => self.tape.add(t, nll),
                None => nll,
            });
            h = h_next;
            prev = if step == 0 { None } else { Some(step) };
        }
        total.expect("loss always has at least the STOP step")
    }

    /// Gradients of the scalar node `root` with respect to the parameters,
    /// in `visit` order.
    pub fn backward(&self, root: NodeId) -> Gradients {
        let grads = self.tape.backward(root);
        Gradients {
            mats: self.leaves.all.iter().map(|&id| grads[id].clone()).collect(),
        }
    }
}

/// Total teacher-forced loss of one tuple.
pub fn loss(params: &ModelParams, tuple: &EncodedTuple, targets: &[usize]) -> f64 {
    let mut g = Graph::new(params);
    let l = g.loss(tuple, targets);
    g.value(l)[(0, 0)]
}

/// Summed loss and exact gradients over a batch.
pub fn batch_gradients(
    params: &ModelParams,
    batch: &[(&EncodedTuple, &[usize])],
) -> Result<(f64, Gradients), NeuralError> {
    let mut g = Graph::new(params);
    let mut total: Option<NodeId> = None;
    for (tuple, targets) in batch {
        let l = g.loss(tuple, targets);
        total = Some(match total {
            Some(t) => g.tape.add(t, l),
            None => l,
        });
    }
    let root = total.expect("batch must be non-empty");
    let grads = g.backward(root);
    if grads.mats.iter().any(|m| !m.is_finite()) {
        return Err(NeuralError::NonFiniteGradient);
    }
    Ok((g.value(root)[(0, 0)], grads))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Matrix> = params
            .visit()
            .into_iter()
            .map(|(_, m)| Matrix::zeros(m.rows(), m.cols()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// Standard Adam update with bias correction on a single tensor.
pub fn adam_update(
    value: &mut Matrix,
    grad: &Matrix,
    m: &mut Matrix,
    v: &mut Matrix,
    t: u64,
    hyper: &AdamHyper,
) {
    let b1 = hyper.beta1;
    let b2 = hyper.beta2;
    let bc1 = 1.0 - libm::pow(b1, t as f64);
    let bc2 = 1.0 - libm::pow(b2, t as f64);
    for i in 0..value.len() {
        let g = grad.data()[i];
        let mi = b1 * m.data()[i] + (1.0 - b1) * g;
        let vi = b2 * v.data()[i] + (1.0 - b2) * g * g;
        m.data_mut()[i] = mi;
        v.data_mut()[i] = vi;
        let m_hat = mi / bc1;
        let v_hat = vi / bc2;
        value.data_mut()[i] -= hyper.lr * m_hat / (libm::sqrt(v_hat) + hyper.eps);
    }
}

pub fn adam_step(
    params: &mut ModelParams,
    grads: &Gradients,
    state: &mut AdamState,
    hyper: &AdamHyper,
) {
    state.t += 1;
    let t = state.t;
    for (((p, g), m), v) in params
        .visit_mut()
        .into_iter()
        .zip(&grads.mats)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        adam_update(p, g, m, v, t, hyper);
    }
}

/// A decoded hypothesis: combined indices (without STOP), total
/// log-probability, and whether it ended on STOP.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub refs: Vec<usize>,
    pub score: f64,
    pub stopped: bool,
}

fn rank_key(h: &Hypothesis) -> (f64, usize, bool, Vec<usize>) {
    // Ordering: score desc, earlier stop (shorter) first, lexicographic
    // refs, explicit STOP before truncation.
    (-h.score, h.refs.len(), !h.stopped, h.refs.clone())
}

fn hyp_cmp(a: &Hypothesis, b: &Hypothesis) -> core::cmp::Ordering {
    let (ka, kb) = (rank_key(a), rank_key(b));
    ka.0.partial_cmp(&kb.0)
        .unwrap_or(core::cmp::Ordering::Equal)
        .then(ka.1.cmp(&kb.1))
        .then(ka.2.cmp(&kb.2))
        .then(ka.3.cmp(&kb.3))
}

/// Length-bounded beam search over the line-copy space. Returns up to `k`
/// hypotheses, best first; score is the sum of step log-probabilities
/// (including STOP when emitted).
pub fn beam_search(
    params: &ModelParams,
    tuple: &EncodedTuple,
    k: usize,
    max_len: usize,
) -> Vec<Hypothesis> {
    assert!(k >= 1);
    let space = tuple.space(params.config.l_max);
    assert!(space.fits(), "tuple exceeds L_max; caller must pre-check");
    let mask = space.valid_mask();

    let mut g = Graph::new(params);
    let x = g.input(tuple);
    let (z, z_n) = g.encode(x);
    let h0 = g.decoder_init(z_n);

    struct Live {
        refs: Vec<usize>,
        score: f64,
        h: NodeId,
        prev: Option<usize>,
    }

    let mut live = vec![Live {
        refs: Vec::new(),
        score: 0.0,
        h: h0,
        prev: None,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();

    for _ in 0..max_len {
        let mut next: Vec<Live> = Vec::new();
        for item in live {
            let (logits, h_next) = g.decode_step(item.prev, item.h, z);
            let probs = masked_softmax(g.value(logits), &mask);
            for (idx, (&p, &ok)) in probs.iter().zip(&mask).enumerate() {
                if !ok {
                    continue;
                }
                let lp = libm::log(p.max(f64::MIN_POSITIVE));
                if idx == 0 {
                    finished.push(Hypothesis {
                        refs: item.refs.clone(),
                        score: item.score + lp,
                        stopped: true,
                    });
                } else {
                    let mut refs = item.refs.clone();
                    refs.push(idx);
                    next.push(Live {
                        refs,
                        score: item.score + lp,
                        h: h_next,
                        prev: Some(idx),
                    });
                }
            }
        }
        next.sort_by(|a, b| {
            a.score
                .partial_cmp(&b.score)
                .unwrap_or(core::cmp::Ordering::Equal)
                .reverse()
                .then(a.refs.cmp(&b.refs))
        });
        next.truncate(k);
        live = next;
        if live.is_empty() {
            break;
        }
    }
    // Hypotheses that hit the length bound end without a STOP term.
    for item in live {
        finished.push(Hypothesis {
            refs: item.refs,
            score: item.score,
            stopped: false,
        });
    }
    finished.sort_by(hyp_cmp);
    finished.truncate(k);
    finished
}

/// Greedy top-1 decode; equals beam_search with k = 1.
pub fn greedy_decode(params: &ModelParams, tuple: &EncodedTuple, max_len: usize) -> Hypothesis {
    beam_search(params, tuple, 1, max_len)
        .into_iter()
        .next()
        .expect("beam always returns at least one hypothesis")
}

/// Human-readable form of a combined-index sequence.
pub fn format_refs(space: &OutputSpace, refs: &[usize], stopped: bool) -> String {
    let mut out = String::new();
    for (n, &i) in refs.iter().enumerate() {
        if n > 0 {
            out.push_str(", ");
        }
        match space.to_ref(i) {
            LineRef::Line { index, side } => {
                let side = match side {
                    Side::A => 'A',
                    Side::B => 'B',
                };
                out.push_str(&format!("<{index},{side}>"));
            }
            LineRef::Stop => out.push_str("<stop>"),
        }
    }
    if stopped {
        if !refs.is_empty() {
            out.push_str(", ");
        }
        out.push_str("<stop>");
    }
    out
}
