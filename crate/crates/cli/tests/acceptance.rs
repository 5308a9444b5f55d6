//! Acceptance suite: ten end-to-end criteria, one pass/fail line each
//! (visible with `--nocapture`). Expected values come from independent
//! oracles (brute force, dynamic programming, exhaustive enumeration,
//! finite differences) or from fixtures checked by hand.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use remerge_cli::checkpoint::{self, Checkpoint};
use remerge_core::align;
use remerge_core::evalharness;
use remerge_core::localize;
use remerge_core::merge2matrix::ReprMode;
use remerge_core::neural::{
    self, masked_softmax, AdamHyper, AdamState, EncodedTuple, Graph, LineRef, ModelConfig,
    ModelParams, OutputSpace, Side,
};
use remerge_core::resolver::{self, ResolveOptions};
use remerge_core::textmerge::{
    self, ConflictRegion, MergeLabels, Segment, TextDocument,
};
use remerge_core::tokenizer::{TokenId, Vocabulary};

fn run(n: u32, name: &str, limit: Duration, body: impl FnOnce() -> Result<(), String>) {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed();
    let timed_out = elapsed > limit;
    let verdict = match &result {
        Ok(Ok(())) if !timed_out => "PASS",
        _ => "FAIL",
    };
    println!("criterion {n:2} ({name}): {verdict} [{elapsed:.2?}]");
    match result {
        Ok(Ok(())) => assert!(
            !timed_out,
            "criterion {n}: exceeded time budget {limit:?} (took {elapsed:.2?})"
        ),
        Ok(Err(msg)) => panic!("criterion {n}: {msg}"),
        Err(cause) => std::panic::resume_unwind(cause),
    }
}

fn lines(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

// ---------------------------------------------------------------- 1: diff3

#[test]
fn criterion_01_diff3_fidelity() {
    run(1, "diff3 fidelity", Duration::from_secs(1), || {
        // A clean interleaving: both sides extend the same base.
        let a = TextDocument::parse("x = 1;\ny = 42;\n");
        let o = TextDocument::parse("y = 42;\n");
        let b = TextDocument::parse("y = 42;\nz = 43;\n");
        let merged = textmerge::diff3_merge(&a, &o, &b);
        let clean = merged
            .into_clean()
            .ok_or("expected a clean merge")?
            .serialize();
        if clean != "x = 1;\ny = 42;\nz = 43;\n" {
            return Err(format!("clean merge mismatch: {clean:?}"));
        }

        // The same sides with B's addition moved first: a true overlap.
        let b2 = TextDocument::parse("z = 43;\ny = 42;\n");
        let labels = MergeLabels {
            a: "a.js".into(),
            o: "base.js".into(),
            b: "b.js".into(),
        };
        let conflicted = textmerge::diff3_merge_with_labels(&a, &o, &b2, &labels);
        let text = textmerge::serialize(&conflicted);
        let expect = "<<<<<<< a.js\nx = 1;\n||||||| base.js\n=======\nz = 43;\n>>>>>>> b.js\ny = 42;\n";
        if text != expect {
            return Err(format!("conflict serialization mismatch:\n{text}"));
        }
        Ok(())
    });
}

// ------------------------------------------------- 2: minimal unique prefix

/// Brute force oracle: smallest non-empty prefix of `x` with exactly one
/// occurrence in `y`; its start position, or -1.
fn mup_oracle(x: &[u8], y: &[u8]) -> isize {
    for k in 1..=x.len() {
        let p = &x[..k];
        let hits: Vec<usize> = if k > y.len() {
            Vec::new()
        } else {
            (0..=y.len() - k).filter(|&i| &y[i..i + k] == p).collect()
        };
        match hits.len() {
            0 => return -1,
            1 => return hits[0] as isize,
            _ => {}
        }
    }
    -1
}

#[test]
fn criterion_02_minimal_unique_prefix() {
    run(2, "minimal unique prefix", Duration::from_secs(5), || {
        if localize::minimal_unique_prefix(b"abc", b"acdabacc") != 3 {
            return Err("mup(\"abc\", \"acdabacc\") != 3".into());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x6d7570);
        for case in 0..1000 {
            let lx = rng.gen_range(0..=8);
            let ly = rng.gen_range(0..=20);
            let x: Vec<u8> = (0..lx).map(|_| rng.gen_range(b'a'..=b'c')).collect();
            let y: Vec<u8> = (0..ly).map(|_| rng.gen_range(b'a'..=b'c')).collect();
            let got = localize::minimal_unique_prefix(&x, &y);
            let want = mup_oracle(&x, &y);
            if got != want {
                return Err(format!(
                    "case {case}: mup({x:?}, {y:?}) = {got}, oracle says {want}"
                ));
            }
        }
        Ok(())
    });
}

// ----------------------------------------------------------- 3: localization

fn mk_conflict(prefix: &[&str], a: &[&str], o: &[&str], b: &[&str], suffix: &[&str]) -> String {
    let mut out = String::new();
    for l in prefix {
        out.push_str(l);
        out.push('\n');
    }
    out.push_str("<<<<<<< a.js\n");
    for l in a {
        out.push_str(l);
        out.push('\n');
    }
    out.push_str("||||||| base.js\n");
    for l in o {
        out.push_str(l);
        out.push('\n');
    }
    out.push_str("=======\n");
    for l in b {
        out.push_str(l);
        out.push('\n');
    }
    out.push_str(">>>>>>> b.js\n");
    for l in suffix {
        out.push_str(l);
        out.push('\n');
    }
    out
}

#[test]
fn criterion_03_localization() {
    run(3, "resolution localization", Duration::from_secs(30), || {
        // Repeated bookend line plus an unrelated prefix edit (var -> let):
        // the file anchors still pin down the single changed region.
        let conflict = mk_conflict(
            &["var time = new Date();", "print_time(time);"],
            &["x = foo();"],
            &[],
            &["x = bar();"],
            &["print_time(time);"],
        );
        let resolved = "let time = new Date();\nprint_time(time);\nbaz();\nprint_time(time);\n";
        let r = localize::localize_res_region(&conflict, resolved, 0)
            .map_err(|e| format!("parse failure: line {}", e.line))?;
        if r != Some(lines(&["baz();"])) {
            return Err(format!("expected [\"baz();\"], got {r:?}"));
        }

        // Filters: verbatim-side and new-code resolutions yield no tuples.
        let simple = mk_conflict(&["p"], &["aa"], &["oo"], &["bb"], &["s"]);
        let prov = localize::Provenance::default();
        for (resolved, why) in [
            ("p\naa\ns\n", "R == A"),
            ("p\nbb\ns\n", "R == B"),
            ("p\noo\ns\n", "R == O"),
            ("p\nqq\ns\n", "R writes new code"),
        ] {
            let tuples = localize::localize_merge_tuples(&simple, resolved, &prov)
                .map_err(|e| format!("parse failure: line {}", e.line))?;
            if !tuples.is_empty() {
                return Err(format!("{why} should be filtered"));
            }
        }

        // Ambiguity: every prefix of the suffix bookend is non-unique.
        let amb = mk_conflict(&[], &["aa"], &[], &["bb"], &["qq"]);
        let r = localize::localize_res_region(&amb, "qq\nzz\nqq\nzz\n", 0).unwrap();
        if r.is_some() {
            return Err("ambiguous fixture must return NIL".into());
        }

        // 200 random fixtures with planted resolutions: localization must
        // recover the plant and region-wise substitution must rebuild the
        // resolved file exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(0x10c);
        for fixture in 0..200 {
            let mut ctx = 0usize;
            let mut fresh = |tag: &str, fixture: usize| {
                ctx += 1;
                format!("{tag}{fixture}_{ctx}();")
            };
            let regions = rng.gen_range(1..=3);
            let mut conflict_text = String::new();
            let mut resolved_text = String::new();
            let mut planted: Vec<Vec<String>> = Vec::new();
            for region in 0..regions {
                for _ in 0..rng.gen_range(1..=3) {
                    let line = fresh("ctx", fixture);
                    conflict_text.push_str(&line);
                    conflict_text.push('\n');
                    resolved_text.push_str(&line);
                    resolved_text.push('\n');
                }
                let a: Vec<String> = (0..rng.gen_range(1..=3))
                    .map(|_| fresh("a", fixture))
                    .collect();
                let o: Vec<String> = (0..rng.gen_range(0..=2))
                    .map(|_| fresh("o", fixture))
                    .collect();
                let b: Vec<String> = (0..rng.gen_range(1..=3))
                    .map(|_| fresh("b", fixture))
                    .collect();
                let pool: Vec<&String> = a.iter().chain(b.iter()).collect();
                let r: Vec<String> = (0..rng.gen_range(1..=pool.len()))
                    .map(|_| pool[rng.gen_range(0..pool.len())].clone())
                    .collect();
                let _ = region;
                conflict_text.push_str("<<<<<<< a.js\n");
                for l in &a {
                    conflict_text.push_str(l);
                    conflict_text.push('\n');
                }
                conflict_text.push_str("||||||| base.js\n");
                for l in &o {
                    conflict_text.push_str(l);
                    conflict_text.push('\n');
                }
                conflict_text.push_str("=======\n");
                for l in &b {
                    conflict_text.push_str(l);
                    conflict_text.push('\n');
                }
                conflict_text.push_str(">>>>>>> b.js\n");
                for l in &r {
                    resolved_text.push_str(l);
                    resolved_text.push('\n');
                }
                planted.push(r);
            }
            let tail = fresh("ctx", fixture);
            conflict_text.push_str(&tail);
            conflict_text.push('\n');
            resolved_text.push_str(&tail);
            resolved_text.push('\n');

            let mut rebuilt = String::new();
            let doc = textmerge::parse_conflicts(&conflict_text).unwrap();
            let mut region = 0usize;
            for seg in &doc.segments {
                match seg {
                    Segment::Plain(ls) => {
                        for l in ls {
                            rebuilt.push_str(l);
                            rebuilt.push('\n');
                        }
                    }
                    Segment::Conflict(_) => {
                        let got = localize::localize_res_region(&conflict_text, &resolved_text, region)
                            .unwrap()
                            .ok_or_else(|| {
                                format!("fixture {fixture} region {region}: localization failed")
                            })?;
                        if got != planted[region] {
                            return Err(format!(
                                "fixture {fixture} region {region}: {got:?} != planted {:?}",
                                planted[region]
                            ));
                        }
                        for l in &got {
                            rebuilt.push_str(l);
                            rebuilt.push('\n');
                        }
                        region += 1;
                    }
                }
            }
            if rebuilt != resolved_text {
                return Err(format!("fixture {fixture}: reconstruction mismatch"));
            }
        }
        Ok(())
    });
}

// ----------------------------------------------------- 4: alignment minimality

/// Unit ins/del, cost-2 replacement: distance = n + m - 2·LCS.
fn edit_distance_dp(a: &[TokenId], b: &[TokenId]) -> usize {
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in (0..a.len()).rev() {
        for j in (0..b.len()).rev() {
            dp[i][j] = if a[i] == b[j] {
                dp[i + 1][j + 1] + 1
            } else {
                dp[i + 1][j].max(dp[i][j + 1])
            };
        }
    }
    a.len() + b.len() - 2 * dp[0][0]
}

#[test]
fn criterion_04_alignment_minimality() {
    run(4, "alignment minimality", Duration::from_secs(30), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xa116);
        for case in 0..500 {
            let lv = rng.gen_range(0..=40);
            let lb = rng.gen_range(0..=40);
            // Mostly ordinary ids, with NEWLINE mixed in to cover NL runs.
            let tok = |rng: &mut ChaCha8Rng| -> TokenId {
                if rng.gen_range(0..8) == 0 {
                    1
                } else {
                    rng.gen_range(3..9)
                }
            };
            let variant: Vec<TokenId> = (0..lv).map(|_| tok(&mut rng)).collect();
            let base: Vec<TokenId> = (0..lb).map(|_| tok(&mut rng)).collect();
            let pair = align::align_two_way(&variant, &base);

            let got = pair.delta.cost();
            let want = edit_distance_dp(&variant, &base);
            if got != want {
                return Err(format!(
                    "case {case}: cost {got} != DP distance {want} for {variant:?} / {base:?}"
                ));
            }
            // Reconstruction: dropping pads recovers both streams intact.
            let unpad = |xs: &[TokenId]| -> Vec<TokenId> {
                xs.iter().copied().filter(|&t| t != 0).collect()
            };
            if unpad(&pair.variant_padded) != variant || unpad(&pair.base_padded) != base {
                return Err(format!("case {case}: padded streams do not reconstruct"));
            }
            if pair.variant_padded.len() != pair.delta.len()
                || pair.base_padded.len() != pair.delta.len()
            {
                return Err(format!("case {case}: stream/edit length mismatch"));
            }
        }
        Ok(())
    });
}

// ------------------------------------------------------------ 5: gradients

fn random_tuple(
    rng: &mut ChaCha8Rng,
    vocab_size: usize,
    max_lines: usize,
) -> (EncodedTuple, Vec<usize>) {
    let stream = |rng: &mut ChaCha8Rng, lines: usize| -> Vec<TokenId> {
        let mut out = Vec::new();
        for i in 0..lines {
            if i > 0 {
                out.push(1); // NEWLINE
            }
            for _ in 0..rng.gen_range(1..=3) {
                out.push(rng.gen_range(3..vocab_size as TokenId));
            }
        }
        out
    };
    let li_a = rng.gen_range(1..=max_lines);
    let li_b = rng.gen_range(1..=max_lines);
    let li_o = rng.gen_range(1..=max_lines);
    let tuple = EncodedTuple {
        a: stream(rng, li_a),
        b: stream(rng, li_b),
        o: stream(rng, li_o),
        li_a,
        li_b,
    };
    let targets: Vec<usize> = (0..rng.gen_range(1..=3))
        .map(|_| rng.gen_range(1..=li_a + li_b))
        .collect();
    (tuple, targets)
}

#[test]
fn criterion_05_gradient_gate() {
    run(5, "gradient gate", Duration::from_secs(60), || {
        let modes = [
            ReprMode::Naive,
            ReprMode::Linearized,
            ReprMode::AlignedNaive,
            ReprMode::AlignedLinearized,
            ReprMode::Ltre,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0x9a4d);
        let step = 1e-4;
        let mut worst = 0.0f64;
        for case in 0..20 {
            let config = ModelConfig {
                dim: 4,
                hidden: 4,
                l_max: 4,
                vocab_size: 16,
                mode: modes[case % modes.len()],
            };
            let mut params = ModelParams::init(config, 1000 + case as u64);
            let (tuple, targets) = random_tuple(&mut rng, 16, 3);
            let (_, grads) = neural::batch_gradients(&params, &[(&tuple, &targets)])
                .map_err(|e| format!("case {case}: {e}"))?;

            let shapes: Vec<usize> = grads.mats.iter().map(|m| m.len()).collect();
            for (mi, len) in shapes.into_iter().enumerate() {
                for ei in 0..len {
                    let nudge = |params: &mut ModelParams, d: f64| {
                        params.visit_mut()[mi].data_mut()[ei] += d;
                    };
                    nudge(&mut params, step);
                    let up = neural::loss(&params, &tuple, &targets);
                    nudge(&mut params, -2.0 * step);
                    let down = neural::loss(&params, &tuple, &targets);
                    nudge(&mut params, step);
                    let fd = (up - down) / (2.0 * step);
                    let g = grads.mats[mi].data()[ei];
                    // Hybrid relative error: absolute below unit scale.
                    let err = (g - fd).abs() / g.abs().max(fd.abs()).max(1.0);
                    worst = worst.max(err);
                    if err > 1e-3 {
                        return Err(format!(
                            "case {case} tensor {mi} entry {ei}: analytic {g}, fd {fd}, err {err}"
                        ));
                    }
                }
            }
        }
        eprintln!("  gradient gate worst relative error: {worst:.3e}");
        Ok(())
    });
}

// ----------------------------------------------------------- 6: beam oracle

#[derive(Debug, Clone)]
struct Scored {
    refs: Vec<usize>,
    score: f64,
    stopped: bool,
}

fn enumerate_paths(params: &ModelParams, tuple: &EncodedTuple, max_len: usize) -> Vec<Scored> {
    let space = tuple.space(params.config.l_max);
    let mask = space.valid_mask();
    let mut g = Graph::new(params);
    let x = g.input(tuple);
    let (z, z_n) = g.encode(x);
    let h0 = g.decoder_init(z_n);

    let mut out = Vec::new();
    // Depth-first replay of every decode path the search could take.
    let mut stack: Vec<(Vec<usize>, f64, neural::NodeId, Option<usize>)> =
        vec![(Vec::new(), 0.0, h0, None)];
    while let Some((refs, score, h, prev)) = stack.pop() {
        let (logits, h_next) = g.decode_step(prev, h, z);
        let probs = masked_softmax(g.value(logits), &mask);
        for (idx, (&p, &ok)) in probs.iter().zip(&mask).enumerate() {
            if !ok {
                continue;
            }
            let lp = p.max(f64::MIN_POSITIVE).ln();
            if idx == 0 {
                out.push(Scored {
                    refs: refs.clone(),
                    score: score + lp,
                    stopped: true,
                });
            } else {
                let mut next = refs.clone();
                next.push(idx);
                if next.len() == max_len {
                    out.push(Scored {
                        refs: next,
                        score: score + lp,
                        stopped: false,
                    });
                } else {
                    stack.push((next, score + lp, h_next, Some(idx)));
                }
            }
        }
    }
    out
}

fn best_scored(mut paths: Vec<Scored>) -> Scored {
    paths.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.refs.len().cmp(&b.refs.len()))
            .then(b.stopped.cmp(&a.stopped))
            .then(a.refs.cmp(&b.refs))
    });
    paths.into_iter().next().unwrap()
}

#[test]
fn criterion_06_beam_oracle() {
    run(6, "beam-search oracle", Duration::from_secs(30), || {
        let modes = [
            ReprMode::Naive,
            ReprMode::Linearized,
            ReprMode::AlignedNaive,
            ReprMode::AlignedLinearized,
            ReprMode::Ltre,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0xbea0);
        for case in 0..100 {
            let config = ModelConfig {
                dim: rng.gen_range(2..=3),
                hidden: 2,
                l_max: 2,
                vocab_size: 8,
                mode: modes[case % modes.len()],
            };
            let params = ModelParams::init(config, 7000 + case as u64);
            let (mut tuple, _) = random_tuple(&mut rng, 8, 2);
            // Keep Li_A + Li_B <= 4 inside the l_max = 2 space.
            debug_assert!(tuple.li_a + tuple.li_b <= 4);
            tuple.o.truncate(3);

            let max_len = 3;
            // Frontier of non-stopped prefixes is at most 4^3 = 64, so
            // k = 128 makes the beam exhaustive and the oracle exact.
            let beam = neural::beam_search(&params, &tuple, 128, max_len);
            let top = beam.first().ok_or("empty beam")?;
            let want = best_scored(enumerate_paths(&params, &tuple, max_len));
            if top.refs != want.refs
                || top.stopped != want.stopped
                || (top.score - want.score).abs() > 1e-9
            {
                return Err(format!(
                    "case {case}: beam {:?}@{} vs oracle {:?}@{}",
                    top.refs, top.score, want.refs, want.score
                ));
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------- 7: overfit + ordering

struct SynthRecord {
    a: Vec<String>,
    b: Vec<String>,
    o: Vec<String>,
    targets: Vec<usize>,
}

fn ident(rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(3..=5);
    (0..len)
        .map(|_| (b'a' + rng.gen_range(0..26u8)) as char)
        .collect::<String>()
        + "();"
}

/// Random tuple whose resolution is an arbitrary point in the line-copy
/// space (identity of the lines carries no signal).
fn synth_random(rng: &mut ChaCha8Rng) -> SynthRecord {
    let li_a = rng.gen_range(1..=3);
    let li_b = rng.gen_range(1..=3);
    let a: Vec<String> = (0..li_a).map(|_| ident(rng)).collect();
    let b: Vec<String> = (0..li_b).map(|_| ident(rng)).collect();
    let o: Vec<String> = (0..rng.gen_range(1..=3)).map(|_| ident(rng)).collect();
    let targets: Vec<usize> = (0..rng.gen_range(1..=3))
        .map(|_| rng.gen_range(1..=li_a + li_b))
        .collect();
    SynthRecord { a, b, o, targets }
}

/// Rule-governed tuple family: one side modifies the base's first line,
/// the other appends a new last line; the resolution keeps the modifier's
/// lines and the appender's new line. Which side did what is visible in
/// the edit sequences but only statistically in the raw text.
fn synth_ruled(rng: &mut ChaCha8Rng) -> SynthRecord {
    let p = ident(rng);
    let q = ident(rng);
    let s = ident(rng);
    let p2 = ident(rng);
    let o = vec![p.clone(), q.clone()];
    if rng.gen_bool(0.5) {
        // A modifies, B appends: R = A1 A2 B3.
        SynthRecord {
            a: vec![p2, q.clone()],
            b: vec![p, q, s],
            o,
            targets: vec![1, 2, 5],
        }
    } else {
        // B modifies, A appends: R = B1 B2 A3.
        SynthRecord {
            a: vec![p, q.clone(), s],
            b: vec![p2, q],
            o,
            targets: vec![4, 5, 3],
        }
    }
}

fn encode_records(records: &[SynthRecord], vocab: &Vocabulary) -> Vec<(EncodedTuple, Vec<usize>)> {
    records
        .iter()
        .map(|r| {
            (
                EncodedTuple::from_lines(&r.a, &r.b, &r.o, vocab),
                r.targets.clone(),
            )
        })
        .collect()
}

fn train_epochs(
    params: &mut ModelParams,
    data: &[(EncodedTuple, Vec<usize>)],
    epochs: usize,
    batch: usize,
    lr: f64,
    seed: u64,
    stop_at_full_top1: bool,
) -> Result<usize, String> {
    use rand::seq::SliceRandom;
    let mut adam = AdamState::new(params);
    let hyper = AdamHyper {
        lr,
        ..AdamHyper::default()
    };
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let refs: Vec<(&EncodedTuple, &[usize])> = chunk
                .iter()
                .map(|&i| (&data[i].0, data[i].1.as_slice()))
                .collect();
            let (_, mut grads) =
                neural::batch_gradients(params, &refs).map_err(|e| format!("epoch {epoch}: {e}"))?;
            grads.scale(1.0 / chunk.len() as f64);
            neural::adam_step(params, &grads, &mut adam, &hyper);
        }
        if stop_at_full_top1 && top1_accuracy(params, data) == 1.0 {
            return Ok(epoch);
        }
    }
    Ok(epochs)
}

fn top1_accuracy(params: &ModelParams, data: &[(EncodedTuple, Vec<usize>)]) -> f64 {
    let correct = data
        .iter()
        .filter(|(t, r)| {
            let hyp = neural::greedy_decode(params, t, neural::DEFAULT_MAX_DECODE);
            hyp.stopped && hyp.refs == *r
        })
        .count();
    correct as f64 / data.len() as f64
}

#[test]
fn criterion_07_overfit_and_mode_ordering() {
    run(7, "overfit + representation ordering", Duration::from_secs(600), || {
        // Part 1: memorize 32 random tuples exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(0x0f17);
        let records: Vec<SynthRecord> = (0..32).map(|_| synth_random(&mut rng)).collect();
        let vocab = Vocabulary::byte_level();
        let data = encode_records(&records, &vocab);
        let config = ModelConfig {
            dim: 64,
            hidden: 64,
            l_max: 3,
            vocab_size: vocab.size(),
            mode: ReprMode::AlignedLinearized,
        };
        let mut params = ModelParams::init(config, 64);
        let epochs = train_epochs(&mut params, &data, 500, 8, 3e-3, 17, true)?;
        let acc = top1_accuracy(&params, &data);
        if acc < 1.0 {
            return Err(format!("top-1 {acc} after {epochs} epochs; expected 1.0 within 500"));
        }
        eprintln!("  overfit reached 100% top-1 at epoch {epochs}");

        // Part 2: on a rule-governed family, the edit-aware linearized
        // representation must beat (or tie) the raw concatenation.
        let mut rng = ChaCha8Rng::seed_from_u64(0x0500);
        let all: Vec<SynthRecord> = (0..500).map(|_| synth_ruled(&mut rng)).collect();
        let (held, train_set) = all.split_at(50);
        let mut accs = Vec::new();
        for mode in [ReprMode::AlignedLinearized, ReprMode::Naive] {
            let config = ModelConfig {
                dim: 32,
                hidden: 32,
                l_max: 3,
                vocab_size: vocab.size(),
                mode,
            };
            let train_data = encode_records(train_set, &vocab);
            let held_data = encode_records(held, &vocab);
            let mut params = ModelParams::init(config, 32);
            train_epochs(&mut params, &train_data, 12, 16, 2e-3, 5, false)?;
            accs.push(top1_accuracy(&params, &held_data));
        }
        eprintln!(
            "  held-out top-1: aligned_linearized {:.2}, naive {:.2}",
            accs[0], accs[1]
        );
        if accs[0] < accs[1] {
            return Err(format!(
                "aligned_linearized {} < naive {} on held-out set",
                accs[0], accs[1]
            ));
        }
        Ok(())
    });
}

// -------------------------------------------------------- 8: resolver fidelity

#[test]
fn criterion_08_resolver_fidelity() {
    run(8, "resolver fidelity", Duration::from_secs(300), || {
        let a = lines(&["let b = x + 5.7", "var y = floor(b)", "console.log(y)"]);
        let o = lines(&["var b = 5.7", "var y = floor(b)"]);
        let b = lines(&["var y = floor(x + 5.7)"]);
        let r = lines(&["var y = floor(x + 5.7)", "console.log(y)"]);
        // R's first line is B line 1, second is A line 3; with li_a = 3 the
        // combined indices are 4 and 3.
        let targets = vec![4usize, 3];

        let vocab = Vocabulary::byte_level();
        let tuple = EncodedTuple::from_lines(&a, &b, &o, &vocab);
        let config = ModelConfig {
            dim: 32,
            hidden: 32,
            l_max: 3,
            vocab_size: vocab.size(),
            mode: ReprMode::AlignedLinearized,
        };
        let mut params = ModelParams::init(config, 8);
        let data = vec![(tuple, targets.clone())];
        train_epochs(&mut params, &data, 300, 1, 3e-3, 9, true)?;
        if top1_accuracy(&params, &data) < 1.0 {
            return Err("failed to overfit the single fixture tuple".into());
        }

        let region = ConflictRegion {
            a_lines: a,
            o_lines: o,
            b_lines: b,
            a_label: "a.js".into(),
            o_label: "base.js".into(),
            b_label: "b.js".into(),
        };
        let opts = ResolveOptions {
            k: 3,
            max_len: neural::DEFAULT_MAX_DECODE,
            threshold: 0.0,
        };
        let candidates = resolver::resolve_region(&region, &params, &vocab, &opts)
            .map_err(|e| format!("resolve failed: {e:?}"))?;
        let top = candidates.first().ok_or("no candidates")?;
        let want_refs = vec![
            LineRef::Line { index: 1, side: Side::B },
            LineRef::Line { index: 3, side: Side::A },
            LineRef::Stop,
        ];
        if top.refs != want_refs {
            return Err(format!("top-1 refs {:?}", top.refs));
        }
        if top.text != r {
            return Err(format!("top-1 text {:?}", top.text));
        }

        // Copy fidelity across a synthetic eval set: every candidate's text
        // is exactly the lines its references name.
        let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
        for case in 0..50 {
            let rec = synth_ruled(&mut rng);
            let region = ConflictRegion {
                a_lines: rec.a,
                o_lines: rec.o,
                b_lines: rec.b,
                a_label: "a".into(),
                o_label: "o".into(),
                b_label: "b".into(),
            };
            let cands = resolver::resolve_region(&region, &params, &vocab, &opts)
                .map_err(|e| format!("case {case}: {e:?}"))?;
            for cand in &cands {
                let mut expect = Vec::new();
                for &lr in &cand.refs {
                    match lr {
                        LineRef::Line { index, side: Side::A } => {
                            expect.push(region.a_lines[index - 1].clone())
                        }
                        LineRef::Line { index, side: Side::B } => {
                            expect.push(region.b_lines[index - 1].clone())
                        }
                        LineRef::Stop => {}
                    }
                }
                if cand.text != expect {
                    return Err(format!("case {case}: copy fidelity violated: {:?}", cand.refs));
                }
            }
        }
        Ok(())
    });
}

// ------------------------------------------------------------ 9: metric suite

#[test]
fn criterion_09_metric_suite() {
    run(9, "metric suite", Duration::from_secs(10), || {
        let tol = 1e-9;
        let close = |a: f64, b: f64| (a - b).abs() <= tol;

        // Top-k over ranks {1, 2, 4, none}: 1/4 at k=1, 2/4 at k=3.
        let sample = |rank: Option<usize>, conf: Option<f64>, sz: usize, concat: bool| {
            evalharness::SampleOutcome {
                gold_rank: rank,
                top1_confidence: conf,
                input_lines: sz,
                concat,
                bleu4: 0.0,
            }
        };
        let ranks = vec![
            sample(Some(1), Some(0.9), 2, false),
            sample(Some(2), Some(0.8), 2, false),
            sample(Some(4), Some(0.7), 2, false),
            sample(None, None, 2, false),
        ];
        if !close(evalharness::topk_accuracy(&ranks, 1), 0.25)
            || !close(evalharness::topk_accuracy(&ranks, 3), 0.5)
        {
            return Err("top-k fixture mismatch".into());
        }

        // Ten-sample sweep fixture, values computed by hand.
        let sweep_fixture: Vec<evalharness::SampleOutcome> = [
            (Some(1), 0.9),
            (Some(2), 0.8),
            (Some(1), 0.7),
            (None, 0.6),
            (Some(1), 0.5),
            (Some(3), 0.4),
            (Some(1), 0.3),
            (Some(2), 0.2),
            (None, 0.1),
        ]
        .iter()
        .map(|&(rank, conf)| sample(rank, Some(conf), 2, false))
        .chain([sample(None, None, 2, false)])
        .collect();
        let grid = [0.0, 0.5, 0.8, 0.95];
        let sweep = evalharness::threshold_sweep(&sweep_fixture, &grid);
        let expect = [
            // (precision, recall, f1, issued, defined)
            (4.0 / 9.0, 0.4, 8.0 / 19.0, 9, true),
            (3.0 / 5.0, 0.3, 2.0 / 5.0, 5, true),
            (1.0 / 2.0, 0.1, 1.0 / 6.0, 2, true),
            (1.0, 0.0, 0.0, 0, false),
        ];
        for (p, e) in sweep.iter().zip(expect) {
            if !close(p.precision, e.0)
                || !close(p.recall, e.1)
                || !close(p.f1, e.2)
                || p.issued != e.3
                || p.precision_defined != e.4
            {
                return Err(format!("sweep point at t={} mismatch: {p:?}", p.threshold));
            }
            // Counting identity at every threshold.
            if !close(
                p.precision * p.issued as f64,
                p.recall * sweep_fixture.len() as f64,
            ) && e.4
            {
                return Err("precision·issued != recall·total".into());
            }
        }
        for pair in sweep.windows(2) {
            if pair[1].recall > pair[0].recall + tol {
                return Err("recall must be non-increasing".into());
            }
        }

        // CONCAT is exactly a++b or b++a.
        let (a, b) = (lines(&["x", "y"]), lines(&["z"]));
        use evalharness::ConcatClass::*;
        let cases = [
            (lines(&["x", "y", "z"]), Concat),
            (lines(&["z", "x", "y"]), Concat),
            (lines(&["x", "z", "y"]), Other),
            (lines(&["x", "y"]), Other),
        ];
        for (r, want) in cases {
            if evalharness::classify_concat(&a, &b, &r) != want {
                return Err(format!("concat classification of {r:?}"));
            }
        }

        // Size bucket boundaries.
        for (size, bucket) in [(1, 0), (3, 0), (4, 1), (5, 1), (6, 2), (7, 2), (8, 3), (10, 3), (11, 4)] {
            if evalharness::size_bucket(size) != bucket {
                return Err(format!("size {size} bucketed wrongly"));
            }
        }
        let bucketed: Vec<evalharness::SampleOutcome> =
            [2, 4, 7, 9, 30].iter().map(|&s| sample(Some(1), Some(0.9), s, false)).collect();
        let stats = evalharness::size_buckets(&bucketed);
        if stats.iter().map(|s| s.count).sum::<usize>() != bucketed.len() {
            return Err("bucket counts must sum to sample count".into());
        }

        // BLEU-4 worked examples.
        let b = |p: &[TokenId], g: &[TokenId]| evalharness::bleu4(p, g);
        if !close(b(&[5, 6, 7, 8], &[5, 6, 7, 8]), 1.0) {
            return Err("identical BLEU != 1".into());
        }
        if !close(b(&[5, 6], &[7, 8]), 0.0) {
            return Err("disjoint BLEU != 0".into());
        }
        // p_n = 4/5, 3/4, 2/3, 1/2 and BP = 1: (0.2)^(1/4).
        if !close(b(&[5, 6, 7, 8, 9], &[5, 6, 7, 8, 3]), 0.2f64.powf(0.25)) {
            return Err("hand-computed BLEU mismatch (0.2^Ľ)".into());
        }
        // p1 = 1/2, smoothed p2 = 1/2, orders 3-4 vacuous, quarter
        // weights throughout: (1/2 · 1/2)^(1/4) = sqrt(1/2).
        if !close(b(&[5, 6], &[5, 7]), 0.5f64.sqrt()) {
            return Err("smoothed BLEU mismatch".into());
        }
        // Perfect unigram but half-length: brevity penalty e^(1-2).
        if !close(b(&[5], &[5, 5]), (-1.0f64).exp()) {
            return Err("brevity-penalty BLEU mismatch".into());
        }
        Ok(())
    });
}

// ------------------------------------------------------------ 10: round trips

fn random_conflict_text(rng: &mut ChaCha8Rng) -> String {
    let terminator = if rng.gen_bool(0.25) { "\r\n" } else { "\n" };
    let mut out = String::new();
    let line = |rng: &mut ChaCha8Rng, out: &mut String| {
        let len = rng.gen_range(0..=6);
        for _ in 0..len {
            out.push((b'a' + rng.gen_range(0..26u8)) as char);
        }
    };
    let segments = rng.gen_range(1..=4);
    for _ in 0..segments {
        if rng.gen_bool(0.5) {
            for _ in 0..rng.gen_range(1..=3) {
                line(rng, &mut out);
                out.push_str(terminator);
            }
        } else {
            out.push_str("<<<<<<< A");
            out.push_str(terminator);
            for _ in 0..rng.gen_range(0..=2) {
                line(rng, &mut out);
                out.push_str(terminator);
            }
            out.push_str("||||||| O");
            out.push_str(terminator);
            for _ in 0..rng.gen_range(0..=2) {
                line(rng, &mut out);
                out.push_str(terminator);
            }
            out.push_str("=======");
            out.push_str(terminator);
            for _ in 0..rng.gen_range(0..=2) {
                line(rng, &mut out);
                out.push_str(terminator);
            }
            out.push_str(">>>>>>> B");
            out.push_str(terminator);
        }
    }
    if rng.gen_bool(0.2) && out.ends_with(terminator) {
        // Drop the final terminator on some plain-tailed files.
        let snap = out.trim_end_matches(terminator).len() + out.len(); // placeholder
        let _ = snap;
        let cut = out.len() - terminator.len();
        if !out[..cut].ends_with('B') {
            out.truncate(cut);
        }
    }
    out
}

#[test]
fn criterion_10_round_trips() {
    run(10, "byte-identical round trips", Duration::from_secs(120), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x107);

        // Conflict documents.
        for case in 0..1000 {
            let text = random_conflict_text(&mut rng);
            let doc = textmerge::parse_conflicts(&text)
                .map_err(|e| format!("case {case}: generated text failed to parse at {}", e.line))?;
            let back = textmerge::serialize(&doc);
            if back != text {
                return Err(format!("case {case}: conflict round trip:\n{text:?}\n{back:?}"));
            }
        }

        // Vocabularies through JSON.
        for case in 0..1000 {
            let corpus: Vec<String> = (0..rng.gen_range(1..=6))
                .map(|_| {
                    (0..rng.gen_range(2..=8))
                        .map(|_| (b'a' + rng.gen_range(0..4u8)) as char)
                        .collect()
                })
                .collect();
            let target = 260 + rng.gen_range(0..=20);
            let vocab = Vocabulary::train(corpus.iter().map(String::as_str), target)
                .map_err(|e| format!("case {case}: train failed: {e:?}"))?;
            let json = serde_json::to_string(&vocab).unwrap();
            let back: Vocabulary = serde_json::from_str(&json).unwrap();
            if back != vocab || serde_json::to_string(&back).unwrap() != json {
                return Err(format!("case {case}: vocabulary round trip"));
            }
        }

        // Model checkpoints.
        let modes = [
            ReprMode::Naive,
            ReprMode::Linearized,
            ReprMode::AlignedNaive,
            ReprMode::AlignedLinearized,
            ReprMode::Ltre,
        ];
        for case in 0..1000u64 {
            let vocab = Vocabulary::byte_level();
            let config = ModelConfig {
                dim: rng.gen_range(1..=3),
                hidden: rng.gen_range(1..=2),
                l_max: rng.gen_range(1..=3),
                vocab_size: vocab.size(),
                mode: modes[case as usize % modes.len()],
            };
            let ckpt = Checkpoint::new(ModelParams::init(config, case), vocab);
            let bytes = checkpoint::to_bytes(&ckpt);
            let back = checkpoint::from_bytes(&bytes)
                .map_err(|e| format!("case {case}: load failed: {e}"))?;
            if back != ckpt || checkpoint::to_bytes(&back) != bytes {
                return Err(format!("case {case}: checkpoint round trip"));
            }
        }
        Ok(())
    });
}

// Kept from the output-space contract: exercised here so the acceptance
// binary compiles the mapping helpers it reasons about in criteria 6-8.
#[test]
fn output_space_ref_mapping_is_inverse() {
    let space = OutputSpace::new(2, 3, 4);
    for i in 0..=5 {
        assert_eq!(space.from_ref(space.to_ref(i)), i);
    }
}
