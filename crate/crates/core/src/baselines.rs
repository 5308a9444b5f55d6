//! ScanMerge: a sampling heuristic baseline. Candidates are
//! order-preserving interleavings containing every line of A and every
//! line of B, filtered by a pluggable validity predicate.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic, total check over a candidate's lines.
pub trait ValidityPredicate {
    fn is_valid(&self, lines: &[String]) -> bool;
}

impl<F: Fn(&[String]) -> bool> ValidityPredicate for F {
    fn is_valid(&self, lines: &[String]) -> bool {
        self(lines)
    }
}

/// Default predicate: (), [], {} must balance and never go negative over
/// the concatenated candidate text. A stand-in for real parsing — the
/// caller can plug in a language-aware checker instead.
pub struct BracketBalance;

impl ValidityPredicate for BracketBalance {
    fn is_valid(&self, lines: &[String]) -> bool {
        let mut depth = [0i64; 3];
        for line in lines {
            for ch in line.chars() {
                let (slot, delta) = match ch {
                    '(' => (0, 1),
                    ')' => (0, -1),
                    '[' => (1, 1),
                    ']' => (1, -1),
                    '{' => (2, 1),
                    '}' => (2, -1),
                    _ => continue,
                };
                depth[slot] += delta;
                if depth[slot] < 0 {
                    return false;
                }
            }
        }
        depth == [0, 0, 0]
    }
}

/// Samples one interleaving uniformly: at each step pick the next A line
/// with probability remaining_a / (remaining_a + remaining_b).
fn sample_interleaving<R: Rng>(a: &[String], b: &[String], rng: &mut R) -> Vec<String> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut ia, mut ib) = (0, 0);
    while ia < a.len() || ib < b.len() {
        let ra = a.len() - ia;
        let rb = b.len() - ib;
        let take_a = rb == 0 || (ra > 0 && rng.gen_range(0..ra + rb) < ra);
        if take_a {
            out.push(a[ia].clone());
            ia += 1;
        } else {
            out.push(b[ib].clone());
            ib += 1;
        }
    }
    out
}

/// Runs `trials` samples and returns up to `k` distinct valid candidates
/// in first-seen order. Lines common to both sides appear once per side —
/// every line of A and of B is included.
pub fn scan_merge<V: ValidityPredicate>(
    a: &[String],
    b: &[String],
    trials: usize,
    seed: u64,
    valid: &V,
    k: usize,
) -> Vec<Vec<String>> {
    assert!(trials >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: Vec<Vec<String>> = Vec::new();
    for _ in 0..trials {
        let cand = sample_interleaving(a, b, &mut rng);
        if seen.len() >= k {
            break;
        }
        if !valid.is_valid(&cand) || seen.contains(&cand) {
            continue;
        }
        seen.push(cand);
    }
    seen.truncate(k);
    seen
}
