//! Two-way sequence diffing shared by the line merger and the token aligner.
//!
//! Implements Myers' O(ND) algorithm with the linear-space middle-snake
//! refinement. The search order is fixed, so the produced edit script is a
//! deterministic function of the inputs.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

/// One hunk of a two-way edit script, as index ranges into the inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiffOp {
    /// `old[a]` equals `new[b]` element for element.
    Equal { a: Range<usize>, b: Range<usize> },
    /// `old[a]` is absent from `new`.
    Delete { a: Range<usize> },
    /// `new[b]` is absent from `old`.
    Insert { b: Range<usize> },
}

/// Furthest-reaching x values per diagonal `k`, with `k` allowed negative.
struct V {
    offset: isize,
    v: Vec<usize>,
}

impl V {
    fn new(max_d: usize) -> Self {
        Self {
            offset: max_d as isize,
            v: vec![0; 2 * max_d + 2],
        }
    }
}

impl core::ops::Index<isize> for V {
    type Output = usize;
    fn index(&self, k: isize) -> &usize {
        &self.v[(k + self.offset) as usize]
    }
}

impl core::ops::IndexMut<isize> for V {
    fn index_mut(&mut self, k: isize) -> &mut usize {
        &mut self.v[(k + self.offset) as usize]
    }
}

struct Snake {
    x_start: usize,
    y_start: usize,
}

fn common_prefix_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    a.iter().zip(b.iter()).take_while(|(x, y)| x == y).count()
}

fn common_suffix_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    a.iter()
        .rev()
        .zip(b.iter().rev())
        .take_while(|(x, y)| x == y)
        .count()
}

fn max_d(n: usize, m: usize) -> usize {
    (n + m + 1) / 2 + 1
}

/// Finds the middle snake of an optimal D-path through the edit graph of
/// `old` vs `new` by running the greedy search from both corners until the
/// frontiers overlap.
fn find_middle_snake<T: Eq>(old: &[T], new: &[T], vf: &mut V, vb: &mut V) -> Snake {
    let n = old.len();
    let m = new.len();
    let delta = n as isize - m as isize;
    let odd = delta & 1 == 1;

    vf[1] = 0;
    vb[1] = 0;

    for d in 0..max_d(n, m) as isize {
        for k in (-d..=d).rev().step_by(2) {
            let mut x = if k == -d || (k != d && vf[k - 1] < vf[k + 1]) {
                vf[k + 1]
            } else {
                vf[k - 1] + 1
            };
            let y = (x as isize - k) as usize;
            let (x0, y0) = (x, y);
            if x < n && y < m {
                x += common_prefix_len(&old[x..], &new[y..]);
            }
            vf[k] = x;
            if odd && (k - delta).abs() <= d - 1 && vf[k] + vb[delta - k] >= n {
                return Snake {
                    x_start: x0,
                    y_start: y0,
                };
            }
        }

        for k in (-d..=d).rev().step_by(2) {
            let mut x = if k == -d || (k != d && vb[k - 1] < vb[k + 1]) {
                vb[k + 1]
            } else {
                vb[k - 1] + 1
            };
            let y = (x as isize - k) as usize;
            let (x0, y0) = (x, y);
            if x < n && y < m {
                x += common_suffix_len(&old[..n - x], &new[..m - y]);
            }
            vb[k] = x;
            if !odd && (k - delta).abs() <= d && vb[k] + vf[delta - k] >= n {
                return Snake {
                    x_start: n - x0,
                    y_start: m - y0,
                };
            }
        }
    }

    unreachable!("middle snake must exist");
}

fn conquer<T: Eq>(
    old: &[T],
    new: &[T],
    off_a: usize,
    off_b: usize,
    vf: &mut V,
    vb: &mut V,
    out: &mut Vec<DiffOp>,
) {
    let prefix = common_prefix_len(old, new);
    if prefix > 0 {
        out.push(DiffOp::Equal {
            a: off_a..off_a + prefix,
            b: off_b..off_b + prefix,
        });
    }
    let old = &old[prefix..];
    let new = &new[prefix..];
    let off_a = off_a + prefix;
    let off_b = off_b + prefix;

    let suffix = common_suffix_len(old, new);
    let old = &old[..old.len() - suffix];
    let new = &new[..new.len() - suffix];

    if old.is_empty() {
        if !new.is_empty() {
            out.push(DiffOp::Insert {
                b: off_b..off_b + new.len(),
            });
        }
    } else if new.is_empty() {
        out.push(DiffOp::Delete {
            a: off_a..off_a + old.len(),
        });
    } else {
        let snake = find_middle_snake(old, new, vf, vb);
        let (old_l, old_r) = old.split_at(snake.x_start);
        let (new_l, new_r) = new.split_at(snake.y_start);
        conquer(old_l, new_l, off_a, off_b, vf, vb, out);
        conquer(
            old_r,
            new_r,
            off_a + snake.x_start,
            off_b + snake.y_start,
            vf,
            vb,
            out,
        );
    }

    if suffix > 0 {
        out.push(DiffOp::Equal {
            a: off_a + old.len()..off_a + old.len() + suffix,
            b: off_b + new.len()..off_b + new.len() + suffix,
        });
    }
}

/// Computes a minimal edit script from `old` to `new`. Adjacent ops of the
/// same kind are coalesced.
pub fn diff<T: Eq>(old: &[T], new: &[T]) -> Vec<DiffOp> {
    let md = max_d(old.len(), new.len());
    let mut vf = V::new(md);
    let mut vb = V::new(md);
    let mut raw = Vec::new();
    conquer(old, new, 0, 0, &mut vf, &mut vb, &mut raw);

    let mut out: Vec<DiffOp> = Vec::with_capacity(raw.len());
    for op in raw {
        match (out.last_mut(), op) {
            (Some(DiffOp::Equal { a, b }), DiffOp::Equal { a: a2, b: b2 }) if a.end == a2.start => {
                a.end = a2.end;
                b.end = b2.end;
            }
            (Some(DiffOp::Delete { a }), DiffOp::Delete { a: a2 }) if a.end == a2.start => {
                a.end = a2.end;
            }
            (Some(DiffOp::Insert { b }), DiffOp::Insert { b: b2 }) if b.end == b2.start => {
                b.end = b2.end;
            }
            (_, op) => out.push(op),
        }
    }
    out
}

/// The matched index pairs `(i, j)` with `old[i] == new[j]`, in order.
pub fn match_pairs<T: Eq>(old: &[T], new: &[T]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for op in diff(old, new) {
        if let DiffOp::Equal { a, b } = op {
            for (i, j) in a.zip(b) {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcs_len_dp<T: Eq>(a: &[T], b: &[T]) -> usize {
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
        dp[0][0]
    }

    fn check_script<T: Eq + Clone + core::fmt::Debug>(old: &[T], new: &[T]) {
        let ops = diff(old, new);
        // Replaying the script over `old` must yield `new`.
        let mut replay = Vec::new();
        let mut ai = 0;
        let mut bi = 0;
        for op in &ops {
            match op {
                DiffOp::Equal { a, b } => {
                    assert_eq!(a.start, ai);
                    assert_eq!(b.start, bi);
                    assert_eq!(&old[a.clone()], &new[b.clone()]);
                    replay.extend_from_slice(&new[b.clone()]);
                    ai = a.end;
                    bi = b.end;
                }
                DiffOp::Delete { a } => {
                    assert_eq!(a.start, ai);
                    ai = a.end;
                }
                DiffOp::Insert { b } => {
                    assert_eq!(b.start, bi);
                    replay.extend_from_slice(&new[b.clone()]);
                    bi = b.end;
                }
            }
        }
        assert_eq!(ai, old.len());
        assert_eq!(bi, new.len());
        assert_eq!(replay, new);
        // The number of matches must equal the true LCS length.
        let matched: usize = ops
            .iter()
            .map(|op| match op {
                DiffOp::Equal { a, .. } => a.len(),
                _ => 0,
            })
            .sum();
        assert_eq!(matched, lcs_len_dp(old, new));
    }

    #[test]
    fn empty_and_identical() {
        check_script::<u8>(&[], &[]);
        check_script(b"abc", &[]);
        check_script(&[], b"abc");
        check_script(b"abc", b"abc");
    }

    #[test]
    fn classic_myers_example() {
        check_script(b"ABCABBA", b"CBABAC");
    }

    #[test]
    fn randomized_scripts_are_minimal() {
        // Small deterministic LCG so the test needs no rng dependency here.
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for _ in 0..300 {
            let la = (next() % 24) as usize;
            let lb = (next() % 24) as usize;
            let a: Vec<u8> = (0..la).map(|_| (next() % 4) as u8).collect();
            let b: Vec<u8> = (0..lb).map(|_| (next() % 4) as u8).collect();
            check_script(&a, &b);
        }
    }

    #[test]
    fn match_pairs_are_increasing() {
        let pairs = match_pairs(b"ABCABBA", b"CBABAC");
        for w in pairs.windows(2) {
            assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1);
        }
    }
}
