//! Mines local git repositories for merge-conflict/resolution pairs by
//! replaying each two-parent merge commit's files through the three-way
//! merger and keeping files whose regeneration conflicts.

use std::path::Path;
use std::process::Command;

use remerge_core::localize::{self, MergeTuple, Provenance};
use remerge_core::textmerge::{self, TextDocument};

/// Minified-file guard. Files exceeding either bound are skipped.
#[derive(Debug, Clone, Copy)]
pub struct MiningLimits {
    pub max_line_len: usize,
    pub max_file_bytes: usize,
}

impl Default for MiningLimits {
    fn default() -> Self {
        Self {
            max_line_len: 1000,
            max_file_bytes: 1 << 20,
        }
    }
}

/// One conflicted file (regenerated markers) with its committed resolution.
#[derive(Debug, Clone)]
pub struct ConflictPair {
    pub conflict_text: String,
    pub resolved_text: String,
    pub provenance: Provenance,
}

/// Per-run accounting; per-file failures are counted, never fatal.
#[derive(Debug, Clone, Copy, Default)]
pub struct MiningStats {
    pub merge_commits: usize,
    pub octopus_skipped: usize,
    pub files_considered: usize,
    pub files_skipped_limits: usize,
    pub files_conflicting: usize,
}

fn git(repo: &Path, args: &[&str]) -> Option<Vec<u8>> {
    let out = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(args)
        .output()
        .ok()?;
    out.status.success().then_some(out.stdout)
}

fn git_text(repo: &Path, args: &[&str]) -> Option<String> {
    String::from_utf8(git(repo, args)?).ok()
}

fn blob(repo: &Path, rev: &str, path: &str, limits: &MiningLimits) -> Option<Result<String, ()>> {
    let bytes = git(repo, &["show", &format!("{rev}:{path}")])?;
    if bytes.len() > limits.max_file_bytes {
        return Some(Err(()));
    }
    let text = String::from_utf8(bytes).ok()?;
    if text.split('\n').any(|l| l.len() > limits.max_line_len) {
        return Some(Err(()));
    }
    Some(Ok(text))
}

/// Walks every two-parent merge commit reachable from HEAD, re-merges each
/// file that differs between the parents, and emits a pair for every file
/// whose regenerated merge has at least one conflict and whose committed
/// resolution exists.
pub fn mine_repository(
    repo: &Path,
    limits: &MiningLimits,
) -> anyhow::Result<(Vec<ConflictPair>, MiningStats)> {
    let log = git_text(repo, &["rev-list", "--merges", "--parents", "HEAD"])
        .ok_or_else(|| anyhow::anyhow!("{}: not a readable git repository", repo.display()))?;
    let repo_name = repo.display().to_string();
    let mut pairs = Vec::new();
    let mut stats = MiningStats::default();

    for line in log.lines() {
        let shas: Vec<&str> = line.split_whitespace().collect();
        // rev-list emits "commit parent1 parent2 [parent3 ...]".
        let [commit, p1, p2] = shas[..] else {
            if shas.len() > 3 {
                stats.octopus_skipped += 1;
            }
            continue;
        };
        stats.merge_commits += 1;
        let Some(base) = git_text(repo, &["merge-base", p1, p2]) else {
            continue;
        };
        let base = base.trim();
        if base.is_empty() {
            continue;
        }
        let Some(changed) = git_text(repo, &["diff", "--name-only", p1, p2]) else {
            continue;
        };
        for path in changed.lines().filter(|p| !p.is_empty()) {
            stats.files_considered += 1;
            // The file must exist in all four versions; a side that deletes
            // or adds the file is outside the three-way formulation.
            let versions: Option<Vec<_>> = [p1, base, p2, commit]
                .iter()
                .map(|rev| blob(repo, rev, path, limits))
                .collect();
            let Some(versions) = versions else {
                continue;
            };
            let versions: Result<Vec<String>, ()> = versions.into_iter().collect();
            let Ok(versions) = versions else {
                stats.files_skipped_limits += 1;
                continue;
            };
            let [a, o, b, m]: [String; 4] = versions.try_into().unwrap();
            let merged = textmerge::diff3_merge(
                &TextDocument::parse(&a),
                &TextDocument::parse(&o),
                &TextDocument::parse(&b),
            );
            if merged.is_clean() {
                continue;
            }
            stats.files_conflicting += 1;
            pairs.push(ConflictPair {
                conflict_text: textmerge::serialize(&merged),
                resolved_text: m,
                provenance: Provenance {
                    repository: repo_name.clone(),
                    commit: commit.to_string(),
                    file_path: path.to_string(),
                },
            });
        }
    }
    Ok((pairs, stats))
}

/// Why a conflict region produced no tuple.
#[derive(Debug, Clone, Copy, Default)]
pub struct FilterCounts {
    pub regions: usize,
    pub kept: usize,
    pub ambiguous: usize,
    pub trivial: usize,
    pub new_code: usize,
}

/// Runs localization over one pair, classifying each rejected region.
pub fn localize_pair(pair: &ConflictPair) -> (Vec<MergeTuple>, FilterCounts) {
    let mut counts = FilterCounts::default();
    let Ok(doc) = textmerge::parse_conflicts(&pair.conflict_text) else {
        return (Vec::new(), counts); // regenerated text always parses; defensive only
    };
    let kept = localize::localize_merge_tuples(
        &pair.conflict_text,
        &pair.resolved_text,
        &pair.provenance,
    )
    .unwrap_or_default();
    counts.kept = kept.len();
    for (i, region) in doc.conflicts().enumerate() {
        counts.regions += 1;
        if kept.iter().any(|t| t.conflict_index == i) {
            continue;
        }
        match localize::localize_res_region_parsed(&doc, &pair.resolved_text, i) {
            None => counts.ambiguous += 1,
            Some(r) if r == region.a_lines || r == region.b_lines || r == region.o_lines => {
                counts.trivial += 1
            }
            Some(_) => counts.new_code += 1,
        }
    }
    (kept, counts)
}

/// Localizes every pair, in parallel over up to `threads` workers.
pub fn localize_pairs(pairs: &[ConflictPair], threads: usize) -> (Vec<MergeTuple>, FilterCounts) {
    let per_pair = crate::par::parallel_map(pairs, threads, localize_pair);
    let mut tuples = Vec::new();
    let mut counts = FilterCounts::default();
    for (kept, c) in per_pair {
        tuples.extend(kept);
        counts.regions += c.regions;
        counts.kept += c.kept;
        counts.ambiguous += c.ambiguous;
        counts.trivial += c.trivial;
        counts.new_code += c.new_code;
    }
    (tuples, counts)
}
