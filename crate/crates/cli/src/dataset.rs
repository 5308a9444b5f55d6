//! The persisted dataset: one JSON record per line, content-addressed ids,
//! and a seeded hash split that is a pure function of (id, seed).

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use remerge_core::localize::{MergeTuple, Provenance};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "valid" => Some(Split::Valid),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub o: Vec<String>,
    pub r: Vec<String>,
    pub context_prefix: Vec<String>,
    pub context_suffix: Vec<String>,
    pub provenance: Provenance,
    pub split: Split,
}

/// Split fractions, the seed driving assignment, and the resulting counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub fractions: [f64; 3],
    pub seed: u64,
    pub counts: [usize; 3],
}

impl SplitManifest {
    pub fn for_records(records: &[CorpusRecord], seed: u64, fractions: [f64; 3]) -> Self {
        Self {
            fractions,
            seed,
            counts: split_counts(records),
        }
    }
}

/// Content hash of the tuple proper. Lines are length-framed so that
/// ["ab"] and ["a","b"] cannot collide, and the four sections likewise.
pub fn record_id(a: &[String], b: &[String], o: &[String], r: &[String]) -> String {
    let mut h = Sha256::new();
    for section in [a, b, o, r] {
        h.update((section.len() as u64).to_le_bytes());
        for line in section {
            h.update((line.len() as u64).to_le_bytes());
            h.update(line.as_bytes());
        }
    }
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Deterministic split assignment: hash (seed, id) to a point in [0, 1)
/// and cut by the cumulative fractions. Stable under record reordering.
pub fn assign_split(id: &str, seed: u64, fractions: [f64; 3]) -> Split {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    let digest = h.finalize();
    let word = u64::from_le_bytes(digest[..8].try_into().unwrap());
    let point = word as f64 / (u64::MAX as f64 + 1.0);
    let total: f64 = fractions.iter().sum();
    if point < fractions[0] / total {
        Split::Train
    } else if point < (fractions[0] + fractions[1]) / total {
        Split::Valid
    } else {
        Split::Test
    }
}

/// Re-checks the localization filters: the resolution is not verbatim A, B,
/// or O, and introduces no line absent from A ∪ B.
pub fn validate_record(rec: &CorpusRecord) -> Result<(), String> {
    if rec.r == rec.a || rec.r == rec.b || rec.r == rec.o {
        return Err(format!("record {}: trivial resolution", rec.id));
    }
    for line in &rec.r {
        if !rec.a.contains(line) && !rec.b.contains(line) {
            return Err(format!(
                "record {}: resolution line {line:?} occurs in neither A nor B",
                rec.id
            ));
        }
    }
    let expect = record_id(&rec.a, &rec.b, &rec.o, &rec.r);
    if rec.id != expect {
        return Err(format!("record {}: id does not match content", rec.id));
    }
    Ok(())
}

/// Converts localized tuples to records, deduplicating by id in first-seen
/// order and assigning splits by seeded hash.
pub fn build_records(
    tuples: impl IntoIterator<Item = MergeTuple>,
    seed: u64,
    fractions: [f64; 3],
) -> (Vec<CorpusRecord>, usize) {
    let mut seen: HashSet<String> = HashSet::new();
    let mut records = Vec::new();
    let mut duplicates = 0usize;
    for t in tuples {
        let id = record_id(&t.a, &t.b, &t.o, &t.r);
        if !seen.insert(id.clone()) {
            duplicates += 1;
            continue;
        }
        let split = assign_split(&id, seed, fractions);
        records.push(CorpusRecord {
            id,
            a: t.a,
            b: t.b,
            o: t.o,
            r: t.r,
            context_prefix: t.context_prefix,
            context_suffix: t.context_suffix,
            provenance: t.provenance,
            split,
        });
    }
    (records, duplicates)
}

pub fn split_counts(records: &[CorpusRecord]) -> [usize; 3] {
    let mut counts = [0usize; 3];
    for rec in records {
        counts[Split::ALL.iter().position(|s| *s == rec.split).unwrap()] += 1;
    }
    counts
}

pub fn write_jsonl(path: &Path, records: &[CorpusRecord]) -> anyhow::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Loads and re-validates a dataset; any malformed or filtered record is a
/// hard error with its line number.
pub fn read_jsonl(path: &Path) -> anyhow::Result<Vec<CorpusRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    let mut ids: HashSet<String> = HashSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord = serde_json::from_str(&line)
            .map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), n + 1))?;
        validate_record(&rec).map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), n + 1))?;
        if !ids.insert(rec.id.clone()) {
            anyhow::bail!("{}:{}: duplicate record id {}", path.display(), n + 1, rec.id);
        }
        records.push(rec);
    }
    Ok(records)
}

/// Bucket scheme for corpus statistics: total input lines |A| + |B|.
pub const STAT_BUCKET_LABELS: [&str; 5] = ["[0,5]", "[6,10]", "[11,50]", "[51,100]", "100+"];

pub fn stat_bucket(total_lines: usize) -> usize {
    match total_lines {
        0..=5 => 0,
        6..=10 => 1,
        11..=50 => 2,
        51..=100 => 3,
        _ => 4,
    }
}
