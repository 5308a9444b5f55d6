//! `remerge`: corpus extraction, model training, conflict resolution, and
//! evaluation over the merge pipeline.
//!
//! Exit codes: 64 usage error, 65 data error. `resolve` additionally exits
//! 0 when every region was resolved (or none existed), 1 when some remain,
//! 2 when none could be resolved.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use remerge_core::baselines::{self, BracketBalance};
use remerge_core::evalharness;
use remerge_core::merge2matrix::ReprMode;
use remerge_core::neural::DEFAULT_MAX_DECODE;
use remerge_core::resolver::{self, ResolveOptions, ResolutionCandidate};
use remerge_core::textmerge::{self, ConflictRegion};

use remerge_cli::config::{resolve as pick, FileConfig};
use remerge_cli::dataset::{CorpusRecord, Split};
use remerge_cli::{checkpoint, corpus, dataset, evalrun, report, train};

#[derive(Parser)]
#[command(name = "remerge", version, about = "Merge-conflict mining, training, and resolution")]
struct Cli {
    /// key=value config file; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine a git repository into a split JSONL dataset
    Extract {
        #[arg(long)]
        repo: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// train,valid,test fractions, e.g. 0.8,0.1,0.1
        #[arg(long)]
        splits: Option<String>,
        #[arg(long)]
        max_line_len: Option<usize>,
        #[arg(long)]
        max_file_bytes: Option<usize>,
        /// worker threads; 0 = logical cores
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Train a model on a dataset and write the best-validation checkpoint
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// naive | linearized | aligned_naive | aligned_linearized | ltre
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        l_max: Option<usize>,
        #[arg(long)]
        vocab_size: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// per-epoch CSV log
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Resolve the conflicts of a file with a trained model
    Resolve {
        /// defaults to config `model` or $REMERGE_MODEL
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        file: PathBuf,
        /// confirm each candidate on the terminal instead of applying top-1
        #[arg(long)]
        interactive: bool,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        /// write here instead of standard output
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a resolver on a dataset split
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// train | valid | test
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        /// evaluate a baseline instead of the model: scanmerge
        #[arg(long)]
        baseline: Option<String>,
        /// samples per region for scanmerge
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// worker threads; 0 = logical cores
        #[arg(long)]
        threads: Option<usize>,
        /// write the full report as JSON
        #[arg(long)]
        json: Option<PathBuf>,
        /// write the threshold sweep as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sample interleaving candidates for each conflict of a file
    Scanmerge {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Split counts and input-size distribution of a dataset
    Stats {
        #[arg(long)]
        data: PathBuf,
    },
}

enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("remerge: {msg}");
            ExitCode::from(64)
        }
        Err(CliError::Data(e)) => {
            eprintln!("remerge: {e:#}");
            ExitCode::from(65)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let cfg = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Extract {
            repo,
            out,
            seed,
            splits,
            max_line_len,
            max_file_bytes,
            threads,
        } => cmd_extract(&cfg, &repo, &out, seed, splits, max_line_len, max_file_bytes, threads),
        Command::Train {
            data,
            out,
            mode,
            dim,
            hidden,
            l_max,
            vocab_size,
            epochs,
            batch,
            lr,
            seed,
            log,
        } => cmd_train(
            &cfg, &data, &out, mode, dim, hidden, l_max, vocab_size, epochs, batch, lr, seed, log,
        ),
        Command::Resolve {
            model,
            file,
            interactive,
            k,
            threshold,
            output,
        } => cmd_resolve(&cfg, model, &file, interactive, k, threshold, output),
        Command::Eval {
            model,
            data,
            split,
            k,
            baseline,
            trials,
            seed,
            threads,
            json,
            csv,
        } => cmd_eval(&cfg, model, &data, split, k, baseline, trials, seed, threads, json, csv),
        Command::Scanmerge {
            file,
            trials,
            seed,
            k,
        } => cmd_scanmerge(&cfg, &file, trials, seed, k),
        Command::Stats { data } => cmd_stats(&data),
    }
}

fn parse_splits(raw: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("--splits: cannot parse {raw:?}")))?;
    let [train, valid, test] = parts[..] else {
        return Err(usage("--splits: expected three comma-separated fractions"));
    };
    if parts.iter().any(|&f| f < 0.0) || parts.iter().sum::<f64>() <= 0.0 {
        return Err(usage("--splits: fractions must be non-negative with a positive sum"));
    }
    Ok([train, valid, test])
}

fn parse_mode(raw: &str) -> Result<ReprMode, CliError> {
    ReprMode::parse(raw).ok_or_else(|| usage(format!("--mode: unknown representation {raw:?}")))
}

fn bucket_table(sizes: impl Iterator<Item = usize>) -> String {
    let mut counts = [0usize; 5];
    let mut total = 0usize;
    for s in sizes {
        counts[dataset::stat_bucket(s)] += 1;
        total += 1;
    }
    let mut out = String::from("size distribution (|A|+|B| lines)\n");
    for (label, count) in dataset::STAT_BUCKET_LABELS.iter().zip(counts) {
        let pct = if total == 0 {
            0.0
        } else {
            100.0 * count as f64 / total as f64
        };
        out.push_str(&format!("{label:<9} {count:>6}  {pct:6.2}%\n"));
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_extract(
    cfg: &FileConfig,
    repo: &Path,
    out: &Path,
    seed: Option<u64>,
    splits: Option<String>,
    max_line_len: Option<usize>,
    max_file_bytes: Option<usize>,
    threads: Option<usize>,
) -> Result<ExitCode, CliError> {
    let seed = pick(seed, cfg.get_parsed("seed")?, None, 0);
    let splits_raw = pick(
        splits,
        cfg.get("splits").map(String::from),
        None,
        "0.8,0.1,0.1".to_string(),
    );
    let fractions = parse_splits(&splits_raw)?;
    let defaults = corpus::MiningLimits::default();
    let limits = corpus::MiningLimits {
        max_line_len: pick(
            max_line_len,
            cfg.get_parsed("max_line_len")?,
            None,
            defaults.max_line_len,
        ),
        max_file_bytes: pick(
            max_file_bytes,
            cfg.get_parsed("max_file_bytes")?,
            None,
            defaults.max_file_bytes,
        ),
    };
    let threads = pick(threads, cfg.get_parsed("threads")?, None, 0);

    let (pairs, mine_stats) = corpus::mine_repository(repo, &limits)?;
    let (tuples, filter) = corpus::localize_pairs(&pairs, threads);
    let (records, duplicates) = dataset::build_records(tuples, seed, fractions);
    dataset::write_jsonl(out, &records)?;
    let manifest = dataset::SplitManifest::for_records(&records, seed, fractions);
    let manifest_path = out.with_extension("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).unwrap() + "\n")
        .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", manifest_path.display()))?;
    let counts = manifest.counts;

    println!("merge commits       {}", mine_stats.merge_commits);
    println!("octopus skipped     {}", mine_stats.octopus_skipped);
    println!("files considered    {}", mine_stats.files_considered);
    println!("skipped (limits)    {}", mine_stats.files_skipped_limits);
    println!("conflicted files    {}", mine_stats.files_conflicting);
    println!("conflict regions    {}", filter.regions);
    println!("  kept              {}", filter.kept);
    println!("  ambiguous         {}", filter.ambiguous);
    println!("  trivial           {}", filter.trivial);
    println!("  new-code          {}", filter.new_code);
    println!("duplicates removed  {duplicates}");
    println!(
        "records written     {} (train {} / valid {} / test {})",
        records.len(),
        counts[0],
        counts[1],
        counts[2]
    );
    println!();
    print!(
        "{}",
        bucket_table(records.iter().map(|r| r.a.len() + r.b.len()))
    );
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    cfg: &FileConfig,
    data: &Path,
    out: &Path,
    mode: Option<String>,
    dim: Option<usize>,
    hidden: Option<usize>,
    l_max: Option<usize>,
    vocab_size: Option<usize>,
    epochs: Option<usize>,
    batch: Option<usize>,
    lr: Option<f64>,
    seed: Option<u64>,
    log: Option<PathBuf>,
) -> Result<ExitCode, CliError> {
    let mode_raw = pick(
        mode,
        cfg.get("mode").map(String::from),
        None,
        "aligned_linearized".to_string(),
    );
    let settings = train::TrainSettings {
        mode: parse_mode(&mode_raw)?,
        dim: pick(dim, cfg.get_parsed("dim")?, None, 64),
        hidden: pick(hidden, cfg.get_parsed("hidden")?, None, 64),
        l_max: pick(l_max, cfg.get_parsed("l_max")?, None, remerge_core::neural::DEFAULT_L_MAX),
        vocab_size: pick(
            vocab_size,
            cfg.get_parsed("vocab_size")?,
            None,
            remerge_core::tokenizer::DEFAULT_VOCAB_SIZE,
        ),
        epochs: pick(epochs, cfg.get_parsed("epochs")?, None, 50),
        batch: pick(batch, cfg.get_parsed("batch")?, None, 8),
        lr: pick(lr, cfg.get_parsed("lr")?, None, 1e-3),
        seed: pick(seed, cfg.get_parsed("seed")?, None, 0),
    };

    let records = dataset::read_jsonl(data)?;
    let train_recs: Vec<CorpusRecord> = records
        .iter()
        .filter(|r| r.split == Split::Train)
        .cloned()
        .collect();
    let valid_recs: Vec<CorpusRecord> = records
        .iter()
        .filter(|r| r.split == Split::Valid)
        .cloned()
        .collect();

    let outcome = train::train(&train_recs, &valid_recs, &settings)?;
    for row in &outcome.log {
        println!(
            "epoch {:>4}  train_loss {:>10.4}  valid_loss {:>10.4}  valid_top1 {:6.2}%",
            row.epoch,
            row.train_loss,
            row.valid_loss,
            100.0 * row.valid_top1
        );
    }
    if outcome.skipped > 0 {
        eprintln!("remerge: skipped {} oversized or unmappable records", outcome.skipped);
    }
    checkpoint::save(out, &outcome.checkpoint)?;
    if let Some(log_path) = log {
        train::write_log_csv(&log_path, &outcome.log)?;
    }
    println!(
        "saved epoch {} checkpoint to {}",
        outcome.best_epoch,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn model_path(cfg: &FileConfig, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
    flag.or_else(|| cfg.get("model").map(PathBuf::from))
        .or_else(|| std::env::var_os("REMERGE_MODEL").map(PathBuf::from))
        .ok_or_else(|| usage("no model given: pass --model, set config `model`, or $REMERGE_MODEL"))
}

fn interactive_choose(
    region: &ConflictRegion,
    candidates: &[ResolutionCandidate],
) -> Option<usize> {
    let mut err = std::io::stderr();
    let _ = writeln!(err, "conflict:");
    for l in &region.a_lines {
        let _ = writeln!(err, "  A| {l}");
    }
    for l in &region.o_lines {
        let _ = writeln!(err, "  O| {l}");
    }
    for l in &region.b_lines {
        let _ = writeln!(err, "  B| {l}");
    }
    for (i, c) in candidates.iter().enumerate() {
        let _ = writeln!(err, "candidate {} (confidence {:.3}):", i + 1, c.confidence);
        for l in &c.text {
            let _ = writeln!(err, "  {l}");
        }
    }
    loop {
        let _ = write!(err, "apply [1-{}] or (s)kip: ", candidates.len());
        let _ = err.flush();
        let mut line = String::new();
        match std::io::stdin().read_line(&mut line) {
            Ok(0) | Err(_) => return None, // end of input skips the rest
            Ok(_) => {}
        }
        match line.trim() {
            "s" | "q" | "" => return None,
            t => {
                if let Ok(n) = t.parse::<usize>() {
                    if (1..=candidates.len()).contains(&n) {
                        return Some(n - 1);
                    }
                }
            }
        }
    }
}

fn cmd_resolve(
    cfg: &FileConfig,
    model: Option<PathBuf>,
    file: &Path,
    interactive: bool,
    k: Option<usize>,
    threshold: Option<f64>,
    output: Option<PathBuf>,
) -> Result<ExitCode, CliError> {
    let ckpt = checkpoint::load(&model_path(cfg, model)?)?;
    let opts = ResolveOptions {
        k: pick(k, cfg.get_parsed("k")?, None, 3),
        max_len: DEFAULT_MAX_DECODE,
        threshold: pick(threshold, cfg.get_parsed("threshold")?, None, 0.5),
    };
    let text = std::fs::read_to_string(file)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", file.display()))?;
    let doc = textmerge::parse_conflicts(&text).map_err(|e| {
        anyhow::anyhow!("{}: line {}: malformed conflict markers", file.display(), e.line)
    })?;

    let (resolved, rep) = resolver::resolve_file(&doc, &ckpt.params, &ckpt.vocab, &opts, |r, c| {
        if interactive {
            interactive_choose(r, c)
        } else {
            Some(0)
        }
    });
    let rendered = textmerge::serialize(&resolved);
    match output {
        Some(path) => std::fs::write(&path, rendered)
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?,
        None => print!("{rendered}"),
    }
    eprintln!(
        "remerge: resolved {}/{} conflict regions",
        rep.resolved(),
        rep.total()
    );
    Ok(if rep.resolved() == rep.total() {
        ExitCode::SUCCESS
    } else if rep.resolved() > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::from(2)
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    cfg: &FileConfig,
    model: Option<PathBuf>,
    data: &Path,
    split: Option<String>,
    k: Option<usize>,
    baseline: Option<String>,
    trials: Option<usize>,
    seed: Option<u64>,
    threads: Option<usize>,
    json: Option<PathBuf>,
    csv: Option<PathBuf>,
) -> Result<ExitCode, CliError> {
    let split_raw = pick(split, cfg.get("split").map(String::from), None, "test".to_string());
    let split = Split::parse(&split_raw)
        .ok_or_else(|| usage(format!("--split: expected train|valid|test, got {split_raw:?}")))?;
    let resolver = match baseline.as_deref() {
        None => evalrun::Resolver::Model,
        Some("scanmerge") => evalrun::Resolver::ScanMerge {
            trials: pick(trials, cfg.get_parsed("trials")?, None, 100),
            seed: pick(seed, cfg.get_parsed("seed")?, None, 0),
        },
        Some(other) => return Err(usage(format!("--baseline: unknown baseline {other:?}"))),
    };
    let settings = evalrun::EvalSettings {
        k: pick(k, cfg.get_parsed("k")?, None, 3),
        max_len: DEFAULT_MAX_DECODE,
        threads: pick(threads, cfg.get_parsed("threads")?, None, 0),
    };

    let ckpt = match (resolver, model_path(cfg, model)) {
        (_, Ok(path)) => checkpoint::load(&path)?,
        (evalrun::Resolver::ScanMerge { .. }, Err(_)) => {
            // The baseline needs only a tokenizer for BLEU; a model is
            // optional and byte-level tokens are the fallback.
            let vocab = remerge_core::tokenizer::Vocabulary::byte_level();
            let config = remerge_core::neural::ModelConfig {
                dim: 1,
                hidden: 1,
                l_max: remerge_core::neural::DEFAULT_L_MAX,
                vocab_size: vocab.size(),
                mode: ReprMode::Naive,
            };
            checkpoint::Checkpoint::new(remerge_core::neural::ModelParams::init(config, 0), vocab)
        }
        (_, Err(e)) => return Err(e),
    };
    let records: Vec<CorpusRecord> = dataset::read_jsonl(data)?
        .into_iter()
        .filter(|r| r.split == split)
        .collect();
    let outcomes = evalrun::run(&records, &ckpt, resolver, &settings);
    let grid: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
    let rep = evalharness::build_report(&outcomes, &grid);

    print!("{}", report::render_text(&rep));
    if let Some(path) = json {
        report::write_json(&path, &rep)?;
    }
    if let Some(path) = csv {
        report::write_sweep_csv(&path, &rep)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_scanmerge(
    cfg: &FileConfig,
    file: &Path,
    trials: Option<usize>,
    seed: Option<u64>,
    k: Option<usize>,
) -> Result<ExitCode, CliError> {
    let trials = pick(trials, cfg.get_parsed("trials")?, None, 100);
    let seed = pick(seed, cfg.get_parsed("seed")?, None, 0);
    let k = pick(k, cfg.get_parsed("k")?, None, 3);
    let text = std::fs::read_to_string(file)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", file.display()))?;
    let doc = textmerge::parse_conflicts(&text).map_err(|e| {
        anyhow::anyhow!("{}: line {}: malformed conflict markers", file.display(), e.line)
    })?;
    for (i, region) in doc.conflicts().enumerate() {
        let candidates = baselines::scan_merge(
            &region.a_lines,
            &region.b_lines,
            trials,
            seed,
            &BracketBalance,
            k,
        );
        println!("region {} ({} candidates):", i + 1, candidates.len());
        for (j, cand) in candidates.iter().enumerate() {
            println!("  candidate {}:", j + 1);
            for line in cand {
                println!("    {line}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_stats(data: &Path) -> Result<ExitCode, CliError> {
    let records = dataset::read_jsonl(data)?;
    let counts = dataset::split_counts(&records);
    println!("records  {}", records.len());
    for (split, count) in Split::ALL.iter().zip(counts) {
        println!("  {:<6} {count}", split.name());
    }
    println!();
    print!(
        "{}",
        bucket_table(records.iter().map(|r| r.a.len() + r.b.len()))
    );
    Ok(ExitCode::SUCCESS)
}
