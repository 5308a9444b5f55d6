//! Report rendering: aligned-column text tables, JSON, and a plot-ready
//! CSV of the threshold sweep.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use remerge_core::evalharness::EvalReport;

fn pct(x: f64) -> String {
    format!("{:6.2}%", 100.0 * x)
}

pub fn render_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "samples    {}", report.total);
    let _ = writeln!(out, "top-1      {}", pct(report.top1));
    let _ = writeln!(out, "top-3      {}", pct(report.top3));
    let _ = writeln!(out, "BLEU-4     {:.4}", report.bleu4_mean);
    let _ = writeln!(out);
    let _ = writeln!(out, "class    count  correct  accuracy");
    for (name, stat) in [("CONCAT", &report.concat), ("OTHER", &report.other)] {
        let _ = writeln!(
            out,
            "{name:<8} {:>5}  {:>7}  {}",
            stat.count,
            stat.correct,
            pct(stat.accuracy)
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "size     count  correct  accuracy");
    for b in &report.buckets {
        let _ = writeln!(
            out,
            "{:<8} {:>5}  {:>7}  {}",
            b.label,
            b.count,
            b.correct,
            pct(b.accuracy)
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "threshold  precision  recall  f1      issued");
    for p in &report.sweep {
        // '*' marks the pinned precision at zero issued predictions.
        let mark = if p.precision_defined { ' ' } else { '*' };
        let _ = writeln!(
            out,
            "{:>9.2}  {:>8.4}{mark} {:>6.4}  {:>6.4}  {:>6}",
            p.threshold, p.precision, p.recall, p.f1, p.issued
        );
    }
    out
}

pub fn write_json(path: &Path, report: &EvalReport) -> anyhow::Result<()> {
    let mut out = serde_json::to_vec_pretty(report)?;
    out.push(b'\n');
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, report: &EvalReport) -> anyhow::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "threshold,precision,recall,f1,issued,correct,precision_defined")?;
    for p in &report.sweep {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.threshold, p.precision, p.recall, p.f1, p.issued, p.correct, p.precision_defined
        )?;
    }
    out.flush()?;
    Ok(())
}
