//! Aligned-text rendering of score and timing tables.

use sgpr_core::classify::ConfusionMatrix;
use sgpr_core::dictionary_learning::ProbeRow;
use std::fmt::Write;

fn pad(text: &str, width: usize) -> String {
    format!("{text:>width$}")
}

/// Confusion matrix in probability form: columns are ground truths, rows are
/// predictions, diagonal entries are the per-class P_CC.
pub fn confusion_table(cm: &ConfusionMatrix, names: &[String]) -> String {
    let p = cm.probabilities();
    let c = cm.class_count();
    let width = names
        .iter()
        .map(|n| n.len())
        .max()
        .unwrap_or(0)
        .max("pred\\truth".len())
        .max(6)
        + 2;
    let mut out = String::new();
    writeln!(out, "confusion matrix (column = ground truth)").unwrap();
    out.push_str(&pad("pred\\truth", width));
    for name in names {
        out.push_str(&pad(name, width));
    }
    out.push('\n');
    for row in 0..c {
        out.push_str(&pad(&names[row], width));
        for col in 0..c {
            out.push_str(&pad(&format!("{:.3}", p[(row, col)]), width));
        }
        out.push('\n');
    }
    out
}

/// `metric: value` listing with aligned columns.
pub fn score_table(scores: &[(String, f64)]) -> String {
    let width = scores.iter().map(|(n, _)| n.len()).max().unwrap_or(0) + 2;
    let mut out = String::new();
    writeln!(out, "scores").unwrap();
    for (name, value) in scores {
        writeln!(out, "{} {value:.4}", pad(name, width)).unwrap();
    }
    out
}

/// Wall-time table, one row per measured (algorithm, size) pair.
pub fn timing_table(rows: &[ProbeRow]) -> String {
    let mut out = String::new();
    writeln!(out, "timing").unwrap();
    writeln!(
        out,
        "{}{}{}{}{}",
        pad("algorithm", 12),
        pad("columns", 10),
        pad("atoms", 8),
        pad("seconds", 12),
        pad("iterations", 12)
    )
    .unwrap();
    for r in rows {
        writeln!(
            out,
            "{}{}{}{}{}",
            pad(&r.algorithm.to_string(), 12),
            pad(&r.columns.to_string(), 10),
            pad(&r.atom_count.to_string(), 8),
            pad(&format!("{:.3}", r.seconds), 12),
            pad(&r.iterations.to_string(), 12)
        )
        .unwrap();
    }
    out
}
