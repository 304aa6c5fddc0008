//! Plain-text result tables.

use std::fmt::Write;

use hierfuse_core::metrics::MetricsReport;

use crate::runner::{ExperimentSummary, Stat};

fn cell(s: Option<Stat>, digits: usize) -> String {
    match s {
        Some(s) => format!("{:.d$} ± {:.d$}", s.mean, s.std, d = digits),
        None => "n/a".into(),
    }
}

/// One row per run: Acc-7, Acc-5, Acc-2, MAE and weighted F1 as mean ± std,
/// with Acc-2 and MAE margins relative to the first row.
pub fn summary_table(runs: &[(String, ExperimentSummary)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:>5} {:>15} {:>15} {:>15} {:>17} {:>15} {:>8} {:>8}",
        "run", "seeds", "Acc-7", "Acc-5", "Acc-2", "MAE", "W-F1", "dAcc-2", "dMAE"
    );
    let reference = runs.first().map(|(_, s)| &s.aggregate);
    for (label, s) in runs {
        let a = &s.aggregate;
        let margin = |x: Option<Stat>, r: Option<Stat>, d: usize| match (x, r) {
            (Some(x), Some(r)) => format!("{:+.d$}", x.mean - r.mean, d = d),
            _ => "n/a".into(),
        };
        let seeds = if a.n_failed > 0 { format!("{}/{}", a.n_ok, a.n_ok + a.n_failed) } else { a.n_ok.to_string() };
        let _ = writeln!(
            out,
            "{:<16} {:>5} {:>15} {:>15} {:>15} {:>17} {:>15} {:>8} {:>8}",
            label,
            seeds,
            cell(a.acc7, 2),
            cell(a.acc5, 2),
            cell(a.acc2, 2),
            cell(a.mae, 4),
            cell(a.weighted_f1, 2),
            margin(a.acc2, reference.and_then(|r| r.acc2), 2),
            margin(a.mae, reference.and_then(|r| r.mae), 4),
        );
    }
    out
}

/// Single-split metrics with the per-class F1 breakdown.
pub fn metrics_table(m: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "samples      {}", m.n);
    let _ = writeln!(out, "Acc-7        {:.2}", m.acc7);
    let _ = writeln!(out, "Acc-5        {:.2}", m.acc5);
    let _ = writeln!(out, "Acc-2        {:.2}", m.acc2);
    let _ = writeln!(out, "MAE          {:.4}", m.mae);
    let _ = writeln!(out, "weighted F1  {:.2}", m.weighted_f1);
    for (c, f) in m.per_class_f1.iter().enumerate() {
        let _ = writeln!(out, "  F1[{c}]      {:.4}", f);
    }
    out
}
