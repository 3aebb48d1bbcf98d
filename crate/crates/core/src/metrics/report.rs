//! Plain-text rendering of a [`MetricsReport`]; scores shown as percentages.

use std::fmt::Write;

use super::{Aggregate, MetricsReport};

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

fn group_row(out: &mut String, name: &str, a: &Aggregate) {
    let _ = writeln!(
        out,
        "{:<10} {:>5} {:>8} {:>8} {:>8} {:>8}",
        name,
        a.n,
        pct(a.ridf1),
        pct(a.rmota),
        pct(a.rrcll),
        pct(a.rprcn)
    );
}

/// Per-instruction rows followed by the aggregate block. With `by_level`
/// the block lists easy, medium and hard before the overall row.
pub fn render_text(report: &MetricsReport, by_level: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# tp_iou {} | empty prediction precision {} | instructions {} | excluded {}",
        report.tp_iou,
        report.empty_precision,
        report.instructions.len(),
        report.excluded.len()
    );
    let _ = writeln!(
        out,
        "{:<32} {:<7} {:>8} {:>9} {:>8} {:>8} {:>8} {:>6} {:>6} {:>6} {:>5} {:>6}",
        "task", "level", "IDF1", "MOTA_raw", "MOTA", "Rcll", "Prcn", "TP", "FP", "FN", "IDSW", "GT"
    );
    for r in &report.instructions {
        let c = &r.counts;
        let _ = writeln!(
            out,
            "{:<32} {:<7} {:>8} {:>9} {:>8} {:>8} {:>8} {:>6} {:>6} {:>6} {:>5} {:>6}",
            r.task_id,
            r.level.map_or("-", |l| l.as_str()),
            pct(r.idf1),
            pct(r.mota_raw),
            pct(r.mota_clamped),
            pct(r.recall),
            pct(r.precision),
            c.tp,
            c.fp,
            c.fn_,
            c.idsw,
            c.gt
        );
    }
    for e in &report.excluded {
        let _ = writeln!(out, "excluded {}: {}", e.task_id, e.reason);
    }
    out.push('\n');
    let _ = writeln!(
        out,
        "{:<10} {:>5} {:>8} {:>8} {:>8} {:>8}",
        "group", "n", "RIDF1", "RMOTA", "RRcll", "RPrcn"
    );
    if by_level {
        for a in &report.by_level {
            group_row(&mut out, a.level.map_or("-", |l| l.as_str()), a);
        }
    }
    group_row(&mut out, "overall", &report.overall);
    out
}
