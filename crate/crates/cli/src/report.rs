//! CSV tables and bar-chart SVGs for the benchmark outputs.
//!
//! CSV conventions: comma separator, dot decimal point, LF line endings,
//! one fixed header row per table kind, one record per cell. Floats use
//! the shortest round-trip form, so replayed runs produce byte-identical
//! files.

use std::fmt::Write;

use satkit_core::graphnet::MetricPoint;

use crate::experiments::{DuelRow, SolveRateRow, SweepRow};

pub const SOLVE_RATE_HEADER: &str = "heuristic,n,count,cap,solved,solve_rate,seed";
pub const DUEL_HEADER: &str = "solver,n,count,wins,draws,losses,win_pct,draw_pct,loss_pct,seed";
pub const SWEEP_HEADER: &str = "n,iterations,aggregation,replicas_trained,replicas_kept,flagged,policy_error_mean,policy_error_std,eval_hash,seed";
pub const METRICS_HEADER: &str = "step,loss,sat_error,policy_error";

pub fn solve_rate_csv(rows: &[SolveRateRow]) -> String {
    let mut out = String::from(SOLVE_RATE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.heuristic,
            r.n,
            r.count,
            r.cap,
            r.solved,
            r.solve_rate(),
            r.seed
        );
    }
    out
}

pub fn duel_csv(rows: &[DuelRow]) -> String {
    let mut out = String::from(DUEL_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.solver,
            r.n,
            r.count,
            r.wins,
            r.draws,
            r.losses,
            r.win_pct(),
            r.draw_pct(),
            r.loss_pct(),
            r.seed
        );
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.iterations,
            r.aggregation,
            r.replicas_trained,
            r.replicas_kept,
            r.flagged,
            r.policy_error_mean,
            r.policy_error_std,
            r.eval_hash,
            r.seed
        );
    }
    out
}

pub fn metrics_csv(log: &[MetricPoint]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for p in log {
        let _ = writeln!(out, "{},{},{},{}", p.step, p.loss, p.sat_error, p.policy_error);
    }
    out
}

const PALETTE: [&str; 6] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1", "#76b7b2",
];

/// Grouped bar chart: one category group per entry of `categories`, one
/// bar per series inside each group. Values are clipped below at zero;
/// the y axis runs from 0 to the largest value (at least `y_min_span`).
pub fn grouped_bar_svg(
    title: &str,
    y_label: &str,
    categories: &[String],
    series: &[(String, Vec<f64>)],
    y_min_span: f64,
) -> String {
    let width = 760.0;
    let height = 420.0;
    let left = 64.0;
    let right = 24.0;
    let top = 48.0;
    let bottom = 56.0;
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let y_max = series
        .iter()
        .flat_map(|(_, values)| values.iter().copied())
        .fold(y_min_span, f64::max);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(
        out,
        "  <text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        width / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        "  <text x=\"16\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        escape(y_label)
    );

    for tick in 0..=4 {
        let value = y_max * f64::from(tick) / 4.0;
        let y = top + plot_h - plot_h * f64::from(tick) / 4.0;
        let _ = writeln!(
            out,
            "  <line x1=\"{left}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#ddd\"/>",
            left + plot_w
        );
        let _ = writeln!(
            out,
            "  <text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{value:.3}</text>",
            left - 6.0,
            y + 4.0
        );
    }

    let group_w = plot_w / categories.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    for (ci, category) in categories.iter().enumerate() {
        let group_x = left + group_w * ci as f64;
        for (si, (_, values)) in series.iter().enumerate() {
            let value = values.get(ci).copied().unwrap_or(0.0).max(0.0);
            let bar_h = if y_max > 0.0 { plot_h * value / y_max } else { 0.0 };
            let x = group_x + group_w * 0.1 + bar_w * si as f64;
            let y = top + plot_h - bar_h;
            let _ = writeln!(
                out,
                "  <rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{bar_w:.2}\" height=\"{bar_h:.2}\" fill=\"{}\"/>",
                PALETTE[si % PALETTE.len()]
            );
        }
        let _ = writeln!(
            out,
            "  <text x=\"{:.2}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            group_x + group_w / 2.0,
            top + plot_h + 18.0,
            escape(category)
        );
    }

    for (si, (label, _)) in series.iter().enumerate() {
        let x = left + 120.0 * si as f64;
        let y = height - 16.0;
        let _ = writeln!(
            out,
            "  <rect x=\"{x}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>",
            y - 10.0,
            PALETTE[si % PALETTE.len()]
        );
        let _ = writeln!(
            out,
            "  <text x=\"{}\" y=\"{y}\" font-size=\"12\">{}</text>",
            x + 16.0,
            escape(label)
        );
    }

    out.push_str("</svg>\n");
    out
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Solve-rate chart: size classes on the x axis, one bar series per
/// heuristic.
pub fn solve_rate_svg(rows: &[SolveRateRow]) -> String {
    let mut categories: Vec<usize> = rows.iter().map(|r| r.n).collect();
    categories.dedup();
    let mut series: Vec<(String, Vec<f64>)> = Vec::new();
    for row in rows {
        let entry = match series.iter_mut().find(|(name, _)| name == row.heuristic) {
            Some(entry) => entry,
            None => {
                series.push((row.heuristic.to_string(), Vec::new()));
                series.last_mut().expect("just pushed")
            }
        };
        entry.1.push(row.solve_rate());
    }
    grouped_bar_svg(
        "Solve rate within the decision cap",
        "fraction solved",
        &categories.iter().map(|n| format!("n={n}")).collect::<Vec<_>>(),
        &series,
        1.0,
    )
}

/// Duel chart: size classes on the x axis, win/draw/loss percentage bars.
pub fn duel_svg(rows: &[DuelRow]) -> String {
    let categories: Vec<String> = rows.iter().map(|r| format!("n={}", r.n)).collect();
    let series = vec![
        ("win".to_string(), rows.iter().map(DuelRow::win_pct).collect()),
        ("draw".to_string(), rows.iter().map(DuelRow::draw_pct).collect()),
        ("loss".to_string(), rows.iter().map(DuelRow::loss_pct).collect()),
    ];
    grouped_bar_svg(
        "Decisions versus JW-OS (uncapped)",
        "percent of instances",
        &categories,
        &series,
        100.0,
    )
}

/// Sweep chart: message passing depths on the x axis, one bar series per
/// aggregation mode.
pub fn sweep_svg(rows: &[SweepRow]) -> String {
    let mut categories: Vec<usize> = rows.iter().map(|r| r.iterations).collect();
    categories.dedup();
    let mut series: Vec<(String, Vec<f64>)> = Vec::new();
    for row in rows {
        let entry = match series.iter_mut().find(|(name, _)| name == row.aggregation) {
            Some(entry) => entry,
            None => {
                series.push((row.aggregation.to_string(), Vec::new()));
                series.last_mut().expect("just pushed")
            }
        };
        entry.1.push(row.policy_error_mean);
    }
    grouped_bar_svg(
        "Policy error by aggregation mode",
        "policy error",
        &categories.iter().map(|t| format!("T={t}")).collect::<Vec<_>>(),
        &series,
        0.5,
    )
}
