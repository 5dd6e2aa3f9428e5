//! Report outputs: schema-versioned JSON, annotated Newick, and an SVG
//! dendrogram marking significant, tested, and untested branches.

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::engine::{ShcReport, REPORT_SCHEMA_VERSION};
use crate::error::{Result, ShcError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Newick,
    Svg,
}

pub fn write_report<T: Scalar + Serialize>(report: &ShcReport<T>, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let body = match format {
        ReportFormat::Json => to_json(report)?,
        ReportFormat::Newick => to_newick(report),
        ReportFormat::Svg => to_svg(report),
    };
    let path = path.as_ref();
    std::fs::write(path, body).map_err(|e| ShcError::io(path, e))
}

pub fn to_json<T: Scalar + Serialize>(report: &ShcReport<T>) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: Scalar + DeserializeOwned>(json: &str) -> Result<ShcReport<T>> {
    let report: ShcReport<T> = serde_json::from_str(json)?;
    if report.schema_version != REPORT_SCHEMA_VERSION {
        return Err(ShcError::InvalidData(format!(
            "report schema version {} is not supported (expected {REPORT_SCHEMA_VERSION})",
            report.schema_version
        )));
    }
    Ok(report)
}

pub fn read_report<T: Scalar + DeserializeOwned>(path: impl AsRef<Path>) -> Result<ShcReport<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ShcError::io(path, e))?;
    from_json(&text)
}

fn leaf_name<T>(report: &ShcReport<T>, leaf: usize) -> String {
    report
        .leaf_labels
        .as_ref()
        .map_or_else(|| leaf.to_string(), |l| l[leaf].clone())
}

fn newick_label(s: &str) -> String {
    if s.chars().any(|c| "()[]':;,".contains(c) || c.is_whitespace()) {
        format!("'{}'", s.replace('\'', "''"))
    } else {
        s.to_string()
    }
}

/// Newick string with branch lengths equal to height differences. Tested
/// internal nodes carry a `[p=...,alpha*=...]` comment.
pub fn to_newick<T: Scalar>(report: &ShcReport<T>) -> String {
    let dend = &report.dendrogram;
    let mut out = String::new();
    // Explicit stack: (node, state) where state 0 = open, 1 = between children, 2 = close.
    let mut stack = vec![(dend.root(), 0u8)];
    while let Some((node, state)) = stack.pop() {
        if dend.is_leaf(node) {
            out.push_str(&newick_label(&leaf_name(report, node)));
            push_length(&mut out, report, node);
            continue;
        }
        let (l, r) = dend.children(node).expect("internal node");
        match state {
            0 => {
                out.push('(');
                stack.push((node, 1));
                stack.push((l, 0));
            }
            1 => {
                out.push(',');
                stack.push((node, 2));
                stack.push((r, 0));
            }
            _ => {
                out.push(')');
                if let Some(res) = report.results.get(&node).filter(|r| r.tested) {
                    if let Some(p) = res.p_value(report.config.p_value) {
                        let _ = write!(out, "[p={p},alpha*={}]", res.alpha_star);
                    }
                }
                if node != dend.root() {
                    push_length(&mut out, report, node);
                }
            }
        }
    }
    out.push(';');
    out
}

fn push_length<T: Scalar>(out: &mut String, report: &ShcReport<T>, node: usize) {
    let parents = report.dendrogram.parents();
    if let Some(parent) = parents[node] {
        let dend = &report.dendrogram;
        let len = dend.height(parent).unwrap_or(T::zero()) - dend.height(node).unwrap_or(T::zero());
        let _ = write!(out, ":{}", len);
    }
}

const SIGNIFICANT: &str = "#d62728";
const TESTED: &str = "#000000";
const UNTESTED: &str = "#1f77b4";

fn fmt_p(p: f64) -> String {
    if p != 0.0 && p < 1e-3 {
        format!("{p:.2e}")
    } else {
        format!("{p:.3}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// SVG 1.1 dendrogram. Branches below rejected nodes are red, below tested but
/// unrejected nodes black, elsewhere blue; every tested node gets one
/// `p=..., α*=...` label.
pub fn to_svg<T: Scalar>(report: &ShcReport<T>) -> String {
    let dend = &report.dendrogram;
    let n = dend.n_leaves;
    let order = dend.leaf_order();
    let (margin_l, margin_r, margin_t, margin_b) = (60.0, 40.0, 30.0, 90.0);
    let step = (900.0 / n as f64).clamp(4.0, 24.0);
    let width = margin_l + margin_r + step * (n.saturating_sub(1)) as f64 + 140.0;
    let plot_h = 420.0;
    let height = margin_t + plot_h + margin_b;
    let max_h = dend.height(dend.root()).map(|h| h.f64()).unwrap_or(0.0).max(f64::MIN_POSITIVE);

    let mut x = vec![0.0; dend.n_nodes()];
    for (i, &leaf) in order.iter().enumerate() {
        x[leaf] = margin_l + step * i as f64;
    }
    let y_of = |node: usize| margin_t + plot_h * (1.0 - dend.height(node).map(|h| h.f64()).unwrap_or(0.0) / max_h);
    for (m, merge) in dend.merges.iter().enumerate() {
        x[n + m] = 0.5 * (x[merge.left] + x[merge.right]);
    }

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{margin_l}" y="18" font-size="12">K&#770; = {} ({} variant, alpha = {})</text>"#,
        report.k_hat,
        report.config.variant.name(),
        report.config.alpha
    );

    let _ = writeln!(svg, r#"<g class="branches" fill="none" stroke-width="1.2">"#);
    for (m, merge) in dend.merges.iter().enumerate() {
        let node = n + m;
        let (color, class) = match report.results.get(&node) {
            Some(r) if r.rejected => (SIGNIFICANT, "significant"),
            Some(r) if r.tested => (TESTED, "tested"),
            _ => (UNTESTED, "untested"),
        };
        let ny = y_of(node);
        let (xl, xr) = (x[merge.left], x[merge.right]);
        let _ = writeln!(
            svg,
            r#"<path class="{class}" stroke="{color}" d="M{xl:.2},{:.2} V{ny:.2} H{xr:.2} V{:.2}"/>"#,
            y_of(merge.left),
            y_of(merge.right)
        );
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g class="test-labels" font-size="10">"#);
    for r in report.results.values().filter(|r| r.tested) {
        let Some(p) = r.p_value(report.config.p_value) else { continue };
        let _ = writeln!(
            svg,
            r#"<text class="test-label" x="{:.2}" y="{:.2}"><tspan fill="{SIGNIFICANT}">p={}</tspan><tspan fill="{TESTED}">, &#945;*={}</tspan></text>"#,
            x[r.node] + 4.0,
            y_of(r.node) - 4.0,
            fmt_p(p),
            fmt_p(r.alpha_star)
        );
    }
    let _ = writeln!(svg, "</g>");

    if n <= 400 {
        let _ = writeln!(svg, r#"<g class="leaf-labels" font-size="8">"#);
        let base = margin_t + plot_h + 6.0;
        for &leaf in &order {
            let _ = writeln!(
                svg,
                r#"<text class="leaf-label" transform="translate({:.2},{base:.2}) rotate(90)">{}</text>"#,
                x[leaf] - 2.5,
                xml_escape(&leaf_name(report, leaf))
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    let _ = writeln!(svg, "</svg>");
    svg
}
