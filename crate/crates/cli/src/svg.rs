//! Per-class SVG line plots: real series against generated series, one
//! panel per class. Plain-text output so tests can parse it back.

use snsgan_core::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 220.0;
const MARGIN: f64 = 36.0;

/// Series grouped per class for one plot.
#[derive(Debug, Clone, Default)]
pub struct ClassPanel {
    pub class: usize,
    pub real: Vec<Vec<f64>>,
    pub generated: Vec<Vec<f64>>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(out: &mut String, series: &[f64], x0: f64, lo: f64, hi: f64, style: &str) {
    let t_len = series.len();
    let span = (hi - lo).max(1e-12);
    let mut points = String::new();
    for (t, &v) in series.iter().enumerate() {
        let x = x0 + MARGIN + (t as f64 / (t_len.max(2) - 1) as f64) * (PANEL_W - 2.0 * MARGIN);
        let y = MARGIN + (1.0 - (v - lo) / span) * (PANEL_H - 2.0 * MARGIN);
        let _ = write!(points, "{x:.2},{y:.2} ");
    }
    let _ = writeln!(out, r#"<polyline fill="none" {style} points="{}"/>"#, points.trim_end());
}

/// Renders one panel per class; real series in gray, generated in color.
pub fn render_plot(panels: &[ClassPanel], title: &str) -> Result<String> {
    if panels.is_empty() {
        return Err(Error::domain("nothing to plot: no class panels".to_string()));
    }
    for p in panels {
        if p.real.is_empty() && p.generated.is_empty() {
            return Err(Error::domain(format!("class {} panel holds no series", p.class)));
        }
    }
    let width = PANEL_W * panels.len() as f64;
    let height = PANEL_H + 30.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in panels {
        for s in p.real.iter().chain(&p.generated) {
            for &v in s {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::numeric("plot input contains non-finite values".to_string()));
    }

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(
        out,
        r#"<text x="8" y="{:.0}" font-family="sans-serif" font-size="12">{}</text>"#,
        height - 10.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="11">real: gray, generated: color</text>"#,
        width - 220.0,
        height - 10.0
    );
    for (i, panel) in panels.iter().enumerate() {
        let x0 = i as f64 * PANEL_W;
        let _ = writeln!(out, r#"<g>"#);
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{MARGIN:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#999"/>"##,
            x0 + MARGIN,
            PANEL_W - 2.0 * MARGIN,
            PANEL_H - 2.0 * MARGIN
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">class {}</text>"#,
            x0 + MARGIN,
            MARGIN - 8.0,
            panel.class
        );
        // y-axis extremes
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="9">{hi:.2}</text>"#,
            x0 + 4.0,
            MARGIN + 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="9">{lo:.2}</text>"#,
            x0 + 4.0,
            PANEL_H - MARGIN
        );
        for s in &panel.real {
            polyline(&mut out, s, x0, lo, hi, r##"stroke="#aaaaaa" stroke-width="1""##);
        }
        let color = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
            [panel.class % 6];
        for s in &panel.generated {
            polyline(&mut out, s, x0, lo, hi, &format!(r#"stroke="{color}" stroke-width="1.2""#));
        }
        let _ = writeln!(out, r#"</g>"#);
    }
    let _ = writeln!(out, "</svg>");
    Ok(out)
}

pub fn write_plot(path: impl AsRef<Path>, panels: &[ClassPanel], title: &str) -> Result<()> {
    let svg = render_plot(panels, title)?;
    std::fs::write(path, svg)?;
    Ok(())
}

/// Minimal XML well-formedness scan: tag balance, quote-closed attributes,
/// a single root element.
pub fn check_well_formed(xml: &str) -> Result<()> {
    let bytes = xml.as_bytes();
    let mut stack: Vec<String> = Vec::new();
    let mut roots = 0usize;
    let mut i = 0usize;
    while i < bytes.len() {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let close = xml[i..]
            .find('>')
            .map(|o| i + o)
            .ok_or_else(|| Error::format("xml: unterminated tag".to_string()))?;
        let inner = &xml[i + 1..close];
        // a quoted '>' inside attributes would break this scan; the writer
        // never emits one
        if let Some(name) = inner.strip_prefix('/') {
            let top = stack
                .pop()
                .ok_or_else(|| Error::format(format!("xml: stray closing tag </{name}>")))?;
            if top != name.trim() {
                return Err(Error::format(format!("xml: </{}> closes <{}>", name.trim(), top)));
            }
            if stack.is_empty() {
                roots += 1;
            }
        } else if inner.starts_with('?') || inner.starts_with('!') {
            // declaration or comment
        } else {
            let name = inner
                .split_whitespace()
                .next()
                .ok_or_else(|| Error::format("xml: empty tag".to_string()))?;
            let quotes = inner.matches('"').count();
            if quotes % 2 != 0 {
                return Err(Error::format(format!("xml: unbalanced quotes in <{name}>")));
            }
            if !inner.ends_with('/') {
                stack.push(name.to_string());
            } else if stack.is_empty() {
                roots += 1;
            }
        }
        i = close + 1;
    }
    if !stack.is_empty() {
        return Err(Error::format(format!("xml: unclosed tags {stack:?}")));
    }
    if roots != 1 {
        return Err(Error::format(format!("xml: expected one root element, found {roots}")));
    }
    Ok(())
}

/// Extracts the point counts of every polyline in the document.
pub fn polyline_point_counts(xml: &str) -> Vec<usize> {
    let mut counts = Vec::new();
    let mut rest = xml;
    while let Some(start) = rest.find("<polyline") {
        rest = &rest[start..];
        let end = rest.find("/>").unwrap_or(rest.len());
        let tag = &rest[..end];
        if let Some(p) = tag.find("points=\"") {
            let points = &tag[p + 8..];
            let stop = points.find('"').unwrap_or(points.len());
            counts.push(points[..stop].split_whitespace().count());
        }
        rest = &rest[end.min(rest.len())..];
        if rest.len() < 2 {
            break;
        }
        rest = &rest[2..];
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_classes_render_two_panels_of_valid_xml() {
        let panels = vec![
            ClassPanel { class: 0, real: vec![vec![0.0, 0.5, -0.5]], generated: vec![vec![0.1, 0.4, -0.3]] },
            ClassPanel { class: 1, real: vec![vec![1.0, -1.0, 0.0]], generated: vec![] },
        ];
        let svg = render_plot(&panels, "demo").unwrap();
        check_well_formed(&svg).unwrap();
        assert_eq!(svg.matches("<g>").count(), 2);
        let counts = polyline_point_counts(&svg);
        assert_eq!(counts, vec![3, 3, 3]);
    }

    #[test]
    fn empty_input_is_a_domain_error() {
        assert!(matches!(render_plot(&[], "x"), Err(Error::Domain(_))));
    }

    #[test]
    fn malformed_xml_is_caught() {
        assert!(check_well_formed("<a><b></a>").is_err());
        assert!(check_well_formed("<a></a><b></b>").is_err());
        assert!(check_well_formed("<a></a>").is_ok());
    }
}
