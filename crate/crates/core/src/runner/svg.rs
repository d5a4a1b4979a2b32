//! Static SVG line charts of `D` against `gamma0 t`: one panel per
//! environment, one polyline per state, a shared legend underneath.

use std::fmt::Write as _;
use std::path::Path;

use crate::dynamics::Environment;
use crate::error::{Error, Result};

use super::SweepRow;

const PANEL_W: f64 = 380.0;
const PANEL_H: f64 = 290.0;
const MARGIN_L: f64 = 58.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 44.0;
const COLUMNS: usize = 2;
const LEGEND_ROW_H: f64 = 20.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick values covering `[0, max]` at a round step.
fn ticks(max: f64) -> Vec<f64> {
    let raw = max / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let n = (max / step + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() { "0".into() } else { s.to_string() }
}

pub fn render_svg(rows: &[SweepRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptySelection("no sweep rows to plot".into()));
    }
    let mut envs: Vec<Environment> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for r in rows {
        if !envs.contains(&r.environment) {
            envs.push(r.environment);
        }
        let l = r.label();
        if !labels.contains(&l) {
            labels.push(l);
        }
    }
    envs.sort_by_key(|e| e.rank());

    let cols = COLUMNS.min(envs.len());
    let panel_rows = envs.len().div_ceil(cols);
    let legend_rows = labels.len().div_ceil(3);
    let width = PANEL_W * cols as f64;
    let height = PANEL_H * panel_rows as f64 + 16.0 + LEGEND_ROW_H * legend_rows as f64;

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    for (k, env) in envs.iter().enumerate() {
        let ox = PANEL_W * (k % cols) as f64;
        let oy = PANEL_H * (k / cols) as f64;
        let pts: Vec<&SweepRow> = rows.iter().filter(|r| r.environment == *env).collect();
        let x_max = pts.iter().map(|r| r.gamma0_t).fold(0.0, f64::max).max(1e-12);
        let y_max = (pts.iter().map(|r| r.d).fold(0.0, f64::max) * 1.05).max(1e-3);
        let (x0, y0) = (ox + MARGIN_L, oy + MARGIN_T);
        let (w, h) = (
            PANEL_W - MARGIN_L - MARGIN_R,
            PANEL_H - MARGIN_T - MARGIN_B,
        );
        let sx = |x: f64| x0 + w * x / x_max;
        let sy = |y: f64| y0 + h * (1.0 - y / y_max);

        let _ = writeln!(out, r#"<g class="panel" data-environment="{env}">"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">({}) {}</text>"#,
            x0 + w / 2.0,
            oy + 20.0,
            (b'a' + env.rank() as u8) as char,
            env
        );
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.1}" y="{y0:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#333"/>"##
        );
        for t in ticks(x_max) {
            let x = sx(t);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#333"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
                y0 + h,
                y0 + h + 4.0,
                y0 + h + 16.0,
                tick_label(t)
            );
        }
        for t in ticks(y_max) {
            let y = sy(t);
            let _ = writeln!(
                out,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="#333"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
                x0 - 4.0,
                x0 - 6.0,
                y + 4.0,
                tick_label(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">γ₀t</text>"#,
            x0 + w / 2.0,
            y0 + h + 34.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">D (ebits)</text>"#,
            ox + 16.0,
            y0 + h / 2.0,
            ox + 16.0,
            y0 + h / 2.0
        );
        for (li, label) in labels.iter().enumerate() {
            let mut series: Vec<&&SweepRow> = pts.iter().filter(|r| &r.label() == label).collect();
            if series.is_empty() {
                continue;
            }
            series.sort_by(|a, b| a.gamma0_t.total_cmp(&b.gamma0_t));
            let coords: Vec<String> = series
                .iter()
                .map(|r| format!("{:.2},{:.2}", sx(r.gamma0_t), sy(r.d)))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.6" data-state="{}" points="{}"/>"#,
                PALETTE[li % PALETTE.len()],
                escape(label),
                coords.join(" ")
            );
        }
        let _ = writeln!(out, "</g>");
    }

    let legend_y = PANEL_H * panel_rows as f64 + 8.0;
    let _ = writeln!(out, r#"<g class="legend">"#);
    for (li, label) in labels.iter().enumerate() {
        let x = 20.0 + (li % 3) as f64 * (width - 40.0) / 3.0;
        let y = legend_y + LEGEND_ROW_H * (li / 3) as f64 + 10.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="2.5"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            x + 22.0,
            PALETTE[li % PALETTE.len()],
            x + 28.0,
            y + 4.0,
            escape(label)
        );
    }
    let _ = writeln!(out, "</g>\n</svg>");
    Ok(out)
}

pub fn write_svg(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let svg = render_svg(rows)?;
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::Family;

    fn rows(envs: &[Environment], families: &[Family]) -> Vec<SweepRow> {
        let mut out = Vec::new();
        for env in envs {
            for fam in families {
                for k in 0..4 {
                    let t = k as f64 * 0.5;
                    out.push(SweepRow {
                        state: *fam,
                        p: None,
                        environment: *env,
                        gamma0_t: t,
                        e_abc: (-t).exp(),
                        e_ab: 0.0,
                        e_ac: 0.0,
                        e_bc: None,
                        d: (-t).exp(),
                        signed_d: (-t).exp(),
                        gap_abc: 0.0,
                        gap_ab: 0.0,
                        gap_ac: 0.0,
                        converged: true,
                    });
                }
            }
        }
        out
    }

    #[test]
    fn one_panel_four_lines() {
        let fams = [Family::Ghz, Family::W, Family::WWbar, Family::Star];
        let svg = render_svg(&rows(&[Environment::LOCAL_MARKOV], &fams)).unwrap();
        assert_eq!(svg.matches(r#"class="panel""#).count(), 1);
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains(">WWbar</text>"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn four_panels() {
        let svg = render_svg(&rows(&Environment::ALL, &[Family::Ghz])).unwrap();
        assert_eq!(svg.matches(r#"class="panel""#).count(), 4);
        assert!(svg.contains("(d) common/nonmarkov"));
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(render_svg(&[]), Err(Error::EmptySelection(_))));
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(2.0), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(ticks(10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(tick_label(0.25), "0.25");
        assert_eq!(tick_label(2.0), "2");
    }
}
