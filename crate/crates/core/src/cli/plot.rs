//! Curve traces (CSV) and their SVG rendering.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentationKind;
use crate::curve::{pchip_fit, Knot};
use crate::sensitivity::{LevelSet, SAConfig};

use super::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    Knot,
    Level,
}

/// One row of a trace CSV: `round,kind,point,alpha,g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: usize,
    pub kind: AugmentationKind,
    pub point: PointKind,
    pub alpha: f64,
    pub g: f64,
}

/// Trace rows for one analysis round: every sample as a knot, every solved
/// level at its target ordinate.
pub fn trace_rows(round: usize, sets: &[LevelSet], cfg: &SAConfig) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    for set in sets {
        for k in set.knots() {
            rows.push(TraceRow {
                round,
                kind: set.kind,
                point: PointKind::Knot,
                alpha: k.x,
                g: k.y,
            });
        }
        let targets = if set.fallback {
            set.levels.iter().map(|a| cfg.lambda * a).collect()
        } else {
            cfg.targets()
        };
        for (&alpha, g) in set.levels.iter().zip(targets) {
            rows.push(TraceRow {
                round,
                kind: set.kind,
                point: PointKind::Level,
                alpha,
                g,
            });
        }
    }
    rows
}

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["round", "kind", "point", "alpha", "g"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| CliError::Usage(format!("{}: row {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Trace rows from a solve output (JSON list of level sets) or a trace CSV,
/// chosen by extension.
pub fn load_plot_input(path: &Path) -> Result<Vec<TraceRow>, CliError> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if !is_json {
        return read_trace(path);
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let sets: Vec<LevelSet> = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(trace_rows(0, &sets, &SAConfig::default()))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const CURVE_SAMPLES: usize = 200;

struct Frame {
    x_max: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, alpha: f64) -> f64 {
        MARGIN + alpha / self.x_max * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, g: f64) -> f64 {
        HEIGHT - MARGIN - g / self.y_max * (HEIGHT - 2.0 * MARGIN)
    }
}

/// Renders one kind's rounds: knots as circles, the monotone interpolant as a
/// path, levels as crosses on the alpha axis. Older rounds fade out.
pub fn render_svg(rows: &[TraceRow], kind: AugmentationKind) -> Result<String, CliError> {
    let rows: Vec<&TraceRow> = rows.iter().filter(|r| r.kind == kind).collect();
    if rows.is_empty() {
        return Err(CliError::Usage(format!("no trace rows for {kind}")));
    }
    let mut rounds: Vec<usize> = rows.iter().map(|r| r.round).collect();
    rounds.sort_unstable();
    rounds.dedup();
    let frame = Frame {
        x_max: rows.iter().map(|r| r.alpha).fold(1.0, f64::max),
        y_max: rows.iter().map(|r| r.g).fold(2.0, f64::max),
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let (x0, y0) = (frame.x(0.0), frame.y(0.0));
    let _ = writeln!(
        svg,
        r##"<line class="axis" x1="{x0:.2}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}" stroke="#333"/>"##,
        frame.x(frame.x_max)
    );
    let _ = writeln!(
        svg,
        r##"<line class="axis" x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{:.2}" stroke="#333"/>"##,
        frame.y(frame.y_max)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="14" text-anchor="middle">{kind}: g(alpha)</text>"#,
        WIDTH / 2.0,
        MARGIN / 2.0
    );

    for (i, &round) in rounds.iter().enumerate() {
        let opacity = (i + 1) as f64 / rounds.len() as f64;
        let mut knots: Vec<Knot> = rows
            .iter()
            .filter(|r| r.round == round && r.point == PointKind::Knot)
            .map(|r| Knot::new(r.alpha, r.g))
            .collect();
        knots.sort_by(|a, b| a.x.total_cmp(&b.x));
        knots.dedup_by(|a, b| a.x == b.x);
        let _ = writeln!(
            svg,
            r#"<g class="round" data-round="{round}" opacity="{opacity:.3}">"#
        );
        if let Ok(curve) = pchip_fit(&knots) {
            let (lo, hi) = curve.x_span();
            let mut d = String::new();
            for s in 0..=CURVE_SAMPLES {
                let a = (lo + (hi - lo) * s as f64 / CURVE_SAMPLES as f64).min(hi);
                let g = curve.eval(a).expect("sample inside span");
                let _ = write!(
                    d,
                    "{}{:.2},{:.2}",
                    if s == 0 { "M" } else { " L" },
                    frame.x(a),
                    frame.y(g)
                );
            }
            let _ = writeln!(
                svg,
                r##"<path d="{d}" fill="none" stroke="#1f5fa8" stroke-width="2"/>"##
            );
        }
        for k in &knots {
            let _ = writeln!(
                svg,
                r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#1f5fa8"/>"##,
                frame.x(k.x),
                frame.y(k.y)
            );
        }
        for r in rows
            .iter()
            .filter(|r| r.round == round && r.point == PointKind::Level)
        {
            let (cx, s) = (frame.x(r.alpha), 6.0);
            let _ = writeln!(
                svg,
                r##"<g class="cross" stroke="#c0392b" stroke-width="2"><line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/></g>"##,
                cx - s,
                y0 - s,
                cx + s,
                y0 + s,
                cx - s,
                y0 + s,
                cx + s,
                y0 - s
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
