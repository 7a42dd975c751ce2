//! Heatmap emission: pivots a grid CSV into one error matrix per method,
//! a gap manifest, and an optional self-contained SVG rendering.
//!
//! Matrices store raw signed relative errors; only the SVG saturates
//! them at the clip bound. Cells without a value (inapplicable or never
//! computed) stay empty in the matrices, neutral grey in the SVG, and
//! are listed in the gap manifest with a reason.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use rqab::{Error, Result};

use crate::output::{fmt_f64, read_csv, write_csv, CsvTable};

/// What `emit_heatmap_data` produced.
#[derive(Debug, Serialize)]
pub struct HeatmapSummary {
    pub methods: Vec<String>,
    pub files: Vec<String>,
    pub n_gaps: usize,
    pub svg: Option<String>,
}

/// One pivoted method: `values[i][j]` is the raw relative error at
/// `(alpha_desc[i], lambda_asc[j])`, `None` for gaps.
struct MethodMatrix {
    method: String,
    values: Vec<Vec<Option<f64>>>,
    /// Gap reason per empty cell, aligned with `values`.
    reasons: Vec<(f64, f64, &'static str)>,
}

/// Shared axes of all matrices.
struct Axes {
    lambda_asc: Vec<f64>,
    alpha_desc: Vec<f64>,
}

/// Reads a grid CSV and writes `<prefix>.<method>.csv` per method,
/// `<prefix>.gaps.csv`, and `<prefix>.svg` unless disabled.
pub fn emit_heatmap_data(
    csv: &Path,
    out_prefix: &Path,
    clip: f64,
    with_svg: bool,
) -> Result<HeatmapSummary> {
    if !(clip > 0.0) || !clip.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "clip must be positive, got {clip}"
        )));
    }
    let table = read_csv(csv)?;
    if table.schema != "grid.v1" {
        return Err(Error::InvalidParameter(format!(
            "expected schema rqab.grid.v1, found rqab.{}",
            table.schema
        )));
    }
    let (axes, matrices) = pivot(&table)?;

    let mut files = Vec::new();
    let mut gap_rows: Vec<Vec<String>> = Vec::new();
    for m in &matrices {
        let path = suffixed(out_prefix, &format!("{}.csv", m.method));
        let mut header: Vec<String> = vec!["alpha".into()];
        header.extend(axes.lambda_asc.iter().map(|&l| fmt_f64(l)));
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = axes
            .alpha_desc
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let mut row = vec![fmt_f64(a)];
                row.extend(
                    m.values[i]
                        .iter()
                        .map(|v| v.map(fmt_f64).unwrap_or_default()),
                );
                row
            })
            .collect();
        write_csv(&path, "heatmap.v1", &header_refs, &rows)?;
        files.push(path.display().to_string());
        for &(l, a, reason) in &m.reasons {
            gap_rows.push(vec![
                m.method.clone(),
                fmt_f64(l),
                fmt_f64(a),
                reason.to_string(),
            ]);
        }
    }

    let gaps_path = suffixed(out_prefix, "gaps.csv");
    write_csv(
        &gaps_path,
        "gaps.v1",
        &["method", "lambda", "alpha", "reason"],
        &gap_rows,
    )?;
    files.push(gaps_path.display().to_string());

    let mut svg_file = None;
    if with_svg {
        let path = suffixed(out_prefix, "svg");
        std::fs::write(&path, render_svg(&axes, &matrices, clip))?;
        svg_file = Some(path.display().to_string());
    }
    Ok(HeatmapSummary {
        methods: matrices.into_iter().map(|m| m.method).collect(),
        files,
        n_gaps: gap_rows.len(),
        svg: svg_file,
    })
}

/// `<prefix>.<suffix>`, preserving any directory part of the prefix.
fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}.{suffix}", prefix.display()))
}

fn parse_field(s: &str, what: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| {
        Error::InvalidParameter(format!("cannot parse {what} value {s:?} as a number"))
    })
}

fn pivot(table: &CsvTable) -> Result<(Axes, Vec<MethodMatrix>)> {
    let c_lambda = table.col("lambda")?;
    let c_alpha = table.col("alpha")?;
    let c_method = table.col("method")?;
    let c_rel = table.col("rel_err")?;

    let mut lambdas: Vec<f64> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    // method -> (lambda bits, alpha bits) -> rel_err or gap marker.
    let mut cells: BTreeMap<String, BTreeMap<(u64, u64), Option<f64>>> = BTreeMap::new();
    for row in &table.rows {
        let l = parse_field(&row[c_lambda], "lambda")?;
        let a = parse_field(&row[c_alpha], "alpha")?;
        if !lambdas.contains(&l) {
            lambdas.push(l);
        }
        if !alphas.contains(&a) {
            alphas.push(a);
        }
        let rel = if row[c_rel].is_empty() {
            None
        } else {
            Some(parse_field(&row[c_rel], "rel_err")?)
        };
        cells
            .entry(row[c_method].clone())
            .or_default()
            .insert((l.to_bits(), a.to_bits()), rel);
    }
    lambdas.sort_by(f64::total_cmp);
    alphas.sort_by(|x, y| f64::total_cmp(y, x));
    let axes = Axes {
        lambda_asc: lambdas,
        alpha_desc: alphas,
    };

    let matrices = cells
        .into_iter()
        .map(|(method, by_cell)| {
            let mut values = Vec::with_capacity(axes.alpha_desc.len());
            let mut reasons = Vec::new();
            for &a in &axes.alpha_desc {
                let mut row = Vec::with_capacity(axes.lambda_asc.len());
                for &l in &axes.lambda_asc {
                    let v = match by_cell.get(&(l.to_bits(), a.to_bits())) {
                        Some(Some(v)) => Some(*v),
                        Some(None) => {
                            reasons.push((l, a, "inapplicable"));
                            None
                        }
                        None => {
                            reasons.push((l, a, "missing"));
                            None
                        }
                    };
                    row.push(v);
                }
                values.push(row);
            }
            MethodMatrix {
                method,
                values,
                reasons,
            }
        })
        .collect();
    Ok((axes, matrices))
}

/// Diverging color for a signed error: white at 0, saturating to blue at
/// `-clip` and red at `+clip`.
pub fn diverging_color(err: f64, clip: f64) -> String {
    let t = (err / clip).clamp(-1.0, 1.0);
    let mix = |from: (u8, u8, u8), to: (u8, u8, u8), s: f64| {
        let ch = |f: u8, t: u8| (f as f64 + (t as f64 - f as f64) * s).round() as u8;
        format!(
            "#{:02x}{:02x}{:02x}",
            ch(from.0, to.0),
            ch(from.1, to.1),
            ch(from.2, to.2)
        )
    };
    let white = (0xff, 0xff, 0xff);
    if t < 0.0 {
        mix(white, (0x21, 0x66, 0xac), -t)
    } else {
        mix(white, (0xb2, 0x18, 0x2b), t)
    }
}

const CELL: f64 = 22.0;
const LEFT: f64 = 64.0;
const TOP: f64 = 26.0;
const BOTTOM: f64 = 34.0;
const GAP_COLOR: &str = "#cccccc";

fn render_svg(axes: &Axes, matrices: &[MethodMatrix], clip: f64) -> String {
    let n_l = axes.lambda_asc.len();
    let n_a = axes.alpha_desc.len();
    let panel_w = LEFT + n_l as f64 * CELL + 16.0;
    let panel_h = TOP + n_a as f64 * CELL + BOTTOM;
    let legend_h = 56.0;
    let width = panel_w.max(LEFT + 256.0);
    let height = legend_h + matrices.len() as f64 * panel_h;

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n\
         <style>text{{font-family:sans-serif;font-size:10px;fill:#222}}\
         .t{{font-size:11px;font-weight:bold}}</style>\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    ));

    // Legend: signed relative error from -clip to +clip.
    let steps = 48;
    let bar_w = 192.0;
    for i in 0..steps {
        let e = clip * (2.0 * (i as f64 + 0.5) / steps as f64 - 1.0);
        let x = LEFT + bar_w * i as f64 / steps as f64;
        s.push_str(&format!(
            "<rect x=\"{x:.1}\" y=\"18\" width=\"{:.2}\" height=\"12\" fill=\"{}\"/>\n",
            bar_w / steps as f64 + 0.5,
            diverging_color(e, clip)
        ));
    }
    s.push_str(&format!(
        "<text x=\"{LEFT}\" y=\"12\">relative error, saturated at \u{b1}{clip}</text>\n\
         <text x=\"{LEFT}\" y=\"42\">-{clip}</text>\n\
         <text x=\"{:.1}\" y=\"42\" text-anchor=\"middle\">0</text>\n\
         <text x=\"{:.1}\" y=\"42\" text-anchor=\"end\">+{clip}</text>\n",
        LEFT + bar_w / 2.0,
        LEFT + bar_w
    ));

    for (pi, m) in matrices.iter().enumerate() {
        let oy = legend_h + pi as f64 * panel_h;
        s.push_str(&format!(
            "<text class=\"t\" x=\"{LEFT}\" y=\"{:.1}\">{}</text>\n",
            oy + 14.0,
            m.method
        ));
        for (i, &a) in axes.alpha_desc.iter().enumerate() {
            let y = oy + TOP + i as f64 * CELL;
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
                LEFT - 6.0,
                y + CELL / 2.0 + 3.0,
                short_num(a)
            ));
            for (j, &l) in axes.lambda_asc.iter().enumerate() {
                let x = LEFT + j as f64 * CELL;
                let (fill, tip) = match m.values[i][j] {
                    Some(v) => (
                        diverging_color(v, clip),
                        format!("lambda={}, alpha={}, rel_err={}", fmt_f64(l), fmt_f64(a), fmt_f64(v)),
                    ),
                    None => (
                        GAP_COLOR.to_string(),
                        format!("lambda={}, alpha={}, no value", fmt_f64(l), fmt_f64(a)),
                    ),
                };
                s.push_str(&format!(
                    "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{CELL}\" height=\"{CELL}\" \
                     fill=\"{fill}\" stroke=\"white\" stroke-width=\"1\">\
                     <title>{tip}</title></rect>\n"
                ));
            }
        }
        let label_y = oy + TOP + n_a as f64 * CELL + 14.0;
        for (j, &l) in axes.lambda_asc.iter().enumerate() {
            let x = LEFT + j as f64 * CELL + CELL / 2.0;
            s.push_str(&format!(
                "<text x=\"{x:.1}\" y=\"{label_y:.1}\" text-anchor=\"middle\">{}</text>\n",
                short_num(l)
            ));
        }
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">lambda</text>\n\
             <text x=\"12\" y=\"{:.1}\">alpha</text>\n",
            LEFT + n_l as f64 * CELL / 2.0,
            label_y + 16.0,
            oy + TOP - 6.0
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Compact axis label: at most four significant digits.
fn short_num(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e6 {
        format!("{x}")
    } else if x.abs() >= 0.01 {
        let r = format!("{x:.4}");
        r.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{x:.3e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MethodChoice;
    use crate::grid::{write_grid_csv, GridOutcome, GridRow};
    use crate::config::TruthChoice;

    fn row(
        lambda: f64,
        alpha: f64,
        method: MethodChoice,
        value: Option<f64>,
        rel_err: Option<f64>,
    ) -> GridRow {
        GridRow {
            lambda,
            alpha,
            method,
            applicable: value.is_some(),
            substituted: false,
            value,
            truth: 1.0,
            truth_source: "formula",
            truth_seed: None,
            truth_halfwidth: None,
            truth_run_time: None,
            truth_capped: false,
            rel_err,
            clipped_err: rel_err.map(|e| e.clamp(-0.3, 0.3)),
            note: String::new(),
        }
    }

    #[test]
    fn pivot_orders_axes_and_flags_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("grid.csv");
        let rows = vec![
            row(0.9, 0.5, MethodChoice::Wg, Some(1.1), Some(0.1)),
            row(0.9, 0.125, MethodChoice::Wg, Some(0.8), Some(-0.2)),
            row(1.25, 0.5, MethodChoice::Wg, None, None),
            row(1.25, 0.125, MethodChoice::Wg, Some(1.0), Some(0.0)),
            // hazard_rate lacks the (1.25, 0.125) cell entirely.
            row(0.9, 0.5, MethodChoice::HazardRate, Some(1.05), Some(0.05)),
            row(0.9, 0.125, MethodChoice::HazardRate, Some(1.0), Some(0.0)),
            row(1.25, 0.5, MethodChoice::HazardRate, Some(0.9), Some(-0.1)),
        ];
        let outcome = GridOutcome {
            rows,
            timings: vec![],
            truth_choice: TruthChoice::ExactMm1Gi,
        };
        write_grid_csv(&csv, &outcome).unwrap();

        let prefix = dir.path().join("hm");
        let summary = emit_heatmap_data(&csv, &prefix, 0.3, true).unwrap();
        assert_eq!(summary.methods, vec!["hazard_rate", "wg"]);
        assert_eq!(summary.n_gaps, 2);

        let wg = crate::output::read_csv(&dir.path().join("hm.wg.csv")).unwrap();
        assert_eq!(wg.schema, "heatmap.v1");
        // Columns: alpha, then lambda ascending; rows alpha descending.
        assert_eq!(wg.header, vec!["alpha", "0.9", "1.25"]);
        assert_eq!(wg.rows[0], vec!["0.5", "0.1", ""]);
        assert_eq!(wg.rows[1], vec!["0.125", "-0.2", "0"]);

        let gaps = crate::output::read_csv(&dir.path().join("hm.gaps.csv")).unwrap();
        let mut pairs: Vec<(String, String)> = gaps
            .rows
            .iter()
            .map(|r| (r[0].clone(), r[3].clone()))
            .collect();
        pairs.sort();
        assert_eq!(
            pairs,
            vec![
                ("hazard_rate".to_string(), "missing".to_string()),
                ("wg".to_string(), "inapplicable".to_string()),
            ]
        );

        let svg = std::fs::read_to_string(dir.path().join("hm.svg")).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains(GAP_COLOR), "gap cells render neutral");
        assert!(svg.contains("rel_err=0.1"));
    }

    #[test]
    fn colors_saturate_at_the_clip_and_center_on_white() {
        assert_eq!(diverging_color(0.0, 0.3), "#ffffff");
        assert_eq!(diverging_color(0.3, 0.3), "#b2182b");
        assert_eq!(diverging_color(0.9, 0.3), "#b2182b");
        assert_eq!(diverging_color(-0.3, 0.3), "#2166ac");
        assert_eq!(diverging_color(-9.0, 0.3), "#2166ac");
        assert_ne!(diverging_color(0.15, 0.3), diverging_color(0.3, 0.3));
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("x.csv");
        crate::output::write_csv(&csv, "idc.v1", &["t", "value"], &[]).unwrap();
        let err = emit_heatmap_data(&csv, &dir.path().join("p"), 0.3, false);
        assert!(err.is_err());
    }
}
