//! `report`: plot-ready tables and SVG figures from a finished run directory.
//! Reads only the CSV artifacts; no model is loaded or re-scored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{self, Error, Result};
use crate::run::{curve_paths, read_results, ResultRow, RESULTS, RUN_MANIFEST};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub window_s: f64,
    pub ppl_s: f64,
    pub mean_val_auc_roc: f64,
    pub scored_folds: usize,
    pub skipped_folds: usize,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub patient: String,
    pub arch: String,
    pub mode: String,
    pub params: String,
    pub window_s: f64,
    pub ppl_s: f64,
    pub auc_roc: f64,
    pub auc_pr: f64,
}

pub struct Report {
    pub out_dir: PathBuf,
    pub comparison: Vec<ComparisonRow>,
    /// Grid tables keyed by architecture; empty for fixed-cell runs.
    pub grids: BTreeMap<String, Vec<GridRow>>,
}

fn expected_files(run: &Path, rows: Option<&[ResultRow]>) -> Vec<PathBuf> {
    let mut files = vec![run.join(RESULTS), run.join(RUN_MANIFEST)];
    if let Some(rows) = rows {
        for r in rows.iter().filter(|r| r.split == "test") {
            files.extend(curve_paths(run, &r.arch));
        }
    }
    files
}

fn missing(files: &[PathBuf]) -> Vec<String> {
    files.iter().filter(|p| !p.is_file()).map(|p| p.display().to_string()).collect()
}

fn read_points(path: &Path) -> Result<Vec<(f64, f64)>> {
    let bytes = error::read(path)?;
    csv::Reader::from_reader(bytes.as_slice())
        .deserialize()
        .collect::<Result<Vec<(f64, f64)>, _>>()
        .map_err(|e| Error::from(e).in_file(path))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    error::write(path, w.into_inner().map_err(|e| Error::Format(e.to_string()))?)
}

fn write_points(path: &Path, header: [&str; 2], points: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for p in points {
        w.serialize(p)?;
    }
    error::write(path, w.into_inner().map_err(|e| Error::Format(e.to_string()))?)
}

/// Per-cell table of one architecture's grid search, window-major.
pub fn grid_table(rows: &[ResultRow], arch: &str) -> Vec<GridRow> {
    let mut out: Vec<GridRow> = Vec::new();
    for r in rows.iter().filter(|r| r.arch == arch && r.split == "cv_mean") {
        let folds = rows
            .iter()
            .filter(|f| f.arch == arch && f.split.starts_with("fold") && f.window_s == r.window_s && f.ppl_s == r.ppl_s);
        let (scored, skipped) = folds.fold((0, 0), |(a, b), f| if f.auc_roc.is_some() { (a + 1, b) } else { (a, b + 1) });
        out.push(GridRow {
            window_s: r.window_s,
            ppl_s: r.ppl_s,
            mean_val_auc_roc: r.auc_roc.unwrap_or(f64::NAN),
            scored_folds: scored,
            skipped_folds: skipped,
            selected: r.note == "selected",
        });
    }
    out.sort_by(|a, b| (a.window_s, a.ppl_s).partial_cmp(&(b.window_s, b.ppl_s)).expect("finite grid values"));
    out
}

/// One row per trained architecture, in run order.
pub fn comparison_table(rows: &[ResultRow]) -> Vec<ComparisonRow> {
    rows.iter()
        .filter(|r| r.split == "test")
        .map(|r| {
            let grid = rows.iter().any(|g| g.arch == r.arch && g.split == "cv_mean");
            ComparisonRow {
                patient: r.patient.clone(),
                arch: r.arch.clone(),
                mode: r.mode.clone(),
                params: if grid { "optimized" } else { "fixed" }.into(),
                window_s: r.window_s,
                ppl_s: r.ppl_s,
                auc_roc: r.auc_roc.unwrap_or(f64::NAN),
                auc_pr: r.auc_pr.unwrap_or(f64::NAN),
            }
        })
        .collect()
}

const W: f64 = 360.0;
const H: f64 = 360.0;
const PAD: f64 = 50.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(svg: &mut String, title: &str, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = (PAD, H - PAD, W - 10.0, 20.0);
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="14" text-anchor="middle">{}</text>
<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>
<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>
"#,
        W / 2.0,
        esc(title),
        (x0 + x1) / 2.0,
        H - 12.0,
        esc(x_label),
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        esc(y_label)
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let (px, py) = (sx(v), sy(v));
        let _ = writeln!(svg, r#"<text x="{px}" y="{}" text-anchor="middle">{v:.1}</text>"#, y0 + 14.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{v:.1}</text>"#, x0 - 4.0, py + 4.0);
    }
}

fn sx(v: f64) -> f64 {
    PAD + v * (W - 10.0 - PAD)
}

fn sy(v: f64) -> f64 {
    H - PAD - v * (H - PAD - 20.0)
}

/// Line plot on the unit square.
pub fn curve_svg(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)], diagonal: bool) -> String {
    let mut svg = String::new();
    axes(&mut svg, title, x_label, y_label);
    if diagonal {
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 3"/>"##,
            sx(0.0),
            sy(0.0),
            sx(1.0),
            sy(1.0)
        );
    }
    let pts: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    let _ = writeln!(svg, r##"<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{}"/>"##, pts.join(" "));
    svg.push_str("</svg>\n");
    svg
}

/// Window × PPL heat table of mean validation AUC ROC.
pub fn grid_svg(arch: &str, grid: &[GridRow]) -> String {
    let mut windows: Vec<f64> = grid.iter().map(|g| g.window_s).collect();
    let mut ppls: Vec<f64> = grid.iter().map(|g| g.ppl_s).collect();
    for v in [&mut windows, &mut ppls] {
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        v.dedup();
    }
    let (cw, ch, left, top) = (90.0, 34.0, 70.0, 40.0);
    let width = left + cw * ppls.len() as f64 + 10.0;
    let height = top + ch * windows.len() as f64 + 30.0;
    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="14" text-anchor="middle">{}: mean validation AUC ROC</text>
"#,
        width / 2.0,
        esc(arch)
    );
    for (j, p) in ppls.iter().enumerate() {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">PPL {} min</text>"#, left + cw * (j as f64 + 0.5), top - 6.0, p / 60.0);
    }
    for (i, w) in windows.iter().enumerate() {
        let y = top + ch * i as f64;
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{w} s</text>"#, left - 6.0, y + ch / 2.0 + 4.0);
        for (j, p) in ppls.iter().enumerate() {
            let x = left + cw * j as f64;
            let cell = grid.iter().find(|g| g.window_s == *w && g.ppl_s == *p);
            let (fill, text) = match cell {
                Some(g) if g.mean_val_auc_roc.is_finite() => {
                    // White at 0.5 (chance), dark blue at 1.
                    let t = ((g.mean_val_auc_roc - 0.5) * 2.0).clamp(0.0, 1.0);
                    let c = |full: f64, end: f64| (full + (end - full) * t).round() as u8;
                    (format!("#{:02x}{:02x}{:02x}", c(255.0, 31.0), c(255.0, 95.0), c(255.0, 168.0)), format!("{:.3}", g.mean_val_auc_roc))
                }
                _ => ("#eeeeee".to_string(), "n/a".to_string()),
            };
            let stroke = if cell.is_some_and(|g| g.selected) { r#" stroke="black" stroke-width="2""# } else { r##" stroke="#ccc""## };
            let _ = writeln!(svg, r#"<rect x="{x}" y="{y}" width="{cw}" height="{ch}" fill="{fill}"{stroke}/>"#);
            let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{text}</text>"#, x + cw / 2.0, y + ch / 2.0 + 4.0);
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Paired AUC ROC / AUC PR bars, one group per architecture.
pub fn comparison_svg(rows: &[ComparisonRow]) -> String {
    let group = 70.0;
    let width = PAD + group * rows.len().max(1) as f64 + 20.0;
    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{H}" font-family="sans-serif" font-size="11">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="14" text-anchor="middle">Test AUC (ROC dark, PR light)</text>
<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>
"#,
        width / 2.0,
        sy(0.0),
        width - 10.0,
        sy(0.0)
    );
    for (i, r) in rows.iter().enumerate() {
        let x = PAD + group * i as f64 + 10.0;
        for (k, (v, fill)) in [(r.auc_roc, "#1f5fa8"), (r.auc_pr, "#8fb3dd")].into_iter().enumerate() {
            let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
            let _ = writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="22" height="{}" fill="{fill}"/>"#,
                x + 24.0 * k as f64,
                sy(v),
                sy(0.0) - sy(v)
            );
        }
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, x + 23.0, sy(0.0) + 14.0, esc(&r.arch));
    }
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{v:.1}</text>"#, PAD - 4.0, sy(v) + 4.0);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes the report for `run` into `out` (default `<run>/report`).
pub fn cmd_report(run: &Path, out: Option<&Path>) -> Result<Report> {
    let absent = missing(&expected_files(run, None));
    if !absent.is_empty() {
        return Err(Error::MissingArtifacts(absent));
    }
    let rows = read_results(&run.join(RESULTS))?;
    let absent = missing(&expected_files(run, Some(&rows)));
    if !absent.is_empty() {
        return Err(Error::MissingArtifacts(absent));
    }
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| run.join("report"));

    let comparison = comparison_table(&rows);
    write_csv(&out.join("comparison.csv"), &comparison)?;
    error::write(&out.join("comparison.svg"), comparison_svg(&comparison))?;

    let mut grids = BTreeMap::new();
    for c in &comparison {
        let [roc_path, pr_path] = curve_paths(run, &c.arch);
        let roc = read_points(&roc_path)?;
        let pr = read_points(&pr_path)?;
        write_points(&out.join(format!("roc_{}.csv", c.arch)), ["fpr", "tpr"], &roc)?;
        write_points(&out.join(format!("pr_{}.csv", c.arch)), ["recall", "precision"], &pr)?;
        let title = format!("{} ROC (AUC {:.3})", c.arch, c.auc_roc);
        error::write(&out.join(format!("roc_{}.svg", c.arch)), curve_svg(&title, "false positive rate", "true positive rate", &roc, true))?;
        let title = format!("{} PR (AP {:.3})", c.arch, c.auc_pr);
        error::write(&out.join(format!("pr_{}.svg", c.arch)), curve_svg(&title, "recall", "precision", &pr, false))?;

        let grid = grid_table(&rows, &c.arch);
        if !grid.is_empty() {
            write_csv(&out.join(format!("grid_{}.csv", c.arch)), &grid)?;
            error::write(&out.join(format!("grid_{}.svg", c.arch)), grid_svg(&c.arch, &grid))?;
            grids.insert(c.arch.clone(), grid);
        }
    }
    Ok(Report { out_dir: out, comparison, grids })
}
