//! Grid CSV, per-cell timeline CSVs and recall-versus-time SVG panels.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use super::grid::{CellResult, GridReport};
use crate::metrics::{ComparisonRow, TimelineReport};

pub const GRID_HEADER: [&str; 12] = [
    "data_rate_kbps",
    "t_trlimit_s",
    "framework_feasible_base",
    "framework_feasible_prop",
    "t_rs_base_s",
    "t_rs_prop_s",
    "t_rs_ratio",
    "recall_base",
    "recall_prop",
    "recall_diff",
    "lr_level",
    "human_tiles",
];

pub const TIMELINE_HEADER: [&str; 4] = ["time_s", "recall", "phase", "framework"];

const NA: &str = "NA";

pub fn num(x: f64) -> String {
    format!("{x:.6}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), num)
}

/// Short label for rates and limits in file names: `22`, `88.5`.
pub fn label(x: f64) -> String {
    format!("{x}")
}

fn grid_record(r: &ComparisonRow) -> [String; 12] {
    [
        label(r.data_rate_kbps),
        label(r.t_tr_limit_s),
        r.feasible_base.to_string(),
        r.feasible_prop.to_string(),
        opt(r.t_rs_base),
        opt(r.t_rs_prop),
        opt(r.t_rs_ratio),
        num(r.recall_base),
        num(r.recall_prop),
        num(r.recall_diff),
        r.lr_level.map_or_else(|| NA.to_string(), |l| l.to_string()),
        r.human_tiles.to_string(),
    ]
}

pub fn write_grid_csv<W: Write>(w: W, report: &GridReport) -> io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(GRID_HEADER)?;
    for row in report.rows() {
        wr.write_record(grid_record(row))?;
    }
    wr.flush()
}

pub fn write_timeline_csv<W: Write>(w: W, cell: &CellResult) -> io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(TIMELINE_HEADER)?;
    for (name, tl) in [("baseline", &cell.baseline.timeline), ("proposed", &cell.streamlined.timeline)] {
        for e in tl.events() {
            wr.write_record([num(e.time_s), num(e.recall), e.phase.to_string(), name.to_string()])?;
        }
    }
    wr.flush()
}

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 260.0;
const GAP: f64 = 30.0;
const PAD_L: f64 = 50.0;
const PAD_R: f64 = 15.0;
const PAD_T: f64 = 30.0;
const PAD_B: f64 = 40.0;

/// `(time, recall)` vertices of the step curve, extended flat to `x_max`.
fn step_points(tl: &TimelineReport, x_max: f64) -> Vec<(f64, f64)> {
    let mut pts = vec![(0.0, 0.0)];
    let mut last = 0.0;
    for e in tl.events() {
        pts.push((e.time_s, last));
        pts.push((e.time_s, e.recall));
        last = e.recall;
    }
    pts.push((x_max, last));
    pts
}

fn polyline(svg: &mut String, pts: &[(f64, f64)], x_max: f64, class: &str, color: &str, dash: &str) {
    let plot_w = PANEL_W - PAD_L - PAD_R;
    let plot_h = PANEL_H - PAD_T - PAD_B;
    let coords: Vec<String> = pts
        .iter()
        .map(|&(t, r)| format!("{:.2},{:.2}", PAD_L + t / x_max * plot_w, PAD_T + (1.0 - r) * plot_h))
        .collect();
    let _ = writeln!(
        svg,
        r#"    <polyline class="{class}" fill="none" stroke="{color}" stroke-width="2"{dash} points="{}"/>"#,
        coords.join(" ")
    );
}

/// One panel per time limit, each with a baseline and a proposed step curve.
pub fn recall_svg(rate_kbps: f64, cells: &[&CellResult]) -> String {
    let total_w = cells.len() as f64 * (PANEL_W + GAP) + GAP;
    let total_h = PANEL_H + 50.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w:.0}" height="{total_h:.0}" viewBox="0 0 {total_w:.0} {total_h:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"  <title>Recall versus time at {} kbit/s</title>"#, label(rate_kbps));
    let _ = writeln!(svg, r#"  <rect width="100%" height="100%" fill="white"/>"#);
    let plot_w = PANEL_W - PAD_L - PAD_R;
    let plot_h = PANEL_H - PAD_T - PAD_B;
    for (i, cell) in cells.iter().enumerate() {
        let (base, prop) = (&cell.baseline.timeline, &cell.streamlined.timeline);
        let longest = [base, prop].iter().filter(|t| t.is_feasible()).map(|t| t.t_rs()).fold(0.0, f64::max);
        let x_max = (longest * 1.05).max(1.0);
        let x0 = GAP + i as f64 * (PANEL_W + GAP);
        let _ = writeln!(svg, r#"  <g class="panel" transform="translate({x0:.2},20)">"#);
        let _ = writeln!(
            svg,
            r#"    <text x="{:.2}" y="15" text-anchor="middle">t_TRlimit = {} s</text>"#,
            PAD_L + plot_w / 2.0,
            label(cell.t_tr_limit_s)
        );
        let (ax, ay) = (PAD_L, PAD_T + plot_h);
        let _ = writeln!(
            svg,
            r#"    <line x1="{ax:.2}" y1="{ay:.2}" x2="{:.2}" y2="{ay:.2}" stroke="black"/>"#,
            ax + plot_w
        );
        let _ = writeln!(svg, r#"    <line x1="{ax:.2}" y1="{ay:.2}" x2="{ax:.2}" y2="{PAD_T:.2}" stroke="black"/>"#);
        for k in 0..=4 {
            let r = k as f64 / 4.0;
            let y = PAD_T + (1.0 - r) * plot_h;
            let _ =
                writeln!(svg, r#"    <text x="{:.2}" y="{:.2}" text-anchor="end">{r:.2}</text>"#, ax - 4.0, y + 4.0);
        }
        let _ = writeln!(svg, r#"    <text x="{ax:.2}" y="{:.2}">0</text>"#, ay + 14.0);
        let _ = writeln!(
            svg,
            r#"    <text x="{:.2}" y="{:.2}" text-anchor="end">{:.0} s</text>"#,
            ax + plot_w,
            ay + 14.0,
            x_max
        );
        let _ = writeln!(
            svg,
            r#"    <text x="{:.2}" y="{:.2}" text-anchor="middle">time (s)</text>"#,
            ax + plot_w / 2.0,
            ay + 30.0
        );
        polyline(&mut svg, &step_points(base, x_max), x_max, "baseline", "#1f77b4", "");
        polyline(&mut svg, &step_points(prop, x_max), x_max, "proposed", "#d62728", r#" stroke-dasharray="6 3""#);
        let legend_y = PAD_T + 12.0;
        let prop_label = if prop.is_feasible() { "proposed" } else { "proposed (infeasible)" };
        let _ = writeln!(svg, r##"    <text x="{:.2}" y="{legend_y:.2}" fill="#1f77b4">baseline</text>"##, ax + 8.0);
        let _ = writeln!(
            svg,
            r##"    <text x="{:.2}" y="{:.2}" fill="#d62728">{prop_label}</text>"##,
            ax + 8.0,
            legend_y + 14.0
        );
        let _ = writeln!(svg, "  </g>");
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn timeline_file_name(rate: f64, limit: f64) -> String {
    format!("timeline_{}_{}.csv", label(rate), label(limit))
}

pub fn svg_file_name(rate: f64) -> String {
    format!("recall_vs_time_{}.svg", label(rate))
}

/// Writes every report file into `out_dir` and returns their paths.
pub fn write_reports(report: &GridReport, rates: &[f64], out_dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();

    let grid_path = out_dir.join("grid.csv");
    write_grid_csv(io::BufWriter::new(fs::File::create(&grid_path)?), report)?;
    files.push(grid_path);

    for cell in &report.cells {
        let p = out_dir.join(timeline_file_name(cell.data_rate_kbps, cell.t_tr_limit_s));
        write_timeline_csv(io::BufWriter::new(fs::File::create(&p)?), cell)?;
        files.push(p);
    }

    for &rate in rates {
        let cells: Vec<&CellResult> = report.cells.iter().filter(|c| c.data_rate_kbps == rate).collect();
        let p = out_dir.join(svg_file_name(rate));
        fs::write(&p, recall_svg(rate, &cells))?;
        files.push(p);
    }
    Ok(files)
}
