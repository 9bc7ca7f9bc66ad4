//! Metric reports: `report.json`, CSV tables and standalone SVG plots.
//!
//! Histograms and grouped tables are built from the speed-filtered error
//! records. Bin edges always cover the data, so every table's counts sum to
//! the filtered record count.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use annofix_core::association::InflationParams;
use annofix_core::metrics::{
    compute_error_records, compute_ipd, compute_sdede, filter_by_speed, group_errors, ErrorRecord,
    GroupRow, Ipd, MetricsError, Spread, GROUP_PERCENTILES,
};
use annofix_core::pipeline::CorrectionResult;
use annofix_core::scene::Scene;
use annofix_core::stats::Histogram;
use annofix_core::synth::{evaluate_against_truth, GroundTruth, Summary, TruthEvaluation};

use crate::error::Result;
use crate::io::write_text;

pub const HISTOGRAM_BINS: usize = 20;
pub const SPEED_EDGES: [f64; 9] = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0];
pub const DISTANCE_EDGES: [f64; 9] = [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 75.0, 100.0, 150.0];

#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub min_speed: f64,
    pub records: Vec<ErrorRecord>,
    /// Records with `|speed| ≥ min_speed`.
    pub filtered: Vec<ErrorRecord>,
    pub ipd: Ipd,
    /// `None` with fewer than two filtered records.
    pub sdede: Option<Spread>,
    pub ede_histogram: Histogram,
    pub dede_x_histogram: Histogram,
    pub dede_y_histogram: Histogram,
    pub by_speed: Vec<GroupRow>,
    pub by_distance: Vec<GroupRow>,
    pub truth: Option<TruthEvaluation>,
}

/// Stretches the last edge so the closed last bin holds the largest value.
fn covering_edges(defaults: &[f64], values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut edges = defaults.to_vec();
    let max = values.fold(f64::NEG_INFINITY, f64::max);
    if let Some(last) = edges.last_mut() {
        if max > *last {
            *last = max;
        }
    }
    edges
}

pub fn build_report(
    scene: &Scene,
    corrected: &CorrectionResult,
    truth: Option<&GroundTruth>,
    min_speed: f64,
) -> Result<MetricsReport> {
    let records = compute_error_records(&scene.annotations, corrected, &scene.ego)?;
    let filtered = filter_by_speed(&records, min_speed);
    let inflation = InflationParams::with_sensor_period(scene.metadata.sensor_period);
    let ipd = compute_ipd(scene, corrected, &inflation, min_speed)?;
    let sdede = match compute_sdede(&records, min_speed) {
        Ok(s) => Some(s),
        Err(MetricsError::InsufficientData { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let column = |f: fn(&ErrorRecord) -> f64| filtered.iter().map(f).collect::<Vec<f64>>();
    let speed_edges = covering_edges(&SPEED_EDGES, filtered.iter().map(|r| r.speed.abs()));
    let distance_edges = covering_edges(&DISTANCE_EDGES, filtered.iter().map(|r| r.dist_to_ego));
    let grouped = group_errors(&filtered, &speed_edges, &distance_edges)?;
    let truth = truth
        .map(|t| evaluate_against_truth(corrected, t))
        .transpose()?;
    Ok(MetricsReport {
        min_speed,
        ede_histogram: Histogram::uniform(&column(|r| r.ede), HISTOGRAM_BINS),
        dede_x_histogram: Histogram::uniform(&column(|r| r.dede_x), HISTOGRAM_BINS),
        dede_y_histogram: Histogram::uniform(&column(|r| r.dede_y), HISTOGRAM_BINS),
        by_speed: grouped.by_speed,
        by_distance: grouped.by_distance,
        records,
        filtered,
        ipd,
        sdede,
        truth,
    })
}

fn summary_json(s: &Option<Summary>) -> Value {
    match s {
        Some(s) => json!({ "median": s.median, "p95": s.p95 }),
        None => Value::Null,
    }
}

impl MetricsReport {
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "min_speed": self.min_speed,
            "records": self.records.len(),
            "records_filtered": self.filtered.len(),
            "ipd": {
                "ratio": self.ipd.ratio(),
                "inliers_original": self.ipd.inliers_original,
                "inliers_corrected": self.ipd.inliers_corrected,
            },
            "sdede_x": self.sdede.map(|s| s.x),
            "sdede_y": self.sdede.map(|s| s.y),
        });
        if let Some(t) = &self.truth {
            v["truth"] = json!({
                "boxes": t.boxes.len(),
                "position": summary_json(&t.position),
                "heading": summary_json(&t.heading),
                "speed": summary_json(&t.speed),
            });
        }
        v
    }

    /// A few lines for the terminal.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "records: {} ({} with |speed| >= {} m/s)",
            self.records.len(),
            self.filtered.len(),
            self.min_speed
        );
        match self.ipd.ratio() {
            Some(r) => {
                let _ = writeln!(out, "IPD: {:+.2}%", 100.0 * r);
            }
            None => {
                let _ = writeln!(out, "IPD: undefined (no inliers in the original boxes)");
            }
        }
        match self.sdede {
            Some(s) => {
                let _ = writeln!(out, "SDEDE: x {:.3} m, y {:.3} m", s.x, s.y);
            }
            None => {
                let _ = writeln!(out, "SDEDE: undefined (fewer than 2 records)");
            }
        }
        if let Some(Summary { median, p95 }) = self.truth.as_ref().and_then(|t| t.position) {
            let _ = writeln!(
                out,
                "position error vs truth: median {median:.3} m, p95 {p95:.3} m"
            );
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
        let json = serde_json::to_string_pretty(&self.to_json()).expect("report is valid json");
        write_text(&dir.join("report.json"), &(json + "\n"))?;
        write_text(
            &dir.join("ede_histogram.csv"),
            &histogram_csv(&self.ede_histogram),
        )?;
        write_text(&dir.join("dede_histograms.csv"), &self.dede_csv())?;
        write_text(&dir.join("grouped_speed.csv"), &grouped_csv(&self.by_speed))?;
        write_text(
            &dir.join("grouped_distance.csv"),
            &grouped_csv(&self.by_distance),
        )?;
        write_text(
            &dir.join("ede_histogram.svg"),
            &histogram_svg("EDE", "m", &[("ede", &self.ede_histogram)]),
        )?;
        write_text(
            &dir.join("dede_histograms.svg"),
            &histogram_svg(
                "DEDE",
                "m",
                &[
                    ("dede_x", &self.dede_x_histogram),
                    ("dede_y", &self.dede_y_histogram),
                ],
            ),
        )?;
        write_text(
            &dir.join("grouped_speed.svg"),
            &percentile_svg("EDE by speed", "m/s", &self.by_speed),
        )?;
        write_text(
            &dir.join("grouped_distance.svg"),
            &percentile_svg("EDE by distance to ego", "m", &self.by_distance),
        )?;
        if let Some(t) = &self.truth {
            write_text(&dir.join("truth_errors.csv"), &truth_csv(t))?;
        }
        Ok(())
    }

    fn dede_csv(&self) -> String {
        let mut out = String::from("axis,lo,hi,count\n");
        for (axis, h) in [("x", &self.dede_x_histogram), ("y", &self.dede_y_histogram)] {
            for (i, c) in h.counts.iter().enumerate() {
                let _ = writeln!(out, "{axis},{:?},{:?},{c}", h.edges[i], h.edges[i + 1]);
            }
        }
        out
    }
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("lo,hi,count\n");
    for (i, c) in h.counts.iter().enumerate() {
        let _ = writeln!(out, "{:?},{:?},{c}", h.edges[i], h.edges[i + 1]);
    }
    out
}

/// One row per bin; percentile cells are empty for empty bins.
pub fn grouped_csv(rows: &[GroupRow]) -> String {
    let mut out = String::from("lo,hi,count");
    for q in GROUP_PERCENTILES {
        let _ = write!(out, ",p{q}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{:?},{:?},{}", r.lo, r.hi, r.count);
        match r.percentiles {
            Some(p) => p.iter().for_each(|v| {
                let _ = write!(out, ",{v:?}");
            }),
            None => out.push_str(&",".repeat(GROUP_PERCENTILES.len())),
        }
        out.push('\n');
    }
    out
}

fn truth_csv(t: &TruthEvaluation) -> String {
    let mut out = String::from("track_id,sample_index,position,heading,speed\n");
    for b in &t.boxes {
        let speed = b.speed.map(|s| format!("{s:?}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{:?},{:?},{speed}",
            b.track_id, b.sample_index, b.position, b.heading
        );
    }
    out
}

const WIDTH: f64 = 640.0;
const PANEL_HEIGHT: f64 = 260.0;
const MARGIN: f64 = 48.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn svg_open(height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" \
         viewBox=\"0 0 {WIDTH} {height}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Bar chart, one panel per histogram.
pub fn histogram_svg(title: &str, unit: &str, panels: &[(&str, &Histogram)]) -> String {
    let mut out = svg_open(PANEL_HEIGHT * panels.len().max(1) as f64);
    for (k, (name, h)) in panels.iter().enumerate() {
        let top = PANEL_HEIGHT * k as f64;
        let (x0, x1) = (MARGIN, WIDTH - MARGIN / 2.0);
        let (y0, y1) = (top + PANEL_HEIGHT - MARGIN, top + MARGIN / 2.0);
        let _ = writeln!(
            out,
            "<text x=\"{x0}\" y=\"{}\">{} {} (n = {})</text>",
            top + 16.0,
            escape(title),
            escape(name),
            h.total()
        );
        let _ = writeln!(
            out,
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>"
        );
        if h.counts.is_empty() {
            let _ = writeln!(
                out,
                "<text x=\"{x0}\" y=\"{}\">no records</text>",
                y0 - 20.0
            );
            continue;
        }
        let peak = *h.counts.iter().max().unwrap_or(&1).max(&1) as f64;
        let bar = (x1 - x0) / h.counts.len() as f64;
        for (i, c) in h.counts.iter().enumerate() {
            let height = (y0 - y1) * *c as f64 / peak;
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{height:.2}\" fill=\"steelblue\"><title>[{:.3}, {:.3}) {unit}: {c}</title></rect>",
                x0 + bar * i as f64 + 1.0,
                y0 - height,
                (bar - 2.0).max(0.5),
                h.edges[i],
                h.edges[i + 1],
            );
        }
        let (lo, hi) = (h.edges[0], h.edges[h.edges.len() - 1]);
        let _ = writeln!(out, "<text x=\"{x0}\" y=\"{}\">{lo:.3}</text>", y0 + 14.0);
        let _ = writeln!(
            out,
            "<text x=\"{x1}\" y=\"{}\" text-anchor=\"end\">{hi:.3} {}</text>",
            y0 + 14.0,
            escape(unit)
        );
        let _ = writeln!(
            out,
            "<text x=\"4\" y=\"{}\">{}</text>",
            y1 + 10.0,
            peak as usize
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Box plot per group: whiskers at the 5th and 95th percentiles, box from
/// the 25th to the 75th, a line at the median.
pub fn percentile_svg(title: &str, unit: &str, rows: &[GroupRow]) -> String {
    let mut out = svg_open(PANEL_HEIGHT + 20.0);
    let (x0, x1) = (MARGIN, WIDTH - MARGIN / 2.0);
    let (y0, y1) = (PANEL_HEIGHT - MARGIN + 20.0, MARGIN / 2.0 + 10.0);
    let _ = writeln!(
        out,
        "<text x=\"{x0}\" y=\"16\">{} (EDE, m)</text>",
        escape(title)
    );
    let _ = writeln!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>"
    );
    let top = rows
        .iter()
        .filter_map(|r| r.percentiles.map(|p| p[4]))
        .fold(0.0, f64::max)
        .max(1e-9);
    let y = |v: f64| y0 - (y0 - y1) * v / top;
    let slot = (x1 - x0) / rows.len().max(1) as f64;
    for (i, r) in rows.iter().enumerate() {
        let cx = x0 + slot * (i as f64 + 0.5);
        let half = slot * 0.3;
        let _ = writeln!(
            out,
            "<text x=\"{cx:.2}\" y=\"{}\" text-anchor=\"middle\">{}-{} {}</text>",
            y0 + 14.0,
            r.lo,
            r.hi,
            escape(unit)
        );
        let _ = writeln!(
            out,
            "<text x=\"{cx:.2}\" y=\"{}\" text-anchor=\"middle\">n={}</text>",
            y0 + 28.0,
            r.count
        );
        let Some([p5, p25, p50, p75, p95]) = r.percentiles else {
            continue;
        };
        let _ = writeln!(
            out,
            "<line x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            y(p5),
            y(p95)
        );
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"lightsteelblue\" stroke=\"black\"><title>p5 {p5:.3}, p25 {p25:.3}, p50 {p50:.3}, p75 {p75:.3}, p95 {p95:.3}</title></rect>",
            cx - half,
            y(p75),
            2.0 * half,
            (y(p25) - y(p75)).max(0.5)
        );
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"firebrick\" stroke-width=\"2\"/>",
            cx - half,
            y(p50),
            cx + half,
            y(p50)
        );
    }
    let _ = writeln!(out, "<text x=\"4\" y=\"{}\">{top:.3}</text>", y1 + 4.0);
    out.push_str("</svg>\n");
    out
}
