//! Static SVG figures with fixed layout and fixed-precision coordinates.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pipeline::RunReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    AccuracyByFold,
    PermutationNull,
    ImportanceHeatmap,
    Calibration,
}

impl Figure {
    pub const ALL: [Figure; 4] = [
        Figure::AccuracyByFold,
        Figure::PermutationNull,
        Figure::ImportanceHeatmap,
        Figure::Calibration,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            Figure::AccuracyByFold => "fig1_accuracy.svg",
            Figure::PermutationNull => "fig2_permutation.svg",
            Figure::ImportanceHeatmap => "fig3_importance.svg",
            Figure::Calibration => "fig4_calibration.svg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FigureStatus {
    pub figure: Figure,
    pub file: Option<String>,
    pub notice: Option<String>,
}

const PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#af7aa1"];

struct Canvas {
    body: String,
    width: f64,
    height: f64,
}

impl Canvas {
    fn new(width: f64, height: f64, title: &str) -> Self {
        let mut c = Self {
            body: String::new(),
            width,
            height,
        };
        c.text(width / 2.0, 22.0, "middle", 15.0, title);
        c
    }

    fn raw(&mut self, s: String) {
        self.body.push_str("  ");
        self.body.push_str(&s);
        self.body.push('\n');
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: f64, s: &str) {
        let s = s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        self.raw(format!(
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-size="{size:.0}">{s}</text>"#
        ));
    }

    fn rect(&mut self, class: &str, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        self.raw(format!(
            r#"<rect class="{class}" x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        ));
    }

    fn line(&mut self, class: &str, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, dash: bool) {
        let d = if dash { r#" stroke-dasharray="6 4""# } else { "" };
        self.raw(format!(
            r#"<line class="{class}" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="1.5"{d}/>"#
        ));
    }

    /// Axes drawn as paths so they never count as data lines.
    fn axes(&mut self, left: f64, top: f64, right: f64, bottom: f64) {
        self.raw(format!(
            r##"<path class="axis" d="M{left:.2},{top:.2} L{left:.2},{bottom:.2} L{right:.2},{bottom:.2}" fill="none" stroke="#333"/>"##
        ));
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\">\n  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n",
            w = self.width,
            h = self.height,
            body = self.body
        )
    }
}

fn label(r: &RunReport) -> String {
    format!("{} / {}", r.model.name(), r.target.name())
}

fn accuracy_by_fold(reports: &[RunReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("figure needs at least one report".into()));
    }
    let n_folds = reports.iter().map(|r| r.folds.len()).max().unwrap_or(0);
    let (w, h) = (720.0, 420.0);
    let (left, right, top, bottom) = (60.0, w - 170.0, 40.0, h - 50.0);
    let accs = reports.iter().flat_map(|r| r.folds.iter().map(|f| f.metrics.accuracy));
    let base = reports[0].combined.base_rate;
    let lo = accs.clone().fold(base, f64::min).min(0.4);
    let hi = accs.fold(base, f64::max).max(0.65);
    let (lo, hi) = ((lo * 20.0).floor() / 20.0, (hi * 20.0).ceil() / 20.0);
    let y_of = |v: f64| bottom - (v - lo) / (hi - lo) * (bottom - top);

    let mut c = Canvas::new(w, h, "Out-of-sample accuracy by fold");
    c.axes(left, top, right, bottom);
    let mut tick = lo;
    while tick <= hi + 1e-9 {
        c.text(left - 6.0, y_of(tick) + 4.0, "end", 11.0, &format!("{tick:.2}"));
        tick += 0.05;
    }
    let group = (right - left) / n_folds.max(1) as f64;
    let bar_w = group * 0.8 / reports.len() as f64;
    for k in 0..n_folds {
        let gx = left + group * k as f64 + group * 0.1;
        c.text(gx + group * 0.4, bottom + 18.0, "middle", 12.0, &format!("Fold {}", k + 1));
        for (m, r) in reports.iter().enumerate() {
            if let Some(f) = r.folds.get(k) {
                let y = y_of(f.metrics.accuracy);
                c.rect("bar", gx + bar_w * m as f64, y, bar_w * 0.92, bottom - y, PALETTE[m % PALETTE.len()]);
            }
        }
    }
    c.line("base-rate", left, y_of(base), right, y_of(base), "#c00", true);
    c.text(right + 4.0, y_of(base) + 4.0, "start", 11.0, &format!("base rate {base:.3}"));
    for (m, r) in reports.iter().enumerate() {
        let y = top + 20.0 * m as f64;
        c.rect("legend-swatch", right + 10.0, y + 30.0, 12.0, 12.0, PALETTE[m % PALETTE.len()]);
        c.text(right + 28.0, y + 40.0, "start", 11.0, &label(r));
    }
    Ok(c.finish())
}

fn permutation_null(reports: &[RunReport]) -> Result<String> {
    let with: Vec<&RunReport> = reports.iter().filter(|r| r.permutation.is_some()).collect();
    if with.is_empty() {
        return Err(Error::InvalidInput("no report contains a permutation block".into()));
    }
    let panel_w = 320.0;
    let (w, h) = (panel_w * with.len() as f64 + 40.0, 360.0);
    let mut c = Canvas::new(w, h, "Permutation null distributions (final fold)");
    const BINS: usize = 20;
    for (m, r) in with.iter().enumerate() {
        let p = r.permutation.as_ref().expect("filtered");
        let x0 = 50.0 + panel_w * m as f64;
        let (left, right, top, bottom) = (x0, x0 + panel_w - 50.0, 60.0, h - 50.0);
        let lo = p.shuffled.iter().copied().fold(p.actual_accuracy, f64::min);
        let hi = p.shuffled.iter().copied().fold(p.actual_accuracy, f64::max);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.01, hi + 0.01) };
        let width = (hi - lo) / BINS as f64;
        let mut counts = [0usize; BINS];
        for a in &p.shuffled {
            counts[(((a - lo) / width) as usize).min(BINS - 1)] += 1;
        }
        let peak = *counts.iter().max().unwrap_or(&1) as f64;
        let x_of = |v: f64| left + (v - lo) / (hi - lo) * (right - left);
        c.axes(left, top, right, bottom);
        for (b, &n) in counts.iter().enumerate() {
            let bh = n as f64 / peak * (bottom - top);
            let bx = x_of(lo + width * b as f64);
            c.rect("bin", bx, bottom - bh, (right - left) / BINS as f64 * 0.95, bh, PALETTE[0]);
        }
        let ax = x_of(p.actual_accuracy);
        c.line("actual", ax, top, ax, bottom, "#c00", false);
        c.text((left + right) / 2.0, top - 12.0, "middle", 12.0, &label(r));
        c.text(
            (left + right) / 2.0,
            bottom + 34.0,
            "middle",
            11.0,
            &format!("actual {:.4}  p = {:.3}", p.actual_accuracy, p.p_value),
        );
        c.text(left, bottom + 16.0, "start", 10.0, &format!("{lo:.3}"));
        c.text(right, bottom + 16.0, "end", 10.0, &format!("{hi:.3}"));
    }
    Ok(c.finish())
}

fn importance_heatmap(reports: &[RunReport]) -> Result<String> {
    let with: Vec<&RunReport> = reports.iter().filter(|r| r.importance_ranks.is_some()).collect();
    if with.is_empty() {
        return Err(Error::InvalidInput("no report contains an importance rank matrix".into()));
    }
    let rows = with
        .iter()
        .map(|r| r.importance_ranks.as_ref().expect("filtered").features.len())
        .max()
        .unwrap_or(0);
    let cell = 26.0;
    let label_w = 150.0;
    let panel_w = label_w + cell * 3.0 + 60.0;
    let (w, h) = (panel_w * with.len() as f64 + 20.0, 80.0 + cell * rows as f64 + 30.0);
    let mut c = Canvas::new(w, h, "Feature importance rank by fold");
    for (m, r) in with.iter().enumerate() {
        let rm = r.importance_ranks.as_ref().expect("filtered");
        let x0 = 10.0 + panel_w * m as f64 + label_w;
        let n_folds = rm.ranks.first().map_or(0, Vec::len);
        c.text(x0 + cell * n_folds as f64 / 2.0, 44.0, "middle", 12.0, &label(r));
        for f in 0..n_folds {
            c.text(x0 + cell * (f as f64 + 0.5), 64.0, "middle", 10.0, &format!("F{}", f + 1));
        }
        let span = rm.top_k.max(1) as f64;
        for (i, (name, ranks)) in rm.features.iter().zip(&rm.ranks).enumerate() {
            let y = 70.0 + cell * i as f64;
            c.text(x0 - 6.0, y + cell * 0.65, "end", 11.0, name);
            for (f, &rank) in ranks.iter().enumerate() {
                let shade = ((rank as f64 - 1.0) / span).min(1.0);
                let g = (60.0 + 180.0 * shade) as u8;
                let fill = format!("#{:02x}{:02x}{:02x}", g / 2, g, 255u8.saturating_sub((shade * 40.0) as u8));
                c.rect("cell", x0 + cell * f as f64, y, cell - 1.0, cell - 1.0, &fill);
                c.text(x0 + cell * (f as f64 + 0.5), y + cell * 0.65, "middle", 10.0, &rank.to_string());
            }
        }
    }
    Ok(c.finish())
}

fn calibration(reports: &[RunReport]) -> Result<String> {
    let with: Vec<&RunReport> = reports.iter().filter(|r| !r.folds.is_empty()).collect();
    if with.is_empty() {
        return Err(Error::InvalidInput("no report contains a fold".into()));
    }
    let (w, h) = (560.0, 460.0);
    let (left, right, top, bottom) = (60.0, 400.0, 50.0, 390.0);
    let x_of = |v: f64| left + v * (right - left);
    let y_of = |v: f64| bottom - v * (bottom - top);
    let mut c = Canvas::new(w, h, "Calibration (final fold)");
    c.axes(left, top, right, bottom);
    c.line("diagonal", x_of(0.0), y_of(0.0), x_of(1.0), y_of(1.0), "#888", true);
    for t in [0.0, 0.5, 1.0] {
        c.text(x_of(t), bottom + 16.0, "middle", 11.0, &format!("{t:.1}"));
        c.text(left - 6.0, y_of(t) + 4.0, "end", 11.0, &format!("{t:.1}"));
    }
    c.text((left + right) / 2.0, bottom + 36.0, "middle", 12.0, "mean predicted probability");
    for (m, r) in with.iter().enumerate() {
        let color = PALETTE[m % PALETTE.len()];
        let bins = &r.folds.last().expect("filtered").calibration;
        let pts: Vec<String> = bins
            .iter()
            .map(|b| format!("{:.2},{:.2}", x_of(b.mean_prob), y_of(b.positive_rate)))
            .collect();
        c.raw(format!(
            r#"<polyline class="curve" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        ));
        for b in bins {
            c.raw(format!(
                r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                x_of(b.mean_prob),
                y_of(b.positive_rate)
            ));
        }
        let ly = top + 20.0 * m as f64;
        c.rect("legend-swatch", right + 15.0, ly, 12.0, 12.0, color);
        c.text(right + 32.0, ly + 10.0, "start", 11.0, &label(r));
    }
    Ok(c.finish())
}

/// Renders one figure; errors when the reports lack the block it needs.
pub fn render_figure(figure: Figure, reports: &[RunReport]) -> Result<String> {
    match figure {
        Figure::AccuracyByFold => accuracy_by_fold(reports),
        Figure::PermutationNull => permutation_null(reports),
        Figure::ImportanceHeatmap => importance_heatmap(reports),
        Figure::Calibration => calibration(reports),
    }
}

/// Writes every figure the reports support and explains each one skipped.
pub fn emit_figures(reports: &[RunReport], dir: &Path) -> Result<Vec<FigureStatus>> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("figures need at least one report".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for fig in Figure::ALL {
        match render_figure(fig, reports) {
            Ok(svg) => {
                std::fs::write(dir.join(fig.file_name()), svg)?;
                out.push(FigureStatus {
                    figure: fig,
                    file: Some(fig.file_name().to_string()),
                    notice: None,
                });
            }
            Err(Error::InvalidInput(why)) => {
                log::info!("skipping {}: {why}", fig.file_name());
                out.push(FigureStatus {
                    figure: fig,
                    file: None,
                    notice: Some(why),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Counts elements of `class` in rendered SVG.
pub fn count_class(svg: &str, class: &str) -> usize {
    svg.matches(&format!("class=\"{class}\"")).count()
}
